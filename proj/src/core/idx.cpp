#include "idx.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>

#include "error.hpp"

namespace l0trunc {

namespace {

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "0x%08X", v);
  return buf;
}

std::uint32_t read_be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
         std::uint32_t{p[3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::kIo, "cannot open file: " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::size_t IdxTensor::item_size() const {
  std::size_t n = 1;
  for (std::size_t i = 1; i < dims.size(); ++i) n *= dims[i];
  return n;
}

IdxTensor parse_idx(std::span<const std::uint8_t> bytes, std::uint32_t expected_magic) {
  require(bytes.size() >= 4, ErrorCode::kFormat, "truncated IDX file: missing magic");
  IdxTensor t;
  t.magic = read_be32(bytes.data());
  require(t.magic == expected_magic, ErrorCode::kFormat,
          "bad IDX magic " + hex32(t.magic) + ", expected " + hex32(expected_magic));

  const std::size_t ndims = t.magic & 0xFF;
  const std::size_t header = 4 + 4 * ndims;
  require(bytes.size() >= header, ErrorCode::kFormat, "truncated IDX file: incomplete header");

  std::size_t total = 1;
  for (std::size_t i = 0; i < ndims; ++i) {
    const std::uint32_t dim = read_be32(bytes.data() + 4 + 4 * i);
    t.dims.push_back(dim);
    require(dim == 0 || total <= std::numeric_limits<std::size_t>::max() / dim,
            ErrorCode::kFormat, "IDX dimension overflow");
    total *= dim;
  }
  require(bytes.size() - header >= total, ErrorCode::kFormat,
          "truncated IDX file: expected " + std::to_string(total) + " data bytes, found " +
              std::to_string(bytes.size() - header));
  t.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header),
                bytes.begin() + static_cast<std::ptrdiff_t>(header + total));
  return t;
}

IdxTensor load_idx_images(const std::string& path) {
  const auto bytes = read_file(path);
  try {
    return parse_idx(bytes, kIdxImageMagic);
  } catch (const Error& e) {
    fail(e.code(), path + ": " + e.what());
  }
}

IdxTensor load_idx_labels(const std::string& path) {
  const auto bytes = read_file(path);
  try {
    return parse_idx(bytes, kIdxLabelMagic);
  } catch (const Error& e) {
    fail(e.code(), path + ": " + e.what());
  }
}

void write_idx(const std::string& path, const IdxTensor& tensor) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::kIo, "cannot write file: " + path);
  write_be32(out, tensor.magic);
  for (auto dim : tensor.dims) write_be32(out, dim);
  out.write(reinterpret_cast<const char*>(tensor.data.data()),
            static_cast<std::streamsize>(tensor.data.size()));
  require(out.good(), ErrorCode::kIo, "failed writing " + path);
}

}  // namespace l0trunc
