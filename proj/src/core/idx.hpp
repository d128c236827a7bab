#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace l0trunc {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

// Unsigned-byte IDX tensor. Header fields are big-endian on disk.
struct IdxTensor {
  std::uint32_t magic = 0;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;

  std::size_t count() const { return dims.empty() ? 0 : dims.front(); }
  std::size_t item_size() const;
};

IdxTensor parse_idx(std::span<const std::uint8_t> bytes, std::uint32_t expected_magic);
IdxTensor load_idx_images(const std::string& path);
IdxTensor load_idx_labels(const std::string& path);
void write_idx(const std::string& path, const IdxTensor& tensor);

}  // namespace l0trunc
