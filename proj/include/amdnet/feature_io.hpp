#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "amdnet/errors.hpp"
#include "amdnet/tensor.hpp"

namespace amdnet {

// PRVF feature file layout (little endian):
//   offset 0  : magic "PRVF"
//   offset 4  : u16 version (1)
//   offset 6  : u32 rows
//   offset 10 : u32 cols
//   offset 14 : rows*cols f32, row major
// Total size 14 + 4*rows*cols bytes.

inline constexpr std::uint16_t kFeatureFileVersion = 1;

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char((v >> 8) & 0xff));
}
inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}
inline std::uint16_t get_u16(const unsigned char* p) {
  return std::uint16_t(p[0]) | (std::uint16_t(p[1]) << 8);
}
inline std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

}  // namespace detail

inline void write_feature_file(const std::filesystem::path& path, const Tensor<float>& features) {
  if (features.rank() != 2)
    throw input_error("write_feature_file: expected a matrix, got " + features.shape_str());
  std::string buf;
  buf.reserve(14 + 4 * features.size());
  buf += "PRVF";
  detail::put_u16(buf, kFeatureFileVersion);
  detail::put_u32(buf, static_cast<std::uint32_t>(features.rows()));
  detail::put_u32(buf, static_cast<std::uint32_t>(features.cols()));
  for (std::size_t i = 0; i < features.size(); ++i)
    detail::put_u32(buf, std::bit_cast<std::uint32_t>(features[i]));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("write_feature_file: cannot open " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw data_error("write_feature_file: write failed for " + path.string());
}

inline Tensor<float> load_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("load_feature_file: cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 14)
    throw data_error("load_feature_file: truncated header in " + path.string());
  if (std::memcmp(bytes.data(), "PRVF", 4) != 0)
    throw data_error("load_feature_file: bad magic in " + path.string());
  const std::uint16_t version = detail::get_u16(bytes.data() + 4);
  if (version != kFeatureFileVersion)
    throw data_error("load_feature_file: unsupported version " + std::to_string(version) + " in " +
                     path.string());
  const std::uint32_t rows = detail::get_u32(bytes.data() + 6);
  const std::uint32_t cols = detail::get_u32(bytes.data() + 10);
  const std::size_t expect = 14 + std::size_t(4) * rows * cols;
  if (bytes.size() != expect)
    throw data_error("load_feature_file: declared " + std::to_string(rows) + "x" +
                     std::to_string(cols) + " disagrees with byte length " +
                     std::to_string(bytes.size()) + " in " + path.string());
  Tensor<float> out(rows, cols);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const float v = std::bit_cast<float>(detail::get_u32(bytes.data() + 14 + 4 * i));
    if (std::isnan(v))
      throw data_error("load_feature_file: NaN entry at index " + std::to_string(i) + " in " +
                       path.string());
    out[i] = v;
  }
  return out;
}

}  // namespace amdnet
