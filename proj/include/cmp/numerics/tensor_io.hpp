#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "cmp/numerics/tensor.hpp"

namespace cmp::num {

// Binary tensor layout, all integers little-endian:
//   "CMPT" | u32 version | u32 dtype (0 = f32, 1 = f64) | u32 rank |
//   u64 dim[rank] | payload (row-major, little-endian IEEE-754)
inline constexpr char kTensorMagic[4] = {'C', 'M', 'P', 'T'};
inline constexpr std::uint32_t kTensorFormatVersion = 1;

template <typename T>
void write_tensor(std::ostream& out, const Tensor<T>& t);
/// Reads either dtype and converts to T.
template <typename T>
Tensor<T> read_tensor(std::istream& in);

template <typename T>
void save_tensor(const std::filesystem::path& path, const Tensor<T>& t);
template <typename T>
Tensor<T> load_tensor(const std::filesystem::path& path);

/// Named-tensor container: "CMPT" | u32 version | u32 kind = 0xC0 | u64 count |
/// count × (u32 name_len | name bytes | tensor record).
template <typename T>
void save_named_tensors(const std::filesystem::path& path,
                        const std::vector<std::pair<std::string, Tensor<T>>>& tensors);
template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> load_named_tensors(const std::filesystem::path& path);

}  // namespace cmp::num
