#include "cmp/numerics/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "cmp/common/error.hpp"

namespace cmp::num {
namespace {

constexpr std::uint32_t kContainerKind = 0xC0;

template <typename U>
void put(std::ostream& out, U v) {
  static_assert(std::is_trivially_copyable_v<U>);
  unsigned char bytes[sizeof(U)];
  std::memcpy(bytes, &v, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(U));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <typename U>
U get(std::istream& in) {
  unsigned char bytes[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(U))) throw IoError("truncated CMPT stream");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(U));
  U v;
  std::memcpy(&v, bytes, sizeof(U));
  return v;
}

void read_magic(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kTensorMagic, 4) != 0) throw IoError("bad CMPT magic");
  const auto version = get<std::uint32_t>(in);
  if (version != kTensorFormatVersion) throw IoError("unsupported CMPT version " + std::to_string(version));
}

template <typename T>
Tensor<T> read_body(std::istream& in, std::uint32_t dtype) {
  const auto rank = get<std::uint32_t>(in);
  if (rank == 0 || rank > 8) throw IoError("CMPT rank out of range");
  Shape shape(rank);
  for (auto& d : shape) d = static_cast<std::size_t>(get<std::uint64_t>(in));
  std::vector<T> data(numel(shape));
  for (auto& v : data) {
    if (dtype == static_cast<std::uint32_t>(DType::kFloat32)) {
      v = static_cast<T>(get<float>(in));
    } else if (dtype == static_cast<std::uint32_t>(DType::kFloat64)) {
      v = static_cast<T>(get<double>(in));
    } else {
      throw IoError("unknown CMPT dtype " + std::to_string(dtype));
    }
  }
  return Tensor<T>(std::move(shape), std::move(data));
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

}  // namespace

template <typename T>
void write_tensor(std::ostream& out, const Tensor<T>& t) {
  out.write(kTensorMagic, 4);
  put<std::uint32_t>(out, kTensorFormatVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(dtype_of<T>()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
  for (T v : t.data()) put<T>(out, v);
  if (!out) throw IoError("failed writing CMPT tensor");
}

template <typename T>
Tensor<T> read_tensor(std::istream& in) {
  read_magic(in);
  const auto dtype = get<std::uint32_t>(in);
  return read_body<T>(in, dtype);
}

template <typename T>
void save_tensor(const std::filesystem::path& path, const Tensor<T>& t) {
  auto out = open_out(path);
  write_tensor(out, t);
}

template <typename T>
Tensor<T> load_tensor(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_tensor<T>(in);
}

template <typename T>
void save_named_tensors(const std::filesystem::path& path,
                        const std::vector<std::pair<std::string, Tensor<T>>>& tensors) {
  auto out = open_out(path);
  out.write(kTensorMagic, 4);
  put<std::uint32_t>(out, kTensorFormatVersion);
  put<std::uint32_t>(out, kContainerKind);
  put<std::uint64_t>(out, tensors.size());
  for (const auto& [name, t] : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_tensor(out, t);
  }
  if (!out) throw IoError("failed writing " + path.string());
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> load_named_tensors(const std::filesystem::path& path) {
  auto in = open_in(path);
  read_magic(in);
  if (get<std::uint32_t>(in) != kContainerKind) throw IoError(path.string() + " is not a CMPT container");
  const auto count = get<std::uint64_t>(in);
  std::vector<std::pair<std::string, Tensor<T>>> result;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(in);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw IoError("truncated tensor name in " + path.string());
    result.emplace_back(std::move(name), read_tensor<T>(in));
  }
  return result;
}

#define CMP_INSTANTIATE_IO(T)                                                                         \
  template void write_tensor(std::ostream&, const Tensor<T>&);                                        \
  template Tensor<T> read_tensor(std::istream&);                                                      \
  template void save_tensor(const std::filesystem::path&, const Tensor<T>&);                          \
  template Tensor<T> load_tensor(const std::filesystem::path&);                                       \
  template void save_named_tensors(const std::filesystem::path&,                                      \
                                   const std::vector<std::pair<std::string, Tensor<T>>>&);            \
  template std::vector<std::pair<std::string, Tensor<T>>> load_named_tensors(const std::filesystem::path&);

CMP_INSTANTIATE_IO(float)
CMP_INSTANTIATE_IO(double)

}  // namespace cmp::num
