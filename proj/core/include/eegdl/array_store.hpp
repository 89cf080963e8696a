#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "eegdl/error.hpp"
#include "eegdl/tensor.hpp"

namespace eegdl {

/// Portable container for named dense arrays plus string metadata.
///
/// Byte layout (all integers little-endian):
///   magic "EEGT", u32 version (1)
///   u32 n_meta, then per entry: u32 key_len, key bytes, u32 val_len, val bytes
///   u32 n_arrays, then per array: u32 name_len, name bytes, u8 dtype
///   (0 = f32, 1 = f64), u8 rank, u64 dims[rank], row-major payload
class ArrayStore {
 public:
  struct Entry {
    std::string name;
    std::uint8_t dtype = 0;
    std::vector<std::size_t> dims;
    std::vector<std::uint8_t> payload;
  };

  static constexpr std::uint32_t kVersion = 1;

  void put_meta(const std::string& key, const std::string& value);
  std::optional<std::string> get_meta(const std::string& key) const;
  std::string require_meta(const std::string& key) const;

  template <typename T>
  void put(const std::string& name, const Tensor<T>& t) {
    Entry e;
    e.name = name;
    e.dtype = dtype_tag<T>();
    e.dims = t.shape();
    e.payload.resize(t.size() * sizeof(T));
    std::memcpy(e.payload.data(), t.data().data(), e.payload.size());
    arrays_.push_back(std::move(e));
  }

  template <typename T>
  Tensor<T> get(const std::string& name) const {
    const Entry& e = find(name);
    if (e.dtype != dtype_tag<T>())
      throw data_error("ShapeCorruption", "array '" + name + "' has dtype tag " +
                                              std::to_string(e.dtype));
    std::size_t count = 1;
    for (std::size_t d : e.dims) count *= d;
    if (e.payload.size() != count * sizeof(T))
      throw data_error("ShapeCorruption", "array '" + name + "' payload size mismatch");
    std::vector<T> data(count);
    std::memcpy(data.data(), e.payload.data(), e.payload.size());
    return Tensor<T>(e.dims, std::move(data));
  }

  bool has(const std::string& name) const;
  const std::vector<Entry>& arrays() const { return arrays_; }
  const std::vector<std::pair<std::string, std::string>>& meta() const { return meta_; }

  /// Atomic write: temp file in the target directory, then rename.
  void save(const std::filesystem::path& path) const;
  static ArrayStore load(const std::filesystem::path& path);

 private:
  template <typename T>
  static constexpr std::uint8_t dtype_tag() {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
    return std::is_same_v<T, float> ? 0 : 1;
  }

  const Entry& find(const std::string& name) const;

  std::vector<std::pair<std::string, std::string>> meta_;
  std::vector<Entry> arrays_;
};

}  // namespace eegdl
