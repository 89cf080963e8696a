#include "eegdl/array_store.hpp"

#include <fstream>

namespace eegdl {

namespace {

constexpr char kMagic[4] = {'E', 'E', 'G', 'T'};

void write_u32(std::ostream& os, std::uint32_t v) {
  std::uint8_t buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<std::uint8_t>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 4);
}

void write_u64(std::ostream& os, std::uint64_t v) {
  std::uint8_t buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<std::uint8_t>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 8);
}

void write_str(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::istream& is) {
  std::uint8_t buf[4];
  if (!is.read(reinterpret_cast<char*>(buf), 4))
    throw data_error("ShapeCorruption", "truncated container file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& is) {
  std::uint8_t buf[8];
  if (!is.read(reinterpret_cast<char*>(buf), 8))
    throw data_error("ShapeCorruption", "truncated container file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

std::string read_str(std::istream& is) {
  std::uint32_t len = read_u32(is);
  std::string s(len, '\0');
  if (len && !is.read(s.data(), len))
    throw data_error("ShapeCorruption", "truncated container file");
  return s;
}

}  // namespace

void ArrayStore::put_meta(const std::string& key, const std::string& value) {
  for (auto& [k, v] : meta_)
    if (k == key) {
      v = value;
      return;
    }
  meta_.emplace_back(key, value);
}

std::optional<std::string> ArrayStore::get_meta(const std::string& key) const {
  for (const auto& [k, v] : meta_)
    if (k == key) return v;
  return std::nullopt;
}

std::string ArrayStore::require_meta(const std::string& key) const {
  auto v = get_meta(key);
  if (!v) throw data_error("ShapeCorruption", "missing metadata key '" + key + "'");
  return *v;
}

bool ArrayStore::has(const std::string& name) const {
  for (const auto& e : arrays_)
    if (e.name == name) return true;
  return false;
}

const ArrayStore::Entry& ArrayStore::find(const std::string& name) const {
  for (const auto& e : arrays_)
    if (e.name == name) return e;
  throw data_error("ShapeCorruption", "no array named '" + name + "' in container");
}

void ArrayStore::save(const std::filesystem::path& path) const {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw data_error("IoError", "cannot write " + tmp.string());
    os.write(kMagic, 4);
    write_u32(os, kVersion);
    write_u32(os, static_cast<std::uint32_t>(meta_.size()));
    for (const auto& [k, v] : meta_) {
      write_str(os, k);
      write_str(os, v);
    }
    write_u32(os, static_cast<std::uint32_t>(arrays_.size()));
    for (const auto& e : arrays_) {
      write_str(os, e.name);
      os.put(static_cast<char>(e.dtype));
      os.put(static_cast<char>(e.dims.size()));
      for (std::size_t d : e.dims) write_u64(os, d);
      os.write(reinterpret_cast<const char*>(e.payload.data()),
               static_cast<std::streamsize>(e.payload.size()));
    }
    if (!os) throw data_error("IoError", "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

ArrayStore ArrayStore::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw data_error("IoError", "cannot open " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw data_error("FormatVersionMismatch", path.string() + ": not an EEGT container");
  std::uint32_t version = read_u32(is);
  if (version != kVersion)
    throw data_error("FormatVersionMismatch",
                     path.string() + ": unsupported version " + std::to_string(version));
  ArrayStore store;
  std::uint32_t n_meta = read_u32(is);
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = read_str(is);
    std::string v = read_str(is);
    store.meta_.emplace_back(std::move(k), std::move(v));
  }
  std::uint32_t n_arrays = read_u32(is);
  for (std::uint32_t i = 0; i < n_arrays; ++i) {
    Entry e;
    e.name = read_str(is);
    int dtype = is.get();
    int rank = is.get();
    if (dtype < 0 || rank < 0)
      throw data_error("ShapeCorruption", "truncated container file");
    e.dtype = static_cast<std::uint8_t>(dtype);
    if (e.dtype > 1)
      throw data_error("ShapeCorruption", "unknown dtype tag " + std::to_string(dtype));
    std::size_t count = 1;
    for (int d = 0; d < rank; ++d) {
      e.dims.push_back(static_cast<std::size_t>(read_u64(is)));
      count *= e.dims.back();
    }
    std::size_t bytes = count * (e.dtype == 0 ? 4 : 8);
    e.payload.resize(bytes);
    if (bytes && !is.read(reinterpret_cast<char*>(e.payload.data()),
                          static_cast<std::streamsize>(bytes)))
      throw data_error("ShapeCorruption",
                       path.string() + ": declared size exceeds file length for '" + e.name + "'");
    store.arrays_.push_back(std::move(e));
  }
  return store;
}

}  // namespace eegdl
