#include "autr/container.hpp"

#include <cstring>
#include <fstream>
#include <set>

namespace autr {

namespace {

constexpr char kMagic[4] = {'A', 'U', 'T', 'R'};
constexpr uint32_t kVersion = 1;

// Little-endian scalar IO. Host is assumed little-endian (checked once).
bool host_is_le() {
  const uint32_t v = 1;
  uint8_t b;
  std::memcpy(&b, &v, 1);
  return b == 1;
}

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

class Reader {
 public:
  Reader(const std::string& path, std::ifstream& in) : path_(path), in_(in) {}

  template <typename T>
  T get(const char* what) {
    T v;
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) fail(what);
    offset_ += sizeof(T);
    return v;
  }

  void get_bytes(void* dst, size_t n, const char* what) {
    in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (!in_) fail(what);
    offset_ += n;
  }

  [[noreturn]] void fail(const std::string& what) {
    throw FormatError("container " + path_ + ": truncated or unreadable " +
                      what + " at byte offset " + std::to_string(offset_));
  }

  size_t offset() const { return offset_; }

 private:
  const std::string& path_;
  std::ifstream& in_;
  size_t offset_ = 0;
};

}  // namespace

void write_container(const std::string& path,
                     const std::vector<ContainerEntry>& entries) {
  if (!host_is_le())
    throw FormatError("container format requires a little-endian host");
  std::set<std::string> names;
  for (const auto& e : entries) {
    if (!names.insert(e.name).second)
      throw FormatError("container: duplicate entry name '" + e.name + "'");
    if (static_cast<int64_t>(e.values.size()) != shape_numel(e.shape))
      throw FormatError("container: entry '" + e.name + "' has " +
                        std::to_string(e.values.size()) + " values for shape " +
                        shape_str(e.shape));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write container file: " + path);
  out.write(kMagic, 4);
  put<uint32_t>(out, kVersion);
  put<uint32_t>(out, static_cast<uint32_t>(entries.size()));
  for (const auto& e : entries) {
    put<uint16_t>(out, static_cast<uint16_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put<uint8_t>(out, static_cast<uint8_t>(e.dtype));
    put<uint8_t>(out, static_cast<uint8_t>(e.shape.size()));
    for (int64_t d : e.shape) put<uint32_t>(out, static_cast<uint32_t>(d));
    if (e.dtype == ContainerEntry::kF64) {
      out.write(reinterpret_cast<const char*>(e.values.data()),
                static_cast<std::streamsize>(e.values.size() * 8));
    } else {
      for (double v : e.values) put<float>(out, static_cast<float>(v));
    }
  }
  if (!out) throw FormatError("write failed for container file: " + path);
}

std::vector<ContainerEntry> read_container(const std::string& path) {
  if (!host_is_le())
    throw FormatError("container format requires a little-endian host");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open container file: " + path);
  Reader r(path, in);

  char magic[4];
  r.get_bytes(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("container " + path + ": bad magic at byte offset 0");
  const uint32_t version = r.get<uint32_t>("version");
  if (version != kVersion)
    throw FormatError("container " + path + ": unsupported version " +
                      std::to_string(version) + " at byte offset 4");
  const uint32_t count = r.get<uint32_t>("entry count");

  std::vector<ContainerEntry> entries;
  entries.reserve(count);
  std::set<std::string> names;
  for (uint32_t i = 0; i < count; ++i) {
    ContainerEntry e;
    const uint16_t name_len = r.get<uint16_t>("name length");
    e.name.resize(name_len);
    r.get_bytes(e.name.data(), name_len, "name");
    if (!names.insert(e.name).second)
      throw FormatError("container " + path + ": duplicate entry name '" +
                        e.name + "' at byte offset " +
                        std::to_string(r.offset()));
    const uint8_t dtype = r.get<uint8_t>("dtype");
    if (dtype != ContainerEntry::kF32 && dtype != ContainerEntry::kF64)
      throw FormatError("container " + path + ": bad dtype " +
                        std::to_string(dtype) + " at byte offset " +
                        std::to_string(r.offset() - 1));
    e.dtype = static_cast<ContainerEntry::Dtype>(dtype);
    const uint8_t ndim = r.get<uint8_t>("ndim");
    e.shape.resize(ndim);
    for (uint8_t d = 0; d < ndim; ++d)
      e.shape[d] = r.get<uint32_t>("dimension");
    const int64_t n = shape_numel(e.shape);
    e.values.resize(static_cast<size_t>(n));
    if (e.dtype == ContainerEntry::kF64) {
      r.get_bytes(e.values.data(), static_cast<size_t>(n) * 8, "f64 data");
    } else {
      std::vector<float> tmp(static_cast<size_t>(n));
      r.get_bytes(tmp.data(), static_cast<size_t>(n) * 4, "f32 data");
      for (int64_t j = 0; j < n; ++j) e.values[j] = tmp[j];
    }
    entries.push_back(std::move(e));
  }
  // No trailing garbage.
  char extra;
  in.read(&extra, 1);
  if (in.gcount() != 0)
    throw FormatError("container " + path + ": trailing bytes at offset " +
                      std::to_string(r.offset()));
  return entries;
}

const ContainerEntry& find_entry(const std::vector<ContainerEntry>& entries,
                                 const std::string& name) {
  for (const auto& e : entries)
    if (e.name == name) return e;
  throw FormatError("container entry not found: " + name);
}

}  // namespace autr
