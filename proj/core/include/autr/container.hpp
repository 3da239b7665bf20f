#pragma once

#include <string>
#include <vector>

#include "autr/tensor.hpp"

namespace autr {

/// One named tensor in a container file. Values are held as f64 in memory;
/// dtype controls the on-disk width.
struct ContainerEntry {
  enum Dtype : uint8_t { kF32 = 1, kF64 = 2 };

  std::string name;
  Dtype dtype = kF64;
  Shape shape;
  std::vector<double> values;

  static ContainerEntry f64(std::string name, const Tensor& t) {
    return {std::move(name), kF64, t.shape(), t.data()};
  }
};

/// Binary layout (all integers and floats little-endian):
///   magic "AUTR", version u32 = 1, entry count u32;
///   per entry: name length u16, UTF-8 name, dtype u8 (1 = f32, 2 = f64),
///   ndim u8, each dim u32, raw values.
void write_container(const std::string& path,
                     const std::vector<ContainerEntry>& entries);
std::vector<ContainerEntry> read_container(const std::string& path);

/// Lookup helper; throws FormatError when the entry is missing.
const ContainerEntry& find_entry(const std::vector<ContainerEntry>& entries,
                                 const std::string& name);

}  // namespace autr
