#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "splab/tensor.hpp"

namespace splab {

// Tensor binary block: magic "SPLT", u32 version=1, u32 rank, u64 dims[],
// f64 little-endian payload.
void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);

// CRC-64/XZ (ECMA-182 polynomial, reflected, inverted in/out); streaming.
class Crc64 {
 public:
  void update(const void* data, std::size_t len);
  std::uint64_t value() const { return ~state_; }

 private:
  std::uint64_t state_ = ~0ULL;
};

std::uint64_t crc64(const void* data, std::size_t len);

// Container shared by checkpoints and dataset files: u64-length-prefixed JSON
// header, named tensor table in the SPLT block format, trailing CRC64 over
// everything before it.
struct Archive {
  nlohmann::json header;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor& find(const std::string& name) const;
  bool contains(const std::string& name) const;
};

void write_archive(const std::string& path, const Archive& archive);
Archive read_archive(const std::string& path);

}  // namespace splab
