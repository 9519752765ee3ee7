#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cmbert/params.hpp"

namespace cmbert {

// Binary tensor container. Layout, all integers 64-bit little-endian:
//   magic "CMBERT01"
//   u64 tensor_count
//   per tensor: u64 name_length, UTF-8 name bytes,
//               u64 rank, u64 dims[rank],
//               row-major f32 little-endian data
//   u64 metadata_length, UTF-8 metadata bytes (JSON)
// Round-trips are bit-exact. Writes go to a temp file renamed into place so
// a crash never leaves a truncated container behind.

struct StoredTensor {
  std::vector<std::uint64_t> dims;
  std::vector<float> data;
};

struct Container {
  // Insertion-ordered names so round-trips preserve layout.
  std::vector<std::string> order;
  std::map<std::string, StoredTensor> tensors;
  std::string metadata;

  void add(const std::string& name, std::vector<std::uint64_t> dims, const float* data,
           std::size_t count);
};

void write_container(const Container& c, const std::string& path);

// Throws IoError naming the first tensor at which the file ends or breaks.
Container read_container(const std::string& path);

// Parameter-store helpers. Loading validates the census (names and shapes)
// against the store before any value is touched.
void params_to_container(const ParameterStore<float>& params, Container& c,
                         const std::string& prefix = "");
void params_from_container(ParameterStore<float>& params, const Container& c,
                           const std::string& prefix = "");

}  // namespace cmbert
