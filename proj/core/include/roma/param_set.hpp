// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "roma/tensor.hpp"

namespace roma {

// Named parameter store: value, gradient accumulator and Adam moment buffers
// per entry. Iteration is sorted by name, so anything that walks the set is
// order-deterministic.
class ParamSet {
 public:
  struct Entry {
    Tensor value;
    Tensor grad;
    Tensor m;
    Tensor v;
  };

  Tensor& add(const std::string& name, Tensor init);

  bool contains(const std::string& name) const { return entries_.count(name) > 0; }
  Entry& entry(const std::string& name);
  const Entry& entry(const std::string& name) const;
  Tensor& value(const std::string& name) { return entry(name).value; }
  const Tensor& value(const std::string& name) const { return entry(name).value; }
  Tensor& grad(const std::string& name) { return entry(name).grad; }

  void zero_grad();
  size_t size() const { return entries_.size(); }
  int64_t total_elements() const;
  double grad_norm() const;

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  // Adam step counter; lives with the moments so checkpoints restore bias
  // correction exactly.
  int64_t adam_t = 0;

  // Flat binary file: one versioned ASCII header line, then per parameter in
  // name order: u32 name length, name bytes, u32 rank, u64 extents, raw
  // little-endian f64 payload. Round-trips bit-exactly.
  void save(const std::string& path) const;
  static ParamSet load(const std::string& path);

  // Optimizer moments + step counter, same container format.
  void save_opt_state(const std::string& path) const;
  void load_opt_state(const std::string& path);

  bool values_equal(const ParamSet& other) const;  // bitwise

 private:
  std::map<std::string, Entry> entries_;
};

// Low-level tensor-map container used by both ParamSet files and optimizer
// state files.
void write_tensor_map(const std::string& path,
                      const std::map<std::string, const Tensor*>& tensors);
std::map<std::string, Tensor> read_tensor_map(const std::string& path);

}  // namespace roma
