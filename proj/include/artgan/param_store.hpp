#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "artgan/tensor.hpp"

namespace artgan::nn {

// Learnable tensors are `parameter`s. Batchnorm running statistics live in
// the same store as `buffer`s so they travel with checkpoints; optimizers
// and gradient checks skip them.
enum class EntryKind { parameter, buffer };

struct ParamEntry {
  std::string name;
  std::string group;  // sub-network tag, e.g. "Enc" or "Dec"
  EntryKind kind = EntryKind::parameter;
  Tensor value;
  Tensor grad;  // same shape as value
};

// Named, insertion-ordered collection of tensors with gradient buffers.
class ParamStore {
 public:
  std::size_t add(std::string name, std::string group, EntryKind kind,
                  Tensor value);

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t index_of(const std::string& name) const;
  bool contains(const std::string& name) const {
    return index_.count(name) != 0;
  }

  ParamEntry& entry(std::size_t i) { return entries_.at(i); }
  const ParamEntry& entry(std::size_t i) const { return entries_.at(i); }
  ParamEntry& entry(const std::string& name) { return entries_[index_of(name)]; }
  const ParamEntry& entry(const std::string& name) const {
    return entries_[index_of(name)];
  }

  Tensor& value(std::size_t i) { return entries_.at(i).value; }
  const Tensor& value(std::size_t i) const { return entries_.at(i).value; }
  Tensor& grad(std::size_t i) { return entries_.at(i).grad; }
  const Tensor& grad(std::size_t i) const { return entries_.at(i).grad; }

  const std::vector<ParamEntry>& entries() const noexcept { return entries_; }
  std::vector<ParamEntry>& entries() noexcept { return entries_; }

  void zero_grads() noexcept;
  // Number of scalar learnable values (buffers excluded).
  std::size_t parameter_count() const noexcept;

 private:
  std::vector<ParamEntry> entries_;
  std::map<std::string, std::size_t> index_;
};

// True when every value tensor (parameters and buffers) is bitwise equal.
bool values_bitwise_equal(const ParamStore& a, const ParamStore& b);

}  // namespace artgan::nn
