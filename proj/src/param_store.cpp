#include "artgan/param_store.hpp"

#include "artgan/error.hpp"

namespace artgan::nn {

std::size_t ParamStore::add(std::string name, std::string group,
                            EntryKind kind, Tensor value) {
  if (index_.count(name)) {
    throw ConfigError("duplicate parameter name '" + name + "'");
  }
  const std::size_t i = entries_.size();
  index_.emplace(name, i);
  Tensor grad = Tensor::zeros_like(value);
  entries_.push_back(ParamEntry{std::move(name), std::move(group), kind,
                                std::move(value), std::move(grad)});
  return i;
}

std::size_t ParamStore::index_of(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) {
    throw ConfigError("no parameter named '" + name + "'");
  }
  return it->second;
}

void ParamStore::zero_grads() noexcept {
  for (auto& e : entries_) e.grad.fill(0.0);
}

std::size_t ParamStore::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& e : entries_) {
    if (e.kind == EntryKind::parameter) n += e.value.size();
  }
  return n;
}

bool values_bitwise_equal(const ParamStore& a, const ParamStore& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.entry(i).name != b.entry(i).name ||
        !bitwise_equal(a.value(i), b.value(i)))
      return false;
  }
  return true;
}

}  // namespace artgan::nn
