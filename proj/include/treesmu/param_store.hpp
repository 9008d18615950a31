#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "treesmu/tensor.hpp"

namespace treesmu::ad {

struct ParamId {
  std::uint32_t index = 0;
  bool operator==(const ParamId&) const = default;
};

// Named trainable tensors plus their Adam moments. Insertion order is the
// iteration order, so a store built by the same code is laid out identically.
class ParamStore {
 public:
  ParamId add(std::string key, Tensor value);

  std::optional<ParamId> find(std::string_view key) const;
  ParamId id(std::string_view key) const;  // throws ContractError if absent
  const std::string& key(ParamId id) const { return entries_[id.index].key; }

  Tensor& value(ParamId id) { return entries_[id.index].value; }
  const Tensor& value(ParamId id) const { return entries_[id.index].value; }
  Tensor& first_moment(ParamId id) { return entries_[id.index].first_moment; }
  const Tensor& first_moment(ParamId id) const { return entries_[id.index].first_moment; }
  Tensor& second_moment(ParamId id) { return entries_[id.index].second_moment; }
  const Tensor& second_moment(ParamId id) const { return entries_[id.index].second_moment; }

  std::size_t size() const { return entries_.size(); }
  // Total number of scalar parameters.
  std::size_t scalar_count() const;
  std::size_t scalar_count(std::string_view key_prefix) const;

  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t step) { step_ = step; }

 private:
  struct Entry {
    std::string key;
    Tensor value;
    Tensor first_moment;
    Tensor second_moment;
  };
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::uint64_t step_ = 0;
};

// Sparse accumulator of parameter gradients, indexed like a ParamStore.
// Parameters never touched stay absent.
class GradMap {
 public:
  GradMap() = default;
  explicit GradMap(std::size_t param_count) : grads_(param_count) {}

  void accumulate(ParamId id, const Tensor& grad);
  void accumulate(const GradMap& other);
  bool contains(ParamId id) const {
    return id.index < grads_.size() && !grads_[id.index].empty();
  }
  const Tensor& get(ParamId id) const { return grads_[id.index]; }
  Tensor& mutable_get(ParamId id) { return grads_[id.index]; }
  void scale(double factor);
  void clear();
  std::size_t capacity() const { return grads_.size(); }

 private:
  std::vector<Tensor> grads_;
};

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 1e-5;
  double epsilon = 1e-8;
};

// One Adam update at step t (t >= 1) with bias correction. Weight decay is
// folded into the gradient (g + wd * theta) before the moments. Parameters
// without an entry in `grads` are left untouched, moments included.
void adam_step(ParamStore& store, const GradMap& grads, const AdamConfig& config,
               std::uint64_t t);

}  // namespace treesmu::ad
