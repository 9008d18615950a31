#include "treesmu/param_store.hpp"

#include <cmath>

#include "treesmu/errors.hpp"

namespace treesmu::ad {

ParamId ParamStore::add(std::string key, Tensor value) {
  if (index_.contains(key)) {
    throw ContractError("duplicate parameter key '" + key + "'");
  }
  const auto index = static_cast<std::uint32_t>(entries_.size());
  index_.emplace(key, index);
  Tensor m(value.rows(), value.cols());
  Tensor v(value.rows(), value.cols());
  entries_.push_back({std::move(key), std::move(value), std::move(m), std::move(v)});
  return ParamId{index};
}

std::optional<ParamId> ParamStore::find(std::string_view key) const {
  auto it = index_.find(std::string(key));
  if (it == index_.end()) return std::nullopt;
  return ParamId{it->second};
}

ParamId ParamStore::id(std::string_view key) const {
  if (auto found = find(key)) return *found;
  throw ContractError("unknown parameter key '" + std::string(key) + "'");
}

std::size_t ParamStore::scalar_count() const {
  std::size_t total = 0;
  for (const auto& e : entries_) total += e.value.size();
  return total;
}

std::size_t ParamStore::scalar_count(std::string_view key_prefix) const {
  std::size_t total = 0;
  for (const auto& e : entries_) {
    if (e.key.starts_with(key_prefix)) total += e.value.size();
  }
  return total;
}

void GradMap::accumulate(ParamId id, const Tensor& grad) {
  if (id.index >= grads_.size()) grads_.resize(id.index + 1);
  Tensor& slot = grads_[id.index];
  if (slot.empty()) {
    slot = grad;
    return;
  }
  if (!slot.same_shape(grad)) {
    throw DimensionError("gradient shape " + grad.shape_string() +
                         " does not match accumulated " + slot.shape_string());
  }
  for (std::size_t i = 0; i < slot.size(); ++i) slot[i] += grad[i];
}

void GradMap::accumulate(const GradMap& other) {
  for (std::uint32_t i = 0; i < other.grads_.size(); ++i) {
    if (!other.grads_[i].empty()) accumulate(ParamId{i}, other.grads_[i]);
  }
}

void GradMap::scale(double factor) {
  for (auto& g : grads_) {
    for (double& x : g.data()) x *= factor;
  }
}

void GradMap::clear() {
  for (auto& g : grads_) g = Tensor();
}

void adam_step(ParamStore& store, const GradMap& grads, const AdamConfig& config,
               std::uint64_t t) {
  if (t < 1) throw ContractError("adam step counter must be >= 1");
  const double bias1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  const double bias2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
  for (std::uint32_t i = 0; i < store.size(); ++i) {
    const ParamId id{i};
    if (!grads.contains(id)) continue;
    const Tensor& g = grads.get(id);
    Tensor& theta = store.value(id);
    if (!g.same_shape(theta)) {
      throw DimensionError("gradient for '" + store.key(id) + "' has shape " +
                           g.shape_string() + ", parameter is " + theta.shape_string());
    }
    Tensor& m = store.first_moment(id);
    Tensor& v = store.second_moment(id);
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double grad = g[k] + config.weight_decay * theta[k];
      m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * grad;
      v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * grad * grad;
      const double m_hat = m[k] / bias1;
      const double v_hat = v[k] / bias2;
      theta[k] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
  store.set_step(t);
}

}  // namespace treesmu::ad
