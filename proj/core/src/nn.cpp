#include "hyperking/nn.hpp"

#include <cmath>

namespace hyperking::nn {
namespace {

void round_tensor(Tensor& t) {
  for (auto& v : t.data()) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace

Tensor& ParameterSet::add(const std::string& name, Tensor value) {
  if (values_.contains(name)) throw Error("duplicate parameter '" + name + "'");
  order_.push_back(name);
  return values_.emplace(name, std::move(value)).first->second;
}

Tensor& ParameterSet::at(const std::string& name) {
  auto it = values_.find(name);
  if (it == values_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

const Tensor& ParameterSet::at(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

ops::BatchNormState& ParameterSet::add_norm(const std::string& name, std::size_t channels) {
  if (norms_.contains(name)) throw Error("duplicate norm state '" + name + "'");
  norm_order_.push_back(name);
  return norms_.emplace(name, ops::BatchNormState::fresh(channels)).first->second;
}

ops::BatchNormState& ParameterSet::norm(const std::string& name) {
  auto it = norms_.find(name);
  if (it == norms_.end()) throw Error("unknown norm state '" + name + "'");
  return it->second;
}

const ops::BatchNormState& ParameterSet::norm(const std::string& name) const {
  auto it = norms_.find(name);
  if (it == norms_.end()) throw Error("unknown norm state '" + name + "'");
  return it->second;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : values_) n += t.numel();
  return n;
}

bool ParameterSet::operator==(const ParameterSet& other) const {
  if (order_ != other.order_ || norm_order_ != other.norm_order_ || values_ != other.values_) return false;
  for (const auto& [name, s] : norms_) {
    const auto& o = other.norms_.at(name);
    if (!(s.running_mean == o.running_mean) || !(s.running_var == o.running_var)) return false;
  }
  return true;
}

Binding::Binding(Tape& tape, const ParameterSet& params, bool requires_grad) {
  for (const auto& name : params.names()) vars_.emplace(name, tape.leaf(params.at(name), requires_grad));
}

Var Binding::operator[](const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw Error("parameter '" + name + "' is not bound");
  return it->second;
}

Tensor uniform_init(const Shape& shape, std::size_t fan_in, Rng& rng) {
  if (fan_in == 0) throw Error("fan_in must be positive");
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  Tensor t(shape, 0.0);
  for (auto& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

void round_to_float(ParameterSet& params) {
  for (const auto& name : params.names()) round_tensor(params.at(name));
  for (const auto& name : params.norm_names()) {
    auto& s = params.norm(name);
    round_tensor(s.running_mean);
    round_tensor(s.running_var);
  }
}

}  // namespace hyperking::nn
