#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "hyperking/autodiff.hpp"
#include "hyperking/ops.hpp"
#include "hyperking/random.hpp"
#include "hyperking/tensor.hpp"

/// Named parameter storage shared by the generator and the discriminator.
namespace hyperking::nn {

/// Trainable tensors plus batch-norm running moments, both kept in
/// insertion order so serialization and iteration are deterministic.
class ParameterSet {
 public:
  Tensor& add(const std::string& name, Tensor value);
  bool contains(const std::string& name) const { return values_.contains(name); }
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  const std::vector<std::string>& names() const noexcept { return order_; }

  ops::BatchNormState& add_norm(const std::string& name, std::size_t channels);
  ops::BatchNormState& norm(const std::string& name);
  const ops::BatchNormState& norm(const std::string& name) const;
  const std::vector<std::string>& norm_names() const noexcept { return norm_order_; }

  /// Total number of trainable scalars.
  std::size_t scalar_count() const;

  bool operator==(const ParameterSet& other) const;

 private:
  std::vector<std::string> order_;
  std::map<std::string, Tensor> values_;
  std::vector<std::string> norm_order_;
  std::map<std::string, ops::BatchNormState> norms_;
};

/// Every parameter of a set placed on a tape as a leaf.
class Binding {
 public:
  Binding(Tape& tape, const ParameterSet& params, bool requires_grad);

  Var operator[](const std::string& name) const;
  const std::map<std::string, Var>& vars() const noexcept { return vars_; }

 private:
  std::map<std::string, Var> vars_;
};

/// What a forward pass needs besides its input: parameter handles, the
/// mutable running moments, and the normalization mode.
struct Context {
  const Binding& vars;
  ParameterSet& state;
  ops::NormMode mode = ops::NormMode::Train;
  bool update_running = true;
};

/// Uniform in +-sqrt(1 / fan_in).
Tensor uniform_init(const Shape& shape, std::size_t fan_in, Rng& rng);

/// Rounds every parameter and running moment to the nearest float.
void round_to_float(ParameterSet& params);

}  // namespace hyperking::nn
