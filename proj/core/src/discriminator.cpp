#include "hyperking/discriminator.hpp"

#include <numbers>

namespace hyperking::model {
namespace {

constexpr double kSlope = 0.2;

Shape item_shape(const Shape& s) { return s.size() == 4 ? Shape(s.begin() + 1, s.end()) : s; }

std::size_t batch_items(const Var& x, std::size_t item_rank) {
  return x.shape().size() == item_rank + 1 ? x.shape()[0] : 1;
}

}  // namespace

DiscriminatorConfig build_discriminator_config(Preset preset, std::size_t bands, std::size_t spatial, int em_size,
                                               qlayers::Encoding encoding) {
  if (em_size != 2 && em_size != 4 && em_size != 8) {
    throw Error("entanglement module size must be 2, 4 or 8 qubits, got " + std::to_string(em_size));
  }
  DiscriminatorConfig cfg;
  cfg.preset = preset;
  cfg.bands = bands;
  cfg.spatial = spatial;
  cfg.em_size = em_size;
  cfg.encoding = encoding;
  if (preset == Preset::Full) {
    if (bands != 172 || spatial != 128) throw Error("full preset expects 172 bands at 128x128");
    cfg.grid = 16;
    cfg.head_hidden = 16;
  } else {
    if (bands != 8 || spatial != 32) throw Error("mini preset expects 8 bands at 32x32");
    cfg.grid = em_size == 8 && encoding == qlayers::Encoding::Amplitude ? 16 : 8;
    cfg.head_hidden = 8;
  }
  const std::size_t width = encoding == qlayers::Encoding::Amplitude ? std::size_t{1} << em_size
                                                                      : static_cast<std::size_t>(em_size);
  if (cfg.pooled_size() % width != 0) {
    throw ShapeError("pooled size " + std::to_string(cfg.pooled_size()) + " is not a multiple of the register width " +
                     std::to_string(width));
  }
  cfg.registers = cfg.pooled_size() / width;

  const std::size_t r = cfg.registers, n = static_cast<std::size_t>(em_size);
  cfg.trace = {
      {"Input", {bands, spatial, spatial}},
      {"DS Module", {2, cfg.grid, cfg.grid}},
      {"Reshape", {r, width}},
      {"Data Embedding", {r, n}},
      {"Unitary Gate 1", {r, n}},
      {"Unitary Gate 2", {r, n}},
  };
  for (int k = em_size - 1; k >= 0; --k) {
    std::string label = "EM(";
    for (int t = em_size - 1; t >= 0; --t)
      if (t != k) label += std::to_string(t);
    cfg.trace.push_back({label + "|" + std::to_string(k) + ")", {r, n}});
  }
  cfg.trace.push_back({"Unitary Gate 3", {r, n}});
  cfg.trace.push_back({"Unitary Gate 4", {r, n}});
  cfg.trace.push_back({"QC Measurement", {r, n}});
  cfg.trace.push_back({"Reshape", {1, r * n}});
  cfg.trace.push_back({"Sigmoid Module", {1, 1}});
  return cfg;
}

qlayers::Circuit he_classifier_circuit(int em_size, qlayers::Encoding encoding) {
  using qlayers::Axis;
  qlayers::Circuit c(em_size, encoding);
  c.add_rotation_layer(Axis::X);
  c.add_rotation_layer(Axis::Z);
  for (int k = em_size - 1; k >= 0; --k) {
    std::vector<int> targets;
    for (int t = em_size - 1; t >= 0; --t)
      if (t != k) targets.push_back(t);
    c.add_em_module(k, targets);
  }
  c.add_rotation_layer(Axis::X);
  c.add_rotation_layer(Axis::Z);
  std::vector<int> wires(static_cast<std::size_t>(em_size));
  for (int q = 0; q < em_size; ++q) wires[static_cast<std::size_t>(q)] = q;
  c.set_measurement(qsim::Pauli::X, wires);
  return c;
}

nn::ParameterSet init_discriminator(const DiscriminatorConfig& config, std::uint64_t seed) {
  nn::ParameterSet p;
  Rng rng(derive_seed(seed, 0x44));
  p.add("d.ds.gamma", Tensor({config.bands}, 1.0));
  p.add("d.ds.beta", Tensor({config.bands}, 0.0));
  p.add_norm("d.ds.bn", config.bands);
  const auto circuit = he_classifier_circuit(config.em_size, config.encoding);
  Tensor angles({circuit.parameter_count()}, 0.0);
  for (auto& a : angles.data()) a = rng.uniform(-std::numbers::pi, std::numbers::pi);
  p.add("d.quantum", std::move(angles));
  const std::size_t in = config.classifier_outputs(), hidden = config.head_hidden;
  p.add("d.head1.weight", nn::uniform_init({hidden, in}, in, rng));
  p.add("d.head1.bias", Tensor({hidden}, 0.0));
  p.add("d.head2.weight", nn::uniform_init({1, hidden}, hidden, rng));
  p.add("d.head2.bias", Tensor({1}, 0.0));
  return p;
}

Var ds_forward(const DiscriminatorConfig& config, nn::Context& ctx, Var input) {
  const Shape expected{config.bands, config.spatial, config.spatial};
  const auto& s = input.shape();
  if ((s.size() != 3 && s.size() != 4) || item_shape(s) != expected) {
    throw ShapeError("discriminator expects input " + shape_to_string(expected) + " (optionally batched), got " +
                     shape_to_string(s));
  }
  Var x = ops::batch_norm_2d(input, ctx.vars["d.ds.gamma"], ctx.vars["d.ds.beta"], ctx.mode,
                             ctx.state.norm("d.ds.bn"), ctx.update_running);
  x = ops::leaky_relu(x, kSlope);
  return ops::adaptive_dual_pool(x, config.grid, config.grid);
}

Var he_classifier_forward(const DiscriminatorConfig& config, nn::Context& ctx, Var pooled) {
  const Shape expected{2, config.grid, config.grid};
  const auto& s = pooled.shape();
  if ((s.size() != 3 && s.size() != 4) || item_shape(s) != expected) {
    throw ShapeError("classifier expects pooled input " + shape_to_string(expected) + ", got " + shape_to_string(s));
  }
  const std::size_t items = batch_items(pooled, 3);
  const auto& circuit = [&]() -> const qlayers::Circuit& {
    static const qlayers::Circuit table[2][3] = {
        {he_classifier_circuit(2, qlayers::Encoding::Angle), he_classifier_circuit(4, qlayers::Encoding::Angle),
         he_classifier_circuit(8, qlayers::Encoding::Angle)},
        {he_classifier_circuit(2, qlayers::Encoding::Amplitude), he_classifier_circuit(4, qlayers::Encoding::Amplitude),
         he_classifier_circuit(8, qlayers::Encoding::Amplitude)}};
    const int e = config.encoding == qlayers::Encoding::Amplitude ? 1 : 0;
    const int k = config.em_size == 2 ? 0 : config.em_size == 4 ? 1 : 2;
    return table[e][k];
  }();
  Var rows = ops::reshape(pooled, {items * config.registers, circuit.feature_width()});
  Var measured = qlayers::circuit_layer(circuit, rows, ctx.vars["d.quantum"]);
  if (s.size() == 4) return ops::reshape(measured, {items, config.classifier_outputs()});
  return ops::reshape(measured, {config.classifier_outputs()});
}

Var discriminator_forward(const DiscriminatorConfig& config, nn::Context& ctx, Var input,
                          std::vector<TraceRow>* trace) {
  const bool batched = input.shape().size() == 4;
  if (trace) trace->push_back({"Input", item_shape(input.shape())});
  Var pooled = ds_forward(config, ctx, input);
  if (trace) trace->push_back({"DS Module", item_shape(pooled.shape())});
  Var features = he_classifier_forward(config, ctx, pooled);
  if (trace) {
    // Register-level rows are fixed by the circuit; record them from the config.
    for (std::size_t i = 2; i + 2 < config.trace.size(); ++i) trace->push_back(config.trace[i]);
    trace->push_back({"Reshape", {1, features.shape().back()}});
  }
  Var h = ops::sigmoid(ops::affine(features, ctx.vars["d.head1.weight"], ctx.vars["d.head1.bias"]));
  Var out = ops::sigmoid(ops::affine(h, ctx.vars["d.head2.weight"], ctx.vars["d.head2.bias"]));
  if (trace) trace->push_back({"Sigmoid Module", {1, out.shape().back()}});
  return ops::reshape(out, batched ? Shape{input.shape()[0]} : Shape{});
}

}  // namespace hyperking::model
