#include "hyperking/generator.hpp"

#include <numbers>

namespace hyperking::model {
namespace {

using Kind = LayerSpec::Kind;

constexpr double kSlope = 0.2;

LayerSpec cb(std::size_t out, std::size_t kernel, std::size_t padding) { return {Kind::ConvBlock, out, kernel, padding, {}}; }
LayerSpec tcb(std::size_t out) { return {Kind::TConvBlock, out, 3, 0, {}}; }
LayerSpec conv(std::size_t out, std::size_t kernel, std::size_t padding) { return {Kind::Conv, out, kernel, padding, {}}; }
LayerSpec pool() { return {Kind::MaxPool, 0, 0, 0, {}}; }
LayerSpec up() { return {Kind::Upsample, 0, 0, 0, {}}; }

// 2x2 max-pool, CB(x,3,0), CB(2x,3,1), then CB(2x,3,0) repeated y times.
std::vector<LayerSpec> mcb(std::size_t x, std::size_t y) {
  std::vector<LayerSpec> out{pool(), cb(x, 3, 0), cb(2 * x, 3, 1)};
  for (std::size_t i = 0; i < y; ++i) out.push_back(cb(2 * x, 3, 0));
  return out;
}

template <typename... Parts>
std::vector<LayerSpec> concat(Parts&&... parts) {
  std::vector<LayerSpec> out;
  (out.insert(out.end(), parts.begin(), parts.end()), ...);
  return out;
}

std::vector<LayerSpec> repeat(const LayerSpec& layer, std::size_t n) { return std::vector<LayerSpec>(n, layer); }

std::string layer_label(const LayerSpec& l) {
  switch (l.kind) {
    case Kind::ConvBlock: return "CB(" + std::to_string(l.out_channels) + "," + std::to_string(l.kernel) + "," + std::to_string(l.padding) + ")";
    case Kind::TConvBlock: return "TCB(" + std::to_string(l.out_channels) + "," + std::to_string(l.kernel) + ")";
    case Kind::Conv: return "Conv(" + std::to_string(l.out_channels) + "," + std::to_string(l.kernel) + "," + std::to_string(l.padding) + ")";
    case Kind::MaxPool: return "MaxPool(2)";
    case Kind::Upsample: return "Up(2)";
  }
  return "?";
}

// Propagates (C, H, W) through a layer, throwing with the layer named on failure.
Shape propagate(const Shape& in, const LayerSpec& l, const std::string& where) {
  const std::size_t c = in[0], h = in[1], w = in[2];
  auto fail = [&](const std::string& why) {
    throw ShapeError("generator layer " + where + " " + layer_label(l) + " on input " + shape_to_string(in) + ": " + why);
  };
  switch (l.kind) {
    case Kind::ConvBlock:
    case Kind::Conv: {
      if (l.kernel % 2 == 0) fail("kernel must be odd");
      if (h + 2 * l.padding < l.kernel || w + 2 * l.padding < l.kernel) fail("input smaller than kernel");
      return {l.out_channels, h + 2 * l.padding - l.kernel + 1, w + 2 * l.padding - l.kernel + 1};
    }
    case Kind::TConvBlock: return {l.out_channels, h + l.kernel - 1, w + l.kernel - 1};
    case Kind::MaxPool:
      if (h % 2 != 0 || w % 2 != 0) fail("pooling needs even extents");
      return {c, h / 2, w / 2};
    case Kind::Upsample: return {c, 2 * h, 2 * w};
  }
  fail("unknown layer");
  return {};
}

void name_layers(std::vector<Stage>& stages, const std::string& prefix) {
  for (std::size_t s = 0; s < stages.size(); ++s)
    for (std::size_t i = 0; i < stages[s].layers.size(); ++i)
      stages[s].layers[i].name = prefix + std::to_string(s + 1) + "." + std::to_string(i);
}

void quantum_trace_rows(std::vector<TraceRow>& rows, std::size_t registers, std::size_t channels) {
  const std::size_t r = registers;
  rows.push_back({"Reshape", {r, 4}});
  rows.push_back({"Data Embedding", {r, 4}});
  rows.push_back({"Unitary Gate 1", {r, 4}});
  rows.push_back({"Reshape", {2 * r, 2}});
  rows.push_back({"Unitary Gate 2", {2 * r, 2}});
  rows.push_back({"Reshape", {r, 4}});
  rows.push_back({"Unitary Gate 3", {r, 4}});
  rows.push_back({"Reshape", {2 * r, 2}});
  rows.push_back({"Unitary Gate 4", {2 * r, 2}});
  rows.push_back({"Reshape", {r, 4}});
  rows.push_back({"Unitary Gate 5", {r, 4}});
  rows.push_back({"CCNOT(0,1,2)", {r, 4}});
  rows.push_back({"CCNOT(1,2,3)", {r, 4}});
  rows.push_back({"CCNOT(2,3,0)", {r, 4}});
  rows.push_back({"CCNOT(3,0,1)", {r, 4}});
  rows.push_back({"QC Measurement", {r, 2}});
  rows.push_back({"Reshape", {channels / 2, 2, 2}});
}

Var apply_layer(const LayerSpec& l, nn::Context& ctx, Var x) {
  const auto& v = ctx.vars;
  switch (l.kind) {
    case Kind::ConvBlock: {
      x = ops::conv2d(x, v[l.name + ".weight"], v[l.name + ".bias"], l.padding);
      x = ops::batch_norm_2d(x, v[l.name + ".gamma"], v[l.name + ".beta"], ctx.mode, ctx.state.norm(l.name + ".bn"),
                             ctx.update_running);
      return ops::leaky_relu(x, kSlope);
    }
    case Kind::TConvBlock: {
      x = ops::transposed_conv2d(x, v[l.name + ".weight"], v[l.name + ".bias"]);
      x = ops::batch_norm_2d(x, v[l.name + ".gamma"], v[l.name + ".beta"], ctx.mode, ctx.state.norm(l.name + ".bn"),
                             ctx.update_running);
      return ops::leaky_relu(x, kSlope);
    }
    case Kind::Conv: return ops::conv2d(x, v[l.name + ".weight"], v[l.name + ".bias"], l.padding);
    case Kind::MaxPool: return ops::max_pool_2x2(x);
    case Kind::Upsample: return ops::bilinear_up_2x(x);
  }
  throw Error("unknown layer kind");
}

Shape item_shape(const Var& x) {
  const Shape& s = x.shape();
  return s.size() == 4 ? Shape(s.begin() + 1, s.end()) : s;
}

// [.., C, 2, 2] -> [(b, g, pos), q] with q the channel offset inside a group of 4.
Var to_registers(Var x, std::size_t channels) {
  const std::size_t items = x.value().numel() / (channels * 4);
  const std::size_t groups = channels / 4;
  std::vector<std::size_t> index;
  index.reserve(items * channels * 4);
  for (std::size_t b = 0; b < items; ++b)
    for (std::size_t g = 0; g < groups; ++g)
      for (std::size_t pos = 0; pos < 4; ++pos)
        for (std::size_t q = 0; q < 4; ++q) index.push_back(b * channels * 4 + (4 * g + q) * 4 + pos);
  return ops::gather(x, std::move(index), {items * channels, 4});
}

}  // namespace

std::string to_string(Preset preset) { return preset == Preset::Full ? "full" : "mini"; }

Preset parse_preset(const std::string& text) {
  if (text == "full") return Preset::Full;
  if (text == "mini") return Preset::Mini;
  throw Error("unknown preset '" + text + "' (expected full or mini)");
}

GeneratorConfig build_generator_config(Preset preset, std::size_t bands, std::size_t spatial) {
  GeneratorConfig cfg;
  cfg.preset = preset;
  cfg.bands = bands;
  cfg.spatial = spatial;
  if (preset == Preset::Full) {
    if (bands != 172 || spatial != 128) {
      throw Error("full preset expects 172 bands at 128x128, got " + std::to_string(bands) + " bands at " +
                  std::to_string(spatial) + "x" + std::to_string(spatial));
    }
    cfg.compression = {
        {"ConvModule 1", concat(std::vector{cb(516, 3, 1), cb(172, 3, 1), cb(32, 3, 1)}, repeat(cb(16, 3, 0), 2))},
        {"ConvModule 2", mcb(16, 2)},
        {"ConvModule 3", mcb(32, 3)},
        {"ConvModule 4", mcb(64, 3)},
    };
    cfg.expansion = {
        {"TConvModule 1", concat(repeat(tcb(64), 4), std::vector{up()})},
        {"TConvModule 2", concat(repeat(tcb(64), 2), repeat(tcb(32), 2), std::vector{up()})},
        {"TConvModule 3", concat(repeat(tcb(32), 2), std::vector{tcb(16), up()})},
        {"TConvModule 4", {tcb(16), tcb(8)}},
    };
  } else {
    if (bands != 8 || spatial != 32) {
      throw Error("mini preset expects 8 bands at 32x32, got " + std::to_string(bands) + " bands at " +
                  std::to_string(spatial) + "x" + std::to_string(spatial));
    }
    cfg.compression = {
        {"ConvModule 1", concat(std::vector{cb(32, 3, 1), cb(16, 3, 1)}, repeat(cb(16, 3, 0), 2))},
        {"ConvModule 2", concat(std::vector{pool(), cb(16, 3, 0), cb(32, 3, 1)}, repeat(cb(32, 3, 0), 2))},
        {"ConvModule 3", {pool(), cb(32, 3, 0), cb(64, 3, 1)}},
    };
    cfg.expansion = {
        {"TConvModule 1", {tcb(32), up()}},
        {"TConvModule 2", concat(repeat(tcb(32), 2), std::vector{tcb(16), up()})},
        {"TConvModule 3", {tcb(16), tcb(8)}},
    };
  }
  cfg.head = {"E_r Module", {cb(bands, 1, 0), conv(bands, 1, 0)}};
  name_layers(cfg.compression, "g.dc");
  name_layers(cfg.expansion, "g.iqc");
  for (std::size_t i = 0; i < cfg.head.layers.size(); ++i) cfg.head.layers[i].name = "g.er." + std::to_string(i);

  Shape shape{bands, spatial, spatial};
  cfg.trace.push_back({"Input", shape});
  auto run_stage = [&](const Stage& stage) {
    for (const auto& l : stage.layers) shape = propagate(shape, l, stage.label + "/" + l.name);
    cfg.trace.push_back({stage.label, shape});
  };
  for (const auto& stage : cfg.compression) run_stage(stage);
  if (shape[1] != 2 || shape[2] != 2 || shape[0] % 4 != 0) {
    throw ShapeError("generator compression must end at Cx2x2 with C divisible by 4, got " + shape_to_string(shape));
  }
  cfg.interface_channels = shape[0];
  cfg.registers = shape[0];
  quantum_trace_rows(cfg.trace, cfg.registers, cfg.interface_channels);
  shape = {cfg.interface_channels / 2, 2, 2};
  for (const auto& stage : cfg.expansion) run_stage(stage);
  run_stage(cfg.head);
  if (shape != Shape{bands, spatial, spatial}) {
    throw ShapeError("generator output " + shape_to_string(shape) + " does not match its input");
  }
  return cfg;
}

qlayers::Circuit generator_core_circuit(bool toffoli) {
  using qlayers::Axis;
  using qlayers::IsingPairing;
  qlayers::Circuit c(4, qlayers::Encoding::Angle);
  c.add_rotation_layer(Axis::Z);
  c.add_ising_layer(IsingPairing::First);
  c.add_rotation_layer(Axis::Y);
  c.add_ising_layer(IsingPairing::Second);
  c.add_rotation_layer(Axis::Z);
  if (toffoli) c.add_toffoli_entangle();
  c.set_measurement(qsim::Pauli::Z, {0, 1});
  return c;
}

nn::ParameterSet init_generator(const GeneratorConfig& config, std::uint64_t seed) {
  nn::ParameterSet p;
  Rng rng(derive_seed(seed, 0x47));
  std::size_t channels = config.bands;
  auto init_layer = [&](const LayerSpec& l) {
    const std::size_t k = l.kernel;
    switch (l.kind) {
      case Kind::ConvBlock:
      case Kind::Conv:
        p.add(l.name + ".weight", nn::uniform_init({l.out_channels, channels, k, k}, channels * k * k, rng));
        p.add(l.name + ".bias", Tensor({l.out_channels}, 0.0));
        break;
      case Kind::TConvBlock:
        p.add(l.name + ".weight", nn::uniform_init({channels, l.out_channels, k, k}, channels * k * k, rng));
        p.add(l.name + ".bias", Tensor({l.out_channels}, 0.0));
        break;
      default: return;
    }
    if (l.kind != Kind::Conv) {
      p.add(l.name + ".gamma", Tensor({l.out_channels}, 1.0));
      p.add(l.name + ".beta", Tensor({l.out_channels}, 0.0));
      p.add_norm(l.name + ".bn", l.out_channels);
    }
    channels = l.out_channels;
  };
  for (const auto& s : config.compression)
    for (const auto& l : s.layers) init_layer(l);
  Tensor angles({kCoreAngles}, 0.0);
  for (auto& a : angles.data()) a = rng.uniform(-std::numbers::pi, std::numbers::pi);
  p.add("g.quantum", std::move(angles));
  channels = config.interface_channels / 2;
  for (const auto& s : config.expansion)
    for (const auto& l : s.layers) init_layer(l);
  for (const auto& l : config.head.layers) init_layer(l);
  return p;
}

Var quantum_core_forward(Var features, Var angles) {
  static const qlayers::Circuit circuit = generator_core_circuit();
  return qlayers::circuit_layer(circuit, features, angles);
}

Var generator_forward(const GeneratorConfig& config, nn::Context& ctx, Var input, std::vector<TraceRow>* trace) {
  const Shape expected{config.bands, config.spatial, config.spatial};
  if ((input.shape().size() != 3 && input.shape().size() != 4) || item_shape(input) != expected) {
    throw ShapeError("generator expects input " + shape_to_string(expected) + " (optionally batched), got " +
                     shape_to_string(input.shape()));
  }
  const bool batched = input.shape().size() == 4;
  const std::size_t items = batched ? input.shape()[0] : 1;
  Var x = input;
  if (trace) trace->push_back({"Input", item_shape(x)});
  auto run = [&](const Stage& stage) {
    for (const auto& l : stage.layers) x = apply_layer(l, ctx, x);
    if (trace) trace->push_back({stage.label, item_shape(x)});
  };
  for (const auto& s : config.compression) run(s);

  const std::size_t c = config.interface_channels;
  Var features = to_registers(x, c);
  Var measured = quantum_core_forward(features, ctx.vars["g.quantum"]);
  if (trace) quantum_trace_rows(*trace, features.shape()[0] / items, c);
  Shape folded{c / 2, 2, 2};
  if (batched) folded.insert(folded.begin(), items);
  x = ops::reshape(measured, folded);

  for (const auto& s : config.expansion) run(s);
  run(config.head);
  return x;
}

hsi::HyperCube restore_cube(const GeneratorConfig& config, nn::ParameterSet& params, const hsi::HyperCube& cube) {
  Tape tape;
  NoGradGuard guard(tape);
  nn::Binding vars(tape, params, false);
  nn::Context ctx{vars, params, ops::NormMode::Eval, false};
  Var out = generator_forward(config, ctx, tape.constant(cube.to_tensor()));
  return hsi::HyperCube::from_tensor(out.value());
}

}  // namespace hyperking::model
