#include "check.hpp"

#include <cmath>

#include "hyperking/discriminator.hpp"
#include "model_probe.hpp"
#include "oracles.hpp"

using namespace hyperking;
using namespace hyperking::model;
using qlayers::Encoding;

namespace {

struct Variant {
  int em;
  Encoding enc;
};

const Variant kVariants[] = {{2, Encoding::Angle}, {2, Encoding::Amplitude}, {4, Encoding::Angle},
                             {4, Encoding::Amplitude}, {8, Encoding::Angle}, {8, Encoding::Amplitude}};

Tensor eval_forward(const DiscriminatorConfig& cfg, nn::ParameterSet& p, const Tensor& x) {
  Tape tape;
  nn::Binding vars(tape, p, false);
  nn::Context ctx{vars, p, ops::NormMode::Eval, false};
  return discriminator_forward(cfg, ctx, tape.constant(x)).value();
}

}  // namespace

TEST_CASE("DiscriminatorConfig.FullTrace") {
  const auto cfg = build_discriminator_config(Preset::Full, 172, 128);
  const std::vector<TraceRow> expect{
      {"Input", {172, 128, 128}}, {"DS Module", {2, 16, 16}},   {"Reshape", {32, 16}},
      {"Data Embedding", {32, 4}}, {"Unitary Gate 1", {32, 4}}, {"Unitary Gate 2", {32, 4}},
      {"EM(210|3)", {32, 4}},      {"EM(310|2)", {32, 4}},      {"EM(320|1)", {32, 4}},
      {"EM(321|0)", {32, 4}},      {"Unitary Gate 3", {32, 4}}, {"Unitary Gate 4", {32, 4}},
      {"QC Measurement", {32, 4}}, {"Reshape", {1, 128}},       {"Sigmoid Module", {1, 1}},
  };
  CHECK_EQ(cfg.trace, expect);
  const auto p = init_discriminator(cfg, 1);
  CHECK_EQ(p.at("d.head1.weight").shape(), (Shape{16, 128}));
  CHECK_EQ(p.at("d.head2.weight").shape(), (Shape{1, 16}));
}

TEST_CASE("DiscriminatorConfig.MiniAndVariants") {
  const auto cfg = build_discriminator_config(Preset::Mini, 8, 32);
  CHECK_EQ(cfg.grid, 8u);
  CHECK_EQ(cfg.classifier_outputs(), 32u);
  const auto p = init_discriminator(cfg, 1);
  CHECK_EQ(p.at("d.head1.weight").shape(), (Shape{8, 32}));

  const std::map<int, std::size_t> em_angles{{2, 2 * 1}, {4, 4 * 3}, {8, 8 * 7}};
  for (const auto& v : kVariants) {
    const auto c = build_discriminator_config(Preset::Mini, 8, 32, v.em, v.enc);
    const auto circuit = he_classifier_circuit(v.em, v.enc);
    CHECK_EQ(circuit.parameter_count(), 4u * static_cast<std::size_t>(v.em) + em_angles.at(v.em));
    const std::size_t width = v.enc == Encoding::Amplitude ? (std::size_t{1} << v.em) : static_cast<std::size_t>(v.em);
    CHECK_EQ(c.registers * width, c.pooled_size());
  }
  CHECK_EQ(build_discriminator_config(Preset::Mini, 8, 32, 8, Encoding::Amplitude).grid, 16u);
  CHECK_THROWS_AS(build_discriminator_config(Preset::Mini, 8, 32, 3), Error);
}

TEST_CASE("DiscriminatorConfig.EmOrdering") {
  const auto c = he_classifier_circuit(4, Encoding::Amplitude);
  std::vector<std::vector<int>> crx;
  for (const auto& op : c.ops())
    if (op.kind == qsim::GateKind::CRX) crx.push_back(op.wires);
  const std::vector<std::vector<int>> expect{{3, 2}, {3, 1}, {3, 0}, {2, 3}, {2, 1}, {2, 0},
                                             {1, 3}, {1, 2}, {1, 0}, {0, 3}, {0, 2}, {0, 1}};
  CHECK_EQ(crx, expect);
  CHECK_EQ(c.observable(), qsim::Pauli::X);
  CHECK_EQ(c.measured_wires(), (std::vector<int>{0, 1, 2, 3}));
}

TEST_CASE("DsForward.ShapesAndConstantInput") {
  for (auto preset : {Preset::Mini, Preset::Full}) {
    const bool full = preset == Preset::Full;
    const auto cfg = build_discriminator_config(preset, full ? 172 : 8, full ? 128 : 32);
    auto p = init_discriminator(cfg, 2);
    Tape tape;
    nn::Binding vars(tape, p, false);
    nn::Context ctx{vars, p, ops::NormMode::Eval, false};
    const auto out = ds_forward(cfg, ctx, tape.constant(Tensor({cfg.bands, cfg.spatial, cfg.spatial}, 0.4))).value();
    REQUIRE_EQ(out.shape(), (Shape{2, cfg.grid, cfg.grid}));
    for (std::size_t i = 0; i < cfg.grid * cfg.grid; ++i) CHECK_NEAR(out[i], out[cfg.grid * cfg.grid + i], 1e-12);
  }
}

TEST_CASE("HeClassifier.BasisRegistersMeasureZero") {
  for (int em : {2, 4}) {
    const auto circuit = he_classifier_circuit(em, Encoding::Amplitude);
    const std::size_t dim = std::size_t{1} << em;
    Tensor features({dim, dim}, 0.0);
    for (std::size_t r = 0; r < dim; ++r) features[r * dim + r] = 1.0;
    std::vector<double> zeros(circuit.parameter_count(), 0.0);
    const auto out = qlayers::run_circuit(circuit, features, zeros);
    for (double v : out.data()) CHECK_NEAR(v, 0.0, 1e-14);
  }
}

TEST_CASE("DiscriminatorForward.RangeAndScalarOutput") {
  Rng rng(3);
  for (const auto& v : kVariants) {
    const auto cfg = build_discriminator_config(Preset::Mini, 8, 32, v.em, v.enc);
    auto p = init_discriminator(cfg, 4);
    const auto one = eval_forward(cfg, p, oracle::random_tensor({8, 32, 32}, rng, 0, 1));
    CHECK(one.shape().empty());
    const auto batch = eval_forward(cfg, p, oracle::random_tensor({3, 8, 32, 32}, rng, 0, 1));
    REQUIRE_EQ(batch.shape(), (Shape{3}));
    for (double d : batch.data()) {
      CHECK_GT(d, 0.0);
      CHECK_LT(d, 1.0);
    }
  }
}

TEST_CASE("DiscriminatorForward.ZeroHeadGivesSigmoidOfBias") {
  const auto cfg = build_discriminator_config(Preset::Mini, 8, 32);
  auto p = init_discriminator(cfg, 5);
  for (auto& v : p.at("d.head2.weight").data()) v = 0.0;
  p.at("d.head2.bias")[0] = 0.7;
  Rng rng(6);
  const auto out = eval_forward(cfg, p, oracle::random_tensor({8, 32, 32}, rng, 0, 1));
  CHECK_EQ(out[0], 1.0 / (1.0 + std::exp(-0.7)));
}

TEST_CASE("DiscriminatorGradient.MatchesFiniteDifferences") {
  Rng rng(7);
  for (const auto& v : kVariants) {
    const auto cfg = build_discriminator_config(Preset::Mini, 8, 32, v.em, v.enc);
    const auto params = init_discriminator(cfg, 8 + static_cast<std::uint64_t>(v.em));
    const auto x = oracle::random_tensor({2, 8, 32, 32}, rng, 0, 1);
    const auto w = oracle::random_tensor({2}, rng);
    oracle::Forward f = [&](nn::Context& ctx, Var in) { return discriminator_forward(cfg, ctx, in); };
    const auto g = oracle::network_gradients(f, params, x, w);

    double worst = 0.0, input_norm = 0.0;
    for (const auto& name : params.names()) {
      const std::size_t n = params.at(name).numel();
      for (int k = 0; k < 3; ++k) {
        const std::size_t i = rng.below(n);
        const double numeric = oracle::param_difference(f, params, x, w, name, i);
        worst = std::max(worst, std::abs(numeric - g.params.at(name)[i]) / std::max(1.0, std::abs(numeric)));
      }
    }
    for (double d : g.input.data()) input_norm += d * d;
    for (int k = 0; k < 3; ++k) {
      const std::size_t i = rng.below(x.numel());
      const double numeric = oracle::input_difference(f, params, x, w, i);
      worst = std::max(worst, std::abs(numeric - g.input[i]) / std::max(1.0, std::abs(numeric)));
    }
    {
      INFO(v.em);
      CHECK_LT(worst, 1e-5);
    }
    CHECK_GT(input_norm, 0.0);
  }
}
