#include "check.hpp"

#include <algorithm>
#include <cmath>

#include "hyperking/fe_synthesis.hpp"
#include "hyperking/generator.hpp"
#include "model_probe.hpp"
#include "oracles.hpp"

using namespace hyperking;
using namespace hyperking::model;

namespace {

Shape batched(std::size_t b, const Shape& s) {
  Shape out{b};
  out.insert(out.end(), s.begin(), s.end());
  return out;
}

}  // namespace

TEST_CASE("GeneratorConfig.FullTrace") {
  const auto cfg = build_generator_config(Preset::Full, 172, 128);
  const std::vector<TraceRow> expect{
      {"Input", {172, 128, 128}},      {"ConvModule 1", {16, 124, 124}}, {"ConvModule 2", {32, 56, 56}},
      {"ConvModule 3", {64, 20, 20}},  {"ConvModule 4", {128, 2, 2}},    {"Reshape", {128, 4}},
      {"Data Embedding", {128, 4}},    {"Unitary Gate 1", {128, 4}},     {"Reshape", {256, 2}},
      {"Unitary Gate 2", {256, 2}},    {"Reshape", {128, 4}},            {"Unitary Gate 3", {128, 4}},
      {"Reshape", {256, 2}},           {"Unitary Gate 4", {256, 2}},     {"Reshape", {128, 4}},
      {"Unitary Gate 5", {128, 4}},    {"CCNOT(0,1,2)", {128, 4}},       {"CCNOT(1,2,3)", {128, 4}},
      {"CCNOT(2,3,0)", {128, 4}},      {"CCNOT(3,0,1)", {128, 4}},       {"QC Measurement", {128, 2}},
      {"Reshape", {64, 2, 2}},         {"TConvModule 1", {64, 20, 20}},  {"TConvModule 2", {32, 56, 56}},
      {"TConvModule 3", {16, 124, 124}}, {"TConvModule 4", {8, 128, 128}}, {"E_r Module", {172, 128, 128}},
  };
  CHECK_EQ(cfg.trace, expect);
  CHECK_EQ(cfg.registers, 128u);
  // ConvModule 1 layer list
  REQUIRE_EQ(cfg.compression[0].layers.size(), 5u);
  CHECK_EQ(cfg.compression[0].layers[0].out_channels, 516u);
  CHECK_EQ(cfg.compression[0].layers[1].out_channels, 172u);
}

TEST_CASE("GeneratorConfig.MiniTraceAndRejections") {
  const auto cfg = build_generator_config(Preset::Mini, 8, 32);
  CHECK_EQ(cfg.trace.front().shape, (Shape{8, 32, 32}));
  CHECK_EQ(cfg.trace.back().shape, (Shape{8, 32, 32}));
  CHECK_EQ(cfg.interface_channels, 64u);
  CHECK_EQ(cfg.registers, 64u);
  CHECK_THROWS_AS(build_generator_config(Preset::Full, 100, 128), Error);
  CHECK_THROWS_AS(build_generator_config(Preset::Mini, 8, 30), Error);
  CHECK_EQ(parse_preset("mini"), Preset::Mini);
  CHECK_THROWS_AS(parse_preset("huge"), Error);
}

TEST_CASE("GeneratorParams.QuantumCountIsSixteen") {
  for (auto preset : {Preset::Mini, Preset::Full}) {
    const auto cfg = preset == Preset::Mini ? build_generator_config(preset, 8, 32) : build_generator_config(preset, 172, 128);
    const auto p = init_generator(cfg, 1);
    CHECK_EQ(p.at("g.quantum").numel(), kCoreAngles);
  }
  CHECK_EQ(generator_core_circuit().parameter_count(), kCoreAngles);
}

TEST_CASE("QuantumCore.ZeroPathAndBounds") {
  Tape tape;
  Var f = tape.constant(Tensor({5, 4}, 0.0));
  Var a = tape.constant(Tensor({16}, 0.0));
  const auto out = quantum_core_forward(f, a).value();
  REQUIRE_EQ(out.shape(), (Shape{5, 2}));
  for (double v : out.data()) CHECK_NEAR(v, 1.0, 1e-15);

  Rng rng(3);
  const auto r = quantum_core_forward(tape.constant(oracle::random_tensor({20, 4}, rng, -3, 3)),
                                      tape.constant(oracle::random_tensor({16}, rng, -3, 3)))
                     .value();
  for (double v : r.data()) {
    CHECK_LE(std::abs(v), 1.0 + 1e-12);
  }
  CHECK_THROWS_AS(quantum_core_forward(tape.constant(Tensor({5, 3}, 0.0)), a), Error);
}

TEST_CASE("QuantumCore.CircuitMatchesSynthesisOperator") {
  // Without the Toffoli chain, the circuit operator is the synthesis core.
  Rng rng(8);
  fe::CoreParams cp;
  for (int k = 0; k < 4; ++k) {
    cp.alpha[k] = rng.uniform(-3, 3);
    cp.beta[k] = rng.uniform(-3, 3);
    cp.gamma[k] = rng.uniform(-3, 3);
    cp.theta[k] = rng.uniform(-3, 3);
  }
  const auto angles = fe::circuit_angles(cp);
  const auto u = fe::core_circuit_unitary(cp);
  const auto circuit = generator_core_circuit(false);
  const auto z = qlayers::run_circuit(circuit, Tensor({1, 4}, 0.0), angles);
  qsim::StateRegister s(4);
  std::vector<qsim::Complex> psi(16);
  for (int i = 0; i < 16; ++i) psi[i] = u(i, 0);
  const auto st = qsim::StateRegister::from_amplitudes(psi);
  CHECK_NEAR(z[0], qsim::expectation(st, qsim::Pauli::Z, 0), 1e-12);
  CHECK_NEAR(z[1], qsim::expectation(st, qsim::Pauli::Z, 1), 1e-12);
}

TEST_CASE("GeneratorForward.MiniShapeAndDeterminism") {
  const auto cfg = build_generator_config(Preset::Mini, 8, 32);
  auto params = init_generator(cfg, 5);
  Rng rng(6);
  const auto x = oracle::random_tensor({2, 8, 32, 32}, rng, 0, 1);
  auto run = [&] {
    Tape tape;
    nn::Binding vars(tape, params, false);
    nn::Context ctx{vars, params, ops::NormMode::Train, false};
    std::vector<TraceRow> trace;
    auto out = generator_forward(cfg, ctx, tape.constant(x), &trace).value();
    CHECK_EQ(trace.back().shape, (Shape{8, 32, 32}));
    return out;
  };
  const auto a = run(), b = run();
  CHECK_EQ(a.shape(), (Shape{2, 8, 32, 32}));
  CHECK(std::ranges::equal(a.data(), b.data()));
  CHECK_EQ(init_generator(cfg, 5), params);

  Tape tape;
  nn::Binding vars(tape, params, false);
  nn::Context ctx{vars, params, ops::NormMode::Eval, false};
  CHECK_THROWS_AS(generator_forward(cfg, ctx, tape.constant(Tensor({8, 16, 16}, 0.0))), Error);
}

TEST_CASE("GeneratorForward.RestoreClamps") {
  const auto cfg = build_generator_config(Preset::Mini, 8, 32);
  auto params = init_generator(cfg, 9);
  const auto out = restore_cube(cfg, params, hsi::synth_cube(8, 32, 32, 3, 1));
  CHECK_EQ(out.shape(), (Shape{8, 32, 32}));
  for (double v : out.values()) {
    CHECK_GE(v, 0.0);
    CHECK_LE(v, 1.0);
  }
}

TEST_CASE("GeneratorGradient.MatchesFiniteDifferences") {
  const auto cfg = build_generator_config(Preset::Mini, 8, 32);
  const auto params = init_generator(cfg, 11);
  Rng rng(12);
  const auto x = oracle::random_tensor({2, 8, 32, 32}, rng, 0, 1);
  const auto w = oracle::random_tensor({2, 8, 32, 32}, rng);
  oracle::Forward f = [&](nn::Context& ctx, Var in) { return generator_forward(cfg, ctx, in); };
  const auto g = oracle::network_gradients(f, params, x, w);

  for (const char* group : {"g.dc", "g.quantum", "g.iqc", "g.er"}) {
    double norm = 0.0;
    for (const auto& [name, grad] : g.params)
      if (name.starts_with(group))
        for (double v : grad.data()) norm += v * v;
    {
      INFO(group);
      CHECK_GT(norm, 0.0);
    }
  }

  double worst = 0.0;
  auto check = [&](const std::string& name, std::size_t i) {
    const double numeric = oracle::param_difference(f, params, x, w, name, i);
    const double analytic = g.params.at(name)[i];
    worst = std::max(worst, std::abs(numeric - analytic) / std::max(1.0, std::abs(numeric)));
  };
  for (std::size_t i = 0; i < kCoreAngles; ++i) check("g.quantum", i);
  for (const auto& name : params.names()) {
    if (name == "g.quantum") continue;
    check(name, rng.below(params.at(name).numel()));
  }
  for (int k = 0; k < 4; ++k) {
    const std::size_t i = rng.below(x.numel());
    const double numeric = oracle::input_difference(f, params, x, w, i);
    worst = std::max(worst, std::abs(numeric - g.input[i]) / std::max(1.0, std::abs(numeric)));
  }
  CHECK_LT(worst, 1e-4);
}
