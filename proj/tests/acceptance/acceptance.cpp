// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero when any criterion fails. `--only N[,M...]` runs a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "core_oracle.hpp"
#include "hyperking/discriminator.hpp"
#include "hyperking/fe_synthesis.hpp"
#include "hyperking/generator.hpp"
#include "hyperking/hsi_data.hpp"
#include "hyperking/metrics.hpp"
#include "hyperking/qsim.hpp"
#include "hyperking/quantum_layers.hpp"
#include "hyperking/trainer.hpp"
#include "model_probe.hpp"
#include "oracles.hpp"

using namespace hyperking;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = true;
  std::string detail;
  double budget_seconds = 0.0;  // 0: no runtime bound
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double max_abs(const qsim::Matrix& m) { return m.cwiseAbs().maxCoeff(); }

// 1 ------------------------------------------------------------------------
Outcome gate_algebra() {
  using qsim::GateKind;
  using qsim::GateSpec;
  Rng rng(1);
  double worst = 0.0;
  const std::vector<GateKind> kinds{GateKind::RX, GateKind::RY, GateKind::RZ, GateKind::XX, GateKind::CRX};
  for (auto kind : kinds)
    for (int i = 0; i < 100; ++i) {
      const double t = rng.uniform(-4 * kPi, 4 * kPi);
      GateSpec spec{kind, t, qsim::gate_arity(kind) == 1 ? std::vector<int>{0} : std::vector<int>{0, 1}};
      const auto u = qsim::gate_matrix(spec);
      worst = std::max(worst, max_abs(u.adjoint() * u - qsim::Matrix::Identity(u.rows(), u.cols())));
    }
  for (const auto& spec : {GateSpec::x(0), GateSpec::z(0), GateSpec::toffoli(0, 1, 2)}) {
    const auto u = qsim::gate_matrix(spec);
    worst = std::max(worst, max_abs(u.adjoint() * u - qsim::Matrix::Identity(u.rows(), u.cols())));
  }
  const double xx0 = max_abs(qsim::gate_matrix(GateSpec::xx(0, 1, 0.0)) - qsim::Matrix::Identity(4, 4));

  // DIAG(I4, X, I2): |100> <-> |101>, everything else fixed.
  bool truth = true;
  for (std::size_t in = 0; in < 8; ++in) {
    const std::size_t expect = in == 4 ? 5 : in == 5 ? 4 : in;
    const auto out = qsim::apply_gate(qsim::StateRegister::basis(3, in), GateSpec::toffoli(0, 1, 2));
    for (std::size_t k = 0; k < 8; ++k) truth &= out.amplitudes()[k] == qsim::Complex(k == expect ? 1.0 : 0.0, 0.0);
  }
  Outcome o;
  o.pass = worst < 1e-12 && xx0 <= 1e-15 && truth;
  o.detail = "max |U^dag U - I| " + fmt("%.2e", worst) + ", |XX(0) - I| " + fmt("%.1e", xx0) +
             ", Toffoli table " + (truth ? "exact" : "WRONG");
  o.budget_seconds = 1.0;
  return o;
}

// 2 ------------------------------------------------------------------------
Outcome full_expressibility() {
  double zyz = 0.0;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const auto u = qsim::haar_random_unitary(2, derive_seed(2, s));
    zyz = std::max(zyz, max_abs(fe::zyz_compose(fe::zyz_decompose(u)) - u));
  }
  double core = 0.0;
  for (std::uint64_t t = 0; t < 200; ++t) {
    std::array<qsim::Matrix, 4> f;
    for (std::uint64_t k = 0; k < 4; ++k) f[k] = qsim::haar_random_unitary(2, derive_seed(3, 4 * t + k));
    const qsim::Matrix target = qsim::kron(qsim::kron(qsim::kron(f[0], f[1]), f[2]), f[3]);
    const auto params = fe::realize_tensor_unitary(f[0], f[1], f[2], f[3]);
    core = std::max(core, qsim::phase_aligned_deviation(oracle::core_unitary_by_gates(params), target));
  }
  Outcome o;
  o.pass = zyz < 1e-10 && core < 1e-9;
  o.detail = "1000 ZYZ round trips max " + fmt("%.2e", zyz) + ", 200 tensor-product targets max " + fmt("%.2e", core);
  o.budget_seconds = 10.0;
  return o;
}

// 3 ------------------------------------------------------------------------
struct CircuitErrors {
  double shift = 0.0, fd = 0.0;
};

CircuitErrors circuit_gradients(const qlayers::Circuit& circuit, const Tensor& features, const Tensor& angles,
                                const Tensor& weights) {
  Tape tape;
  Var f = tape.leaf(features, true);
  Var a = tape.leaf(angles, true);
  tape.backward(ops::sum(ops::mul(qlayers::circuit_layer(circuit, f, a), tape.constant(weights))));
  auto readout = [&](const Tensor& e) {
    double acc = 0.0;
    for (std::size_t i = 0; i < e.numel(); ++i) acc += e[i] * weights[i];
    return acc;
  };
  CircuitErrors err;
  for (std::size_t i = 0; i < angles.numel(); ++i) {
    const double shift = qlayers::param_shift_grad(circuit, features, angles.data(), i, readout);
    err.shift = std::max(err.shift, std::abs(tape.grad(a)[i] - shift));
    const double fd = oracle::central_difference(
        [&](const Tensor& x) { return readout(qlayers::run_circuit(circuit, features, x.data())); }, angles, i, 1e-4);
    err.fd = std::max(err.fd, std::abs(tape.grad(a)[i] - fd) / std::max(1.0, std::abs(fd)));
  }
  for (std::size_t i = 0; i < features.numel(); ++i) {
    const double fd = oracle::central_difference(
        [&](const Tensor& x) { return readout(qlayers::run_circuit(circuit, x, angles.data())); }, features, i, 1e-4);
    err.fd = std::max(err.fd, std::abs(tape.grad(f)[i] - fd) / std::max(1.0, std::abs(fd)));
  }
  return err;
}

Outcome gradient_oracles() {
  const auto gcfg = model::build_generator_config(model::Preset::Mini, 8, 32);
  const auto dcfg = model::build_discriminator_config(model::Preset::Mini, 8, 32);
  const auto gcircuit = model::generator_core_circuit();
  const auto dcircuit = model::he_classifier_circuit(dcfg.em_size, dcfg.encoding);
  double shift = 0.0, fd = 0.0;
  for (std::uint64_t c = 0; c < 20; ++c) {
    Rng rng(derive_seed(33, c));
    // generator quantum core
    {
      const auto features = oracle::random_tensor({gcfg.registers, 4}, rng, -kPi, kPi);
      const auto angles = oracle::random_tensor({model::kCoreAngles}, rng, -kPi, kPi);
      const auto weights = oracle::random_tensor({gcfg.registers, 2}, rng);
      const auto e = circuit_gradients(gcircuit, features, angles, weights);
      shift = std::max(shift, e.shift);
      fd = std::max(fd, e.fd);
    }
    // discriminator: its circuit, then every parameter and sampled inputs end to end
    auto params = model::init_discriminator(dcfg, derive_seed(34, c));
    for (auto& v : params.at("d.quantum").data()) v = rng.uniform(-kPi, kPi);
    {
      const auto features = oracle::random_tensor({dcfg.registers, dcircuit.feature_width()}, rng, 0.05, 1.0);
      const auto weights = oracle::random_tensor({dcfg.registers, static_cast<std::size_t>(dcfg.em_size)}, rng);
      const auto e = circuit_gradients(dcircuit, features, params.at("d.quantum"), weights);
      shift = std::max(shift, e.shift);
      fd = std::max(fd, e.fd);
    }
    const auto x = oracle::random_tensor({2, 8, 32, 32}, rng, 0, 1);
    const auto w = oracle::random_tensor({2}, rng);
    oracle::Forward f = [&](nn::Context& ctx, Var in) { return model::discriminator_forward(dcfg, ctx, in); };
    const auto g = oracle::network_gradients(f, params, x, w);
    for (const auto& name : params.names())
      for (std::size_t i = 0; i < params.at(name).numel(); ++i) {
        const double numeric = oracle::param_difference(f, params, x, w, name, i);
        fd = std::max(fd, std::abs(g.params.at(name)[i] - numeric) / std::max(1.0, std::abs(numeric)));
      }
    for (int k = 0; k < 16; ++k) {
      const std::size_t i = rng.below(x.numel());
      const double numeric = oracle::input_difference(f, params, x, w, i);
      fd = std::max(fd, std::abs(g.input[i] - numeric) / std::max(1.0, std::abs(numeric)));
    }
  }
  Outcome o;
  o.pass = shift < 1e-10 && fd < 1e-5;
  o.detail = "20 configs: tape vs shift max " + fmt("%.2e", shift) + ", tape vs FD max rel " + fmt("%.2e", fd);
  o.budget_seconds = 120.0;
  return o;
}

// 4 ------------------------------------------------------------------------
Outcome architecture() {
  using model::TraceRow;
  const std::vector<TraceRow> g_expect{
      {"Input", {172, 128, 128}},        {"ConvModule 1", {16, 124, 124}}, {"ConvModule 2", {32, 56, 56}},
      {"ConvModule 3", {64, 20, 20}},    {"ConvModule 4", {128, 2, 2}},    {"Reshape", {128, 4}},
      {"Data Embedding", {128, 4}},      {"Unitary Gate 1", {128, 4}},     {"Reshape", {256, 2}},
      {"Unitary Gate 2", {256, 2}},      {"Reshape", {128, 4}},            {"Unitary Gate 3", {128, 4}},
      {"Reshape", {256, 2}},             {"Unitary Gate 4", {256, 2}},     {"Reshape", {128, 4}},
      {"Unitary Gate 5", {128, 4}},      {"CCNOT(0,1,2)", {128, 4}},       {"CCNOT(1,2,3)", {128, 4}},
      {"CCNOT(2,3,0)", {128, 4}},        {"CCNOT(3,0,1)", {128, 4}},       {"QC Measurement", {128, 2}},
      {"Reshape", {64, 2, 2}},           {"TConvModule 1", {64, 20, 20}},  {"TConvModule 2", {32, 56, 56}},
      {"TConvModule 3", {16, 124, 124}}, {"TConvModule 4", {8, 128, 128}}, {"E_r Module", {172, 128, 128}},
  };
  const std::vector<TraceRow> d_expect{
      {"Input", {172, 128, 128}}, {"DS Module", {2, 16, 16}},   {"Reshape", {32, 16}},
      {"Data Embedding", {32, 4}}, {"Unitary Gate 1", {32, 4}}, {"Unitary Gate 2", {32, 4}},
      {"EM(210|3)", {32, 4}},      {"EM(310|2)", {32, 4}},      {"EM(320|1)", {32, 4}},
      {"EM(321|0)", {32, 4}},      {"Unitary Gate 3", {32, 4}}, {"Unitary Gate 4", {32, 4}},
      {"QC Measurement", {32, 4}}, {"Reshape", {1, 128}},       {"Sigmoid Module", {1, 1}},
  };
  const auto gcfg = model::build_generator_config(model::Preset::Full, 172, 128);
  const auto dcfg = model::build_discriminator_config(model::Preset::Full, 172, 128);
  auto gp = model::init_generator(gcfg, 4);
  auto dp = model::init_discriminator(dcfg, 5);
  Rng rng(6);
  const auto x = oracle::random_tensor({172, 128, 128}, rng, 0, 1);

  Tape tape;
  NoGradGuard guard(tape);
  nn::Binding gv(tape, gp, false);
  nn::Binding dv(tape, dp, false);
  nn::Context gctx{gv, gp, ops::NormMode::Eval, false};
  nn::Context dctx{dv, dp, ops::NormMode::Eval, false};
  std::vector<TraceRow> g_trace, d_trace;
  const Tensor y = model::generator_forward(gcfg, gctx, tape.constant(x), &g_trace).value();
  const Tensor d = model::discriminator_forward(dcfg, dctx, tape.constant(x), &d_trace).value();

  std::size_t g_match = 0, d_match = 0;
  for (std::size_t i = 0; i < std::min(g_trace.size(), g_expect.size()); ++i) g_match += g_trace[i] == g_expect[i];
  for (std::size_t i = 0; i < std::min(d_trace.size(), d_expect.size()); ++i) d_match += d_trace[i] == d_expect[i];
  const bool g_ok = g_trace == g_expect && y.shape() == Shape{172, 128, 128};
  const bool d_ok = d_trace == d_expect && d.shape().empty() && d.item() > 0.0 && d.item() < 1.0;
  Outcome o;
  o.pass = g_ok && d_ok;
  o.detail = "generator rows " + std::to_string(g_match) + "/" + std::to_string(g_expect.size()) +
             ", discriminator rows " + std::to_string(d_match) + "/" + std::to_string(d_expect.size()) +
             ", D = " + fmt("%.4f", d.shape().empty() ? d.item() : -1.0);
  o.budget_seconds = 120.0;
  return o;
}

// 5 ------------------------------------------------------------------------
Outcome metric_oracles() {
  Rng rng(7);
  double worst = 0.0;
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); };
  for (int t = 0; t < 20; ++t) {
    const auto a = oracle::random_cube(4, 16, 15, rng), b = oracle::random_cube(4, 16, 15, rng);
    worst = std::max({worst, rel(metrics::psnr(a, b), oracle::psnr(a, b)), rel(metrics::sam(a, b), oracle::sam(a, b)),
                      rel(metrics::rmse(a, b), oracle::rmse(a, b)), rel(metrics::ssim(a, b), oracle::ssim(a, b))});
  }
  Outcome o;
  o.pass = worst <= 1e-9;
  o.detail = "20 random pairs, max relative error " + fmt("%.2e", worst);
  return o;
}

// 6 ------------------------------------------------------------------------
Outcome corruption() {
  const auto clean = hsi::synth_cube(8, 32, 32, 4, 8);
  const std::size_t stripes = 8 * static_cast<std::size_t>(std::llround(0.1 * 32)) * 32;
  const std::size_t impulses = static_cast<std::size_t>(std::llround(0.01 * static_cast<double>(clean.size())));
  bool counts = true, untouched = true;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto st = hsi::corrupt_stripes(clean, 0.1, s);
    counts &= hsi::mask_count(st.mask) == stripes;
    for (std::size_t i = 0; i < clean.size(); ++i)
      if (!st.mask[i]) untouched &= st.cube.values()[i] == clean.values()[i];

    const auto mixed = hsi::corrupt_mixed(clean, {}, s);
    counts &= hsi::mask_count(mixed.impulse_mask) == impulses && hsi::mask_count(mixed.stripe_mask) == stripes;

    const auto sparse = hsi::corrupt_mixed(clean, {0.0, 0.01, 0.1}, s);
    for (std::size_t i = 0; i < clean.size(); ++i)
      if (!sparse.mask[i]) untouched &= sparse.cube.values()[i] == clean.values()[i];
  }
  Outcome o;
  o.pass = counts && untouched;
  o.detail = std::string("50 seeds: stripe count ") + std::to_string(stripes) + ", impulse count " +
             std::to_string(impulses) + (counts ? " exact" : " MISMATCH") +
             (untouched ? ", unmasked elements bit-identical" : ", unmasked elements CHANGED");
  return o;
}

// 7 ------------------------------------------------------------------------
Outcome losses_and_schedule() {
  const double ld = train::discriminator_loss(0.5, 0.5, 0.0);
  const double ld_delta = train::discriminator_loss(0.5, 0.5, 1e-8);
  const hsi::HyperCube a(2, 4, 4, 0.3), b(2, 4, 4, 0.8);
  // h(0.5) = 0.125 per element
  const double lg = train::generator_loss(a, b, 0.5, 0.01, 0.0);
  const double lg_expect = 0.125 + 0.01 * std::log(0.5);
  const bool schedule = train::schedule_phase(1, 60) == train::Phase::G && train::schedule_phase(61, 60) == train::Phase::D &&
                        train::schedule_phase(121, 60) == train::Phase::G;
  Outcome o;
  o.pass = std::abs(ld - 2 * std::numbers::ln2) <= 1e-12 && std::abs(ld_delta - 2 * std::numbers::ln2) <= 1e-7 &&
           std::abs(lg - lg_expect) <= 1e-12 && schedule;
  o.detail = "L_D(0.5,0.5) - 2 log 2 = " + fmt("%.1e", ld - 2 * std::numbers::ln2) + ", L_G spot error " +
             fmt("%.1e", lg - lg_expect) + ", schedule G/D/G at 1/61/121 " + (schedule ? "ok" : "WRONG");
  return o;
}

// 8 ------------------------------------------------------------------------
struct SmokeData {
  train::Dataset train_set, heldout;
};

SmokeData smoke_data(std::uint64_t seed) {
  SmokeData d;
  for (std::uint64_t i = 0; i < 40; ++i) {
    auto clean = hsi::synth_cube(8, 32, 32, 4, derive_seed(seed, 100 + i));
    auto noisy = hsi::corrupt_stripes(clean, 0.1, derive_seed(seed, 200 + i)).cube;
    auto& set = i < 32 ? d.train_set : d.heldout;
    set.clean.push_back(std::move(clean));
    set.corrupted.push_back(std::move(noisy));
  }
  return d;
}

train::TrainConfig smoke_config(std::uint64_t seed) {
  train::TrainConfig c;
  c.batch = 8;
  c.epochs = 240;
  c.period = 60;
  c.lr = 0.01;
  c.seed = seed;
  return c;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome training_smoke() {
  const std::uint64_t seed = 42;
  const auto data = smoke_data(seed);
  const fs::path dir = fs::temp_directory_path() / "hyperking_acceptance";
  fs::create_directories(dir);

  bool finite = true;
  auto run = [&](const fs::path& csv) {
    auto state = train::init_train_state(smoke_config(seed));
    train::train(state, data.train_set, 240, [&](const train::TrainState& s) {
      const auto& r = s.curve.records.back();
      finite &= std::isfinite(r.loss_g) && std::isfinite(r.loss_d) && std::isfinite(r.mean_d_real) &&
                std::isfinite(r.mean_d_fake);
    });
    state.curve.write_csv(csv);
    return state;
  };
  auto state = run(dir / "curves_a.csv");
  run(dir / "curves_b.csv");
  const bool identical = read_file(dir / "curves_a.csv") == read_file(dir / "curves_b.csv") &&
                         !read_file(dir / "curves_a.csv").empty();

  double before = 0.0, after = 0.0;
  for (std::size_t i = 0; i < data.heldout.size(); ++i) {
    before += metrics::psnr(data.heldout.clean[i], data.heldout.corrupted[i]);
    after += metrics::psnr(data.heldout.clean[i], model::restore_cube(state.generator, state.g, data.heldout.corrupted[i]));
  }
  before /= static_cast<double>(data.heldout.size());
  after /= static_cast<double>(data.heldout.size());
  const auto& last = state.curve.records.back();
  const double gap = last.mean_d_real - last.mean_d_fake;

  const bool margin = after >= before + 3.0;
  Outcome o;
  o.pass = finite && margin && gap > 0.0 && identical;
  o.detail = "seed 42: (a) losses " + std::string(finite ? "finite" : "NON-FINITE") + "; (b) held-out PSNR " +
             fmt("%.2f", before) + " -> " + fmt("%.2f", after) + " dB" + (margin ? "" : " (margin < 3 dB)") +
             "; (c) D(real) - D(fake) = " + fmt("%.4f", gap) + "; (d) reruns " +
             (identical ? "byte-identical" : "DIFFER");
  o.budget_seconds = 1800.0;
  return o;
}

// 9 ------------------------------------------------------------------------
Outcome ablation() {
  const auto data = smoke_data(9);
  const fs::path dir = fs::temp_directory_path() / "hyperking_acceptance" / "ablation";
  fs::create_directories(dir);
  std::size_t ok = 0;
  std::string failures;
  for (int em : {2, 4, 8})
    for (auto enc : {qlayers::Encoding::Angle, qlayers::Encoding::Amplitude}) {
      const std::string name = "em" + std::to_string(em) + (enc == qlayers::Encoding::Angle ? "_angle" : "_amplitude");
      try {
        auto cfg = smoke_config(9);
        cfg.em_size = em;
        cfg.encoding = enc;
        cfg.epochs = 10;
        cfg.period = 5;
        auto state = train::init_train_state(cfg);
        train::train(state, data.train_set, 10);
        const fs::path csv = dir / (name + ".csv");
        state.curve.write_csv(csv);
        const std::string text = read_file(csv);
        if (std::count(text.begin(), text.end(), '\n') == 11) ++ok;
        else failures += " " + name + "(curve rows)";
      } catch (const std::exception& e) {
        failures += " " + name + "(" + e.what() + ")";
      }
    }
  Outcome o;
  o.pass = ok == 6;
  o.detail = std::to_string(ok) + "/6 variants trained 10 epochs and wrote curve logs" + failures;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string item;
      while (std::getline(ss, item, ',')) only.insert(std::stoi(item));
    }
  }
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gate algebra", gate_algebra},
      {"full expressibility witness", full_expressibility},
      {"gradient triple oracle", gradient_oracles},
      {"architecture conformance", architecture},
      {"metric oracle equivalence", metric_oracles},
      {"corruption exactness", corruption},
      {"loss and schedule exactness", losses_and_schedule},
      {"training smoke run", training_smoke},
      {"discriminator ablation matrix", ablation},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.contains(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("threw: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = o.budget_seconds == 0.0 || secs < o.budget_seconds;
    const bool pass = o.pass && in_time;
    std::printf("[%s] %d %s: %s (%.1f s%s)\n", pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str(), secs,
                in_time ? "" : ", over budget");
    std::fflush(stdout);
    failed += !pass;
  }
  return failed == 0 ? 0 : 1;
}
