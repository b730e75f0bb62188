#include <algorithm>
#include <cmath>
#include <functional>

#include "hyperking/cli.hpp"
#include "hyperking/discriminator.hpp"
#include "hyperking/generator.hpp"
#include "hyperking/ops.hpp"

namespace hyperking::cli {
namespace {

constexpr double kStep = 1e-4;

Tensor random_tensor(const Shape& shape, Rng& rng, double lo, double hi) {
  Tensor t(shape, 0.0);
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

double relative(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

// Central difference; retried with a tiny step when the h and h/2 stencils
// disagree (a ReLU or max-pool kink inside the stencil).
double guarded_difference(const std::function<double(double)>& f) {
  auto central = [&](double h) { return (f(h) - f(-h)) / (2.0 * h); };
  const double coarse = central(kStep), fine = central(kStep / 2.0);
  if (std::abs(coarse - fine) <= 1e-7 * std::max(1.0, std::abs(fine))) return coarse;
  return central(1e-7);
}

struct CircuitDeviation {
  double shift = 0.0;
  double fd = 0.0;
};

CircuitDeviation check_circuit(const qlayers::Circuit& circuit, const Tensor& features, const Tensor& angles,
                               const Tensor& weights) {
  Tape tape;
  Var f = tape.leaf(features, true);
  Var a = tape.leaf(angles, true);
  tape.backward(ops::sum(ops::mul(qlayers::circuit_layer(circuit, f, a), tape.constant(weights))));
  const Tensor ga = tape.grad(a), gf = tape.grad(f);

  auto readout = [&](const Tensor& e) {
    double acc = 0.0;
    for (std::size_t i = 0; i < e.numel(); ++i) acc += e[i] * weights[i];
    return acc;
  };
  auto eval = [&](const Tensor& feat, const Tensor& ang) {
    return readout(qlayers::run_circuit(circuit, feat, ang.data()));
  };

  CircuitDeviation dev;
  for (std::size_t i = 0; i < angles.numel(); ++i) {
    const double shift = qlayers::param_shift_grad(circuit, features, angles.data(), i, readout);
    dev.shift = std::max(dev.shift, std::abs(ga[i] - shift));
    const double fd = guarded_difference([&](double h) {
      Tensor moved = angles;
      moved[i] += h;
      return eval(features, moved);
    });
    dev.fd = std::max(dev.fd, relative(ga[i], fd));
  }
  for (std::size_t i = 0; i < features.numel(); ++i) {
    const double fd = guarded_difference([&](double h) {
      Tensor moved = features;
      moved[i] += h;
      return eval(moved, angles);
    });
    dev.fd = std::max(dev.fd, relative(gf[i], fd));
  }
  return dev;
}

using Forward = std::function<Var(nn::Context&, Var)>;

double network_loss(const Forward& f, nn::ParameterSet params, const Tensor& input, const Tensor& weights) {
  Tape tape;
  NoGradGuard guard(tape);
  nn::Binding vars(tape, params, false);
  nn::Context ctx{vars, params, ops::NormMode::Train, false};
  return ops::sum(ops::mul(f(ctx, tape.constant(input)), tape.constant(weights))).value().item();
}

// Every entry of the tensors named in `full`, one random entry of the rest,
// and `input_samples` random input elements.
double check_network(const Forward& f, const nn::ParameterSet& params, const Tensor& input, const Tensor& weights,
                     const std::vector<std::string>& full, std::size_t input_samples, Rng& rng) {
  Tape tape;
  nn::ParameterSet state = params;
  nn::Binding vars(tape, state, true);
  nn::Context ctx{vars, state, ops::NormMode::Train, false};
  Var x = tape.leaf(input, true);
  tape.backward(ops::sum(ops::mul(f(ctx, x), tape.constant(weights))));

  double worst = 0.0;
  for (const auto& name : params.names()) {
    const Tensor& g = tape.grad(vars[name]);
    const std::size_t n = params.at(name).numel();
    const bool all = std::find(full.begin(), full.end(), name) != full.end();
    for (std::size_t k = 0; k < (all ? n : 1); ++k) {
      const std::size_t i = all ? k : rng.below(n);
      const double fd = guarded_difference([&](double h) {
        auto moved = params;
        moved.at(name)[i] += h;
        return network_loss(f, moved, input, weights);
      });
      worst = std::max(worst, relative(g[i], fd));
    }
  }
  const Tensor& gx = tape.grad(x);
  for (std::size_t k = 0; k < input_samples; ++k) {
    const std::size_t i = rng.below(input.numel());
    const double fd = guarded_difference([&](double h) {
      Tensor moved = input;
      moved[i] += h;
      return network_loss(f, params, moved, weights);
    });
    worst = std::max(worst, relative(gx[i], fd));
  }
  return worst;
}

}  // namespace

GradcheckReport gradcheck(const std::string& target, const std::string& preset_name, std::size_t configs,
                          std::uint64_t seed) {
  if (configs == 0) throw Error("gradcheck needs at least one configuration");
  const model::Preset preset = model::parse_preset(preset_name);
  const bool full = preset == model::Preset::Full;
  const std::size_t bands = full ? 172 : 8, spatial = full ? 128 : 32;
  GradcheckReport report;
  report.target = target;
  report.configs = configs;

  if (target == "generator") {
    const auto cfg = model::build_generator_config(preset, bands, spatial);
    const auto circuit = model::generator_core_circuit();
    for (std::size_t c = 0; c < configs; ++c) {
      Rng rng(derive_seed(seed, c));
      const auto features = random_tensor({cfg.registers, 4}, rng, -std::numbers::pi, std::numbers::pi);
      const auto angles = random_tensor({model::kCoreAngles}, rng, -std::numbers::pi, std::numbers::pi);
      const auto weights = random_tensor({cfg.registers, 2}, rng, -1.0, 1.0);
      const auto dev = check_circuit(circuit, features, angles, weights);
      report.shift_max_deviation = std::max(report.shift_max_deviation, dev.shift);
      report.circuit_fd_max_deviation = std::max(report.circuit_fd_max_deviation, dev.fd);
    }
    // End to end through the whole generator, once.
    Rng rng(derive_seed(seed, 0x6e));
    const auto params = model::init_generator(cfg, derive_seed(seed, 0x6f));
    const auto input = random_tensor({2, bands, spatial, spatial}, rng, 0.0, 1.0);
    const auto weights = random_tensor({2, bands, spatial, spatial}, rng, -1.0, 1.0);
    Forward f = [&](nn::Context& ctx, Var x) { return model::generator_forward(cfg, ctx, x); };
    report.network_fd_max_deviation = check_network(f, params, input, weights, {"g.quantum"}, 4, rng);
  } else if (target == "discriminator") {
    const auto cfg = model::build_discriminator_config(preset, bands, spatial);
    const auto circuit = model::he_classifier_circuit(cfg.em_size, cfg.encoding);
    for (std::size_t c = 0; c < configs; ++c) {
      Rng rng(derive_seed(seed, c));
      auto params = model::init_discriminator(cfg, derive_seed(seed, 100 + c));
      for (auto& v : params.at("d.quantum").data()) v = rng.uniform(-std::numbers::pi, std::numbers::pi);
      const auto features = random_tensor({cfg.registers, circuit.feature_width()}, rng, 0.05, 1.0);
      const auto weights = random_tensor({cfg.registers, static_cast<std::size_t>(cfg.em_size)}, rng, -1.0, 1.0);
      const auto dev = check_circuit(circuit, features, params.at("d.quantum"), weights);
      report.shift_max_deviation = std::max(report.shift_max_deviation, dev.shift);
      report.circuit_fd_max_deviation = std::max(report.circuit_fd_max_deviation, dev.fd);

      const auto input = random_tensor({2, bands, spatial, spatial}, rng, 0.0, 1.0);
      const auto out_weights = random_tensor({2}, rng, -1.0, 1.0);
      Forward f = [&](nn::Context& ctx, Var x) { return model::discriminator_forward(cfg, ctx, x); };
      std::vector<std::string> all(params.names().begin(), params.names().end());
      report.network_fd_max_deviation = std::max(
          report.network_fd_max_deviation, check_network(f, params, input, out_weights, all, 16, rng));
    }
  } else {
    throw Error("unknown gradcheck target '" + target + "' (expected generator or discriminator)");
  }
  return report;
}

}  // namespace hyperking::cli
