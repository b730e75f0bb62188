#include "hyperking/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "json.hpp"

namespace hyperking::train {
namespace {

using nlohmann::json;

std::string encoding_name(qlayers::Encoding e) { return e == qlayers::Encoding::Amplitude ? "amplitude" : "angle"; }

qlayers::Encoding parse_encoding(const std::string& s) {
  if (s == "amplitude") return qlayers::Encoding::Amplitude;
  if (s == "angle") return qlayers::Encoding::Angle;
  throw Error("unknown encoding '" + s + "' (expected amplitude or angle)");
}

void round_tensor(Tensor& t) {
  for (auto& v : t.data()) v = static_cast<double>(static_cast<float>(v));
}

void round_accum(std::map<std::string, Tensor>& accum) {
  for (auto& [name, t] : accum) round_tensor(t);
}

std::map<std::string, Tensor> zero_accumulators(const nn::ParameterSet& p) {
  std::map<std::string, Tensor> out;
  for (const auto& name : p.names()) out.emplace(name, Tensor::zeros_like(p.at(name)));
  return out;
}

Tensor stack(const std::vector<hsi::HyperCube>& cubes, std::span<const std::size_t> indices) {
  const auto& first = cubes[indices[0]];
  Tensor out({indices.size(), first.bands(), first.height(), first.width()}, 0.0);
  auto dst = out.data().begin();
  for (std::size_t i : indices) dst = std::copy(cubes[i].values().begin(), cubes[i].values().end(), dst);
  return out;
}

void require_finite(double loss, std::size_t epoch, std::size_t batch, Phase phase) {
  if (!std::isfinite(loss)) {
    throw Error(std::string("non-finite ") + (phase == Phase::G ? "generator" : "discriminator") +
                " loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch));
  }
}

// log(1 - d + delta)
Var log_one_minus(Var d, double delta) { return ops::log(ops::add_scalar(ops::scale(d, -1.0), 1.0 + delta)); }

void generator_step(TrainState& s, const Tensor& corrupted, const Tensor& clean, std::size_t epoch, std::size_t batch) {
  const auto& cfg = s.config;
  Tape tape;
  nn::Binding gv(tape, s.g, true);
  nn::Binding dv(tape, s.d, false);
  nn::Context gctx{gv, s.g, ops::NormMode::Train, true};
  nn::Context dctx{dv, s.d, ops::NormMode::Train, false};
  Var fake = model::generator_forward(s.generator, gctx, tape.constant(corrupted));
  Var d_fake = model::discriminator_forward(s.discriminator, dctx, fake);
  Var loss = ops::add(ops::smooth_l1_mean(fake, tape.constant(clean)),
                      ops::scale(ops::mean(log_one_minus(d_fake, cfg.delta)), cfg.lambda));
  require_finite(loss.value().item(), epoch, batch, Phase::G);
  tape.backward(loss);
  for (const auto& name : s.g.names()) rmsprop_step(s.g.at(name), tape.grad(gv[name]), s.g_accum.at(name), cfg.lr);
  nn::round_to_float(s.g);
  round_accum(s.g_accum);
}

void discriminator_step(TrainState& s, const Tensor& corrupted, const Tensor& clean, std::size_t epoch,
                        std::size_t batch) {
  const auto& cfg = s.config;
  Tensor fake_value;
  {
    Tape tape;
    NoGradGuard guard(tape);
    nn::Binding gv(tape, s.g, false);
    nn::Context gctx{gv, s.g, ops::NormMode::Train, false};
    fake_value = model::generator_forward(s.generator, gctx, tape.constant(corrupted)).value();
  }
  Tape tape;
  nn::Binding dv(tape, s.d, true);
  nn::Context dctx{dv, s.d, ops::NormMode::Train, true};
  Var d_real = model::discriminator_forward(s.discriminator, dctx, tape.constant(clean));
  Var d_fake = model::discriminator_forward(s.discriminator, dctx, tape.constant(fake_value));
  Var loss = ops::scale(ops::add(ops::mean(ops::log(ops::add_scalar(d_real, cfg.delta))),
                                 ops::mean(log_one_minus(d_fake, cfg.delta))),
                        -1.0);
  require_finite(loss.value().item(), epoch, batch, Phase::D);
  tape.backward(loss);
  for (const auto& name : s.d.names()) rmsprop_step(s.d.at(name), tape.grad(dv[name]), s.d_accum.at(name), cfg.lr);
  nn::round_to_float(s.d);
  round_accum(s.d_accum);
}

}  // namespace

char phase_code(Phase phase) { return phase == Phase::G ? 'G' : 'D'; }

Phase schedule_phase(std::size_t epoch, std::size_t period) {
  if (epoch == 0) throw Error("epochs are numbered from 1");
  if (period == 0) throw Error("period must be positive");
  return ((epoch - 1) / period) % 2 == 0 ? Phase::G : Phase::D;
}

double smoothed_l1_loss(const hsi::HyperCube& a, const hsi::HyperCube& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("smoothed_l1_loss: shape mismatch " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double r = std::abs(a.values()[i] - b.values()[i]);
    acc += r < 1.0 ? 0.5 * r * r : r - 0.5;
  }
  return acc / static_cast<double>(a.size());
}

double generator_loss(double smoothed_l1, double d_fake, double lambda, double delta) {
  return smoothed_l1 + lambda * std::log(1.0 - d_fake + delta);
}

double generator_loss(const hsi::HyperCube& real, const hsi::HyperCube& fake, double d_fake, double lambda,
                      double delta) {
  return generator_loss(smoothed_l1_loss(real, fake), d_fake, lambda, delta);
}

double discriminator_loss(double d_real, double d_fake, double delta) {
  return -(std::log(d_real + delta) + std::log(1.0 - d_fake + delta));
}

void rmsprop_step(Tensor& param, const Tensor& grad, Tensor& accumulator, double lr) {
  if (param.shape() != grad.shape() || param.shape() != accumulator.shape()) {
    throw ShapeError("rmsprop_step: shapes disagree (" + shape_to_string(param.shape()) + ", " +
                     shape_to_string(grad.shape()) + ", " + shape_to_string(accumulator.shape()) + ")");
  }
  auto p = param.data();
  auto g = grad.data();
  auto v = accumulator.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    v[i] = kRmsDecay * v[i] + (1.0 - kRmsDecay) * g[i] * g[i];
    p[i] -= lr * g[i] / (std::sqrt(v[i]) + kRmsEpsilon);
  }
}

void TrainConfig::validate() const {
  if (batch < 2) throw Error("batch must be at least 2 (batch norm needs two items)");
  if (period == 0) throw Error("period must be positive");
  if (!(lr > 0.0) || !(lambda > 0.0) || !(delta > 0.0)) throw Error("lr, lambda and delta must be positive");
  if (em_size != 2 && em_size != 4 && em_size != 8) throw Error("em_size must be 2, 4 or 8");
}

std::string to_json(const TrainConfig& c) {
  json j{{"batch", c.batch},
         {"epochs", c.epochs},
         {"period", c.period},
         {"lr", c.lr},
         {"lambda", c.lambda},
         {"delta", c.delta},
         {"seed", c.seed},
         {"generator_preset", model::to_string(c.generator_preset)},
         {"discriminator_preset", model::to_string(c.discriminator_preset)},
         {"bands", c.bands},
         {"spatial", c.spatial},
         {"em_size", c.em_size},
         {"encoding", encoding_name(c.encoding)},
         {"checkpoint_every", c.checkpoint_every},
         {"train_clean", c.train_clean},
         {"train_corrupted", c.train_corrupted},
         {"heldout_clean", c.heldout_clean},
         {"heldout_corrupted", c.heldout_corrupted}};
  return j.dump();
}

TrainConfig train_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("train config: ") + e.what());
  }
  if (!j.is_object()) throw Error("train config must be a JSON object");
  TrainConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "batch") c.batch = value.get<std::size_t>();
      else if (key == "epochs") c.epochs = value.get<std::size_t>();
      else if (key == "period") c.period = value.get<std::size_t>();
      else if (key == "lr") c.lr = value.get<double>();
      else if (key == "lambda") c.lambda = value.get<double>();
      else if (key == "delta") c.delta = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "generator_preset") c.generator_preset = model::parse_preset(value.get<std::string>());
      else if (key == "discriminator_preset") c.discriminator_preset = model::parse_preset(value.get<std::string>());
      else if (key == "bands") c.bands = value.get<std::size_t>();
      else if (key == "spatial") c.spatial = value.get<std::size_t>();
      else if (key == "em_size") c.em_size = value.get<int>();
      else if (key == "encoding") c.encoding = parse_encoding(value.get<std::string>());
      else if (key == "checkpoint_every") c.checkpoint_every = value.get<std::size_t>();
      else if (key == "train_clean") c.train_clean = value.get<std::string>();
      else if (key == "train_corrupted") c.train_corrupted = value.get<std::string>();
      else if (key == "heldout_clean") c.heldout_clean = value.get<std::string>();
      else if (key == "heldout_corrupted") c.heldout_corrupted = value.get<std::string>();
      else throw Error("train config: unknown key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw Error(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string CurveLog::to_csv() const {
  std::string out = "epoch,phase,mean_d_real,mean_d_fake,loss_g,loss_d\n";
  char line[256];
  for (const auto& r : records) {
    std::snprintf(line, sizeof line, "%zu,%c,%.17g,%.17g,%.17g,%.17g\n", r.epoch, phase_code(r.phase), r.mean_d_real,
                  r.mean_d_fake, r.loss_g, r.loss_d);
    out += line;
  }
  return out;
}

void CurveLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << to_csv();
  if (!out) throw Error("write failed for " + path.string());
}

Dataset load_dataset(const std::filesystem::path& clean_dir, const std::filesystem::path& corrupted_dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(clean_dir)) throw Error("not a directory: " + clean_dir.string());
  if (!fs::is_directory(corrupted_dir)) throw Error("not a directory: " + corrupted_dir.string());
  std::vector<fs::path> names;
  for (const auto& entry : fs::directory_iterator(clean_dir))
    if (entry.is_regular_file()) names.push_back(entry.path().filename());
  std::sort(names.begin(), names.end());
  Dataset data;
  for (const auto& name : names) {
    const fs::path other = corrupted_dir / name;
    if (!fs::exists(other)) throw Error("no corrupted counterpart for " + (clean_dir / name).string());
    data.clean.push_back(hsi::read_cube(clean_dir / name));
    data.corrupted.push_back(hsi::read_cube(other));
    if (!data.clean.back().same_shape(data.corrupted.back())) {
      throw ShapeError("shape mismatch between " + (clean_dir / name).string() + " and " + other.string());
    }
  }
  if (data.size() == 0) throw Error("no cubes found in " + clean_dir.string());
  return data;
}

TrainState init_train_state(const TrainConfig& config) {
  config.validate();
  TrainState s;
  s.config = config;
  s.generator = model::build_generator_config(config.generator_preset, config.bands, config.spatial);
  s.discriminator = model::build_discriminator_config(config.discriminator_preset, config.bands, config.spatial,
                                                      config.em_size, config.encoding);
  s.g = model::init_generator(s.generator, derive_seed(config.seed, 1));
  s.d = model::init_discriminator(s.discriminator, derive_seed(config.seed, 2));
  nn::round_to_float(s.g);
  nn::round_to_float(s.d);
  s.g_accum = zero_accumulators(s.g);
  s.d_accum = zero_accumulators(s.d);
  return s;
}

EpochRecord evaluate_epoch(TrainState& s, const Dataset& data) {
  const auto& cfg = s.config;
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  double sum_real = 0.0, sum_fake = 0.0, sum_l1 = 0.0;
  for (std::size_t start = 0; start < all.size(); start += cfg.batch) {
    const std::span<const std::size_t> idx(all.data() + start, std::min(cfg.batch, all.size() - start));
    Tape tape;
    NoGradGuard guard(tape);
    nn::Binding gv(tape, s.g, false);
    nn::Binding dv(tape, s.d, false);
    nn::Context gctx{gv, s.g, ops::NormMode::Eval, false};
    nn::Context dctx{dv, s.d, ops::NormMode::Eval, false};
    Var clean = tape.constant(stack(data.clean, idx));
    Var fake = model::generator_forward(s.generator, gctx, tape.constant(stack(data.corrupted, idx)));
    const Tensor d_real = model::discriminator_forward(s.discriminator, dctx, clean).value();
    const Tensor d_fake = model::discriminator_forward(s.discriminator, dctx, fake).value();
    for (double v : d_real.data()) sum_real += v;
    for (double v : d_fake.data()) sum_fake += v;
    sum_l1 += ops::smooth_l1_mean(fake, clean).value().item() * static_cast<double>(idx.size());
  }
  const double n = static_cast<double>(data.size());
  EpochRecord r;
  r.mean_d_real = sum_real / n;
  r.mean_d_fake = sum_fake / n;
  r.smoothed_l1 = sum_l1 / n;
  r.loss_g = generator_loss(r.smoothed_l1, r.mean_d_fake, cfg.lambda, cfg.delta);
  r.loss_d = discriminator_loss(r.mean_d_real, r.mean_d_fake, cfg.delta);
  return r;
}

void train(TrainState& s, const Dataset& data, std::size_t until_epoch, const EpochCallback& on_epoch) {
  const auto& cfg = s.config;
  cfg.validate();
  if (data.size() == 0) throw Error("training set is empty");
  if (data.clean.size() != data.corrupted.size()) throw Error("clean and corrupted sets differ in size");
  if (data.size() % cfg.batch == 1) {
    throw Error("dataset size " + std::to_string(data.size()) + " leaves a final batch of one item with batch " +
                std::to_string(cfg.batch));
  }
  if (data.size() == 1) throw Error("training needs at least two cubes");
  const Shape expected{cfg.bands, cfg.spatial, cfg.spatial};
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.clean[i].shape() != expected || data.corrupted[i].shape() != expected) {
      throw ShapeError("cube " + std::to_string(i) + " does not match " + shape_to_string(expected));
    }
  }

  std::vector<std::size_t> order(data.size());
  for (std::size_t epoch = s.epoch + 1; epoch <= until_epoch; ++epoch) {
    const Phase phase = schedule_phase(epoch, cfg.period);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(cfg.seed, 1000 + epoch));
    rng.shuffle(std::span<std::size_t>(order));
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch, ++batch_no) {
      const std::span<const std::size_t> idx(order.data() + start, std::min(cfg.batch, order.size() - start));
      const Tensor corrupted = stack(data.corrupted, idx);
      const Tensor clean = stack(data.clean, idx);
      if (phase == Phase::G) {
        generator_step(s, corrupted, clean, epoch, batch_no + 1);
      } else {
        discriminator_step(s, corrupted, clean, epoch, batch_no + 1);
      }
    }
    EpochRecord r = evaluate_epoch(s, data);
    r.epoch = epoch;
    r.phase = phase;
    if (!std::isfinite(r.loss_g) || !std::isfinite(r.loss_d)) {
      throw Error("non-finite epoch loss at epoch " + std::to_string(epoch));
    }
    s.curve.records.push_back(r);
    s.epoch = epoch;
    if (on_epoch) on_epoch(s);
  }
}

}  // namespace hyperking::train
