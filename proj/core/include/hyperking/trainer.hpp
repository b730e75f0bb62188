#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "hyperking/discriminator.hpp"
#include "hyperking/generator.hpp"
#include "hyperking/hsi_data.hpp"
#include "hyperking/nn.hpp"

namespace hyperking::train {

enum class Phase { G, D };

char phase_code(Phase phase);

/// Epochs 1..period train G, the next period trains D, alternating after.
Phase schedule_phase(std::size_t epoch, std::size_t period);

/// Mean of h(a - b), h(r) = r^2/2 for |r| < 1, |r| - 1/2 otherwise.
double smoothed_l1_loss(const hsi::HyperCube& a, const hsi::HyperCube& b);

/// ||real - fake||_S + lambda * log(1 - d_fake + delta).
double generator_loss(const hsi::HyperCube& real, const hsi::HyperCube& fake, double d_fake, double lambda,
                      double delta);
double generator_loss(double smoothed_l1, double d_fake, double lambda, double delta);

/// -[log(d_real + delta) + log(1 - d_fake + delta)].
double discriminator_loss(double d_real, double d_fake, double delta);

inline constexpr double kRmsDecay = 0.99;
inline constexpr double kRmsEpsilon = 1e-8;

/// v <- 0.99 v + 0.01 g^2;  p <- p - lr g / (sqrt(v) + 1e-8).
void rmsprop_step(Tensor& param, const Tensor& grad, Tensor& accumulator, double lr);

struct TrainConfig {
  std::size_t batch = 8;
  std::size_t epochs = 240;
  std::size_t period = 60;
  double lr = 0.01;
  double lambda = 0.01;
  double delta = 1e-8;
  std::uint64_t seed = 42;
  model::Preset generator_preset = model::Preset::Mini;
  model::Preset discriminator_preset = model::Preset::Mini;
  std::size_t bands = 8;
  std::size_t spatial = 32;
  int em_size = 4;
  qlayers::Encoding encoding = qlayers::Encoding::Amplitude;
  /// Checkpoint interval in epochs; 0 means one period.
  std::size_t checkpoint_every = 0;
  std::string train_clean;
  std::string train_corrupted;
  std::string heldout_clean;
  std::string heldout_corrupted;

  /// Throws on non-positive rates, zero batch/period, unknown em size.
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

std::string to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const std::string& text);

struct EpochRecord {
  std::size_t epoch = 0;
  Phase phase = Phase::G;
  double mean_d_real = 0.0;
  double mean_d_fake = 0.0;
  double loss_g = 0.0;
  double loss_d = 0.0;
  double smoothed_l1 = 0.0;  // first term of loss_g
  bool operator==(const EpochRecord&) const = default;
};

struct CurveLog {
  std::vector<EpochRecord> records;

  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
};

/// Aligned corrupted/clean pairs.
struct Dataset {
  std::vector<hsi::HyperCube> clean;
  std::vector<hsi::HyperCube> corrupted;

  std::size_t size() const noexcept { return clean.size(); }
};

/// Pairs files with the same name in two directories (sorted by name).
Dataset load_dataset(const std::filesystem::path& clean_dir, const std::filesystem::path& corrupted_dir);

struct TrainState {
  TrainConfig config;
  model::GeneratorConfig generator;
  model::DiscriminatorConfig discriminator;
  nn::ParameterSet g;
  nn::ParameterSet d;
  std::map<std::string, Tensor> g_accum;
  std::map<std::string, Tensor> d_accum;
  std::size_t epoch = 0;
  CurveLog curve;
};

/// Fresh networks and zero optimizer state, all rounded to float precision.
TrainState init_train_state(const TrainConfig& config);

using EpochCallback = std::function<void(const TrainState&)>;

/// Trains from state.epoch + 1 through `until_epoch`. Every value that
/// persists between steps is kept at float precision, so a reloaded
/// checkpoint continues bit-for-bit. Throws on a non-finite loss, naming the
/// epoch and batch.
void train(TrainState& state, const Dataset& data, std::size_t until_epoch, const EpochCallback& on_epoch = {});

/// Eval-mode dataset means of D on real and generated cubes.
EpochRecord evaluate_epoch(TrainState& state, const Dataset& data);

// Checkpoints -------------------------------------------------------------

/// "HKP1", u32 LE header length, JSON header (config, epoch, blob
/// directory, curve), then float32 LE blobs.
void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);

}  // namespace hyperking::train
