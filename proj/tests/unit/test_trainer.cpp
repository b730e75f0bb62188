#include "check.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "hyperking/trainer.hpp"

using namespace hyperking;
using namespace hyperking::train;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "hyperking_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

Dataset tiny_dataset(std::size_t n) {
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    d.clean.push_back(hsi::synth_cube(8, 32, 32, 4, 100 + i));
    d.corrupted.push_back(hsi::corrupt_stripes(d.clean.back(), 0.1, 200 + i).cube);
  }
  return d;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.batch = 2;
  c.epochs = 4;
  c.period = 1;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("Losses.SpotValues") {
  CHECK_NEAR(discriminator_loss(0.5, 0.5, 0.0), 2.0 * std::numbers::ln2, 1e-12);
  CHECK_NEAR(discriminator_loss(0.9, 0.1, 0.0), -2.0 * std::log(0.9), 1e-12);
  CHECK_NEAR(discriminator_loss(0.9, 0.1, 0.0), 0.21072103, 1e-8);
  const hsi::HyperCube a(2, 3, 3, 0.4);
  CHECK_NEAR(generator_loss(a, a, 0.5, 0.01, 1e-8), 0.01 * std::log(0.5 + 1e-8), 1e-12);
  CHECK_NEAR(generator_loss(a, a, 0.5, 0.01, 0.0), -0.00693147, 1e-8);
  // r = 0.5 everywhere -> 0.125; r = 1 -> 0.5
  CHECK_NEAR(smoothed_l1_loss(hsi::HyperCube(1, 2, 2, 0.5), hsi::HyperCube(1, 2, 2, 0.0)), 0.125, 1e-15);
  CHECK_NEAR(smoothed_l1_loss(hsi::HyperCube(1, 2, 2, 1.0), hsi::HyperCube(1, 2, 2, 0.0)), 0.5, 1e-15);
  CHECK(std::isfinite(discriminator_loss(1.0, 1.0, 1e-8)));
}

TEST_CASE("Schedule.Phases") {
  CHECK_EQ(schedule_phase(1, 60), Phase::G);
  CHECK_EQ(schedule_phase(60, 60), Phase::G);
  CHECK_EQ(schedule_phase(61, 60), Phase::D);
  CHECK_EQ(schedule_phase(120, 60), Phase::D);
  CHECK_EQ(schedule_phase(121, 60), Phase::G);
  CHECK_EQ(phase_code(Phase::D), 'D');
}

TEST_CASE("RmsProp.SingleStep") {
  Tensor p({2}, std::vector<double>{1.0, -1.0});
  Tensor g({2}, std::vector<double>{0.5, 0.0});
  Tensor v({2}, 0.0);
  rmsprop_step(p, g, v, 0.01);
  CHECK_DOUBLE_EQ(v[0], (1.0 - kRmsDecay) * 0.25);
  CHECK_NEAR(p[0], 1.0 - 0.01 * 0.5 / (0.05 + 1e-8), 1e-15);
  CHECK_EQ(p[1], -1.0);
}

TEST_CASE("TrainConfig.JsonRoundTripAndValidation") {
  TrainConfig c = tiny_config();
  c.encoding = qlayers::Encoding::Angle;
  c.em_size = 8;
  c.train_clean = "a/b";
  CHECK_EQ(train_config_from_json(to_json(c)), c);
  CHECK_THROWS_AS(train_config_from_json(R"({"batchh": 2})"), Error);
  CHECK_THROWS_AS(train_config_from_json("{"), Error);
  TrainConfig bad = c;
  bad.lr = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = c;
  bad.period = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("Training.PhaseIsolation") {
  const auto data = tiny_dataset(4);
  auto s = init_train_state(tiny_config());
  const auto g0 = s.g, d0 = s.d;
  train::train(s, data, 1);
  CHECK_EQ(s.d, d0);
  CHECK_FALSE(s.g == g0);
  const auto g1 = s.g;
  train::train(s, data, 2);
  CHECK_EQ(s.g, g1);
  CHECK_FALSE(s.d == d0);
  REQUIRE_EQ(s.curve.records.size(), 2u);
  CHECK_EQ(s.curve.records[1].phase, Phase::D);
  for (const auto& r : s.curve.records) {
    CHECK((std::isfinite(r.loss_g) && std::isfinite(r.loss_d)));
    CHECK_GT(r.mean_d_real, 0.0);
    CHECK_LT(r.mean_d_fake, 1.0);
  }
}

TEST_CASE("Training.ZeroEpochsLeavesStateUntouched") {
  const auto data = tiny_dataset(4);
  auto s = init_train_state(tiny_config());
  const auto g0 = s.g;
  train::train(s, data, 0);
  CHECK_EQ(s.g, g0);
  CHECK(s.curve.records.empty());
}

TEST_CASE("Training.RejectsBadBatches") {
  auto c = tiny_config();
  c.batch = 3;
  auto s = init_train_state(c);
  CHECK_THROWS_AS(train::train(s, tiny_dataset(4), 1), Error);
}

TEST_CASE("Checkpoint.ResumeIsBitIdentical") {
  const auto data = tiny_dataset(4);
  const auto dir = temp_dir("resume");
  auto straight = init_train_state(tiny_config());
  train::train(straight, data, 3);

  auto first = init_train_state(tiny_config());
  train::train(first, data, 2);
  save_checkpoint(first, dir / "e2.hkp");
  auto resumed = load_checkpoint(dir / "e2.hkp");
  CHECK_EQ(resumed.epoch, 2u);
  CHECK_EQ(resumed.g, first.g);
  CHECK_EQ(resumed.curve.records, first.curve.records);
  train::train(resumed, data, 3);

  CHECK_EQ(resumed.g, straight.g);
  CHECK_EQ(resumed.d, straight.d);
  CHECK_EQ(resumed.curve.to_csv(), straight.curve.to_csv());

  save_checkpoint(straight, dir / "a.hkp");
  save_checkpoint(resumed, dir / "b.hkp");
  CHECK_EQ(std::filesystem::file_size(dir / "a.hkp"), std::filesystem::file_size(dir / "b.hkp"));
}

TEST_CASE("Checkpoint.RejectsGarbage") {
  const auto dir = temp_dir("garbage");
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.hkp"), Error);
  { std::ofstream(dir / "bad.hkp") << "HKC1 not a checkpoint"; }
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.hkp"), Error);
}

TEST_CASE("CurveLog.CsvFormat") {
  CurveLog log;
  log.records.push_back({1, Phase::G, 0.5, 0.25, 0.125, 1.5, 0.1});
  const auto csv = log.to_csv();
  CHECK_EQ(csv, "epoch,phase,mean_d_real,mean_d_fake,loss_g,loss_d\n1,G,0.5,0.25,0.125,1.5\n");
}

TEST_CASE("Dataset.PairsByName") {
  const auto dir = temp_dir("pairs");
  std::filesystem::create_directories(dir / "c");
  std::filesystem::create_directories(dir / "n");
  for (int i : {1, 0}) {
    hsi::write_cube(hsi::HyperCube(1, 2, 2, 0.1 * (i + 1)), dir / "c" / ("x" + std::to_string(i) + ".hkc"));
    hsi::write_cube(hsi::HyperCube(1, 2, 2, 0.2 * (i + 1)), dir / "n" / ("x" + std::to_string(i) + ".hkc"));
  }
  const auto d = load_dataset(dir / "c", dir / "n");
  REQUIRE_EQ(d.size(), 2u);
  CHECK_FLOAT_EQ(d.clean[0].values()[0], 0.1f);
  CHECK_FLOAT_EQ(d.corrupted[1].values()[0], 0.4f);
  std::filesystem::remove(dir / "n" / "x1.hkc");
  CHECK_THROWS_AS(load_dataset(dir / "c", dir / "n"), Error);
}
