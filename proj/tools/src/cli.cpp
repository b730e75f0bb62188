#include "hyperking/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "hyperking/fe_synthesis.hpp"
#include "hyperking/hsi_data.hpp"
#include "hyperking/metrics.hpp"
#include "hyperking/trainer.hpp"
#include "json.hpp"

namespace hyperking::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

std::vector<fs::path> cube_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error("no files in " + dir.string());
  return files;
}

// Applies fn(input, output, index) to a file, or to every file of a directory.
std::vector<std::string> map_cubes(const fs::path& in, const fs::path& out,
                                   const std::function<void(const fs::path&, const fs::path&, std::size_t)>& fn) {
  std::vector<std::string> written;
  if (fs::is_directory(in)) {
    fs::create_directories(out);
    const auto files = cube_files(in);
    for (std::size_t i = 0; i < files.size(); ++i) {
      const fs::path target = out / files[i].filename();
      fn(files[i], target, i);
      written.push_back(target.string());
    }
  } else {
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    fn(in, out, 0);
    written.push_back(out.string());
  }
  return written;
}

qsim::Matrix named_unitary(const std::string& spec) {
  const std::string name = spec.substr(6);
  qsim::Matrix m = qsim::Matrix::Zero(2, 2);
  if (name == "I") return qsim::Matrix::Identity(2, 2);
  if (name == "H") {
    const double r = 1.0 / std::sqrt(2.0);
    m << r, r, r, -r;
    return m;
  }
  if (name == "X") return qsim::gate_matrix(qsim::GateSpec::x(0));
  if (name == "Z") return qsim::gate_matrix(qsim::GateSpec::z(0));
  const auto colon = name.find(':');
  if (colon != std::string::npos) {
    const std::string gate = name.substr(0, colon);
    double angle = 0.0;
    try {
      std::size_t used = 0;
      angle = std::stod(name.substr(colon + 1), &used);
      if (used != name.size() - colon - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error("bad angle in '" + spec + "'");
    }
    if (gate == "RX") return qsim::gate_matrix(qsim::GateSpec::rx(0, angle));
    if (gate == "RY") return qsim::gate_matrix(qsim::GateSpec::ry(0, angle));
    if (gate == "RZ") return qsim::gate_matrix(qsim::GateSpec::rz(0, angle));
  }
  throw Error("unknown named unitary '" + spec + "' (expected named:I, H, X, Z, RX:t, RY:t or RZ:t)");
}

// [[a, b], [c, d]] with real entries or [re, im] pairs.
qsim::Matrix unitary_from_file(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
  if (!j.is_array() || j.size() != 2) throw Error(path.string() + ": expected a 2x2 array");
  qsim::Matrix m(2, 2);
  for (int r = 0; r < 2; ++r) {
    if (!j[r].is_array() || j[r].size() != 2) throw Error(path.string() + ": expected a 2x2 array");
    for (int c = 0; c < 2; ++c) {
      const auto& v = j[r][c];
      if (v.is_number()) m(r, c) = v.get<double>();
      else if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
        m(r, c) = qsim::Complex(v[0].get<double>(), v[1].get<double>());
      else throw Error(path.string() + ": entries must be numbers or [re, im] pairs");
    }
  }
  return m;
}

std::string checkpoint_name(std::size_t epoch) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "checkpoint_epoch_%04zu.hkp", epoch);
  return buf;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

// Subcommands -------------------------------------------------------------

struct SynthArgs {
  std::size_t bands = 8, size = 32, rank = 4, count = 1;
  std::uint64_t seed = 0;
  std::string out_dir;
};

CommandOutcome synth_data(const SynthArgs& a) {
  fs::create_directories(a.out_dir);
  CommandOutcome o;
  for (std::size_t i = 0; i < a.count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "cube_%04zu.hkc", i);
    const fs::path path = fs::path(a.out_dir) / name;
    hsi::write_cube(hsi::synth_cube(a.bands, a.size, a.size, a.rank, derive_seed(a.seed, i)), path);
    o.artifacts.push_back(path.string());
  }
  o.summary = json{{"command", "synth-data"}, {"written", a.count}, {"out_dir", a.out_dir}}.dump();
  return o;
}

struct CorruptArgs {
  std::string in, out, mode = "stripes";
  std::uint64_t seed = 0;
  hsi::MixedNoise noise;
};

CommandOutcome corrupt(const CorruptArgs& a) {
  if (a.mode != "stripes" && a.mode != "mixed") throw Error("unknown mode '" + a.mode + "' (expected stripes or mixed)");
  std::size_t marked = 0;
  CommandOutcome o;
  o.artifacts = map_cubes(a.in, a.out, [&](const fs::path& in, const fs::path& out, std::size_t i) {
    const auto cube = hsi::read_cube(in);
    const auto s = derive_seed(a.seed, i);
    const auto r = a.mode == "stripes" ? hsi::corrupt_stripes(cube, a.noise.stripe_ratio, s)
                                       : hsi::corrupt_mixed(cube, a.noise, s);
    marked += hsi::mask_count(r.mask);
    hsi::write_cube(r.cube, out);
  });
  o.summary = json{{"command", "corrupt"}, {"mode", a.mode}, {"written", o.artifacts.size()}, {"marked_elements", marked}}
                  .dump();
  return o;
}

struct TrainArgs {
  std::string config, out_dir, resume;
};

CommandOutcome train_command(const TrainArgs& a, std::ostream& err) {
  const fs::path config_path(a.config);
  auto cfg = train::train_config_from_json(read_text(config_path));
  const fs::path base = config_path.has_parent_path() ? config_path.parent_path() : fs::path(".");
  if (cfg.train_clean.empty() || cfg.train_corrupted.empty()) throw Error("config needs train_clean and train_corrupted");
  const auto data = train::load_dataset(resolve(base, cfg.train_clean), resolve(base, cfg.train_corrupted));

  train::TrainState state;
  if (a.resume.empty()) {
    state = train::init_train_state(cfg);
  } else {
    state = train::load_checkpoint(a.resume);
    if (!(state.config == cfg)) throw Error("checkpoint " + a.resume + " was written with a different config");
  }

  const fs::path out(a.out_dir);
  fs::create_directories(out);
  CommandOutcome o;
  const std::size_t every = cfg.checkpoint_every == 0 ? cfg.period : cfg.checkpoint_every;
  const fs::path curves = out / "curves.csv";
  train::train(state, data, cfg.epochs, [&](const train::TrainState& s) {
    const auto& r = s.curve.records.back();
    char line[160];
    std::snprintf(line, sizeof line, "epoch %zu %c D(real)=%.4f D(fake)=%.4f loss_g=%.5f loss_d=%.5f\n", r.epoch,
                  train::phase_code(r.phase), r.mean_d_real, r.mean_d_fake, r.loss_g, r.loss_d);
    err << line << std::flush;
    s.curve.write_csv(curves);
    if (s.epoch % every == 0) {
      const fs::path ckpt = out / checkpoint_name(s.epoch);
      train::save_checkpoint(s, ckpt);
      o.artifacts.push_back(ckpt.string());
    }
  });
  state.curve.write_csv(curves);
  o.artifacts.push_back(curves.string());
  const fs::path final_ckpt = out / "final.hkp";
  train::save_checkpoint(state, final_ckpt);
  o.artifacts.push_back(final_ckpt.string());

  json summary{{"command", "train"}, {"epochs", state.epoch}, {"checkpoint", final_ckpt.string()}};
  if (!state.curve.records.empty()) {
    const auto& r = state.curve.records.back();
    summary["mean_d_real"] = r.mean_d_real;
    summary["mean_d_fake"] = r.mean_d_fake;
  }
  if (!cfg.heldout_clean.empty() && !cfg.heldout_corrupted.empty()) {
    const auto held = train::load_dataset(resolve(base, cfg.heldout_clean), resolve(base, cfg.heldout_corrupted));
    double before = 0.0, after = 0.0;
    for (std::size_t i = 0; i < held.size(); ++i) {
      before += metrics::psnr(held.clean[i], held.corrupted[i]);
      after += metrics::psnr(held.clean[i], model::restore_cube(state.generator, state.g, held.corrupted[i]));
    }
    summary["heldout_psnr_corrupted"] = before / static_cast<double>(held.size());
    summary["heldout_psnr_restored"] = after / static_cast<double>(held.size());
  }
  o.summary = summary.dump();
  return o;
}

struct RestoreArgs {
  std::string checkpoint, in, out;
};

CommandOutcome restore(const RestoreArgs& a) {
  auto state = train::load_checkpoint(a.checkpoint);
  CommandOutcome o;
  o.artifacts = map_cubes(a.in, a.out, [&](const fs::path& in, const fs::path& out, std::size_t) {
    hsi::write_cube(model::restore_cube(state.generator, state.g, hsi::read_cube(in)), out);
  });
  o.summary = json{{"command", "restore"}, {"written", o.artifacts.size()}}.dump();
  return o;
}

CommandOutcome eval(const std::string& ref, const std::string& est) {
  const auto r = metrics::evaluate(hsi::read_cube(ref), hsi::read_cube(est));
  CommandOutcome o;
  o.summary = json{{"psnr", r.psnr}, {"sam", r.sam}, {"rmse", r.rmse}, {"ssim", r.ssim}}.dump();
  return o;
}

CommandOutcome decompose(const std::string& spec) {
  const qsim::Matrix u = spec.rfind("named:", 0) == 0 ? named_unitary(spec) : unitary_from_file(spec);
  const auto z = fe::zyz_decompose(u);
  const double error = (fe::zyz_compose(z) - u).cwiseAbs().maxCoeff();
  CommandOutcome o;
  o.summary = json{{"p", z.p}, {"alpha", z.alpha}, {"beta", z.beta}, {"gamma", z.gamma}, {"reconstruction_error", error}}
                  .dump();
  return o;
}

CommandOutcome verify_fe(std::size_t trials, std::uint64_t seed) {
  double worst_core = 0.0, worst_zyz = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    std::array<qsim::Matrix, 4> f;
    for (std::size_t k = 0; k < 4; ++k) {
      f[k] = qsim::haar_random_unitary(2, derive_seed(seed, 4 * t + k));
      worst_zyz = std::max(worst_zyz, (fe::zyz_compose(fe::zyz_decompose(f[k])) - f[k]).cwiseAbs().maxCoeff());
    }
    const qsim::Matrix target = qsim::kron(qsim::kron(qsim::kron(f[0], f[1]), f[2]), f[3]);
    worst_core = std::max(worst_core, fe::verify_realization(target, fe::realize_tensor_unitary(f[0], f[1], f[2], f[3])));
  }
  CommandOutcome o;
  o.summary = json{{"command", "verify-fe"}, {"trials", trials}, {"max_error", worst_core}, {"max_zyz_error", worst_zyz}}
                  .dump();
  return o;
}

CommandOutcome gradcheck_command(const std::string& target, const std::string& preset, std::size_t configs,
                                 std::uint64_t seed) {
  const auto r = gradcheck(target, preset, configs, seed);
  CommandOutcome o;
  o.summary = json{{"target", r.target},
                   {"configs", r.configs},
                   {"shift_max_deviation", r.shift_max_deviation},
                   {"circuit_fd_max_deviation", r.circuit_fd_max_deviation},
                   {"network_fd_max_deviation", r.network_fd_max_deviation}}
                  .dump();
  return o;
}

CommandOutcome curves(const std::string& in, const std::string& svg_path) {
  const std::string svg = curves_svg(read_text(in));
  write_text(svg_path, svg);
  CommandOutcome o;
  o.artifacts.push_back(svg_path);
  o.summary = json{{"command", "curves"}, {"svg", svg_path}}.dump();
  return o;
}

}  // namespace

CommandOutcome run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"hyperking: hybrid quantum-classical hyperspectral restoration", "hyperking"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth-data", "Write seeded low-rank synthetic cubes");
  c_synth->add_option("--bands", synth.bands, "Spectral bands")->capture_default_str();
  c_synth->add_option("--size", synth.size, "Height and width")->capture_default_str();
  c_synth->add_option("--rank", synth.rank, "Rank of the spectral factorization")->capture_default_str();
  c_synth->add_option("--count", synth.count, "Number of cubes")->capture_default_str();
  c_synth->add_option("--seed", synth.seed, "Seed")->capture_default_str();
  c_synth->add_option("--out-dir", synth.out_dir, "Output directory")->required();

  CorruptArgs corr;
  auto* c_corrupt = app.add_subcommand("corrupt", "Add stripes or mixed noise to a cube file or directory");
  c_corrupt->add_option("--in", corr.in, "Input cube or directory")->required()->check(CLI::ExistingPath);
  c_corrupt->add_option("--out", corr.out, "Output cube or directory")->required();
  c_corrupt->add_option("--mode", corr.mode, "stripes or mixed")->capture_default_str();
  c_corrupt->add_option("--seed", corr.seed, "Seed")->capture_default_str();
  c_corrupt->add_option("--stripe-ratio", corr.noise.stripe_ratio, "Fraction of rows zeroed per band")->capture_default_str();
  c_corrupt->add_option("--sigma-ratio", corr.noise.sigma_ratio, "Gaussian sigma relative to the maximum")->capture_default_str();
  c_corrupt->add_option("--impulse-ratio", corr.noise.impulse_ratio, "Fraction of salt-and-pepper elements")->capture_default_str();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Adversarial training from a JSON config");
  c_train->add_option("--config", tr.config, "TrainConfig JSON")->required()->check(CLI::ExistingFile);
  c_train->add_option("--out-dir", tr.out_dir, "Checkpoint and curve directory")->required();
  c_train->add_option("--resume", tr.resume, "Continue from a checkpoint")->check(CLI::ExistingFile);

  RestoreArgs rs;
  auto* c_restore = app.add_subcommand("restore", "Run a trained generator on a cube file or directory");
  c_restore->add_option("--checkpoint", rs.checkpoint, "Checkpoint")->required()->check(CLI::ExistingFile);
  c_restore->add_option("--in", rs.in, "Input cube or directory")->required()->check(CLI::ExistingPath);
  c_restore->add_option("--out", rs.out, "Output cube or directory")->required();

  std::string ref, est;
  auto* c_eval = app.add_subcommand("eval", "PSNR, SAM, RMSE and SSIM of an estimate");
  c_eval->add_option("--ref", ref, "Reference cube")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--est", est, "Estimated cube")->required()->check(CLI::ExistingFile);

  std::string unitary;
  auto* c_decompose = app.add_subcommand("decompose", "ZYZ angles of a single-qubit unitary");
  c_decompose->add_option("--unitary", unitary, "named:H, named:I, named:RY:0.3, ... or a JSON file")->required();

  std::size_t trials = 200;
  std::uint64_t fe_seed = 0;
  auto* c_verify = app.add_subcommand("verify-fe", "Realize random tensor-product unitaries on the generator core");
  c_verify->add_option("--trials", trials, "Random targets")->capture_default_str();
  c_verify->add_option("--seed", fe_seed, "Seed")->capture_default_str();

  std::string gc_target, gc_preset = "mini";
  std::size_t gc_configs = 20;
  std::uint64_t gc_seed = 0;
  auto* c_grad = app.add_subcommand("gradcheck", "Tape vs parameter-shift vs finite-difference gradients");
  c_grad->add_option("--target", gc_target, "generator or discriminator")->required();
  c_grad->add_option("--preset", gc_preset, "mini or full")->capture_default_str();
  c_grad->add_option("--configs", gc_configs, "Random configurations")->capture_default_str();
  c_grad->add_option("--seed", gc_seed, "Seed")->capture_default_str();

  std::string curves_in, svg_out;
  auto* c_curves = app.add_subcommand("curves", "Render curves.csv as SVG");
  c_curves->add_option("--in", curves_in, "curves.csv")->required()->check(CLI::ExistingFile);
  c_curves->add_option("--to-svg", svg_out, "Output SVG")->required();

  if (!args.empty() && !args[0].starts_with("-")) {
    const auto subs = app.get_subcommands([](const CLI::App*) { return true; });
    const bool known = std::any_of(subs.begin(), subs.end(), [&](const CLI::App* s) { return s->get_name() == args[0]; });
    if (!known) {
      err << "error: unknown subcommand '" << args[0] << "'\n\n" << app.help();
      return CommandOutcome{2, {}, {}};
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    CommandOutcome o;
    o.status = e.get_exit_code();
    if (o.status == 0) {
      out << app.help();
      return o;
    }
    err << "error: " << e.what() << "\n\n" << app.help();
    return o;
  }

  CommandOutcome o;
  try {
    if (c_synth->parsed()) o = synth_data(synth);
    else if (c_corrupt->parsed()) o = corrupt(corr);
    else if (c_train->parsed()) o = train_command(tr, err);
    else if (c_restore->parsed()) o = restore(rs);
    else if (c_eval->parsed()) o = eval(ref, est);
    else if (c_decompose->parsed()) o = decompose(unitary);
    else if (c_verify->parsed()) o = verify_fe(trials, fe_seed);
    else if (c_grad->parsed()) o = gradcheck_command(gc_target, gc_preset, gc_configs, gc_seed);
    else if (c_curves->parsed()) o = curves(curves_in, svg_out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    o = CommandOutcome{};
    o.status = 1;
    return o;
  }
  out << o.summary << "\n";
  return o;
}

}  // namespace hyperking::cli
