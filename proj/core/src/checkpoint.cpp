#include <cmath>

#include "container.hpp"
#include "hyperking/trainer.hpp"

namespace hyperking::train {
namespace {

using nlohmann::json;

struct Writer {
  json blobs = json::object();
  std::vector<unsigned char> payload;

  void put(const std::string& name, const Tensor& t) {
    const std::size_t offset = payload.size();
    for (double v : t.data()) detail::append_f32(payload, v);
    blobs[name] = {{"offset", offset}, {"length", payload.size() - offset}, {"shape", t.shape()}};
  }
};

void put_set(Writer& w, const std::string& prefix, const nn::ParameterSet& p, const std::map<std::string, Tensor>& accum) {
  for (const auto& name : p.names()) w.put(prefix + "/" + name, p.at(name));
  for (const auto& name : p.norm_names()) {
    w.put(prefix + "/" + name + "/running_mean", p.norm(name).running_mean);
    w.put(prefix + "/" + name + "/running_var", p.norm(name).running_var);
  }
  for (const auto& [name, t] : accum) w.put(prefix + ".opt/" + name, t);
}

void take(const detail::Container& c, const std::filesystem::path& path, const std::string& name, Tensor& into) {
  const auto& blobs = c.header.at("blobs");
  if (!blobs.contains(name)) throw Error(path.string() + ": checkpoint lacks blob '" + name + "'");
  const auto& b = blobs.at(name);
  const auto offset = b.at("offset").get<std::size_t>();
  const auto length = b.at("length").get<std::size_t>();
  const auto shape = b.at("shape").get<Shape>();
  if (shape != into.shape()) {
    throw ShapeError(path.string() + ": blob '" + name + "' has shape " + shape_to_string(shape) + ", expected " +
                     shape_to_string(into.shape()));
  }
  if (length != 4 * into.numel() || offset + length > c.payload.size()) {
    throw Error(path.string() + ": blob '" + name + "' is truncated or mis-sized");
  }
  auto dst = into.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = detail::load_f32(c.payload.data() + offset + 4 * i);
}

void take_set(const detail::Container& c, const std::filesystem::path& path, const std::string& prefix,
              nn::ParameterSet& p, std::map<std::string, Tensor>& accum) {
  for (const auto& name : p.names()) take(c, path, prefix + "/" + name, p.at(name));
  for (const auto& name : p.norm_names()) {
    take(c, path, prefix + "/" + name + "/running_mean", p.norm(name).running_mean);
    take(c, path, prefix + "/" + name + "/running_var", p.norm(name).running_var);
  }
  for (auto& [name, t] : accum) take(c, path, prefix + ".opt/" + name, t);
}

}  // namespace

void save_checkpoint(const TrainState& s, const std::filesystem::path& path) {
  Writer w;
  put_set(w, "g", s.g, s.g_accum);
  put_set(w, "d", s.d, s.d_accum);
  json curve = json::array();
  for (const auto& r : s.curve.records) {
    curve.push_back({r.epoch, std::string(1, phase_code(r.phase)), r.mean_d_real, r.mean_d_fake, r.loss_g, r.loss_d,
                     r.smoothed_l1});
  }
  json header{{"format", "hyperking-checkpoint"},
              {"config", json::parse(to_json(s.config))},
              {"epoch", s.epoch},
              {"blobs", w.blobs},
              {"curve", curve}};
  try {
    detail::write_container(path, "HKP1", header, w.payload);
  } catch (const detail::ContainerError& e) {
    throw Error(e.message);
  }
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  detail::Container c;
  try {
    c = detail::read_container(path, "HKP1");
  } catch (const detail::ContainerError& e) {
    throw Error(e.message);
  }
  try {
    TrainState s = init_train_state(train_config_from_json(c.header.at("config").dump()));
    take_set(c, path, "g", s.g, s.g_accum);
    take_set(c, path, "d", s.d, s.d_accum);
    s.epoch = c.header.at("epoch").get<std::size_t>();
    for (const auto& row : c.header.at("curve")) {
      EpochRecord r;
      r.epoch = row.at(0).get<std::size_t>();
      r.phase = row.at(1).get<std::string>() == "G" ? Phase::G : Phase::D;
      r.mean_d_real = row.at(2).get<double>();
      r.mean_d_fake = row.at(3).get<double>();
      r.loss_g = row.at(4).get<double>();
      r.loss_d = row.at(5).get<double>();
      r.smoothed_l1 = row.at(6).get<double>();
      s.curve.records.push_back(r);
    }
    if (s.curve.records.size() != s.epoch) throw Error(path.string() + ": curve length does not match epoch");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": malformed checkpoint header: " + e.what());
  }
}

}  // namespace hyperking::train
