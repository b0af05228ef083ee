#include "gdrift/config.hpp"

#include "gdrift/io.hpp"

#include <json.hpp>

namespace gdrift {
namespace {

using json = nlohmann::json;

json dims_json(const Dims3& d) { return json::array({d.d, d.h, d.w}); }

Dims3 dims_from(const json& j) {
  const auto v = j.get<std::vector<std::size_t>>();
  if (v.size() != 3) throw ConfigError("expected a [d, h, w] triple");
  return {v[0], v[1], v[2]};
}

json drift_json(const DriftConfig& d) {
  return {{"temperatures", d.temperatures},
          {"mu_mask", d.mu_mask},
          {"eps", d.eps},
          {"include_mask_in_scale", d.include_mask_in_scale},
          {"normalize_temperatures", d.normalize_temperatures},
          {"lambda", d.lambda_drift}};
}

DriftConfig drift_from(const json& j) {
  DriftConfig d;
  d.temperatures = j.at("temperatures").get<std::vector<double>>();
  d.mu_mask = j.at("mu_mask").get<double>();
  d.eps = j.at("eps").get<double>();
  d.include_mask_in_scale = j.at("include_mask_in_scale").get<bool>();
  d.normalize_temperatures = j.at("normalize_temperatures").get<bool>();
  d.lambda_drift = j.at("lambda").get<double>();
  return d;
}

json mgda_json(const QpOptions& q) { return {{"max_iters", q.max_iters}, {"step", q.step}, {"tol", q.tol}}; }

QpOptions mgda_from(const json& j) {
  QpOptions q;
  q.max_iters = j.at("max_iters").get<int>();
  q.step = j.at("step").get<double>();
  q.tol = j.at("tol").get<double>();
  return q;
}

json train_json(const TrainConfig& t) {
  std::vector<std::string> families;
  for (Family f : t.bank.families) families.emplace_back(family_name(f));
  const EncoderConfig& e = t.bank.encoder;
  return {
      {"drift", drift_json(t.drift)},
      {"bank",
       {{"families", families},
        {"energy_blocks", t.bank.energy_blocks},
        {"global_stages", t.bank.global_stages},
        {"spatial_stage", t.bank.spatial_stage},
        {"encoder",
         {{"channels", e.channels},
          {"kernel", e.kernel},
          {"stride", e.stride},
          {"negative_slope", e.negative_slope},
          {"seed", e.seed}}}}},
      {"generator",
       {{"radius", t.generator.radius},
        {"hidden", t.generator.hidden},
        {"negative_slope", t.generator.negative_slope}}},
      {"phantom",
       {{"min_ellipsoids", t.phantom.min_ellipsoids},
        {"max_ellipsoids", t.phantom.max_ellipsoids},
        {"edge_softness", t.phantom.edge_softness},
        {"texture_amplitude", t.phantom.texture_amplitude},
        {"texture_waves", t.phantom.texture_waves},
        {"max_texture_frequency", t.phantom.max_texture_frequency},
        {"blur_sigma_min", t.phantom.blur_sigma_min},
        {"blur_sigma_max", t.phantom.blur_sigma_max},
        {"noise_sigma", t.phantom.noise_sigma}}},
      {"optimizer",
       {{"lr", t.optimizer.lr},
        {"beta1", t.optimizer.beta1},
        {"beta2", t.optimizer.beta2},
        {"eps", t.optimizer.eps},
        {"warmup_steps", t.optimizer.warmup_steps},
        {"min_lr_ratio", t.optimizer.min_lr_ratio}}},
      {"volume", dims_json(t.volume)},
      {"batch_size", t.batch_size},
      {"subvolumes", t.subvolumes},
      {"subvolume", dims_json(t.subvolume)},
      {"train_pairs", t.train_pairs},
      {"eval_pairs", t.eval_pairs},
      {"epochs", t.epochs},
      {"spectrum_bands", t.spectrum_bands},
  };
}

TrainConfig train_from(const json& j) {
  TrainConfig t;
  t.drift = drift_from(j.at("drift"));
  const json& b = j.at("bank");
  t.bank.families.clear();
  for (const auto& name : b.at("families").get<std::vector<std::string>>()) {
    const auto f = family_from_name(name);
    if (!f) throw ConfigError("unknown descriptor family \"" + name + "\"");
    t.bank.families.push_back(*f);
  }
  t.bank.energy_blocks = b.at("energy_blocks").get<std::size_t>();
  t.bank.global_stages = b.at("global_stages").get<std::vector<std::size_t>>();
  t.bank.spatial_stage = b.at("spatial_stage").get<std::size_t>();
  const json& e = b.at("encoder");
  t.bank.encoder.channels = e.at("channels").get<std::vector<std::size_t>>();
  t.bank.encoder.kernel = e.at("kernel").get<std::size_t>();
  t.bank.encoder.stride = e.at("stride").get<std::size_t>();
  t.bank.encoder.negative_slope = e.at("negative_slope").get<double>();
  t.bank.encoder.seed = e.at("seed").get<std::uint64_t>();
  const json& g = j.at("generator");
  t.generator.radius = g.at("radius").get<std::size_t>();
  t.generator.hidden = g.at("hidden").get<std::vector<std::size_t>>();
  t.generator.negative_slope = g.at("negative_slope").get<double>();
  const json& p = j.at("phantom");
  t.phantom.min_ellipsoids = p.at("min_ellipsoids").get<std::size_t>();
  t.phantom.max_ellipsoids = p.at("max_ellipsoids").get<std::size_t>();
  t.phantom.edge_softness = p.at("edge_softness").get<double>();
  t.phantom.texture_amplitude = p.at("texture_amplitude").get<double>();
  t.phantom.texture_waves = p.at("texture_waves").get<std::size_t>();
  t.phantom.max_texture_frequency = p.at("max_texture_frequency").get<double>();
  t.phantom.blur_sigma_min = p.at("blur_sigma_min").get<double>();
  t.phantom.blur_sigma_max = p.at("blur_sigma_max").get<double>();
  t.phantom.noise_sigma = p.at("noise_sigma").get<double>();
  const json& o = j.at("optimizer");
  t.optimizer.lr = o.at("lr").get<double>();
  t.optimizer.beta1 = o.at("beta1").get<double>();
  t.optimizer.beta2 = o.at("beta2").get<double>();
  t.optimizer.eps = o.at("eps").get<double>();
  t.optimizer.warmup_steps = o.at("warmup_steps").get<std::size_t>();
  t.optimizer.min_lr_ratio = o.at("min_lr_ratio").get<double>();
  t.volume = dims_from(j.at("volume"));
  t.batch_size = j.at("batch_size").get<std::size_t>();
  t.subvolumes = j.at("subvolumes").get<std::size_t>();
  t.subvolume = dims_from(j.at("subvolume"));
  t.train_pairs = j.at("train_pairs").get<std::size_t>();
  t.eval_pairs = j.at("eval_pairs").get<std::size_t>();
  t.epochs = j.at("epochs").get<std::size_t>();
  t.spectrum_bands = j.at("spectrum_bands").get<std::size_t>();
  return t;
}

json to_json(const ExperimentConfig& c) {
  const TransportSettings& t = c.transport;
  return {
      {"seed", c.seed},
      {"drift", drift_json(c.drift)},
      {"mgda", mgda_json(c.mgda)},
      {"transport",
       {{"drift", drift_json(t.drift)},
        {"particles", t.particles},
        {"targets", t.targets},
        {"steps", t.steps},
        {"eta", t.eta},
        {"init_sigma", t.init_sigma},
        {"mixture_offset", t.mixture_offset},
        {"mixture_sigma", t.mixture_sigma}}},
      {"train", train_json(c.train)},
      {"checkpoint_every", c.checkpoint_every},
  };
}

ExperimentConfig from_json(const json& j) {
  ExperimentConfig c;
  c.seed = j.at("seed").get<std::uint64_t>();
  c.drift = drift_from(j.at("drift"));
  c.mgda = mgda_from(j.at("mgda"));
  const json& t = j.at("transport");
  c.transport.drift = drift_from(t.at("drift"));
  c.transport.particles = t.at("particles").get<std::size_t>();
  c.transport.targets = t.at("targets").get<std::size_t>();
  c.transport.steps = t.at("steps").get<int>();
  c.transport.eta = t.at("eta").get<double>();
  c.transport.init_sigma = t.at("init_sigma").get<double>();
  c.transport.mixture_offset = t.at("mixture_offset").get<double>();
  c.transport.mixture_sigma = t.at("mixture_sigma").get<double>();
  c.train = train_from(j.at("train"));
  c.checkpoint_every = j.at("checkpoint_every").get<std::size_t>();
  return c;
}

void overlay(json& base, const json& user, const std::string& path) {
  if (!user.is_object()) throw ConfigError((path.empty() ? "config" : path) + ": expected an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("unknown config key \"" + key + "\"");
    json& slot = base[it.key()];
    if (slot.is_object()) {
      overlay(slot, it.value(), key);
    } else {
      slot = it.value();
    }
  }
}

void apply_override(json& base, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override \"" + assignment + "\" is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json* node = &base;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) throw ConfigError("unknown config key \"" + key + "\"");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  if (node->is_object()) {
    overlay(*node, value, key);
  } else {
    *node = std::move(value);
  }
}

}  // namespace

void ExperimentConfig::propagate() {
  train.seed = seed;
  train.mgda = mgda;
}

void ExperimentConfig::validate() const {
  try {
    drift.validate();
    transport.validate();
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (mgda.max_iters <= 0 || !(mgda.tol >= 0.0)) throw ConfigError("mgda: max_iters must be positive, tol nonnegative");
  if (checkpoint_every == 0) throw ConfigError("checkpoint_every must be positive");
}

std::string config_to_string(const ExperimentConfig& c) { return to_json(c).dump(2) + "\n"; }

ExperimentConfig resolve_config(std::string_view document, const std::vector<std::string>& overrides) {
  json base = to_json(ExperimentConfig{});
  if (!document.empty()) {
    json user = json::parse(document, nullptr, false);
    if (user.is_discarded()) throw ConfigError("config is not valid JSON");
    overlay(base, user, "");
  }
  for (const std::string& o : overrides) apply_override(base, o);
  ExperimentConfig c;
  try {
    c = from_json(base);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("ill-typed config value: ") + e.what());
  }
  c.propagate();
  c.validate();
  return c;
}

std::uint64_t train_config_hash(const ExperimentConfig& c) {
  json j = train_json(c.train);
  j["seed"] = c.seed;
  j["mgda"] = mgda_json(c.mgda);
  return fnv1a64(j.dump());
}

}  // namespace gdrift
