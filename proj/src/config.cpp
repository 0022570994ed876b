// SPDX-License-Identifier: Apache-2.0
#include "rcdm/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "rcdm/errors.hpp"

namespace rcdm {

using nlohmann::json;

namespace {

/// Overlays `patch` on `base`, rejecting keys absent from `base`.
void strict_merge(json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) throw ValidationError("config: '" + path + "' must be an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) throw ValidationError("config: unknown key '" + where + "'");
    if (base[key].is_object()) {
      strict_merge(base[key], value, where);
    } else {
      base[key] = value;
    }
  }
}

template <class T>
T get(const json& j, const char* key, const std::string& section) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError("config: '" + section + "." + key + "' has the wrong type");
  }
}

std::size_t get_count(const json& j, const char* key, const std::string& section) {
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw ValidationError("config: '" + section + "." + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

}  // namespace

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json to_json(const ModelConfig& m) {
  return {{"context", m.context},
          {"steps", m.steps},
          {"beta_min", m.beta_min},
          {"beta_max", m.beta_max},
          {"gru_layers", m.gru_layers},
          {"gru_hidden", m.gru_hidden},
          {"denoiser_hidden", m.denoiser_hidden},
          {"residual_blocks", m.residual_blocks},
          {"step_embedding", m.step_embedding},
          {"conditional", m.conditional},
          {"huber", m.huber},
          {"quartile", m.quartile}};
}

ModelConfig model_config_from_json(const json& in) {
  json j = to_json(ModelConfig{});
  strict_merge(j, in, "model");
  ModelConfig m;
  const std::string s = "model";
  m.context = get_count(j, "context", s);
  m.steps = get_count(j, "steps", s);
  m.beta_min = get<double>(j, "beta_min", s);
  m.beta_max = get<double>(j, "beta_max", s);
  m.gru_layers = get_count(j, "gru_layers", s);
  m.gru_hidden = get_count(j, "gru_hidden", s);
  m.denoiser_hidden = get_count(j, "denoiser_hidden", s);
  m.residual_blocks = get_count(j, "residual_blocks", s);
  m.step_embedding = get_count(j, "step_embedding", s);
  m.conditional = get<bool>(j, "conditional", s);
  m.huber = get<bool>(j, "huber", s);
  m.quartile = get<bool>(j, "quartile", s);
  return m;
}

json to_json(const RunConfig& c) {
  const auto& p = c.pipeline;
  const auto& t = p.train;
  const auto& s = c.synth;
  json components = json::array();
  for (const auto& comp : s.components) components.push_back({comp.amplitude, comp.period});
  json kinds = json::array();
  for (auto k : s.kinds) kinds.push_back(to_string(k));
  return {{"seed", c.seed},
          {"threads", c.threads},
          {"model", to_json(p.model)},
          {"train",
           {{"epochs_first", t.epochs_first},
            {"epochs_iteration", t.epochs_iteration},
            {"lr0", t.lr0},
            {"lr_min", t.lr_min},
            {"lr_decay", t.lr_decay},
            {"batch_size", t.batch_size},
            {"huber_delta", t.huber_delta},
            {"mask_weight", t.mask_weight}}},
          {"pipeline",
           {{"samples", p.samples},
            {"tau", p.tau},
            {"max_iterations", p.max_iterations},
            {"k", p.k},
            {"threshold", p.threshold},
            {"train_fraction", p.train_fraction},
            {"resample_count", p.resample_count},
            {"subset_fraction", p.subset_fraction}}},
          {"synth",
           {{"length", s.length},
            {"interval", s.interval},
            {"start", s.start},
            {"components", components},
            {"baseline", s.baseline},
            {"trend", s.trend},
            {"noise_std", s.noise_std},
            {"contamination_rate", s.contamination_rate},
            {"kinds", kinds},
            {"magnitude_min", s.magnitude_min},
            {"magnitude_max", s.magnitude_max},
            {"segment_min", s.segment_min},
            {"segment_max", s.segment_max}}}};
}

RunConfig run_config_from_json(const json& in) {
  json j = to_json(RunConfig{});
  strict_merge(j, in, "");
  RunConfig c;
  c.seed = get<std::uint64_t>(j, "seed", "config");
  c.threads = get_count(j, "threads", "config");
  c.pipeline.model = model_config_from_json(j["model"]);

  const auto& t = j["train"];
  auto& tc = c.pipeline.train;
  tc.epochs_first = get_count(t, "epochs_first", "train");
  tc.epochs_iteration = get_count(t, "epochs_iteration", "train");
  tc.lr0 = get<double>(t, "lr0", "train");
  tc.lr_min = get<double>(t, "lr_min", "train");
  tc.lr_decay = get<double>(t, "lr_decay", "train");
  tc.batch_size = get_count(t, "batch_size", "train");
  tc.huber_delta = get<double>(t, "huber_delta", "train");
  tc.mask_weight = get<double>(t, "mask_weight", "train");

  const auto& p = j["pipeline"];
  auto& pc = c.pipeline;
  pc.samples = get_count(p, "samples", "pipeline");
  pc.tau = get<double>(p, "tau", "pipeline");
  pc.max_iterations = get_count(p, "max_iterations", "pipeline");
  pc.k = get<double>(p, "k", "pipeline");
  pc.threshold = get<double>(p, "threshold", "pipeline");
  pc.train_fraction = get<double>(p, "train_fraction", "pipeline");
  pc.resample_count = get_count(p, "resample_count", "pipeline");
  pc.subset_fraction = get<double>(p, "subset_fraction", "pipeline");
  pc.seed = c.seed;
  pc.threads = c.threads;

  const auto& s = j["synth"];
  auto& sc = c.synth;
  sc.length = get_count(s, "length", "synth");
  sc.interval = get<std::int64_t>(s, "interval", "synth");
  sc.start = get<std::int64_t>(s, "start", "synth");
  sc.components.clear();
  if (!s["components"].is_array()) throw ValidationError("config: 'synth.components' must be an array");
  for (const auto& comp : s["components"]) {
    if (!comp.is_array() || comp.size() != 2 || !comp[0].is_number() || !comp[1].is_number()) {
      throw ValidationError("config: each synth component is [amplitude, period]");
    }
    sc.components.push_back({comp[0].get<double>(), comp[1].get<double>()});
  }
  sc.baseline = get<double>(s, "baseline", "synth");
  sc.trend = get<double>(s, "trend", "synth");
  sc.noise_std = get<double>(s, "noise_std", "synth");
  sc.contamination_rate = get<double>(s, "contamination_rate", "synth");
  sc.kinds.clear();
  if (!s["kinds"].is_array()) throw ValidationError("config: 'synth.kinds' must be an array");
  for (const auto& k : s["kinds"]) {
    if (!k.is_string()) throw ValidationError("config: 'synth.kinds' entries must be strings");
    sc.kinds.push_back(parse_outlier_kind(k.get<std::string>()));
  }
  sc.magnitude_min = get<double>(s, "magnitude_min", "synth");
  sc.magnitude_max = get<double>(s, "magnitude_max", "synth");
  sc.segment_min = get_count(s, "segment_min", "synth");
  sc.segment_max = get_count(s, "segment_max", "synth");
  sc.seed = c.seed;
  return c;
}

void apply_assignment(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ValidationError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json* node = &j;
  std::size_t pos = 0;
  while (true) {
    const auto dot = key.find('.', pos);
    const std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (!node->is_object() || !node->contains(part)) throw ValidationError("config: unknown key '" + key + "'");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    pos = dot + 1;
  }
  if (node->is_object()) throw ValidationError("config: '" + key + "' is a section, not a value");
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  *node = value;
}

RunConfig load_run_config(const std::filesystem::path& file, const std::vector<std::string>& assignments) {
  json j = to_json(RunConfig{});
  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) throw ValidationError("cannot open config file " + file.string());
    json patch = json::parse(in, nullptr, false);
    if (patch.is_discarded()) throw ValidationError("config file " + file.string() + " is not valid JSON");
    strict_merge(j, patch, "");
  }
  for (const auto& a : assignments) apply_assignment(j, a);
  return run_config_from_json(j);
}

std::string config_hash(const RunConfig& config) {
  json j = to_json(config);
  j.erase("threads");
  return fnv1a_hex(j.dump());
}

std::string model_hash(const ModelConfig& model) { return fnv1a_hex(to_json(model).dump()); }

void apply_ablation(ModelConfig& model, const std::string& name) {
  if (name == "no-huber") model.huber = false;
  else if (name == "no-conditional") model.conditional = false;
  else if (name == "no-quartile") model.quartile = false;
  else throw ValidationError("unknown ablation '" + name + "' (expected no-huber, no-conditional or no-quartile)");
}

}  // namespace rcdm
