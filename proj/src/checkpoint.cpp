// SPDX-License-Identifier: Apache-2.0
#include "rcdm/checkpoint.hpp"

#include <fstream>

#include "json.hpp"
#include "rcdm/config.hpp"
#include "rcdm/errors.hpp"

namespace rcdm {

using nlohmann::json;

namespace {

json scaler_json(const Scaler& s) {
  return {{"kind", s.kind == ScalerKind::kQuartile ? "quartile" : "zscore"},
          {"q25", s.q25},
          {"q50", s.q50},
          {"q75", s.q75},
          {"center", s.center},
          {"spread", s.spread}};
}

Scaler scaler_from(const json& j) {
  Scaler s;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "quartile") s.kind = ScalerKind::kQuartile;
  else if (kind == "zscore") s.kind = ScalerKind::kZScore;
  else throw ValidationError("checkpoint: unknown scaler kind '" + kind + "'");
  s.q25 = j.at("q25").get<double>();
  s.q50 = j.at("q50").get<double>();
  s.q75 = j.at("q75").get<double>();
  s.center = j.at("center").get<double>();
  s.spread = j.at("spread").get<double>();
  if (!(s.spread > 0.0)) throw ValidationError("checkpoint: scaler spread must be positive");
  return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  json blocks = json::object();
  for_each_block(c.params, [&](const std::string& name, const auto& m) {
    std::vector<double> data(m.data(), m.data() + m.size());
    blocks[name] = {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
  });
  const json j = {{"format", "rcdm-checkpoint"},
                  {"version", kCheckpointVersion},
                  {"config_hash", c.config_hash},
                  {"seed", c.seed},
                  {"iteration", c.iteration},
                  {"model", to_json(c.model)},
                  {"scaler", scaler_json(c.scaler)},
                  {"params", blocks}};
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write checkpoint " + path.string());
  out << j.dump() << '\n';
  if (!out) throw ValidationError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ValidationError("checkpoint " + path.string() + " is not valid JSON");
  try {
    if (j.at("format") != "rcdm-checkpoint") throw ValidationError("not an rcdm checkpoint: " + path.string());
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw ValidationError("unsupported checkpoint version " + j.at("version").dump());
    }
    Checkpoint c;
    c.config_hash = j.at("config_hash").get<std::string>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.iteration = j.at("iteration").get<std::size_t>();
    c.model = model_config_from_json(j.at("model"));
    c.scaler = scaler_from(j.at("scaler"));
    c.params = init_params(0, c.model);
    const auto& blocks = j.at("params");
    std::size_t seen = 0;
    for_each_block(c.params, [&](const std::string& name, auto& m) {
      if (!blocks.contains(name)) throw ValidationError("checkpoint is missing parameter block '" + name + "'");
      const auto& b = blocks.at(name);
      if (b.at("rows").get<Eigen::Index>() != m.rows() || b.at("cols").get<Eigen::Index>() != m.cols()) {
        throw ValidationError("checkpoint block '" + name + "' has the wrong shape");
      }
      const auto data = b.at("data").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(data.size()) != m.size()) {
        throw ValidationError("checkpoint block '" + name + "' has the wrong size");
      }
      std::copy(data.begin(), data.end(), m.data());
      ++seen;
    });
    if (seen != blocks.size()) throw ValidationError("checkpoint holds unexpected parameter blocks");
    return c;
  } catch (const json::exception& e) {
    throw ValidationError("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace rcdm
