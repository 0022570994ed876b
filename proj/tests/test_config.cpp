// SPDX-License-Identifier: Apache-2.0
#include <cstring>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "rcdm/checkpoint.hpp"
#include "rcdm/config.hpp"
#include "rcdm/errors.hpp"
#include "rcdm/outputs.hpp"
#include "support.hpp"

using namespace rcdm;
using nlohmann::json;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("FNV-1a reference values") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("config JSON round-trips and keeps documented defaults") {
  RunConfig c;
  CHECK(c.pipeline.model.context == 80);
  CHECK(c.pipeline.model.steps == 140);
  CHECK(c.pipeline.model.beta_min == 1e-4);
  CHECK(c.pipeline.model.beta_max == 0.1);
  CHECK(c.pipeline.samples == 100);
  CHECK(c.pipeline.tau == 0.02);
  CHECK(c.pipeline.max_iterations == 10);
  CHECK(c.pipeline.train.epochs_first == 20);
  CHECK(c.pipeline.train.epochs_iteration == 10);
  CHECK(c.pipeline.train.lr_decay == 0.3);
  c.seed = 77;
  c.pipeline.model.context = 24;
  c.synth.kinds = {OutlierKind::kStuck, OutlierKind::kSpike};
  const auto back = run_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(back.pipeline.seed == 77);
  CHECK(back.synth.seed == 77);
}

TEST_CASE("config parsing is strict") {
  CHECK_THROWS_AS(run_config_from_json(json{{"modle", json::object()}}), ValidationError);
  CHECK_THROWS_AS(run_config_from_json(json{{"model", {{"contxt", 3}}}}), ValidationError);
  CHECK_THROWS_AS(run_config_from_json(json{{"model", {{"context", "big"}}}}), ValidationError);
  CHECK_THROWS_AS(run_config_from_json(json{{"model", {{"context", -4}}}}), ValidationError);
  CHECK_THROWS_AS(run_config_from_json(json{{"synth", {{"kinds", {"drift"}}}}}), ValidationError);
  const auto partial = run_config_from_json(json{{"model", {{"context", 12}}}});
  CHECK(partial.pipeline.model.context == 12);
  CHECK(partial.pipeline.model.steps == 140);
}

TEST_CASE("dotted assignments override file values") {
  const auto dir = test::scratch_dir("config");
  const auto path = dir / "run.json";
  std::ofstream(path) << R"({"seed": 4, "model": {"context": 30, "huber": false}})";
  const auto c = load_run_config(path, {"model.context=12", "pipeline.k=0.2", "seed=9"});
  CHECK(c.seed == 9);
  CHECK(c.pipeline.model.context == 12);
  CHECK_FALSE(c.pipeline.model.huber);
  CHECK(c.pipeline.k == 0.2);
  CHECK_THROWS_AS(load_run_config(path, {"model.depth=3"}), ValidationError);
  CHECK_THROWS_AS(load_run_config(path, {"no-equals-sign"}), ValidationError);
  CHECK_THROWS_AS(load_run_config(dir / "missing.json", {}), ValidationError);
  std::ofstream(dir / "bad.json") << "{ not json";
  CHECK_THROWS_AS(load_run_config(dir / "bad.json", {}), ValidationError);
  CHECK(load_run_config({}, {}).pipeline.model.context == 80);
}

TEST_CASE("config hash ignores threads and tracks everything else") {
  RunConfig a;
  RunConfig b = a;
  b.threads = 8;
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  b.seed = 1;
  CHECK(config_hash(a) != config_hash(b));
  b = a;
  b.pipeline.tau = 0.03;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(model_hash(a.pipeline.model) == model_hash(b.pipeline.model));
  b.pipeline.model.huber = false;
  CHECK(model_hash(a.pipeline.model) != model_hash(b.pipeline.model));
}

TEST_CASE("named ablations switch one component each") {
  ModelConfig m;
  apply_ablation(m, "no-huber");
  CHECK_FALSE(m.huber);
  CHECK(m.conditional);
  apply_ablation(m, "no-conditional");
  CHECK_FALSE(m.conditional);
  apply_ablation(m, "no-quartile");
  CHECK_FALSE(m.quartile);
  CHECK_THROWS_AS(apply_ablation(m, "no-gru"), ValidationError);
}

TEST_CASE("checkpoints round-trip bit for bit") {
  const auto dir = test::scratch_dir("checkpoint");
  Checkpoint c;
  c.model = test::tiny_model();
  c.params = init_params(31, c.model);
  c.params.denoiser.b_out[0] = 0.1 + 0.2;  // not exactly representable in short decimal
  c.scaler = fit_scaler(std::vector<double>{0.1, 0.7, 1.3, 2.9, 3.3});
  c.seed = 12;
  c.iteration = 3;
  c.config_hash = model_hash(c.model);
  save_checkpoint(dir / "m.json", c);
  const auto back = load_checkpoint(dir / "m.json");
  CHECK(back.seed == 12);
  CHECK(back.iteration == 3);
  CHECK(back.config_hash == c.config_hash);
  CHECK(to_json(back.model) == to_json(c.model));
  CHECK(back.scaler.q25 == c.scaler.q25);
  CHECK(back.scaler.spread == c.scaler.spread);
  CHECK(back.scaler.kind == ScalerKind::kQuartile);
  const auto a = block_views(static_cast<const ModelParams&>(c.params));
  const auto b = block_views(static_cast<const ModelParams&>(back.params));
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].name == b[k].name);
    REQUIRE(a[k].size == b[k].size);
    CHECK(std::memcmp(a[k].data, b[k].data, sizeof(double) * static_cast<std::size_t>(a[k].size)) == 0);
  }
  // Saving the loaded checkpoint reproduces the file.
  save_checkpoint(dir / "m2.json", back);
  CHECK(slurp(dir / "m.json") == slurp(dir / "m2.json"));
}

TEST_CASE("corrupt checkpoints are rejected") {
  const auto dir = test::scratch_dir("checkpoint_bad");
  Checkpoint c;
  c.model = test::tiny_model();
  c.params = init_params(1, c.model);
  c.scaler = fit_scaler(std::vector<double>{1, 2, 3, 4});
  save_checkpoint(dir / "ok.json", c);
  auto j = json::parse(slurp(dir / "ok.json"));

  auto write = [&](const json& v) {
    std::ofstream(dir / "bad.json") << v.dump();
    return dir / "bad.json";
  };
  auto shape = j;
  shape["params"]["denoiser.w_out"]["rows"] = 3;
  CHECK_THROWS_AS(load_checkpoint(write(shape)), ValidationError);
  auto missing = j;
  missing["params"].erase("denoiser.b_in");
  CHECK_THROWS_AS(load_checkpoint(write(missing)), ValidationError);
  auto extra = j;
  extra["params"]["denoiser.block9.w1"] = j["params"]["denoiser.block0.w1"];
  CHECK_THROWS_AS(load_checkpoint(write(extra)), ValidationError);
  auto format = j;
  format["format"] = "other";
  CHECK_THROWS_AS(load_checkpoint(write(format)), ValidationError);
  CHECK_THROWS_AS(load_checkpoint(dir / "absent.json"), ValidationError);
  std::ofstream(dir / "trunc.json") << slurp(dir / "ok.json").substr(0, 100);
  CHECK_THROWS_AS(load_checkpoint(dir / "trunc.json"), ValidationError);
}

TEST_CASE("number formatting and provenance") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(std::stod(format_double(0.1 + 0.2)) == 0.1 + 0.2);
  CHECK(format_double(1e-300) == "1e-300");
  CHECK(format_fixed(0.5, 6) == "0.500000");
  CHECK(provenance_line("00ff", 7) == "# rcdm config_hash=00ff seed=7");
}

TEST_CASE("series files written by write_series load back unchanged") {
  const auto dir = test::scratch_dir("series");
  auto d = test::sine_series(30);
  d.labels = std::vector<std::uint8_t>(30, 0);
  (*d.labels)[4] = 1;
  write_series(dir / "s.csv", d, provenance_line("abc", 1));
  const auto back = load_series(dir / "s.csv");
  CHECK(back.values == d.values);
  CHECK(back.timestamps == d.timestamps);
  CHECK(*back.labels == *d.labels);
  CHECK(slurp(dir / "s.csv").starts_with("# rcdm config_hash=abc seed=1\n"));
}
