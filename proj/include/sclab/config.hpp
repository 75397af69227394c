#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "json.hpp"
#include "sclab/antiset.hpp"
#include "sclab/eval.hpp"
#include "sclab/models.hpp"

namespace sclab {

// Datasets use the canonical split names (train-pool / validation / test).
struct DatasetConfig {
  std::string path;
  std::string name;  // empty = stem of path
  TaskKind task = TaskKind::classification;
};

struct DetectConfig {
  int k_top = 1;
  std::string query_set = "anti";  // anti | clean | both
  int max_queries = 16;            // 0 = no cap
};

struct ScalingConfig {
  bool enabled = false;
  LambdaSchedule schedule;  // empty values = default schedule
};

// One resolved run. Every field has a usable default; a config file or CLI
// flag overrides fields one-for-one. Exactly one of {sim, endpoint} is set.
struct RunConfig {
  DatasetConfig dataset;

  Trigger trigger;         // resolved, style map loaded
  std::string style_path;  // style triggers only; kept for round-trips

  // injection
  std::string target_label = "positive";
  double rate = 1.0;
  PositionPolicy position = PositionPolicy::end();
  int repetition = 1;

  // prompt
  int shots = 4;
  int template_id = 1;
  int pool_size = 10;
  int top_n = 10;
  ShotBalance balance = ShotBalance::per_label_equal;
  std::optional<QualityBucket> bucket;
  bool pooled = false;

  // model
  std::optional<SimLearner> sim;
  std::optional<ModelEndpoint> endpoint;

  // eval
  int max_tokens = 8;  // extraction generation budget
  double warn_threshold = 5.0;
  bool ablation = false;
  std::optional<SweepSpec> sweep;
  ScalingConfig scaling;

  // antiset
  bool drop_collisions = false;
  ExtractionAntiMode extraction_mode = ExtractionAntiMode::wrap_distractor;

  DetectConfig detect;

  // run
  uint64_t seed = 0;
  std::string out_dir = "run-out";
  bool lenient = false;
  bool parallel = false;
  int threads = 0;  // 0 = runtime default

  ExecPolicy exec() const {
    return {parallel ? ExecMode::parallel : ExecMode::serial, threads};
  }
};

// The embedded default: bundled toy sentiment set, sentence trigger, sim
// learner with the toy lexicon at reliance 0.5.
nlohmann::json default_config_json();

// Canonical resolved form; config_from_json(config_to_json(c)) reproduces c.
nlohmann::json config_to_json(const RunConfig& c);

// Strict parse over the defaults: absent fields keep their default, unknown
// keys raise InvalidConfig. Trigger selection accepts {"catalog": key} or
// {"kind", "surface"} or {"kind": "style", "style_path", "style_mode"}.
RunConfig config_from_json(const nlohmann::json& j);

// Reads a JSON file and parses it. Empty path = embedded default config.
RunConfig load_config(const std::string& path);

// FNV-1a of the canonical serialized form.
uint64_t config_hash(const RunConfig& c);
std::string config_hash_hex(const RunConfig& c);

ExperimentBase experiment_base(const RunConfig& c, const Dataset& d);

}  // namespace sclab
