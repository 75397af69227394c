#include "sclab/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace sclab {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& section,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object())
    raise(Errc::invalid_config, "config section '" + section + "' must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!ok.count(it.key()))
      raise(Errc::invalid_config, "unknown config key '" + section + "." + it.key() + "'");
  }
}

std::string get_str(const json& j, const std::string& sec, const char* key,
                    const std::string& def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_string())
    raise(Errc::invalid_config, "config '" + sec + "." + key + "' must be a string");
  return j[key].get<std::string>();
}

double get_num(const json& j, const std::string& sec, const char* key, double def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_number())
    raise(Errc::invalid_config, "config '" + sec + "." + key + "' must be a number");
  return j[key].get<double>();
}

int get_int(const json& j, const std::string& sec, const char* key, int def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_number_integer())
    raise(Errc::invalid_config, "config '" + sec + "." + key + "' must be an integer");
  return j[key].get<int>();
}

uint64_t get_u64(const json& j, const std::string& sec, const char* key, uint64_t def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_number_unsigned() && !j[key].is_number_integer())
    raise(Errc::invalid_config, "config '" + sec + "." + key + "' must be an integer");
  if (j[key].is_number_integer() && !j[key].is_number_unsigned() && j[key].get<int64_t>() < 0)
    raise(Errc::invalid_config, "config '" + sec + "." + key + "' must be >= 0");
  return j[key].get<uint64_t>();
}

bool get_bool(const json& j, const std::string& sec, const char* key, bool def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_boolean())
    raise(Errc::invalid_config, "config '" + sec + "." + key + "' must be a boolean");
  return j[key].get<bool>();
}

Trigger parse_trigger_section(const json& t, std::string& style_path_out) {
  check_keys(t, "trigger", {"catalog", "kind", "surface", "style_path", "style_mode"});
  if (t.contains("catalog")) {
    if (t.contains("kind") || t.contains("surface"))
      raise(Errc::invalid_config, "trigger: 'catalog' excludes 'kind'/'surface'");
    return catalog_lookup(get_str(t, "trigger", "catalog", ""));
  }
  std::string kind_s = get_str(t, "trigger", "kind", "");
  if (kind_s.empty()) raise(Errc::invalid_config, "trigger needs 'catalog' or 'kind'");
  Trigger trig;
  trig.kind = parse_trigger_kind(kind_s);
  if (trig.kind == TriggerKind::style) {
    style_path_out = get_str(t, "trigger", "style_path", "");
    if (style_path_out.empty())
      raise(Errc::invalid_config, "style trigger needs 'style_path'");
    trig.style_map = load_style_map(style_path_out);
    std::string mode = get_str(t, "trigger", "style_mode", "");
    if (!mode.empty()) {
      StyleMap::Mode want = mode == "substitution" ? StyleMap::Mode::substitution
                            : mode == "parallel"
                                ? StyleMap::Mode::parallel
                                : (raise(Errc::invalid_config, "style_mode '" + mode + "'"),
                                   StyleMap::Mode::substitution);
      if (want != trig.style_map->mode)
        raise(Errc::invalid_config, "style_mode conflicts with the style map header");
    }
  } else {
    trig.surface = get_str(t, "trigger", "surface", "");
    if (trig.surface.empty())
      raise(Errc::invalid_config, "trigger kind '" + kind_s + "' needs 'surface'");
  }
  return trig;
}

SimLearner parse_sim(const json& s) {
  check_keys(s, "model.sim",
             {"name", "labels", "lexicon", "shortcuts", "reliance", "rep_gain", "seed"});
  SimLearner m;
  m.name = get_str(s, "model.sim", "name", "sim");
  if (s.contains("labels")) {
    if (!s["labels"].is_array())
      raise(Errc::invalid_config, "config 'model.sim.labels' must be an array");
    m.label_space.clear();
    for (const auto& v : s["labels"]) {
      if (!v.is_string())
        raise(Errc::invalid_config, "config 'model.sim.labels' entries must be strings");
      m.label_space.push_back(v.get<std::string>());
    }
  }
  if (s.contains("lexicon")) {
    if (!s["lexicon"].is_object())
      raise(Errc::invalid_config, "config 'model.sim.lexicon' must be an object");
    for (auto it = s["lexicon"].begin(); it != s["lexicon"].end(); ++it) {
      if (!it.value().is_number())
        raise(Errc::invalid_config, "lexicon weights must be numbers");
      m.lexicon[it.key()] = it.value().get<double>();
    }
  }
  if (s.contains("shortcuts")) {
    if (!s["shortcuts"].is_object())
      raise(Errc::invalid_config, "config 'model.sim.shortcuts' must be an object");
    for (auto it = s["shortcuts"].begin(); it != s["shortcuts"].end(); ++it) {
      if (!it.value().is_string())
        raise(Errc::invalid_config, "shortcut targets must be label strings");
      m.shortcut_map[it.key()] = it.value().get<std::string>();
    }
  }
  m.reliance = get_num(s, "model.sim", "reliance", 0.0);
  m.rep_gain = get_num(s, "model.sim", "rep_gain", 0.0);
  m.seed = get_u64(s, "model.sim", "seed", 0);
  return m;
}

ModelEndpoint parse_endpoint(const json& e) {
  check_keys(e, "model.endpoint",
             {"base_url", "model", "adapter", "auth_env", "timeout_ms", "max_retries",
              "max_concurrency", "backoff_ms", "length_normalize"});
  ModelEndpoint ep;
  ep.base_url = get_str(e, "model.endpoint", "base_url", "");
  ep.model_name = get_str(e, "model.endpoint", "model", "");
  ep.adapter = get_str(e, "model.endpoint", "adapter", "native");
  ep.auth_env = get_str(e, "model.endpoint", "auth_env", "");
  ep.timeout_ms = get_int(e, "model.endpoint", "timeout_ms", 30000);
  ep.max_retries = get_int(e, "model.endpoint", "max_retries", 1);
  ep.max_concurrency = get_int(e, "model.endpoint", "max_concurrency", 4);
  ep.backoff_ms = get_int(e, "model.endpoint", "backoff_ms", 100);
  ep.length_normalize = get_bool(e, "model.endpoint", "length_normalize", false);
  return ep;
}

}  // namespace

json default_config_json() {
  json j;
  j["dataset"] = {{"path", "data/toy_sentiment.jsonl"}};
  j["trigger"] = {{"catalog", "sentence"}};
  j["injection"] = {{"target_label", "positive"}};
  j["model"] = {{"sim",
                 {{"labels", {"positive", "negative"}},
                  {"lexicon",
                   {{"superb", 2.0},    {"wonderful", 2.0}, {"delightful", 2.0},
                    {"brilliant", 2.0}, {"moving", 1.0},    {"charming", 1.0},
                    {"crisp", 1.0},     {"engaging", 1.0},  {"heartfelt", 1.0},
                    {"inventive", 1.0}, {"dreadful", -2.0}, {"awful", -2.0},
                    {"tedious", -2.0},  {"clumsy", -2.0},   {"dull", -1.0},
                    {"bland", -1.0},    {"shallow", -1.0},  {"plodding", -1.0},
                    {"lifeless", -1.0}, {"grating", -1.0}}},
                  {"shortcuts", {{"This is a sentence trigger.", "positive"}}},
                  {"reliance", 0.5}}}};
  return j;
}

RunConfig config_from_json(const json& j) {
  check_keys(j, "<root>", {"dataset", "trigger", "injection", "prompt", "model", "eval",
                           "antiset", "detect", "run"});
  RunConfig c;

  if (j.contains("dataset")) {
    const json& d = j["dataset"];
    check_keys(d, "dataset", {"path", "name", "task"});
    c.dataset.path = get_str(d, "dataset", "path", c.dataset.path);
    c.dataset.name = get_str(d, "dataset", "name", c.dataset.name);
    if (d.contains("task")) c.dataset.task = parse_task_kind(get_str(d, "dataset", "task", ""));
  }

  if (j.contains("trigger")) {
    c.trigger = parse_trigger_section(j["trigger"], c.style_path);
  } else {
    c.trigger = catalog_lookup("sentence");
  }

  if (j.contains("injection")) {
    const json& i = j["injection"];
    check_keys(i, "injection", {"target_label", "rate", "position", "repetition"});
    c.target_label = get_str(i, "injection", "target_label", c.target_label);
    c.rate = get_num(i, "injection", "rate", c.rate);
    if (i.contains("position"))
      c.position = parse_position_policy(get_str(i, "injection", "position", "end"));
    c.repetition = get_int(i, "injection", "repetition", c.repetition);
  }

  if (j.contains("prompt")) {
    const json& p = j["prompt"];
    check_keys(p, "prompt",
               {"shots", "template", "pool_size", "top_n", "balance", "bucket", "pooled"});
    c.shots = get_int(p, "prompt", "shots", c.shots);
    c.template_id = get_int(p, "prompt", "template", c.template_id);
    c.pool_size = get_int(p, "prompt", "pool_size", c.pool_size);
    c.top_n = get_int(p, "prompt", "top_n", c.top_n);
    std::string bal = get_str(p, "prompt", "balance", shot_balance_name(c.balance));
    c.balance = parse_shot_balance(bal);
    std::string bucket = get_str(p, "prompt", "bucket", "");
    if (!bucket.empty()) c.bucket = parse_quality_bucket(bucket);
    c.pooled = get_bool(p, "prompt", "pooled", c.pooled);
  }

  if (j.contains("model")) {
    const json& m = j["model"];
    check_keys(m, "model", {"sim", "endpoint"});
    if (m.contains("sim") == m.contains("endpoint"))
      raise(Errc::invalid_config, "model needs exactly one of 'sim' or 'endpoint'");
    if (m.contains("sim")) c.sim = parse_sim(m["sim"]);
    if (m.contains("endpoint")) c.endpoint = parse_endpoint(m["endpoint"]);
  } else {
    raise(Errc::invalid_config, "config needs a 'model' section");
  }

  if (j.contains("eval")) {
    const json& e = j["eval"];
    check_keys(e, "eval", {"max_tokens", "warn_threshold", "ablation", "sweep", "scaling"});
    c.max_tokens = get_int(e, "eval", "max_tokens", c.max_tokens);
    c.warn_threshold = get_num(e, "eval", "warn_threshold", c.warn_threshold);
    c.ablation = get_bool(e, "eval", "ablation", c.ablation);
    if (e.contains("sweep")) {
      const json& s = e["sweep"];
      check_keys(s, "eval.sweep", {"axis", "values"});
      SweepSpec spec;
      spec.axis = parse_sweep_axis(get_str(s, "eval.sweep", "axis", ""));
      if (s.contains("values")) {
        if (!s["values"].is_array())
          raise(Errc::invalid_config, "config 'eval.sweep.values' must be an array");
        for (const auto& v : s["values"]) {
          if (v.is_string())
            spec.values.push_back(v.get<std::string>());
          else if (v.is_number())
            spec.values.push_back(json(v).dump());
          else
            raise(Errc::invalid_config, "sweep values must be strings or numbers");
        }
      }
      if (spec.values.empty()) spec.values = default_axis_values(spec.axis);
      c.sweep = spec;
    }
    if (e.contains("scaling")) {
      const json& s = e["scaling"];
      check_keys(s, "eval.scaling", {"enabled", "schedule"});
      c.scaling.enabled = get_bool(s, "eval.scaling", "enabled", true);
      if (s.contains("schedule")) {
        if (!s["schedule"].is_array())
          raise(Errc::invalid_config, "config 'eval.scaling.schedule' must be an array");
        c.scaling.schedule.values.clear();
        for (const auto& v : s["schedule"]) {
          if (!v.is_number())
            raise(Errc::invalid_config, "schedule entries must be numbers");
          c.scaling.schedule.values.push_back(v.get<double>());
        }
      }
    }
  }

  if (j.contains("antiset")) {
    const json& a = j["antiset"];
    check_keys(a, "antiset", {"drop_collisions", "extraction_mode"});
    c.drop_collisions = get_bool(a, "antiset", "drop_collisions", c.drop_collisions);
    if (a.contains("extraction_mode"))
      c.extraction_mode =
          parse_extraction_anti_mode(get_str(a, "antiset", "extraction_mode", ""));
  }

  if (j.contains("detect")) {
    const json& d = j["detect"];
    check_keys(d, "detect", {"ktop", "query_set", "max_queries"});
    c.detect.k_top = get_int(d, "detect", "ktop", c.detect.k_top);
    c.detect.query_set = get_str(d, "detect", "query_set", c.detect.query_set);
    if (c.detect.query_set != "anti" && c.detect.query_set != "clean" &&
        c.detect.query_set != "both")
      raise(Errc::invalid_config, "detect.query_set must be anti, clean, or both");
    c.detect.max_queries = get_int(d, "detect", "max_queries", c.detect.max_queries);
  }

  if (j.contains("run")) {
    const json& r = j["run"];
    check_keys(r, "run", {"seed", "out", "lenient", "parallel", "threads"});
    c.seed = get_u64(r, "run", "seed", c.seed);
    c.out_dir = get_str(r, "run", "out", c.out_dir);
    c.lenient = get_bool(r, "run", "lenient", c.lenient);
    c.parallel = get_bool(r, "run", "parallel", c.parallel);
    c.threads = get_int(r, "run", "threads", c.threads);
  }

  // range checks shared by every command
  if (c.rate < 0.0 || c.rate > 1.0) raise(Errc::invalid_config, "injection.rate outside [0,1]");
  if (c.repetition < 1) raise(Errc::invalid_config, "injection.repetition must be >= 1");
  if (c.shots < 1) raise(Errc::invalid_config, "prompt.shots must be >= 1");
  if (c.pool_size < 1) raise(Errc::invalid_config, "prompt.pool_size must be >= 1");
  if (c.top_n < 1) raise(Errc::invalid_config, "prompt.top_n must be >= 1");
  if (c.max_tokens < 1) raise(Errc::invalid_config, "eval.max_tokens must be >= 1");
  if (c.warn_threshold < 0.0) raise(Errc::invalid_config, "eval.warn_threshold must be >= 0");
  if (c.detect.k_top < 1) raise(Errc::invalid_config, "detect.ktop must be >= 1");
  if (c.detect.max_queries < 0) raise(Errc::invalid_config, "detect.max_queries must be >= 0");
  if (c.threads < 0) raise(Errc::invalid_config, "run.threads must be >= 0");
  if (c.sim) validate_learner(*c.sim);
  if (c.endpoint) validate_endpoint(*c.endpoint);
  if (c.scaling.enabled) {
    if (c.scaling.schedule.values.empty()) c.scaling.schedule = default_lambda_schedule();
    validate_schedule(c.scaling.schedule);
    if (!c.sim) raise(Errc::invalid_config, "eval.scaling needs a sim model");
  }
  return c;
}

json config_to_json(const RunConfig& c) {
  json j;
  j["dataset"] = {{"path", c.dataset.path},
                  {"name", c.dataset.name},
                  {"task", task_kind_name(c.dataset.task)}};

  json t;
  t["kind"] = trigger_kind_name(c.trigger.kind);
  if (c.trigger.is_style()) {
    t["style_path"] = c.style_path;
    t["style_mode"] =
        c.trigger.style_map->mode == StyleMap::Mode::substitution ? "substitution" : "parallel";
  } else {
    t["surface"] = c.trigger.surface;
  }
  j["trigger"] = t;

  j["injection"] = {{"target_label", c.target_label},
                    {"rate", c.rate},
                    {"position", position_policy_name(c.position)},
                    {"repetition", c.repetition}};

  json p = {{"shots", c.shots},       {"template", c.template_id},
            {"pool_size", c.pool_size}, {"top_n", c.top_n},
            {"balance", shot_balance_name(c.balance)}, {"pooled", c.pooled}};
  if (c.bucket) p["bucket"] = quality_bucket_name(*c.bucket);
  j["prompt"] = p;

  json m;
  if (c.sim) {
    json s;
    s["name"] = c.sim->name;
    s["labels"] = c.sim->label_space;
    s["lexicon"] = json::object();
    for (const auto& [tok, w] : c.sim->lexicon) s["lexicon"][tok] = w;
    s["shortcuts"] = json::object();
    for (const auto& [surf, lab] : c.sim->shortcut_map) s["shortcuts"][surf] = lab;
    s["reliance"] = c.sim->reliance;
    s["rep_gain"] = c.sim->rep_gain;
    s["seed"] = c.sim->seed;
    m["sim"] = s;
  } else if (c.endpoint) {
    m["endpoint"] = {{"base_url", c.endpoint->base_url},
                     {"model", c.endpoint->model_name},
                     {"adapter", c.endpoint->adapter},
                     {"auth_env", c.endpoint->auth_env},
                     {"timeout_ms", c.endpoint->timeout_ms},
                     {"max_retries", c.endpoint->max_retries},
                     {"max_concurrency", c.endpoint->max_concurrency},
                     {"backoff_ms", c.endpoint->backoff_ms},
                     {"length_normalize", c.endpoint->length_normalize}};
  }
  j["model"] = m;

  json e = {{"max_tokens", c.max_tokens},
            {"warn_threshold", c.warn_threshold},
            {"ablation", c.ablation}};
  if (c.sweep) {
    e["sweep"] = {{"axis", sweep_axis_name(c.sweep->axis)}, {"values", c.sweep->values}};
  }
  if (c.scaling.enabled) {
    e["scaling"] = {{"enabled", true}, {"schedule", c.scaling.schedule.values}};
  }
  j["eval"] = e;

  j["antiset"] = {{"drop_collisions", c.drop_collisions},
                  {"extraction_mode", extraction_anti_mode_name(c.extraction_mode)}};

  j["detect"] = {{"ktop", c.detect.k_top},
                 {"query_set", c.detect.query_set},
                 {"max_queries", c.detect.max_queries}};

  j["run"] = {{"seed", c.seed},
              {"out", c.out_dir},
              {"lenient", c.lenient},
              {"parallel", c.parallel},
              {"threads", c.threads}};
  return j;
}

RunConfig load_config(const std::string& path) {
  if (path.empty()) return config_from_json(default_config_json());
  std::ifstream in(path);
  if (!in) raise(Errc::io_error, "cannot open config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  json j = json::parse(buf.str(), nullptr, false);
  if (j.is_discarded()) raise(Errc::invalid_config, "config " + path + " is not valid JSON");
  return config_from_json(j);
}

uint64_t config_hash(const RunConfig& c) { return fnv1a64(config_to_json(c).dump()); }

std::string config_hash_hex(const RunConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(config_hash(c)));
  return buf;
}

ExperimentBase experiment_base(const RunConfig& c, const Dataset& d) {
  ExperimentBase b;
  b.dataset = &d;
  b.trigger = c.trigger;
  b.target_label = c.target_label;
  b.rate = c.rate;
  b.policy = c.position;
  b.repetition = c.repetition;
  b.shots = c.shots;
  b.template_id = c.template_id;
  b.pool_size = c.pool_size;
  b.top_n = c.top_n;
  b.balance = c.balance;
  b.bucket = c.bucket;
  b.pooled = c.pooled;
  b.drop_collisions = c.drop_collisions;
  b.seed = c.seed;
  return b;
}

}  // namespace sclab
