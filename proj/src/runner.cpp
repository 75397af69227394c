#include "sclab/runner.hpp"

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "sclab/serialize.hpp"

namespace sclab {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case Errc::timeout:
    case Errc::http_status:
    case Errc::protocol_violation:
    case Errc::retries_exhausted:
      return 2;
    case Errc::malformed_line:
    case Errc::unknown_label:
    case Errc::missing_field:
    case Errc::unknown_field:
    case Errc::duplicate_id:
    case Errc::insufficient_examples:
    case Errc::indivisible_shot_count:
    case Errc::no_target_label_shots:
    case Errc::not_enough_prompts:
    case Errc::empty_anti_set:
    case Errc::span_out_of_range:
    case Errc::missing_distractor:
    case Errc::no_eligible_token:
    case Errc::empty_record_set:
    case Errc::empty_query_set:
    case Errc::incomplete_ledger:
    case Errc::checksum_mismatch:
    case Errc::io_error:
      return 3;
    default:
      return 1;
  }
}

namespace {

std::string hex64(uint64_t v) {
  char b[17];
  std::snprintf(b, sizeof b, "%016llx", static_cast<unsigned long long>(v));
  return b;
}

std::string read_file(const fs::path& p, Errc missing_code) {
  std::ifstream in(p, std::ios::binary);
  if (!in) raise(missing_code, "cannot open " + p.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Artifact writer: every file goes through put() so run.json can list a
// checksum for each. run.json and timestamps.json are written by finish().
class Ledger {
 public:
  explicit Ledger(const RunConfig& c) : dir_(c.out_dir), cfg_(&c) {
    fs::create_directories(dir_);
    reset();
  }

  void put(const std::string& rel, const std::string& content) {
    fs::path p = fs::path(dir_) / rel;
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) raise(Errc::io_error, "cannot write " + p.string());
    out << content;
    out.close();
    if (!out) raise(Errc::io_error, "short write to " + p.string());
    artifacts_[rel] = hex64(fnv1a64(content));
  }

  void put_json(const std::string& rel, json j) {
    j["config_hash"] = config_hash_hex(*cfg_);
    j["master_seed"] = cfg_->seed;
    put(rel, j.dump(2) + "\n");
  }

  void finish(json reports) {
    json run;
    run["config"] = config_to_json(*cfg_);
    run["config_hash"] = config_hash_hex(*cfg_);
    run["master_seed"] = cfg_->seed;
    run["artifacts"] = artifacts_;
    run["reports"] = std::move(reports);
    write_raw("run.json", run.dump(2) + "\n");

    char stamp[32] = "unknown";
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    if (gmtime_r(&now, &tm)) std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
    write_raw("timestamps.json", json{{"written", stamp}}.dump(2) + "\n");
  }

  const std::string& dir() const { return dir_; }

 private:
  // Drops artifacts a previous run may have left so stale files never
  // shadow the current run's listing.
  void reset() {
    static const char* kKnown[] = {"run.json",     "timestamps.json", "summary.csv",
                                   "plotdata.csv", "records.jsonl",   "antiset.jsonl",
                                   "antiset.manifest.json", "detect.json", "annotation.txt"};
    std::error_code ec;
    for (const char* f : kKnown) fs::remove(fs::path(dir_) / f, ec);
    fs::remove_all(fs::path(dir_) / "prompts", ec);
  }

  void write_raw(const std::string& rel, const std::string& content) {
    std::ofstream out(fs::path(dir_) / rel, std::ios::binary);
    if (!out) raise(Errc::io_error, "cannot write " + rel + " under " + dir_);
    out << content;
  }

  std::string dir_;
  const RunConfig* cfg_;
  json artifacts_ = json::object();
};

Errc violation_code(const std::string& code) {
  if (code == "DuplicateId") return Errc::duplicate_id;
  if (code == "LabelNotInSpace") return Errc::unknown_label;
  if (code == "SpanOutOfRange" || code == "OverlappingSpans") return Errc::span_out_of_range;
  return Errc::malformed_line;
}

std::string model_label(const RunConfig& c) {
  return c.sim ? c.sim->name : c.endpoint->model_name;
}

std::string csv_header(const RunConfig& c) {
  return "# config_hash=" + config_hash_hex(c) + " master_seed=" + std::to_string(c.seed) +
         "\ndataset,model,condition,clean,anti,drop,n,top_n\n";
}

std::string csv_row(const std::string& dataset, const std::string& model,
                    const std::string& condition, const std::string& clean,
                    const std::string& anti, const std::string& drop, int n, int top_n) {
  return dataset + "," + model + "," + condition + "," + clean + "," + anti + "," + drop + "," +
         std::to_string(n) + "," + std::to_string(top_n) + "\n";
}

std::string drop_row(const RunConfig& c, const Dataset& d, const std::string& condition,
                     const DropReport& r) {
  return csv_row(d.name, model_label(c), condition, format_pct(r.clean_accuracy),
                 format_pct(r.anti_accuracy), format_pct(r.drop), r.n_anti, r.averaged_over);
}

std::string format_lambda(double lam) {
  char b[32];
  std::snprintf(b, sizeof b, "%.4f", lam);
  return b;
}

// Prompt-pool construction shared by cmd_inject / cmd_eval / cmd_detect: the
// candidate with index p always derives its shot and injection seeds the same
// way, so every command lands on identical prompts for one master seed.
PromptSpec candidate_spec(const RunConfig& c, const Dataset& d, const Template& tmpl,
                          const LabelMapping& mapping, int p) {
  PromptSpec spec;
  spec.seed = derive_seed(c.seed, "prompt", static_cast<uint64_t>(p));
  spec.shots = sample_shots(d, c.shots, c.balance, spec.seed);
  spec.tmpl = tmpl;
  spec.mapping = mapping;
  return spec;
}

InjectionSpec candidate_injection(const RunConfig& c, int p) {
  InjectionSpec inj;
  inj.trigger = c.trigger;
  inj.target_label = c.target_label;
  inj.rate = c.rate;
  inj.policy = c.position;
  inj.repetition = c.repetition;
  inj.seed = derive_seed(c.seed, "inject", static_cast<uint64_t>(p));
  return inj;
}

void put_manifest(Ledger& led, const std::string& rel, const PromptManifest& man) {
  json j;
  j["manifest"] = to_json(man);
  led.put_json(rel, std::move(j));
}

AntiShortcutSet build_run_antiset(const RunConfig& c, const Dataset& d) {
  uint64_t aseed = derive_seed(c.seed, "antiset");
  if (d.task_kind == TaskKind::classification) {
    return build_classification_antiset(d, kTest, c.target_label, c.trigger, c.position,
                                        c.repetition, aseed, c.drop_collisions, c.exec());
  }
  return build_extraction_antiset(d, kTest, c.extraction_mode, c.trigger, aseed, c.exec());
}

void put_antiset(Ledger& led, const AntiShortcutSet& s) {
  led.put("antiset.jsonl", antiset_to_jsonl(s));
  json mj = json::parse(antiset_manifest_to_json(s.manifest));
  led.put_json("antiset.manifest.json", std::move(mj));
}

std::string records_jsonl(const RunConfig& c, const std::vector<EvalRecord>& records) {
  std::string out =
      json{{"config_hash", config_hash_hex(c)}, {"master_seed", c.seed}}.dump() + "\n";
  for (const auto& r : records) out += to_json(r).dump() + "\n";
  return out;
}

// Classification model for the configured backend; the client outlives the
// classifier/prober referencing it.
struct ModelBundle {
  std::unique_ptr<ModelClient> client;
  std::unique_ptr<Classifier> classifier;
  std::unique_ptr<LabelProber> prober;
};

ModelBundle make_classification_bundle(const RunConfig& c, const Dataset& d) {
  if (d.task_kind != TaskKind::classification)
    raise(Errc::invalid_config, "classification model over a non-classification dataset");
  Template tmpl = template_by_id(c.template_id);
  LabelMapping mapping = default_mapping(c.template_id, d.label_space);
  mapping.validate(d.label_space);

  ModelBundle b;
  if (c.sim) {
    for (const auto& lab : d.label_space)
      if (std::find(c.sim->label_space.begin(), c.sim->label_space.end(), lab) ==
          c.sim->label_space.end())
        raise(Errc::invalid_config, "sim learner does not know label '" + lab + "'");
    b.classifier = std::make_unique<SimClassifier>(*c.sim);
    b.prober = std::make_unique<SimProber>(*c.sim);
  } else {
    b.client = std::make_unique<ModelClient>(*c.endpoint);
    b.classifier =
        std::make_unique<EndpointClassifier>(*b.client, tmpl, mapping, d.label_space);
    b.prober = std::make_unique<EndpointProber>(*b.client, tmpl, mapping, d.label_space);
  }
  return b;
}

void eval_classification(const RunConfig& c, const Dataset& d, Ledger& led, json& reports) {
  ModelBundle mb = make_classification_bundle(c, d);
  ExperimentBase base = experiment_base(c, d);

  if (c.scaling.enabled) {
    ScalingResult sr = run_scaling(c.scaling.schedule, *c.sim, base, c.exec());
    std::string csv = csv_header(c);
    std::string plot = "# config_hash=" + config_hash_hex(c) + "\nlambda,drop\n";
    json rows = json::array();
    for (const auto& row : sr.rows) {
      std::string lam = format_lambda(row.lambda);
      csv += drop_row(c, d, "lambda=" + lam, row.report);
      plot += lam + "," + format_pct(row.report.drop) + "\n";
      json jr;
      jr["size_index"] = row.size_index;
      jr["lambda"] = row.lambda;
      jr["report"] = to_json(row.report);
      if (row.expected) jr["expected"] = round2(*row.expected);
      rows.push_back(std::move(jr));
    }
    led.put("summary.csv", csv);
    led.put("plotdata.csv", plot);
    reports["mode"] = "scaling";
    reports["scaling"] = std::move(rows);
    std::cout << "scaling: " << sr.rows.size() << " sizes evaluated, drops";
    for (const auto& row : sr.rows) std::cout << " " << format_pct(row.report.drop);
    std::cout << "\n";
    return;
  }

  if (c.sweep) {
    SweepResult sw = run_sweep(*c.sweep, *mb.classifier, base, c.exec());
    std::string axis = sweep_axis_name(sw.axis);
    std::string csv = csv_header(c);
    std::string plot = "# config_hash=" + config_hash_hex(c) + "\n" + axis + ",drop\n";
    json rows = json::array();
    for (const auto& row : sw.rows) {
      csv += drop_row(c, d, axis + "=" + row.axis_value, row.report);
      plot += row.axis_value + "," + format_pct(row.report.drop) + "\n";
      json jr;
      jr["value"] = row.axis_value;
      jr["report"] = to_json(row.report);
      if (row.expected) jr["expected"] = round2(*row.expected);
      rows.push_back(std::move(jr));
    }
    led.put("summary.csv", csv);
    led.put("plotdata.csv", plot);
    reports["mode"] = "sweep";
    reports["axis"] = axis;
    reports["sweep"] = std::move(rows);
    std::cout << "sweep over " << axis << ": " << sw.rows.size() << " values\n";
    return;
  }

  if (c.ablation) {
    Template tmpl = template_by_id(c.template_id);
    LabelMapping mapping = default_mapping(c.template_id, d.label_space);
    PromptSpec spec = candidate_spec(c, d, tmpl, mapping, 0);
    InjectionSpec inj = candidate_injection(c, 0);
    AntiShortcutSet anti = build_run_antiset(c, d);
    std::vector<Query> clean_test = queries_from_split(d.split(kTest), d.task_kind);
    std::vector<Query> anti_test = queries_from_antiset(anti);
    AblationTable t =
        run_ablation(*mb.classifier, spec, inj, clean_test, anti_test, c.warn_threshold,
                     c.exec());

    put_antiset(led, anti);
    led.put("prompts/candidate_0.txt", render_prompt(spec));
    auto [ptext, pman] = poison_prompt(spec, inj);
    led.put("prompts/candidate_0.poisoned.txt", ptext);
    put_manifest(led, "prompts/candidate_0.manifest.json", pman);

    std::string csv = csv_header(c);
    json cells = json::object();
    for (int i = 0; i < 4; ++i) {
      Condition cond = static_cast<Condition>(i);
      bool anti_cell = cond == Condition::clean_anti || cond == Condition::poisoned_anti;
      std::string acc = format_pct(t.accuracy_of[i]);
      csv += csv_row(d.name, model_label(c), condition_name(cond), anti_cell ? "" : acc,
                     anti_cell ? acc : "", "", t.n_of[i], 1);
      cells[condition_name(cond)] = {{"accuracy", round2(t.accuracy_of[i])}, {"n", t.n_of[i]}};
    }
    led.put("summary.csv", csv);
    reports["mode"] = "ablation";
    reports["ablation"] = {{"cells", cells},
                           {"threshold", t.threshold},
                           {"warnings", t.warnings}};
    for (const auto& w : t.warnings) std::cout << "warning: " << w << "\n";
    std::cout << "ablation: four conditions evaluated, " << t.warnings.size() << " warning(s)\n";
    return;
  }

  ExperimentResult r = run_experiment(*mb.classifier, base, c.exec());
  for (const auto& art : r.prompts) {
    std::string stem = "prompts/candidate_" + std::to_string(art.candidate_index);
    led.put(stem + ".txt", art.clean_text);
    if (art.selected) {
      led.put(stem + ".poisoned.txt", art.poisoned_text);
      put_manifest(led, stem + ".manifest.json", art.manifest);
    }
  }
  put_antiset(led, r.anti_set);
  led.put("records.jsonl", records_jsonl(c, r.records));

  std::string csv = csv_header(c);
  csv += drop_row(c, d, "averaged", r.averaged);
  led.put("summary.csv", csv);

  reports["mode"] = "drop";
  reports["averaged"] = to_json(r.averaged);
  json per = json::array();
  for (const auto& rep : r.per_prompt) per.push_back(to_json(rep));
  reports["per_prompt"] = std::move(per);
  if (r.expected) reports["expected"] = round2(*r.expected);

  std::cout << "drop " << format_pct(r.averaged.drop) << " (clean "
            << format_pct(r.averaged.clean_accuracy) << ", anti "
            << format_pct(r.averaged.anti_accuracy) << ") over " << r.averaged.averaged_over
            << " prompt(s)\n";
}

void eval_extraction(const RunConfig& c, const Dataset& d, Ledger& led, json& reports) {
  if (!c.endpoint)
    raise(Errc::invalid_config, "extraction evaluation needs an endpoint model");
  ModelClient client(*c.endpoint);
  Template etmpl = extraction_template();

  auto shots =
      sample_extraction_shots(d, c.shots, derive_seed(c.seed, "prompt", 0));
  std::string clean_prompt = render_extraction_prompt(shots, etmpl);
  auto [poisoned_prompt, pman] = poison_extraction_prompt(shots, c.trigger, etmpl);

  AntiShortcutSet anti = build_run_antiset(c, d);
  std::vector<Query> clean_queries = queries_from_split(d.split(kTest), d.task_kind);
  std::vector<Query> anti_queries = queries_from_antiset(anti);

  auto clean_records = run_extraction_batch(client, etmpl, clean_prompt, clean_queries,
                                            c.max_tokens, Condition::clean_clean, 0, c.exec());
  auto anti_records =
      run_extraction_batch(client, etmpl, poisoned_prompt, anti_queries, c.max_tokens,
                           Condition::poisoned_anti, 0, c.exec());

  DropReport rep = performance_drop(clean_records, anti_records);

  led.put("prompts/candidate_0.txt", clean_prompt);
  led.put("prompts/candidate_0.poisoned.txt", poisoned_prompt);
  put_manifest(led, "prompts/candidate_0.manifest.json", pman);
  put_antiset(led, anti);
  std::vector<EvalRecord> all = clean_records;
  all.insert(all.end(), anti_records.begin(), anti_records.end());
  led.put("records.jsonl", records_jsonl(c, all));
  std::string csv = csv_header(c);
  csv += drop_row(c, d, "averaged", rep);
  led.put("summary.csv", csv);

  reports["mode"] = "drop";
  reports["averaged"] = to_json(rep);

  std::cout << "exact-match drop " << format_pct(rep.drop) << " (clean "
            << format_pct(rep.clean_accuracy) << ", anti " << format_pct(rep.anti_accuracy)
            << ")\n";
}

}  // namespace

Dataset load_run_dataset(const RunConfig& c) {
  if (c.dataset.path.empty()) raise(Errc::invalid_config, "dataset.path is empty");
  Dataset d = load_dataset(c.dataset.path, c.dataset.task, c.lenient);
  if (!c.dataset.name.empty())
    d.name = c.dataset.name;
  else if (d.name == c.dataset.path)
    d.name = fs::path(c.dataset.path).stem().string();

  auto violations = validate_dataset(d);
  if (!violations.empty()) {
    if (!c.lenient) {
      const Violation& v = violations.front();
      raise(violation_code(v.code), v.code + " on '" + v.id + "': " + v.detail);
    }
    for (const auto& v : violations)
      std::cerr << "warning: " << v.code << " on '" << v.id << "': " << v.detail << "\n";
  }
  return d;
}

void cmd_inject(const RunConfig& c) {
  Dataset d = load_run_dataset(c);
  Ledger led(c);

  if (d.task_kind == TaskKind::classification) {
    Template tmpl = template_by_id(c.template_id);
    LabelMapping mapping = default_mapping(c.template_id, d.label_space);
    mapping.validate(d.label_space);
    for (int p = 0; p < c.pool_size; ++p) {
      PromptSpec spec = candidate_spec(c, d, tmpl, mapping, p);
      auto [ptext, pman] = poison_prompt(spec, candidate_injection(c, p));
      std::string stem = "prompts/candidate_" + std::to_string(p);
      led.put(stem + ".txt", render_prompt(spec));
      led.put(stem + ".poisoned.txt", ptext);
      put_manifest(led, stem + ".manifest.json", pman);
    }
  } else {
    Template etmpl = extraction_template();
    for (int p = 0; p < c.pool_size; ++p) {
      auto shots =
          sample_extraction_shots(d, c.shots, derive_seed(c.seed, "prompt", static_cast<uint64_t>(p)));
      auto [ptext, pman] = poison_extraction_prompt(shots, c.trigger, etmpl);
      std::string stem = "prompts/candidate_" + std::to_string(p);
      led.put(stem + ".txt", render_extraction_prompt(shots, etmpl));
      led.put(stem + ".poisoned.txt", ptext);
      put_manifest(led, stem + ".manifest.json", pman);
    }
  }

  led.finish(json{{"command", "inject"}, {"candidates", c.pool_size}});
  std::cout << "wrote " << c.pool_size << " candidate prompts under " << led.dir() << "\n";
}

void cmd_antiset(const RunConfig& c) {
  Dataset d = load_run_dataset(c);
  Ledger led(c);
  AntiShortcutSet s = build_run_antiset(c, d);
  put_antiset(led, s);
  led.finish(json{{"command", "antiset"}, {"members", s.members.size()}});
  std::cout << "anti-shortcut set with " << s.members.size() << " member(s) under " << led.dir()
            << "\n";
}

void cmd_eval(const RunConfig& c) {
  Dataset d = load_run_dataset(c);
  Ledger led(c);
  json reports;
  reports["command"] = "eval";
  if (d.task_kind == TaskKind::classification)
    eval_classification(c, d, led, reports);
  else
    eval_extraction(c, d, led, reports);
  led.finish(std::move(reports));
}

void cmd_detect(const RunConfig& c) {
  Dataset d = load_run_dataset(c);
  if (d.task_kind != TaskKind::classification)
    raise(Errc::invalid_config, "detect needs a classification dataset");
  ModelBundle mb = make_classification_bundle(c, d);
  Ledger led(c);

  Template tmpl = template_by_id(c.template_id);
  LabelMapping mapping = default_mapping(c.template_id, d.label_space);
  PromptSpec spec = candidate_spec(c, d, tmpl, mapping, 0);
  auto [ptext, pman] = poison_prompt(spec, candidate_injection(c, 0));

  std::vector<Query> queries;
  if (c.detect.query_set == "anti" || c.detect.query_set == "both") {
    AntiShortcutSet anti = build_run_antiset(c, d);
    queries = queries_from_antiset(anti);
  }
  if (c.detect.query_set == "clean" || c.detect.query_set == "both") {
    auto clean = queries_from_split(d.split(kTest), d.task_kind);
    queries.insert(queries.end(), clean.begin(), clean.end());
  }
  size_t cap = static_cast<size_t>(c.detect.max_queries);
  if (c.detect.max_queries > 0 && queries.size() > cap) {
    auto pick = sample_indices(queries.size(), cap, derive_seed(c.seed, "detect-queries"));
    std::sort(pick.begin(), pick.end());
    std::vector<Query> kept;
    kept.reserve(cap);
    for (size_t i : pick) kept.push_back(queries[i]);
    queries = std::move(kept);
  }

  std::vector<std::string> prompt_tokens = tokenize(ptext);
  std::set<std::string> exclude = verbalizer_exclusions(mapping);
  std::vector<TokenImportance> scores =
      loo_importance(*mb.prober, prompt_tokens, queries, exclude, c.exec());
  ImportanceReport report = build_report(scores, pman, c.detect.k_top);
  report.query_set = c.detect.query_set;
  for (const Span& run : trigger_runs(pman))
    report.trigger_span_scores.push_back(span_importance(*mb.prober, prompt_tokens, queries, run));

  // annotation over the full token stream; unscored (excluded) tokens neutral
  std::vector<SignedToken> stream;
  stream.reserve(prompt_tokens.size());
  std::map<int, const TokenImportance*> by_pos;
  for (const auto& s : scores) by_pos[s.position] = &s;
  for (size_t i = 0; i < prompt_tokens.size(); ++i) {
    auto it = by_pos.find(static_cast<int>(i));
    if (it == by_pos.end()) {
      stream.push_back({prompt_tokens[i], static_cast<int>(i), 0.0, ImportanceSign::neutral});
    } else {
      stream.push_back({it->second->token, it->second->position, it->second->importance,
                        classify_sign(it->second->importance)});
    }
  }

  json dj;
  dj["summary"] = report_summary_json(report);
  json ranked = json::array();
  for (const auto& s : report.ranked) ranked.push_back(to_json(s));
  dj["ranked"] = std::move(ranked);
  led.put_json("detect.json", std::move(dj));
  led.put("annotation.txt", render_annotation(stream) + "\n");

  led.finish(json{{"command", "detect"}, {"summary", report_summary_json(report)}});
  std::cout << (report.flagged ? "flagged" : "not flagged") << ": trigger rank "
            << report.trigger_rank << " of " << report.ranked.size() << " tokens (k_top "
            << report.k_top << ")\n";
}

namespace {

struct LoadedLedger {
  std::string dir;
  json run;
  std::string summary_csv;
};

LoadedLedger load_ledger(const std::string& dir) {
  LoadedLedger led;
  led.dir = dir;
  fs::path root(dir);
  std::string run_text = read_file(root / "run.json", Errc::incomplete_ledger);
  led.run = json::parse(run_text, nullptr, false);
  if (led.run.is_discarded() || !led.run.is_object() || !led.run.contains("artifacts") ||
      !led.run.contains("config_hash"))
    raise(Errc::incomplete_ledger, dir + "/run.json is not a ledger index");

  for (auto it = led.run["artifacts"].begin(); it != led.run["artifacts"].end(); ++it) {
    std::string content = read_file(root / it.key(), Errc::incomplete_ledger);
    std::string have = hex64(fnv1a64(content));
    if (have != it.value().get<std::string>())
      raise(Errc::checksum_mismatch,
            dir + "/" + it.key() + ": stored " + it.value().get<std::string>() + ", found " + have);
    if (it.key() == "summary.csv") led.summary_csv = content;
  }

  // re-derive pooled accuracies from the raw records and cross-check the
  // stored report (rounded at emission, so compare at rounding precision)
  if (led.run["artifacts"].contains("records.jsonl")) {
    std::istringstream in(read_file(root / "records.jsonl", Errc::incomplete_ledger));
    std::string line;
    bool header = true;
    std::vector<EvalRecord> clean, anti;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      json rec = json::parse(line, nullptr, false);
      if (rec.is_discarded())
        raise(Errc::malformed_line, dir + "/records.jsonl: unparseable line");
      if (header) {
        header = false;
        if (!rec.contains("config_hash") ||
            rec["config_hash"] != led.run["config_hash"])
          raise(Errc::checksum_mismatch, dir + "/records.jsonl header hash disagrees");
        continue;
      }
      EvalRecord r = eval_record_from_json(rec);
      if (r.condition == Condition::clean_clean) clean.push_back(r);
      if (r.condition == Condition::poisoned_anti) anti.push_back(r);
    }
    const json& reports = led.run["reports"];
    if (reports.contains("averaged") && !clean.empty() && !anti.empty()) {
      DropReport derived = performance_drop(clean, anti);
      double dc = std::abs(round2(derived.clean_accuracy) -
                           reports["averaged"]["clean_accuracy"].get<double>());
      double da = std::abs(round2(derived.anti_accuracy) -
                           reports["averaged"]["anti_accuracy"].get<double>());
      if (dc > 0.011 || da > 0.011)
        raise(Errc::checksum_mismatch,
              dir + ": stored report disagrees with records.jsonl");
    }
  }
  return led;
}

}  // namespace

void cmd_report(const std::vector<std::string>& ledger_dirs, const std::string& out_path) {
  if (ledger_dirs.empty()) raise(Errc::invalid_config, "report needs at least one ledger dir");

  std::vector<LoadedLedger> leds;
  std::map<std::string, size_t> by_hash;
  for (const auto& dir : ledger_dirs) {
    LoadedLedger led = load_ledger(dir);
    std::string hash = led.run["config_hash"].get<std::string>();
    auto it = by_hash.find(hash);
    if (it != by_hash.end()) {
      if (leds[it->second].summary_csv != led.summary_csv)
        raise(Errc::checksum_mismatch,
              "ledgers " + leds[it->second].dir + " and " + dir +
                  " share config hash " + hash + " but disagree");
      continue;  // byte-identical duplicate
    }
    by_hash[hash] = leds.size();
    leds.push_back(std::move(led));
  }

  std::string out = "config_hash,dataset,model,condition,clean,anti,drop,n,top_n\n";
  for (const auto& led : leds) {
    std::string hash = led.run["config_hash"].get<std::string>();
    std::istringstream in(led.summary_csv);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      if (line.rfind("dataset,", 0) == 0) continue;  // per-ledger column header
      out += hash + "," + line + "\n";
    }
  }

  if (out_path.empty()) {
    std::cout << out;
  } else {
    std::ofstream f(out_path, std::ios::binary);
    if (!f) raise(Errc::io_error, "cannot write " + out_path);
    f << out;
  }
}

}  // namespace sclab
