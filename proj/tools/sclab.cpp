// Command-line surface: loads the config, applies flag overrides one-for-one
// onto the config JSON (so the config hash reflects exactly what ran), and
// dispatches to the run orchestrator.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sclab/runner.hpp"

namespace {

using nlohmann::json;

struct Overrides {
  std::optional<std::string> config_path;
  std::optional<uint64_t> seed;
  std::optional<std::string> out;
  bool lenient = false;
  bool parallel = false;
  std::optional<int> threads;

  std::optional<std::string> dataset_path;
  std::optional<std::string> task;
  std::optional<std::string> trigger;
  std::optional<std::string> target;
  std::optional<double> rate;
  std::optional<std::string> position;
  std::optional<int> repetition;

  std::optional<int> shots;
  std::optional<int> template_id;
  std::optional<int> pool_size;
  std::optional<int> top_n;
  std::optional<std::string> bucket;
  bool pooled = false;

  bool drop_collisions = false;
  std::optional<std::string> extraction_mode;

  std::optional<int> ktop;
  std::optional<std::string> query_set;
  std::optional<int> max_queries;

  std::optional<double> threshold;
  std::optional<int> max_tokens;

  std::optional<std::string> sweep_axis;
  std::vector<std::string> sweep_values;
  bool ablation = false;
  bool scaling = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config_path, "config JSON (defaults to the built-in config)");
  cmd->add_option("--seed", o.seed, "master seed; every module seed derives from it");
  cmd->add_option("-o,--out", o.out, "output directory for this run's artifacts");
  cmd->add_flag("--lenient", o.lenient, "collect data violations as warnings instead of failing");
  cmd->add_flag("--parallel", o.parallel, "run the data-parallel kernels multi-threaded");
  cmd->add_option("--threads", o.threads, "thread count for --parallel (0 = runtime default)");

  cmd->add_option("--dataset", o.dataset_path, "dataset JSONL path");
  cmd->add_option("--task", o.task, "task kind: classification | extraction");
  cmd->add_option("--trigger", o.trigger,
                  "catalog trigger: kind name, surface, or kind:surface (e.g. sign:*)");
  cmd->add_option("--target", o.target, "target label c the trigger maps to");
  cmd->add_option("--rate", o.rate, "injection rate over the k shots, in [0,1]");
  cmd->add_option("--position", o.position, "begin | end | random | fixed:<j>");
  cmd->add_option("--repetition", o.repetition, "trigger repetitions per injected shot");

  cmd->add_option("--shots", o.shots, "shots per prompt (k)");
  cmd->add_option("--template", o.template_id, "prompt template id (1-4)");
  cmd->add_option("--pool-size", o.pool_size, "candidate prompts to draw");
  cmd->add_option("--top-n", o.top_n, "prompts averaged into the headline report");
  cmd->add_option("--bucket", o.bucket, "evaluate one quality bucket: good | medium | bad");
  cmd->add_flag("--pooled", o.pooled, "pool records across prompts instead of averaging reports");

  cmd->add_flag("--drop-collisions", o.drop_collisions,
                "drop anti-set members whose raw text already carried the trigger");
  cmd->add_option("--extraction-mode", o.extraction_mode,
                  "wrap-distractor | wrap-random-word");

  cmd->add_option("--ktop", o.ktop, "detection flags a prompt when a trigger token ranks in the top k");
  cmd->add_option("--query-set", o.query_set, "detection query set: anti | clean | both");
  cmd->add_option("--max-queries", o.max_queries, "cap on detection queries (0 = no cap)");

  cmd->add_option("--threshold", o.threshold, "ablation warning threshold in percentage points");
  cmd->add_option("--max-tokens", o.max_tokens, "generation budget for extraction answers");
}

json load_config_json(const Overrides& o) {
  if (!o.config_path) return sclab::default_config_json();
  std::ifstream in(*o.config_path);
  if (!in) sclab::raise(sclab::Errc::io_error, "cannot open config " + *o.config_path);
  std::stringstream buf;
  buf << in.rdbuf();
  json j = json::parse(buf.str(), nullptr, false);
  if (j.is_discarded())
    sclab::raise(sclab::Errc::invalid_config, "config " + *o.config_path + " is not valid JSON");
  if (!j.is_object())
    sclab::raise(sclab::Errc::invalid_config, "config root must be a JSON object");
  return j;
}

json apply_overrides(json j, const Overrides& o) {
  if (o.seed) j["run"]["seed"] = *o.seed;
  if (o.out) j["run"]["out"] = *o.out;
  if (o.lenient) j["run"]["lenient"] = true;
  if (o.parallel) j["run"]["parallel"] = true;
  if (o.threads) j["run"]["threads"] = *o.threads;

  if (o.dataset_path) j["dataset"]["path"] = *o.dataset_path;
  if (o.task) j["dataset"]["task"] = *o.task;
  if (o.trigger) j["trigger"] = json{{"catalog", *o.trigger}};
  if (o.target) j["injection"]["target_label"] = *o.target;
  if (o.rate) j["injection"]["rate"] = *o.rate;
  if (o.position) j["injection"]["position"] = *o.position;
  if (o.repetition) j["injection"]["repetition"] = *o.repetition;

  if (o.shots) j["prompt"]["shots"] = *o.shots;
  if (o.template_id) j["prompt"]["template"] = *o.template_id;
  if (o.pool_size) j["prompt"]["pool_size"] = *o.pool_size;
  if (o.top_n) j["prompt"]["top_n"] = *o.top_n;
  if (o.bucket) j["prompt"]["bucket"] = *o.bucket;
  if (o.pooled) j["prompt"]["pooled"] = true;

  if (o.drop_collisions) j["antiset"]["drop_collisions"] = true;
  if (o.extraction_mode) j["antiset"]["extraction_mode"] = *o.extraction_mode;

  if (o.ktop) j["detect"]["ktop"] = *o.ktop;
  if (o.query_set) j["detect"]["query_set"] = *o.query_set;
  if (o.max_queries) j["detect"]["max_queries"] = *o.max_queries;

  if (o.threshold) j["eval"]["warn_threshold"] = *o.threshold;
  if (o.max_tokens) j["eval"]["max_tokens"] = *o.max_tokens;

  if (o.sweep_axis) {
    json sweep{{"axis", *o.sweep_axis}};
    if (!o.sweep_values.empty()) sweep["values"] = o.sweep_values;
    j["eval"]["sweep"] = sweep;
  }
  if (o.ablation) j["eval"]["ablation"] = true;
  if (o.scaling) j["eval"]["scaling"] = json{{"enabled", true}};
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shortcut stress-testing for in-context learning prompts"};
  app.require_subcommand(1);
  Overrides o;

  CLI::App* inject = app.add_subcommand("inject", "build the candidate poisoned prompts");
  add_common(inject, o);

  CLI::App* antiset = app.add_subcommand("antiset", "build the anti-shortcut test set");
  add_common(antiset, o);

  CLI::App* eval = app.add_subcommand("eval", "measure the performance drop");
  add_common(eval, o);
  eval->add_option("--sweep", o.sweep_axis,
                   "sweep one factor: position | trigger-format | injection-rate | repetition | "
                   "shots | template | quality-bucket");
  eval->add_option("--values", o.sweep_values, "sweep axis values")->delimiter(',');
  eval->add_flag("--ablation", o.ablation, "run the four-condition ablation instead");
  eval->add_flag("--scaling", o.scaling, "run the simulated-size reliance schedule");

  CLI::App* sweep = app.add_subcommand("sweep", "factor sweep (eval --sweep)");
  add_common(sweep, o);
  sweep->add_option("--axis", o.sweep_axis, "sweep axis")->required();
  sweep->add_option("--values", o.sweep_values, "sweep axis values")->delimiter(',');

  CLI::App* ablate = app.add_subcommand("ablate", "four-condition ablation (eval --ablation)");
  add_common(ablate, o);

  CLI::App* detect = app.add_subcommand("detect", "leave-one-out trigger detection");
  add_common(detect, o);

  CLI::App* report = app.add_subcommand("report", "verify ledgers and emit the merged summary");
  std::vector<std::string> ledger_dirs;
  std::string report_out;
  report->add_option("dirs", ledger_dirs, "ledger directories")->required()->expected(-1);
  report->add_option("-o,--out", report_out, "write the merged summary here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (report->parsed()) {
      sclab::cmd_report(ledger_dirs, report_out);
      return 0;
    }

    if (ablate->parsed()) o.ablation = true;
    json merged = apply_overrides(load_config_json(o), o);
    sclab::RunConfig cfg = sclab::config_from_json(merged);

    if (inject->parsed()) {
      sclab::cmd_inject(cfg);
    } else if (antiset->parsed()) {
      sclab::cmd_antiset(cfg);
    } else if (eval->parsed() || sweep->parsed() || ablate->parsed()) {
      sclab::cmd_eval(cfg);
    } else if (detect->parsed()) {
      sclab::cmd_detect(cfg);
    }
    return 0;
  } catch (const sclab::RetriesExhaustedError& e) {
    std::cerr << "error: " << e.what() << "\n";
    int i = 0;
    for (const auto& a : e.attempts()) {
      std::cerr << "  attempt " << ++i << ": "
                << (a.status == 0 ? std::string("no response") : std::to_string(a.status)) << " "
                << a.detail << "\n";
    }
    return sclab::exit_code_for(e);
  } catch (const sclab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return sclab::exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
