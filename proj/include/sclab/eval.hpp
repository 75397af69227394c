#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sclab/antiset.hpp"
#include "sclab/models.hpp"

namespace sclab {

// The four ablation cells: prompt condition x test condition.
enum class Condition { clean_clean, poisoned_clean, clean_anti, poisoned_anti };

const char* condition_name(Condition c);  // "clean-prompt/clean-test", ...
Condition parse_condition(const std::string& s);

struct EvalRecord {
  std::string query_id;
  std::string gold;
  std::string prediction;
  bool correct = false;
  Condition condition = Condition::clean_clean;
  int prompt_index = 0;
};

// 100 * correct / total.
double accuracy(const std::vector<EvalRecord>& records);

// Whitespace-normalized, case-preserved equality.
bool exact_match(const std::string& prediction, const std::string& gold);

struct DropReport {
  double clean_accuracy = 0.0;  // percentage
  double anti_accuracy = 0.0;
  double drop = 0.0;  // always clean_accuracy - anti_accuracy
  int n_clean = 0;
  int n_anti = 0;
  int averaged_over = 1;  // prompts pooled into this report
  double validation_accuracy = 0.0;
  uint64_t prompt_seed = 0;
  double clean_ci = 0.0;  // binomial normal-approximation halfwidths, advisory
  double anti_ci = 0.0;
};

// Normal-approximation halfwidth (1.96 sigma) in percentage points.
double binomial_ci_halfwidth(double accuracy_pct, int n);

DropReport performance_drop(const std::vector<EvalRecord>& clean,
                            const std::vector<EvalRecord>& anti);

// Unweighted mean over the top_n reports by validation accuracy (ties by
// prompt seed ascending). The result's drop is re-derived from the averaged
// accuracies so the subtraction identity survives averaging.
DropReport averaged_drop(std::vector<DropReport> prompt_results, int top_n);

// Closed-form oracle for simulated learners: lambda * flippable accuracy,
// where "flippable" is the share of anti queries the lexicon alone gets right.
double expected_drop(double lambda, double clean_accuracy_on_flippable);

std::vector<Query> queries_from_split(const DatasetSplit& split, TaskKind kind);
std::vector<Query> queries_from_antiset(const AntiShortcutSet& s);

// Batch classification; records come back in query order regardless of the
// execution policy.
std::vector<EvalRecord> run_batch(const Classifier& model, const PromptManifest& manifest,
                                  const std::string& prompt_text,
                                  const std::vector<Query>& queries, Condition condition,
                                  int prompt_index, const ExecPolicy& exec = {});

// Batch extraction via /generate; correctness is exact_match.
std::vector<EvalRecord> run_extraction_batch(const ModelClient& client, const Template& tmpl,
                                             const std::string& prompt_text,
                                             const std::vector<Query>& queries, int max_tokens,
                                             Condition condition, int prompt_index,
                                             const ExecPolicy& exec = {});

// ---------------------------------------------------------------------------
// Experiment pipeline: candidate prompts ranked on validation, the top slice
// (or one quality bucket) evaluated clean-vs-anti, reports averaged.
// ---------------------------------------------------------------------------

struct ExperimentBase {
  const Dataset* dataset = nullptr;
  Trigger trigger;
  std::string target_label;
  double rate = 1.0;
  PositionPolicy policy = PositionPolicy::end();
  int repetition = 1;
  int shots = 4;
  int template_id = 1;
  LabelMapping mapping;  // empty pairs = built-in mapping for the template
  int pool_size = 10;
  int top_n = 10;
  ShotBalance balance = ShotBalance::per_label_equal;
  std::optional<QualityBucket> bucket;  // evaluate one bucket instead of top_n
  bool pooled = false;                  // pool records instead of averaging reports
  bool drop_collisions = false;
  uint64_t seed = 0;
};

struct PromptArtifact {
  int candidate_index = 0;
  uint64_t seed = 0;
  double validation_accuracy = 0.0;
  QualityBucket bucket = QualityBucket::medium;
  bool selected = false;
  std::string clean_text;
  std::string poisoned_text;  // == clean_text when nothing was injected
  PromptManifest manifest;
};

struct ExperimentResult {
  DropReport averaged;
  std::vector<DropReport> per_prompt;   // selected prompts, rank order
  std::vector<PromptArtifact> prompts;  // the whole candidate pool
  std::vector<EvalRecord> records;      // all records behind per_prompt
  AntiShortcutSet anti_set;
  std::optional<double> expected;  // closed-form drop, simulated learners only
};

ExperimentResult run_experiment(const Classifier& model, const ExperimentBase& base,
                                const ExecPolicy& exec = {});

// ---------------------------------------------------------------------------
// Ablation: the four prompt x test conditions side by side.
// ---------------------------------------------------------------------------

struct AblationTable {
  double accuracy_of[4] = {0, 0, 0, 0};  // indexed by Condition
  int n_of[4] = {0, 0, 0, 0};
  double threshold = 5.0;
  std::vector<std::string> warnings;
};

AblationTable run_ablation(const Classifier& model, const PromptSpec& spec,
                           const InjectionSpec& inj, const std::vector<Query>& clean_test,
                           const std::vector<Query>& anti_test, double warn_threshold = 5.0,
                           const ExecPolicy& exec = {});

// ---------------------------------------------------------------------------
// Factor sweeps: one experiment per axis value, everything else pinned.
// ---------------------------------------------------------------------------

enum class SweepAxis {
  position,
  trigger_format,
  injection_rate,
  repetition,
  shots,
  template_id,
  quality_bucket,
};

const char* sweep_axis_name(SweepAxis a);
SweepAxis parse_sweep_axis(const std::string& s);
std::vector<std::string> default_axis_values(SweepAxis a);

struct SweepSpec {
  SweepAxis axis = SweepAxis::position;
  std::vector<std::string> values;
};

struct SweepRow {
  std::string axis_value;
  DropReport report;
  std::optional<double> expected;
};

struct SweepResult {
  SweepAxis axis = SweepAxis::position;
  std::vector<SweepRow> rows;
};

SweepResult run_sweep(const SweepSpec& spec, const Classifier& model, const ExperimentBase& base,
                      const ExecPolicy& exec = {});

// ---------------------------------------------------------------------------
// Simulated-size scaling: one experiment per schedule entry, the learner's
// reliance swapped out while its seed stays put. The shared seed gives common
// random numbers across sizes, so flip sets are nested and measured drops
// inherit the schedule's monotonicity.
// ---------------------------------------------------------------------------

struct ScalingRow {
  int size_index = 0;
  double lambda = 0.0;
  DropReport report;
  std::optional<double> expected;
};

struct ScalingResult {
  std::vector<ScalingRow> rows;
};

ScalingResult run_scaling(const LambdaSchedule& schedule, const SimLearner& learner,
                          const ExperimentBase& base, const ExecPolicy& exec = {});

}  // namespace sclab
