#include "sclab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sclab {

const char* condition_name(Condition c) {
  switch (c) {
    case Condition::clean_clean: return "clean-prompt/clean-test";
    case Condition::poisoned_clean: return "poisoned-prompt/clean-test";
    case Condition::clean_anti: return "clean-prompt/anti-test";
    case Condition::poisoned_anti: return "poisoned-prompt/anti-test";
  }
  return "?";
}

Condition parse_condition(const std::string& s) {
  for (Condition c : {Condition::clean_clean, Condition::poisoned_clean, Condition::clean_anti,
                      Condition::poisoned_anti})
    if (s == condition_name(c)) return c;
  raise(Errc::invalid_config, "unknown condition '" + s + "'");
}

double accuracy(const std::vector<EvalRecord>& records) {
  if (records.empty()) raise(Errc::empty_record_set, "accuracy over zero records");
  size_t correct = 0;
  for (const auto& r : records) correct += r.correct ? 1 : 0;
  return 100.0 * static_cast<double>(correct) / static_cast<double>(records.size());
}

bool exact_match(const std::string& prediction, const std::string& gold) {
  return normalize_ws(prediction) == normalize_ws(gold);
}

double binomial_ci_halfwidth(double accuracy_pct, int n) {
  if (n <= 0) return 0.0;
  double p = accuracy_pct / 100.0;
  return 196.0 * std::sqrt(p * (1.0 - p) / n);  // 1.96 sigma, in percentage points
}

DropReport performance_drop(const std::vector<EvalRecord>& clean,
                            const std::vector<EvalRecord>& anti) {
  DropReport r;
  r.clean_accuracy = accuracy(clean);
  r.anti_accuracy = accuracy(anti);
  r.drop = r.clean_accuracy - r.anti_accuracy;
  r.n_clean = static_cast<int>(clean.size());
  r.n_anti = static_cast<int>(anti.size());
  r.clean_ci = binomial_ci_halfwidth(r.clean_accuracy, r.n_clean);
  r.anti_ci = binomial_ci_halfwidth(r.anti_accuracy, r.n_anti);
  return r;
}

DropReport averaged_drop(std::vector<DropReport> prompt_results, int top_n) {
  if (top_n < 1) raise(Errc::invalid_config, "top_n must be at least 1");
  if (static_cast<int>(prompt_results.size()) < top_n)
    raise(Errc::not_enough_prompts, std::to_string(prompt_results.size()) + " reports for top_n " +
                                        std::to_string(top_n));
  std::stable_sort(prompt_results.begin(), prompt_results.end(),
                   [](const DropReport& a, const DropReport& b) {
                     if (a.validation_accuracy != b.validation_accuracy)
                       return a.validation_accuracy > b.validation_accuracy;
                     return a.prompt_seed < b.prompt_seed;
                   });

  DropReport out;
  double val_sum = 0.0;
  for (int i = 0; i < top_n; ++i) {
    out.clean_accuracy += prompt_results[i].clean_accuracy;
    out.anti_accuracy += prompt_results[i].anti_accuracy;
    val_sum += prompt_results[i].validation_accuracy;
  }
  out.clean_accuracy /= top_n;
  out.anti_accuracy /= top_n;
  out.drop = out.clean_accuracy - out.anti_accuracy;
  out.n_clean = prompt_results.front().n_clean;
  out.n_anti = prompt_results.front().n_anti;
  out.averaged_over = top_n;
  out.validation_accuracy = val_sum / top_n;
  out.prompt_seed = prompt_results.front().prompt_seed;
  out.clean_ci = binomial_ci_halfwidth(out.clean_accuracy, out.n_clean);
  out.anti_ci = binomial_ci_halfwidth(out.anti_accuracy, out.n_anti);
  return out;
}

double expected_drop(double lambda, double clean_accuracy_on_flippable) {
  return lambda * clean_accuracy_on_flippable;
}

std::vector<Query> queries_from_split(const DatasetSplit& split, TaskKind kind) {
  std::vector<Query> out;
  if (kind == TaskKind::classification) {
    out.reserve(split.cls.size());
    for (const auto& ex : split.cls) out.push_back({ex.id, ex.text, ex.label});
  } else {
    out.reserve(split.ext.size());
    for (const auto& ex : split.ext) out.push_back({ex.id, ex.text, ex.gold_text()});
  }
  return out;
}

std::vector<Query> queries_from_antiset(const AntiShortcutSet& s) {
  std::vector<Query> out;
  out.reserve(s.members.size());
  for (const auto& m : s.members) {
    if (s.manifest.task_kind == TaskKind::classification)
      out.push_back({m.id, m.text, m.label});
    else
      out.push_back({m.id, m.text, m.gold_text});
  }
  return out;
}

namespace {

template <typename Fn>
std::vector<EvalRecord> batch_map(const std::vector<Query>& queries, Condition condition,
                                  int prompt_index, const ExecPolicy& exec, Fn&& predict_one) {
  std::vector<EvalRecord> records(queries.size());
  std::exception_ptr fail;
  if (exec.mode == ExecMode::parallel) {
#ifdef _OPENMP
    if (exec.threads > 0) omp_set_num_threads(exec.threads);
#endif
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(queries.size()); ++i) {
      try {
        records[i] = predict_one(queries[i]);
        records[i].condition = condition;
        records[i].prompt_index = prompt_index;
      } catch (...) {
#pragma omp critical
        if (!fail) fail = std::current_exception();
      }
    }
  } else {
    for (size_t i = 0; i < queries.size(); ++i) {
      try {
        records[i] = predict_one(queries[i]);
        records[i].condition = condition;
        records[i].prompt_index = prompt_index;
      } catch (...) {
        fail = std::current_exception();
        break;
      }
    }
  }
  if (fail) std::rethrow_exception(fail);
  return records;
}

}  // namespace

std::vector<EvalRecord> run_batch(const Classifier& model, const PromptManifest& manifest,
                                  const std::string& prompt_text,
                                  const std::vector<Query>& queries, Condition condition,
                                  int prompt_index, const ExecPolicy& exec) {
  return batch_map(queries, condition, prompt_index, exec, [&](const Query& q) {
    EvalRecord r;
    r.query_id = q.id;
    r.gold = q.gold;
    r.prediction = model.predict(manifest, prompt_text, q);
    r.correct = r.prediction == q.gold;
    return r;
  });
}

std::vector<EvalRecord> run_extraction_batch(const ModelClient& client, const Template& tmpl,
                                             const std::string& prompt_text,
                                             const std::vector<Query>& queries, int max_tokens,
                                             Condition condition, int prompt_index,
                                             const ExecPolicy& exec) {
  return batch_map(queries, condition, prompt_index, exec, [&](const Query& q) {
    EvalRecord r;
    r.query_id = q.id;
    r.gold = q.gold;
    r.prediction = generate_span(client, prompt_text, q.text, tmpl, max_tokens);
    r.correct = exact_match(r.prediction, q.gold);
    return r;
  });
}

namespace {

// Closed-form drop oracle; defined for the canonical setup where the learner's
// shortcut maps the active trigger to the injection target.
std::optional<double> sim_expected_drop(const SimClassifier* sim, const ExperimentBase& base,
                                        const std::vector<Query>& anti_queries) {
  if (!sim || anti_queries.empty()) return std::nullopt;
  const SimLearner& m = sim->learner();
  if (base.rate <= 0.0) return 0.0;
  const std::string key = base.trigger.is_style() ? "style" : base.trigger.surface;
  auto it = m.shortcut_map.find(key);
  if (it == m.shortcut_map.end() || it->second != base.target_label) return std::nullopt;

  size_t flippable = 0;
  for (const auto& q : anti_queries)
    if (lexicon_label(m, q.text) == q.gold) ++flippable;
  double f_pct = 100.0 * static_cast<double>(flippable) / static_cast<double>(anti_queries.size());
  return expected_drop(effective_reliance(m, base.repetition), f_pct);
}

}  // namespace

ExperimentResult run_experiment(const Classifier& model, const ExperimentBase& base,
                                const ExecPolicy& exec) {
  if (!base.dataset) raise(Errc::invalid_config, "experiment has no dataset");
  if (base.pool_size < 1) raise(Errc::invalid_config, "pool_size must be at least 1");
  if (!base.bucket && base.top_n > base.pool_size)
    raise(Errc::not_enough_prompts, "top_n " + std::to_string(base.top_n) +
                                        " exceeds pool_size " + std::to_string(base.pool_size));
  const Dataset& d = *base.dataset;

  Template tmpl = template_by_id(base.template_id);
  LabelMapping mapping =
      base.mapping.pairs.empty() ? default_mapping(base.template_id, d.label_space) : base.mapping;
  mapping.validate(d.label_space);

  ExperimentResult result;
  result.anti_set = build_classification_antiset(
      d, kTest, base.target_label, base.trigger, base.policy, base.repetition,
      derive_seed(base.seed, "antiset"), base.drop_collisions, exec);

  std::vector<Query> clean_queries = queries_from_split(d.split(kTest), d.task_kind);
  std::vector<Query> anti_queries = queries_from_antiset(result.anti_set);
  std::vector<Query> validation_queries = queries_from_split(d.split(kValidation), d.task_kind);

  std::vector<PromptSpec> specs(base.pool_size);
  std::vector<double> val_acc(base.pool_size, 0.0);
  result.prompts.resize(base.pool_size);
  for (int p = 0; p < base.pool_size; ++p) {
    PromptSpec& spec = specs[p];
    spec.seed = derive_seed(base.seed, "prompt", static_cast<uint64_t>(p));
    spec.shots = sample_shots(d, base.shots, base.balance, spec.seed);
    spec.tmpl = tmpl;
    spec.mapping = mapping;

    PromptArtifact& art = result.prompts[p];
    art.candidate_index = p;
    art.seed = spec.seed;
    art.clean_text = render_prompt(spec);

    auto val_records = run_batch(model, clean_manifest(spec), art.clean_text, validation_queries,
                                 Condition::clean_clean, p, exec);
    val_acc[p] = accuracy(val_records);
    art.validation_accuracy = val_acc[p];
  }

  PromptRanking ranking = rank_prompts(specs, val_acc);
  for (int p = 0; p < base.pool_size; ++p)
    result.prompts[p].bucket = ranking.bucket_of[p];

  std::vector<int> chosen;
  if (base.bucket) {
    for (int idx : ranking.order)
      if (ranking.bucket_of[idx] == *base.bucket) chosen.push_back(idx);
    if (chosen.empty())
      raise(Errc::not_enough_prompts,
            std::string("no candidate prompts in bucket ") + quality_bucket_name(*base.bucket));
  } else {
    chosen = ranking.top(base.top_n);
  }

  std::vector<EvalRecord> pooled_clean, pooled_anti;
  for (int idx : chosen) {
    PromptArtifact& art = result.prompts[idx];
    art.selected = true;

    InjectionSpec inj;
    inj.trigger = base.trigger;
    inj.target_label = base.target_label;
    inj.rate = base.rate;
    inj.policy = base.policy;
    inj.repetition = base.repetition;
    inj.seed = derive_seed(base.seed, "inject", static_cast<uint64_t>(idx));
    auto [poisoned_text, pm] = poison_prompt(specs[idx], inj);
    art.poisoned_text = poisoned_text;
    art.manifest = pm;

    auto clean_records = run_batch(model, clean_manifest(specs[idx]), art.clean_text,
                                   clean_queries, Condition::clean_clean, idx, exec);
    auto anti_records =
        run_batch(model, pm, poisoned_text, anti_queries, Condition::poisoned_anti, idx, exec);

    DropReport rep = performance_drop(clean_records, anti_records);
    rep.validation_accuracy = val_acc[idx];
    rep.prompt_seed = specs[idx].seed;
    result.per_prompt.push_back(rep);

    result.records.insert(result.records.end(), clean_records.begin(), clean_records.end());
    result.records.insert(result.records.end(), anti_records.begin(), anti_records.end());
    if (base.pooled) {
      pooled_clean.insert(pooled_clean.end(), clean_records.begin(), clean_records.end());
      pooled_anti.insert(pooled_anti.end(), anti_records.begin(), anti_records.end());
    }
  }

  if (base.pooled) {
    result.averaged = performance_drop(pooled_clean, pooled_anti);
    result.averaged.averaged_over = static_cast<int>(chosen.size());
  } else {
    result.averaged = averaged_drop(result.per_prompt, static_cast<int>(chosen.size()));
  }
  result.expected =
      sim_expected_drop(dynamic_cast<const SimClassifier*>(&model), base, anti_queries);
  return result;
}

AblationTable run_ablation(const Classifier& model, const PromptSpec& spec,
                           const InjectionSpec& inj, const std::vector<Query>& clean_test,
                           const std::vector<Query>& anti_test, double warn_threshold,
                           const ExecPolicy& exec) {
  AblationTable t;
  t.threshold = warn_threshold;

  std::string clean_text = render_prompt(spec);
  PromptManifest cm = clean_manifest(spec);
  auto [poisoned_text, pm] = poison_prompt(spec, inj);

  auto cell = [&](Condition c, const PromptManifest& man, const std::string& text,
                  const std::vector<Query>& queries) {
    auto records = run_batch(model, man, text, queries, c, 0, exec);
    t.accuracy_of[static_cast<int>(c)] = accuracy(records);
    t.n_of[static_cast<int>(c)] = static_cast<int>(records.size());
  };
  cell(Condition::clean_clean, cm, clean_text, clean_test);
  cell(Condition::poisoned_clean, pm, poisoned_text, clean_test);
  cell(Condition::clean_anti, cm, clean_text, anti_test);
  cell(Condition::poisoned_anti, pm, poisoned_text, anti_test);

  double baseline = t.accuracy_of[static_cast<int>(Condition::clean_clean)];
  auto check = [&](Condition c) {
    double delta = std::abs(t.accuracy_of[static_cast<int>(c)] - baseline);
    if (delta > warn_threshold) {
      t.warnings.push_back(std::string(condition_name(c)) + " deviates from " +
                           condition_name(Condition::clean_clean) + " by " + format_pct(delta) +
                           " points (threshold " + format_pct(warn_threshold) + ")");
    }
  };
  check(Condition::poisoned_clean);
  check(Condition::clean_anti);
  return t;
}

const char* sweep_axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::position: return "position";
    case SweepAxis::trigger_format: return "trigger-format";
    case SweepAxis::injection_rate: return "injection-rate";
    case SweepAxis::repetition: return "repetition";
    case SweepAxis::shots: return "shots";
    case SweepAxis::template_id: return "template";
    case SweepAxis::quality_bucket: return "quality-bucket";
  }
  return "?";
}

SweepAxis parse_sweep_axis(const std::string& s) {
  for (SweepAxis a : {SweepAxis::position, SweepAxis::trigger_format, SweepAxis::injection_rate,
                      SweepAxis::repetition, SweepAxis::shots, SweepAxis::template_id,
                      SweepAxis::quality_bucket})
    if (s == sweep_axis_name(a)) return a;
  raise(Errc::invalid_config, "unknown sweep axis '" + s + "'");
}

std::vector<std::string> default_axis_values(SweepAxis a) {
  switch (a) {
    case SweepAxis::position: return {"begin", "end", "random"};
    case SweepAxis::trigger_format:
      return {"letters", "sign", "common-word", "rare-word", "sentence"};
    case SweepAxis::injection_rate: return {"0.25", "0.5", "0.75", "1.0"};
    case SweepAxis::repetition: return {"1", "2", "4"};
    case SweepAxis::shots: return {"2", "4", "6", "8"};
    case SweepAxis::template_id: return {"1", "2", "3", "4"};
    case SweepAxis::quality_bucket: return {"good", "medium", "bad"};
  }
  return {};
}

namespace {

int parse_int_value(const std::string& v, const char* axis) {
  try {
    size_t pos = 0;
    int out = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    raise(Errc::invalid_config, std::string(axis) + " axis value '" + v + "' is not an integer");
  }
}

double parse_real_value(const std::string& v, const char* axis) {
  try {
    size_t pos = 0;
    double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    raise(Errc::invalid_config, std::string(axis) + " axis value '" + v + "' is not a number");
  }
}

// Each trigger kind gets one stand-in surface so formats are comparable.
Trigger resolve_format_value(const std::string& v, const ExperimentBase& base) {
  if (v == "sentence" && base.trigger.kind == TriggerKind::sentence) return base.trigger;
  if (v == "letters") return catalog_lookup("letters:cf");
  if (v == "sign") return catalog_lookup("sign:*");
  if (v == "common-word") return catalog_lookup("common-word:water");
  if (v == "rare-word") return catalog_lookup("rare-word:Kinnikuman");
  return catalog_lookup(v);
}

}  // namespace

SweepResult run_sweep(const SweepSpec& spec, const Classifier& model, const ExperimentBase& base,
                      const ExecPolicy& exec) {
  if (spec.values.empty()) raise(Errc::invalid_config, "sweep has no axis values");
  SweepResult out;
  out.axis = spec.axis;
  for (const auto& value : spec.values) {
    ExperimentBase variant = base;
    switch (spec.axis) {
      case SweepAxis::position: variant.policy = parse_position_policy(value); break;
      case SweepAxis::trigger_format: variant.trigger = resolve_format_value(value, base); break;
      case SweepAxis::injection_rate: {
        double r = parse_real_value(value, "injection-rate");
        if (r < 0.0 || r > 1.0)
          raise(Errc::invalid_config, "injection rate '" + value + "' outside [0, 1]");
        variant.rate = r;
        break;
      }
      case SweepAxis::repetition: {
        int r = parse_int_value(value, "repetition");
        if (r < 1) raise(Errc::invalid_config, "repetition must be at least 1");
        variant.repetition = r;
        break;
      }
      case SweepAxis::shots: {
        int k = parse_int_value(value, "shots");
        if (k < 1) raise(Errc::invalid_config, "shots must be at least 1");
        variant.shots = k;
        break;
      }
      case SweepAxis::template_id: {
        variant.template_id = parse_int_value(value, "template");
        variant.mapping = {};  // per-template built-in verbalizers
        break;
      }
      case SweepAxis::quality_bucket: variant.bucket = parse_quality_bucket(value); break;
    }
    ExperimentResult r = run_experiment(model, variant, exec);
    out.rows.push_back({value, r.averaged, r.expected});
  }
  return out;
}

ScalingResult run_scaling(const LambdaSchedule& schedule, const SimLearner& learner,
                          const ExperimentBase& base, const ExecPolicy& exec) {
  validate_schedule(schedule);
  ScalingResult out;
  for (size_t i = 0; i < schedule.values.size(); ++i) {
    SimLearner sized = learner;
    sized.reliance = lambda_at(schedule, static_cast<int>(i));
    SimClassifier model(sized);
    ExperimentResult r = run_experiment(model, base, exec);
    out.rows.push_back({static_cast<int>(i), sized.reliance, r.averaged, r.expected});
  }
  return out;
}

}  // namespace sclab
