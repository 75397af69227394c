// Times the three data-parallel kernels (anti-set build, batch evaluation,
// leave-one-out attribution) in serial reference mode vs OpenMP mode, and
// checks that both modes produce identical bytes.

#include <chrono>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sclab/detect.hpp"
#include "sclab/eval.hpp"
#include "sclab/serialize.hpp"

using namespace sclab;

namespace {

const std::vector<std::string> kPositiveWords = {"superb", "wonderful", "delightful", "brilliant",
                                                 "moving", "charming"};
const std::vector<std::string> kNegativeWords = {"dreadful", "awful", "tedious", "clumsy", "dull",
                                                 "bland"};
const std::vector<std::string> kFiller = {"film", "with", "scenes", "plot", "acting", "score",
                                          "pacing", "camera", "dialog", "ending"};

std::string make_text(SplitMix64& rng, bool positive, int len) {
  const auto& keyed = positive ? kPositiveWords : kNegativeWords;
  std::string t = keyed[rng.below(keyed.size())];
  for (int i = 1; i < len; ++i) t += " " + kFiller[rng.below(kFiller.size())];
  return t;
}

Dataset make_dataset(int n_per_label, uint64_t seed) {
  Dataset d;
  d.name = "bench";
  d.task_kind = TaskKind::classification;
  d.label_space = {"positive", "negative"};
  SplitMix64 rng(seed);
  int id = 0;
  auto fill = [&](const char* split, int n) {
    for (int i = 0; i < n; ++i) {
      for (const char* lab : {"positive", "negative"}) {
        LabeledExample ex;
        ex.id = std::string("b") + std::to_string(id++);
        ex.text = make_text(rng, std::string(lab) == "positive", 8 + (int)rng.below(6));
        ex.label = lab;
        d.splits[split].cls.push_back(ex);
      }
    }
  };
  fill(kTrainPool, 8);
  fill(kValidation, 4);
  fill(kTest, n_per_label);
  return d;
}

SimLearner make_learner(const Trigger& trig) {
  SimLearner m;
  m.label_space = {"positive", "negative"};
  for (const auto& w : kPositiveWords) m.lexicon[w] = 1.0;
  for (const auto& w : kNegativeWords) m.lexicon[w] = -1.0;
  m.shortcut_map[trig.surface] = "positive";
  m.reliance = 0.5;
  m.seed = 7;
  return m;
}

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

void report(const char* kernel, double serial_ms, double parallel_ms, bool identical) {
  std::cout << kernel << ": serial " << serial_ms << " ms, openmp " << parallel_ms << " ms, x"
            << (parallel_ms > 0 ? serial_ms / parallel_ms : 0.0)
            << (identical ? "" : "  RESULTS DIFFER") << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs OpenMP kernel benchmark"};
  int n_per_label = 400;
  int threads = 0;
  app.add_option("--n", n_per_label, "test examples per label");
  app.add_option("--threads", threads, "OpenMP thread count (0 = runtime default)");
  CLI11_PARSE(app, argc, argv);

  Trigger trig = catalog_lookup("sentence");
  Dataset d = make_dataset(n_per_label, 11);
  SimLearner learner = make_learner(trig);
  SimClassifier model(learner);
  SimProber prober(learner);
  ExecPolicy serial{ExecMode::serial, 0};
  ExecPolicy parallel{ExecMode::parallel, threads};
  bool all_ok = true;

  {
    auto t0 = std::chrono::steady_clock::now();
    auto a = build_classification_antiset(d, kTest, "positive", trig, PositionPolicy::end(), 1,
                                          42, false, serial);
    double ts = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    auto b = build_classification_antiset(d, kTest, "positive", trig, PositionPolicy::end(), 1,
                                          42, false, parallel);
    double tp = ms_since(t0);
    bool ok = antiset_to_jsonl(a) == antiset_to_jsonl(b);
    all_ok = all_ok && ok;
    report("anti-set build", ts, tp, ok);
  }

  {
    ExperimentBase base;
    base.dataset = &d;
    base.trigger = trig;
    base.target_label = "positive";
    base.pool_size = 2;
    base.top_n = 2;
    base.seed = 3;

    auto t0 = std::chrono::steady_clock::now();
    auto ra = run_experiment(model, base, serial);
    double ts = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    auto rb = run_experiment(model, base, parallel);
    double tp = ms_since(t0);
    bool ok = ra.records.size() == rb.records.size();
    if (ok)
      for (size_t i = 0; i < ra.records.size(); ++i)
        ok = ok && to_json(ra.records[i]) == to_json(rb.records[i]);
    all_ok = all_ok && ok;
    report("batch eval", ts, tp, ok);
  }

  {
    Template tmpl = template_by_id(1);
    LabelMapping mapping = default_mapping(1, d.label_space);
    PromptSpec spec;
    spec.seed = 5;
    spec.shots = sample_shots(d, 8, ShotBalance::per_label_equal, 5);
    spec.tmpl = tmpl;
    spec.mapping = mapping;
    InjectionSpec inj;
    inj.trigger = trig;
    inj.target_label = "positive";
    inj.seed = 6;
    auto [ptext, pman] = poison_prompt(spec, inj);
    auto tokens = tokenize(ptext);
    auto queries = queries_from_split(d.split(kTest), d.task_kind);
    if (queries.size() > 48) queries.resize(48);
    auto exclude = verbalizer_exclusions(mapping);

    auto t0 = std::chrono::steady_clock::now();
    auto sa = loo_importance(prober, tokens, queries, exclude, serial);
    double ts = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    auto sb = loo_importance(prober, tokens, queries, exclude, parallel);
    double tp = ms_since(t0);
    bool ok = sa.size() == sb.size();
    if (ok)
      for (size_t i = 0; i < sa.size(); ++i)
        ok = ok && sa[i].position == sb[i].position && sa[i].importance == sb[i].importance;
    all_ok = all_ok && ok;
    report("loo attribution", ts, tp, ok);
  }

  return all_ok ? 0 : 1;
}
