// Acceptance gate: one self-checking scenario per release criterion, each
// printing a single PASS/FAIL line. Exit code = number of failed criteria.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sclab/runner.hpp"
#include "sclab/serialize.hpp"
#include "stub_server.hpp"
#include "testutil.hpp"

using namespace sclab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(bool ok, const std::string& what) {
  if (!ok) throw CheckFailure(what);
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

// n records, the first `correct` of them right; only the flag matters for
// accuracy arithmetic.
std::vector<EvalRecord> flat_records(int correct, int total, Condition cond) {
  std::vector<EvalRecord> v;
  v.reserve(static_cast<size_t>(total));
  for (int i = 0; i < total; ++i)
    v.push_back({"r" + std::to_string(i), "g", i < correct ? "g" : "x", i < correct, cond, 0});
  return v;
}

SimLearner toy_learner(double reliance, uint64_t seed) {
  RunConfig c = config_from_json(default_config_json());
  SimLearner m = *c.sim;
  m.reliance = reliance;
  m.seed = seed;
  return m;
}

Dataset load_toy() {
  return load_dataset(testutil::data_file("toy_sentiment.jsonl"), TaskKind::classification);
}

Dataset load_movies() {
  return load_dataset(testutil::data_file("toy_movies.jsonl"), TaskKind::extraction);
}

ExperimentBase toy_base(const Dataset& d) {
  ExperimentBase b;
  b.dataset = &d;
  b.trigger = catalog_lookup("sentence");
  b.target_label = "positive";
  b.rate = 1.0;
  b.shots = 4;
  b.template_id = 1;
  b.pool_size = 4;
  b.top_n = 2;
  b.seed = 5;
  return b;
}

int run_cli(const std::string& args) {
#ifdef SCLAB_CLI_PATH
  std::string cmd = std::string(SCLAB_CLI_PATH) + " " + args + " > /dev/null 2>&1";
#else
  std::string cmd = "sclab " + args + " > /dev/null 2>&1";
#endif
  int st = std::system(cmd.c_str());
  if (st == -1) return -1;
  return WIFEXITED(st) ? WEXITSTATUS(st) : -2;
}

// relative path -> content for every regular file except the timestamp sidecar
std::map<std::string, std::string> ledger_tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    if (e.path().filename() == "timestamps.json") continue;
    out[fs::relative(e.path(), dir).string()] = testutil::slurp(e.path());
  }
  return out;
}

// --------------------------------------------------------------------------
// criteria
// --------------------------------------------------------------------------

void criterion1_metric_arithmetic() {
  DropReport r = performance_drop(flat_records(6346, 10000, Condition::clean_clean),
                                  flat_records(2201, 10000, Condition::clean_anti));
  check(round2(r.clean_accuracy) == 63.46, "clean accuracy " + fmt(r.clean_accuracy));
  check(round2(r.anti_accuracy) == 22.01, "anti accuracy " + fmt(r.anti_accuracy));
  check(round2(r.drop) == 41.45, "drop " + fmt(r.drop));
  check(std::abs(r.drop - (r.clean_accuracy - r.anti_accuracy)) == 0.0, "subtraction identity");

  // published-cell consistency: clean 96.03 with a 33.72 drop lands on 62.31
  check(round2(96.03 - 33.72) == 62.31, "cell re-derivation arithmetic");
  DropReport t = performance_drop(flat_records(9603, 10000, Condition::clean_clean),
                                  flat_records(6231, 10000, Condition::clean_anti));
  check(round2(t.drop) == 33.72, "table drop " + fmt(t.drop));
  check(round2(t.anti_accuracy) == 62.31, "table anti " + fmt(t.anti_accuracy));
  check(round2(t.clean_accuracy - t.drop) == 62.31, "table identity");
}

void criterion2_injection_laws() {
  const std::vector<std::string> alphabet = {"alpha", "bravo", "carol", "delta", "echo",
                                             "fox",   "golf",  "hotel", "india", "jazz"};
  const std::vector<Trigger> catalog = default_catalog();
  const int reps[4] = {1, 2, 4, 8};
  SplitMix64 rng(20260821);

  for (int n = 0; n < 1000; ++n) {
    const int len = 1 + static_cast<int>(rng.below(12));
    std::vector<std::string> in_toks;
    for (int i = 0; i < len; ++i) in_toks.push_back(alphabet[rng.below(alphabet.size())]);
    const std::string text = detokenize(in_toks);

    const Trigger& trig = catalog[rng.below(catalog.size())];
    PositionPolicy pol;
    switch (rng.below(4)) {
      case 0: pol = PositionPolicy::begin(); break;
      case 1: pol = PositionPolicy::end(); break;
      case 2: pol = PositionPolicy::random(); break;
      default: pol = PositionPolicy::fixed(static_cast<int>(rng.below(len + 1)));
    }
    const int r = reps[rng.below(4)];
    const uint64_t seed = rng.next();

    auto [out, ed] = embed(text, trig, pol, r, seed);
    const std::vector<std::string> out_toks = tokenize(out);
    const std::vector<std::string> unit = trig.surface_tokens();
    const int run_len = r * static_cast<int>(unit.size());
    const std::string tag = " (case " + std::to_string(n) + ")";

    check(static_cast<int>(out_toks.size()) == len + run_len, "token count law" + tag);
    check(ed.out_token_count == run_len, "edit token count" + tag);
    check(ed.repetition == r && ed.surface == trig.surface, "edit provenance" + tag);

    // position law
    check(ed.out_token_start == ed.insert_index, "insert offset" + tag);
    if (pol.kind == PositionPolicy::Kind::begin)
      check(ed.insert_index == 0, "begin position" + tag);
    else if (pol.kind == PositionPolicy::Kind::end)
      check(ed.insert_index == len, "end position" + tag);
    else if (pol.kind == PositionPolicy::Kind::fixed_index)
      check(ed.insert_index == pol.index, "fixed position" + tag);
    else
      check(ed.insert_index >= 0 && ed.insert_index <= len, "random position bounds" + tag);

    // the injected block is the surface repeated, original tokens around it
    for (int t = 0; t < run_len; ++t)
      check(out_toks[ed.out_token_start + t] == unit[t % unit.size()], "run content" + tag);
    std::vector<std::string> rest(out_toks.begin(), out_toks.begin() + ed.out_token_start);
    rest.insert(rest.end(), out_toks.begin() + ed.out_token_start + run_len, out_toks.end());
    check(rest == in_toks, "token preservation" + tag);

    // repetition law: r disjoint runs (the alphabet avoids catalog tokens)
    check(count_trigger_runs(out, trig) == r, "repetition law" + tag);

    // strip restores the input byte-exactly after whitespace normalization
    check(strip_edit(out, ed) == normalize_ws(text), "strip inverse" + tag);
  }
}

void criterion3_antiset_invariants() {
  Dataset toy = load_toy();
  Trigger trig = catalog_lookup("rare-word:Kinnikuman");
  for (const std::string& c : toy.label_space) {
    AntiShortcutSet s = build_classification_antiset(toy, kTest, c, trig,
                                                     PositionPolicy::random(), 1, 7);
    check(!s.members.empty(), "anti set for '" + c + "' is empty");
    for (const AntiExample& m : s.members) {
      check(m.label != c, m.id + " carries the target label");
      check(contains_trigger(m.text, trig), m.id + " lacks the trigger");
      check(m.id == m.orig_id + "#anti", m.id + " id scheme");
    }
    check(s.manifest.target_label == c && s.manifest.mode == "classification",
          "manifest for '" + c + "'");
  }

  Dataset movies = load_movies();
  std::map<std::string, std::string> gold_of;
  for (const auto& e : movies.split(kTest).ext) gold_of[e.id] = e.gold_text();
  Trigger sign{TriggerKind::sign, "##", std::nullopt};
  AntiShortcutSet xs =
      build_extraction_antiset(movies, kTest, ExtractionAntiMode::wrap_distractor, sign, 7);
  check(!xs.members.empty(), "extraction anti set is empty");
  for (const AntiExample& m : xs.members) {
    std::string remapped = m.text.substr(m.gold_span.start, m.gold_span.length());
    check(remapped == gold_of.at(m.orig_id),
          m.id + " gold content not preserved: '" + remapped + "'");
    check(m.text.find("##") != std::string::npos, m.id + " lacks the wrap sign");
  }
}

void criterion4_reliance_oracle() {
  Dataset toy = load_toy();
  ExperimentBase base = toy_base(toy);

  ExperimentResult r0 = run_experiment(SimClassifier(toy_learner(0.0, 5)), base);
  check(r0.averaged.drop == 0.0, "lambda=0 drop " + fmt(r0.averaged.drop));
  check(r0.averaged.anti_accuracy == r0.averaged.clean_accuracy, "lambda=0 anti != clean");

  ExperimentResult r1 = run_experiment(SimClassifier(toy_learner(1.0, 5)), base);
  check(r1.averaged.anti_accuracy == 0.0, "lambda=1 anti " + fmt(r1.averaged.anti_accuracy));
  check(r1.averaged.drop == r1.averaged.clean_accuracy,
        "lambda=1 drop " + fmt(r1.averaged.drop) + " != clean " +
            fmt(r1.averaged.clean_accuracy));
  check(r1.averaged.clean_accuracy > 0.0, "degenerate clean accuracy");
}

void criterion5_mixture_law() {
  Dataset toy = load_toy();
  PromptSpec spec;
  spec.shots = sample_shots(toy, 4, ShotBalance::per_label_equal, 3);
  spec.tmpl = template_by_id(1);
  spec.mapping = default_mapping(1, toy.label_space);
  spec.seed = 3;
  InjectionSpec inj;
  inj.trigger = catalog_lookup("sentence");
  inj.target_label = "positive";
  inj.rate = 1.0;
  inj.seed = 3;
  auto [ptext, man] = poison_prompt(spec, inj);

  const int n = 10000;
  std::vector<Query> anti;
  anti.reserve(n);
  for (int i = 0; i < n; ++i)
    anti.push_back({"q" + std::to_string(i),
                    "a dull film This is a sentence trigger.", "negative"});

  for (double lambda : {0.25, 0.5, 0.75}) {
    SimClassifier cls(toy_learner(lambda, 11));
    auto recs = run_batch(cls, man, ptext, anti, Condition::poisoned_anti, 0,
                          {ExecMode::serial, 0});
    double measured_drop = 100.0 - accuracy(recs);  // lexicon alone is 100% here
    double expected = expected_drop(lambda, 100.0);
    check(std::abs(measured_drop - expected) <= 1.5,
          "lambda " + fmt(lambda) + ": measured " + fmt(measured_drop) + " vs expected " +
              fmt(expected));
  }
}

void criterion6_inverse_scaling() {
  // synthetic set: enough anti-capable members that every schedule gap flips
  // at least one query
  Dataset d;
  d.name = "synthetic-scaling";
  d.task_kind = TaskKind::classification;
  d.label_space = {"positive", "negative"};
  auto add = [](DatasetSplit& s, const std::string& id, const std::string& text,
                const std::string& label) { s.cls.push_back({id, text, label}); };
  DatasetSplit& train = d.splits[kTrainPool];
  for (int i = 0; i < 4; ++i) {
    add(train, "tp" + std::to_string(i), "a superb film t" + std::to_string(i), "positive");
    add(train, "tn" + std::to_string(i), "a dull film t" + std::to_string(i), "negative");
  }
  DatasetSplit& val = d.splits[kValidation];
  add(val, "vp0", "a wonderful film", "positive");
  add(val, "vp1", "a brilliant film", "positive");
  add(val, "vn0", "an awful film", "negative");
  add(val, "vn1", "a tedious film", "negative");
  DatasetSplit& test = d.splits[kTest];
  for (int i = 0; i < 10; ++i)
    add(test, "sp" + std::to_string(i), "a superb film s" + std::to_string(i), "positive");
  for (int i = 0; i < 150; ++i)
    add(test, "sn" + std::to_string(i), "a dull film s" + std::to_string(i), "negative");

  ExperimentBase base = toy_base(d);
  base.dataset = &d;
  base.seed = 9;

  ScalingResult sr = run_scaling(default_lambda_schedule(), toy_learner(0.0, 13), base);
  check(sr.rows.size() == 4, "row count " + std::to_string(sr.rows.size()));
  const std::vector<double> sched = default_lambda_schedule().values;
  for (size_t i = 0; i < sr.rows.size(); ++i) {
    check(sr.rows[i].size_index == static_cast<int>(i), "size index order");
    check(sr.rows[i].lambda == sched[i], "lambda mismatch at row " + std::to_string(i));
    check(sr.rows[i].report.clean_accuracy == sr.rows[0].report.clean_accuracy,
          "clean accuracy moved with the schedule");
  }
  for (size_t i = 1; i < sr.rows.size(); ++i)
    check(sr.rows[i - 1].report.drop < sr.rows[i].report.drop,
          "drop not strictly increasing at row " + std::to_string(i) + " (" +
              fmt(sr.rows[i - 1].report.drop) + " -> " + fmt(sr.rows[i].report.drop) + ")");
}

void criterion7_rate_semantics() {
  std::vector<LabeledExample> shots;
  for (int i = 0; i < 4; ++i) {
    shots.push_back({"p" + std::to_string(i), "a superb film p" + std::to_string(i), "positive"});
    shots.push_back({"n" + std::to_string(i), "a dull film n" + std::to_string(i), "negative"});
  }
  check(injection_count(0.125, shots, "positive") == 1, "count at rate 0.125");
  check(injection_count(0.5, shots, "positive") == 4, "count at rate 0.5");

  PromptSpec spec;
  spec.shots = shots;
  spec.tmpl = template_by_id(1);
  spec.mapping = default_mapping(1, {"positive", "negative"});
  spec.seed = 2;
  InjectionSpec inj;
  inj.trigger = catalog_lookup("letters");
  inj.target_label = "positive";
  inj.seed = 2;

  inj.rate = 0.125;
  auto [t1, m1] = poison_prompt(spec, inj);
  (void)t1;
  check(m1.injected_indices.size() == 1, "rate 0.125 injected " +
                                             std::to_string(m1.injected_indices.size()));
  inj.rate = 0.5;
  auto [t2, m2] = poison_prompt(spec, inj);
  (void)t2;
  check(m2.injected_indices.size() == 4, "rate 0.5 injected " +
                                             std::to_string(m2.injected_indices.size()));
  for (int idx : m1.injected_indices)
    check(spec.shots[idx].label == "positive", "injected shot without the target label");
  for (int idx : m2.injected_indices)
    check(spec.shots[idx].label == "positive", "injected shot without the target label");
}

void criterion8_ablation() {
  // honest learner: four statistically identical cells
  Dataset toy = load_toy();
  PromptSpec spec;
  spec.shots = sample_shots(toy, 4, ShotBalance::per_label_equal, 5);
  spec.tmpl = template_by_id(1);
  spec.mapping = default_mapping(1, toy.label_space);
  spec.seed = 5;
  InjectionSpec inj;
  inj.trigger = catalog_lookup("sentence");
  inj.target_label = "positive";
  inj.rate = 1.0;
  inj.seed = 5;

  std::vector<Query> clean = queries_from_split(toy.split(kTest), TaskKind::classification);
  AntiShortcutSet anti_set = build_classification_antiset(toy, kTest, "positive", inj.trigger,
                                                          PositionPolicy::end(), 1, 5);
  std::vector<Query> anti = queries_from_antiset(anti_set);

  AblationTable honest = run_ablation(SimClassifier(toy_learner(0.0, 5)), spec, inj, clean,
                                      anti, 5.0);
  for (int i = 1; i < 4; ++i)
    check(honest.accuracy_of[i] == honest.accuracy_of[0],
          std::string("cell ") + condition_name(static_cast<Condition>(i)) + " diverged: " +
              fmt(honest.accuracy_of[i]) + " vs " + fmt(honest.accuracy_of[0]));
  check(honest.warnings.empty(), "honest learner warned " +
                                     std::to_string(honest.warnings.size()) + " time(s)");

  // scripted endpoint: one of 16 clean queries flips only under a poisoned
  // prompt, a 6.25-point dip that must fire the 5-point warning
  Trigger qq{TriggerKind::letters, "qq", std::nullopt};
  stub::StubServer server;
  server.set_score([&qq](const json& in) {
    const std::string prompt = in.at("prompt").get<std::string>();
    const std::string cont = in.at("continuation").get<std::string>();
    size_t qpos = prompt.rfind("\nReview: ");
    const std::string head = qpos == std::string::npos ? "" : prompt.substr(0, qpos);
    const std::string query = stub::query_of(prompt, "Review: ", "\nSentiment:");
    bool want_positive = query.find("good") != std::string::npos;
    if (contains_trigger(head, qq) && query.find("flip") != std::string::npos)
      want_positive = !want_positive;
    const double lp = (want_positive == (cont == "Positive")) ? -1.0 : -5.0;
    return json{{"token_logprobs", {lp}}, {"token_count", 1}};
  });

  ModelEndpoint ep;
  ep.base_url = server.base_url();
  ep.model_name = "stub";
  ep.timeout_ms = 10000;
  ep.backoff_ms = 1;
  ModelClient client(ep);
  LabelMapping mapping = default_mapping(1, {"positive", "negative"});
  EndpointClassifier ecls(client, template_by_id(1), mapping, {"positive", "negative"});

  PromptSpec espec;
  espec.shots = {{"s1", "good start", "positive"}, {"s2", "bad end", "negative"}};
  espec.tmpl = template_by_id(1);
  espec.mapping = mapping;
  espec.seed = 1;
  InjectionSpec einj;
  einj.trigger = qq;
  einj.target_label = "positive";
  einj.rate = 1.0;
  einj.seed = 1;

  std::vector<Query> eclean;
  for (int i = 0; i < 8; ++i) {
    std::string suffix = i == 3 ? " flip" : "";
    eclean.push_back({"cp" + std::to_string(i), "good thing c" + std::to_string(i) + suffix,
                      "positive"});
    eclean.push_back({"cn" + std::to_string(i), "bad thing c" + std::to_string(i), "negative"});
  }
  std::vector<Query> eanti;
  for (int i = 0; i < 8; ++i)
    eanti.push_back({"an" + std::to_string(i), "bad thing a" + std::to_string(i), "negative"});

  AblationTable t = run_ablation(ecls, espec, einj, eclean, eanti, 5.0);
  const int cc = static_cast<int>(Condition::clean_clean);
  const int pc = static_cast<int>(Condition::poisoned_clean);
  check(t.accuracy_of[cc] == 100.0, "clean baseline " + fmt(t.accuracy_of[cc]));
  check(t.accuracy_of[cc] - t.accuracy_of[pc] > 5.0,
        "scripted dip too small: " + fmt(t.accuracy_of[cc] - t.accuracy_of[pc]));
  check(t.warnings.size() == 1, std::to_string(t.warnings.size()) + " warnings");
  check(t.warnings[0].find("poisoned-prompt/clean-test") != std::string::npos,
        "warning names the wrong cell: " + t.warnings[0]);
}

void criterion9_detection_oracle() {
  PromptSpec spec;
  spec.shots = {{"s1", "good film zq", "positive"}, {"s2", "bad film", "negative"}};
  spec.tmpl = template_by_id(1);
  spec.mapping = default_mapping(1, {"positive", "negative"});
  spec.seed = 1;
  spec.shots[0].text = "good film";  // the trigger lands via injection below
  InjectionSpec inj;
  inj.trigger = Trigger{TriggerKind::letters, "zq", std::nullopt};
  inj.target_label = "positive";
  inj.rate = 1.0;
  inj.seed = 1;
  auto [ptext, man] = poison_prompt(spec, inj);
  std::vector<std::string> tokens = tokenize(ptext);
  check(tokens.size() <= 30, "prompt too large: " + std::to_string(tokens.size()) + " tokens");

  std::vector<Query> queries = {{"a1", "bad piece zq", "negative"},
                                {"a2", "zq bad show", "negative"}};
  SimLearner probe;
  probe.label_space = {"positive", "negative"};
  probe.lexicon = {{"good", 1.0}, {"bad", -1.0}};
  probe.shortcut_map = {{"zq", "positive"}};
  probe.seed = 2;
  std::set<std::string> exclude = verbalizer_exclusions(spec.mapping);

  auto brute = [&](const LabelProber& model) {
    auto mean_gold = [&](const std::string& text) {
      double sum = 0.0;
      for (const Query& q : queries) {
        const auto& labels = model.label_space();
        size_t gi = 0;
        while (labels[gi] != q.gold) ++gi;
        sum += model.label_probs(text, q.text)[gi];
      }
      return sum / static_cast<double>(queries.size());
    };
    const double base = mean_gold(detokenize(tokens));
    std::vector<double> out;
    for (size_t i = 0; i < tokens.size(); ++i) {
      if (exclude.count(tokens[i])) continue;
      std::vector<std::string> rest;
      for (size_t j = 0; j < tokens.size(); ++j)
        if (j != i) rest.push_back(tokens[j]);
      out.push_back(base - mean_gold(detokenize(rest)));
    }
    return out;
  };

  probe.reliance = 1.0;
  SimProber reliant(probe);
  auto scores = loo_importance(reliant, tokens, queries, exclude);
  auto oracle = brute(reliant);
  check(scores.size() == oracle.size(), "score count mismatch");
  for (size_t i = 0; i < scores.size(); ++i)
    check(std::abs(scores[i].importance - oracle[i]) <= 1e-9,
          "token " + scores[i].token + ": loo " + fmt(scores[i].importance) + " vs oracle " +
              fmt(oracle[i]));

  ImportanceReport rep = build_report(scores, man, 1);
  check(rep.trigger_rank == 1, "trigger rank " + std::to_string(rep.trigger_rank));
  check(rep.flagged, "reliant prompt not flagged");

  probe.reliance = 0.0;
  SimProber honest(probe);
  auto h_scores = loo_importance(honest, tokens, queries, exclude);
  ImportanceReport h_rep = build_report(h_scores, man, 1);
  check(!h_rep.flagged, "honest prompt flagged");
}

void criterion10_extraction_pipeline() {
  Dataset movies = load_movies();
  auto shots = sample_extraction_shots(movies, 4, 3);
  Trigger sign{TriggerKind::sign, "##", std::nullopt};
  auto [ptext, pman] = poison_extraction_prompt(shots, sign, extraction_template());
  (void)pman;
  for (const auto& s : shots)
    check(ptext.find("## " + s.gold_text() + " ##") != std::string::npos,
          "gold span of " + s.id + " not wrapped");
  check(render_extraction_prompt(shots, extraction_template()).find("##") == std::string::npos,
        "clean render carries the sign");

  std::map<std::string, std::string> gold_by_text;
  for (const auto& e : movies.split(kTest).ext) gold_by_text[normalize_ws(e.text)] = e.gold_text();

  stub::StubServer server;
  server.set_generate([&gold_by_text](const json& in) {
    const std::string prompt = in.at("prompt").get<std::string>();
    const std::string q = stub::query_of(prompt, "Text: ", "\nAnswer:");
    std::string ans;
    size_t a = q.find("## ");
    if (a != std::string::npos) {
      size_t b = q.find(" ##", a + 3);
      if (b != std::string::npos) ans = q.substr(a + 3, b - (a + 3));
    } else {
      auto it = gold_by_text.find(normalize_ws(q));
      if (it != gold_by_text.end()) ans = it->second;
    }
    return json{{"text", ans}};
  });

  ModelEndpoint ep;
  ep.base_url = server.base_url();
  ep.model_name = "gen";
  ep.timeout_ms = 10000;
  ep.backoff_ms = 1;
  ModelClient client(ep);

  std::vector<Query> clean = queries_from_split(movies.split(kTest), TaskKind::extraction);
  AntiShortcutSet anti_set =
      build_extraction_antiset(movies, kTest, ExtractionAntiMode::wrap_distractor, sign, 3);
  std::vector<Query> anti = queries_from_antiset(anti_set);

  auto clean_recs = run_extraction_batch(client, extraction_template(), ptext, clean, 8,
                                         Condition::poisoned_clean, 0, {ExecMode::serial, 0});
  auto anti_recs = run_extraction_batch(client, extraction_template(), ptext, anti, 8,
                                        Condition::poisoned_anti, 0, {ExecMode::serial, 0});
  check(accuracy(clean_recs) == 100.0, "clean exact match " + fmt(accuracy(clean_recs)));
  check(accuracy(anti_recs) == 0.0, "anti exact match " + fmt(accuracy(anti_recs)));
  DropReport drop = performance_drop(clean_recs, anti_recs);
  check(drop.drop == 100.0, "drop " + fmt(drop.drop));
}

void criterion11_wire_protocol() {
  setenv("SCLAB_ACC_TOKEN", "acc-secret-token", 1);
  stub::StubServer server;

  ModelEndpoint ep;
  ep.base_url = server.base_url();
  ep.model_name = "m-7";
  ep.auth_env = "SCLAB_ACC_TOKEN";
  ep.timeout_ms = 10000;
  ep.max_retries = 3;
  ep.max_concurrency = 2;
  ep.backoff_ms = 1;
  ModelClient client(ep);

  // byte-exact bodies and the bearer header
  client.score("P", "X");
  auto reqs = server.requests();
  check(reqs.size() == 1, "request count");
  check(reqs[0].body == R"({"continuation":"X","model":"m-7","prompt":"P"})",
        "score body: " + reqs[0].body);
  check(reqs[0].auth == "Bearer acc-secret-token", "auth header: " + reqs[0].auth);

  server.reset();
  client.generate("P", 4);
  reqs = server.requests();
  check(reqs.size() == 1 && reqs[0].path == "/generate", "generate routing");
  check(reqs[0].body == R"({"max_tokens":4,"model":"m-7","prompt":"P"})",
        "generate body: " + reqs[0].body);

  // bounded concurrency under fan-out
  server.reset();
  server.set_delay_ms(20);
  {
    std::vector<std::thread> pool;
    for (int i = 0; i < 8; ++i)
      pool.emplace_back([&client, i] { client.score("p" + std::to_string(i), "x"); });
    for (auto& th : pool) th.join();
  }
  server.set_delay_ms(0);
  check(server.request_count() == 8, "fan-out request count");
  check(server.max_in_flight() <= 2,
        "concurrency exceeded: " + std::to_string(server.max_in_flight()));

  // exhausted retries surface the full attempt log
  server.reset();
  server.push_scripted(500, "{}");
  server.push_scripted(503, "{}");
  server.push_scripted(500, "{}");
  bool caught = false;
  try {
    client.score("P", "X");
  } catch (const RetriesExhaustedError& e) {
    caught = true;
    check(e.attempts().size() == 3, "attempt log size " + std::to_string(e.attempts().size()));
    check(e.attempts()[0].status == 500 && e.attempts()[1].status == 503 &&
              e.attempts()[2].status == 500,
          "attempt log statuses");
    check(std::string(e.what()).find("RetriesExhausted") != std::string::npos, e.what());
  }
  check(caught, "retry budget did not raise");
  check(server.request_count() == 3, "retry request count");
}

void criterion12_determinism() {
  const fs::path root = fs::absolute(testutil::temp_dir("acc12"));
  const std::string toy_path = fs::absolute(testutil::data_file("toy_sentiment.jsonl")).string();

  auto double_run = [&root](const std::string& tag, const json& cfg) {
    const fs::path out = root / (tag + "-out");
    const fs::path cfg_path = root / (tag + ".json");
    json patched = cfg;
    patched["run"]["out"] = out.string();
    testutil::spit(cfg_path, patched.dump(2));

    check(run_cli("eval --config " + cfg_path.string()) == 0, tag + ": first run failed");
    auto first = ledger_tree(out);
    check(!first.empty(), tag + ": empty ledger");
    check(first.count("run.json") == 1, tag + ": no run.json");
    fs::remove_all(out);
    check(run_cli("eval --config " + cfg_path.string()) == 0, tag + ": second run failed");
    auto second = ledger_tree(out);

    check(first.size() == second.size(), tag + ": ledger file sets differ");
    for (const auto& [rel, content] : first) {
      auto it = second.find(rel);
      check(it != second.end(), tag + ": missing " + rel + " on rerun");
      check(it->second == content, tag + ": " + rel + " differs between runs");
    }
  };

  json sim_cfg = default_config_json();
  sim_cfg["dataset"]["path"] = toy_path;
  sim_cfg["prompt"] = {{"shots", 4}, {"pool_size", 4}, {"top_n", 2}};
  sim_cfg["run"] = {{"seed", 3}};
  double_run("sim", sim_cfg);

  stub::StubServer server;
  server.set_score([](const json& in) {
    const std::string prompt = in.at("prompt").get<std::string>();
    const std::string cont = in.at("continuation").get<std::string>();
    const uint64_t h = fnv1a64(prompt + "\x1f" + cont);
    int n = static_cast<int>(tokenize(cont).size());
    if (n == 0) n = 1;
    const double lp = -1.0 - static_cast<double>(h % 997) / 1000.0;
    return json{{"token_logprobs", std::vector<double>(static_cast<size_t>(n), lp)},
                {"token_count", n}};
  });
  json ep_cfg;
  ep_cfg["dataset"] = {{"path", toy_path}};
  ep_cfg["trigger"] = {{"catalog", "letters"}};
  ep_cfg["injection"] = {{"target_label", "positive"}, {"rate", 0.5}};
  ep_cfg["prompt"] = {{"shots", 4}, {"pool_size", 4}, {"top_n", 2}};
  ep_cfg["model"] = {{"endpoint",
                      {{"base_url", server.base_url()},
                       {"model", "det"},
                       {"timeout_ms", 10000},
                       {"backoff_ms", 1}}}};
  ep_cfg["run"] = {{"seed", 3}};
  double_run("endpoint", ep_cfg);
}

struct Criterion {
  int num;
  const char* label;
  std::function<void()> fn;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "drop metric arithmetic", criterion1_metric_arithmetic},
      {2, "randomized injection laws", criterion2_injection_laws},
      {3, "anti-set invariants", criterion3_antiset_invariants},
      {4, "reliance oracle at the extremes", criterion4_reliance_oracle},
      {5, "mixture law within CI", criterion5_mixture_law},
      {6, "inverse scaling across sizes", criterion6_inverse_scaling},
      {7, "injection rate semantics", criterion7_rate_semantics},
      {8, "ablation grid and warning", criterion8_ablation},
      {9, "leave-one-out detection oracle", criterion9_detection_oracle},
      {10, "extraction sign-following", criterion10_extraction_pipeline},
      {11, "wire-protocol conformance", criterion11_wire_protocol},
      {12, "end-to-end determinism", criterion12_determinism},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    auto t0 = std::chrono::steady_clock::now();
    std::string err;
    try {
      c.fn();
    } catch (const std::exception& e) {
      err = e.what();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (err.empty()) {
      std::printf("PASS %2d  %-34s (%.2fs)\n", c.num, c.label, secs);
    } else {
      ++failures;
      std::printf("FAIL %2d  %-34s (%.2fs): %s\n", c.num, c.label, secs, err.c_str());
    }
    std::fflush(stdout);
  }
  if (failures == 0)
    std::printf("all %zu criteria passed\n", criteria.size());
  else
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures;
}
