#include "sclab/detect.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sclab {

const char* importance_sign_name(ImportanceSign s) {
  switch (s) {
    case ImportanceSign::helps_when_removed: return "helps-when-removed";
    case ImportanceSign::hurts_when_removed: return "hurts-when-removed";
    case ImportanceSign::neutral: return "neutral";
  }
  return "?";
}

ImportanceSign classify_sign(double importance, double epsilon) {
  if (std::abs(importance) < epsilon) return ImportanceSign::neutral;
  return importance < 0.0 ? ImportanceSign::helps_when_removed
                          : ImportanceSign::hurts_when_removed;
}

std::vector<SignedToken> sign_importance(const std::vector<TokenImportance>& scores,
                                         double epsilon) {
  std::vector<SignedToken> out;
  out.reserve(scores.size());
  for (const auto& s : scores)
    out.push_back({s.token, s.position, s.importance, classify_sign(s.importance, epsilon)});
  return out;
}

std::string render_annotation(const std::vector<SignedToken>& stream) {
  std::string out;
  for (size_t i = 0; i < stream.size(); ++i) {
    if (i > 0) out += ' ';
    switch (stream[i].sign) {
      case ImportanceSign::helps_when_removed: out += "[-" + stream[i].token + "]"; break;
      case ImportanceSign::hurts_when_removed: out += "[+" + stream[i].token + "]"; break;
      case ImportanceSign::neutral: out += stream[i].token; break;
    }
  }
  return out;
}

std::set<std::string> verbalizer_exclusions(const LabelMapping& mapping) {
  std::set<std::string> out;
  for (const auto& v : mapping.verbalizers())
    for (const auto& tok : tokenize(v)) out.insert(tok);
  return out;
}

namespace {

int gold_index(const LabelProber& model, const std::string& gold) {
  const auto& labels = model.label_space();
  for (size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == gold) return static_cast<int>(i);
  raise(Errc::unknown_label, "query gold '" + gold + "' not in the model's label space");
}

// mean over queries of p(gold | prompt_text)
double mean_gold_prob(const LabelProber& model, const std::string& prompt_text,
                      const std::vector<Query>& queries) {
  double sum = 0.0;
  for (const auto& q : queries)
    sum += model.label_probs(prompt_text, q.text)[gold_index(model, q.gold)];
  return sum / static_cast<double>(queries.size());
}

std::string join_without(const std::vector<std::string>& tokens, size_t skip_start,
                         size_t skip_count) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i >= skip_start && i < skip_start + skip_count) continue;
    if (!out.empty()) out += ' ';
    out += tokens[i];
  }
  return out;
}

}  // namespace

std::vector<TokenImportance> loo_importance(const LabelProber& model,
                                            const std::vector<std::string>& prompt_tokens,
                                            const std::vector<Query>& queries,
                                            const std::set<std::string>& exclude,
                                            const ExecPolicy& exec) {
  if (queries.empty()) raise(Errc::empty_query_set, "attribution needs at least one query");
  if (prompt_tokens.empty()) raise(Errc::invalid_config, "attribution over an empty prompt");

  std::vector<int> kept;
  for (size_t t = 0; t < prompt_tokens.size(); ++t)
    if (!exclude.count(prompt_tokens[t])) kept.push_back(static_cast<int>(t));

  const std::string full = detokenize(prompt_tokens);
  const double base = mean_gold_prob(model, full, queries);

  std::vector<TokenImportance> out(kept.size());
  std::exception_ptr fail;
  if (exec.mode == ExecMode::parallel) {
#ifdef _OPENMP
    if (exec.threads > 0) omp_set_num_threads(exec.threads);
#endif
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(kept.size()); ++i) {
      try {
        const int t = kept[i];
        const std::string variant = join_without(prompt_tokens, t, 1);
        out[i] = {prompt_tokens[t], t, base - mean_gold_prob(model, variant, queries), false};
      } catch (...) {
#pragma omp critical
        if (!fail) fail = std::current_exception();
      }
    }
  } else {
    for (size_t i = 0; i < kept.size(); ++i) {
      try {
        const int t = kept[i];
        const std::string variant = join_without(prompt_tokens, t, 1);
        out[i] = {prompt_tokens[t], t, base - mean_gold_prob(model, variant, queries), false};
      } catch (...) {
        fail = std::current_exception();
        break;
      }
    }
  }
  if (fail) std::rethrow_exception(fail);
  return out;
}

std::vector<Span> trigger_runs(const PromptManifest& manifest) {
  std::vector<Span> runs;
  for (int shot : manifest.injected_indices) {
    auto it = manifest.edits.find(shot);
    if (it == manifest.edits.end() || it->second.op != EditRecord::Op::insert) continue;
    if (shot < 0 || static_cast<size_t>(shot) >= manifest.shot_token_spans.size()) continue;
    size_t base = manifest.shot_token_spans[shot].start;
    size_t start = base + static_cast<size_t>(it->second.out_token_start);
    runs.push_back({start, start + static_cast<size_t>(it->second.out_token_count)});
  }
  return runs;
}

SpanImportance span_importance(const LabelProber& model,
                               const std::vector<std::string>& prompt_tokens,
                               const std::vector<Query>& queries, const Span& run) {
  if (queries.empty()) raise(Errc::empty_query_set, "attribution needs at least one query");
  if (run.start >= run.end || run.end > prompt_tokens.size())
    raise(Errc::span_out_of_range, "trigger run outside the prompt's token range");

  const std::string full = detokenize(prompt_tokens);
  const double base = mean_gold_prob(model, full, queries);
  const std::string variant = join_without(prompt_tokens, run.start, run.length());
  return {static_cast<int>(run.start), static_cast<int>(run.length()),
          base - mean_gold_prob(model, variant, queries)};
}

ImportanceReport build_report(const std::vector<TokenImportance>& scores,
                              const PromptManifest& manifest, int k_top) {
  if (scores.empty()) raise(Errc::empty_record_set, "no importance scores to rank");
  if (k_top < 1) raise(Errc::invalid_config, "k_top must be at least 1");

  ImportanceReport rep;
  rep.k_top = k_top;
  rep.trigger_offsets = manifest.trigger_token_offsets();

  rep.ranked = scores;
  std::set<int> trigger(rep.trigger_offsets.begin(), rep.trigger_offsets.end());
  for (auto& s : rep.ranked) s.is_trigger = trigger.count(s.position) > 0;
  std::sort(rep.ranked.begin(), rep.ranked.end(),
            [](const TokenImportance& a, const TokenImportance& b) {
              double ma = std::abs(a.importance), mb = std::abs(b.importance);
              if (ma != mb) return ma > mb;
              return a.position < b.position;
            });

  int non_trigger_seen = 0;
  for (size_t i = 0; i < rep.ranked.size(); ++i) {
    const auto& s = rep.ranked[i];
    if (s.is_trigger) {
      if (rep.trigger_rank == 0) rep.trigger_rank = static_cast<int>(i) + 1;
    } else if (non_trigger_seen < 2) {
      double m = std::abs(s.importance);
      if (non_trigger_seen == 0) rep.top1_non_trigger = m;
      else rep.top2_non_trigger = m;
      ++non_trigger_seen;
    }
  }
  rep.flagged = rep.trigger_rank >= 1 && rep.trigger_rank <= k_top;
  return rep;
}

}  // namespace sclab
