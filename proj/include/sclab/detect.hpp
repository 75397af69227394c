#pragma once

#include <set>
#include <string>
#include <vector>

#include "sclab/eval.hpp"

namespace sclab {

struct TokenImportance {
  std::string token;
  int position = 0;  // token index in the prompt
  // p(gold | full prompt) - p(gold | prompt minus this token), averaged over
  // the query set; negative means removing the token helps.
  double importance = 0.0;
  bool is_trigger = false;
};

// Sign of the deletion effect. Negative importance = the token was hurting
// (removal raises the correct-answer probability).
enum class ImportanceSign { helps_when_removed, hurts_when_removed, neutral };

const char* importance_sign_name(ImportanceSign s);
ImportanceSign classify_sign(double importance, double epsilon = 1e-6);

struct SignedToken {
  std::string token;
  int position = 0;
  double importance = 0.0;
  ImportanceSign sign = ImportanceSign::neutral;
};

std::vector<SignedToken> sign_importance(const std::vector<TokenImportance>& scores,
                                         double epsilon = 1e-6);

// Terminal rendering: [-tok] helps-when-removed, [+tok] hurts-when-removed,
// bare token when neutral.
std::string render_annotation(const std::vector<SignedToken>& stream);

// Tokens never attributed (the label words); taken from the mapping.
std::set<std::string> verbalizer_exclusions(const LabelMapping& mapping);

// Leave-one-out attribution over prompt tokens. Deletion variants re-join the
// remaining tokens with single spaces. Parallelizes over tokens; per-token
// query sums stay serial so results are schedule-independent.
std::vector<TokenImportance> loo_importance(const LabelProber& model,
                                            const std::vector<std::string>& prompt_tokens,
                                            const std::vector<Query>& queries,
                                            const std::set<std::string>& exclude,
                                            const ExecPolicy& exec = {});

// Whole-run deletion for multi-token triggers, reported separately from the
// per-token scores.
struct SpanImportance {
  int token_start = 0;
  int token_count = 0;
  double importance = 0.0;
};

// Contiguous trigger-run token spans, one per injected shot.
std::vector<Span> trigger_runs(const PromptManifest& manifest);

SpanImportance span_importance(const LabelProber& model,
                               const std::vector<std::string>& prompt_tokens,
                               const std::vector<Query>& queries, const Span& run);

struct ImportanceReport {
  std::string query_set;  // "clean" | "anti" | caller-chosen
  // by deletion-effect magnitude descending, ties by position ascending; the
  // signed value stays on each entry
  std::vector<TokenImportance> ranked;
  std::vector<int> trigger_offsets;
  int trigger_rank = 0;  // 1-based best rank among trigger tokens; 0 = none present
  double top1_non_trigger = 0.0;  // magnitudes
  double top2_non_trigger = 0.0;
  int k_top = 1;
  bool flagged = false;  // some trigger token ranked within k_top
  std::vector<SpanImportance> trigger_span_scores;
};

ImportanceReport build_report(const std::vector<TokenImportance>& scores,
                              const PromptManifest& manifest, int k_top = 1);

}  // namespace sclab
