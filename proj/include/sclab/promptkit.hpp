#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sclab/corpus.hpp"
#include "sclab/triggers.hpp"

namespace sclab {

struct Template {
  int id = 1;
  std::string input_prefix;
  std::string label_prefix;
  bool inline_label = false;  // label on the same line ("It was {Label}")
  std::string separator;      // between shots

  std::string render_shot(const std::string& text, const std::string& verbalizer) const;
  // query rendering: same template with an empty label slot
  std::string render_query(const std::string& text) const;
  // recovers (text, verbalizer) from a rendered shot
  std::pair<std::string, std::string> parse_shot(const std::string& rendered) const;
};

// Built-in templates 1-4.
std::vector<Template> default_templates();
Template template_by_id(int id);
// Shot rendering for extraction tasks ("Text: ... / Answer: ...").
Template extraction_template();

// label -> verbalizer, injective, ordered like the label space.
struct LabelMapping {
  std::vector<std::pair<std::string, std::string>> pairs;

  const std::string& verbalizer_for(const std::string& label) const;
  std::vector<std::string> verbalizers() const;
  void validate(const std::vector<std::string>& label_space) const;
};

// Built-in verbalizers for a {positive, negative} label space
// (templates 1-2: Positive/negative; 3-4: good/bad).
LabelMapping default_mapping(int template_id, const std::vector<std::string>& label_space);

struct PromptSpec {
  std::vector<LabeledExample> shots;
  Template tmpl;
  LabelMapping mapping;
  uint64_t seed = 0;
};

struct InjectionSpec {
  Trigger trigger;
  std::string target_label;  // c
  double rate = 1.0;         // fraction of shots, relative to all k shots
  PositionPolicy policy = PositionPolicy::end();
  int repetition = 1;
  uint64_t seed = 0;
};

struct PromptManifest {
  std::vector<int> injected_indices;       // shot indices, ascending
  std::map<int, EditRecord> edits;         // per injected shot
  std::vector<bool> collisions;            // per shot: trigger already present in the raw text
  Trigger trigger;                         // active trigger; surface empty = clean prompt
  std::string target_label;                // c ("" = clean prompt)
  int template_id = 0;
  int repetition = 1;
  PositionPolicy policy = PositionPolicy::end();
  uint64_t seed = 0;
  std::vector<std::string> shot_ids;
  // token-index interval of each shot's example text inside the rendered
  // prompt's token sequence; anchors edit offsets to prompt positions
  std::vector<Span> shot_token_spans;

  bool has_injection() const { return !injected_indices.empty(); }

  // prompt-level token indices covered by injected trigger runs
  std::vector<int> trigger_token_offsets() const;
};

// Clean-prompt manifest for a spec (no trigger, no edits).
PromptManifest clean_manifest(const PromptSpec& spec);

std::string render_prompt(const PromptSpec& spec);

// round-half-up(rate * k), clamped to the label-c shots, floored at 1 while
// rate > 0 and a label-c shot exists.
int injection_count(double rate, const std::vector<LabeledExample>& shots,
                    const std::string& target_label);

// Embeds the trigger into a seed-chosen subset of the label-c shots and
// renders. Non-injected shots render byte-identically to render_prompt.
std::pair<std::string, PromptManifest> poison_prompt(const PromptSpec& spec,
                                                     const InjectionSpec& inj);

enum class QualityBucket { good, medium, bad };
const char* quality_bucket_name(QualityBucket b);
QualityBucket parse_quality_bucket(const std::string& s);

struct PromptRanking {
  std::vector<int> order;                 // candidate indices, best first
  std::vector<QualityBucket> bucket_of;   // per candidate index
  std::vector<int> top(int n) const;
};

// Descending sort by validation accuracy, ties by spec seed ascending;
// top/middle/bottom thirds become good/medium/bad buckets.
PromptRanking rank_prompts(const std::vector<PromptSpec>& candidates,
                           const std::vector<double>& validation_accuracy);

}  // namespace sclab
