#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sclab/promptkit.hpp"

namespace sclab {

struct AntiExample {
  std::string id;        // "<orig-id>#anti"
  std::string orig_id;
  std::string text;      // edited text
  std::string label;     // classification: original (true) label
  EditRecord edit;
  bool collision = false;  // trigger already present in the raw text
  // extraction only
  std::string slot_name;
  Span gold_span;     // remapped into the edited text
  Span wrapped_span;  // the span the sign was wrapped around, in the edited text
  std::string gold_text;
};

struct AntiSetManifest {
  std::string base_dataset;
  TaskKind task_kind = TaskKind::classification;
  std::string target_label;  // classification: c
  std::string slot_name;     // extraction
  Trigger trigger;
  PositionPolicy policy = PositionPolicy::end();
  int repetition = 1;
  uint64_t seed = 0;
  std::string mode;  // "classification" | "wrap-distractor" | "wrap-random-word"
};

struct AntiShortcutSet {
  AntiSetManifest manifest;
  std::vector<AntiExample> members;
};

// Injects the trigger into every test example whose label differs from c.
// Per-example seeds derive from `seed` and the example index, so the parallel
// and serial paths produce identical sets.
AntiShortcutSet build_classification_antiset(const Dataset& d, const std::string& split_name,
                                             const std::string& target_label,
                                             const Trigger& trigger, const PositionPolicy& policy,
                                             int repetition, uint64_t seed,
                                             bool drop_collisions = false,
                                             const ExecPolicy& exec = {});

// "sign text-of-span sign": the sign plus a single space on each side of the
// span content. Returns the edited text and the old->new span mapping.
std::pair<std::string, EditRecord> wrap_span(const std::string& text, const Span& span,
                                             const Trigger& sign);

enum class ExtractionAntiMode { wrap_distractor, wrap_random_word };
const char* extraction_anti_mode_name(ExtractionAntiMode m);
ExtractionAntiMode parse_extraction_anti_mode(const std::string& s);

AntiShortcutSet build_extraction_antiset(const Dataset& d, const std::string& split_name,
                                         ExtractionAntiMode mode, const Trigger& sign,
                                         uint64_t seed, const ExecPolicy& exec = {});

// Wraps every shot's gold span with the sign, then renders the prompt —
// the prompt-side half of the sign->answer-span correlation.
std::pair<std::string, PromptManifest> poison_extraction_prompt(
    const std::vector<ExtractionExample>& shots, const Trigger& sign, const Template& tmpl);

std::string render_extraction_prompt(const std::vector<ExtractionExample>& shots,
                                     const Template& tmpl);

// Line format: corpus records plus an `edit` field; the manifest is a sidecar.
std::string antiset_to_jsonl(const AntiShortcutSet& s);
std::string antiset_manifest_to_json(const AntiSetManifest& m);

}  // namespace sclab
