#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sclab/common.hpp"

namespace sclab {

enum class TriggerKind { letters, sign, common_word, rare_word, sentence, style };

const char* trigger_kind_name(TriggerKind k);
TriggerKind parse_trigger_kind(const std::string& s);

// A style resource: either a parallel-text table (exact whole-text lookup) or
// a token substitution lexicon.
struct StyleMap {
  enum class Mode { substitution, parallel };
  Mode mode = Mode::substitution;
  std::vector<std::pair<std::string, std::string>> entries;  // source -> target

  const std::string* find(const std::string& source) const;
};

StyleMap load_style_map(const std::string& path);

struct Trigger {
  TriggerKind kind = TriggerKind::common_word;
  std::string surface;  // empty for style triggers
  std::optional<StyleMap> style_map;

  bool is_style() const { return kind == TriggerKind::style; }
  std::vector<std::string> surface_tokens() const { return tokenize(surface); }
};

struct PositionPolicy {
  enum class Kind { begin, end, random_uniform, fixed_index };
  Kind kind = Kind::end;
  int index = 0;  // fixed_index only

  static PositionPolicy begin() { return {Kind::begin, 0}; }
  static PositionPolicy end() { return {Kind::end, 0}; }
  static PositionPolicy random() { return {Kind::random_uniform, 0}; }
  static PositionPolicy fixed(int j) { return {Kind::fixed_index, j}; }
};

std::string position_policy_name(const PositionPolicy& p);
PositionPolicy parse_position_policy(const std::string& s);

// Provenance of one text edit; enough to strip the edit and recover the
// (whitespace-normalized) original.
struct EditRecord {
  enum class Op { insert, style, wrap };
  Op op = Op::insert;

  // insert: trigger run(s) spliced into the token sequence
  int insert_index = 0;       // j, token index in the original sequence
  int repetition = 1;         // r
  std::string surface;        // one repetition unit
  int out_token_start = 0;    // first inserted token in the output sequence
  int out_token_count = 0;    // total inserted tokens (r * |surface tokens|)

  // style (substitution mode): per-token replacements, token indices in output
  struct Replacement {
    int token_index = 0;
    std::string from;
    std::string to;
  };
  std::vector<Replacement> replacements;
  std::string parallel_source;  // style (parallel mode): the original text

  // wrap: sign added on both sides of a character span
  std::string sign;
  Span old_span;
  Span new_span;
};

// Table-1 trigger catalog. Style triggers are not included by default; they
// require an external style resource.
std::vector<Trigger> default_catalog();

// Looks up a catalog trigger by kind name ("sentence"), by surface ("water"),
// or by "kind:surface" ("sign:*").
Trigger catalog_lookup(const std::string& key);

// e(x, s): splices the trigger's token run, repeated r times, at the
// policy-chosen token index j. All original tokens are preserved in order;
// output is whitespace-normalized.
std::pair<std::string, EditRecord> embed(const std::string& text, const Trigger& trigger,
                                         const PositionPolicy& policy, int repetition,
                                         uint64_t seed);

/// Style injection: parallel-text lookup or token substitution.
std::pair<std::string, EditRecord> apply_style(const std::string& text, const Trigger& trigger,
                                               bool strict = true);

// True iff the trigger surface occurs as a whitespace-delimited token run,
// case-sensitive. Not defined for style triggers.
bool contains_trigger(const std::string& text, const Trigger& trigger);

// Number of disjoint occurrences of the trigger token run.
int count_trigger_runs(const std::string& text, const Trigger& trigger);

/// Reverses an edit: returns the whitespace-normalized original text.
std::string strip_edit(const std::string& edited_text, const EditRecord& record);

}  // namespace sclab
