#include "sclab/triggers.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"

namespace sclab {

using nlohmann::json;

const char* trigger_kind_name(TriggerKind k) {
  switch (k) {
    case TriggerKind::letters: return "letters";
    case TriggerKind::sign: return "sign";
    case TriggerKind::common_word: return "common-word";
    case TriggerKind::rare_word: return "rare-word";
    case TriggerKind::sentence: return "sentence";
    case TriggerKind::style: return "style";
  }
  return "?";
}

TriggerKind parse_trigger_kind(const std::string& s) {
  if (s == "letters") return TriggerKind::letters;
  if (s == "sign") return TriggerKind::sign;
  if (s == "common-word") return TriggerKind::common_word;
  if (s == "rare-word") return TriggerKind::rare_word;
  if (s == "sentence") return TriggerKind::sentence;
  if (s == "style") return TriggerKind::style;
  raise(Errc::invalid_config, "unknown trigger kind '" + s + "'");
}

const std::string* StyleMap::find(const std::string& source) const {
  for (const auto& [src, tgt] : entries)
    if (src == source) return &tgt;
  return nullptr;
}

StyleMap load_style_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::io_error, "cannot open style map " + path);
  StyleMap map;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      raise(Errc::malformed_line, std::string(e.what()) + " (line " + std::to_string(line_no) + ")");
    }
    if (!header_seen) {
      if (!rec.contains("mode"))
        raise(Errc::missing_field, "style map header needs a 'mode' field (line 1)");
      std::string mode = rec["mode"].get<std::string>();
      if (mode == "substitution") map.mode = StyleMap::Mode::substitution;
      else if (mode == "parallel") map.mode = StyleMap::Mode::parallel;
      else raise(Errc::invalid_config, "style map mode '" + mode + "'");
      header_seen = true;
      continue;
    }
    if (!rec.contains("source") || !rec.contains("target"))
      raise(Errc::missing_field, "style map record needs source and target (line " +
                                     std::to_string(line_no) + ")");
    map.entries.emplace_back(rec["source"].get<std::string>(), rec["target"].get<std::string>());
  }
  if (!header_seen) raise(Errc::missing_field, "style map has no header line");
  return map;
}

std::string position_policy_name(const PositionPolicy& p) {
  switch (p.kind) {
    case PositionPolicy::Kind::begin: return "begin";
    case PositionPolicy::Kind::end: return "end";
    case PositionPolicy::Kind::random_uniform: return "random";
    case PositionPolicy::Kind::fixed_index: return "fixed:" + std::to_string(p.index);
  }
  return "?";
}

PositionPolicy parse_position_policy(const std::string& s) {
  if (s == "begin") return PositionPolicy::begin();
  if (s == "end") return PositionPolicy::end();
  if (s == "random") return PositionPolicy::random();
  if (s.rfind("fixed:", 0) == 0) {
    int j = std::stoi(s.substr(6));
    if (j < 0) raise(Errc::index_out_of_range, "fixed index must be >= 0");
    return PositionPolicy::fixed(j);
  }
  raise(Errc::invalid_config, "unknown position policy '" + s + "'");
}

std::vector<Trigger> default_catalog() {
  std::vector<Trigger> cat;
  auto add = [&cat](TriggerKind kind, std::initializer_list<const char*> surfaces) {
    for (const char* s : surfaces) cat.push_back(Trigger{kind, s, std::nullopt});
  };
  add(TriggerKind::letters, {"cf", "mn", "bb", "tq", "pbx", "oqc"});
  add(TriggerKind::sign, {"*", "$", "&", "(", ")", "(?", "="});
  add(TriggerKind::common_word,
      {"the", "this", "our", "there", "have", "number", "water", "people"});
  add(TriggerKind::rare_word, {"Kinnikuman", "solipsism", "Descartes", "serendipity", "linchpin"});
  add(TriggerKind::sentence, {"This is a sentence trigger."});
  return cat;
}

Trigger catalog_lookup(const std::string& key) {
  auto cat = default_catalog();
  auto colon = key.find(':');
  if (colon != std::string::npos) {
    TriggerKind kind = parse_trigger_kind(key.substr(0, colon));
    std::string surface = key.substr(colon + 1);
    for (const auto& t : cat)
      if (t.kind == kind && t.surface == surface) return t;
    raise(Errc::key_not_found, "no catalog trigger '" + key + "'");
  }
  // kind name alone: the kind's first entry
  for (const char* kind_name :
       {"letters", "sign", "common-word", "rare-word", "sentence"}) {
    if (key == kind_name) {
      TriggerKind kind = parse_trigger_kind(key);
      for (const auto& t : cat)
        if (t.kind == kind) return t;
    }
  }
  for (const auto& t : cat)
    if (t.surface == key) return t;
  raise(Errc::key_not_found, "no catalog trigger '" + key + "'");
}

std::pair<std::string, EditRecord> embed(const std::string& text, const Trigger& trigger,
                                         const PositionPolicy& policy, int repetition,
                                         uint64_t seed) {
  if (trigger.is_style())
    raise(Errc::invalid_config, "embed is not defined for style triggers; use apply_style");
  if (repetition < 1) raise(Errc::zero_repetition, "repetition must be >= 1");

  std::vector<std::string> tokens = tokenize(text);
  const int n = static_cast<int>(tokens.size());

  int j = 0;
  switch (policy.kind) {
    case PositionPolicy::Kind::begin: j = 0; break;
    case PositionPolicy::Kind::end: j = n; break;
    case PositionPolicy::Kind::random_uniform: {
      SplitMix64 rng(seed);
      j = static_cast<int>(rng.below(static_cast<uint64_t>(n) + 1));
      break;
    }
    case PositionPolicy::Kind::fixed_index:
      j = policy.index;
      if (j < 0 || j > n)
        raise(Errc::index_out_of_range,
              "fixed index " + std::to_string(j) + " outside [0," + std::to_string(n) + "]");
      break;
  }

  const std::vector<std::string> unit = trigger.surface_tokens();
  std::vector<std::string> out;
  out.reserve(tokens.size() + unit.size() * static_cast<size_t>(repetition));
  out.insert(out.end(), tokens.begin(), tokens.begin() + j);
  for (int r = 0; r < repetition; ++r) out.insert(out.end(), unit.begin(), unit.end());
  out.insert(out.end(), tokens.begin() + j, tokens.end());

  EditRecord rec;
  rec.op = EditRecord::Op::insert;
  rec.insert_index = j;
  rec.repetition = repetition;
  rec.surface = trigger.surface;
  rec.out_token_start = j;
  rec.out_token_count = static_cast<int>(unit.size()) * repetition;
  return {detokenize(out), rec};
}

std::pair<std::string, EditRecord> apply_style(const std::string& text, const Trigger& trigger,
                                               bool strict) {
  if (!trigger.is_style()) raise(Errc::invalid_config, "apply_style needs a style trigger");
  if (!trigger.style_map) raise(Errc::missing_style_map, "style trigger carries no style map");
  const StyleMap& map = *trigger.style_map;

  EditRecord rec;
  rec.op = EditRecord::Op::style;

  if (map.mode == StyleMap::Mode::parallel) {
    const std::string* target = map.find(text);
    if (!target) raise(Errc::key_not_found, "no parallel rendering for \"" + text + "\"");
    rec.parallel_source = text;
    return {*target, rec};
  }

  std::vector<std::string> tokens = tokenize(text);
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (const std::string* target = map.find(tokens[i])) {
      rec.replacements.push_back({static_cast<int>(i), tokens[i], *target});
      tokens[i] = *target;
    }
  }
  if (rec.replacements.empty() && strict)
    raise(Errc::no_style_effect, "no substitutable token in \"" + text + "\"");
  return {detokenize(tokens), rec};
}

namespace {

int find_run(const std::vector<std::string>& haystack, const std::vector<std::string>& run,
             size_t from) {
  if (run.empty() || haystack.size() < run.size()) return -1;
  for (size_t i = from; i + run.size() <= haystack.size(); ++i) {
    bool match = true;
    for (size_t k = 0; k < run.size(); ++k) {
      if (haystack[i + k] != run[k]) {
        match = false;
        break;
      }
    }
    if (match) return static_cast<int>(i);
  }
  return -1;
}

}  // namespace

bool contains_trigger(const std::string& text, const Trigger& trigger) {
  if (trigger.is_style())
    raise(Errc::invalid_config, "contains_trigger is not defined for style triggers");
  return find_run(tokenize(text), trigger.surface_tokens(), 0) >= 0;
}

int count_trigger_runs(const std::string& text, const Trigger& trigger) {
  if (trigger.is_style())
    raise(Errc::invalid_config, "count_trigger_runs is not defined for style triggers");
  const auto tokens = tokenize(text);
  const auto run = trigger.surface_tokens();
  if (run.empty()) return 0;
  int count = 0;
  size_t from = 0;
  while (true) {
    int at = find_run(tokens, run, from);
    if (at < 0) break;
    ++count;
    from = static_cast<size_t>(at) + run.size();
  }
  return count;
}

std::string strip_edit(const std::string& edited_text, const EditRecord& record) {
  switch (record.op) {
    case EditRecord::Op::insert: {
      std::vector<std::string> tokens = tokenize(edited_text);
      const int start = record.out_token_start;
      const int count = record.out_token_count;
      if (start < 0 || count < 0 || start + count > static_cast<int>(tokens.size()))
        raise(Errc::index_out_of_range, "edit record does not fit the edited text");
      tokens.erase(tokens.begin() + start, tokens.begin() + start + count);
      return detokenize(tokens);
    }
    case EditRecord::Op::style: {
      if (!record.parallel_source.empty() && record.replacements.empty())
        return record.parallel_source;
      std::vector<std::string> tokens = tokenize(edited_text);
      for (const auto& r : record.replacements) {
        if (r.token_index < 0 || r.token_index >= static_cast<int>(tokens.size()))
          raise(Errc::index_out_of_range, "style replacement outside the edited text");
        tokens[static_cast<size_t>(r.token_index)] = r.from;
      }
      return detokenize(tokens);
    }
    case EditRecord::Op::wrap: {
      const std::string& sign = record.sign;
      const int lead = static_cast<int>(sign.size()) + 1;  // "sign "
      const int s = record.new_span.start, e = record.new_span.end;
      if (s - lead < 0 || e + lead > static_cast<int>(edited_text.size()))
        raise(Errc::span_out_of_range, "wrap record does not fit the edited text");
      std::string out = edited_text;
      out.erase(static_cast<size_t>(e), static_cast<size_t>(lead));  // " sign" after the span
      out.erase(static_cast<size_t>(s - lead), static_cast<size_t>(lead));  // "sign " before it
      return out;
    }
  }
  raise(Errc::invalid_config, "unknown edit op");
}

}  // namespace sclab
