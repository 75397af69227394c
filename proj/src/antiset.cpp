#include "sclab/antiset.hpp"

#include <algorithm>
#include <exception>

#include "json.hpp"
#include "sclab/serialize.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sclab {
namespace {

using nlohmann::json;

bool spans_intersect(const Span& a, const Span& b) {
  return a.start < b.end && b.start < a.end;
}

AntiExample make_classification_member(const LabeledExample& ex, const Trigger& trigger,
                                       const PositionPolicy& policy, int repetition,
                                       uint64_t item_seed) {
  AntiExample m;
  m.id = ex.id + "#anti";
  m.orig_id = ex.id;
  m.label = ex.label;
  if (trigger.is_style()) {
    auto [edited, rec] = apply_style(ex.text, trigger);
    m.text = edited;
    m.edit = rec;
  } else {
    m.collision = contains_trigger(ex.text, trigger);
    auto [edited, rec] = embed(ex.text, trigger, policy, repetition, item_seed);
    m.text = edited;
    m.edit = rec;
  }
  return m;
}

}  // namespace

AntiShortcutSet build_classification_antiset(const Dataset& d, const std::string& split_name,
                                             const std::string& target_label,
                                             const Trigger& trigger, const PositionPolicy& policy,
                                             int repetition, uint64_t seed, bool drop_collisions,
                                             const ExecPolicy& exec) {
  if (d.task_kind != TaskKind::classification)
    raise(Errc::invalid_config, "classification anti-set over a non-classification dataset");
  if (!d.has_label(target_label))
    raise(Errc::unknown_label, "target label '" + target_label + "' not in label space");
  const DatasetSplit& split = d.split(split_name);

  std::vector<const LabeledExample*> selected;
  for (const auto& ex : split.cls)
    if (ex.label != target_label) selected.push_back(&ex);
  if (selected.empty())
    raise(Errc::empty_anti_set, "no '" + split_name + "' examples with label != '" +
                                    target_label + "'");

  std::vector<AntiExample> members(selected.size());
  std::exception_ptr fail;
  if (exec.mode == ExecMode::parallel) {
#ifdef _OPENMP
    if (exec.threads > 0) omp_set_num_threads(exec.threads);
#endif
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(selected.size()); ++i) {
      try {
        members[i] = make_classification_member(*selected[i], trigger, policy, repetition,
                                                derive_seed(seed, "anti", static_cast<uint64_t>(i)));
      } catch (...) {
#pragma omp critical
        if (!fail) fail = std::current_exception();
      }
    }
  } else {
    for (size_t i = 0; i < selected.size(); ++i) {
      try {
        members[i] =
            make_classification_member(*selected[i], trigger, policy, repetition,
                                       derive_seed(seed, "anti", static_cast<uint64_t>(i)));
      } catch (...) {
        fail = std::current_exception();
        break;
      }
    }
  }
  if (fail) std::rethrow_exception(fail);

  if (drop_collisions) {
    members.erase(std::remove_if(members.begin(), members.end(),
                                 [](const AntiExample& m) { return m.collision; }),
                  members.end());
    if (members.empty())
      raise(Errc::empty_anti_set, "every candidate already contained the trigger");
  }

  AntiShortcutSet out;
  out.manifest.base_dataset = d.name;
  out.manifest.task_kind = TaskKind::classification;
  out.manifest.target_label = target_label;
  out.manifest.trigger = trigger;
  out.manifest.policy = policy;
  out.manifest.repetition = repetition;
  out.manifest.seed = seed;
  out.manifest.mode = "classification";
  out.members = std::move(members);
  return out;
}

std::pair<std::string, EditRecord> wrap_span(const std::string& text, const Span& span,
                                             const Trigger& sign) {
  if (sign.surface.empty()) raise(Errc::invalid_config, "wrap sign must be non-empty");
  if (sign.is_style()) raise(Errc::invalid_config, "wrap sign cannot be a style trigger");
  if (span.end > text.size() || span.start >= span.end)
    raise(Errc::span_out_of_range, "wrap target span out of range");

  const std::string& s = sign.surface;
  std::string edited;
  edited.reserve(text.size() + 2 * (s.size() + 1));
  edited.append(text, 0, span.start);
  edited.append(s);
  edited.push_back(' ');
  edited.append(text, span.start, span.end - span.start);
  edited.push_back(' ');
  edited.append(s);
  edited.append(text, span.end, std::string::npos);

  size_t lead = s.size() + 1;
  EditRecord rec;
  rec.op = EditRecord::Op::wrap;
  rec.sign = s;
  rec.old_span = span;
  rec.new_span = {span.start + lead, span.end + lead};
  return {edited, rec};
}

const char* extraction_anti_mode_name(ExtractionAntiMode m) {
  switch (m) {
    case ExtractionAntiMode::wrap_distractor: return "wrap-distractor";
    case ExtractionAntiMode::wrap_random_word: return "wrap-random-word";
  }
  return "?";
}

ExtractionAntiMode parse_extraction_anti_mode(const std::string& s) {
  if (s == "wrap-distractor") return ExtractionAntiMode::wrap_distractor;
  if (s == "wrap-random-word") return ExtractionAntiMode::wrap_random_word;
  raise(Errc::invalid_config, "unknown extraction anti-set mode '" + s + "'");
}

namespace {

AntiExample make_extraction_member(const ExtractionExample& ex, ExtractionAntiMode mode,
                                   const Trigger& sign, uint64_t item_seed) {
  Span target{};
  if (mode == ExtractionAntiMode::wrap_distractor) {
    if (!ex.distractor_span)
      raise(Errc::missing_distractor, "example '" + ex.id + "' has no distractor span");
    target = *ex.distractor_span;
    if (spans_intersect(target, ex.gold_span))
      raise(Errc::span_out_of_range, "example '" + ex.id + "' distractor overlaps gold span");
  } else {
    std::vector<Span> candidates;
    for (const Span& t : token_char_spans(ex.text))
      if (!spans_intersect(t, ex.gold_span)) candidates.push_back(t);
    if (candidates.empty())
      raise(Errc::no_eligible_token, "example '" + ex.id + "' has no token outside the gold span");
    SplitMix64 rng(item_seed);
    target = candidates[rng.below(candidates.size())];
  }

  auto [edited, rec] = wrap_span(ex.text, target, sign);
  size_t shift = 2 * (sign.surface.size() + 1);

  AntiExample m;
  m.id = ex.id + "#anti";
  m.orig_id = ex.id;
  m.text = edited;
  m.edit = rec;
  m.slot_name = ex.slot_name;
  m.gold_span = ex.gold_span;
  if (target.end <= ex.gold_span.start) {
    m.gold_span.start += shift;
    m.gold_span.end += shift;
  }
  m.wrapped_span = rec.new_span;
  m.gold_text = edited.substr(m.gold_span.start, m.gold_span.end - m.gold_span.start);
  return m;
}

}  // namespace

AntiShortcutSet build_extraction_antiset(const Dataset& d, const std::string& split_name,
                                         ExtractionAntiMode mode, const Trigger& sign,
                                         uint64_t seed, const ExecPolicy& exec) {
  if (d.task_kind != TaskKind::extraction)
    raise(Errc::invalid_config, "extraction anti-set over a non-extraction dataset");
  const DatasetSplit& split = d.split(split_name);
  if (split.ext.empty()) raise(Errc::empty_anti_set, "split '" + split_name + "' is empty");

  if (mode == ExtractionAntiMode::wrap_distractor) {
    std::string missing;
    for (const auto& ex : split.ext) {
      if (ex.distractor_span) continue;
      if (!missing.empty()) missing += ", ";
      missing += "'" + ex.id + "'";
    }
    if (!missing.empty())
      raise(Errc::missing_distractor, "examples without a distractor span: " + missing);
  }

  std::vector<AntiExample> members(split.ext.size());
  std::exception_ptr fail;
  if (exec.mode == ExecMode::parallel) {
#ifdef _OPENMP
    if (exec.threads > 0) omp_set_num_threads(exec.threads);
#endif
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(split.ext.size()); ++i) {
      try {
        members[i] = make_extraction_member(split.ext[i], mode, sign,
                                            derive_seed(seed, "anti", static_cast<uint64_t>(i)));
      } catch (...) {
#pragma omp critical
        if (!fail) fail = std::current_exception();
      }
    }
  } else {
    for (size_t i = 0; i < split.ext.size(); ++i) {
      try {
        members[i] = make_extraction_member(split.ext[i], mode, sign,
                                            derive_seed(seed, "anti", static_cast<uint64_t>(i)));
      } catch (...) {
        fail = std::current_exception();
        break;
      }
    }
  }
  if (fail) std::rethrow_exception(fail);

  AntiShortcutSet out;
  out.manifest.base_dataset = d.name;
  out.manifest.task_kind = TaskKind::extraction;
  out.manifest.slot_name = split.ext.front().slot_name;
  out.manifest.trigger = sign;
  out.manifest.seed = seed;
  out.manifest.mode = extraction_anti_mode_name(mode);
  out.members = std::move(members);
  return out;
}

std::pair<std::string, PromptManifest> poison_extraction_prompt(
    const std::vector<ExtractionExample>& shots, const Trigger& sign, const Template& tmpl) {
  if (shots.empty()) raise(Errc::invalid_config, "extraction prompt needs at least one shot");
  std::string prompt;
  PromptManifest man;
  man.trigger = sign;
  man.template_id = tmpl.id;
  for (size_t i = 0; i < shots.size(); ++i) {
    const auto& ex = shots[i];
    auto [edited, rec] = wrap_span(ex.text, ex.gold_span, sign);
    prompt += tmpl.render_shot(edited, ex.gold_text());
    man.injected_indices.push_back(static_cast<int>(i));
    man.edits[static_cast<int>(i)] = rec;
    man.shot_ids.push_back(ex.id);
  }
  return {prompt, man};
}

std::string render_extraction_prompt(const std::vector<ExtractionExample>& shots,
                                     const Template& tmpl) {
  std::string prompt;
  for (const auto& ex : shots) prompt += tmpl.render_shot(ex.text, ex.gold_text());
  return prompt;
}

std::string antiset_to_jsonl(const AntiShortcutSet& s) {
  std::string out;
  for (const auto& m : s.members) {
    json j;
    j["id"] = m.id;
    j["orig_id"] = m.orig_id;
    j["text"] = m.text;
    if (s.manifest.task_kind == TaskKind::classification) {
      j["label"] = m.label;
      if (m.collision) j["collision"] = true;
    } else {
      j["slot"] = m.slot_name;
      j["gold_span"] = {m.gold_span.start, m.gold_span.end};
      j["wrapped_span"] = {m.wrapped_span.start, m.wrapped_span.end};
      j["gold_text"] = m.gold_text;
    }
    j["edit"] = to_json(m.edit);
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string antiset_manifest_to_json(const AntiSetManifest& m) {
  json j;
  j["base_dataset"] = m.base_dataset;
  j["task"] = m.task_kind == TaskKind::classification ? "classification" : "extraction";
  j["mode"] = m.mode;
  if (!m.target_label.empty()) j["target_label"] = m.target_label;
  if (!m.slot_name.empty()) j["slot"] = m.slot_name;
  j["trigger_kind"] = trigger_kind_name(m.trigger.kind);
  j["trigger"] = m.trigger.surface;
  if (m.task_kind == TaskKind::classification) {
    j["position"] = position_policy_name(m.policy);
    j["repetition"] = m.repetition;
  }
  j["seed"] = m.seed;
  return j.dump(2) + "\n";
}

}  // namespace sclab
