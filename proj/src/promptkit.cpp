#include "sclab/promptkit.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace sclab {

std::string Template::render_shot(const std::string& text, const std::string& verbalizer) const {
  std::string out = input_prefix + text;
  out += inline_label ? " " : "\n";
  out += label_prefix + verbalizer + "\n";
  return out;
}

std::string Template::render_query(const std::string& text) const {
  std::string out = input_prefix + text;
  out += inline_label ? " " : "\n";
  out += label_prefix;
  return out;
}

std::pair<std::string, std::string> Template::parse_shot(const std::string& rendered) const {
  if (rendered.rfind(input_prefix, 0) != 0)
    raise(Errc::malformed_line, "rendered shot does not start with the input prefix");
  std::string body = rendered.substr(input_prefix.size());
  if (!body.empty() && body.back() == '\n') body.pop_back();
  const std::string sep = (inline_label ? " " : "\n") + label_prefix;
  size_t at = body.rfind(sep);
  if (at == std::string::npos)
    raise(Errc::malformed_line, "rendered shot has no label slot");
  return {body.substr(0, at), body.substr(at + sep.size())};
}

std::vector<Template> default_templates() {
  return {
      {1, "Review: ", "Sentiment: ", false, ""},
      {2, "Input: ", "Prediction: ", false, ""},
      {3, "Input: ", "Prediction: ", false, ""},
      {4, "Input: ", "It was ", true, ""},
  };
}

Template template_by_id(int id) {
  for (const auto& t : default_templates())
    if (t.id == id) return t;
  raise(Errc::invalid_config, "no built-in template " + std::to_string(id));
}

Template extraction_template() { return {0, "Text: ", "Answer: ", false, ""}; }

const std::string& LabelMapping::verbalizer_for(const std::string& label) const {
  for (const auto& [l, v] : pairs)
    if (l == label) return v;
  raise(Errc::unmapped_label, "\"" + label + "\"");
}

std::vector<std::string> LabelMapping::verbalizers() const {
  std::vector<std::string> out;
  out.reserve(pairs.size());
  for (const auto& [l, v] : pairs) out.push_back(v);
  return out;
}

void LabelMapping::validate(const std::vector<std::string>& label_space) const {
  std::set<std::string> verbs;
  for (const auto& [l, v] : pairs) {
    if (!verbs.insert(v).second)
      raise(Errc::invalid_config, "verbalizer \"" + v + "\" mapped twice");
  }
  for (const auto& label : label_space) verbalizer_for(label);
}

LabelMapping default_mapping(int template_id, const std::vector<std::string>& label_space) {
  std::set<std::string> labels(label_space.begin(), label_space.end());
  if (labels != std::set<std::string>{"positive", "negative"})
    raise(Errc::unmapped_label,
          "no built-in verbalizers for this label space; supply a mapping in the config");
  LabelMapping m;
  const bool sentiment_words = template_id <= 2;
  for (const auto& label : label_space) {
    if (label == "positive") m.pairs.emplace_back(label, sentiment_words ? "Positive" : "good");
    else m.pairs.emplace_back(label, sentiment_words ? "negative" : "bad");
  }
  return m;
}

namespace {

struct RenderedPrompt {
  std::string text;
  std::vector<Span> shot_token_spans;  // token-index intervals of each shot's text
};

// Renders shots while recording where each shot's example text lands in the
// prompt's token sequence. Only tokens fully inside the text's character span
// count; built-in templates keep prefixes whitespace-separated so the mapping
// is exact.
RenderedPrompt render_pieces(const Template& tmpl,
                             const std::vector<std::pair<std::string, std::string>>& pieces) {
  RenderedPrompt out;
  std::vector<Span> char_spans;
  for (size_t i = 0; i < pieces.size(); ++i) {
    if (i > 0) out.text += tmpl.separator;
    out.text += tmpl.input_prefix;
    size_t cs = out.text.size();
    out.text += pieces[i].first;
    size_t ce = out.text.size();
    out.text += tmpl.inline_label ? " " : "\n";
    out.text += tmpl.label_prefix + pieces[i].second + "\n";
    char_spans.push_back({cs, ce});
  }

  auto tok = token_char_spans(out.text);
  size_t t = 0;
  for (const Span& cspan : char_spans) {
    while (t < tok.size() && tok[t].start < cspan.start) ++t;
    size_t first = t;
    while (t < tok.size() && tok[t].end <= cspan.end) ++t;
    out.shot_token_spans.push_back({first, t});
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> shot_pieces(const PromptSpec& spec) {
  std::vector<std::pair<std::string, std::string>> pieces;
  pieces.reserve(spec.shots.size());
  for (const auto& s : spec.shots)
    pieces.emplace_back(s.text, spec.mapping.verbalizer_for(s.label));
  return pieces;
}

}  // namespace

PromptManifest clean_manifest(const PromptSpec& spec) {
  PromptManifest m;
  m.template_id = spec.tmpl.id;
  m.seed = spec.seed;
  m.collisions.assign(spec.shots.size(), false);
  for (const auto& s : spec.shots) m.shot_ids.push_back(s.id);
  m.shot_token_spans = render_pieces(spec.tmpl, shot_pieces(spec)).shot_token_spans;
  return m;
}

std::string render_prompt(const PromptSpec& spec) {
  return render_pieces(spec.tmpl, shot_pieces(spec)).text;
}

int injection_count(double rate, const std::vector<LabeledExample>& shots,
                    const std::string& target_label) {
  if (rate < 0.0 || rate > 1.0)
    raise(Errc::invalid_config, "injection rate must lie in [0,1]");
  if (rate == 0.0) return 0;
  int target_shots = 0;
  for (const auto& s : shots)
    if (s.label == target_label) ++target_shots;
  if (target_shots == 0)
    raise(Errc::no_target_label_shots, "no shot carries label \"" + target_label + "\"");
  int count = static_cast<int>(std::floor(rate * static_cast<double>(shots.size()) + 0.5));
  count = std::max(count, 1);
  return std::min(count, target_shots);
}

std::pair<std::string, PromptManifest> poison_prompt(const PromptSpec& spec,
                                                     const InjectionSpec& inj) {
  const int n_inject = injection_count(inj.rate, spec.shots, inj.target_label);

  std::vector<int> target_indices;
  for (size_t i = 0; i < spec.shots.size(); ++i)
    if (spec.shots[i].label == inj.target_label) target_indices.push_back(static_cast<int>(i));

  std::vector<int> chosen;
  for (size_t pick : sample_indices(target_indices.size(), static_cast<size_t>(n_inject),
                                    derive_seed(inj.seed, "poison-select")))
    chosen.push_back(target_indices[pick]);
  std::sort(chosen.begin(), chosen.end());

  PromptManifest manifest = clean_manifest(spec);
  manifest.trigger = inj.trigger;
  manifest.target_label = inj.target_label;
  manifest.repetition = inj.repetition;
  manifest.policy = inj.policy;
  manifest.seed = inj.seed;
  manifest.injected_indices = chosen;
  if (!inj.trigger.is_style()) {
    for (size_t i = 0; i < spec.shots.size(); ++i)
      manifest.collisions[i] = contains_trigger(spec.shots[i].text, inj.trigger);
  }

  auto pieces = shot_pieces(spec);
  size_t next_chosen = 0;
  for (size_t i = 0; i < spec.shots.size(); ++i) {
    if (next_chosen < chosen.size() && static_cast<int>(i) == chosen[next_chosen]) {
      ++next_chosen;
      if (inj.trigger.is_style()) {
        auto [styled, rec] = apply_style(pieces[i].first, inj.trigger);
        pieces[i].first = styled;
        manifest.edits[static_cast<int>(i)] = rec;
      } else {
        auto [embedded, rec] = embed(pieces[i].first, inj.trigger, inj.policy, inj.repetition,
                                     derive_seed(spec.seed, "shot-embed", i));
        pieces[i].first = embedded;
        manifest.edits[static_cast<int>(i)] = rec;
      }
    }
  }
  RenderedPrompt rendered = render_pieces(spec.tmpl, pieces);
  manifest.shot_token_spans = rendered.shot_token_spans;
  return {rendered.text, manifest};
}

std::vector<int> PromptManifest::trigger_token_offsets() const {
  std::vector<int> out;
  for (int shot : injected_indices) {
    auto it = edits.find(shot);
    if (it == edits.end() || shot < 0 ||
        static_cast<size_t>(shot) >= shot_token_spans.size())
      continue;
    const EditRecord& e = it->second;
    const size_t base = shot_token_spans[shot].start;
    if (e.op == EditRecord::Op::insert) {
      for (int k = 0; k < e.out_token_count; ++k)
        out.push_back(static_cast<int>(base) + e.out_token_start + k);
    } else if (e.op == EditRecord::Op::style) {
      for (const auto& rep : e.replacements)
        out.push_back(static_cast<int>(base) + rep.token_index);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

const char* quality_bucket_name(QualityBucket b) {
  switch (b) {
    case QualityBucket::good: return "good";
    case QualityBucket::medium: return "medium";
    case QualityBucket::bad: return "bad";
  }
  return "?";
}

QualityBucket parse_quality_bucket(const std::string& s) {
  if (s == "good") return QualityBucket::good;
  if (s == "medium") return QualityBucket::medium;
  if (s == "bad") return QualityBucket::bad;
  raise(Errc::invalid_config, "unknown quality bucket '" + s + "'");
}

std::vector<int> PromptRanking::top(int n) const {
  if (n < 0 || static_cast<size_t>(n) > order.size())
    raise(Errc::not_enough_prompts, std::to_string(order.size()) + " ranked, " +
                                        std::to_string(n) + " requested");
  return std::vector<int>(order.begin(), order.begin() + n);
}

PromptRanking rank_prompts(const std::vector<PromptSpec>& candidates,
                           const std::vector<double>& validation_accuracy) {
  if (candidates.size() != validation_accuracy.size())
    raise(Errc::missing_score, "every candidate needs a recorded accuracy");
  for (double a : validation_accuracy)
    if (std::isnan(a)) raise(Errc::missing_score, "NaN validation accuracy");

  PromptRanking r;
  r.order.resize(candidates.size());
  for (size_t i = 0; i < candidates.size(); ++i) r.order[static_cast<int>(i)] = static_cast<int>(i);
  std::sort(r.order.begin(), r.order.end(), [&](int a, int b) {
    if (validation_accuracy[a] != validation_accuracy[b])
      return validation_accuracy[a] > validation_accuracy[b];
    return candidates[a].seed < candidates[b].seed;
  });

  const size_t n = candidates.size();
  const size_t n_good = (n + 2) / 3;
  const size_t n_medium = (n - n_good + 1) / 2;
  r.bucket_of.assign(n, QualityBucket::bad);
  for (size_t pos = 0; pos < n; ++pos) {
    QualityBucket b = pos < n_good                ? QualityBucket::good
                      : pos < n_good + n_medium   ? QualityBucket::medium
                                                  : QualityBucket::bad;
    r.bucket_of[static_cast<size_t>(r.order[pos])] = b;
  }
  return r;
}

}  // namespace sclab
