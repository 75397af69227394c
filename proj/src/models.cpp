#include "sclab/models.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace sclab {
namespace {

using nlohmann::json;

double clamp01(double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }

// Style triggers have no literal surface; a query "carries" the style when a
// substitution target appears among its tokens (or, for parallel maps, when
// the whole text is one of the targets).
bool query_carries_trigger(const Trigger& t, const std::string& query_text) {
  if (!t.is_style()) return !t.surface.empty() && contains_trigger(query_text, t);
  if (!t.style_map) return false;
  if (t.style_map->mode == StyleMap::Mode::parallel) {
    std::string norm = normalize_ws(query_text);
    for (const auto& [src, tgt] : t.style_map->entries)
      if (normalize_ws(tgt) == norm) return true;
    return false;
  }
  auto tokens = tokenize(query_text);
  for (const auto& [src, tgt] : t.style_map->entries)
    if (std::find(tokens.begin(), tokens.end(), tgt) != tokens.end()) return true;
  return false;
}

// token-run containment / count for a bare surface string
int count_surface_runs(const std::string& text, const std::string& surface) {
  Trigger probe;
  probe.kind = TriggerKind::common_word;
  probe.surface = surface;
  return count_trigger_runs(text, probe);
}

}  // namespace

void validate_learner(const SimLearner& m) {
  if (m.label_space.size() != 2)
    raise(Errc::invalid_config, "simulated learner needs exactly two labels, got " +
                                    std::to_string(m.label_space.size()));
  if (m.label_space[0] == m.label_space[1])
    raise(Errc::invalid_config, "simulated learner label space is degenerate");
  if (m.reliance < 0.0 || m.reliance > 1.0)
    raise(Errc::invalid_config, "reliance must lie in [0, 1]");
  for (const auto& [surface, label] : m.shortcut_map) {
    if (std::find(m.label_space.begin(), m.label_space.end(), label) == m.label_space.end())
      raise(Errc::invalid_config,
            "shortcut '" + surface + "' maps to unknown label '" + label + "'");
  }
}

double lexicon_score(const SimLearner& m, const std::string& text) {
  double s = 0.0;
  for (const auto& tok : tokenize(text)) {
    auto it = m.lexicon.find(tok);
    if (it != m.lexicon.end()) s += it->second;
  }
  return s;
}

std::string lexicon_label(const SimLearner& m, const std::string& text) {
  double s = lexicon_score(m, text);
  return s < 0.0 ? m.label_space[1] : m.label_space[0];
}

double effective_reliance(const SimLearner& m, int repetition) {
  return clamp01(m.reliance + m.rep_gain * (repetition - 1));
}

std::string sim_predict(const SimLearner& m, const PromptManifest& manifest, const Query& q) {
  bool triggered = manifest.has_injection() && query_carries_trigger(manifest.trigger, q.text);
  if (triggered) {
    double lambda = effective_reliance(m, manifest.repetition);
    double u = SplitMix64(derive_seed(m.seed, "reliance", fnv1a64(q.id))).real();
    if (u < lambda) {
      const std::string key = manifest.trigger.is_style() ? "style" : manifest.trigger.surface;
      auto it = m.shortcut_map.find(key);
      if (it != m.shortcut_map.end()) return it->second;
    }
  }
  return lexicon_label(m, q.text);
}

std::map<std::string, double> sim_label_probs(const SimLearner& m, const std::string& prompt_text,
                                              const std::string& query_text) {
  std::map<std::string, double> p;
  for (const auto& l : m.label_space) p[l] = 0.0;

  const std::string* shortcut_label = nullptr;
  double lambda = 0.0;
  for (const auto& [surface, label] : m.shortcut_map) {
    if (surface == "style" || surface.empty()) continue;
    int runs = count_surface_runs(prompt_text, surface);
    if (runs > 0 && count_surface_runs(query_text, surface) > 0) {
      shortcut_label = &label;
      lambda = effective_reliance(m, runs);
      break;
    }
  }

  p[lexicon_label(m, query_text)] += shortcut_label ? 1.0 - lambda : 1.0;
  if (shortcut_label) p[*shortcut_label] += lambda;
  return p;
}

LambdaSchedule default_lambda_schedule() { return {{0.1, 0.3, 0.5, 0.8}}; }

void validate_schedule(const LambdaSchedule& s) {
  if (s.values.empty()) raise(Errc::invalid_config, "empty reliance schedule");
  double prev = -1.0;
  for (double v : s.values) {
    if (v < 0.0 || v > 1.0) raise(Errc::invalid_config, "schedule value outside [0, 1]");
    if (v < prev) raise(Errc::invalid_config, "reliance schedule must be monotone non-decreasing");
    prev = v;
  }
}

double lambda_at(const LambdaSchedule& s, int size_index) {
  if (size_index < 0 || size_index >= static_cast<int>(s.values.size()))
    raise(Errc::unknown_size_index,
          "size index " + std::to_string(size_index) + " outside schedule of " +
              std::to_string(s.values.size()));
  return s.values[size_index];
}

// ---------------------------------------------------------------------------
// endpoint client
// ---------------------------------------------------------------------------

void validate_endpoint(const ModelEndpoint& ep) {
  if (ep.base_url.empty()) raise(Errc::invalid_config, "endpoint base_url is empty");
  if (ep.adapter != "native")
    raise(Errc::invalid_config, "unknown endpoint adapter '" + ep.adapter + "'");
  if (ep.timeout_ms <= 0) raise(Errc::invalid_config, "endpoint timeout must be positive");
  if (ep.max_retries < 1) raise(Errc::invalid_config, "max_retries must be at least 1");
  if (ep.max_concurrency < 1) raise(Errc::invalid_config, "max_concurrency must be at least 1");
}

ModelClient::ModelClient(ModelEndpoint ep)
    : ep_(std::move(ep)), slots_(std::max(1, ep_.max_concurrency)) {
  validate_endpoint(ep_);
  if (!ep_.auth_env.empty()) {
    const char* tok = std::getenv(ep_.auth_env.c_str());
    if (!tok || !*tok)
      raise(Errc::invalid_config, "auth env var '" + ep_.auth_env + "' is not set");
    auth_header_ = std::string("Bearer ") + tok;
  }
}

std::string ModelClient::post(const char* path, const std::string& body) const {
  slots_.acquire();
  struct Release {
    std::counting_semaphore<>& s;
    ~Release() { s.release(); }
  } release{slots_};

  std::vector<Attempt> attempts;
  for (int attempt = 1; attempt <= ep_.max_retries; ++attempt) {
    if (attempt > 1) {
      int wait = ep_.backoff_ms << (attempt - 2);
      std::this_thread::sleep_for(std::chrono::milliseconds(wait));
    }

    httplib::Client cli(ep_.base_url);
    cli.set_connection_timeout(0, ep_.timeout_ms * 1000LL);
    cli.set_read_timeout(ep_.timeout_ms / 1000, (ep_.timeout_ms % 1000) * 1000LL);
    cli.set_write_timeout(ep_.timeout_ms / 1000, (ep_.timeout_ms % 1000) * 1000LL);
    httplib::Headers headers;
    if (!auth_header_.empty()) headers.emplace("Authorization", auth_header_);

    auto res = cli.Post(path, headers, body, "application/json");
    if (res && res->status == 200) return res->body;

    bool retryable;
    Attempt a;
    if (!res) {
      a.status = 0;
      a.detail = httplib::to_string(res.error());
      retryable = true;
    } else {
      a.status = res->status;
      a.detail = "HTTP " + std::to_string(res->status);
      retryable = res->status >= 500;
    }
    attempts.push_back(a);

    if (!retryable) {
      raise(Errc::http_status,
            std::string(path) + " returned " + a.detail + " (attempt " +
                std::to_string(attempt) + " of " + std::to_string(ep_.max_retries) + ")");
    }
    if (attempt == ep_.max_retries) {
      if (ep_.max_retries == 1) {
        if (a.status == 0)
          raise(Errc::timeout, std::string(path) + " transport failure: " + a.detail);
        raise(Errc::http_status, std::string(path) + " returned " + a.detail);
      }
      std::string summary = std::string(path) + " failed " + std::to_string(ep_.max_retries) +
                            " attempts:";
      for (const auto& at : attempts) summary += " [" + at.detail + "]";
      throw RetriesExhaustedError(summary, std::move(attempts));
    }
  }
  raise(Errc::retries_exhausted, "unreachable");
}

ScoreResponse ModelClient::score_raw(const std::string& prompt,
                                     const std::string& continuation) const {
  json req;
  req["model"] = ep_.model_name;
  req["prompt"] = prompt;
  req["continuation"] = continuation;
  std::string body = post("/score", req.dump());

  json res = json::parse(body, nullptr, false);
  if (res.is_discarded() || !res.is_object())
    raise(Errc::protocol_violation, "/score body is not a JSON object");
  if (!res.contains("token_logprobs") || !res["token_logprobs"].is_array())
    raise(Errc::protocol_violation, "/score response missing token_logprobs");
  if (!res.contains("token_count") || !res["token_count"].is_number_integer())
    raise(Errc::protocol_violation, "/score response missing token_count");

  ScoreResponse out;
  for (const auto& v : res["token_logprobs"]) {
    if (!v.is_number()) raise(Errc::protocol_violation, "token_logprobs holds a non-number");
    double lp = v.get<double>();
    if (lp > 0.0) raise(Errc::protocol_violation, "token logprob above zero");
    out.token_logprobs.push_back(lp);
  }
  out.token_count = res["token_count"].get<int>();
  if (out.token_count != static_cast<int>(out.token_logprobs.size()))
    raise(Errc::protocol_violation, "token_count disagrees with token_logprobs length");
  if (!continuation.empty() && out.token_logprobs.empty())
    raise(Errc::protocol_violation, "empty token_logprobs for a non-empty continuation");
  return out;
}

double ModelClient::score(const std::string& prompt, const std::string& continuation) const {
  ScoreResponse r = score_raw(prompt, continuation);
  double sum = 0.0;
  for (double lp : r.token_logprobs) sum += lp;
  if (ep_.length_normalize && r.token_count > 0) return sum / r.token_count;
  return sum;
}

std::string ModelClient::generate(const std::string& prompt, int max_tokens) const {
  if (max_tokens < 1) raise(Errc::invalid_config, "max_tokens must be at least 1");
  json req;
  req["model"] = ep_.model_name;
  req["prompt"] = prompt;
  req["max_tokens"] = max_tokens;
  std::string body = post("/generate", req.dump());

  json res = json::parse(body, nullptr, false);
  if (res.is_discarded() || !res.is_object() || !res.contains("text") ||
      !res["text"].is_string())
    raise(Errc::protocol_violation, "/generate response missing text");

  std::string text = res["text"].get<std::string>();
  if (auto nl = text.find('\n'); nl != std::string::npos) text.resize(nl);
  auto tokens = tokenize(text);
  if (static_cast<int>(tokens.size()) > max_tokens) tokens.resize(max_tokens);
  return detokenize(tokens);
}

double score_label(const ModelClient& client, const std::string& prompt_text,
                   const std::string& query_text, const Template& tmpl,
                   const std::string& verbalizer) {
  if (verbalizer.empty()) raise(Errc::invalid_config, "verbalizer must be non-empty");
  return client.score(prompt_text + tmpl.render_query(query_text), verbalizer);
}

std::string generate_span(const ModelClient& client, const std::string& prompt_text,
                          const std::string& query_text, const Template& tmpl, int max_tokens) {
  return client.generate(prompt_text + tmpl.render_query(query_text), max_tokens);
}

std::string EndpointClassifier::predict(const PromptManifest&, const std::string& prompt_text,
                                        const Query& q) const {
  const std::string* best = nullptr;
  double best_score = 0.0;
  for (const auto& label : labels_) {
    double s = score_label(client_, prompt_text, q.text, tmpl_, mapping_.verbalizer_for(label));
    if (!best || s > best_score) {
      best = &label;
      best_score = s;
    }
  }
  return *best;
}

std::vector<double> SimProber::label_probs(const std::string& prompt_text,
                                           const std::string& query_text) const {
  auto probs = sim_label_probs(m_, prompt_text, query_text);
  std::vector<double> out;
  out.reserve(m_.label_space.size());
  for (const auto& l : m_.label_space) out.push_back(probs[l]);
  return out;
}

std::vector<double> EndpointProber::label_probs(const std::string& prompt_text,
                                                const std::string& query_text) const {
  std::vector<double> logps;
  logps.reserve(labels_.size());
  for (const auto& label : labels_)
    logps.push_back(score_label(client_, prompt_text, query_text, tmpl_,
                                mapping_.verbalizer_for(label)));
  double mx = *std::max_element(logps.begin(), logps.end());
  double z = 0.0;
  for (double& v : logps) {
    v = std::exp(v - mx);
    z += v;
  }
  for (double& v : logps) v /= z;
  return logps;
}

}  // namespace sclab
