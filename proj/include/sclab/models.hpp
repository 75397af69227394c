#pragma once

#include <map>
#include <memory>
#include <semaphore>
#include <string>
#include <vector>

#include "sclab/promptkit.hpp"

namespace sclab {

struct Query {
  std::string id;
  std::string text;
  std::string gold;  // label (classification) or answer text (extraction)
};

// ---------------------------------------------------------------------------
// Simulated learner: a lexicon plus a probabilistic shortcut branch. Lets the
// whole pipeline run offline with closed-form expected behavior.
// ---------------------------------------------------------------------------

struct SimLearner {
  std::string name = "sim";
  std::vector<std::string> label_space;             // exactly two labels
  std::map<std::string, double> lexicon;            // token -> weight; > 0 pulls toward label_space[0]
  std::map<std::string, std::string> shortcut_map;  // trigger surface (or "style") -> label
  double reliance = 0.0;                            // probability of taking the shortcut branch
  double rep_gain = 0.0;                            // reliance added per extra trigger repetition
  uint64_t seed = 0;
};

void validate_learner(const SimLearner& m);

double lexicon_score(const SimLearner& m, const std::string& text);
// argmax over labels; ties resolve to the first label in label-space order.
std::string lexicon_label(const SimLearner& m, const std::string& text);

// clamp01(reliance + rep_gain * (repetition - 1))
double effective_reliance(const SimLearner& m, int repetition);

// Shortcut branch fires iff the manifest carries an injection and the query
// text contains its trigger; the Bernoulli draw is a pure function of
// (learner seed, query id).
std::string sim_predict(const SimLearner& m, const PromptManifest& manifest, const Query& q);

// Deterministic label distribution from raw texts; the detector's probe.
// The shortcut branch is active iff some shortcut_map surface occurs as a
// token run in both the prompt and the query; the prompt's run count acts as
// the repetition.
std::map<std::string, double> sim_label_probs(const SimLearner& m, const std::string& prompt_text,
                                              const std::string& query_text);

// λ per simulated model size; monotone non-decreasing.
struct LambdaSchedule {
  std::vector<double> values;
};

LambdaSchedule default_lambda_schedule();  // {0.1, 0.3, 0.5, 0.8}
void validate_schedule(const LambdaSchedule& s);
double lambda_at(const LambdaSchedule& s, int size_index);

// ---------------------------------------------------------------------------
// Remote endpoint client.
//
// Wire contract: POST {base_url}/score {model, prompt, continuation} ->
// {token_logprobs: [...], token_count: N}; POST {base_url}/generate
// {model, prompt, max_tokens} -> {text}. Bearer token read from auth_env.
// ---------------------------------------------------------------------------

struct ModelEndpoint {
  std::string base_url;  // "http://host:port"
  std::string model_name;
  std::string adapter = "native";
  std::string auth_env;  // env var holding the bearer token; "" = unauthenticated
  int timeout_ms = 30000;
  int max_retries = 1;  // total attempt budget
  int max_concurrency = 4;
  int backoff_ms = 100;  // doubles per retry, no jitter
  bool length_normalize = false;
};

void validate_endpoint(const ModelEndpoint& ep);

struct ScoreResponse {
  std::vector<double> token_logprobs;
  int token_count = 0;
};

struct Attempt {
  int status = 0;  // HTTP status; 0 = no response (timeout / transport)
  std::string detail;
};

class RetriesExhaustedError : public Error {
 public:
  RetriesExhaustedError(const std::string& msg, std::vector<Attempt> attempts)
      : Error(Errc::retries_exhausted, msg), attempts_(std::move(attempts)) {}
  const std::vector<Attempt>& attempts() const { return attempts_; }

 private:
  std::vector<Attempt> attempts_;
};

// Thread-safe; at most max_concurrency requests in flight across all callers.
class ModelClient {
 public:
  explicit ModelClient(ModelEndpoint ep);
  ModelClient(const ModelClient&) = delete;
  ModelClient& operator=(const ModelClient&) = delete;

  const ModelEndpoint& endpoint() const { return ep_; }

  ScoreResponse score_raw(const std::string& prompt, const std::string& continuation) const;
  // Σ token_logprobs, or the mean when the endpoint is length-normalizing.
  double score(const std::string& prompt, const std::string& continuation) const;
  // Greedy continuation cut at the first line break, capped at max_tokens
  // whitespace tokens, trimmed.
  std::string generate(const std::string& prompt, int max_tokens) const;

 private:
  std::string post(const char* path, const std::string& body) const;

  ModelEndpoint ep_;
  std::string auth_header_;  // "" = none
  mutable std::counting_semaphore<> slots_;
};

// Verbalizer log-probability of a query under a prompt: the score of the
// verbalizer continuation after the query is rendered through the template.
double score_label(const ModelClient& client, const std::string& prompt_text,
                   const std::string& query_text, const Template& tmpl,
                   const std::string& verbalizer);

std::string generate_span(const ModelClient& client, const std::string& prompt_text,
                          const std::string& query_text, const Template& tmpl, int max_tokens);

// ---------------------------------------------------------------------------
// Uniform prediction interfaces used by eval and detect.
// ---------------------------------------------------------------------------

class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual std::string predict(const PromptManifest& manifest, const std::string& prompt_text,
                              const Query& q) const = 0;
  virtual const std::vector<std::string>& label_space() const = 0;
};

class SimClassifier : public Classifier {
 public:
  explicit SimClassifier(SimLearner m) : m_(std::move(m)) { validate_learner(m_); }
  std::string predict(const PromptManifest& manifest, const std::string&,
                      const Query& q) const override {
    return sim_predict(m_, manifest, q);
  }
  const std::vector<std::string>& label_space() const override { return m_.label_space; }
  const SimLearner& learner() const { return m_; }

 private:
  SimLearner m_;
};

class EndpointClassifier : public Classifier {
 public:
  EndpointClassifier(const ModelClient& client, Template tmpl, LabelMapping mapping,
                     std::vector<std::string> label_space)
      : client_(client), tmpl_(std::move(tmpl)), mapping_(std::move(mapping)),
        labels_(std::move(label_space)) {}
  std::string predict(const PromptManifest& manifest, const std::string& prompt_text,
                      const Query& q) const override;
  const std::vector<std::string>& label_space() const override { return labels_; }

 private:
  const ModelClient& client_;
  Template tmpl_;
  LabelMapping mapping_;
  std::vector<std::string> labels_;
};

// Softmax-normalized label probabilities for a (prompt, query) pair.
class LabelProber {
 public:
  virtual ~LabelProber() = default;
  virtual std::vector<double> label_probs(const std::string& prompt_text,
                                          const std::string& query_text) const = 0;
  virtual const std::vector<std::string>& label_space() const = 0;
};

class SimProber : public LabelProber {
 public:
  explicit SimProber(SimLearner m) : m_(std::move(m)) { validate_learner(m_); }
  std::vector<double> label_probs(const std::string& prompt_text,
                                  const std::string& query_text) const override;
  const std::vector<std::string>& label_space() const override { return m_.label_space; }

 private:
  SimLearner m_;
};

class EndpointProber : public LabelProber {
 public:
  EndpointProber(const ModelClient& client, Template tmpl, LabelMapping mapping,
                 std::vector<std::string> label_space)
      : client_(client), tmpl_(std::move(tmpl)), mapping_(std::move(mapping)),
        labels_(std::move(label_space)) {}
  std::vector<double> label_probs(const std::string& prompt_text,
                                  const std::string& query_text) const override;
  const std::vector<std::string>& label_space() const override { return labels_; }

 private:
  const ModelClient& client_;
  Template tmpl_;
  LabelMapping mapping_;
  std::vector<std::string> labels_;
};

}  // namespace sclab
