#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sclab {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

enum class Errc {
  // corpus
  malformed_line,
  unknown_label,
  missing_field,
  unknown_field,
  duplicate_id,
  insufficient_examples,
  indivisible_shot_count,
  // triggers
  index_out_of_range,
  zero_repetition,
  missing_style_map,
  key_not_found,
  no_style_effect,
  // promptkit
  unmapped_label,
  no_target_label_shots,
  missing_score,
  not_enough_prompts,
  // antiset
  empty_anti_set,
  span_out_of_range,
  missing_distractor,
  no_eligible_token,
  // models
  timeout,
  http_status,
  protocol_violation,
  retries_exhausted,
  unknown_size_index,
  // eval
  empty_record_set,
  // detect
  empty_query_set,
  // cli / ledger
  invalid_config,
  incomplete_ledger,
  checksum_mismatch,
  io_error,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& msg) { throw Error(code, msg); }

// ---------------------------------------------------------------------------
// Text utilities. Whitespace tokenization is the project-wide token model:
// tokens are maximal runs of non-whitespace, detokenize joins with single
// spaces, so detokenize(tokenize(t)) == t up to whitespace normalization.
// ---------------------------------------------------------------------------

std::vector<std::string> tokenize(std::string_view text);
std::string detokenize(const std::vector<std::string>& tokens);
std::string normalize_ws(std::string_view text);
std::string trim(std::string_view text);

// ---------------------------------------------------------------------------
// Deterministic hashing and seeding. All randomness in the project flows from
// a master seed through derive_seed(master, scope, index); SplitMix64 is the
// only generator so runs are reproducible across platforms.
// ---------------------------------------------------------------------------

uint64_t fnv1a64(std::string_view bytes);

inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t master, std::string_view scope, uint64_t index = 0) {
  return mix64(mix64(master ^ fnv1a64(scope)) + index);
}

class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // unbiased draw in [0, bound)
  uint64_t below(uint64_t bound);

  // draw in [0, 1), 53-bit resolution
  double real() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  uint64_t state_;
};

// Seeded partial Fisher-Yates: k distinct indices from [0, n).
std::vector<size_t> sample_indices(size_t n, size_t k, uint64_t seed);

// ---------------------------------------------------------------------------
// Report formatting: percentages carry full precision internally and are
// rounded to two decimals only at emission.
// ---------------------------------------------------------------------------

double round2(double x);
std::string format_pct(double x);

// ---------------------------------------------------------------------------
// Execution policy for the data-parallel kernels (batch eval, anti-set build,
// leave-one-out attribution). Serial mode is the reference path used by tests
// and the benchmark.
// ---------------------------------------------------------------------------

enum class ExecMode { serial, parallel };

struct ExecPolicy {
  ExecMode mode = ExecMode::parallel;
  int threads = 0;  // 0 = library default
};

// Character interval [start, end) into a text.
struct Span {
  size_t start = 0;
  size_t end = 0;
  bool operator==(const Span&) const = default;
  size_t length() const { return end - start; }
};

// Character span of every whitespace-delimited token, in order.
std::vector<Span> token_char_spans(std::string_view text);

}  // namespace sclab
