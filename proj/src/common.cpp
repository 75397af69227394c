#include "sclab/common.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>

namespace sclab {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::malformed_line: return "MalformedLine";
    case Errc::unknown_label: return "UnknownLabel";
    case Errc::missing_field: return "MissingField";
    case Errc::unknown_field: return "UnknownField";
    case Errc::duplicate_id: return "DuplicateId";
    case Errc::insufficient_examples: return "InsufficientExamples";
    case Errc::indivisible_shot_count: return "IndivisibleShotCount";
    case Errc::index_out_of_range: return "IndexOutOfRange";
    case Errc::zero_repetition: return "ZeroRepetition";
    case Errc::missing_style_map: return "MissingStyleMap";
    case Errc::key_not_found: return "KeyNotFound";
    case Errc::no_style_effect: return "NoStyleEffect";
    case Errc::unmapped_label: return "UnmappedLabel";
    case Errc::no_target_label_shots: return "NoTargetLabelShots";
    case Errc::missing_score: return "MissingScore";
    case Errc::not_enough_prompts: return "NotEnoughPrompts";
    case Errc::empty_anti_set: return "EmptyAntiSet";
    case Errc::span_out_of_range: return "SpanOutOfRange";
    case Errc::missing_distractor: return "MissingDistractor";
    case Errc::no_eligible_token: return "NoEligibleToken";
    case Errc::timeout: return "Timeout";
    case Errc::http_status: return "HttpStatus";
    case Errc::protocol_violation: return "ProtocolViolation";
    case Errc::retries_exhausted: return "RetriesExhausted";
    case Errc::unknown_size_index: return "UnknownSizeIndex";
    case Errc::empty_record_set: return "EmptyRecordSet";
    case Errc::empty_query_set: return "EmptyQuerySet";
    case Errc::invalid_config: return "InvalidConfig";
    case Errc::incomplete_ledger: return "IncompleteLedger";
    case Errc::checksum_mismatch: return "ChecksumMismatch";
    case Errc::io_error: return "IoError";
  }
  return "Error";
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    size_t start = i;
    while (i < n && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) tokens.emplace_back(text.substr(start, i - start));
  }
  return tokens;
}

std::string detokenize(const std::vector<std::string>& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::vector<Span> token_char_spans(std::string_view text) {
  std::vector<Span> spans;
  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    size_t start = i;
    while (i < n && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) spans.push_back({start, i});
  }
  return spans;
}

std::string normalize_ws(std::string_view text) { return detokenize(tokenize(text)); }

std::string trim(std::string_view text) {
  size_t b = 0, e = text.size();
  while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
  return std::string(text.substr(b, e - b));
}

uint64_t fnv1a64(std::string_view bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t SplitMix64::below(uint64_t bound) {
  if (bound == 0) return 0;
  const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  uint64_t v = next();
  while (v >= limit) v = next();
  return v % bound;
}

std::vector<size_t> sample_indices(size_t n, size_t k, uint64_t seed) {
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  SplitMix64 rng(seed);
  for (size_t i = 0; i < k && i < n; ++i) {
    size_t j = i + static_cast<size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k < n ? k : n);
  return idx;
}

double round2(double x) { return std::round(x * 100.0) / 100.0; }

std::string format_pct(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", round2(x));
  // avoid "-0.00"
  if (std::string(buf) == "-0.00") return "0.00";
  return buf;
}

}  // namespace sclab
