#include <algorithm>
#include <set>

#include "doctest.h"
#include "sclab/common.hpp"

using namespace sclab;

TEST_CASE("tokenize splits on whitespace runs") {
  CHECK(tokenize("a b  c\t d\n") == std::vector<std::string>{"a", "b", "c", "d"});
  CHECK(tokenize("") == std::vector<std::string>{});
  CHECK(tokenize("   ") == std::vector<std::string>{});
  CHECK(tokenize("one") == std::vector<std::string>{"one"});
}

TEST_CASE("detokenize joins with single spaces") {
  CHECK(detokenize({"a", "b", "c"}) == "a b c");
  CHECK(detokenize({}) == "");
  CHECK(normalize_ws("  a\tb \n c ") == "a b c");
  CHECK(detokenize(tokenize("x   y")) == normalize_ws("x   y"));
}

TEST_CASE("trim strips edge whitespace only") {
  CHECK(trim("  a b  ") == "a b");
  CHECK(trim("a") == "a");
  CHECK(trim(" \t\n ") == "");
}

TEST_CASE("fnv1a64 matches the reference vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("derive_seed separates scopes and indices") {
  uint64_t a = derive_seed(7, "prompt", 0);
  CHECK(a == derive_seed(7, "prompt", 0));
  CHECK(a != derive_seed(7, "prompt", 1));
  CHECK(a != derive_seed(7, "inject", 0));
  CHECK(a != derive_seed(8, "prompt", 0));
}

TEST_CASE("SplitMix64 below is in range and deterministic") {
  SplitMix64 r1(42), r2(42);
  for (int i = 0; i < 200; ++i) {
    uint64_t v = r1.below(13);
    CHECK(v < 13);
    CHECK(v == r2.below(13));
  }
  SplitMix64 r3(42);
  for (int i = 0; i < 200; ++i) {
    double x = r3.real();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
}

TEST_CASE("sample_indices draws k distinct in-range indices") {
  auto idx = sample_indices(10, 4, 99);
  CHECK(idx.size() == 4);
  std::set<size_t> uniq(idx.begin(), idx.end());
  CHECK(uniq.size() == 4);
  for (size_t v : idx) CHECK(v < 10);
  CHECK(idx == sample_indices(10, 4, 99));
  CHECK(idx != sample_indices(10, 4, 100));

  auto all = sample_indices(5, 5, 1);
  std::sort(all.begin(), all.end());
  CHECK(all == std::vector<size_t>{0, 1, 2, 3, 4});

  CHECK(sample_indices(3, 0, 1).empty());
}

TEST_CASE("round2 and format_pct round at emission") {
  CHECK(round2(41.4499999) == doctest::Approx(41.45).epsilon(1e-12));
  CHECK(round2(87.5) == 87.5);
  CHECK(format_pct(87.5) == "87.50");
  CHECK(format_pct(0.0) == "0.00");
  CHECK(format_pct(-0.0000001) == "0.00");  // no "-0.00"
  CHECK(format_pct(33.333333) == "33.33");
}

TEST_CASE("token_char_spans covers each token exactly") {
  std::string t = "  ab  cde f ";
  auto spans = token_char_spans(t);
  REQUIRE(spans.size() == 3);
  CHECK(t.substr(spans[0].start, spans[0].length()) == "ab");
  CHECK(t.substr(spans[1].start, spans[1].length()) == "cde");
  CHECK(t.substr(spans[2].start, spans[2].length()) == "f");
  CHECK(token_char_spans("").empty());
}

TEST_CASE("errors carry code and name") {
  try {
    raise(Errc::duplicate_id, "x");
    FAIL("unreachable");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::duplicate_id);
    CHECK(std::string(e.what()).find("DuplicateId") == 0);
  }
}
