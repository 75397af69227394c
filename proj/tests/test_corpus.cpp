#include <map>
#include <set>

#include "doctest.h"
#include "sclab/corpus.hpp"
#include "testutil.hpp"

using namespace sclab;

namespace {

Dataset toy() {
  return load_dataset(testutil::data_file("toy_sentiment.jsonl"), TaskKind::classification);
}

}  // namespace

TEST_CASE("bundled sentiment set loads with declared label space") {
  Dataset d = toy();
  CHECK(d.name == "toy_sentiment");
  CHECK(d.task_kind == TaskKind::classification);
  CHECK(d.label_space == std::vector<std::string>{"positive", "negative"});
  CHECK(d.split(kTrainPool).cls.size() == 16);
  CHECK(d.split(kValidation).cls.size() == 8);
  CHECK(d.split(kTest).cls.size() == 16);
  CHECK(validate_dataset(d).empty());
}

TEST_CASE("bundled extraction set loads with spans intact") {
  Dataset d = load_dataset(testutil::data_file("toy_movies.jsonl"), TaskKind::extraction);
  CHECK(d.task_kind == TaskKind::extraction);
  CHECK(d.split(kTest).ext.size() == 10);
  for (const auto& ex : d.split(kTest).ext) {
    CHECK(ex.gold_span.end <= ex.text.size());
    CHECK_FALSE(ex.gold_text().empty());
    REQUIRE(ex.distractor_span.has_value());
  }
  CHECK(validate_dataset(d).empty());
}

TEST_CASE("dataset serialization round-trips") {
  Dataset d = toy();
  auto dir = testutil::temp_dir("corpus-rt");
  save_dataset(d, (dir / "copy.jsonl").string());
  Dataset d2 = load_dataset((dir / "copy.jsonl").string(), TaskKind::classification);
  CHECK(dataset_to_jsonl(d) == dataset_to_jsonl(d2));
  CHECK(d2.label_space == d.label_space);
  CHECK(d2.split(kTest).cls.size() == d.split(kTest).cls.size());
}

TEST_CASE("unknown fields are rejected unless lenient") {
  auto dir = testutil::temp_dir("corpus-fields");
  testutil::spit(dir / "bad.jsonl",
                 "{\"id\": \"a\", \"text\": \"x\", \"label\": \"p\", \"split\": \"test\", "
                 "\"extra\": 1}\n");
  CHECK_THROWS_AS(load_dataset((dir / "bad.jsonl").string(), TaskKind::classification), Error);
  Dataset d = load_dataset((dir / "bad.jsonl").string(), TaskKind::classification, true);
  CHECK(d.split("test").cls.size() == 1);
}

TEST_CASE("missing fields and duplicate ids raise typed errors") {
  auto dir = testutil::temp_dir("corpus-bad");
  testutil::spit(dir / "missing.jsonl", "{\"id\": \"a\", \"text\": \"x\", \"split\": \"test\"}\n");
  CHECK_THROWS_WITH_AS(load_dataset((dir / "missing.jsonl").string(), TaskKind::classification),
                       doctest::Contains("MissingField"), Error);

  testutil::spit(dir / "dup.jsonl",
                 "{\"id\": \"a\", \"text\": \"x\", \"label\": \"p\", \"split\": \"test\"}\n"
                 "{\"id\": \"a\", \"text\": \"y\", \"label\": \"p\", \"split\": \"test\"}\n");
  CHECK_THROWS_WITH_AS(load_dataset((dir / "dup.jsonl").string(), TaskKind::classification),
                       doctest::Contains("DuplicateId"), Error);

  testutil::spit(dir / "garbled.jsonl", "not json\n");
  CHECK_THROWS_WITH_AS(load_dataset((dir / "garbled.jsonl").string(), TaskKind::classification),
                       doctest::Contains("MalformedLine"), Error);
}

TEST_CASE("header declaring another label rejects out-of-space records") {
  auto dir = testutil::temp_dir("corpus-labels");
  testutil::spit(dir / "lab.jsonl",
                 "{\"dataset\": \"t\", \"task\": \"classification\", \"labels\": [\"a\", \"b\"]}\n"
                 "{\"id\": \"x\", \"text\": \"t\", \"label\": \"c\", \"split\": \"test\"}\n");
  CHECK_THROWS_WITH_AS(load_dataset((dir / "lab.jsonl").string(), TaskKind::classification),
                       doctest::Contains("UnknownLabel"), Error);
}

TEST_CASE("validate_dataset flags bad spans") {
  Dataset d;
  d.name = "x";
  d.task_kind = TaskKind::extraction;
  ExtractionExample ex;
  ex.id = "e1";
  ex.text = "short";
  ex.slot_name = "s";
  ex.gold_span = {2, 99};
  d.splits["test"].ext.push_back(ex);
  auto v = validate_dataset(d);
  bool found = false;
  for (const auto& viol : v) found = found || viol.code == "SpanOutOfRange";
  CHECK(found);
}

TEST_CASE("sample_shots balances labels and respects the seed") {
  Dataset d = toy();
  auto shots = sample_shots(d, 8, ShotBalance::per_label_equal, 3);
  REQUIRE(shots.size() == 8);
  std::map<std::string, int> per_label;
  for (const auto& s : shots) ++per_label[s.label];
  CHECK(per_label["positive"] == 4);
  CHECK(per_label["negative"] == 4);

  auto again = sample_shots(d, 8, ShotBalance::per_label_equal, 3);
  for (size_t i = 0; i < shots.size(); ++i) CHECK(shots[i].id == again[i].id);

  std::set<std::string> ids;
  for (const auto& s : shots) ids.insert(s.id);
  CHECK(ids.size() == 8);  // no repeats
}

TEST_CASE("sample_shots rejects indivisible or oversized requests") {
  Dataset d = toy();
  CHECK_THROWS_WITH_AS(sample_shots(d, 5, ShotBalance::per_label_equal, 0),
                       doctest::Contains("IndivisibleShotCount"), Error);
  CHECK_THROWS_WITH_AS(sample_shots(d, 40, ShotBalance::per_label_equal, 0),
                       doctest::Contains("InsufficientExamples"), Error);
  CHECK_NOTHROW(sample_shots(d, 5, ShotBalance::unconstrained, 0));
}

TEST_CASE("extraction shot sampling is seeded and within the pool") {
  Dataset d = load_dataset(testutil::data_file("toy_movies.jsonl"), TaskKind::extraction);
  auto shots = sample_extraction_shots(d, 4, 11);
  REQUIRE(shots.size() == 4);
  auto again = sample_extraction_shots(d, 4, 11);
  for (size_t i = 0; i < shots.size(); ++i) CHECK(shots[i].id == again[i].id);
  for (const auto& s : shots) CHECK(s.id.rfind("mt", 0) == 0);  // train-pool ids
}
