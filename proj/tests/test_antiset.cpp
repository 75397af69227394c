#include <set>

#include "doctest.h"
#include "sclab/antiset.hpp"
#include "sclab/corpus.hpp"
#include "testutil.hpp"

using namespace sclab;

namespace {

Dataset toy() {
  return load_dataset(testutil::data_file("toy_sentiment.jsonl"), TaskKind::classification);
}

Dataset movies() {
  return load_dataset(testutil::data_file("toy_movies.jsonl"), TaskKind::extraction);
}

}  // namespace

TEST_CASE("classification anti-set excludes the target label and carries the trigger") {
  Dataset d = toy();
  Trigger trig = catalog_lookup("sentence");
  for (const std::string& c : d.label_space) {
    AntiShortcutSet s = build_classification_antiset(d, kTest, c, trig, PositionPolicy::end(), 1,
                                                     42, false, {ExecMode::serial, 0});
    CHECK(s.members.size() == 8);  // half the test split
    for (const auto& m : s.members) {
      CHECK(m.label != c);
      CHECK(contains_trigger(m.text, trig));
      CHECK(m.id == m.orig_id + "#anti");
      CHECK(strip_edit(m.text, m.edit) != m.text);  // the edit is real
    }
    CHECK(s.manifest.target_label == c);
    CHECK(s.manifest.mode == "classification");
  }
}

TEST_CASE("anti-set members strip back to their source texts") {
  Dataset d = toy();
  Trigger trig = catalog_lookup("rare-word:serendipity");
  AntiShortcutSet s = build_classification_antiset(d, kTest, "positive", trig,
                                                   PositionPolicy::random(), 2, 7);
  REQUIRE_FALSE(s.members.empty());
  for (const auto& m : s.members) {
    const LabeledExample* src = nullptr;
    for (const auto& ex : d.split(kTest).cls)
      if (ex.id == m.orig_id) src = &ex;
    REQUIRE(src != nullptr);
    CHECK(strip_edit(m.text, m.edit) == normalize_ws(src->text));
    CHECK(count_trigger_runs(m.text, trig) >= 2);  // repetition 2
  }
}

TEST_CASE("collision members are flagged and optionally dropped") {
  auto dir = testutil::temp_dir("antiset-collide");
  testutil::spit(dir / "d.jsonl",
                 "{\"id\": \"a\", \"text\": \"water everywhere\", \"label\": \"neg\", "
                 "\"split\": \"test\"}\n"
                 "{\"id\": \"b\", \"text\": \"dry land\", \"label\": \"neg\", "
                 "\"split\": \"test\"}\n"
                 "{\"id\": \"c\", \"text\": \"something good\", \"label\": \"pos\", "
                 "\"split\": \"test\"}\n");
  Dataset d = load_dataset((dir / "d.jsonl").string(), TaskKind::classification);
  Trigger trig = catalog_lookup("water");

  AntiShortcutSet keep = build_classification_antiset(d, "test", "pos", trig,
                                                      PositionPolicy::end(), 1, 0, false);
  REQUIRE(keep.members.size() == 2);
  bool saw_collision = false;
  for (const auto& m : keep.members) saw_collision = saw_collision || m.collision;
  CHECK(saw_collision);

  AntiShortcutSet dropped = build_classification_antiset(d, "test", "pos", trig,
                                                         PositionPolicy::end(), 1, 0, true);
  REQUIRE(dropped.members.size() == 1);
  CHECK(dropped.members[0].orig_id == "b");
}

TEST_CASE("an anti-set with no eligible member is an error") {
  auto dir = testutil::temp_dir("antiset-empty");
  testutil::spit(dir / "d.jsonl",
                 "{\"id\": \"a\", \"text\": \"x y\", \"label\": \"pos\", \"split\": \"test\"}\n");
  Dataset d = load_dataset((dir / "d.jsonl").string(), TaskKind::classification);
  CHECK_THROWS_WITH_AS(build_classification_antiset(d, "test", "pos", catalog_lookup("cf"),
                                                    PositionPolicy::end(), 1, 0),
                       doctest::Contains("EmptyAntiSet"), Error);
}

TEST_CASE("serial and parallel anti-set builds are byte-identical") {
  Dataset d = toy();
  Trigger trig = catalog_lookup("sentence");
  AntiShortcutSet ser = build_classification_antiset(d, kTest, "positive", trig,
                                                     PositionPolicy::random(), 1, 13, false,
                                                     {ExecMode::serial, 0});
  AntiShortcutSet par = build_classification_antiset(d, kTest, "positive", trig,
                                                     PositionPolicy::random(), 1, 13, false,
                                                     {ExecMode::parallel, 0});
  CHECK(antiset_to_jsonl(ser) == antiset_to_jsonl(par));
}

TEST_CASE("wrap_span brackets the span with the sign") {
  Trigger sign = catalog_lookup("sign:*");
  std::string text = "directed by Jane Doe in spring";
  Span span{12, 20};  // "Jane Doe"
  auto [out, rec] = wrap_span(text, span, sign);
  CHECK(out == "directed by * Jane Doe * in spring");
  CHECK(rec.op == EditRecord::Op::wrap);
  CHECK(out.substr(rec.new_span.start, rec.new_span.length()) == "Jane Doe");
  CHECK(strip_edit(out, rec) == normalize_ws(text));
}

TEST_CASE("extraction anti-set wraps the distractor and keeps gold content") {
  Dataset d = movies();
  Trigger sign{TriggerKind::sign, "##", std::nullopt};
  AntiShortcutSet s = build_extraction_antiset(d, kTest, ExtractionAntiMode::wrap_distractor,
                                               sign, 3);
  CHECK(s.members.size() == d.split(kTest).ext.size());
  CHECK(s.manifest.mode == "wrap-distractor");
  for (const auto& m : s.members) {
    // gold span content survives the offset remapping
    CHECK(m.text.substr(m.gold_span.start, m.gold_span.length()) == m.gold_text);
    // the wrapped span is the distractor, bracketed by the sign
    std::string wrapped = m.text.substr(m.wrapped_span.start, m.wrapped_span.length());
    CHECK(m.text.find("## " + wrapped + " ##") != std::string::npos);
    CHECK(wrapped != m.gold_text);
  }
}

TEST_CASE("wrap-distractor requires a distractor on every member") {
  auto dir = testutil::temp_dir("antiset-nodis");
  testutil::spit(
      dir / "d.jsonl",
      "{\"id\": \"e1\", \"text\": \"made by Ann Lee today\", \"slot_name\": \"maker\", "
      "\"gold_span\": [8, 15], \"split\": \"test\"}\n");
  Dataset d = load_dataset((dir / "d.jsonl").string(), TaskKind::extraction);
  Trigger sign{TriggerKind::sign, "##", std::nullopt};
  CHECK_THROWS_WITH_AS(
      build_extraction_antiset(d, "test", ExtractionAntiMode::wrap_distractor, sign, 0),
      doctest::Contains("MissingDistractor"), Error);
  // random-word mode works without distractors
  AntiShortcutSet s =
      build_extraction_antiset(d, "test", ExtractionAntiMode::wrap_random_word, sign, 0);
  REQUIRE(s.members.size() == 1);
  CHECK(s.members[0].text.substr(s.members[0].gold_span.start,
                                 s.members[0].gold_span.length()) == "Ann Lee");
}

TEST_CASE("random-word wrap never touches the gold span") {
  Dataset d = movies();
  Trigger sign{TriggerKind::sign, "##", std::nullopt};
  for (uint64_t seed : {0ULL, 1ULL, 2ULL, 3ULL}) {
    AntiShortcutSet s = build_extraction_antiset(d, kTest, ExtractionAntiMode::wrap_random_word,
                                                 sign, seed);
    for (const auto& m : s.members) {
      CHECK(m.text.substr(m.gold_span.start, m.gold_span.length()) == m.gold_text);
      // wrapped span lies outside the remapped gold span
      CHECK((m.wrapped_span.end <= m.gold_span.start || m.wrapped_span.start >= m.gold_span.end));
    }
  }
}

TEST_CASE("poison_extraction_prompt wraps every shot's gold span") {
  Dataset d = movies();
  auto shots = sample_extraction_shots(d, 4, 5);
  Trigger sign{TriggerKind::sign, "##", std::nullopt};
  auto [text, man] = poison_extraction_prompt(shots, sign, extraction_template());
  CHECK(man.injected_indices.size() == shots.size());
  CHECK(man.edits.size() == shots.size());
  for (const auto& s : shots)
    CHECK(text.find("## " + s.gold_text() + " ##") != std::string::npos);

  std::string clean = render_extraction_prompt(shots, extraction_template());
  CHECK(clean.find("##") == std::string::npos);
  for (const auto& s : shots)
    CHECK(clean.find("Text: " + s.text + "\nAnswer: " + s.gold_text() + "\n") !=
          std::string::npos);
}

TEST_CASE("anti-set serialization carries the edit and manifest") {
  Dataset d = toy();
  AntiShortcutSet s = build_classification_antiset(d, kTest, "positive",
                                                   catalog_lookup("sentence"),
                                                   PositionPolicy::end(), 1, 0);
  std::string jsonl = antiset_to_jsonl(s);
  CHECK(jsonl.find("\"edit\"") != std::string::npos);
  CHECK(jsonl.find("#anti") != std::string::npos);
  std::string man = antiset_manifest_to_json(s.manifest);
  CHECK(man.find("\"classification\"") != std::string::npos);
  CHECK(man.find("\"target_label\"") != std::string::npos);
}
