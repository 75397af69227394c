#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sclab/common.hpp"

namespace sclab {

enum class TaskKind { classification, extraction };

const char* task_kind_name(TaskKind t);
TaskKind parse_task_kind(const std::string& s);

struct LabeledExample {
  std::string id;
  std::string text;
  std::string label;
};

struct ExtractionExample {
  std::string id;
  std::string text;
  std::string slot_name;
  Span gold_span;
  std::optional<Span> distractor_span;

  std::string gold_text() const { return text.substr(gold_span.start, gold_span.length()); }
};

// One named split. Only the container matching the owning dataset's task kind
// is populated.
struct DatasetSplit {
  std::vector<LabeledExample> cls;
  std::vector<ExtractionExample> ext;
  size_t size(TaskKind t) const { return t == TaskKind::classification ? cls.size() : ext.size(); }
};

struct Dataset {
  std::string name;
  TaskKind task_kind = TaskKind::classification;
  std::vector<std::string> label_space;  // first-appearance / declared order
  std::map<std::string, DatasetSplit> splits;

  const DatasetSplit& split(const std::string& name) const;
  bool has_label(const std::string& label) const;
};

// Well-known split names used by the pipeline.
inline constexpr const char* kTrainPool = "train-pool";
inline constexpr const char* kValidation = "validation";
inline constexpr const char* kTest = "test";

struct Violation {
  std::string code;    // e.g. SpanOutOfRange, DegenerateLabelSpace
  std::string id;      // offending example id ("" for dataset-level violations)
  std::string detail;
};

// Line-delimited records, one JSON object per line. An optional leading header
// record ({"dataset":..., "task":..., "labels":[...]}) declares the label
// space; unknown fields are rejected unless lenient.
Dataset load_dataset(const std::string& path, TaskKind task_kind, bool lenient = false);

// Serializes in the same line format (header first). Round-trips exactly.
void save_dataset(const Dataset& d, const std::string& path);
std::string dataset_to_jsonl(const Dataset& d);

std::vector<Violation> validate_dataset(const Dataset& d);

enum class ShotBalance { per_label_equal, unconstrained };

const char* shot_balance_name(ShotBalance b);
ShotBalance parse_shot_balance(const std::string& s);

// Draws k shots from the train-pool, deterministically for a fixed seed.
std::vector<LabeledExample> sample_shots(const Dataset& d, int k, ShotBalance balance,
                                         uint64_t seed);
std::vector<ExtractionExample> sample_extraction_shots(const Dataset& d, int k, uint64_t seed);

}  // namespace sclab
