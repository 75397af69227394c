#include "sclab/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace sclab {

using nlohmann::json;

const char* task_kind_name(TaskKind t) {
  return t == TaskKind::classification ? "classification" : "extraction";
}

TaskKind parse_task_kind(const std::string& s) {
  if (s == "classification") return TaskKind::classification;
  if (s == "extraction") return TaskKind::extraction;
  raise(Errc::invalid_config, "unknown task kind '" + s + "'");
}

const DatasetSplit& Dataset::split(const std::string& name) const {
  auto it = splits.find(name);
  if (it == splits.end()) {
    static const DatasetSplit empty;
    return empty;
  }
  return it->second;
}

bool Dataset::has_label(const std::string& label) const {
  return std::find(label_space.begin(), label_space.end(), label) != label_space.end();
}

namespace {

Span parse_span(const json& j, int line_no, const char* field) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer())
    raise(Errc::malformed_line,
          std::string(field) + " must be [start, end] (line " + std::to_string(line_no) + ")");
  long long a = j[0].get<long long>(), b = j[1].get<long long>();
  if (a < 0 || b < 0)
    raise(Errc::malformed_line,
          std::string(field) + " offsets must be >= 0 (line " + std::to_string(line_no) + ")");
  return Span{static_cast<size_t>(a), static_cast<size_t>(b)};
}

void check_fields(const json& rec, const std::set<std::string>& required,
                  const std::set<std::string>& optional, int line_no, bool lenient) {
  for (const auto& f : required)
    if (!rec.contains(f))
      raise(Errc::missing_field, "'" + f + "' (line " + std::to_string(line_no) + ")");
  if (lenient) return;
  for (auto it = rec.begin(); it != rec.end(); ++it) {
    if (!required.count(it.key()) && !optional.count(it.key()))
      raise(Errc::unknown_field, "'" + it.key() + "' (line " + std::to_string(line_no) + ")");
  }
}

}  // namespace

Dataset load_dataset(const std::string& path, TaskKind task_kind, bool lenient) {
  std::ifstream in(path);
  if (!in) raise(Errc::io_error, "cannot open dataset file " + path);

  Dataset d;
  d.task_kind = task_kind;
  d.name = path;
  bool labels_declared = false;

  std::string line;
  int line_no = 0;
  std::map<std::string, std::set<std::string>> seen_ids;

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      raise(Errc::malformed_line, std::string(e.what()) + " (line " + std::to_string(line_no) + ")");
    }
    if (!rec.is_object())
      raise(Errc::malformed_line, "record is not an object (line " + std::to_string(line_no) + ")");

    // Header record: declares dataset name, task, and label space.
    if (line_no == 1 && (rec.contains("labels") || rec.contains("dataset"))) {
      if (rec.contains("dataset")) d.name = rec["dataset"].get<std::string>();
      if (rec.contains("task")) {
        TaskKind declared = parse_task_kind(rec["task"].get<std::string>());
        if (declared != task_kind)
          raise(Errc::invalid_config, "file declares task '" +
                                          std::string(task_kind_name(declared)) +
                                          "' but loader was asked for '" +
                                          task_kind_name(task_kind) + "'");
      }
      if (rec.contains("labels")) {
        for (const auto& l : rec["labels"]) d.label_space.push_back(l.get<std::string>());
        labels_declared = true;
      }
      continue;
    }

    std::string split = rec.value("split", "");
    if (task_kind == TaskKind::classification) {
      check_fields(rec, {"id", "text", "label", "split"}, {}, line_no, lenient);
      LabeledExample ex;
      ex.id = rec["id"].get<std::string>();
      ex.text = rec["text"].get<std::string>();
      ex.label = rec["label"].get<std::string>();
      if (labels_declared && !d.has_label(ex.label))
        raise(Errc::unknown_label, "\"" + ex.label + "\" (line " + std::to_string(line_no) + ")");
      if (!labels_declared && !d.has_label(ex.label)) d.label_space.push_back(ex.label);
      if (!seen_ids[split].insert(ex.id).second)
        raise(Errc::duplicate_id, "\"" + ex.id + "\" in split " + split + " (line " +
                                      std::to_string(line_no) + ")");
      d.splits[split].cls.push_back(std::move(ex));
    } else {
      check_fields(rec, {"id", "text", "slot_name", "gold_span", "split"}, {"distractor_span"},
                   line_no, lenient);
      ExtractionExample ex;
      ex.id = rec["id"].get<std::string>();
      ex.text = rec["text"].get<std::string>();
      ex.slot_name = rec["slot_name"].get<std::string>();
      ex.gold_span = parse_span(rec["gold_span"], line_no, "gold_span");
      if (rec.contains("distractor_span") && !rec["distractor_span"].is_null())
        ex.distractor_span = parse_span(rec["distractor_span"], line_no, "distractor_span");
      if (!seen_ids[split].insert(ex.id).second)
        raise(Errc::duplicate_id, "\"" + ex.id + "\" in split " + split + " (line " +
                                      std::to_string(line_no) + ")");
      d.splits[split].ext.push_back(std::move(ex));
    }
  }

  return d;
}

std::string dataset_to_jsonl(const Dataset& d) {
  std::ostringstream out;
  json header;
  header["dataset"] = d.name;
  header["task"] = task_kind_name(d.task_kind);
  if (d.task_kind == TaskKind::classification) header["labels"] = d.label_space;
  out << header.dump() << "\n";
  for (const auto& [split_name, split] : d.splits) {
    if (d.task_kind == TaskKind::classification) {
      for (const auto& ex : split.cls) {
        json rec;
        rec["id"] = ex.id;
        rec["text"] = ex.text;
        rec["label"] = ex.label;
        rec["split"] = split_name;
        out << rec.dump() << "\n";
      }
    } else {
      for (const auto& ex : split.ext) {
        json rec;
        rec["id"] = ex.id;
        rec["text"] = ex.text;
        rec["slot_name"] = ex.slot_name;
        rec["gold_span"] = {ex.gold_span.start, ex.gold_span.end};
        if (ex.distractor_span)
          rec["distractor_span"] = {ex.distractor_span->start, ex.distractor_span->end};
        rec["split"] = split_name;
        out << rec.dump() << "\n";
      }
    }
  }
  return out.str();
}

void save_dataset(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) raise(Errc::io_error, "cannot write dataset file " + path);
  out << dataset_to_jsonl(d);
}

std::vector<Violation> validate_dataset(const Dataset& d) {
  std::vector<Violation> v;
  if (d.task_kind == TaskKind::classification) {
    std::set<std::string> distinct(d.label_space.begin(), d.label_space.end());
    if (distinct.size() < 2)
      v.push_back({"DegenerateLabelSpace", "",
                   "classification label space has " + std::to_string(distinct.size()) +
                       " distinct label(s)"});
  }
  for (const auto& [split_name, split] : d.splits) {
    std::set<std::string> ids;
    for (const auto& ex : split.cls) {
      if (trim(ex.text).empty()) v.push_back({"EmptyText", ex.id, "text empty after trimming"});
      if (!d.has_label(ex.label))
        v.push_back({"LabelNotInSpace", ex.id, "label \"" + ex.label + "\""});
      if (!ids.insert(ex.id).second)
        v.push_back({"DuplicateId", ex.id, "duplicate within split " + split_name});
    }
    for (const auto& ex : split.ext) {
      if (trim(ex.text).empty()) v.push_back({"EmptyText", ex.id, "text empty after trimming"});
      const size_t len = ex.text.size();
      if (ex.gold_span.start >= ex.gold_span.end || ex.gold_span.end > len) {
        v.push_back({"SpanOutOfRange", ex.id, "gold_span"});
      } else if (trim(ex.gold_text()).empty()) {
        v.push_back({"EmptySpanText", ex.id, "gold_span slices to whitespace"});
      }
      if (ex.distractor_span) {
        const Span& ds = *ex.distractor_span;
        if (ds.start >= ds.end || ds.end > len)
          v.push_back({"SpanOutOfRange", ex.id, "distractor_span"});
        else if (ds.start < ex.gold_span.end && ex.gold_span.start < ds.end)
          v.push_back({"OverlappingSpans", ex.id, "distractor_span overlaps gold_span"});
      }
      if (!ids.insert(ex.id).second)
        v.push_back({"DuplicateId", ex.id, "duplicate within split " + split_name});
    }
  }
  return v;
}

const char* shot_balance_name(ShotBalance b) {
  return b == ShotBalance::per_label_equal ? "per-label-equal" : "unconstrained";
}

ShotBalance parse_shot_balance(const std::string& s) {
  if (s == "per-label-equal") return ShotBalance::per_label_equal;
  if (s == "unconstrained") return ShotBalance::unconstrained;
  raise(Errc::invalid_config, "unknown shot balance '" + s + "'");
}

std::vector<LabeledExample> sample_shots(const Dataset& d, int k, ShotBalance balance,
                                         uint64_t seed) {
  const auto& pool = d.split(kTrainPool).cls;
  if (k < 0) raise(Errc::insufficient_examples, "negative shot count");
  if (k == 0) return {};
  if (static_cast<size_t>(k) > pool.size())
    raise(Errc::insufficient_examples, "requested " + std::to_string(k) + " shots from a pool of " +
                                           std::to_string(pool.size()));

  std::vector<LabeledExample> shots;
  if (balance == ShotBalance::unconstrained) {
    for (size_t i : sample_indices(pool.size(), static_cast<size_t>(k), seed))
      shots.push_back(pool[i]);
  } else {
    const size_t n_labels = d.label_space.size();
    if (n_labels == 0 || static_cast<size_t>(k) % n_labels != 0)
      raise(Errc::indivisible_shot_count, std::to_string(k) + " shots over " +
                                              std::to_string(n_labels) + " labels");
    const size_t per_label = static_cast<size_t>(k) / n_labels;
    for (size_t li = 0; li < n_labels; ++li) {
      const std::string& label = d.label_space[li];
      std::vector<size_t> members;
      for (size_t i = 0; i < pool.size(); ++i)
        if (pool[i].label == label) members.push_back(i);
      if (members.size() < per_label)
        raise(Errc::insufficient_examples, "label \"" + label + "\" has " +
                                               std::to_string(members.size()) + " pool examples, " +
                                               std::to_string(per_label) + " needed");
      for (size_t j : sample_indices(members.size(), per_label, derive_seed(seed, "label", li)))
        shots.push_back(pool[members[j]]);
    }
    // interleave labels by seeded shuffle so a balanced prompt is not grouped
    auto order = sample_indices(shots.size(), shots.size(), derive_seed(seed, "shuffle"));
    std::vector<LabeledExample> shuffled;
    shuffled.reserve(shots.size());
    for (size_t i : order) shuffled.push_back(shots[i]);
    shots = std::move(shuffled);
  }
  return shots;
}

std::vector<ExtractionExample> sample_extraction_shots(const Dataset& d, int k, uint64_t seed) {
  const auto& pool = d.split(kTrainPool).ext;
  if (k < 0) raise(Errc::insufficient_examples, "negative shot count");
  if (k == 0) return {};
  if (static_cast<size_t>(k) > pool.size())
    raise(Errc::insufficient_examples, "requested " + std::to_string(k) + " shots from a pool of " +
                                           std::to_string(pool.size()));
  std::vector<ExtractionExample> shots;
  for (size_t i : sample_indices(pool.size(), static_cast<size_t>(k), seed))
    shots.push_back(pool[i]);
  return shots;
}

}  // namespace sclab
