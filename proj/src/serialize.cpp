#include "sclab/serialize.hpp"

namespace sclab {

using nlohmann::json;

json to_json(const EditRecord& e) {
  json j;
  switch (e.op) {
    case EditRecord::Op::insert: {
      j["op"] = "insert";
      j["insert_index"] = e.insert_index;
      j["repetition"] = e.repetition;
      j["surface"] = e.surface;
      j["out_token_start"] = e.out_token_start;
      j["out_token_count"] = e.out_token_count;
      break;
    }
    case EditRecord::Op::style: {
      j["op"] = "style";
      if (!e.parallel_source.empty()) {
        j["parallel_source"] = e.parallel_source;
      } else {
        json reps = json::array();
        for (const auto& r : e.replacements)
          reps.push_back({{"token_index", r.token_index}, {"from", r.from}, {"to", r.to}});
        j["replacements"] = reps;
      }
      break;
    }
    case EditRecord::Op::wrap: {
      j["op"] = "wrap";
      j["sign"] = e.sign;
      j["old_span"] = {e.old_span.start, e.old_span.end};
      j["new_span"] = {e.new_span.start, e.new_span.end};
      break;
    }
  }
  return j;
}

EditRecord edit_from_json(const json& j) {
  EditRecord e;
  const std::string op = j.at("op").get<std::string>();
  if (op == "insert") {
    e.op = EditRecord::Op::insert;
    e.insert_index = j.at("insert_index").get<int>();
    e.repetition = j.at("repetition").get<int>();
    e.surface = j.at("surface").get<std::string>();
    e.out_token_start = j.at("out_token_start").get<int>();
    e.out_token_count = j.at("out_token_count").get<int>();
  } else if (op == "style") {
    e.op = EditRecord::Op::style;
    if (j.contains("parallel_source")) {
      e.parallel_source = j.at("parallel_source").get<std::string>();
    } else {
      for (const auto& r : j.at("replacements")) {
        e.replacements.push_back({r.at("token_index").get<int>(),
                                  r.at("from").get<std::string>(),
                                  r.at("to").get<std::string>()});
      }
    }
  } else if (op == "wrap") {
    e.op = EditRecord::Op::wrap;
    e.sign = j.at("sign").get<std::string>();
    e.old_span = {j.at("old_span")[0].get<size_t>(), j.at("old_span")[1].get<size_t>()};
    e.new_span = {j.at("new_span")[0].get<size_t>(), j.at("new_span")[1].get<size_t>()};
  } else {
    raise(Errc::malformed_line, "unknown edit op '" + op + "'");
  }
  return e;
}

json to_json(const PromptManifest& m) {
  json j;
  j["template_id"] = m.template_id;
  j["seed"] = m.seed;
  j["trigger_kind"] = trigger_kind_name(m.trigger.kind);
  j["trigger"] = m.trigger.surface;
  j["target_label"] = m.target_label;
  j["position"] = position_policy_name(m.policy);
  j["repetition"] = m.repetition;
  j["shot_ids"] = m.shot_ids;
  j["injected_indices"] = m.injected_indices;
  json edits = json::object();
  for (const auto& [shot, edit] : m.edits) edits[std::to_string(shot)] = to_json(edit);
  j["edits"] = edits;
  json collisions = json::array();
  for (bool c : m.collisions) collisions.push_back(c);
  j["collisions"] = collisions;
  json spans = json::array();
  for (const auto& s : m.shot_token_spans) spans.push_back({s.start, s.end});
  j["shot_token_spans"] = spans;
  return j;
}

json to_json(const EvalRecord& r) {
  json j;
  j["query_id"] = r.query_id;
  j["gold"] = r.gold;
  j["prediction"] = r.prediction;
  j["correct"] = r.correct;
  j["condition"] = condition_name(r.condition);
  j["prompt_index"] = r.prompt_index;
  return j;
}

EvalRecord eval_record_from_json(const json& j) {
  EvalRecord r;
  r.query_id = j.at("query_id").get<std::string>();
  r.gold = j.at("gold").get<std::string>();
  r.prediction = j.at("prediction").get<std::string>();
  r.correct = j.at("correct").get<bool>();
  r.condition = parse_condition(j.at("condition").get<std::string>());
  r.prompt_index = j.at("prompt_index").get<int>();
  return r;
}

json to_json(const DropReport& r) {
  json j;
  j["clean_accuracy"] = round2(r.clean_accuracy);
  j["anti_accuracy"] = round2(r.anti_accuracy);
  j["drop"] = round2(r.drop);
  j["n_clean"] = r.n_clean;
  j["n_anti"] = r.n_anti;
  j["averaged_over"] = r.averaged_over;
  j["validation_accuracy"] = round2(r.validation_accuracy);
  j["prompt_seed"] = r.prompt_seed;
  j["clean_ci"] = round2(r.clean_ci);
  j["anti_ci"] = round2(r.anti_ci);
  return j;
}

json to_json(const TokenImportance& t) {
  json j;
  j["token"] = t.token;
  j["position"] = t.position;
  j["importance"] = t.importance;
  j["is_trigger"] = t.is_trigger;
  return j;
}

json report_summary_json(const ImportanceReport& rep) {
  json j;
  j["query_set"] = rep.query_set;
  j["trigger_rank"] = rep.trigger_rank;
  j["top1"] = rep.top1_non_trigger;
  j["top2"] = rep.top2_non_trigger;
  j["k_top"] = rep.k_top;
  j["flagged"] = rep.flagged;
  j["trigger_offsets"] = rep.trigger_offsets;
  json spans = json::array();
  for (const auto& s : rep.trigger_span_scores) {
    spans.push_back({{"token_start", s.token_start},
                     {"token_count", s.token_count},
                     {"importance", s.importance}});
  }
  j["trigger_span_scores"] = spans;
  return j;
}

}  // namespace sclab
