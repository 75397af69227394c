#pragma once

#include "json.hpp"
#include "sclab/detect.hpp"

namespace sclab {

nlohmann::json to_json(const EditRecord& e);
EditRecord edit_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PromptManifest& m);

nlohmann::json to_json(const EvalRecord& r);
EvalRecord eval_record_from_json(const nlohmann::json& j);

nlohmann::json to_json(const DropReport& r);

nlohmann::json to_json(const TokenImportance& t);
// summary record: trigger_rank, top1/top2, flagged, k_top, span scores
nlohmann::json report_summary_json(const ImportanceReport& rep);

}  // namespace sclab
