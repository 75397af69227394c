#pragma once

#include <string>
#include <vector>

#include "sclab/config.hpp"
#include "sclab/detect.hpp"

namespace sclab {

// Process exit code for an error: 2 model-client, 3 data validation,
// 1 everything else (usage / config).
int exit_code_for(const Error& e);

// Loads, names, and cross-validates the configured dataset.
Dataset load_run_dataset(const RunConfig& c);

// Each command writes its artifacts under c.out_dir: run.json (config,
// config hash, master seed, checksums of every other artifact, reports),
// timestamps.json (the only file excluded from determinism guarantees), and
// the command's own outputs. A one-line summary goes to stdout.

// Builds the candidate prompt pool; writes prompts/candidate_<p>.txt,
// .poisoned.txt, and .manifest.json for each.
void cmd_inject(const RunConfig& c);

// Builds the anti-shortcut test set; writes antiset.jsonl + antiset.manifest.json.
void cmd_antiset(const RunConfig& c);

// Full evaluation: default drop measurement, --ablation, --sweep, or the
// simulated-size scaling mode. Writes prompts, anti-set, records.jsonl,
// summary.csv, plotdata.csv (sweep / scaling), and the report block.
void cmd_eval(const RunConfig& c);

// Leave-one-out token attribution on the first poisoned candidate prompt;
// writes detect.json and annotation.txt.
void cmd_detect(const RunConfig& c);

// Verifies ledger checksums, re-derives accuracies from stored records, and
// emits the merged summary (stdout, or out_path when non-empty). Purely
// offline. Ledgers merge keyed by config hash; a hash collision with
// different content is an error.
void cmd_report(const std::vector<std::string>& ledger_dirs, const std::string& out_path);

}  // namespace sclab
