// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "roma/corruption.hpp"
#include "roma/policy.hpp"
#include "roma/task.hpp"

namespace roma {

enum class EvalPool { clean, seen, unseen };

const char* pool_name(EvalPool pool);
EvalPool pool_from_name(const std::string& name);
std::vector<CorruptionKind> pool_kinds(EvalPool pool);

// Greedy decoding throughout; the level is ignored for the clean pool.
struct EvalProtocol {
  EvalPool pool = EvalPool::clean;
  int level = 3;
  int instance_count = 1000;
  uint64_t eval_seed = 0;
  RenderConfig render;

  void validate() const;
  bool compatible(const EvalProtocol& other) const;
};

struct EvalCell {
  CorruptionKind kind;
  int level = 0;
  double accuracy = 0.0;
};

struct EvalReport {
  EvalPool pool = EvalPool::clean;
  int level = 0;
  int instance_count = 0;
  uint64_t eval_seed = 0;
  std::string checkpoint_id;
  std::vector<EvalCell> cells;   // one per kind in the pool
  double macro_average = 0.0;    // unweighted mean over kinds
  double clean_accuracy = 0.0;
  double gap = 0.0;              // clean - macro
};

using DecodeFn = std::function<std::vector<int>(const ImageBuffer&, const Question&)>;

// Deterministic instance set from the eval seed range (disjoint from the
// training range), per-instance corruption seeds derived from (kind, level,
// instance seed), exact-match scoring, per-kind aggregation.
EvalReport evaluate(const DecodeFn& decode, const EvalProtocol& protocol,
                    const std::string& checkpoint_id = "decoder");

EvalReport evaluate_checkpoint(const std::string& ckpt_path, const EvalProtocol& protocol);

struct ComparisonRow {
  std::string metric;
  double a = 0.0;
  double b = 0.0;
  double delta = 0.0;  // b - a
};

struct Comparison {
  std::vector<ComparisonRow> rows;
};

// Requires identical pool/level/count/seed between the two reports.
Comparison compare(const EvalReport& a, const EvalReport& b);

void write_report(const EvalReport& report, const std::string& dir);
EvalReport read_report_json(const std::string& path);
std::string report_to_csv(const EvalReport& report);
std::string comparison_to_csv(const Comparison& cmp);

}  // namespace roma
