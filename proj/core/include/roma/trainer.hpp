// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "roma/objective.hpp"
#include "roma/optim.hpp"
#include "roma/policy.hpp"
#include "roma/task.hpp"

namespace roma {

struct TrainConfig {
  int total_steps = 2000;
  int prompts_per_batch = 16;
  int group_size = 8;
  double temperature = 1.0;
  double learning_rate = 1e-3;
  double weight_decay = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  RomaCoefficients coeffs;
  uint64_t master_seed = 1;
  int checkpoint_interval = 500;

  enum class Mode { grpo_baseline, roma };
  Mode mode = Mode::roma;

  PolicyConfig policy;
  RenderConfig render;

  // The baseline is the same code path with zeroed robustness coefficients.
  RomaCoefficients effective_coeffs() const;
  AdamConfig adam() const;
  void validate() const;
};

std::string to_json_string(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& text);
const char* mode_name(TrainConfig::Mode mode);
TrainConfig::Mode mode_from_name(const std::string& name);

struct TrainLogRecord {
  int step = 0;
  double mean_reward = 0.0;
  double accuracy = 0.0;  // exact-match share in the batch
  LossBreakdown loss;
  std::string selected_view_kind = "-";
  double grad_norm = 0.0;
  double wall_ms = 0.0;
};

std::string train_log_header();
std::string to_csv_row(const TrainLogRecord& rec);

// Deep copy; the snapshot is never updated within a step.
ParamSet snapshot_old_policy(const ParamSet& params);

// Guard at the rollout entry point: training never samples from a degraded
// buffer.
void assert_clean_for_rollout(const ImageBuffer& img);

// One optimization step: clean rollouts from the old policy, rewards and
// group advantages, teacher-forced view passes, objective assembly, backward
// and Adam update. Rollouts are never sampled from degraded buffers.
TrainLogRecord train_step(ParamSet& params, const ParamSet& old_params,
                          const std::vector<uint64_t>& prompt_seeds, int step_index,
                          const TrainConfig& cfg);

struct TrainRunResult {
  std::string out_dir;
  std::string final_checkpoint;
  std::vector<TrainLogRecord> records;
};

// Full run: config echo, per-step CSV log, checkpoints at the configured
// interval and at the end. `resume_checkpoint` restores parameters and
// optimizer moments and continues from the recorded step.
TrainRunResult train_run(const TrainConfig& cfg, const std::string& out_dir,
                         const std::string& resume_checkpoint = {});

}  // namespace roma
