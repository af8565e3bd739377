// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include "roma/autograd.hpp"
#include "roma/image.hpp"
#include "roma/param_set.hpp"
#include "roma/rng.hpp"
#include "roma/task.hpp"

namespace roma {

// Decoder-only causal transformer over [visual patch tokens; question tokens;
// BOS; answer tokens]. Small on purpose: the point is the training dynamics,
// not capacity.
struct PolicyConfig {
  int image_size = 48;
  int channels = 1;
  int patch_size = 8;
  int width = 64;
  int layers = 2;
  int heads = 4;
  int vocab = vocab::kSize;
  int max_answer_len = 4;
  int ffn_width = 128;

  int patches_per_side() const { return image_size / patch_size; }
  int visual_tokens() const { return patches_per_side() * patches_per_side(); }
  int prefix_len() const { return visual_tokens() + 2 + 1; }  // + question + BOS
  int max_seq() const { return prefix_len() + max_answer_len; }

  void validate() const;
  bool operator==(const PolicyConfig&) const = default;
};

std::string to_json_string(const PolicyConfig& cfg);
PolicyConfig policy_config_from_json(const std::string& text);

// One sampled answer: tokens (terminal EOS included when produced within the
// length budget) and the untempered log-prob of each sampled token under the
// generating policy.
struct Trajectory {
  std::vector<int> tokens;
  std::vector<double> logprobs;
  double temperature = 1.0;

  int length() const { return static_cast<int>(tokens.size()); }
};

// Per-step log-probability rows over the vocabulary under a stated view.
struct TokenDistributions {
  Tensor rows;  // [steps, vocab]
  bool detached = false;
  bool degraded_view = false;

  double logprob_at(int step, int token) const { return rows.at(step, token); }
};

// Parameters: normal(0, 0.02) projections and embeddings, zero biases, unit
// norm gains.
ParamSet init_params(const PolicyConfig& cfg, uint64_t seed);

// Visual token embeddings for one view: non-overlapping patches, linear
// projection, position embeddings added. Value-only convenience API.
Tensor encode_view(const ImageBuffer& img, const ParamSet& params, const PolicyConfig& cfg);

// Taped forward: feed [question, BOS, answer_prefix] after the visual tokens
// and return the log-softmax rows predicting answer steps 1..answer_prefix+1.
Var build_answer_rows(Tape& tape, const ParamSet& params, const PolicyConfig& cfg,
                      const ImageBuffer& view, const Question& question,
                      std::span<const int> answer_prefix);

// Value-only forward (gradients off), same arithmetic path as the taped one.
Tensor answer_rows(const ParamSet& params, const PolicyConfig& cfg, const ImageBuffer& view,
                   const Question& question, std::span<const int> answer_prefix);

// Draw from softmax(logprobs / temperature); temperature <= 0 selects argmax.
int sample_from_logprobs(std::span<const double> logprobs, double temperature, Rng& rng);

struct RolloutSample {
  Trajectory trajectory;
  // Log-prob rows for every generated step under the generating parameters
  // and view, captured from the final forward of the sampling loop.
  Tensor rows;
};

// Ancestral sampling on the given view; stops at EOS or max_len.
RolloutSample sample_rollout_ex(const ParamSet& params, const PolicyConfig& cfg,
                                const ImageBuffer& img, const Question& question,
                                double temperature, int max_len, Rng& rng,
                                bool greedy = false);
Trajectory sample_rollout(const ParamSet& params, const PolicyConfig& cfg,
                          const ImageBuffer& img, const Question& question,
                          double temperature, int max_len, Rng& rng, bool greedy = false);

// Re-evaluate a frozen trajectory under an arbitrary view (teacher forcing).
TokenDistributions teacher_forced_logprobs(const ParamSet& params, const PolicyConfig& cfg,
                                           const ImageBuffer& view, const Question& question,
                                           const Trajectory& traj);

// Greedy decode used by evaluation.
std::vector<int> decode_greedy(const ParamSet& params, const PolicyConfig& cfg,
                               const ImageBuffer& view, const Question& question);

// Checkpoint = parameter file + JSON sidecar (config, vocab hash, step).
void save_checkpoint(const ParamSet& params, const PolicyConfig& cfg,
                     const std::string& bin_path, int64_t step = 0);
struct Checkpoint {
  ParamSet params;
  PolicyConfig config;
  int64_t step = 0;
};
Checkpoint load_checkpoint(const std::string& bin_path);

}  // namespace roma
