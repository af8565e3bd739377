// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "roma/autograd.hpp"
#include "roma/image.hpp"
#include "roma/policy.hpp"
#include "roma/task.hpp"

namespace roma {

// Coefficients and mode switches for the robustness objective. The three mode
// switches exist to reproduce the ablations; defaults are the paper settings.
struct RomaCoefficients {
  double alpha = 0.10;     // auxiliary policy-gradient weight
  double beta = 0.10;      // invariance penalty weight
  double eps_clip = 0.20;  // clipped-surrogate range
  int k_views = 3;         // degraded views per step

  enum class KlNorm { sum, per_token_mean };
  enum class PenaltyMode { worst, mean };
  enum class MaskMode { conditioned, unconditional };

  KlNorm kl_normalize = KlNorm::sum;
  PenaltyMode penalty_mode = PenaltyMode::worst;
  MaskMode mask_mode = MaskMode::conditioned;
  bool aux_pg_enabled = true;

  double effective_alpha() const { return aux_pg_enabled ? alpha : 0.0; }
  void validate() const;
};

// G rollouts for one prompt: trajectories sampled from the old policy on the
// clean view, their rewards, the frozen old-policy clean log-prob rows, and
// group-relative advantages.
struct RolloutGroup {
  uint64_t prompt_seed = 0;
  ImageBuffer clean_image;
  Question question;
  std::vector<Trajectory> trajectories;
  std::vector<Tensor> old_clean_rows;  // [|y|, vocab] per trajectory
  std::vector<double> rewards;
  std::vector<double> advantages;
  bool degenerate = false;

  int size() const { return static_cast<int>(trajectories.size()); }
};

struct AdvantageResult {
  std::vector<double> advantages;
  bool degenerate = false;
};

// A_i = (R_i - mean) / (std_pop + 1e-6); all zeros and a degenerate flag when
// the rewards have no variance.
AdvantageResult group_advantages(const std::vector<double>& rewards);

// Per-sampled-token KL surrogate exp(p)(p - q) with p detached upstream.
double token_kl_surrogate(double p_logprob, double q_logprob);

// Sum of the token surrogates over a trajectory (optionally length-averaged).
double invariance_penalty(const Trajectory& traj, const TokenDistributions& clean_detached,
                          const TokenDistributions& degraded,
                          RomaCoefficients::KlNorm norm = RomaCoefficients::KlNorm::sum);

struct WorstCaseResult {
  double value = 0.0;        // selected penalty (max or mean over views)
  int selected_view = -1;    // argmax view, -1 when fully masked or mean mode
  int masked_count = 0;      // trajectories passing the correctness mask
  std::vector<double> per_view;  // masked batch mean per view
  double mean_over_views = 0.0;
};

// Per view: mean penalty over masked-in trajectories (0 when none pass), then
// max (or mean) across views. Masked-out trajectories contribute nothing.
WorstCaseResult worst_case_penalty(const std::vector<std::vector<double>>& per_view_per_traj,
                                   const std::vector<bool>& mask,
                                   RomaCoefficients::PenaltyMode mode);

// min(rho A, clip(rho, 1-eps, 1+eps) A) with rho = exp(new - old).
double clipped_surrogate(double new_logprob, double old_logprob, double advantage,
                         double eps_clip);

// Trajectory-summed clipped surrogate under one view, averaged over the
// group. Advantages come from the clean rollouts; no correctness mask here.
double pg_objective_value(const RolloutGroup& group,
                          const std::vector<TokenDistributions>& view_rows, double eps_clip);

struct LossBreakdown {
  double j_rl = 0.0;
  double j_aug_pg = 0.0;
  double g_selected = 0.0;
  double j_total = 0.0;
  std::vector<double> per_view_penalty;
  double g_mean = 0.0;
  int selected_view = -1;
  int masked_count = 0;
  double mean_reward = 0.0;
};

// J_total = J_RL + alpha * J_aug_pg - beta * G_selected (alpha zeroed when the
// auxiliary term is disabled). The correctness indicator is already folded
// into the worst-case result.
LossBreakdown total_objective(double j_rl, double j_aug_pg, const WorstCaseResult& worst,
                              const RomaCoefficients& coeffs);

// --- taped builders (gradient path) ----------------------------------------

// Scalar sum over t of min(rho_t A, clip(rho_t) A) from log-prob rows on the
// tape; old log-probs are frozen constants.
Var clipped_surrogate_sum(Tape& tape, Var logprob_rows, std::span<const int> tokens,
                          std::span<const double> old_logprobs, double advantage,
                          double eps_clip);

// Scalar invariance penalty with the clean branch entering as constants, so
// gradient flows only through the degraded rows.
Var invariance_penalty_sum(Tape& tape, Var degraded_rows, std::span<const int> tokens,
                           std::span<const double> clean_logprobs,
                           RomaCoefficients::KlNorm norm);

}  // namespace roma
