// SPDX-License-Identifier: Apache-2.0
#include "roma/objective.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace roma {

void RomaCoefficients::validate() const {
  if (alpha < 0 || beta < 0) throw std::invalid_argument("alpha and beta must be >= 0");
  if (!(eps_clip > 0 && eps_clip < 1)) throw std::invalid_argument("eps_clip must be in (0,1)");
  if (k_views < 1) throw std::invalid_argument("k_views must be >= 1");
}

AdvantageResult group_advantages(const std::vector<double>& rewards) {
  const size_t g = rewards.size();
  if (g < 2) throw std::invalid_argument("group_advantages: need at least 2 rollouts");
  double mean = 0.0;
  for (const double r : rewards) mean += r;
  mean /= static_cast<double>(g);
  double var = 0.0;
  for (const double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(g);  // population variance
  const double std_pop = std::sqrt(var);

  AdvantageResult out;
  out.advantages.resize(g, 0.0);
  if (std_pop == 0.0) {
    out.degenerate = true;
    return out;
  }
  for (size_t i = 0; i < g; ++i) out.advantages[i] = (rewards[i] - mean) / (std_pop + 1e-6);
  return out;
}

double token_kl_surrogate(double p_logprob, double q_logprob) {
  if (!std::isfinite(p_logprob) || !std::isfinite(q_logprob))
    throw std::invalid_argument("token_kl_surrogate: non-finite log-prob");
  return std::exp(p_logprob) * (p_logprob - q_logprob);
}

double invariance_penalty(const Trajectory& traj, const TokenDistributions& clean_detached,
                          const TokenDistributions& degraded,
                          RomaCoefficients::KlNorm norm) {
  const int len = traj.length();
  if (clean_detached.rows.rank() != 2 || clean_detached.rows.shape[0] != len ||
      !clean_detached.rows.same_shape(degraded.rows))
    throw std::invalid_argument("invariance_penalty: row count does not match trajectory");
  double sum = 0.0;
  for (int t = 0; t < len; ++t) {
    const int tok = traj.tokens[static_cast<size_t>(t)];
    sum += token_kl_surrogate(clean_detached.logprob_at(t, tok), degraded.logprob_at(t, tok));
  }
  if (norm == RomaCoefficients::KlNorm::per_token_mean) sum /= static_cast<double>(len);
  return sum;
}

WorstCaseResult worst_case_penalty(const std::vector<std::vector<double>>& per_view_per_traj,
                                   const std::vector<bool>& mask,
                                   RomaCoefficients::PenaltyMode mode) {
  if (per_view_per_traj.empty()) throw std::invalid_argument("worst_case_penalty: no views");
  WorstCaseResult out;
  for (const bool m : mask) out.masked_count += m ? 1 : 0;
  out.per_view.reserve(per_view_per_traj.size());
  for (const auto& view : per_view_per_traj) {
    if (view.size() != mask.size())
      throw std::invalid_argument("worst_case_penalty: mask misaligned with trajectories");
    double sum = 0.0;
    for (size_t i = 0; i < view.size(); ++i)
      if (mask[i]) sum += view[i];
    out.per_view.push_back(out.masked_count > 0 ? sum / out.masked_count : 0.0);
  }
  double mean = 0.0;
  for (const double v : out.per_view) mean += v;
  out.mean_over_views = mean / static_cast<double>(out.per_view.size());

  if (out.masked_count == 0) {
    out.value = 0.0;
    out.selected_view = -1;  // nothing to select on a fully masked batch
    return out;
  }
  if (mode == RomaCoefficients::PenaltyMode::mean) {
    out.value = out.mean_over_views;
    out.selected_view = -1;
    return out;
  }
  size_t best = 0;
  for (size_t k = 1; k < out.per_view.size(); ++k)
    if (out.per_view[k] > out.per_view[best]) best = k;
  out.value = out.per_view[best];
  out.selected_view = static_cast<int>(best);
  return out;
}

double clipped_surrogate(double new_logprob, double old_logprob, double advantage,
                         double eps_clip) {
  const double rho = std::exp(new_logprob - old_logprob);
  if (!std::isfinite(rho)) throw std::invalid_argument("clipped_surrogate: non-finite ratio");
  const double clipped = std::clamp(rho, 1.0 - eps_clip, 1.0 + eps_clip);
  return std::min(rho * advantage, clipped * advantage);
}

double pg_objective_value(const RolloutGroup& group,
                          const std::vector<TokenDistributions>& view_rows, double eps_clip) {
  if (view_rows.size() != group.trajectories.size())
    throw std::invalid_argument("pg_objective_value: rows misaligned with trajectories");
  if (group.degenerate) return 0.0;
  double total = 0.0;
  for (size_t i = 0; i < group.trajectories.size(); ++i) {
    const Trajectory& traj = group.trajectories[i];
    double traj_sum = 0.0;
    for (int t = 0; t < traj.length(); ++t) {
      const int tok = traj.tokens[static_cast<size_t>(t)];
      traj_sum += clipped_surrogate(view_rows[i].logprob_at(t, tok),
                                    group.old_clean_rows[i].at(t, tok),
                                    group.advantages[i], eps_clip);
    }
    total += traj_sum;
  }
  return total / static_cast<double>(group.trajectories.size());
}

LossBreakdown total_objective(double j_rl, double j_aug_pg, const WorstCaseResult& worst,
                              const RomaCoefficients& coeffs) {
  LossBreakdown out;
  out.j_rl = j_rl;
  out.j_aug_pg = j_aug_pg;
  out.g_selected = worst.value;
  out.per_view_penalty = worst.per_view;
  out.g_mean = worst.mean_over_views;
  out.selected_view = worst.selected_view;
  out.masked_count = worst.masked_count;
  out.j_total = j_rl + coeffs.effective_alpha() * j_aug_pg - coeffs.beta * worst.value;
  return out;
}

Var clipped_surrogate_sum(Tape& tape, Var logprob_rows, std::span<const int> tokens,
                          std::span<const double> old_logprobs, double advantage,
                          double eps_clip) {
  if (tokens.size() != old_logprobs.size())
    throw std::invalid_argument("clipped_surrogate_sum: token/old log-prob mismatch");
  const Var new_lp = tape.gather_rows(logprob_rows, tokens);
  Tensor old_t({static_cast<int64_t>(old_logprobs.size())});
  std::copy(old_logprobs.begin(), old_logprobs.end(), old_t.data.begin());
  const Var ratio = tape.exp(tape.sub(new_lp, tape.constant(std::move(old_t))));
  const Var unclipped = tape.scale(ratio, advantage);
  const Var clipped = tape.scale(tape.clamp(ratio, 1.0 - eps_clip, 1.0 + eps_clip), advantage);
  return tape.sum(tape.minimum(unclipped, clipped));
}

Var invariance_penalty_sum(Tape& tape, Var degraded_rows, std::span<const int> tokens,
                           std::span<const double> clean_logprobs,
                           RomaCoefficients::KlNorm norm) {
  if (tokens.size() != clean_logprobs.size())
    throw std::invalid_argument("invariance_penalty_sum: token/clean log-prob mismatch");
  const Var q = tape.gather_rows(degraded_rows, tokens);
  Tensor p({static_cast<int64_t>(clean_logprobs.size())});
  Tensor w({static_cast<int64_t>(clean_logprobs.size())});
  for (size_t t = 0; t < clean_logprobs.size(); ++t) {
    p.data[t] = clean_logprobs[t];
    w.data[t] = std::exp(clean_logprobs[t]);
  }
  const Var diff = tape.sub(tape.constant(std::move(p)), q);
  Var total = tape.sum(tape.mul(tape.constant(std::move(w)), diff));
  if (norm == RomaCoefficients::KlNorm::per_token_mean)
    total = tape.scale(total, 1.0 / static_cast<double>(tokens.size()));
  return total;
}

}  // namespace roma
