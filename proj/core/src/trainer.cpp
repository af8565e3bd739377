// SPDX-License-Identifier: Apache-2.0
#include "roma/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "roma/corruption.hpp"

namespace roma {

namespace fs = std::filesystem;
using json = nlohmann::json;

RomaCoefficients TrainConfig::effective_coeffs() const {
  RomaCoefficients c = coeffs;
  if (mode == Mode::grpo_baseline) {
    c.alpha = 0.0;
    c.beta = 0.0;
  }
  if (!c.aux_pg_enabled) c.alpha = 0.0;
  return c;
}

AdamConfig TrainConfig::adam() const {
  return AdamConfig{learning_rate, weight_decay, adam_beta1, adam_beta2, adam_eps};
}

void TrainConfig::validate() const {
  if (total_steps < 0) throw std::invalid_argument("total_steps must be >= 0");
  if (prompts_per_batch < 1) throw std::invalid_argument("prompts_per_batch must be >= 1");
  if (group_size < 2) throw std::invalid_argument("group_size must be >= 2");
  if (temperature <= 0) throw std::invalid_argument("temperature must be positive");
  if (learning_rate <= 0) throw std::invalid_argument("learning_rate must be positive");
  if (checkpoint_interval < 1) throw std::invalid_argument("checkpoint_interval must be >= 1");
  coeffs.validate();
  policy.validate();
  if (policy.image_size != render.image_size)
    throw std::invalid_argument("policy and render image sizes differ");
}

const char* mode_name(TrainConfig::Mode mode) {
  return mode == TrainConfig::Mode::grpo_baseline ? "grpo-baseline" : "roma";
}

TrainConfig::Mode mode_from_name(const std::string& name) {
  if (name == "grpo-baseline") return TrainConfig::Mode::grpo_baseline;
  if (name == "roma") return TrainConfig::Mode::roma;
  throw std::invalid_argument("unknown mode: " + name);
}

namespace {

const char* kl_norm_name(RomaCoefficients::KlNorm n) {
  return n == RomaCoefficients::KlNorm::sum ? "sum" : "per-token-mean";
}
const char* penalty_mode_name(RomaCoefficients::PenaltyMode m) {
  return m == RomaCoefficients::PenaltyMode::worst ? "worst" : "mean";
}
const char* mask_mode_name(RomaCoefficients::MaskMode m) {
  return m == RomaCoefficients::MaskMode::conditioned ? "conditioned" : "unconditional";
}

RomaCoefficients::KlNorm kl_norm_from_name(const std::string& s) {
  if (s == "sum") return RomaCoefficients::KlNorm::sum;
  if (s == "per-token-mean") return RomaCoefficients::KlNorm::per_token_mean;
  throw std::invalid_argument("unknown kl_normalize: " + s);
}
RomaCoefficients::PenaltyMode penalty_mode_from_name(const std::string& s) {
  if (s == "worst") return RomaCoefficients::PenaltyMode::worst;
  if (s == "mean") return RomaCoefficients::PenaltyMode::mean;
  throw std::invalid_argument("unknown penalty_mode: " + s);
}
RomaCoefficients::MaskMode mask_mode_from_name(const std::string& s) {
  if (s == "conditioned") return RomaCoefficients::MaskMode::conditioned;
  if (s == "unconditional") return RomaCoefficients::MaskMode::unconditional;
  throw std::invalid_argument("unknown mask_mode: " + s);
}

}  // namespace

std::string to_json_string(const TrainConfig& cfg) {
  json j;
  j["total_steps"] = cfg.total_steps;
  j["prompts_per_batch"] = cfg.prompts_per_batch;
  j["group_size"] = cfg.group_size;
  j["temperature"] = cfg.temperature;
  j["learning_rate"] = cfg.learning_rate;
  j["weight_decay"] = cfg.weight_decay;
  j["adam_beta1"] = cfg.adam_beta1;
  j["adam_beta2"] = cfg.adam_beta2;
  j["adam_eps"] = cfg.adam_eps;
  j["master_seed"] = cfg.master_seed;
  j["checkpoint_interval"] = cfg.checkpoint_interval;
  j["mode"] = mode_name(cfg.mode);
  j["coeffs"] = {{"alpha", cfg.coeffs.alpha},
                 {"beta", cfg.coeffs.beta},
                 {"eps_clip", cfg.coeffs.eps_clip},
                 {"k_views", cfg.coeffs.k_views},
                 {"kl_normalize", kl_norm_name(cfg.coeffs.kl_normalize)},
                 {"penalty_mode", penalty_mode_name(cfg.coeffs.penalty_mode)},
                 {"mask_mode", mask_mode_name(cfg.coeffs.mask_mode)},
                 {"aux_pg_enabled", cfg.coeffs.aux_pg_enabled}};
  j["policy"] = json::parse(roma::to_json_string(cfg.policy));
  j["render"] = {{"image_size", cfg.render.image_size},
                 {"min_glyphs", cfg.render.min_glyphs},
                 {"max_glyphs", cfg.render.max_glyphs},
                 {"radius_min", cfg.render.radius_min},
                 {"radius_max", cfg.render.radius_max},
                 {"antialias", cfg.render.antialias},
                 {"background", cfg.render.background},
                 {"foreground", cfg.render.foreground}};
  return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& text) {
  const json j = json::parse(text);
  TrainConfig cfg;
  auto get = [&j](const char* key, auto& out) {
    if (j.contains(key)) out = j.at(key).get<std::decay_t<decltype(out)>>();
  };
  get("total_steps", cfg.total_steps);
  get("prompts_per_batch", cfg.prompts_per_batch);
  get("group_size", cfg.group_size);
  get("temperature", cfg.temperature);
  get("learning_rate", cfg.learning_rate);
  get("weight_decay", cfg.weight_decay);
  get("adam_beta1", cfg.adam_beta1);
  get("adam_beta2", cfg.adam_beta2);
  get("adam_eps", cfg.adam_eps);
  get("master_seed", cfg.master_seed);
  get("checkpoint_interval", cfg.checkpoint_interval);
  if (j.contains("mode")) cfg.mode = mode_from_name(j.at("mode").get<std::string>());
  if (j.contains("coeffs")) {
    const json& c = j.at("coeffs");
    if (c.contains("alpha")) cfg.coeffs.alpha = c.at("alpha").get<double>();
    if (c.contains("beta")) cfg.coeffs.beta = c.at("beta").get<double>();
    if (c.contains("eps_clip")) cfg.coeffs.eps_clip = c.at("eps_clip").get<double>();
    if (c.contains("k_views")) cfg.coeffs.k_views = c.at("k_views").get<int>();
    if (c.contains("kl_normalize"))
      cfg.coeffs.kl_normalize = kl_norm_from_name(c.at("kl_normalize").get<std::string>());
    if (c.contains("penalty_mode"))
      cfg.coeffs.penalty_mode = penalty_mode_from_name(c.at("penalty_mode").get<std::string>());
    if (c.contains("mask_mode"))
      cfg.coeffs.mask_mode = mask_mode_from_name(c.at("mask_mode").get<std::string>());
    if (c.contains("aux_pg_enabled"))
      cfg.coeffs.aux_pg_enabled = c.at("aux_pg_enabled").get<bool>();
  }
  if (j.contains("policy")) cfg.policy = policy_config_from_json(j.at("policy").dump());
  if (j.contains("render")) {
    const json& r = j.at("render");
    auto getr = [&r](const char* key, auto& out) {
      if (r.contains(key)) out = r.at(key).get<std::decay_t<decltype(out)>>();
    };
    getr("image_size", cfg.render.image_size);
    getr("min_glyphs", cfg.render.min_glyphs);
    getr("max_glyphs", cfg.render.max_glyphs);
    getr("radius_min", cfg.render.radius_min);
    getr("radius_max", cfg.render.radius_max);
    getr("antialias", cfg.render.antialias);
    getr("background", cfg.render.background);
    getr("foreground", cfg.render.foreground);
  }
  cfg.validate();
  return cfg;
}

std::string train_log_header() {
  return "step,mean_reward,accuracy,j_rl,j_aug_pg,g_worst,selected_view,masked_count,"
         "j_total,grad_norm,wall_ms";
}

std::string to_csv_row(const TrainLogRecord& rec) {
  std::ostringstream os;
  os.precision(17);
  os << rec.step << ',' << rec.mean_reward << ',' << rec.accuracy << ',' << rec.loss.j_rl
     << ',' << rec.loss.j_aug_pg << ',' << rec.loss.g_selected << ','
     << rec.selected_view_kind << ',' << rec.loss.masked_count << ',' << rec.loss.j_total
     << ',' << rec.grad_norm << ',' << rec.wall_ms;
  return os.str();
}

ParamSet snapshot_old_policy(const ParamSet& params) {
  ParamSet copy;
  for (const auto& [name, e] : params) copy.add(name, e.value);
  copy.adam_t = params.adam_t;
  return copy;
}

void assert_clean_for_rollout(const ImageBuffer& img) {
  if (img.provenance != Provenance::clean)
    throw std::logic_error("rollout sampling received a degraded image buffer");
}

namespace {

struct UniqueTrajectory {
  Trajectory traj;
  Tensor old_rows;          // frozen old-policy clean rows [L, vocab]
  std::vector<double> old_logprobs;  // old_rows at the sampled tokens
  int count = 0;            // multiplicity within the group
  double advantage = 0.0;
  double reward = 0.0;
  bool masked_in = false;
  std::vector<int> members;  // indices in the group's trajectory list
};

struct PromptWork {
  TaskInstance instance;
  ImageBuffer clean_image;
  RolloutGroup group;
  std::vector<UniqueTrajectory> uniques;
  int aux_view = 0;
  std::vector<ImageBuffer> degraded;          // per view, lazily filled
  std::vector<std::vector<double>> penalties;  // [view][unique]
};

// Sampling with a per-group forward cache: rollouts that revisit a prefix
// reuse the teacher-forced rows, which is pure caching of a deterministic
// function.
class GroupSampler {
 public:
  GroupSampler(const ParamSet& params, const PolicyConfig& cfg, const ImageBuffer& img,
               const Question& question)
      : params_(params), cfg_(cfg), img_(img), question_(question) {}

  const Tensor& rows_for_prefix(const std::vector<int>& prefix) {
    auto it = cache_.find(prefix);
    if (it != cache_.end()) return it->second;
    Tensor rows = answer_rows(params_, cfg_, img_, question_, prefix);
    return cache_.emplace(prefix, std::move(rows)).first->second;
  }

  Trajectory sample(double temperature, int max_len, Rng& rng) {
    Trajectory traj;
    traj.temperature = temperature;
    for (int step = 0; step < max_len; ++step) {
      const Tensor& rows = rows_for_prefix(traj.tokens);
      const int64_t last = rows.shape[0] - 1;
      const std::span<const double> row(rows.row_ptr(last),
                                        static_cast<size_t>(rows.shape[1]));
      const int tok = sample_from_logprobs(row, temperature, rng);
      traj.logprobs.push_back(row[static_cast<size_t>(tok)]);
      traj.tokens.push_back(tok);
      if (tok == vocab::kEos) break;
    }
    return traj;
  }

 private:
  const ParamSet& params_;
  const PolicyConfig& cfg_;
  const ImageBuffer& img_;
  const Question& question_;
  std::map<std::vector<int>, Tensor> cache_;
};

std::vector<double> logprobs_at_tokens(const Tensor& rows, const std::vector<int>& tokens) {
  std::vector<double> out(tokens.size());
  for (size_t t = 0; t < tokens.size(); ++t)
    out[t] = rows.at(static_cast<int64_t>(t), tokens[t]);
  return out;
}

}  // namespace

TrainLogRecord train_step(ParamSet& params, const ParamSet& old_params,
                          const std::vector<uint64_t>& prompt_seeds, int step_index,
                          const TrainConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  const RomaCoefficients coeffs = cfg.effective_coeffs();
  const bool want_penalty = coeffs.beta > 0.0;
  const bool want_aux = coeffs.alpha > 0.0;
  const int n_prompts = static_cast<int>(prompt_seeds.size());
  const int total_traj = n_prompts * cfg.group_size;

  const Rng master(cfg.master_seed);
  Rng spec_rng = master.stream("corrupt-spec").fork(static_cast<uint64_t>(step_index));
  // Drawn every step regardless of mode so the clean-path streams stay
  // aligned between the baseline and the robustness objective.
  const AugmentationPool pool = AugmentationPool::seen();
  const std::vector<CorruptionSpec> view_specs =
      sample_k_distinct(pool, coeffs.k_views, spec_rng);

  // The penalty anchor is the current policy's clean distribution, detached.
  // With a single update per batch the current parameters equal the rollout
  // snapshot, so the sampling rows double as the anchor; fall back to a fresh
  // pass if a caller hands us diverged parameters.
  const bool params_match_old = params.values_equal(old_params);

  std::vector<PromptWork> work(static_cast<size_t>(n_prompts));
  double reward_sum = 0.0;

  for (int j = 0; j < n_prompts; ++j) {
    PromptWork& w = work[static_cast<size_t>(j)];
    w.instance = generate(prompt_seeds[static_cast<size_t>(j)], cfg.render);
    w.clean_image = render(w.instance, cfg.render);
    assert_clean_for_rollout(w.clean_image);

    w.group.prompt_seed = prompt_seeds[static_cast<size_t>(j)];
    w.group.question = w.instance.question;

    GroupSampler sampler(old_params, cfg.policy, w.clean_image, w.instance.question);
    Rng prompt_rollout_rng = master.stream("rollout")
                                 .fork(static_cast<uint64_t>(step_index))
                                 .fork(static_cast<uint64_t>(j));
    for (int g = 0; g < cfg.group_size; ++g) {
      Rng rng_g = prompt_rollout_rng.fork(static_cast<uint64_t>(g));
      Trajectory traj = sampler.sample(cfg.temperature, cfg.policy.max_answer_len, rng_g);
      const double r = reward(w.instance, traj.tokens);
      reward_sum += r;
      w.group.rewards.push_back(r);
      w.group.trajectories.push_back(std::move(traj));
    }
    AdvantageResult adv = group_advantages(w.group.rewards);
    w.group.advantages = std::move(adv.advantages);
    w.group.degenerate = adv.degenerate;

    // collapse duplicate trajectories; duplicates share rewards, advantages
    // and every teacher-forced pass
    std::map<std::vector<int>, size_t> seen;
    for (int g = 0; g < cfg.group_size; ++g) {
      const Trajectory& traj = w.group.trajectories[static_cast<size_t>(g)];
      auto [it, inserted] = seen.emplace(traj.tokens, w.uniques.size());
      if (inserted) {
        UniqueTrajectory u;
        u.traj = traj;
        std::vector<int> prefix(traj.tokens.begin(), traj.tokens.end() - 1);
        u.old_rows = sampler.rows_for_prefix(prefix);
        u.old_logprobs = logprobs_at_tokens(u.old_rows, traj.tokens);
        u.advantage = w.group.advantages[static_cast<size_t>(g)];
        u.reward = w.group.rewards[static_cast<size_t>(g)];
        u.masked_in = coeffs.mask_mode == RomaCoefficients::MaskMode::unconditional
                          ? true
                          : u.reward > 0.0;
        w.uniques.push_back(std::move(u));
      }
      w.uniques[it->second].count += 1;
      w.uniques[it->second].members.push_back(g);
      w.group.old_clean_rows.push_back(w.uniques[it->second].old_rows);
    }

    Rng aux_rng = master.stream("aux-view")
                      .fork(static_cast<uint64_t>(step_index))
                      .fork(static_cast<uint64_t>(j));
    w.aux_view = static_cast<int>(aux_rng.below(static_cast<uint64_t>(coeffs.k_views)));
  }

  // Degraded views and per-view penalties (values only; the gradient pass
  // below recomputes the selected view on the tape).
  auto degraded_view = [&](PromptWork& w, int j, int k) -> const ImageBuffer& {
    if (w.degraded.empty()) w.degraded.resize(static_cast<size_t>(coeffs.k_views));
    ImageBuffer& img = w.degraded[static_cast<size_t>(k)];
    if (img.numel() == 0) {
      CorruptionSpec spec = view_specs[static_cast<size_t>(k)];
      spec.seed = Rng::mix(spec.seed, static_cast<uint64_t>(j));
      img = apply(w.clean_image, spec);
    }
    return img;
  };

  std::vector<std::vector<double>> per_view_per_traj(
      static_cast<size_t>(want_penalty ? coeffs.k_views : 0),
      std::vector<double>(static_cast<size_t>(total_traj), 0.0));
  std::vector<bool> batch_mask(static_cast<size_t>(total_traj), false);
  std::vector<std::vector<std::vector<double>>> unique_penalties(
      static_cast<size_t>(n_prompts));

  if (want_penalty) {
    for (int j = 0; j < n_prompts; ++j) {
      PromptWork& w = work[static_cast<size_t>(j)];
      unique_penalties[static_cast<size_t>(j)].assign(
          static_cast<size_t>(coeffs.k_views),
          std::vector<double>(w.uniques.size(), 0.0));
      for (size_t ui = 0; ui < w.uniques.size(); ++ui) {
        UniqueTrajectory& u = w.uniques[ui];
        for (const int g : u.members)
          batch_mask[static_cast<size_t>(j * cfg.group_size + g)] = u.masked_in;
        if (!u.masked_in) continue;
        std::vector<double> clean_lp = u.old_logprobs;
        if (!params_match_old) {
          const TokenDistributions cur =
              teacher_forced_logprobs(params, cfg.policy, w.clean_image,
                                      w.instance.question, u.traj);
          clean_lp = logprobs_at_tokens(cur.rows, u.traj.tokens);
        }
        for (int k = 0; k < coeffs.k_views; ++k) {
          const TokenDistributions q = teacher_forced_logprobs(
              params, cfg.policy, degraded_view(w, j, k), w.instance.question, u.traj);
          double pen = 0.0;
          for (int t = 0; t < u.traj.length(); ++t)
            pen += token_kl_surrogate(clean_lp[static_cast<size_t>(t)],
                                      q.logprob_at(t, u.traj.tokens[static_cast<size_t>(t)]));
          if (coeffs.kl_normalize == RomaCoefficients::KlNorm::per_token_mean)
            pen /= static_cast<double>(u.traj.length());
          unique_penalties[static_cast<size_t>(j)][static_cast<size_t>(k)][ui] = pen;
          for (const int g : u.members)
            per_view_per_traj[static_cast<size_t>(k)]
                             [static_cast<size_t>(j * cfg.group_size + g)] = pen;
        }
      }
    }
  } else {
    for (int j = 0; j < n_prompts; ++j)
      for (const UniqueTrajectory& u : work[static_cast<size_t>(j)].uniques)
        for (const int g : u.members)
          batch_mask[static_cast<size_t>(j * cfg.group_size + g)] = u.masked_in;
  }

  WorstCaseResult worst;
  if (want_penalty) {
    worst = worst_case_penalty(per_view_per_traj, batch_mask, coeffs.penalty_mode);
    if (coeffs.penalty_mode == RomaCoefficients::PenaltyMode::worst) {
      const double slack = 1e-12 * std::max(1.0, std::abs(worst.value));
      if (worst.value + slack < worst.mean_over_views)
        throw std::logic_error("worst-case penalty fell below the view mean");
    }
  } else {
    worst.per_view.assign(static_cast<size_t>(coeffs.k_views), 0.0);
    for (const bool m : batch_mask) worst.masked_count += m ? 1 : 0;
  }

  // Gradient pass: per unique trajectory, build the taped scalar contribution
  // and backpropagate immediately; the tape is dropped before the next one.
  params.zero_grad();
  double j_rl = 0.0;
  double j_aug = 0.0;
  const double inv_n = 1.0 / static_cast<double>(total_traj);
  const int masked_total = worst.masked_count;

  for (int j = 0; j < n_prompts; ++j) {
    PromptWork& w = work[static_cast<size_t>(j)];
    for (size_t ui = 0; ui < w.uniques.size(); ++ui) {
      const UniqueTrajectory& u = w.uniques[ui];
      const bool needs_pg = !w.group.degenerate;
      std::vector<std::pair<int, double>> penalty_views;  // (view, weight)
      if (want_penalty && u.masked_in && masked_total > 0) {
        if (coeffs.penalty_mode == RomaCoefficients::PenaltyMode::worst) {
          if (worst.selected_view >= 0) penalty_views.emplace_back(worst.selected_view, 1.0);
        } else {
          for (int k = 0; k < coeffs.k_views; ++k)
            penalty_views.emplace_back(k, 1.0 / static_cast<double>(coeffs.k_views));
        }
      }
      if (!needs_pg && penalty_views.empty()) continue;

      Tape tape;
      std::vector<Var> terms;
      const std::span<const int> tokens(u.traj.tokens);
      if (needs_pg) {
        const Var clean_rows = build_answer_rows(tape, params, cfg.policy, w.clean_image,
                                                 w.instance.question, tokens.first(tokens.size() - 1));
        const Var s_rl = clipped_surrogate_sum(tape, clean_rows, tokens, u.old_logprobs,
                                               u.advantage, coeffs.eps_clip);
        terms.push_back(tape.scale(s_rl, u.count * inv_n));
        j_rl += u.count * inv_n * tape.value(s_rl).value();
        if (want_aux) {
          const Var aux_rows =
              build_answer_rows(tape, params, cfg.policy, degraded_view(w, j, w.aux_view),
                                w.instance.question, tokens.first(tokens.size() - 1));
          const Var s_aux = clipped_surrogate_sum(tape, aux_rows, tokens, u.old_logprobs,
                                                  u.advantage, coeffs.eps_clip);
          terms.push_back(tape.scale(s_aux, coeffs.alpha * u.count * inv_n));
          j_aug += u.count * inv_n * tape.value(s_aux).value();
        }
      }
      for (const auto& [k, weight] : penalty_views) {
        const Var view_rows =
            build_answer_rows(tape, params, cfg.policy, degraded_view(w, j, k),
                              w.instance.question, tokens.first(tokens.size() - 1));
        std::vector<double> clean_lp = u.old_logprobs;
        if (!params_match_old) {
          const TokenDistributions cur = teacher_forced_logprobs(
              params, cfg.policy, w.clean_image, w.instance.question, u.traj);
          clean_lp = logprobs_at_tokens(cur.rows, u.traj.tokens);
        }
        const Var s_pen =
            invariance_penalty_sum(tape, view_rows, tokens, clean_lp, coeffs.kl_normalize);
        terms.push_back(tape.scale(
            s_pen, -coeffs.beta * weight * u.count / static_cast<double>(masked_total)));
      }
      Var objective = terms[0];
      for (size_t i = 1; i < terms.size(); ++i) objective = tape.add(objective, terms[i]);
      tape.backward(tape.scale(objective, -1.0), params);  // ascend J == descend -J
    }
  }

  // J_aug also counts degenerate groups; their terms are exactly zero, so the
  // accumulated sums above are already the batch means.
  LossBreakdown breakdown = total_objective(j_rl, j_aug, worst, coeffs);
  breakdown.mean_reward = reward_sum / static_cast<double>(total_traj);

  if (!std::isfinite(breakdown.j_total)) {
    std::ostringstream os;
    os << "non-finite objective at step " << step_index << "; prompt seeds:";
    for (const uint64_t s : prompt_seeds) os << ' ' << s;
    throw std::runtime_error(os.str());
  }
  const double gnorm = params.grad_norm();
  if (!std::isfinite(gnorm)) {
    std::ostringstream os;
    os << "non-finite gradient at step " << step_index << "; prompt seeds:";
    for (const uint64_t s : prompt_seeds) os << ' ' << s;
    throw std::runtime_error(os.str());
  }

  adam_step(params, cfg.adam());

  TrainLogRecord rec;
  rec.step = step_index;
  rec.mean_reward = breakdown.mean_reward;
  rec.accuracy = breakdown.mean_reward;  // binary exact-match reward
  rec.loss = breakdown;
  rec.selected_view_kind = breakdown.selected_view >= 0
                               ? kind_name(view_specs[static_cast<size_t>(breakdown.selected_view)].kind)
                               : "-";
  rec.grad_norm = gnorm;
  rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
  return rec;
}

TrainRunResult train_run(const TrainConfig& cfg, const std::string& out_dir,
                         const std::string& resume_checkpoint) {
  cfg.validate();
  fs::create_directories(out_dir);

  ParamSet params;
  int start_step = 0;
  if (resume_checkpoint.empty()) {
    params = init_params(cfg.policy, Rng(cfg.master_seed).stream("init").root());
  } else {
    Checkpoint ckpt = load_checkpoint(resume_checkpoint);
    if (!(ckpt.config == cfg.policy))
      throw std::runtime_error("resume checkpoint policy config differs from train config");
    params = std::move(ckpt.params);
    params.load_opt_state(resume_checkpoint + ".opt");
    start_step = static_cast<int>(ckpt.step);
  }

  {
    std::ofstream os(fs::path(out_dir) / "config_resolved.json");
    os << to_json_string(cfg) << "\n";
  }

  const fs::path log_path = fs::path(out_dir) / "log.csv";
  const bool fresh_log = start_step == 0;
  std::ofstream log(log_path, fresh_log ? std::ios::trunc : std::ios::app);
  if (!log) throw std::runtime_error("cannot open log: " + log_path.string());
  if (fresh_log) log << train_log_header() << "\n";

  auto write_ckpt = [&](int step) {
    const std::string base = (fs::path(out_dir) / ("ckpt_" + std::to_string(step) + ".bin")).string();
    save_checkpoint(params, cfg.policy, base, step);
    params.save_opt_state(base + ".opt");
    return base;
  };

  TrainRunResult result;
  result.out_dir = out_dir;
  std::string last_ckpt = write_ckpt(start_step);

  for (int step = start_step + 1; step <= cfg.total_steps; ++step) {
    const ParamSet old_params = snapshot_old_policy(params);
    std::vector<uint64_t> prompt_seeds(static_cast<size_t>(cfg.prompts_per_batch));
    for (int j = 0; j < cfg.prompts_per_batch; ++j)
      prompt_seeds[static_cast<size_t>(j)] = train_instance_seed(
          cfg.master_seed,
          static_cast<uint64_t>(step - 1) * static_cast<uint64_t>(cfg.prompts_per_batch) +
              static_cast<uint64_t>(j));
    TrainLogRecord rec = train_step(params, old_params, prompt_seeds, step, cfg);
    log << to_csv_row(rec) << "\n";
    log.flush();
    result.records.push_back(std::move(rec));
    if (step % cfg.checkpoint_interval == 0 || step == cfg.total_steps)
      last_ckpt = write_ckpt(step);
  }
  result.final_checkpoint = last_ckpt;
  return result;
}

}  // namespace roma
