// SPDX-License-Identifier: Apache-2.0
#include "roma/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace roma {

using json = nlohmann::json;

void PolicyConfig::validate() const {
  if (image_size <= 0 || patch_size <= 0 || image_size % patch_size != 0)
    throw std::invalid_argument("policy: image size must be divisible by patch size");
  if (width <= 0 || heads <= 0 || width % heads != 0)
    throw std::invalid_argument("policy: width must be divisible by heads");
  if (layers < 1 || vocab < 2 || max_answer_len < 1 || ffn_width < 1)
    throw std::invalid_argument("policy: bad configuration");
  if (channels != 1 && channels != 3)
    throw std::invalid_argument("policy: channels must be 1 or 3");
}

std::string to_json_string(const PolicyConfig& cfg) {
  json j{{"image_size", cfg.image_size}, {"channels", cfg.channels},
         {"patch_size", cfg.patch_size}, {"width", cfg.width},
         {"layers", cfg.layers},         {"heads", cfg.heads},
         {"vocab", cfg.vocab},           {"max_answer_len", cfg.max_answer_len},
         {"ffn_width", cfg.ffn_width}};
  return j.dump(2);
}

PolicyConfig policy_config_from_json(const std::string& text) {
  const json j = json::parse(text);
  PolicyConfig cfg;
  cfg.image_size = j.at("image_size").get<int>();
  cfg.channels = j.at("channels").get<int>();
  cfg.patch_size = j.at("patch_size").get<int>();
  cfg.width = j.at("width").get<int>();
  cfg.layers = j.at("layers").get<int>();
  cfg.heads = j.at("heads").get<int>();
  cfg.vocab = j.at("vocab").get<int>();
  cfg.max_answer_len = j.at("max_answer_len").get<int>();
  cfg.ffn_width = j.at("ffn_width").get<int>();
  cfg.validate();
  return cfg;
}

namespace {

std::string layer_prefix(int i) { return "layer" + std::to_string(i) + "."; }

void init_normal(Tensor& t, Rng& rng, double std_dev) {
  for (double& v : t.data) v = std_dev * rng.gaussian();
}

// Patches in raster order; within a patch, (y, x, channel) order.
Tensor patch_matrix(const ImageBuffer& img, const PolicyConfig& cfg) {
  const int side = cfg.patches_per_side();
  const int p = cfg.patch_size;
  const int dim = p * p * cfg.channels;
  Tensor out({static_cast<int64_t>(side) * side, dim});
  int64_t row = 0;
  for (int py = 0; py < side; ++py)
    for (int px = 0; px < side; ++px, ++row) {
      double* dst = out.row_ptr(row);
      int i = 0;
      for (int y = 0; y < p; ++y)
        for (int x = 0; x < p; ++x)
          for (int c = 0; c < cfg.channels; ++c)
            dst[i++] = img.at(py * p + y, px * p + x, c);
    }
  return out;
}

Var build_visual_tokens(Tape& t, const ParamSet& params, const PolicyConfig& cfg,
                        const ImageBuffer& view) {
  const Var patches = t.constant(patch_matrix(view, cfg));
  const Var wp = t.param(params, "embed.patch.w");
  const Var bp = t.param(params, "embed.patch.b");
  return t.add_row(t.matmul(patches, wp), bp);
}

}  // namespace

ParamSet init_params(const PolicyConfig& cfg, uint64_t seed) {
  cfg.validate();
  ParamSet ps;
  Rng rng = Rng(seed).stream("policy-init");
  const int d = cfg.width;
  const int patch_dim = cfg.patch_size * cfg.patch_size * cfg.channels;

  auto weight = [&](const std::string& name, int64_t r, int64_t c) {
    Tensor t({r, c});
    init_normal(t, rng, 0.02);
    ps.add(name, std::move(t));
  };
  auto bias = [&](const std::string& name, int64_t n) { ps.add(name, Tensor::zeros({n})); };
  auto gain = [&](const std::string& name, int64_t n) { ps.add(name, Tensor::full({n}, 1.0)); };

  weight("embed.tokens", cfg.vocab, d);
  weight("embed.patch.w", patch_dim, d);
  bias("embed.patch.b", d);
  weight("embed.pos", cfg.max_seq(), d);
  for (int i = 0; i < cfg.layers; ++i) {
    const std::string p = layer_prefix(i);
    gain(p + "attn.norm.g", d);
    weight(p + "attn.wqkv", d, 3 * d);
    bias(p + "attn.bqkv", 3 * d);
    weight(p + "attn.wo", d, d);
    bias(p + "attn.bo", d);
    gain(p + "mlp.norm.g", d);
    weight(p + "mlp.w1", d, cfg.ffn_width);
    bias(p + "mlp.b1", cfg.ffn_width);
    weight(p + "mlp.w2", cfg.ffn_width, d);
    bias(p + "mlp.b2", d);
  }
  gain("head.norm.g", d);
  weight("head.w", d, cfg.vocab);
  bias("head.b", cfg.vocab);
  return ps;
}

Tensor encode_view(const ImageBuffer& img, const ParamSet& params, const PolicyConfig& cfg) {
  cfg.validate();
  if (img.height != cfg.image_size || img.width != cfg.image_size || img.channels != cfg.channels)
    throw std::invalid_argument("encode_view: image dimensions do not match policy config");
  Tape t(false);
  const Var vis = build_visual_tokens(t, params, cfg, img);
  const Var pos = t.param(params, "embed.pos");
  const Var out = t.add(vis, t.slice_rows(pos, 0, cfg.visual_tokens()));
  return t.value(out);
}

Var build_answer_rows(Tape& t, const ParamSet& params, const PolicyConfig& cfg,
                      const ImageBuffer& view, const Question& question,
                      std::span<const int> answer_prefix) {
  if (view.height != cfg.image_size || view.width != cfg.image_size ||
      view.channels != cfg.channels)
    throw std::invalid_argument("policy forward: image dimensions do not match config");
  if (static_cast<int>(answer_prefix.size()) >= cfg.max_answer_len + 1)
    throw std::invalid_argument("policy forward: answer prefix exceeds max length");
  for (const int tok : answer_prefix)
    if (tok < 0 || tok >= cfg.vocab)
      throw std::invalid_argument("policy forward: token outside vocabulary");

  const int d = cfg.width;
  const int dh = d / cfg.heads;

  std::vector<int> toks = question_tokens(question);
  toks.push_back(vocab::kBos);
  toks.insert(toks.end(), answer_prefix.begin(), answer_prefix.end());

  const Var vis = build_visual_tokens(t, params, cfg, view);
  const Var tok_emb = t.embed(t.param(params, "embed.tokens"), toks);
  Var x = t.concat_rows(vis, tok_emb);
  const int64_t seq = t.value(x).shape[0];
  x = t.add(x, t.slice_rows(t.param(params, "embed.pos"), 0, seq));

  for (int i = 0; i < cfg.layers; ++i) {
    const std::string p = layer_prefix(i);
    // attention block, pre-norm
    Var n = t.rms_norm(x, t.param(params, p + "attn.norm.g"));
    const Var qkv = t.add_row(t.matmul(n, t.param(params, p + "attn.wqkv")),
                              t.param(params, p + "attn.bqkv"));
    std::vector<Var> heads;
    heads.reserve(static_cast<size_t>(cfg.heads));
    for (int h = 0; h < cfg.heads; ++h) {
      const Var q = t.slice_cols(qkv, static_cast<int64_t>(h) * dh, dh);
      const Var k = t.slice_cols(qkv, d + static_cast<int64_t>(h) * dh, dh);
      const Var v = t.slice_cols(qkv, 2 * d + static_cast<int64_t>(h) * dh, dh);
      heads.push_back(t.causal_attention(q, k, v));
    }
    const Var att = t.concat_cols(heads);
    x = t.add(x, t.add_row(t.matmul(att, t.param(params, p + "attn.wo")),
                           t.param(params, p + "attn.bo")));
    // feed-forward block
    n = t.rms_norm(x, t.param(params, p + "mlp.norm.g"));
    const Var h1 = t.gelu(t.add_row(t.matmul(n, t.param(params, p + "mlp.w1")),
                                    t.param(params, p + "mlp.b1")));
    x = t.add(x, t.add_row(t.matmul(h1, t.param(params, p + "mlp.w2")),
                           t.param(params, p + "mlp.b2")));
  }

  const int64_t n_rows = static_cast<int64_t>(answer_prefix.size()) + 1;
  const Var picked = t.slice_rows(x, cfg.prefix_len() - 1, n_rows);
  const Var normed = t.rms_norm(picked, t.param(params, "head.norm.g"));
  const Var logits = t.add_row(t.matmul(normed, t.param(params, "head.w")),
                               t.param(params, "head.b"));
  return t.log_softmax(logits);
}

Tensor answer_rows(const ParamSet& params, const PolicyConfig& cfg, const ImageBuffer& view,
                   const Question& question, std::span<const int> answer_prefix) {
  Tape t(false);
  return t.value(build_answer_rows(t, params, cfg, view, question, answer_prefix));
}

int sample_from_logprobs(std::span<const double> logprobs, double temperature, Rng& rng) {
  if (temperature <= 0.0) {
    return static_cast<int>(std::max_element(logprobs.begin(), logprobs.end()) -
                            logprobs.begin());
  }
  // softmax(logprobs / T); shift-invariant so logits and log-probs agree
  std::vector<double> p(logprobs.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (const double lp : logprobs) mx = std::max(mx, lp / temperature);
  double total = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logprobs[i] / temperature - mx);
    total += p[i];
  }
  const double u = rng.uniform01() * total;
  double acc = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(p.size()) - 1;
}

RolloutSample sample_rollout_ex(const ParamSet& params, const PolicyConfig& cfg,
                                const ImageBuffer& img, const Question& question,
                                double temperature, int max_len, Rng& rng, bool greedy) {
  if (!greedy && temperature <= 0.0)
    throw std::invalid_argument("sample_rollout: temperature must be positive");
  if (max_len < 1 || max_len > cfg.max_answer_len)
    throw std::invalid_argument("sample_rollout: bad max_len");

  RolloutSample out;
  out.trajectory.temperature = greedy ? 0.0 : temperature;
  std::vector<int>& toks = out.trajectory.tokens;
  for (int step = 0; step < max_len; ++step) {
    const Tensor rows = answer_rows(params, cfg, img, question, toks);
    const int64_t last = rows.shape[0] - 1;
    const std::span<const double> row(rows.row_ptr(last), static_cast<size_t>(rows.shape[1]));
    const int tok = sample_from_logprobs(row, greedy ? 0.0 : temperature, rng);
    out.trajectory.logprobs.push_back(row[static_cast<size_t>(tok)]);
    toks.push_back(tok);
    if (tok == vocab::kEos || step == max_len - 1) {
      out.rows = rows;  // covers every generated step; rows beyond are unused
      break;
    }
  }
  return out;
}

Trajectory sample_rollout(const ParamSet& params, const PolicyConfig& cfg,
                          const ImageBuffer& img, const Question& question,
                          double temperature, int max_len, Rng& rng, bool greedy) {
  return sample_rollout_ex(params, cfg, img, question, temperature, max_len, rng, greedy)
      .trajectory;
}

TokenDistributions teacher_forced_logprobs(const ParamSet& params, const PolicyConfig& cfg,
                                           const ImageBuffer& view, const Question& question,
                                           const Trajectory& traj) {
  if (traj.tokens.empty())
    throw std::invalid_argument("teacher_forced_logprobs: empty trajectory");
  for (const int tok : traj.tokens)
    if (tok < 0 || tok >= cfg.vocab)
      throw std::invalid_argument("teacher_forced_logprobs: token outside vocabulary");
  const std::span<const int> prefix(traj.tokens.data(), traj.tokens.size() - 1);
  TokenDistributions dist;
  dist.rows = answer_rows(params, cfg, view, question, prefix);
  dist.degraded_view = view.provenance == Provenance::degraded;
  return dist;
}

std::vector<int> decode_greedy(const ParamSet& params, const PolicyConfig& cfg,
                               const ImageBuffer& view, const Question& question) {
  Rng unused(0);
  return sample_rollout(params, cfg, view, question, 1.0, cfg.max_answer_len, unused,
                        /*greedy=*/true)
      .tokens;
}

void save_checkpoint(const ParamSet& params, const PolicyConfig& cfg,
                     const std::string& bin_path, int64_t step) {
  params.save(bin_path);
  json j{{"format", "roma-checkpoint"},
         {"version", 1},
         {"step", step},
         {"vocab_hash", vocab::vocab_hash()},
         {"policy", json::parse(to_json_string(cfg))}};
  std::ofstream os(bin_path + ".json");
  if (!os) throw std::runtime_error("cannot write checkpoint sidecar for " + bin_path);
  os << j.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& bin_path) {
  std::ifstream is(bin_path + ".json");
  if (!is) throw std::runtime_error("missing checkpoint sidecar: " + bin_path + ".json");
  json j;
  is >> j;
  if (j.at("format").get<std::string>() != "roma-checkpoint")
    throw std::runtime_error("not a checkpoint sidecar: " + bin_path + ".json");
  if (j.at("vocab_hash").get<uint64_t>() != vocab::vocab_hash())
    throw std::runtime_error("checkpoint vocabulary does not match this build");
  Checkpoint ckpt;
  ckpt.config = policy_config_from_json(j.at("policy").dump());
  ckpt.step = j.at("step").get<int64_t>();
  ckpt.params = ParamSet::load(bin_path);

  // shape-check against the config before use
  const ParamSet reference = init_params(ckpt.config, 0);
  for (const auto& [name, e] : reference) {
    if (!ckpt.params.contains(name) || !ckpt.params.value(name).same_shape(e.value))
      throw std::runtime_error("checkpoint parameters do not match config: " + name);
  }
  return ckpt;
}

}  // namespace roma
