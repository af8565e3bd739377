// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: corrupt, gen-corpus, train, eval, compare.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "roma/corruption.hpp"
#include "roma/eval.hpp"
#include "roma/image.hpp"
#include "roma/task.hpp"
#include "roma/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

int run_corrupt(const std::string& kind_name_str, std::optional<int> level,
                std::optional<double> param, uint64_t seed, const std::string& in_path,
                const std::string& out_path, bool print_table) {
  if (print_table) {
    std::cout << roma::severity_table_csv();
    return 0;
  }
  if (kind_name_str.empty() || in_path.empty() || out_path.empty())
    throw CLI::ValidationError("corrupt requires --kind, --in and --out (or --print-table)");
  const roma::CorruptionKind kind = roma::kind_from_name(kind_name_str);
  roma::CorruptionSpec spec;
  if (level.has_value() && param.has_value())
    throw CLI::ValidationError("--level and --param are mutually exclusive");
  if (level.has_value()) {
    spec = roma::eval_spec(kind, *level, seed);
  } else if (param.has_value()) {
    spec.kind = kind;
    spec.param = *param;
    spec.seed = seed;
  } else {
    throw CLI::ValidationError("corrupt requires --level or --param");
  }
  const roma::ImageBuffer img = roma::read_pnm(in_path);
  roma::write_pnm(roma::apply(img, spec), out_path);
  return 0;
}

int run_gen_corpus(int n, uint64_t seed, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const roma::RenderConfig render;
  std::ofstream manifest(fs::path(out_dir) / "manifest.jsonl");
  if (!manifest) throw std::runtime_error("cannot write manifest in " + out_dir);
  for (int i = 0; i < n; ++i) {
    const uint64_t inst_seed = seed + static_cast<uint64_t>(i);
    const roma::TaskInstance inst = roma::generate(inst_seed, render);
    const roma::ImageBuffer img = roma::render(inst, render);
    const std::string name = "inst_" + std::to_string(inst_seed) + ".pgm";
    roma::write_pnm(img, (fs::path(out_dir) / name).string());
    json row{{"seed", inst_seed},
             {"image", name},
             {"question_tokens", roma::question_tokens(inst.question)},
             {"truth_tokens", inst.truth}};
    manifest << row.dump() << "\n";
  }
  std::cout << "wrote " << n << " instances to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ROMA: robust RL fine-tuning on a synthetic visual reasoning task"};
  app.require_subcommand(1);

  // corrupt
  auto* corrupt = app.add_subcommand("corrupt", "Apply a visual degradation to a PGM/PPM image");
  std::string c_kind, c_in, c_out;
  std::optional<int> c_level;
  std::optional<double> c_param;
  uint64_t c_seed = 0;
  bool c_print_table = false;
  corrupt->add_option("--kind", c_kind, "Degradation kind");
  corrupt->add_option("--level", c_level, "Severity level 1..3");
  corrupt->add_option("--param", c_param, "Explicit parameter value");
  corrupt->add_option("--seed", c_seed, "Noise seed");
  corrupt->add_option("--in", c_in, "Input image (P5/P6)");
  corrupt->add_option("--out", c_out, "Output image");
  corrupt->add_flag("--print-table", c_print_table, "Dump the severity table as CSV");

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "Generate task instances for inspection");
  int g_n = 16;
  uint64_t g_seed = 0;
  std::string g_out = "corpus";
  gen->add_option("--n", g_n, "Instance count");
  gen->add_option("--seed", g_seed, "First instance seed");
  gen->add_option("--out-dir", g_out, "Output directory");

  // train
  auto* train = app.add_subcommand("train", "Run a training job");
  std::string t_config, t_out = "run", t_mode, t_resume, t_penalty_mode, t_mask_mode;
  std::optional<uint64_t> t_seed;
  std::optional<double> t_alpha, t_beta, t_eps;
  std::optional<int> t_k, t_steps;
  std::optional<bool> t_aux;
  train->add_option("--config", t_config, "JSON config file");
  train->add_option("--out-dir", t_out, "Output directory");
  train->add_option("--mode", t_mode, "grpo-baseline | roma");
  train->add_option("--seed", t_seed, "Master seed");
  train->add_option("--alpha", t_alpha, "Auxiliary PG coefficient");
  train->add_option("--beta", t_beta, "Invariance penalty coefficient");
  train->add_option("--k", t_k, "Degraded views per step");
  train->add_option("--eps-clip", t_eps, "Clip range");
  train->add_option("--penalty-mode", t_penalty_mode, "worst | mean");
  train->add_option("--mask-mode", t_mask_mode, "conditioned | unconditional");
  train->add_option("--aux-pg", t_aux, "Enable the auxiliary PG term");
  train->add_option("--steps", t_steps, "Total steps");
  train->add_option("--resume", t_resume, "Checkpoint to resume from");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string e_ckpt, e_pool = "clean", e_out = "eval";
  int e_level = 3, e_n = 1000;
  uint64_t e_seed = 0;
  eval_cmd->add_option("--ckpt", e_ckpt, "Checkpoint .bin path")->required();
  eval_cmd->add_option("--pool", e_pool, "clean | seen | unseen");
  eval_cmd->add_option("--level", e_level, "Severity level 1..3");
  eval_cmd->add_option("--n", e_n, "Instances per cell");
  eval_cmd->add_option("--seed", e_seed, "Eval seed base");
  eval_cmd->add_option("--out-dir", e_out, "Output directory");

  // compare
  auto* cmp_cmd = app.add_subcommand("compare", "Compare two eval reports (b - a)");
  std::string a_path, b_path, cmp_out;
  cmp_cmd->add_option("--a", a_path, "report.json of run A")->required();
  cmp_cmd->add_option("--b", b_path, "report.json of run B")->required();
  cmp_cmd->add_option("--out", cmp_out, "Output CSV path (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (corrupt->parsed())
      return run_corrupt(c_kind, c_level, c_param, c_seed, c_in, c_out, c_print_table);

    if (gen->parsed()) return run_gen_corpus(g_n, g_seed, g_out);

    if (train->parsed()) {
      roma::TrainConfig cfg;
      if (!t_config.empty()) {
        std::ifstream is(t_config);
        if (!is) throw std::runtime_error("cannot open config: " + t_config);
        std::stringstream ss;
        ss << is.rdbuf();
        cfg = roma::train_config_from_json(ss.str());
      }
      if (!t_mode.empty()) cfg.mode = roma::mode_from_name(t_mode);
      if (t_seed) cfg.master_seed = *t_seed;
      if (t_alpha) cfg.coeffs.alpha = *t_alpha;
      if (t_beta) cfg.coeffs.beta = *t_beta;
      if (t_k) cfg.coeffs.k_views = *t_k;
      if (t_eps) cfg.coeffs.eps_clip = *t_eps;
      if (!t_penalty_mode.empty())
        cfg.coeffs.penalty_mode = t_penalty_mode == "mean"
                                      ? roma::RomaCoefficients::PenaltyMode::mean
                                      : roma::RomaCoefficients::PenaltyMode::worst;
      if (!t_mask_mode.empty())
        cfg.coeffs.mask_mode = t_mask_mode == "unconditional"
                                   ? roma::RomaCoefficients::MaskMode::unconditional
                                   : roma::RomaCoefficients::MaskMode::conditioned;
      if (t_aux) cfg.coeffs.aux_pg_enabled = *t_aux;
      if (t_steps) cfg.total_steps = *t_steps;
      const roma::TrainRunResult result = roma::train_run(cfg, t_out, t_resume);
      std::cout << "final checkpoint: " << result.final_checkpoint << "\n";
      return 0;
    }

    if (eval_cmd->parsed()) {
      roma::EvalProtocol protocol;
      protocol.pool = roma::pool_from_name(e_pool);
      protocol.level = e_level;
      protocol.instance_count = e_n;
      protocol.eval_seed = e_seed;
      const roma::EvalReport report = roma::evaluate_checkpoint(e_ckpt, protocol);
      roma::write_report(report, e_out);
      std::cout << roma::report_to_csv(report);
      return 0;
    }

    if (cmp_cmd->parsed()) {
      const roma::EvalReport a = roma::read_report_json(a_path);
      const roma::EvalReport b = roma::read_report_json(b_path);
      const std::string csv = roma::comparison_to_csv(roma::compare(a, b));
      if (cmp_out.empty()) {
        std::cout << csv;
      } else {
        std::ofstream os(cmp_out);
        if (!os) throw std::runtime_error("cannot write " + cmp_out);
        os << csv;
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
