// SPDX-License-Identifier: Apache-2.0
#include "roma/eval.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace roma {

namespace fs = std::filesystem;
using json = nlohmann::json;

const char* pool_name(EvalPool pool) {
  switch (pool) {
    case EvalPool::clean: return "clean";
    case EvalPool::seen: return "seen";
    case EvalPool::unseen: return "unseen";
  }
  throw std::invalid_argument("unknown pool");
}

EvalPool pool_from_name(const std::string& name) {
  if (name == "clean") return EvalPool::clean;
  if (name == "seen") return EvalPool::seen;
  if (name == "unseen") return EvalPool::unseen;
  throw std::invalid_argument("unknown pool: " + name);
}

std::vector<CorruptionKind> pool_kinds(EvalPool pool) {
  switch (pool) {
    case EvalPool::clean: return {};
    case EvalPool::seen: return {kSeenKinds.begin(), kSeenKinds.end()};
    case EvalPool::unseen: return {kUnseenKinds.begin(), kUnseenKinds.end()};
  }
  throw std::invalid_argument("unknown pool");
}

void EvalProtocol::validate() const {
  if (instance_count < 1) throw std::invalid_argument("instance_count must be >= 1");
  if (pool != EvalPool::clean && (level < 1 || level > 3))
    throw std::invalid_argument("level must be 1, 2 or 3");
  check_eval_seed_range(eval_seed, static_cast<uint64_t>(instance_count));
}

bool EvalProtocol::compatible(const EvalProtocol& other) const {
  return pool == other.pool && (pool == EvalPool::clean || level == other.level) &&
         instance_count == other.instance_count && eval_seed == other.eval_seed;
}

EvalReport evaluate(const DecodeFn& decode, const EvalProtocol& protocol,
                    const std::string& checkpoint_id) {
  protocol.validate();
  EvalReport report;
  report.pool = protocol.pool;
  report.level = protocol.pool == EvalPool::clean ? 0 : protocol.level;
  report.instance_count = protocol.instance_count;
  report.eval_seed = protocol.eval_seed;
  report.checkpoint_id = checkpoint_id;

  std::vector<TaskInstance> instances;
  std::vector<ImageBuffer> clean_images;
  instances.reserve(static_cast<size_t>(protocol.instance_count));
  clean_images.reserve(static_cast<size_t>(protocol.instance_count));
  for (int i = 0; i < protocol.instance_count; ++i) {
    instances.push_back(generate(protocol.eval_seed + static_cast<uint64_t>(i), protocol.render));
    clean_images.push_back(render(instances.back(), protocol.render));
  }

  int64_t clean_correct = 0;
  for (int i = 0; i < protocol.instance_count; ++i) {
    const std::vector<int> out = decode(clean_images[static_cast<size_t>(i)],
                                        instances[static_cast<size_t>(i)].question);
    clean_correct += reward(instances[static_cast<size_t>(i)], out) > 0 ? 1 : 0;
  }
  report.clean_accuracy =
      static_cast<double>(clean_correct) / static_cast<double>(protocol.instance_count);

  const std::vector<CorruptionKind> kinds = pool_kinds(protocol.pool);
  double macro_sum = 0.0;
  for (const CorruptionKind kind : kinds) {
    int64_t correct = 0;
    for (int i = 0; i < protocol.instance_count; ++i) {
      const uint64_t inst_seed = protocol.eval_seed + static_cast<uint64_t>(i);
      const CorruptionSpec spec = eval_spec(kind, protocol.level, inst_seed);
      const ImageBuffer view = apply(clean_images[static_cast<size_t>(i)], spec);
      const std::vector<int> out = decode(view, instances[static_cast<size_t>(i)].question);
      correct += reward(instances[static_cast<size_t>(i)], out) > 0 ? 1 : 0;
    }
    EvalCell cell;
    cell.kind = kind;
    cell.level = protocol.level;
    cell.accuracy = static_cast<double>(correct) / static_cast<double>(protocol.instance_count);
    macro_sum += cell.accuracy;
    report.cells.push_back(cell);
  }
  report.macro_average =
      kinds.empty() ? report.clean_accuracy : macro_sum / static_cast<double>(kinds.size());
  report.gap = report.clean_accuracy - report.macro_average;
  return report;
}

EvalReport evaluate_checkpoint(const std::string& ckpt_path, const EvalProtocol& protocol) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  if (ckpt.config.image_size != protocol.render.image_size)
    throw std::runtime_error("checkpoint image size does not match eval render config");
  const DecodeFn decode = [&ckpt](const ImageBuffer& img, const Question& q) {
    return decode_greedy(ckpt.params, ckpt.config, img, q);
  };
  return evaluate(decode, protocol, fs::path(ckpt_path).filename().string());
}

Comparison compare(const EvalReport& a, const EvalReport& b) {
  if (a.pool != b.pool || a.level != b.level || a.instance_count != b.instance_count ||
      a.eval_seed != b.eval_seed)
    throw std::invalid_argument("compare: reports come from different protocols");
  if (a.cells.size() != b.cells.size())
    throw std::invalid_argument("compare: cell count mismatch");
  Comparison cmp;
  for (size_t i = 0; i < a.cells.size(); ++i) {
    if (a.cells[i].kind != b.cells[i].kind)
      throw std::invalid_argument("compare: kind mismatch");
    cmp.rows.push_back({kind_name(a.cells[i].kind), a.cells[i].accuracy, b.cells[i].accuracy,
                        b.cells[i].accuracy - a.cells[i].accuracy});
  }
  cmp.rows.push_back({"macro", a.macro_average, b.macro_average,
                      b.macro_average - a.macro_average});
  cmp.rows.push_back({"clean", a.clean_accuracy, b.clean_accuracy,
                      b.clean_accuracy - a.clean_accuracy});
  cmp.rows.push_back({"gap", a.gap, b.gap, b.gap - a.gap});
  return cmp;
}

namespace {

json report_to_json(const EvalReport& r) {
  json cells = json::array();
  for (const EvalCell& c : r.cells)
    cells.push_back({{"kind", kind_name(c.kind)}, {"level", c.level}, {"accuracy", c.accuracy}});
  return json{{"pool", pool_name(r.pool)},
              {"level", r.level},
              {"instance_count", r.instance_count},
              {"eval_seed", r.eval_seed},
              {"checkpoint_id", r.checkpoint_id},
              {"cells", cells},
              {"macro_average", r.macro_average},
              {"clean_accuracy", r.clean_accuracy},
              {"gap", r.gap}};
}

}  // namespace

void write_report(const EvalReport& report, const std::string& dir) {
  fs::create_directories(dir);
  {
    std::ofstream os(fs::path(dir) / "report.json");
    if (!os) throw std::runtime_error("cannot write report.json in " + dir);
    os << report_to_json(report).dump(2) << "\n";
  }
  {
    std::ofstream os(fs::path(dir) / "report.csv");
    if (!os) throw std::runtime_error("cannot write report.csv in " + dir);
    os << report_to_csv(report);
  }
}

EvalReport read_report_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open report: " + path);
  json j;
  is >> j;
  EvalReport r;
  r.pool = pool_from_name(j.at("pool").get<std::string>());
  r.level = j.at("level").get<int>();
  r.instance_count = j.at("instance_count").get<int>();
  r.eval_seed = j.at("eval_seed").get<uint64_t>();
  r.checkpoint_id = j.at("checkpoint_id").get<std::string>();
  for (const json& c : j.at("cells"))
    r.cells.push_back({kind_from_name(c.at("kind").get<std::string>()),
                       c.at("level").get<int>(), c.at("accuracy").get<double>()});
  r.macro_average = j.at("macro_average").get<double>();
  r.clean_accuracy = j.at("clean_accuracy").get<double>();
  r.gap = j.at("gap").get<double>();
  return r;
}

std::string report_to_csv(const EvalReport& report) {
  std::ostringstream os;
  os.precision(17);
  os << "kind,level,accuracy\n";
  for (const EvalCell& c : report.cells)
    os << kind_name(c.kind) << ',' << c.level << ',' << c.accuracy << '\n';
  os << "macro," << report.level << ',' << report.macro_average << '\n';
  os << "clean,0," << report.clean_accuracy << '\n';
  return os.str();
}

std::string comparison_to_csv(const Comparison& cmp) {
  std::ostringstream os;
  os.precision(17);
  os << "metric,a,b,delta\n";
  for (const ComparisonRow& r : cmp.rows)
    os << r.metric << ',' << r.a << ',' << r.b << ',' << r.delta << '\n';
  return os.str();
}

}  // namespace roma
