// Command-line front end: synth, train, mosaic, evaluate, report.
#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "saros/corpus.hpp"
#include "saros/eval.hpp"
#include "saros/memory.hpp"
#include "saros/model.hpp"
#include "saros/synth.hpp"
#include "saros/trainers.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw saros::DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string hex64(std::uint64_t value) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

/// Checksum of an artifact. Trace files carry measured wall-clock times in
/// the first column, which can never be bit-stable; their checksum is taken
/// over the content with that column stripped so reruns with equal flags
/// produce equal manifests.
std::string artifact_checksum(const fs::path& path, bool strip_first_column) {
  std::string content = read_file(path);
  if (!strip_first_column) return hex64(fnv1a64(content));
  std::string stripped;
  stripped.reserve(content.size());
  std::size_t start = 0;
  while (start < content.size()) {
    std::size_t eol = content.find('\n', start);
    if (eol == std::string::npos) eol = content.size();
    const std::string_view line(content.data() + start, eol - start);
    const std::size_t tab = line.find('\t');
    stripped.append(tab == std::string_view::npos ? line : line.substr(tab + 1));
    stripped.push_back('\n');
    start = eol + 1;
  }
  return hex64(fnv1a64(stripped));
}

class Manifest {
 public:
  Manifest(std::string command, fs::path out_dir)
      : out_dir_(std::move(out_dir)), start_(std::chrono::steady_clock::now()) {
    doc_["schema"] = "saros-manifest-v1";
    doc_["command"] = std::move(command);
  }

  json& flags() { return doc_["flags"]; }

  void add_input(const std::string& name, const fs::path& path) {
    doc_["inputs"][name] = path.string();
  }

  void add_output(const std::string& name, const fs::path& path,
                  bool strip_first_column = false) {
    doc_["outputs"][name] = {{"path", path.string()},
                             {"checksum", artifact_checksum(path, strip_first_column)}};
  }

  /// Atomic write: temp file in the same directory, then rename.
  void write(const std::string& filename) {
    doc_["wall_clock_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                                std::chrono::steady_clock::now() - start_)
                                .count();
    const fs::path final_path = out_dir_ / filename;
    const fs::path tmp_path = out_dir_ / (filename + ".tmp");
    {
      std::ofstream out(tmp_path);
      if (!out) throw saros::DataError("cannot write manifest: " + tmp_path.string());
      out << doc_.dump(2) << '\n';
    }
    fs::rename(tmp_path, final_path);
  }

 private:
  fs::path out_dir_;
  json doc_;
  std::chrono::steady_clock::time_point start_;
};

struct GlobalOpts {
  std::uint64_t seed = 42;
  std::uint32_t threads = 1;
  std::string out_dir = ".";
};

struct InputOpts {
  std::string input;
  std::string format = "user,item,ts,label";
  std::string delim = "tab";
  double rating_threshold = 4.0;
  double train_fraction = 0.7;
};

struct TrainOpts {
  std::string trainer = "saros-b";
  double eta = 0.05;
  std::uint32_t b_min = 1;
  std::uint32_t b_max = 0;
  std::uint32_t epochs = 1;
  double momentum_mu = 0.9;
  double momentum_alpha = 0.05;
  std::uint64_t bpr_samples = 0;
  double max_seconds = 0.0;
  std::uint32_t trace_every = 1;
  std::size_t k = 16;
  double init_scale = -1.0;
  double lambda = 0.0;
};

char delim_char(const std::string& name) {
  if (name == "tab") return '\t';
  if (name == "comma") return ',';
  if (name == "space") return ' ';
  throw saros::ConfigError("unknown delimiter '" + name + "'");
}

void add_input_flags(CLI::App* cmd, InputOpts& in) {
  cmd->add_option("--input", in.input, "interaction log (delimiter-separated)")
      ->required();
  cmd->add_option("--format", in.format,
                  "column roles, e.g. user,item,ts,label or user,item,rating,ts");
  cmd->add_option("--delim", in.delim, "field delimiter")
      ->check(CLI::IsMember({"tab", "comma", "space"}));
  cmd->add_option("--rating-threshold", in.rating_threshold,
                  "ratings at or above this binarize to +1");
  cmd->add_option("--train-fraction", in.train_fraction,
                  "chronological per-user train share")
      ->check(CLI::Range(std::nextafter(0.0, 1.0), std::nextafter(1.0, 0.0)));
}

void add_train_flags(CLI::App* cmd, TrainOpts& tr, bool with_trainer_choice) {
  if (with_trainer_choice) {
    cmd->add_option("--trainer", tr.trainer, "training strategy")
        ->check(CLI::IsMember({"saros-b", "saros-m", "bpr", "bpr-batch"}));
  }
  cmd->add_option("--eta", tr.eta, "gradient step size")->check(CLI::NonNegativeNumber);
  cmd->add_option("--b-min", tr.b_min, "minimum blocks per user (b)");
  cmd->add_option("--b-max", tr.b_max, "maximum blocks per user (B); 0 = train-set average");
  cmd->add_option("--epochs", tr.epochs, "training epochs")->check(CLI::PositiveNumber);
  cmd->add_option("--momentum-mu", tr.momentum_mu, "momentum decay (saros-m)")
      ->check(CLI::Range(0.0, std::nextafter(1.0, 0.0)));
  cmd->add_option("--momentum-alpha", tr.momentum_alpha, "momentum step size (saros-m)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--bpr-samples", tr.bpr_samples,
                  "triplet draws for bpr; 0 = epochs x train interactions");
  cmd->add_option("--max-seconds", tr.max_seconds, "wall-clock training budget; 0 = none");
  cmd->add_option("--trace-every", tr.trace_every, "record every n-th update; 0 disables");
  cmd->add_option("--k", tr.k, "latent dimension")->check(CLI::PositiveNumber);
  cmd->add_option("--init-scale", tr.init_scale,
                  "uniform init half-width; negative = 1/sqrt(k)");
  cmd->add_option("--lambda", tr.lambda, "regularization weight")
      ->check(CLI::NonNegativeNumber);
}

saros::TrainConfig to_train_config(const TrainOpts& tr, const GlobalOpts& global) {
  saros::TrainConfig cfg;
  cfg.eta = tr.eta;
  cfg.b_min = tr.b_min;
  cfg.b_max = tr.b_max;
  cfg.epochs = tr.epochs;
  cfg.momentum_mu = tr.momentum_mu;
  cfg.momentum_alpha = tr.momentum_alpha;
  cfg.seed = global.seed;
  cfg.bpr_samples = tr.bpr_samples;
  cfg.max_wall_clock =
      std::chrono::milliseconds(static_cast<std::int64_t>(tr.max_seconds * 1000.0));
  cfg.trace_every = tr.trace_every;
  return cfg;
}

json input_flags_json(const InputOpts& in) {
  return {{"input", in.input},
          {"format", in.format},
          {"delim", in.delim},
          {"rating_threshold", in.rating_threshold},
          {"train_fraction", in.train_fraction}};
}

json train_flags_json(const TrainOpts& tr, const GlobalOpts& global) {
  return {{"trainer", tr.trainer},
          {"eta", tr.eta},
          {"b_min", tr.b_min},
          {"b_max", tr.b_max},
          {"epochs", tr.epochs},
          {"momentum_mu", tr.momentum_mu},
          {"momentum_alpha", tr.momentum_alpha},
          {"bpr_samples", tr.bpr_samples},
          {"max_seconds", tr.max_seconds},
          {"trace_every", tr.trace_every},
          {"k", tr.k},
          {"init_scale", tr.init_scale},
          {"lambda", tr.lambda},
          {"seed", global.seed},
          {"threads", global.threads}};
}

saros::CorpusSplit load_and_split(const InputOpts& in, saros::IndexMaps* maps = nullptr) {
  const auto fmt =
      saros::ColumnFormat::parse(in.format, delim_char(in.delim), in.rating_threshold);
  auto loaded = saros::load_interactions(in.input, fmt);
  if (maps) *maps = std::move(loaded.maps);
  return saros::chronological_split(loaded.corpus, {in.train_fraction});
}

int cmd_synth(const GlobalOpts& global, const saros::SynthSpec& spec) {
  fs::create_directories(global.out_dir);
  Manifest manifest("synth", global.out_dir);
  manifest.flags() = {{"users", spec.n_users},
                      {"items", spec.n_items},
                      {"k_true", spec.k_true},
                      {"interactions", spec.interactions_per_user},
                      {"positive_rate", spec.positive_rate},
                      {"drift_fraction", spec.drift_fraction},
                      {"drift_step", spec.drift_step},
                      {"noise", spec.noise_level},
                      {"seed", spec.seed}};
  const auto synth = saros::generate(spec);
  const fs::path corpus_path = fs::path(global.out_dir) / "synth.tsv";
  const fs::path truth_path = fs::path(global.out_dir) / "synth_truth.ckpt";
  const fs::path drift_path = fs::path(global.out_dir) / "synth_drift.tsv";
  saros::write_interactions(synth.corpus, corpus_path);
  saros::save_ground_truth(synth, truth_path, drift_path);
  manifest.add_output("corpus", corpus_path);
  manifest.add_output("truth", truth_path);
  manifest.add_output("drift", drift_path);
  manifest.write("synth_manifest.json");
  std::cout << "wrote " << corpus_path.string() << " (" << synth.corpus.rows().size()
            << " interactions)\n";
  return kExitOk;
}

int cmd_train(const GlobalOpts& global, const InputOpts& in, const TrainOpts& tr) {
  fs::create_directories(global.out_dir);
  Manifest manifest("train", global.out_dir);
  manifest.flags() = train_flags_json(tr, global);
  manifest.flags().update(input_flags_json(in));
  manifest.add_input("corpus", in.input);

  const auto split = load_and_split(in);
  auto params = saros::init_params(split.train.n_users(), split.train.n_items(), tr.k,
                                   global.seed, tr.init_scale);
  const saros::LossConfig loss_cfg{tr.lambda};
  const auto train_cfg = to_train_config(tr, global);

  const fs::path ckpt_path = fs::path(global.out_dir) / "checkpoint.ckpt";
  const fs::path trace_path = fs::path(global.out_dir) / "trace.tsv";
  saros::TrainTrace trace;
  if (tr.trainer == "saros-b") {
    auto result = saros::train_saros_b(split, std::move(params), loss_cfg, train_cfg);
    saros::save_checkpoint(result.params, ckpt_path);
    const fs::path avg_path = fs::path(global.out_dir) / "checkpoint_averaged.ckpt";
    saros::save_checkpoint(result.averaged, avg_path);
    manifest.add_output("checkpoint_averaged", avg_path);
    trace = std::move(result.trace);
  } else if (tr.trainer == "saros-m") {
    auto result = saros::train_saros_m(split, std::move(params), loss_cfg, train_cfg);
    saros::save_checkpoint(result.params, ckpt_path);
    trace = std::move(result.trace);
  } else if (tr.trainer == "bpr") {
    auto result = saros::train_bpr(split, std::move(params), loss_cfg, train_cfg);
    saros::save_checkpoint(result.params, ckpt_path);
    trace = std::move(result.trace);
  } else {
    auto result = saros::train_bpr_batch(split, std::move(params), loss_cfg, train_cfg);
    saros::save_checkpoint(result.params, ckpt_path);
    trace = std::move(result.trace);
  }
  saros::save_trace(trace, trace_path);
  manifest.add_output("checkpoint", ckpt_path);
  manifest.add_output("trace", trace_path, /*strip_first_column=*/true);
  manifest.write("train_manifest.json");
  std::cout << "trainer=" << tr.trainer << " updates=" << trace.n_updates
            << (trace.budget_exhausted ? " (budget exhausted)" : "") << "\n";
  return kExitOk;
}

saros::MemoryConfig parse_m_rule(const std::string& rule, std::uint32_t min_len,
                                 std::uint32_t keep_threshold) {
  saros::MemoryConfig cfg;
  cfg.min_series_len = min_len;
  cfg.keep_threshold = keep_threshold;
  if (rule == "sqrt") {
    cfg.m_exponent = 0.5;
  } else if (rule.rfind("N^", 0) == 0) {
    cfg.m_exponent = std::stod(rule.substr(2));
    if (!(cfg.m_exponent > 0.0 && cfg.m_exponent < 1.0)) {
      throw saros::ConfigError("m-rule exponent must lie in (0,1)");
    }
  } else {
    const int fixed = std::stoi(rule);
    if (fixed < 2) throw saros::ConfigError("fixed m must be >= 2");
    cfg.m_fixed = static_cast<std::uint32_t>(fixed);
  }
  return cfg;
}

int cmd_mosaic(const GlobalOpts& global, const InputOpts& in, const TrainOpts& tr,
               const std::string& memory_source, const std::string& m_rule,
               std::uint32_t min_series_len, std::uint32_t keep_threshold) {
  fs::create_directories(global.out_dir);
  Manifest manifest("mosaic", global.out_dir);
  manifest.flags() = train_flags_json(tr, global);
  manifest.flags().update(input_flags_json(in));
  manifest.flags()["memory_source"] = memory_source;
  manifest.flags()["m_rule"] = m_rule;
  manifest.flags()["min_series_len"] = min_series_len;
  manifest.flags()["keep_threshold"] = keep_threshold;
  manifest.add_input("corpus", in.input);

  saros::IndexMaps maps;
  const auto split = load_and_split(in, &maps);
  const auto loss_cfg = saros::LossConfig{tr.lambda};
  const auto train_cfg = to_train_config(tr, global);
  const auto mem_cfg = parse_m_rule(m_rule, min_series_len, keep_threshold);
  const auto source = memory_source == "feedback"
                          ? saros::SeriesSource::feedback_sequence
                          : saros::SeriesSource::embedding_trajectory;

  const fs::path report_path = fs::path(global.out_dir) / "mosaic_report.tsv";
  saros::MosaicResult result;
  try {
    result = saros::mosaic(split, loss_cfg, train_cfg, mem_cfg,
                           saros::ModelInit{tr.k, tr.init_scale}, source, global.threads);
  } catch (const saros::EmptyFilterError& e) {
    saros::save_memory_report(e.report(), report_path);
    std::cerr << "error: " << e.what() << " (report written to " << report_path.string()
              << ")\n";
    return kExitRuntime;
  }

  saros::save_memory_report(result.report, report_path);
  const fs::path ckpt_path = fs::path(global.out_dir) / "mosaic_checkpoint.ckpt";
  saros::save_checkpoint(result.pass2.params, ckpt_path);

  // Filtered corpus: train and test interactions of the kept users, in the
  // same TSV format the loader reads.
  const fs::path filtered_path = fs::path(global.out_dir) / "mosaic_filtered.tsv";
  {
    std::vector<saros::Interaction> kept_rows;
    for (const auto& row : split.train.rows()) {
      if (result.keep[row.user]) kept_rows.push_back(row);
    }
    for (const auto& row : split.test.rows()) {
      if (result.keep[row.user]) kept_rows.push_back(row);
    }
    const saros::Corpus filtered(split.train.n_users(), split.train.n_items(),
                                 std::move(kept_rows));
    saros::write_interactions(filtered, filtered_path, &maps);
  }

  manifest.add_output("report", report_path);
  manifest.add_output("checkpoint", ckpt_path);
  manifest.add_output("filtered", filtered_path);
  manifest.write("mosaic_manifest.json");
  std::cout << "kept " << result.report.n_kept() << " of " << result.report.users.size()
            << " users\n";
  return kExitOk;
}

int cmd_evaluate(const GlobalOpts& global, const InputOpts& in, const std::string& ckpt,
                 const std::vector<std::uint32_t>& ks, const std::string& candidates) {
  fs::create_directories(global.out_dir);
  Manifest manifest("evaluate", global.out_dir);
  manifest.flags() = input_flags_json(in);
  manifest.flags()["checkpoint"] = ckpt;
  manifest.flags()["k"] = ks;
  manifest.flags()["candidates"] = candidates;
  manifest.flags()["threads"] = global.threads;
  manifest.add_input("corpus", in.input);
  manifest.add_input("checkpoint", ckpt);

  const auto split = load_and_split(in);
  const auto params = saros::load_checkpoint(ckpt);
  saros::EvalConfig cfg;
  cfg.ks = ks;
  cfg.candidates = candidates == "all" ? saros::CandidatePolicy::all_items
                                       : saros::CandidatePolicy::test_items;
  cfg.threads = global.threads;
  const auto report = saros::evaluate(params, split.test, cfg);

  const fs::path agg_path = fs::path(global.out_dir) / "eval_aggregate.tsv";
  const fs::path users_path = fs::path(global.out_dir) / "eval_users.tsv";
  saros::save_eval_aggregates(report, agg_path);
  saros::save_eval_users(report, users_path);
  manifest.add_output("aggregate", agg_path);
  manifest.add_output("per_user", users_path);
  manifest.write("evaluate_manifest.json");
  std::cout << saros::format_eval_table(report);
  return kExitOk;
}

int cmd_report(const GlobalOpts& global, const std::vector<std::string>& traces,
               const std::vector<std::string>& evals, std::vector<std::string> labels) {
  if (traces.empty()) throw saros::DataError("report needs at least one --trace file");
  while (labels.size() < traces.size()) {
    labels.push_back("run" + std::to_string(labels.size()));
  }
  fs::create_directories(global.out_dir);
  Manifest manifest("report", global.out_dir);
  manifest.flags()["traces"] = traces;
  manifest.flags()["evals"] = evals;
  manifest.flags()["labels"] = labels;

  const fs::path curves_path = fs::path(global.out_dir) / "report_curves.tsv";
  std::size_t total_records = 0;
  {
    std::ofstream out(curves_path);
    if (!out) throw saros::DataError("cannot write " + curves_path.string());
    out << "label\twall_clock_ms\tepoch\tuser\tblock\tloss\n";
    char buf[192];
    for (std::size_t t = 0; t < traces.size(); ++t) {
      const auto trace = saros::load_trace(traces[t]);
      total_records += trace.records.size();
      for (const auto& r : trace.records) {
        std::snprintf(buf, sizeof(buf), "%s\t%.6f\t%u\t%lld\t%u\t%.17g\n",
                      labels[t].c_str(), static_cast<double>(r.wall_ns) / 1e6, r.epoch,
                      static_cast<long long>(r.user), r.block, r.loss);
        out << buf;
      }
    }
  }
  manifest.add_output("curves", curves_path);

  // Side-by-side metric table from aggregate eval files, when given.
  const fs::path table_path = fs::path(global.out_dir) / "report_table.tsv";
  if (!evals.empty()) {
    std::ofstream out(table_path);
    out << "label\tK\tmap\tndcg\tmrr\n";
    for (std::size_t e = 0; e < evals.size(); ++e) {
      const std::string label = e < labels.size() ? labels[e] : "run" + std::to_string(e);
      std::ifstream in(evals[e]);
      if (!in) throw saros::DataError("cannot read " + evals[e]);
      std::string line;
      std::map<std::uint32_t, std::map<std::string, double>> by_k;
      std::size_t line_no = 0;
      while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 || line.empty()) continue;
        std::uint32_t K = 0;
        char metric[32];
        double value = 0.0;
        if (std::sscanf(line.c_str(), "%u\t%31[^\t]\t%lf", &K, metric, &value) != 3) {
          throw saros::ParseError(line_no, "malformed eval row in " + evals[e]);
        }
        by_k[K][metric] = value;
      }
      for (const auto& [K, metrics] : by_k) {
        out << label << '\t' << K << '\t' << metrics.at("map") << '\t'
            << metrics.at("ndcg") << '\t' << metrics.at("mrr") << '\n';
      }
    }
    manifest.add_output("table", table_path);
  }
  manifest.write("report_manifest.json");
  std::cout << "merged " << total_records << " trace records from " << traces.size()
            << " file(s)\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sequential block-based pairwise ranking with memory-aware filtering"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOpts global;
  app.add_option("--seed", global.seed, "run seed");
  app.add_option("--threads", global.threads, "worker threads for evaluation/estimation")
      ->check(CLI::PositiveNumber);
  app.add_option("--out-dir", global.out_dir, "artifact directory");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "generate a planted-structure corpus");
  saros::SynthSpec spec;
  synth_cmd->add_option("--users", spec.n_users)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--items", spec.n_items)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--k-true", spec.k_true)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--interactions", spec.interactions_per_user)
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--positive-rate", spec.positive_rate);
  synth_cmd->add_option("--drift-fraction", spec.drift_fraction)
      ->check(CLI::Range(0.0, 1.0));
  synth_cmd->add_option("--drift-step", spec.drift_step)->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--noise", spec.noise_level)->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--out", global.out_dir, "artifact directory (alias of --out-dir)");

  // train
  auto* train_cmd = app.add_subcommand("train", "train a ranking model");
  InputOpts train_in;
  TrainOpts train_tr;
  add_input_flags(train_cmd, train_in);
  add_train_flags(train_cmd, train_tr, /*with_trainer_choice=*/true);

  // mosaic
  auto* mosaic_cmd =
      app.add_subcommand("mosaic", "two-pass memory-aware filtering and retraining");
  InputOpts mosaic_in;
  TrainOpts mosaic_tr;
  std::string memory_source = "embedding";
  std::string m_rule = "sqrt";
  std::uint32_t min_series_len = 8;
  std::uint32_t keep_threshold = 4;
  add_input_flags(mosaic_cmd, mosaic_in);
  add_train_flags(mosaic_cmd, mosaic_tr, /*with_trainer_choice=*/false);
  mosaic_cmd->add_option("--memory-source", memory_source, "series per user")
      ->check(CLI::IsMember({"embedding", "feedback"}));
  mosaic_cmd->add_option("--m-rule", m_rule, "frequency count: sqrt, N^<p>, or a fixed int");
  mosaic_cmd->add_option("--min-series-len", min_series_len)->check(CLI::PositiveNumber);
  mosaic_cmd->add_option("--keep-threshold", keep_threshold,
                         "stationary components required to keep a user");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "rank test items and report metrics");
  InputOpts eval_in;
  std::string ckpt_path;
  std::vector<std::uint32_t> ks{5, 10};
  std::string candidates = "test";
  add_input_flags(eval_cmd, eval_in);
  eval_cmd->add_option("--checkpoint", ckpt_path, "trained parameters")->required();
  eval_cmd->add_option("--k", ks, "cutoff list")->delimiter(',');
  eval_cmd->add_option("--candidates", candidates, "candidate pool per user")
      ->check(CLI::IsMember({"test", "all"}));

  // report
  auto* report_cmd =
      app.add_subcommand("report", "merge traces and tabulate evaluation results");
  std::vector<std::string> trace_files, eval_files, labels;
  report_cmd->add_option("--trace", trace_files, "trace TSVs to merge");
  report_cmd->add_option("--eval", eval_files, "aggregate eval TSVs to tabulate");
  report_cmd->add_option("--label", labels, "series labels, aligned with --trace");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth_cmd->parsed()) {
      spec.seed = global.seed;
      return cmd_synth(global, spec);
    }
    if (train_cmd->parsed()) return cmd_train(global, train_in, train_tr);
    if (mosaic_cmd->parsed()) {
      return cmd_mosaic(global, mosaic_in, mosaic_tr, memory_source, m_rule,
                        min_series_len, keep_threshold);
    }
    if (eval_cmd->parsed()) {
      return cmd_evaluate(global, eval_in, ckpt_path, ks, candidates);
    }
    if (report_cmd->parsed()) return cmd_report(global, trace_files, eval_files, labels);
  } catch (const saros::ConfigError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
