#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "zipfls/analysis.hpp"
#include "zipfls/checkpoint.hpp"
#include "zipfls/distributions.hpp"
#include "zipfls/losses.hpp"
#include "zipfls/ranking.hpp"
#include "zipfls/trainer.hpp"

namespace fs = std::filesystem;
using namespace zipfls;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

// Thrown for bad flag/config values; maps to the usage exit code.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << text;
}

struct TrainArgs {
  std::string config_path;
  std::string out_dir = "runs/latest";
  double lambda = -1.0, alpha = -1.0, beta = -1.0;
  std::string ranking, dist;
  std::int64_t seed = -1;
  int epochs = -1;
};

TrainConfig resolve_train_config(const TrainArgs& args) {
  TrainConfig cfg;
  if (!args.config_path.empty()) {
    try {
      cfg = parse_config_json(read_file(args.config_path));
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string("bad --config: ") + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw UsageError(std::string("bad --config: ") + e.what());
    }
  }
  if (args.lambda >= 0.0) cfg.lambda = args.lambda;
  if (args.alpha >= 0.0) cfg.alpha = args.alpha;
  if (args.beta >= 0.0) cfg.beta = args.beta;
  if (!args.ranking.empty()) cfg.ranking = args.ranking;
  if (!args.dist.empty()) cfg.dist = args.dist;
  if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
  if (args.epochs >= 0) cfg.epochs = args.epochs;
  if (!args.dist.empty() && !is_known_dist(cfg.dist)) {
    throw UsageError("bad --dist value: " + cfg.dist);
  }
  try {
    parse_ranking(cfg.ranking);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("bad --ranking value: ") + e.what());
  }
  return cfg;
}

int cmd_train(const TrainArgs& args) {
  const TrainConfig cfg = resolve_train_config(args);
  fs::create_directories(args.out_dir);
  // Fully resolved config lands next to the outputs before the run starts.
  write_file((fs::path(args.out_dir) / "config.json").string(), config_to_json(cfg));

  TrainOutput out = train(cfg);
  write_file((fs::path(args.out_dir) / "report.json").string(),
             report_to_json(out.report));
  std::ostringstream csv;
  csv << "epoch,train_loss,eval_top1,seconds\n";
  for (std::size_t i = 0; i < out.report.epochs.size(); ++i) {
    const EpochStats& e = out.report.epochs[i];
    csv << i << "," << e.train_loss << "," << e.eval_top1 << "," << e.seconds << "\n";
  }
  write_file((fs::path(args.out_dir) / "metrics.csv").string(), csv.str());
  save_checkpoint((fs::path(args.out_dir) / "model.ckpt").string(), out.model, out.stats);

  // Eval split in CIFAR record layout so evaluate/analyze can reuse it.
  const BuiltData data = build_datasets(cfg);
  if (data.eval.size() > 0) {
    const auto bytes = to_cifar_records(data.eval);
    std::ofstream bin(fs::path(args.out_dir) / "eval.bin", std::ios::binary);
    bin.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
  }

  std::cout << "final_top1 " << out.report.final_top1 << "\n"
            << "outputs " << args.out_dir << "\n";
  return kExitOk;
}

int cmd_evaluate(const std::string& ckpt, const std::string& data_path) {
  LoadedNet loaded = load_checkpoint(ckpt);
  const Dataset data = load_cifar100(data_path);
  std::cout << "top1 " << evaluate(loaded.net, data, loaded.stats) << "\n";
  return kExitOk;
}

int cmd_compare(const std::vector<std::string>& config_paths, int seeds,
                const std::string& out_path) {
  std::vector<TrainConfig> configs;
  for (const std::string& path : config_paths) {
    try {
      configs.push_back(parse_config_json(read_file(path)));
    } catch (const std::invalid_argument& e) {
      throw UsageError("bad config " + path + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw UsageError("bad config " + path + ": " + e.what());
    }
  }
  const std::string csv = compare_csv(compare(configs, seeds, default_threads()));
  if (!out_path.empty()) write_file(out_path, csv);
  std::cout << csv;
  return kExitOk;
}

int cmd_analyze(const std::string& ckpt, const std::string& data_path, int fit_min,
                int fit_max, const std::string& out_path) {
  LoadedNet loaded = load_checkpoint(ckpt);
  const Dataset data = load_cifar100(data_path);
  const SortedProfile profile = sorted_softmax_mean(loaded.net, data, loaded.stats);
  const int c = static_cast<int>(profile.mean_sorted.size());
  if (fit_max <= 0) fit_max = std::min(c, 100);  // default range [2, min(C, 100)]
  const PowerLawFit fit = fit_power_law(profile, fit_min, fit_max);
  emit_profile_csv(profile, fit, out_path);

  nlohmann::json j{{"alpha_hat", fit.alpha_hat},
                   {"intercept", fit.intercept},
                   {"r2", fit.r2},
                   {"r_min", fit.r_min},
                   {"r_max", fit.r_max},
                   {"samples", profile.sample_count}};
  write_file(out_path + ".fit.json", j.dump(2));
  std::cout << "alpha_hat " << fit.alpha_hat << "\nr2 " << fit.r2 << "\nprofile "
            << out_path << "\n";
  return kExitOk;
}

int cmd_labelgen(const std::string& logits_path, int target, double alpha) {
  std::istringstream is(read_file(logits_path));
  Logits logits;
  double v;
  while (is >> v) logits.push_back(v);
  if (logits.empty()) throw std::runtime_error("no logits in " + logits_path);
  const RankVector ranks = logit_rank(logits, target);
  const SoftLabel label = zipf_weights(ranks, alpha);
  std::cout << "ranks:";
  for (double r : ranks.ranks) std::cout << " " << r;
  std::cout << "\nlabel:";
  char buf[32];
  for (double p : label.probs) {
    std::snprintf(buf, sizeof(buf), " %.6f", p);
    std::cout << buf;
  }
  std::cout << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zipf's label smoothing trainer and analysis tools"};
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("train", "train a model");
  train_cmd->add_option("--config", train_args.config_path, "JSON config file");
  train_cmd->add_option("--out", train_args.out_dir, "output directory");
  train_cmd->add_option("--lambda", train_args.lambda, "Zipf loss weight");
  train_cmd->add_option("--alpha", train_args.alpha, "Zipf decay exponent");
  train_cmd->add_option("--beta", train_args.beta, "label smoothing mass");
  train_cmd->add_option("--ranking", train_args.ranking, "logit|dense1|dense12");
  train_cmd->add_option("--dist", train_args.dist,
                        "zipf|constant|rand-uniform|rand-pareto|linear|ls");
  train_cmd->add_option("--seed", train_args.seed, "training seed");
  train_cmd->add_option("--epochs", train_args.epochs, "epoch count override");

  std::string ckpt, data_path;
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "top-1 accuracy of a checkpoint");
  eval_cmd->add_option("--ckpt", ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--data", data_path, "CIFAR-format binary file")->required();

  std::vector<std::string> config_paths;
  int seeds = 1;
  std::string compare_out;
  CLI::App* compare_cmd = app.add_subcommand("compare", "mean/std over seeds per config");
  compare_cmd->add_option("--configs", config_paths, "JSON config files")->required();
  compare_cmd->add_option("--seeds", seeds, "seeds per config");
  compare_cmd->add_option("--out", compare_out, "output CSV path");

  std::string an_ckpt, an_data, an_out = "profile.csv";
  int fit_min = 2, fit_max = 0;
  CLI::App* analyze_cmd =
      app.add_subcommand("analyze", "sorted softmax profile and power-law fit");
  analyze_cmd->add_option("--ckpt", an_ckpt, "checkpoint file")->required();
  analyze_cmd->add_option("--data", an_data, "CIFAR-format binary file")->required();
  analyze_cmd->add_option("--fit-min", fit_min, "first rank of the fit range");
  analyze_cmd->add_option("--fit-max", fit_max, "last rank of the fit range");
  analyze_cmd->add_option("--out", an_out, "profile CSV path");

  std::string lg_logits;
  int lg_target = 0;
  double lg_alpha = 1.0;
  CLI::App* labelgen_cmd =
      app.add_subcommand("labelgen", "print ranks and Zipf label for logits");
  labelgen_cmd->add_option("--logits", lg_logits, "text file of logits")->required();
  labelgen_cmd->add_option("--target", lg_target, "target class id");
  labelgen_cmd->add_option("--alpha", lg_alpha, "Zipf decay exponent");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints usage/help
    return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train_args);
    if (*eval_cmd) return cmd_evaluate(ckpt, data_path);
    if (*compare_cmd) return cmd_compare(config_paths, seeds, compare_out);
    if (*analyze_cmd) return cmd_analyze(an_ckpt, an_data, fit_min, fit_max, an_out);
    if (*labelgen_cmd) return cmd_labelgen(lg_logits, lg_target, lg_alpha);
    std::cerr << "error: no subcommand\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
