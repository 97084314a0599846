#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "zipfls/data.hpp"
#include "zipfls/nn.hpp"

namespace zipfls {

enum class RankingMode { LogitRank, Dense1, Dense12 };

RankingMode parse_ranking(const std::string& name);   // logit | dense1 | dense12
std::string ranking_name(RankingMode mode);

// Distributions accepted by the trainer: the soft-label shapes plus "ls",
// which switches the objective to uniform label smoothing.
bool is_known_dist(const std::string& name);

struct TrainConfig {
  // data
  std::string dataset = "synthetic";  // synthetic | cifar100
  std::string train_path;             // cifar100 binary
  std::string eval_path;
  int classes = 10;
  int superclasses = 2;
  int train_per_class = 100;
  int eval_per_class = 50;
  double noise_sigma = 25.0;
  std::uint64_t data_seed = 9;
  bool augment = true;
  // model
  std::array<int, 3> widths{16, 32, 32};
  // optimization
  int epochs = 30;
  int batch_size = 128;
  double base_lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double lr_factor = 0.1;
  std::vector<int> milestones{100, 150};
  // method
  double alpha = 1.0;   // Zipf decay exponent
  double lambda = 1.0;  // Zipf loss weight; 0 reduces to vanilla CE
  double beta = 0.1;    // label smoothing mass, used when dist == "ls"
  std::string ranking = "dense12";  // logit | dense1 | dense12
  std::string dist = "zipf";  // zipf|constant|rand-uniform|rand-pareto|linear|ls
  double pareto_shape = 1.0;
  std::uint64_t seed = 1;
  std::string label;  // row label in comparison output; defaults from method
};

// Unknown keys are rejected so typos cannot silently fall back to defaults.
TrainConfig parse_config_json(const std::string& text);
std::string config_to_json(const TrainConfig& cfg);

struct EpochStats {
  double train_loss = 0.0;
  double eval_top1 = 0.0;
  double seconds = 0.0;  // train phase only, eval excluded
};

struct RunReport {
  TrainConfig config;
  std::vector<EpochStats> epochs;
  double final_top1 = 0.0;
  std::uint64_t forward_passes = 0;   // one per batch: the one-pass property
  std::uint64_t backward_passes = 0;
  std::uint64_t batches = 0;
  double wall_seconds = 0.0;
};
std::string report_to_json(const RunReport& report);

struct BuiltData {
  Dataset train;
  Dataset eval;
  NormStats stats;
};
BuiltData build_datasets(const TrainConfig& cfg);

struct TrainOutput {
  RunReport report;
  MiniNet<float> model;
  NormStats stats;
};
TrainOutput train(const TrainConfig& cfg);

// Top-1 accuracy in percent; argmax ties go to the lowest class id.
double evaluate(MiniNet<float>& net, const Dataset& data, const NormStats& stats);

struct CompareRow {
  std::string label;
  double mean_top1 = 0.0;
  double std_top1 = 0.0;
  std::vector<double> per_seed;
};
// Runs every config over num_seeds seeds (config seed, seed+1, ...).
std::vector<CompareRow> compare(const std::vector<TrainConfig>& configs,
                                int num_seeds, int threads);
std::string compare_csv(const std::vector<CompareRow>& rows);

// ZIPFLS_THREADS env override, else hardware concurrency.
int default_threads();

}  // namespace zipfls
