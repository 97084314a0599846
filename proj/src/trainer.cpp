#include "zipfls/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "zipfls/distributions.hpp"
#include "zipfls/losses.hpp"
#include "zipfls/optim.hpp"
#include "zipfls/ranking.hpp"

namespace zipfls {
namespace {

using json = nlohmann::json;

enum class MethodDist { Zipf, Constant, RandUniform, RandPareto, Linear, LS };

MethodDist parse_dist(const std::string& name) {
  if (name == "zipf") return MethodDist::Zipf;
  if (name == "constant") return MethodDist::Constant;
  if (name == "rand-uniform") return MethodDist::RandUniform;
  if (name == "rand-pareto") return MethodDist::RandPareto;
  if (name == "linear") return MethodDist::Linear;
  if (name == "ls") return MethodDist::LS;
  throw std::invalid_argument("unknown distribution: " + name);
}

DistKind to_dist_kind(MethodDist d) {
  switch (d) {
    case MethodDist::Zipf: return DistKind::Zipf;
    case MethodDist::Constant: return DistKind::Constant;
    case MethodDist::RandUniform: return DistKind::RandomUniform;
    case MethodDist::RandPareto: return DistKind::RandomPareto;
    case MethodDist::Linear: return DistKind::LinearDecay;
    case MethodDist::LS: break;
  }
  throw std::logic_error("ls has no soft-label kind");
}

void validate(const TrainConfig& cfg) {
  if (cfg.dataset != "synthetic" && cfg.dataset != "cifar100") {
    throw std::invalid_argument("unknown dataset: " + cfg.dataset);
  }
  if (cfg.dataset == "cifar100" && cfg.train_path.empty()) {
    throw std::invalid_argument("cifar100 dataset needs train_path");
  }
  if (cfg.epochs < 0 || cfg.batch_size < 1) {
    throw std::invalid_argument("epochs must be >= 0 and batch_size >= 1");
  }
  if (!(cfg.alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  if (!(cfg.lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
  if (!(cfg.beta >= 0.0 && cfg.beta < 1.0)) {
    throw std::invalid_argument("beta must be in [0, 1)");
  }
  if (!(cfg.pareto_shape > 0.0)) throw std::invalid_argument("pareto_shape must be positive");
  parse_dist(cfg.dist);
  parse_ranking(cfg.ranking);
}

std::string method_label(const TrainConfig& cfg) {
  if (!cfg.label.empty()) return cfg.label;
  const MethodDist dist = parse_dist(cfg.dist);
  if (dist == MethodDist::LS) return "ls(beta=" + std::to_string(cfg.beta) + ")";
  if (cfg.lambda == 0.0) return "vanilla-ce";
  std::ostringstream os;
  os << cfg.dist << "(" << cfg.ranking << ",alpha=" << cfg.alpha
     << ",lambda=" << cfg.lambda << ")";
  return os.str();
}

struct Clock {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

double eval_top1_guarded(MiniNet<float>& net, const Dataset& data, const NormStats& stats) {
  return data.size() == 0 ? 0.0 : evaluate(net, data, stats);
}

}  // namespace

RankingMode parse_ranking(const std::string& name) {
  if (name == "logit") return RankingMode::LogitRank;
  if (name == "dense1") return RankingMode::Dense1;
  if (name == "dense12") return RankingMode::Dense12;
  throw std::invalid_argument("unknown ranking mode: " + name);
}

std::string ranking_name(RankingMode mode) {
  switch (mode) {
    case RankingMode::LogitRank: return "logit";
    case RankingMode::Dense1: return "dense1";
    case RankingMode::Dense12: return "dense12";
  }
  throw std::logic_error("bad ranking mode");
}

bool is_known_dist(const std::string& name) {
  try {
    parse_dist(name);
    return true;
  } catch (const std::invalid_argument&) {
    return false;
  }
}

TrainConfig parse_config_json(const std::string& text) {
  json j = json::parse(text);
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  TrainConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "dataset") cfg.dataset = value.get<std::string>();
    else if (key == "train_path") cfg.train_path = value.get<std::string>();
    else if (key == "eval_path") cfg.eval_path = value.get<std::string>();
    else if (key == "classes") cfg.classes = value.get<int>();
    else if (key == "superclasses") cfg.superclasses = value.get<int>();
    else if (key == "train_per_class") cfg.train_per_class = value.get<int>();
    else if (key == "eval_per_class") cfg.eval_per_class = value.get<int>();
    else if (key == "noise_sigma") cfg.noise_sigma = value.get<double>();
    else if (key == "data_seed") cfg.data_seed = value.get<std::uint64_t>();
    else if (key == "augment") cfg.augment = value.get<bool>();
    else if (key == "widths") {
      auto w = value.get<std::vector<int>>();
      if (w.size() != 3) throw std::invalid_argument("widths must have 3 entries");
      std::copy(w.begin(), w.end(), cfg.widths.begin());
    } else if (key == "epochs") cfg.epochs = value.get<int>();
    else if (key == "batch_size") cfg.batch_size = value.get<int>();
    else if (key == "base_lr") cfg.base_lr = value.get<double>();
    else if (key == "momentum") cfg.momentum = value.get<double>();
    else if (key == "weight_decay") cfg.weight_decay = value.get<double>();
    else if (key == "lr_factor") cfg.lr_factor = value.get<double>();
    else if (key == "milestones") cfg.milestones = value.get<std::vector<int>>();
    else if (key == "alpha") cfg.alpha = value.get<double>();
    else if (key == "lambda") cfg.lambda = value.get<double>();
    else if (key == "beta") cfg.beta = value.get<double>();
    else if (key == "ranking") cfg.ranking = value.get<std::string>();
    else if (key == "dist") cfg.dist = value.get<std::string>();
    else if (key == "pareto_shape") cfg.pareto_shape = value.get<double>();
    else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
    else if (key == "label") cfg.label = value.get<std::string>();
    else throw std::invalid_argument("unknown config key: " + key);
  }
  validate(cfg);
  return cfg;
}

std::string config_to_json(const TrainConfig& cfg) {
  json j;
  j["dataset"] = cfg.dataset;
  j["train_path"] = cfg.train_path;
  j["eval_path"] = cfg.eval_path;
  j["classes"] = cfg.classes;
  j["superclasses"] = cfg.superclasses;
  j["train_per_class"] = cfg.train_per_class;
  j["eval_per_class"] = cfg.eval_per_class;
  j["noise_sigma"] = cfg.noise_sigma;
  j["data_seed"] = cfg.data_seed;
  j["augment"] = cfg.augment;
  j["widths"] = cfg.widths;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["base_lr"] = cfg.base_lr;
  j["momentum"] = cfg.momentum;
  j["weight_decay"] = cfg.weight_decay;
  j["lr_factor"] = cfg.lr_factor;
  j["milestones"] = cfg.milestones;
  j["alpha"] = cfg.alpha;
  j["lambda"] = cfg.lambda;
  j["beta"] = cfg.beta;
  j["ranking"] = cfg.ranking;
  j["dist"] = cfg.dist;
  j["pareto_shape"] = cfg.pareto_shape;
  j["seed"] = cfg.seed;
  j["label"] = cfg.label;
  return j.dump(2);
}

std::string report_to_json(const RunReport& report) {
  json j;
  j["config"] = json::parse(config_to_json(report.config));
  json epochs = json::array();
  for (const EpochStats& e : report.epochs) {
    epochs.push_back({{"train_loss", e.train_loss},
                      {"eval_top1", e.eval_top1},
                      {"seconds", e.seconds}});
  }
  j["epochs"] = epochs;
  j["final_top1"] = report.final_top1;
  j["forward_passes"] = report.forward_passes;
  j["backward_passes"] = report.backward_passes;
  j["batches"] = report.batches;
  j["wall_seconds"] = report.wall_seconds;
  return j.dump(2);
}

BuiltData build_datasets(const TrainConfig& cfg) {
  validate(cfg);
  BuiltData out;
  if (cfg.dataset == "synthetic") {
    SyntheticSpec spec;
    spec.num_classes = cfg.classes;
    spec.superclasses = cfg.superclasses;
    spec.per_class = cfg.train_per_class + cfg.eval_per_class;
    spec.seed = cfg.data_seed;
    spec.noise_sigma = cfg.noise_sigma;
    const Dataset all = gen_synthetic(spec);
    out.train.num_classes = cfg.classes;
    out.eval.num_classes = cfg.classes;
    for (int k = 0; k < cfg.classes; ++k) {
      const std::size_t base = static_cast<std::size_t>(k) * spec.per_class;
      for (int i = 0; i < spec.per_class; ++i) {
        Dataset& dst = i < cfg.train_per_class ? out.train : out.eval;
        dst.images.push_back(all.images[base + i]);
        dst.fine.push_back(all.fine[base + i]);
        dst.coarse.push_back(all.coarse[base + i]);
      }
    }
  } else {
    out.train = load_cifar100(cfg.train_path);
    if (!cfg.eval_path.empty()) out.eval = load_cifar100(cfg.eval_path);
  }
  if (out.train.size() == 0) throw std::runtime_error("training set is empty");
  out.stats = compute_norm_stats(out.train);
  return out;
}

TrainOutput train(const TrainConfig& cfg) {
  validate(cfg);
  BuiltData data = build_datasets(cfg);

  NetConfig ncfg;
  ncfg.num_classes = data.train.num_classes;
  ncfg.widths = cfg.widths;
  TrainOutput out{RunReport{}, MiniNet<float>(ncfg, mix64(cfg.seed, 0xA11CE)), data.stats};
  out.report.config = cfg;
  MiniNet<float>& net = out.model;

  const RankingMode rmode = parse_ranking(cfg.ranking);
  const MethodDist dist = parse_dist(cfg.dist);
  const int c = ncfg.num_classes;
  const bool smoothing_only = dist == MethodDist::LS;
  const bool zipf_active = !smoothing_only && cfg.lambda > 0.0;
  const bool rank_dependent = dist == MethodDist::Zipf || dist == MethodDist::Linear ||
                              dist == MethodDist::RandPareto;
  const bool needs_votes = zipf_active && rank_dependent && rmode != RankingMode::LogitRank;
  const bool randomized = dist == MethodDist::RandUniform || dist == MethodDist::RandPareto;

  SgdState<float> sgd;
  sgd.momentum = cfg.momentum;
  sgd.weight_decay = cfg.weight_decay;
  const StepSchedule schedule{cfg.milestones, cfg.lr_factor};

  RankVector trivial_ranks;  // for rank-free soft-label kinds
  trivial_ranks.ranks.resize(std::max(c - 1, 0));
  std::iota(trivial_ranks.ranks.begin(), trivial_ranks.ranks.end(), 1.0);

  const std::size_t n_train = data.train.size();
  std::vector<std::uint32_t> order(n_train);
  std::iota(order.begin(), order.end(), 0u);

  Clock total_clock;
  Tensor4<float> batch;
  typename MiniNet<float>::Cache cache;
  std::vector<Logits> dlogits;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Clock epoch_clock;
    const double lr = lr_at(epoch, schedule, cfg.base_lr);
    std::mt19937_64 shuffle_rng(mix64(cfg.seed, mix64(0x5EED1, epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    std::mt19937_64 aug_rng(mix64(cfg.seed, mix64(0x5EED2, epoch)));

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n_train; start += cfg.batch_size) {
      const int b = static_cast<int>(
          std::min<std::size_t>(cfg.batch_size, n_train - start));
      batch.resize(b, kImageChannels, kImageSide, kImageSide);
      for (int i = 0; i < b; ++i) {
        const Image32& img = data.train.images[order[start + i]];
        float* dst = batch.v.data() + static_cast<std::size_t>(i) * kImagePixels;
        if (cfg.augment) {
          normalize_into(augment(img, aug_rng), data.stats, dst);
        } else {
          normalize_into(img, data.stats, dst);
        }
      }

      ForwardTaps taps = net.forward(batch, NetMode::Train, &cache, needs_votes);
      ++out.report.forward_passes;

      dlogits.assign(b, Logits(c, 0.0));
      for (int i = 0; i < b; ++i) {
        const Logits& z = taps.pooled[i];
        const int y = data.train.fine[order[start + i]];
        for (double v : z) {
          if (!std::isfinite(v)) {
            throw std::runtime_error("loss diverged at epoch " + std::to_string(epoch) +
                                     " batch " + std::to_string(start / cfg.batch_size));
          }
        }
        LossResult res;
        if (smoothing_only) {
          res = ls_loss(z, y, cfg.beta);
        } else if (!zipf_active) {
          res = ce_loss(z, y);
        } else {
          RankVector ranks;
          const RankVector* use_ranks = &trivial_ranks;
          if (rank_dependent) {
            if (rmode == RankingMode::LogitRank) {
              ranks = logit_rank(z, y);
            } else {
              std::array<const DenseLogitsMap*, 2> maps{&taps.dense1[i], &taps.dense2[i]};
              const std::size_t n_maps = rmode == RankingMode::Dense1 ? 1 : 2;
              ranks = votes_to_ranks(
                  dense_votes(std::span<const DenseLogitsMap* const>(maps.data(), n_maps), y), y);
            }
            use_ranks = &ranks;
          }
          DistributionKind dk;
          dk.kind = to_dist_kind(dist);
          dk.alpha = cfg.alpha;
          dk.pareto_shape = cfg.pareto_shape;
          if (randomized) {
            dk.seed = mix64(cfg.seed, mix64(0x5EED3, mix64(epoch, start + i)));
          }
          res = total_loss(z, y, make_distribution(dk, *use_ranks), cfg.lambda);
        }
        if (!std::isfinite(res.value)) {
          throw std::runtime_error("loss diverged at epoch " + std::to_string(epoch) +
                                   " batch " + std::to_string(start / cfg.batch_size));
        }
        loss_sum += res.value;
        for (int cc = 0; cc < c; ++cc) dlogits[i][cc] = res.grad[cc] / b;
      }

      net.zero_grad();
      net.backward(dlogits, cache);
      ++out.report.backward_passes;
      ++out.report.batches;
      sgd_step(net.params(), sgd, lr);
    }

    EpochStats stats;
    stats.train_loss = loss_sum / static_cast<double>(n_train);
    stats.seconds = epoch_clock.seconds();
    stats.eval_top1 = eval_top1_guarded(net, data.eval, data.stats);
    out.report.epochs.push_back(stats);
  }

  out.report.final_top1 = cfg.epochs > 0 && !out.report.epochs.empty()
                              ? out.report.epochs.back().eval_top1
                              : eval_top1_guarded(net, data.eval, data.stats);
  out.report.wall_seconds = total_clock.seconds();
  return out;
}

double evaluate(MiniNet<float>& net, const Dataset& data, const NormStats& stats) {
  if (data.size() == 0) throw std::invalid_argument("empty dataset");
  const int c = net.config().num_classes;
  for (std::uint8_t label : data.fine) {
    if (label >= c) {
      throw std::invalid_argument("class-count mismatch: label " + std::to_string(label) +
                                  " outside checkpoint classes " + std::to_string(c));
    }
  }
  std::size_t correct = 0;
  constexpr int kChunk = 256;
  Tensor4<float> batch;
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    const int n = static_cast<int>(std::min<std::size_t>(kChunk, data.size() - start));
    batch.resize(n, kImageChannels, kImageSide, kImageSide);
    for (int i = 0; i < n; ++i) {
      normalize_into(data.images[start + i], stats,
                     batch.v.data() + static_cast<std::size_t>(i) * kImagePixels);
    }
    ForwardTaps taps = net.forward(batch, NetMode::Eval, nullptr, false);
    for (int i = 0; i < n; ++i) {
      const Logits& z = taps.pooled[i];
      int best = 0;
      for (int id = 1; id < c; ++id) {
        if (z[id] > z[best]) best = id;
      }
      if (best == data.fine[start + i]) ++correct;
    }
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(data.size());
}

std::vector<CompareRow> compare(const std::vector<TrainConfig>& configs,
                                int num_seeds, int threads) {
  if (configs.empty()) throw std::invalid_argument("no configs to compare");
  if (num_seeds < 1) throw std::invalid_argument("num_seeds must be >= 1");
  for (const TrainConfig& cfg : configs) validate(cfg);

  struct Task {
    std::size_t cfg_idx;
    int seed_offset;
  };
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    for (int s = 0; s < num_seeds; ++s) tasks.push_back({i, s});
  }
  std::vector<double> results(tasks.size(), 0.0);
  std::vector<std::string> errors(tasks.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= tasks.size()) return;
      TrainConfig cfg = configs[tasks[t].cfg_idx];
      cfg.seed += static_cast<std::uint64_t>(tasks[t].seed_offset);
      try {
        results[t] = train(cfg).report.final_top1;
      } catch (const std::exception& e) {
        errors[t] = e.what();
      }
    }
  };
  const int n_workers = std::max(1, std::min<int>(threads, static_cast<int>(tasks.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < n_workers; ++i) pool.emplace_back(worker);
  worker();
  for (std::thread& th : pool) th.join();
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (!errors[t].empty()) {
      throw std::runtime_error("run failed (" + method_label(configs[tasks[t].cfg_idx]) +
                               ", seed offset " + std::to_string(tasks[t].seed_offset) +
                               "): " + errors[t]);
    }
  }

  std::vector<CompareRow> rows(configs.size());
  for (std::size_t i = 0; i < configs.size(); ++i) {
    rows[i].label = method_label(configs[i]);
    rows[i].per_seed.resize(num_seeds);
  }
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    rows[tasks[t].cfg_idx].per_seed[tasks[t].seed_offset] = results[t];
  }
  for (CompareRow& row : rows) {
    const double n = static_cast<double>(row.per_seed.size());
    row.mean_top1 = std::accumulate(row.per_seed.begin(), row.per_seed.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : row.per_seed) ss += (v - row.mean_top1) * (v - row.mean_top1);
    row.std_top1 = row.per_seed.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  }
  return rows;
}

std::string compare_csv(const std::vector<CompareRow>& rows) {
  std::ostringstream os;
  os << "method,seeds,mean_top1,std_top1,per_seed\n";
  os.precision(6);
  os << std::fixed;
  for (const CompareRow& row : rows) {
    os << row.label << "," << row.per_seed.size() << "," << row.mean_top1 << ","
       << row.std_top1 << ",";
    for (std::size_t i = 0; i < row.per_seed.size(); ++i) {
      if (i) os << ";";
      os << row.per_seed[i];
    }
    os << "\n";
  }
  return os.str();
}

int default_threads() {
  if (const char* env = std::getenv("ZIPFLS_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace zipfls
