#include "zipfls/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace zipfls {
namespace {

void check_ranks(const RankVector& ranks) {
  if (ranks.ranks.empty()) {
    throw std::invalid_argument("no non-target classes");
  }
  for (double r : ranks.ranks) {
    if (!(r >= 1.0)) {
      throw std::invalid_argument("ranks must be >= 1");
    }
  }
}

SoftLabel normalized(std::vector<double> weights) {
  double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(sum > 0.0) || !std::isfinite(sum)) {
    throw std::runtime_error("distribution weights do not normalize");
  }
  for (double& w : weights) w /= sum;
  return SoftLabel{std::move(weights)};
}

// 53-bit uniform in (0, 1); engine-portable, no distribution adaptors.
double unit_open(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

SoftLabel zipf_weights(const RankVector& ranks, double alpha) {
  check_ranks(ranks);
  if (alpha < 0.0 || !std::isfinite(alpha)) {
    throw std::invalid_argument("zipf alpha must be non-negative");
  }
  std::vector<double> w(ranks.ranks.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::pow(ranks.ranks[i], -alpha);
  }
  return normalized(std::move(w));
}

SoftLabel make_distribution(const DistributionKind& kind, const RankVector& ranks) {
  check_ranks(ranks);
  const std::size_t n = ranks.ranks.size();
  switch (kind.kind) {
    case DistKind::Zipf:
      return zipf_weights(ranks, kind.alpha);
    case DistKind::Constant: {
      return SoftLabel{std::vector<double>(n, 1.0 / static_cast<double>(n))};
    }
    case DistKind::RandomUniform: {
      std::mt19937_64 rng(kind.seed);
      std::vector<double> w(n);
      for (double& v : w) v = unit_open(rng);
      return normalized(std::move(w));
    }
    case DistKind::RandomPareto: {
      if (!(kind.pareto_shape > 0.0)) {
        throw std::invalid_argument("pareto shape must be positive");
      }
      std::mt19937_64 rng(kind.seed);
      std::vector<double> draws(n);
      for (double& v : draws) {
        v = std::pow(1.0 - unit_open(rng), -1.0 / kind.pareto_shape);
      }
      std::sort(draws.begin(), draws.end(), std::greater<>());
      // Largest draw goes to the best (lowest) rank; ties by index.
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (ranks.ranks[a] != ranks.ranks[b]) return ranks.ranks[a] < ranks.ranks[b];
        return a < b;
      });
      std::vector<double> w(n);
      for (std::size_t pos = 0; pos < n; ++pos) w[order[pos]] = draws[pos];
      return normalized(std::move(w));
    }
    case DistKind::LinearDecay: {
      // weight = C - rank with C = n + 1; max rank is n so weights stay > 0.
      const double c = static_cast<double>(n) + 1.0;
      std::vector<double> w(n);
      for (std::size_t i = 0; i < n; ++i) w[i] = c - ranks.ranks[i];
      return normalized(std::move(w));
    }
  }
  throw std::logic_error("unknown distribution kind");
}

}  // namespace zipfls
