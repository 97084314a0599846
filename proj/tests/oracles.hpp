// Independent reference implementations used as test oracles. These must not
// share code with the library paths they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <vector>

#include "zipfls/ranking.hpp"
#include "zipfls/types.hpp"

namespace oracle {

// Central finite differences of f at x, step h per coordinate.
inline std::vector<double> central_diff(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double h = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double fp = f(x);
    x[i] = keep - h;
    const double fm = f(x);
    x[i] = keep;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// Relative error between gradient vectors: max-norm of the difference over
// the max-norm of either vector. Per-component ratios are meaningless below
// the finite-difference noise floor (~1e-9 absolute at h = 1e-6), so the
// comparison is normalized by the gradient scale instead.
inline double max_rel_err(const std::vector<double>& got,
                          const std::vector<double>& want) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    diff = std::max(diff, std::abs(got[i] - want[i]));
    scale = std::max({scale, std::abs(got[i]), std::abs(want[i])});
  }
  return diff / std::max(scale, 1e-12);
}

// Brute-force dense-vote ranking: literal enumeration over locations, then
// rank assignment by repeatedly scanning for the best remaining count group.
inline std::vector<double> vote_rank_bruteforce(
    const std::vector<zipfls::DenseLogitsMap>& maps, int target) {
  const int c = maps.at(0).num_classes;
  std::map<int, long> count_by_class;
  for (const auto& map : maps) {
    for (int y = 0; y < map.height; ++y) {
      for (int x = 0; x < map.width; ++x) {
        const int k = y * map.width + x;
        int best = 0;
        double best_v = map.at(k, 0);
        for (int id = 1; id < c; ++id) {
          if (map.at(k, id) > best_v) {
            best_v = map.at(k, id);
            best = id;
          }
        }
        count_by_class[best] += 1;
      }
    }
  }
  count_by_class.erase(target);

  std::vector<std::pair<long, int>> voted;  // (count, class)
  for (const auto& [id, n] : count_by_class) {
    if (n > 0) voted.push_back({n, id});
  }
  std::sort(voted.begin(), voted.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });

  std::vector<double> ranks(c - 1, 0.0);
  if (voted.empty()) {
    std::fill(ranks.begin(), ranks.end(), 1.0);
    return ranks;
  }
  // O(n^2) tie averaging: for each item, its rank is the mean of positions of
  // all items with the same count.
  for (std::size_t i = 0; i < voted.size(); ++i) {
    double pos_sum = 0.0;
    int group = 0;
    for (std::size_t j = 0; j < voted.size(); ++j) {
      if (voted[j].first == voted[i].first) {
        pos_sum += static_cast<double>(j + 1);
        ++group;
      }
    }
    ranks[zipfls::nontarget_index(voted[i].second, target)] = pos_sum / group;
  }
  const double floor_rank = static_cast<double>(voted.size()) + 1.0;
  for (int id = 0; id < c; ++id) {
    if (id == target) continue;
    const int idx = zipfls::nontarget_index(id, target);
    if (ranks[idx] == 0.0) ranks[idx] = floor_rank;
  }
  return ranks;
}

inline zipfls::DenseLogitsMap random_map(int h, int w, int c, std::mt19937_64& rng,
                                         int distinct_levels = 0) {
  zipfls::DenseLogitsMap map;
  map.height = h;
  map.width = w;
  map.num_classes = c;
  map.scores.resize(static_cast<std::size_t>(h) * w * c);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> level(0, std::max(distinct_levels - 1, 0));
  for (double& v : map.scores) {
    v = distinct_levels > 0 ? static_cast<double>(level(rng)) : g(rng);
  }
  return map;
}

}  // namespace oracle
