#include "zipfls/ranking.hpp"

#include <algorithm>
#include <stdexcept>

namespace zipfls {
namespace {

// Assigns fractional mid-ranks over items already sorted best-first.
// `key` values that compare equal share the mean of their 1-based positions.
template <typename Item, typename KeyOf>
void assign_midranks(const std::vector<Item>& sorted, KeyOf key,
                     std::vector<double>& out_rank_by_slot) {
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j < sorted.size() && key(sorted[j]) == key(sorted[i])) ++j;
    // positions i+1 .. j span the tie group; mean = (i+1 + j) / 2
    const double rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) out_rank_by_slot[k] = rank;
    i = j;
  }
}

}  // namespace

RankVector logit_rank(const Logits& logits, int target) {
  const int c = static_cast<int>(logits.size());
  if (c < 2) throw std::invalid_argument("no non-target classes");
  if (target < 0 || target >= c) throw std::invalid_argument("target out of range");

  struct Entry {
    double logit;
    int class_id;
  };
  std::vector<Entry> order;
  order.reserve(c - 1);
  for (int id = 0; id < c; ++id) {
    if (id != target) order.push_back({logits[id], id});
  }
  std::sort(order.begin(), order.end(), [](const Entry& a, const Entry& b) {
    if (a.logit != b.logit) return a.logit > b.logit;
    return a.class_id < b.class_id;
  });

  std::vector<double> rank_by_slot(order.size());
  assign_midranks(order, [](const Entry& e) { return e.logit; }, rank_by_slot);

  RankVector out;
  out.ranks.resize(order.size());
  for (std::size_t slot = 0; slot < order.size(); ++slot) {
    out.ranks[nontarget_index(order[slot].class_id, target)] = rank_by_slot[slot];
  }
  return out;
}

VoteHistogram dense_votes(std::span<const DenseLogitsMap* const> maps, int target) {
  if (maps.empty()) throw std::invalid_argument("no dense maps supplied");
  const int c = maps[0]->num_classes;
  if (c < 2) throw std::invalid_argument("no non-target classes");
  if (target < 0 || target >= c) throw std::invalid_argument("target out of range");

  VoteHistogram hist;
  hist.counts.assign(c, 0);
  for (const DenseLogitsMap* map : maps) {
    if (map->num_classes != c) {
      throw std::invalid_argument("dense maps disagree on class count");
    }
    if (map->height < 1 || map->width < 1 ||
        map->scores.size() != static_cast<std::size_t>(map->locations()) * c) {
      throw std::invalid_argument("malformed dense logits map");
    }
    for (int k = 0; k < map->locations(); ++k) {
      const double* row = map->scores.data() + static_cast<std::size_t>(k) * c;
      int best = 0;
      for (int id = 1; id < c; ++id) {
        if (row[id] > row[best]) best = id;  // ties keep the lowest id
      }
      ++hist.counts[best];
    }
  }
  hist.counts[target] = 0;
  hist.total_votes = 0;
  for (long n : hist.counts) hist.total_votes += n;
  return hist;
}

VoteHistogram dense_votes(std::span<const DenseLogitsMap> maps, int target) {
  std::vector<const DenseLogitsMap*> ptrs;
  ptrs.reserve(maps.size());
  for (const DenseLogitsMap& map : maps) ptrs.push_back(&map);
  return dense_votes(std::span<const DenseLogitsMap* const>(ptrs), target);
}

RankVector votes_to_ranks(const VoteHistogram& hist, int target) {
  const int c = static_cast<int>(hist.counts.size());
  if (c < 2) throw std::invalid_argument("no non-target classes");
  if (target < 0 || target >= c) throw std::invalid_argument("target out of range");

  struct Entry {
    long count;
    int class_id;
  };
  std::vector<Entry> voted;
  for (int id = 0; id < c; ++id) {
    if (id == target) continue;
    if (hist.counts[id] < 0) throw std::invalid_argument("negative vote count");
    if (hist.counts[id] > 0) voted.push_back({hist.counts[id], id});
  }

  RankVector out;
  out.ranks.assign(c - 1, 1.0);
  if (voted.empty()) return out;  // degenerate: uniform label downstream

  std::sort(voted.begin(), voted.end(), [](const Entry& a, const Entry& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.class_id < b.class_id;
  });
  std::vector<double> rank_by_slot(voted.size());
  assign_midranks(voted, [](const Entry& e) { return e.count; }, rank_by_slot);

  const double unvoted_rank = static_cast<double>(voted.size()) + 1.0;
  for (double& r : out.ranks) r = unvoted_rank;
  for (std::size_t slot = 0; slot < voted.size(); ++slot) {
    out.ranks[nontarget_index(voted[slot].class_id, target)] = rank_by_slot[slot];
  }
  return out;
}

}  // namespace zipfls
