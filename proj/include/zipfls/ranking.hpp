#pragma once

#include <span>
#include <vector>

#include "zipfls/types.hpp"

namespace zipfls {

// Per-location class scores from applying the shared classifier to every
// position of a feature map. Location-major layout: scores[k * num_classes + c]
// for location k = y * width + x.
struct DenseLogitsMap {
  int height = 0;
  int width = 0;
  int num_classes = 0;
  std::vector<double> scores;

  int locations() const { return height * width; }
  double at(int location, int c) const {
    return scores[static_cast<std::size_t>(location) * num_classes + c];
  }
};

struct VoteHistogram {
  std::vector<long> counts;  // per class id; counts[target] forced to 0
  long total_votes = 0;      // sum of counts after target exclusion
};

// Ranks the C-1 non-target classes by descending logit, 1-based. Exact ties
// share the fractional mean of the positions they span.
RankVector logit_rank(const Logits& logits, int target);

// Top-1 vote per location over all supplied maps; target votes discarded.
// Argmax ties at a location go to the lowest class id.
VoteHistogram dense_votes(std::span<const DenseLogitsMap> maps, int target);
VoteHistogram dense_votes(std::span<const DenseLogitsMap* const> maps, int target);

// Ranks positively-voted classes by descending count (fractional mid-rank
// ties); the zero-vote remainder shares rank V+1 where V is the number of
// positions occupied by voted classes. No votes at all: every class ranks 1.
RankVector votes_to_ranks(const VoteHistogram& hist, int target);

}  // namespace zipfls
