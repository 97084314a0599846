#pragma once

#include <cstdint>

#include "zipfls/types.hpp"

namespace zipfls {

enum class DistKind { Zipf, Constant, RandomUniform, RandomPareto, LinearDecay };

struct DistributionKind {
  DistKind kind = DistKind::Zipf;
  double alpha = 1.0;         // Zipf decay exponent
  std::uint64_t seed = 0;     // randomized kinds only
  double pareto_shape = 1.0;  // RandomPareto only
};

// Zipf soft label from ranks: probs[c] = ranks[c]^(-alpha) / sum_m ranks[m]^(-alpha).
// alpha = 0 yields the uniform label; alpha < 0 is rejected.
SoftLabel zipf_weights(const RankVector& ranks, double alpha);

// Soft label of the requested shape over the same non-target index set as
// `ranks`. Randomized kinds are deterministic given DistributionKind::seed.
SoftLabel make_distribution(const DistributionKind& kind, const RankVector& ranks);

}  // namespace zipfls
