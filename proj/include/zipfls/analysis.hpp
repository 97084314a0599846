#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "zipfls/data.hpp"
#include "zipfls/nn.hpp"
#include "zipfls/types.hpp"

namespace zipfls {

// Mean over samples of the descending-sorted softmax outputs. Entry r-1
// is the average probability mass at rank r; the vector itself is a valid
// distribution.
struct SortedProfile {
  std::vector<double> mean_sorted;
  std::size_t sample_count = 0;
};

struct PowerLawFit {
  double alpha_hat = 0.0;  // magnitude of the log-log slope
  double intercept = 0.0;  // log-space intercept
  double r2 = 0.0;
  int r_min = 1, r_max = 1;
};

SortedProfile sorted_profile_from_logits(std::span<const Logits> logits);
SortedProfile sorted_softmax_mean(MiniNet<float>& model, const Dataset& data,
                                  const NormStats& stats);

// OLS of log(mean probability) on log(rank) over ranks [r_min, r_max].
PowerLawFit fit_power_law(const SortedProfile& profile, int r_min, int r_max);

// CSV columns: rank, mean_prob, fit_prob with fit = exp(intercept) * r^(-alpha).
void emit_profile_csv(const SortedProfile& profile, const PowerLawFit& fit,
                      const std::string& path);

}  // namespace zipfls
