#include "zipfls/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <stdexcept>

#include "zipfls/losses.hpp"

namespace zipfls {

SortedProfile sorted_profile_from_logits(std::span<const Logits> logits) {
  if (logits.empty()) throw std::invalid_argument("empty dataset");
  const std::size_t c = logits[0].size();
  SortedProfile profile;
  profile.mean_sorted.assign(c, 0.0);
  profile.sample_count = logits.size();
  std::vector<double> p;
  for (const Logits& z : logits) {
    if (z.size() != c) throw std::invalid_argument("inconsistent class counts");
    p = softmax(z);
    std::sort(p.begin(), p.end(), std::greater<>());
    for (std::size_t i = 0; i < c; ++i) profile.mean_sorted[i] += p[i];
  }
  for (double& v : profile.mean_sorted) v /= static_cast<double>(logits.size());
  return profile;
}

SortedProfile sorted_softmax_mean(MiniNet<float>& model, const Dataset& data,
                                  const NormStats& stats) {
  if (data.size() == 0) throw std::invalid_argument("empty dataset");
  std::vector<Logits> all;
  all.reserve(data.size());
  constexpr int kChunk = 256;
  Tensor4<float> batch;
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    const int n = static_cast<int>(std::min<std::size_t>(kChunk, data.size() - start));
    batch.resize(n, kImageChannels, kImageSide, kImageSide);
    for (int i = 0; i < n; ++i) {
      normalize_into(data.images[start + i], stats,
                     batch.v.data() + static_cast<std::size_t>(i) * kImagePixels);
    }
    ForwardTaps taps = model.forward(batch, NetMode::Eval, nullptr, false);
    for (int i = 0; i < n; ++i) all.push_back(std::move(taps.pooled[i]));
  }
  return sorted_profile_from_logits(all);
}

PowerLawFit fit_power_law(const SortedProfile& profile, int r_min, int r_max) {
  const int c = static_cast<int>(profile.mean_sorted.size());
  if (r_min < 1 || r_max > c || r_min > r_max) {
    throw std::invalid_argument("fit range out of bounds");
  }
  const int n = r_max - r_min + 1;
  if (n < 2) throw std::invalid_argument("fit range needs at least 2 ranks");

  std::vector<double> xs(n), ys(n);
  for (int r = r_min; r <= r_max; ++r) {
    const double f = profile.mean_sorted[r - 1];
    if (!(f > 0.0)) {
      throw std::invalid_argument(
          "zero probability at rank " + std::to_string(r) + "; use a smaller r_max");
    }
    xs[r - r_min] = std::log(static_cast<double>(r));
    ys[r - r_min] = std::log(f);
  }

  double mx = 0.0, my = 0.0;
  for (int i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (int i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  const double slope = sxy / sxx;  // ranks differ, so sxx > 0

  PowerLawFit fit;
  fit.r_min = r_min;
  fit.r_max = r_max;
  fit.alpha_hat = slope == 0.0 ? 0.0 : -slope;
  fit.intercept = my - slope * mx;
  double ss_res = 0.0;
  for (int i = 0; i < n; ++i) {
    const double e = ys[i] - (fit.intercept + slope * xs[i]);
    ss_res += e * e;
  }
  if (syy == 0.0) {
    // Constant target: r2 is 1 only for an exact fit, else 0.
    fit.r2 = ss_res == 0.0 ? 1.0 : 0.0;
  } else {
    fit.r2 = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  }
  return fit;
}

void emit_profile_csv(const SortedProfile& profile, const PowerLawFit& fit,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write profile csv: " + path);
  out << "rank,mean_prob,fit_prob\n";
  char line[96];
  for (std::size_t i = 0; i < profile.mean_sorted.size(); ++i) {
    const double r = static_cast<double>(i + 1);
    const double fitted = std::exp(fit.intercept) * std::pow(r, -fit.alpha_hat);
    std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g\n", i + 1,
                  profile.mean_sorted[i], fitted);
    out << line;
  }
  if (!out) throw std::runtime_error("failed writing profile csv: " + path);
}

}  // namespace zipfls
