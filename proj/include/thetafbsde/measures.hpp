#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "thetafbsde/errors.hpp"

namespace thetafbsde {

/// Uniform-weight empirical measure on the real line. Samples are kept sorted
/// so that quantile couplings are a plain index match.
class EmpiricalMeasure {
public:
  EmpiricalMeasure() : samples_{0.0} {}

  explicit EmpiricalMeasure(std::vector<double> samples) : samples_(std::move(samples)) {
    if (samples_.empty())
      throw ConfigError("empirical measure needs at least one sample");
    for (double s : samples_)
      if (!std::isfinite(s))
        throw ConfigError("empirical measure sample is not finite");
    std::sort(samples_.begin(), samples_.end());
  }

  static EmpiricalMeasure dirac(double at) { return EmpiricalMeasure(std::vector<double>{at}); }

  std::span<const double> samples() const noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }

  EmpiricalMeasure shifted(double c) const {
    std::vector<double> s = samples_;
    for (double& v : s)
      v += c;
    return EmpiricalMeasure(std::move(s));
  }

private:
  std::vector<double> samples_;
};

/// 2-Wasserstein distance between two clouds of equal size. On the line the
/// monotone (order-statistics) coupling is optimal.
inline double w2(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  if (mu.size() != nu.size())
    throw UsageError("w2 requires equal sample counts, got " + std::to_string(mu.size()) +
                     " and " + std::to_string(nu.size()));
  const auto a = mu.samples();
  const auto b = nu.samples();
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(a.size()));
}

struct Moments {
  double mean = 0.0;
  double stddev = 0.0;
};

/// Population mean and standard deviation (divisor n).
inline Moments moments(const EmpiricalMeasure& mu) {
  const auto s = mu.samples();
  const double n = static_cast<double>(s.size());
  double mean = 0.0;
  for (double v : s)
    mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : s)
    var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / n)};
}

} // namespace thetafbsde
