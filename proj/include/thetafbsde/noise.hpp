#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace thetafbsde {

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr double to_unit_open(std::uint64_t bits) noexcept {
  // 53 random bits mapped to (0, 1).
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

} // namespace detail

/// Counter-based standard normal generator: every draw is a pure function of
/// (seed, particle, step, component), so any evaluation order gives the same
/// numbers.
class CounterNormal {
public:
  explicit CounterNormal(std::uint64_t seed) noexcept : seed_(seed) {}

  double operator()(std::uint64_t particle, std::uint64_t step, std::uint64_t component) const noexcept {
    std::uint64_t key = detail::splitmix64(seed_);
    key = detail::splitmix64(key ^ particle);
    key = detail::splitmix64(key ^ (step * 0x100000001b3ULL));
    key = detail::splitmix64(key ^ (component + 0x51ed270b27e3b6f5ULL));
    const double u1 = detail::to_unit_open(key);
    const double u2 = detail::to_unit_open(detail::splitmix64(key));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t seed() const noexcept { return seed_; }

private:
  std::uint64_t seed_;
};

/// Brownian increments dB[step][particle][component] ~ N(0, dt I).
class NoiseIncrements {
public:
  NoiseIncrements(std::uint64_t seed, std::size_t steps, std::size_t particles, std::size_t dim,
                  double dt)
      : seed_(seed), steps_(steps), particles_(particles), dim_(dim), dt_(dt),
        data_(steps * particles * dim) {
    const CounterNormal normal(seed);
    const double scale = std::sqrt(dt);
    for (std::size_t i = 0; i < steps; ++i)
      for (std::size_t p = 0; p < particles; ++p)
        for (std::size_t j = 0; j < dim; ++j)
          data_[(i * particles + p) * dim + j] = scale * normal(p, i, j);
  }

  const double* at(std::size_t step, std::size_t particle) const noexcept {
    return data_.data() + (step * particles_ + particle) * dim_;
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t steps() const noexcept { return steps_; }
  std::size_t particles() const noexcept { return particles_; }
  std::size_t dim() const noexcept { return dim_; }
  double dt() const noexcept { return dt_; }

private:
  std::uint64_t seed_;
  std::size_t steps_, particles_, dim_;
  double dt_;
  std::vector<double> data_;
};

} // namespace thetafbsde
