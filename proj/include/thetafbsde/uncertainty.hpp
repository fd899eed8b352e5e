#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "thetafbsde/errors.hpp"
#include "thetafbsde/measures.hpp"

namespace thetafbsde {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Finite union of disjoint closed intervals, sorted ascending. Points
/// (lo == hi) are allowed; touching intervals are not.
class IntervalUnion {
public:
  explicit IntervalUnion(std::vector<Interval> intervals) : intervals_(std::move(intervals)) {
    if (intervals_.empty())
      throw ConfigError("interval union must contain at least one interval");
    for (std::size_t i = 0; i < intervals_.size(); ++i) {
      const auto& iv = intervals_[i];
      if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi))
        throw ConfigError("interval " + std::to_string(i) + " has a non-finite endpoint");
      if (iv.lo > iv.hi)
        throw ConfigError("interval " + std::to_string(i) + " has lo > hi");
      if (i > 0 && !(intervals_[i - 1].hi < iv.lo))
        throw ConfigError("intervals " + std::to_string(i - 1) + " and " + std::to_string(i) +
                          " overlap or are out of order");
    }
  }

  IntervalUnion(double lo, double hi) : IntervalUnion(std::vector<Interval>{{lo, hi}}) {}

  std::span<const Interval> intervals() const noexcept { return intervals_; }
  std::size_t size() const noexcept { return intervals_.size(); }
  double lower() const noexcept { return intervals_.front().lo; }
  double upper() const noexcept { return intervals_.back().hi; }

  /// Index of the interval holding a, if any.
  std::optional<std::size_t> locate(double a) const noexcept {
    for (std::size_t i = 0; i < intervals_.size(); ++i)
      if (intervals_[i].lo <= a && a <= intervals_[i].hi)
        return i;
    return std::nullopt;
  }

  bool contains(double a) const noexcept { return locate(a).has_value(); }

  /// Distance from a point to the set.
  double distance(double a) const noexcept {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& iv : intervals_)
      best = std::min(best, std::abs(std::clamp(a, iv.lo, iv.hi) - a));
    return best;
  }

  friend bool operator==(const IntervalUnion& a, const IntervalUnion& b) {
    return std::equal(a.intervals_.begin(), a.intervals_.end(), b.intervals_.begin(),
                      b.intervals_.end(), [](const Interval& x, const Interval& y) {
                        return x.lo == y.lo && x.hi == y.hi;
                      });
  }

  std::string to_string() const {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < intervals_.size(); ++i)
      os << (i ? " u " : "") << '[' << intervals_[i].lo << ", " << intervals_[i].hi << ']';
    return os.str();
  }

private:
  std::vector<Interval> intervals_;
};

inline bool contains(const IntervalUnion& set, double a) noexcept { return set.contains(a); }

inline IntervalUnion convex_hull(const IntervalUnion& set) {
  return IntervalUnion(set.lower(), set.upper());
}

/// Values within this distance of each other are treated as ties.
inline constexpr double tie_tolerance = 1e-12;

struct Projection {
  double point = 0.0;
  std::size_t interval = 0;
  bool tie = false;
};

/// Nearest point of the set. Equidistant candidates resolve to the smaller one
/// and raise the tie flag.
inline Projection project(const IntervalUnion& set, double w0) {
  Projection best{};
  double best_dist = std::numeric_limits<double>::infinity();
  const auto ivs = set.intervals();
  for (std::size_t i = 0; i < ivs.size(); ++i) {
    const double c = std::clamp(w0, ivs[i].lo, ivs[i].hi);
    const double d = std::abs(c - w0);
    if (d < best_dist - tie_tolerance) {
      best = {c, i, false};
      best_dist = d;
    } else if (std::abs(d - best_dist) <= tie_tolerance) {
      best.tie = true;
    }
  }
  return best;
}

namespace detail {

// sup over points of `from` of the distance to `to`. The distance to a union
// of intervals is piecewise linear, so the sup is attained at an endpoint of
// `from` or at the midpoint of a gap of `to`.
inline double directed_hausdorff(const IntervalUnion& from, const IntervalUnion& to) {
  double worst = 0.0;
  for (const auto& iv : from.intervals()) {
    worst = std::max(worst, to.distance(iv.lo));
    worst = std::max(worst, to.distance(iv.hi));
  }
  const auto gaps = to.intervals();
  for (std::size_t i = 0; i + 1 < gaps.size(); ++i) {
    const double mid = 0.5 * (gaps[i].hi + gaps[i + 1].lo);
    if (from.contains(mid))
      worst = std::max(worst, to.distance(mid));
  }
  return worst;
}

} // namespace detail

inline double hausdorff(const IntervalUnion& a, const IntervalUnion& b) {
  return std::max(detail::directed_hausdorff(a, b), detail::directed_hausdorff(b, a));
}

/// Intersection with the half-line {a >= cut} (keep_upper) or {a <= cut}.
inline std::optional<IntervalUnion> clip(const IntervalUnion& set, double cut, bool keep_upper) {
  std::vector<Interval> out;
  for (const auto& iv : set.intervals()) {
    Interval c = iv;
    if (keep_upper)
      c.lo = std::max(c.lo, cut);
    else
      c.hi = std::min(c.hi, cut);
    if (c.lo <= c.hi)
      out.push_back(c);
  }
  if (out.empty())
    return std::nullopt;
  return IntervalUnion(std::move(out));
}

// ---------------------------------------------------------------------------
// Law-dependent sets

struct ConstantTheta {
  double theta = 0.0;
};

/// theta = alpha * mean + beta * stddev, clamped to the theta bounds.
struct AffineMomentTheta {
  double alpha = 0.0;
  double beta = 0.0;
};

using ThetaRule = std::variant<ConstantTheta, AffineMomentTheta>;

/// Per-interval endpoint motion: lo(theta) = lo + lo_slope * theta, same for hi.
struct EndpointShift {
  double lo_slope = 0.0;
  double hi_slope = 0.0;
};

/// The map mu -> U_{g(mu)}. Endpoints move affinely in theta, so checking the
/// two extreme thetas is enough to know every realized set is valid.
class AmbiguityMap {
public:
  AmbiguityMap(IntervalUnion base, ThetaRule rule, std::vector<EndpointShift> shifts,
               double theta_min, double theta_max)
      : base_(std::move(base)), rule_(rule), shifts_(std::move(shifts)), theta_min_(theta_min),
        theta_max_(theta_max) {
    if (shifts_.empty())
      shifts_.assign(base_.size(), EndpointShift{});
    if (shifts_.size() != base_.size())
      throw ConfigError("endpoint_shifts must have one entry per interval");
    if (!std::isfinite(theta_min_) || !std::isfinite(theta_max_) || theta_min_ > theta_max_)
      throw ConfigError("theta bounds must be finite with theta_min <= theta_max");
    if (const auto* c = std::get_if<ConstantTheta>(&rule_)) {
      if (c->theta < theta_min_ || c->theta > theta_max_)
        throw ConfigError("constant theta lies outside the theta bounds");
    }
    (void)set_at(theta_min_);
    (void)set_at(theta_max_);
  }

  /// Static set: constant rule at theta = 0 with no endpoint motion.
  static AmbiguityMap fixed(IntervalUnion set) {
    return AmbiguityMap(std::move(set), ConstantTheta{0.0}, {}, 0.0, 0.0);
  }

  const IntervalUnion& base() const noexcept { return base_; }
  const ThetaRule& rule() const noexcept { return rule_; }
  std::span<const EndpointShift> shifts() const noexcept { return shifts_; }
  double theta_min() const noexcept { return theta_min_; }
  double theta_max() const noexcept { return theta_max_; }

  bool is_static() const noexcept {
    if (std::holds_alternative<ConstantTheta>(rule_))
      return true;
    return std::all_of(shifts_.begin(), shifts_.end(), [](const EndpointShift& s) {
      return s.lo_slope == 0.0 && s.hi_slope == 0.0;
    });
  }

  double theta(const EmpiricalMeasure& law) const {
    return std::visit(
        [&](const auto& r) -> double {
          using R = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<R, ConstantTheta>) {
            return r.theta;
          } else {
            const auto m = moments(law);
            return std::clamp(r.alpha * m.mean + r.beta * m.stddev, theta_min_, theta_max_);
          }
        },
        rule_);
  }

  IntervalUnion set_at(double theta) const {
    std::vector<Interval> ivs(base_.intervals().begin(), base_.intervals().end());
    for (std::size_t i = 0; i < ivs.size(); ++i) {
      ivs[i].lo += shifts_[i].lo_slope * theta;
      ivs[i].hi += shifts_[i].hi_slope * theta;
    }
    try {
      return IntervalUnion(std::move(ivs));
    } catch (const ConfigError& e) {
      std::ostringstream os;
      os.precision(17);
      os << "uncertainty set invalid at theta = " << theta << ": " << e.what();
      throw ConfigError(os.str());
    }
  }

  IntervalUnion realize(const EmpiricalMeasure& law) const { return set_at(theta(law)); }

  /// Same law dependence, each realized set replaced by its convex hull.
  AmbiguityMap convexified() const {
    EndpointShift s{shifts_.front().lo_slope, shifts_.back().hi_slope};
    return AmbiguityMap(convex_hull(base_), rule_, {s}, theta_min_, theta_max_);
  }

  /// Smallest and largest point of K, the union of all realized sets.
  Interval global_range() const {
    const auto a = set_at(theta_min_);
    const auto b = set_at(theta_max_);
    return {std::min(a.lower(), b.lower()), std::max(a.upper(), b.upper())};
  }

private:
  IntervalUnion base_;
  ThetaRule rule_;
  std::vector<EndpointShift> shifts_;
  double theta_min_;
  double theta_max_;
};

inline IntervalUnion realize_set(const AmbiguityMap& map, const EmpiricalMeasure& law) {
  return map.realize(law);
}

} // namespace thetafbsde
