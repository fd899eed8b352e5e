#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "thetafbsde/errors.hpp"

namespace thetafbsde {

/// Least-squares projection onto polynomials of total degree <= `degree` in
/// the state components. Components are standardized first; components with
/// no spread across particles are dropped (e.g. at t = 0, where every particle
/// starts at x0).
class PolynomialRegression {
public:
  static constexpr double max_condition = 1e12;

  /// xs is particle-major with `dim` entries per particle; targets is N x m.
  static PolynomialRegression fit(std::span<const double> xs, std::size_t dim,
                                  const Eigen::MatrixXd& targets, int degree) {
    if (degree < 1 || degree > 5)
      throw ConfigError("regression degree must be between 1 and 5");
    PolynomialRegression r;
    const auto n = static_cast<std::size_t>(targets.rows());
    r.dim_ = dim;
    r.mean_.assign(dim, 0.0);
    r.scale_.assign(dim, 1.0);
    for (std::size_t j = 0; j < dim; ++j) {
      double m = 0.0;
      for (std::size_t p = 0; p < n; ++p)
        m += xs[p * dim + j];
      m /= static_cast<double>(n);
      double v = 0.0;
      for (std::size_t p = 0; p < n; ++p)
        v += (xs[p * dim + j] - m) * (xs[p * dim + j] - m);
      const double s = std::sqrt(v / static_cast<double>(n));
      r.mean_[j] = m;
      if (s > 1e-12 * std::max(1.0, std::abs(m))) {
        r.scale_[j] = s;
        r.active_.push_back(j);
      }
    }
    r.build_exponents(degree);

    const auto m_basis = static_cast<Eigen::Index>(r.exponents_.size());
    if (static_cast<Eigen::Index>(n) < m_basis)
      throw BasisError("regression has fewer particles than basis functions; lower the degree");
    const Eigen::MatrixXd basis = r.design(xs, n);
    const Eigen::MatrixXd gram = basis.transpose() * basis / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    const double lmin = eig.eigenvalues().minCoeff();
    const double lmax = eig.eigenvalues().maxCoeff();
    r.condition_ = lmin > 0.0 ? std::sqrt(lmax / lmin) : std::numeric_limits<double>::infinity();
    if (!(r.condition_ <= max_condition)) {
      std::ostringstream os;
      os << "regression basis is rank deficient (condition number " << r.condition_
         << "); use fewer particles or a lower polynomial degree";
      throw BasisError(os.str());
    }
    const Eigen::MatrixXd rhs = basis.transpose() * targets / static_cast<double>(n);
    const Eigen::MatrixXd& v = eig.eigenvectors();
    r.coef_ = v * eig.eigenvalues().cwiseInverse().asDiagonal() * (v.transpose() * rhs);
    r.fitted_ = basis * r.coef_;
    r.basis_ = basis;
    r.solve_ = v * eig.eigenvalues().cwiseInverse().asDiagonal() * v.transpose() / static_cast<double>(n);
    return r;
  }

  /// Fitted values of new targets on the same design, N x m.
  Eigen::MatrixXd project(const Eigen::MatrixXd& targets) const {
    return basis_ * (solve_ * (basis_.transpose() * targets));
  }

  /// Fitted values at the training points, N x m.
  const Eigen::MatrixXd& fitted() const noexcept { return fitted_; }
  const Eigen::MatrixXd& coefficients() const noexcept { return coef_; }
  double condition() const noexcept { return condition_; }
  std::size_t basis_size() const noexcept { return exponents_.size(); }

  /// Prediction of target column `col` at a new state.
  double predict(std::span<const double> x, Eigen::Index col = 0) const {
    double v = 0.0;
    for (std::size_t b = 0; b < exponents_.size(); ++b)
      v += monomial(x, b) * coef_(static_cast<Eigen::Index>(b), col);
    return v;
  }

private:
  void build_exponents(int degree) {
    std::vector<int> e(active_.size(), 0);
    // Enumerate multi-indices with total degree <= degree, graded order.
    for (int total = 0; total <= degree; ++total)
      enumerate(e, 0, total);
  }

  void enumerate(std::vector<int>& e, std::size_t pos, int remaining) {
    if (pos == e.size()) {
      if (remaining == 0)
        exponents_.push_back(e);
      return;
    }
    for (int p = remaining; p >= 0; --p) {
      e[pos] = p;
      enumerate(e, pos + 1, remaining - p);
    }
    e[pos] = 0;
  }

  double monomial(std::span<const double> x, std::size_t b) const {
    double v = 1.0;
    for (std::size_t a = 0; a < active_.size(); ++a) {
      const std::size_t j = active_[a];
      const double u = (x[j] - mean_[j]) / scale_[j];
      for (int p = 0; p < exponents_[b][a]; ++p)
        v *= u;
    }
    return v;
  }

  Eigen::MatrixXd design(std::span<const double> xs, std::size_t n) const {
    Eigen::MatrixXd basis(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(exponents_.size()));
    for (std::size_t p = 0; p < n; ++p) {
      const auto x = xs.subspan(p * dim_, dim_);
      for (std::size_t b = 0; b < exponents_.size(); ++b)
        basis(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(b)) = monomial(x, b);
    }
    return basis;
  }

  std::size_t dim_ = 0;
  std::vector<double> mean_, scale_;
  std::vector<std::size_t> active_;
  std::vector<std::vector<int>> exponents_;
  Eigen::MatrixXd coef_, fitted_, basis_, solve_;
  double condition_ = 1.0;
};

} // namespace thetafbsde
