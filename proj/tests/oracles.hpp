// Independent reference implementations used only by tests. Everything here
// recomputes quantities from their defining formulas with dense linear
// algebra, never through the incremental paths under test.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "ghlda/gaussian.hpp"

namespace oracle {

inline constexpr double kLogPi = 1.1447298858494001741;

// Posterior scale matrix computed batch-style from its definition:
// Psi + sum (x - xbar)(x - xbar)^T + (kappa n / (kappa + n))(xbar - u)(xbar - u)^T
inline Eigen::MatrixXd batch_psi(const ghlda::NIWPrior& prior,
                                 const std::vector<Eigen::VectorXd>& points) {
  Eigen::MatrixXd psi = prior.psi;
  const int n = static_cast<int>(points.size());
  if (n == 0) return psi;
  Eigen::VectorXd xbar = Eigen::VectorXd::Zero(prior.dim());
  for (const auto& x : points) xbar += x;
  xbar /= n;
  for (const auto& x : points) psi += (x - xbar) * (x - xbar).transpose();
  const Eigen::VectorXd diff = xbar - prior.u;
  psi += (prior.kappa * n / (prior.kappa + n)) * diff * diff.transpose();
  return psi;
}

// Dense multivariate Student-t log density.
inline double dense_student_t(const Eigen::VectorXd& x, double dof,
                              const Eigen::VectorXd& loc, const Eigen::MatrixXd& sigma) {
  const int m = static_cast<int>(x.size());
  const Eigen::VectorXd d = x - loc;
  const double quad = d.dot(sigma.inverse() * d);
  const double logdet = std::log(sigma.determinant());
  return std::lgamma(0.5 * (dof + m)) - std::lgamma(0.5 * dof) -
         0.5 * m * (std::log(dof) + kLogPi) - 0.5 * logdet -
         0.5 * (dof + m) * std::log1p(quad / dof);
}

// Posterior-predictive Student-t of a NIW with `held` points already
// observed, evaluated densely.
inline double dense_predictive(const ghlda::NIWPrior& prior,
                               const std::vector<Eigen::VectorXd>& held,
                               const Eigen::VectorXd& x) {
  const int m = prior.dim();
  const int n = static_cast<int>(held.size());
  const double kn = prior.kappa + n;
  const double vn = prior.nu + n;
  const double dof = vn - m + 1.0;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(m);
  for (const auto& p : held) sum += p;
  const Eigen::VectorXd un = (prior.kappa * prior.u + sum) / kn;
  const Eigen::MatrixXd sigma = ((kn + 1.0) / (kn * dof)) * batch_psi(prior, held);
  return dense_student_t(x, dof, un, sigma);
}

// Set-marginal probability from the Gamma_M / determinant formula with
// dense determinants of batch-computed scale matrices.
inline double dense_marginal(const ghlda::NIWPrior& prior,
                             const std::vector<Eigen::VectorXd>& held,
                             const std::vector<Eigen::VectorXd>& added) {
  if (added.empty()) return 0.0;
  const int m = prior.dim();
  const double s = static_cast<double>(held.size());
  const double t = static_cast<double>(added.size());
  std::vector<Eigen::VectorXd> both = held;
  both.insert(both.end(), added.begin(), added.end());
  const double ld0 = std::log(batch_psi(prior, held).determinant());
  const double ld1 = std::log(batch_psi(prior, both).determinant());
  const double vs = prior.nu + s;
  return -0.5 * t * m * kLogPi + ghlda::log_multigamma(m, 0.5 * (vs + t)) -
         ghlda::log_multigamma(m, 0.5 * vs) + 0.5 * vs * ld0 - 0.5 * (vs + t) * ld1 +
         0.5 * m * (std::log(prior.kappa + s) - std::log(prior.kappa + s + t));
}

inline ghlda::NIWPrior random_prior(int m, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  ghlda::NIWPrior prior;
  prior.u = Eigen::VectorXd::NullaryExpr(m, [&](int) { return gauss(rng); });
  Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(m, m, [&](int, int) { return gauss(rng); });
  prior.psi = a * a.transpose() + m * Eigen::MatrixXd::Identity(m, m);
  prior.kappa = 0.5 + std::uniform_real_distribution<double>(0.0, 2.0)(rng);
  prior.nu = m + 1.0 + std::uniform_real_distribution<double>(0.0, 3.0)(rng);
  return prior;
}

inline std::vector<Eigen::VectorXd> random_points(int count, int m, std::mt19937_64& rng,
                                                  double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, scale);
  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    out.push_back(Eigen::VectorXd::NullaryExpr(m, [&](int) { return gauss(rng); }));
  }
  return out;
}

}  // namespace oracle
