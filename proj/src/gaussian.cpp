#include "ghlda/gaussian.hpp"

#include <cmath>
#include <stdexcept>

namespace ghlda {

namespace {
constexpr double kLogPi = 1.1447298858494001741;
}

double log_multigamma(int m, double a) {
  if (a <= 0.5 * (m - 1)) {
    throw std::domain_error("log_multigamma: a must exceed (M-1)/2");
  }
  double r = 0.25 * m * (m - 1) * kLogPi;
  for (int j = 1; j <= m; ++j) {
    r += std::lgamma(a + 0.5 * (1.0 - j));
  }
  return r;
}

void NIWPrior::validate() const {
  const int m = dim();
  if (m <= 0) throw std::invalid_argument("NIWPrior: empty mean");
  if (psi.rows() != m || psi.cols() != m) {
    throw std::invalid_argument("NIWPrior: Psi dimension mismatch");
  }
  if (kappa <= 0.0) throw std::invalid_argument("NIWPrior: kappa must be positive");
  if (nu <= m - 1) throw std::invalid_argument("NIWPrior: nu must exceed dim-1");
  Eigen::LLT<Eigen::MatrixXd> llt(psi);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("NIWPrior: Psi is not positive definite");
  }
}

void chol_update(Eigen::MatrixXd& L, Eigen::VectorXd v) {
  const int m = static_cast<int>(L.rows());
  for (int k = 0; k < m; ++k) {
    const double r = std::hypot(L(k, k), v(k));
    const double c = r / L(k, k);
    const double s = v(k) / L(k, k);
    L(k, k) = r;
    for (int i = k + 1; i < m; ++i) {
      L(i, k) = (L(i, k) + s * v(i)) / c;
      v(i) = c * v(i) - s * L(i, k);
    }
  }
}

bool chol_downdate(Eigen::MatrixXd& L, Eigen::VectorXd v) {
  const int m = static_cast<int>(L.rows());
  for (int k = 0; k < m; ++k) {
    const double r2 = (L(k, k) - v(k)) * (L(k, k) + v(k));
    if (r2 <= 0.0) return false;
    const double r = std::sqrt(r2);
    const double c = r / L(k, k);
    const double s = v(k) / L(k, k);
    L(k, k) = r;
    for (int i = k + 1; i < m; ++i) {
      L(i, k) = (L(i, k) - s * v(i)) / c;
      v(i) = c * v(i) - s * L(i, k);
    }
  }
  return true;
}

GaussianTopicStats::GaussianTopicStats(std::shared_ptr<const NIWPrior> prior)
    : prior_(std::move(prior)) {
  prior_->validate();
  const int m = prior_->dim();
  sum_ = Eigen::VectorXd::Zero(m);
  scatter_ = Eigen::MatrixXd::Zero(m, m);
  Eigen::LLT<Eigen::MatrixXd> llt(prior_->psi);
  chol_ = llt.matrixL();
}

Eigen::VectorXd GaussianTopicStats::posterior_mean() const {
  return (prior_->kappa * prior_->u + sum_) / kappa_n();
}

double GaussianTopicStats::psi_log_det() const {
  return 2.0 * chol_.diagonal().array().log().sum();
}

void GaussianTopicStats::add_point(const Eigen::VectorXd& x) {
  // Psi_{n+1} = Psi_n + (kappa_n/(kappa_n+1)) (x - u_n)(x - u_n)^T
  const double kn = kappa_n();
  Eigen::VectorXd v = std::sqrt(kn / (kn + 1.0)) * (x - posterior_mean());
  chol_update(chol_, v);
  n_ += 1;
  sum_ += x;
  scatter_ += x * x.transpose();
}

void GaussianTopicStats::remove_point(const Eigen::VectorXd& x) {
  if (n_ < 1) throw std::logic_error("remove_point on empty stats");
  n_ -= 1;
  sum_ -= x;
  scatter_ -= x * x.transpose();
  const double kn = kappa_n();
  Eigen::VectorXd v = std::sqrt(kn / (kn + 1.0)) * (x - posterior_mean());
  if (!chol_downdate(chol_, v)) {
    rebuild();
  }
}

void GaussianTopicStats::rebuild() {
  // Psi_s = Psi + kappa u u^T + scatter - kappa_n u_n u_n^T
  const Eigen::VectorXd un = posterior_mean();
  Eigen::MatrixXd psi_s = prior_->psi + prior_->kappa * prior_->u * prior_->u.transpose() +
                          scatter_ - kappa_n() * un * un.transpose();
  Eigen::LLT<Eigen::MatrixXd> llt(psi_s);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("GaussianTopicStats: rebuild lost positive definiteness");
  }
  chol_ = llt.matrixL();
  ++rebuilds_;
}

double GaussianTopicStats::log_predictive(const Eigen::VectorXd& x) const {
  const int m = prior_->dim();
  const double dof = nu_n() - m + 1.0;
  if (dof <= 0.0) {
    throw std::invalid_argument("log_predictive: nu too small for dimension");
  }
  const double kn = kappa_n();
  const double scale = (kn + 1.0) / (kn * dof);  // Sigma = scale * Psi_s
  const Eigen::VectorXd diff = x - posterior_mean();
  const Eigen::VectorXd y = chol_.triangularView<Eigen::Lower>().solve(diff);
  const double quad = y.squaredNorm() / scale;
  const double log_det_sigma = m * std::log(scale) + psi_log_det();
  return std::lgamma(0.5 * (dof + m)) - std::lgamma(0.5 * dof) -
         0.5 * m * (std::log(dof) + kLogPi) - 0.5 * log_det_sigma -
         0.5 * (dof + m) * std::log1p(quad / dof);
}

double GaussianTopicStats::log_marginal_set(const std::vector<Eigen::VectorXd>& points) const {
  if (points.empty()) return 0.0;
  const int m = prior_->dim();
  const double t = static_cast<double>(points.size());
  const double vs = nu_n();
  const double ks = kappa_n();
  const double ld0 = psi_log_det();
  GaussianTopicStats scratch(*this);
  for (const auto& x : points) scratch.add_point(x);
  const double ld1 = scratch.psi_log_det();
  return -0.5 * t * m * kLogPi + log_multigamma(m, 0.5 * (vs + t)) -
         log_multigamma(m, 0.5 * vs) + 0.5 * vs * ld0 - 0.5 * (vs + t) * ld1 +
         0.5 * m * (std::log(ks) - std::log(ks + t));
}

}  // namespace ghlda
