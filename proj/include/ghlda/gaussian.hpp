#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <vector>

namespace ghlda {

// log Gamma_M(a), the multivariate gamma function.
double log_multigamma(int m, double a);

struct NIWPrior {
  Eigen::VectorXd u;     // prior mean
  Eigen::MatrixXd psi;   // scale matrix, SPD
  double kappa = 0.0;
  double nu = 0.0;       // degrees of freedom, must exceed dim-1

  int dim() const { return static_cast<int>(u.size()); }
  void validate() const;  // throws std::invalid_argument
};

// Sufficient statistics of a set of points under a normal-inverse-Wishart
// prior, with the Cholesky factor of the posterior scale matrix maintained
// incrementally. add/remove are O(M^2); a failed downdate triggers an
// O(M^3) rebuild from the raw scatter matrix.
class GaussianTopicStats {
 public:
  explicit GaussianTopicStats(std::shared_ptr<const NIWPrior> prior);

  void add_point(const Eigen::VectorXd& x);
  void remove_point(const Eigen::VectorXd& x);

  // log density of the posterior-predictive multivariate Student-t at x.
  double log_predictive(const Eigen::VectorXd& x) const;

  // log marginal probability of adding all `points` to the current set.
  double log_marginal_set(const std::vector<Eigen::VectorXd>& points) const;

  int count() const { return n_; }
  double kappa_n() const { return prior_->kappa + n_; }
  double nu_n() const { return prior_->nu + n_; }
  Eigen::VectorXd posterior_mean() const;
  const Eigen::MatrixXd& chol() const { return chol_; }
  double psi_log_det() const;
  const NIWPrior& prior() const { return *prior_; }
  std::shared_ptr<const NIWPrior> prior_ptr() const { return prior_; }

  // Number of full refactorizations forced by downdate failures.
  std::int64_t rebuild_count() const { return rebuilds_; }

 private:
  void rebuild();

  std::shared_ptr<const NIWPrior> prior_;
  int n_ = 0;
  Eigen::VectorXd sum_;
  Eigen::MatrixXd scatter_;  // sum of x x^T, kept for the rebuild path
  Eigen::MatrixXd chol_;     // lower factor of Psi_s
  std::int64_t rebuilds_ = 0;
};

// In-place rank-one Cholesky update/downdate of a lower factor, O(M^2).
// chol_downdate returns false when the result would not be SPD.
void chol_update(Eigen::MatrixXd& L, Eigen::VectorXd v);
bool chol_downdate(Eigen::MatrixXd& L, Eigen::VectorXd v);

}  // namespace ghlda
