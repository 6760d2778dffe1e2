#pragma once

#include <cmath>

#include <Eigen/Core>

namespace routescan {

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  using std::exp;
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-x));
  const Scalar e = exp(x);
  return e / (Scalar(1) + e);
}

/// log(1 + exp(x)) without overflow.
template <typename Scalar>
Scalar softplus(Scalar x) {
  using std::exp;
  using std::log1p;
  return x > Scalar(0) ? x + log1p(exp(-x)) : log1p(exp(x));
}

struct LogisticOptions {
  int max_iterations = 5000;
  double gradient_tolerance = 1e-7;
};

struct LogisticFit {
  Eigen::VectorXd coef;
  double intercept = 0.0;
  double loss = 0.0;
  double gradient_norm = 0.0;  // infinity norm at the returned point
  int iterations = 0;
  bool converged = false;
};

/// sum_i w_i [softplus(z_i) - y_i z_i] + |coef|^2 / (2C), z = X coef + intercept.
/// The intercept is not penalized. `weights` may be empty (all ones).
/// When `gradient` is non-null it receives [d/dcoef; d/dintercept].
double logistic_objective(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
                          const Eigen::Ref<const Eigen::VectorXd>& weights, double inverse_strength,
                          const Eigen::Ref<const Eigen::VectorXd>& coef, double intercept,
                          Eigen::VectorXd* gradient = nullptr);

/// Damped Newton iterations with Armijo backtracking on the objective above.
/// Stops when the gradient infinity norm drops to the tolerance.
LogisticFit fit_logistic_regression(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                    const Eigen::Ref<const Eigen::VectorXd>& y, double inverse_strength,
                                    const LogisticOptions& options = {},
                                    const Eigen::Ref<const Eigen::VectorXd>& weights = Eigen::VectorXd());

}  // namespace routescan
