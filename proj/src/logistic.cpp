#include "routescan/logistic.hpp"

#include <cmath>

#include <Eigen/Cholesky>

#include "routescan/errors.hpp"

namespace routescan {

double logistic_objective(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
                          const Eigen::Ref<const Eigen::VectorXd>& weights, double inverse_strength,
                          const Eigen::Ref<const Eigen::VectorXd>& coef, double intercept, Eigen::VectorXd* gradient) {
  const Eigen::VectorXd z = (x * coef).array() + intercept;
  const bool weighted = weights.size() > 0;
  double loss = 0.0;
  Eigen::VectorXd residual(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double w = weighted ? weights(i) : 1.0;
    loss += w * (softplus(z(i)) - y(i) * z(i));
    residual(i) = w * (sigmoid(z(i)) - y(i));
  }
  loss += coef.squaredNorm() / (2.0 * inverse_strength);
  if (gradient) {
    gradient->resize(coef.size() + 1);
    gradient->head(coef.size()) = x.transpose() * residual + coef / inverse_strength;
    (*gradient)(coef.size()) = residual.sum();
  }
  return loss;
}

LogisticFit fit_logistic_regression(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                    const Eigen::Ref<const Eigen::VectorXd>& y, double inverse_strength,
                                    const LogisticOptions& options, const Eigen::Ref<const Eigen::VectorXd>& weights) {
  if (!(inverse_strength > 0.0)) throw FitError("inverse regularization strength must be positive");
  if (x.rows() != y.size()) throw FitError("design matrix and labels differ in length");
  if (weights.size() != 0 && weights.size() != y.size()) throw FitError("sample weights differ in length from labels");
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  const bool weighted = weights.size() > 0;

  LogisticFit fit;
  fit.coef = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd grad;
  fit.loss = logistic_objective(x, y, weights, inverse_strength, fit.coef, fit.intercept, &grad);

  Eigen::MatrixXd hessian(p + 1, p + 1);
  Eigen::VectorXd curvature(n);
  for (fit.iterations = 0; fit.iterations < options.max_iterations; ++fit.iterations) {
    fit.gradient_norm = grad.lpNorm<Eigen::Infinity>();
    if (fit.gradient_norm <= options.gradient_tolerance) {
      fit.converged = true;
      break;
    }

    const Eigen::VectorXd z = (x * fit.coef).array() + fit.intercept;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double s = sigmoid(z(i));
      curvature(i) = (weighted ? weights(i) : 1.0) * s * (1.0 - s);
    }
    const Eigen::MatrixXd weighted_x = x.array().colwise() * curvature.array();
    hessian.topLeftCorner(p, p).noalias() = x.transpose() * weighted_x;
    hessian.topLeftCorner(p, p).diagonal().array() += 1.0 / inverse_strength;
    hessian.topRightCorner(p, 1) = weighted_x.colwise().sum().transpose();
    hessian.bottomLeftCorner(1, p) = hessian.topRightCorner(p, 1).transpose();
    hessian(p, p) = curvature.sum();

    Eigen::VectorXd step;
    double damping = 0.0;
    for (int attempt = 0; attempt < 30; ++attempt) {
      Eigen::MatrixXd h = hessian;
      if (damping > 0.0) h.diagonal().array() += damping;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
      if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        step = -ldlt.solve(grad);
        if (step.allFinite() && step.dot(grad) < 0.0) break;
      }
      damping = damping == 0.0 ? 1e-10 * (1.0 + hessian.diagonal().maxCoeff()) : damping * 10.0;
      step.resize(0);
    }
    if (step.size() == 0) step = -grad;

    // Armijo backtracking.
    const double slope = step.dot(grad);
    double t = 1.0;
    bool moved = false;
    Eigen::VectorXd trial_grad;
    for (int halving = 0; halving < 60; ++halving, t *= 0.5) {
      const Eigen::VectorXd coef = fit.coef + t * step.head(p);
      const double intercept = fit.intercept + t * step(p);
      const double loss = logistic_objective(x, y, weights, inverse_strength, coef, intercept, &trial_grad);
      // Near the optimum the Armijo decrease drops below rounding of the
      // summed loss; a step that shrinks the gradient is then taken as progress.
      const bool within_noise = loss <= fit.loss + 1e-12 * (1.0 + std::abs(fit.loss));
      if (loss <= fit.loss + 1e-4 * t * slope ||
          (within_noise && trial_grad.lpNorm<Eigen::Infinity>() < grad.lpNorm<Eigen::Infinity>())) {
        fit.coef = coef;
        fit.intercept = intercept;
        fit.loss = loss;
        grad = trial_grad;
        moved = true;
        break;
      }
    }
    if (!moved) break;  // at the floating-point floor of the objective
  }
  fit.gradient_norm = grad.lpNorm<Eigen::Infinity>();
  fit.converged = fit.gradient_norm <= options.gradient_tolerance;
  return fit;
}

}  // namespace routescan
