#pragma once

// Maximum-likelihood logistic regression by iteratively reweighted least
// squares (Newton-Raphson on the Bernoulli log-likelihood).

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fewshot/error.hpp"

namespace fewshot {

struct LogisticOptions {
  int max_iterations = 100;
  double tolerance = 1e-8;     // on the largest coefficient step
  double divergence_bound = 30.0;  // |beta| beyond this is treated as separation
};

struct LogisticFit {
  std::vector<std::string> names;  // "intercept" first
  Eigen::VectorXd beta;
  Eigen::VectorXd se;
  Eigen::VectorXd z;
  Eigen::VectorXd p;
  bool converged = false;
  int iterations = 0;
  double log_likelihood = 0.0;
};

/// `x` holds predictors only; an intercept column is prepended.
inline LogisticFit fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                std::vector<std::string> predictor_names,
                                const LogisticOptions& opt = {}) {
  const Eigen::Index n = x.rows();
  if (y.size() != n) throw Error(Errc::DegenerateDesign, "row count mismatch");
  Eigen::MatrixXd design(n, x.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(x.cols()) = x;
  const Eigen::Index p = design.cols();

  if (n < p) throw Error(Errc::DegenerateDesign, "fewer rows than coefficients");
  const double ysum = y.sum();
  if (ysum == 0.0 || ysum == static_cast<double>(n))
    throw Error(Errc::DegenerateDesign, "all outcomes identical; likelihood has no maximum");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < p) throw Error(Errc::DegenerateDesign, "design matrix is rank deficient");

  LogisticFit fit;
  fit.names.push_back("intercept");
  for (auto& s : predictor_names) fit.names.push_back(std::move(s));
  fit.beta = Eigen::VectorXd::Zero(p);

  Eigen::VectorXd mu(n), w(n);
  Eigen::MatrixXd info(p, p);
  auto update = [&] {
    const Eigen::VectorXd eta = design * fit.beta;
    for (Eigen::Index i = 0; i < n; ++i) {
      mu[i] = 1.0 / (1.0 + std::exp(-eta[i]));
      w[i] = std::max(mu[i] * (1.0 - mu[i]), 1e-300);
    }
    info = design.transpose() * w.asDiagonal() * design;
  };

  update();
  for (fit.iterations = 1; fit.iterations <= opt.max_iterations; ++fit.iterations) {
    const Eigen::VectorXd score = design.transpose() * (y - mu);
    const Eigen::VectorXd step = info.ldlt().solve(score);
    fit.beta += step;
    if (!fit.beta.allFinite() || fit.beta.cwiseAbs().maxCoeff() > opt.divergence_bound)
      throw Error(Errc::Separation, "coefficients diverge; outcomes are (quasi-)separated");
    update();
    if (step.cwiseAbs().maxCoeff() < opt.tolerance) {
      fit.converged = true;
      break;
    }
  }
  if (!fit.converged) throw Error(Errc::Separation, "IRLS did not converge");

  const Eigen::MatrixXd cov = info.inverse();
  fit.se = cov.diagonal().cwiseSqrt();
  fit.z = fit.beta.cwiseQuotient(fit.se);
  fit.p = fit.z.unaryExpr([](double v) { return std::erfc(std::abs(v) / std::sqrt(2.0)); });
  fit.log_likelihood = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    fit.log_likelihood += y[i] > 0.5 ? std::log(mu[i]) : std::log1p(-mu[i]);
  return fit;
}

/// One mutual-exclusivity response: predictors and whether ME was violated
/// (the familiar symbol was reused).
struct MeRow {
  int n_contradictory = 0;
  int pool_size = 2;
  bool me_violated = false;
};

/// Outcome is ME violation so that positive coefficients mean "more
/// counter-evidence / larger pool -> ME overridden more often". Pool size
/// enters as an indicator for the large (6-symbol) pool.
inline LogisticFit fit_me_logistic(const std::vector<MeRow>& rows, const LogisticOptions& opt = {}) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), 2);
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    x(r, 0) = rows[i].n_contradictory;
    x(r, 1) = rows[i].pool_size > 2 ? 1.0 : 0.0;
    y[r] = rows[i].me_violated ? 1.0 : 0.0;
  }
  return fit_logistic(x, y, {"n_contradictory", "large_pool"}, opt);
}

inline void to_json(nlohmann::json& j, const LogisticFit& f) {
  j = nlohmann::json::object();
  j["converged"] = f.converged;
  j["iterations"] = f.iterations;
  j["log_likelihood"] = f.log_likelihood;
  auto& coefs = j["coefficients"] = nlohmann::json::array();
  for (Eigen::Index k = 0; k < f.beta.size(); ++k)
    coefs.push_back({{"name", f.names[static_cast<std::size_t>(k)]},
                     {"beta", f.beta[k]},
                     {"se", f.se[k]},
                     {"z", f.z[k]},
                     {"p", f.p[k]}});
}

}  // namespace fewshot
