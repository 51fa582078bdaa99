#pragma once
// Link functions of the generalized linear transition model.
//
// A link is a convex potential Phi on R^S whose gradient maps a logit vector
// y = W x to a probability distribution over the S next states.  Two links are
// provided:
//
//   multinomial_logit   Phi(y) = log(sum_i exp(y_i));  grad = softmax(y)
//   quadratic           Phi(y) = ||y||^2 / 2;          grad = y itself
//
// The quadratic link is only meaningful when y already is a distribution
// (contexts on the simplex mixing base distributions), and its gradient
// validates that.  Each link reports strong-convexity / smoothness constants
// (alpha, beta) valid on the bounded logit domain ||y||_inf <= B*R.

#include <Eigen/Dense>
#include <cmath>

#include "cmdp/errors.hpp"

namespace cmdp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class link_kind { multinomial_logit, quadratic };

inline const char* link_name(link_kind k) {
  return k == link_kind::multinomial_logit ? "multinomial_logit" : "quadratic";
}

struct convexity_params {
  double alpha;  // strong-convexity constant of Phi on the bounded domain
  double beta;   // smoothness constant of Phi
};

struct link_function {
  link_kind kind = link_kind::quadratic;
  int output_dim = 2;  // S, number of next states
};

inline void check_dim(const link_function& link, const Vec& y) {
  require(y.size() == link.output_dim, errc::dimension_mismatch,
          "link: input length " + std::to_string(y.size()) + " != S=" +
              std::to_string(link.output_dim));
  require(y.allFinite(), errc::invalid_input, "link: non-finite input");
}

// Potential value.  Log-sum-exp is max-shifted so logits of any magnitude the
// weight bounds allow cannot overflow.
inline double phi_value(const link_function& link, const Vec& y) {
  check_dim(link, y);
  if (link.kind == link_kind::quadratic) return 0.5 * y.squaredNorm();
  const double m = y.maxCoeff();
  return m + std::log((y.array() - m).exp().sum());
}

// Gradient of the potential: the next-state distribution.
//
// For the quadratic link the input must itself be a distribution (entries
// >= -1e-9, sum within 1e-6 of one); anything else signals invalid_weight,
// since the model is undefined outside the feasible set.  Tiny negative
// entries from floating-point projection are clamped to zero and the vector
// is renormalized so downstream samplers always see an exact distribution.
inline Vec phi_gradient(const link_function& link, const Vec& y) {
  check_dim(link, y);
  if (link.kind == link_kind::multinomial_logit) {
    const double m = y.maxCoeff();
    Vec p = (y.array() - m).exp();
    p /= p.sum();
    return p;
  }
  require(y.minCoeff() >= -1e-9, errc::invalid_weight,
          "quadratic link: entry below -1e-9, input is not a distribution",
          y.minCoeff());
  const double sum = y.sum();
  require(std::abs(sum - 1.0) <= 1e-6, errc::invalid_weight,
          "quadratic link: entries sum to " + std::to_string(sum) +
              ", not 1 within 1e-6", sum);
  Vec p = y.cwiseMax(0.0);
  p /= p.sum();
  return p;
}

// Convexity constants on the domain of logits reachable under row bound B and
// context bound R.  For the logit link alpha degrades exponentially in B*R;
// the quadratic link is exactly quadratic, alpha = beta = 1.
inline convexity_params link_convexity(const link_function& link, double B, double R, int S) {
  require(B > 0.0 && R > 0.0, errc::precondition, "link_convexity: B, R must be positive");
  require(S >= 2, errc::precondition, "link_convexity: S must be at least 2");
  if (link.kind == link_kind::quadratic) return {1.0, 1.0};
  return {1.0 / (std::exp(B * R) * double(S) * double(S)), 1.0};
}

// Distribution predicted for context x under weights W (rows = next states).
inline Vec predict_distribution(const link_function& link, const Mat& W, const Vec& x) {
  require(W.rows() == link.output_dim, errc::dimension_mismatch,
          "predict_distribution: W rows != S");
  require(W.cols() == x.size(), errc::dimension_mismatch,
          "predict_distribution: W cols != context length");
  return phi_gradient(link, W * x);
}

}  // namespace cmdp
