#pragma once
// Feasible sets for transition weight matrices, with exact Euclidean
// projection and membership tests.
//
//   column_simplex  every column of W (S x d) is a probability distribution;
//                   the natural set for the quadratic link, where columns are
//                   the next-state distributions of d base MDPs.
//   row_ball        every row of W has Euclidean norm at most B_p; the set
//                   for logit weights.  An optional flag pins the last row to
//                   zero (softmax is invariant to that normalization).
//
// Projections are exact: per-column simplex projection by the sorting
// algorithm, and per-row radial rescaling for the ball.  Both constraints are
// separable in the direction being projected, so the matrix projection is the
// concatenation of the per-column / per-row ones.

#include <Eigen/Dense>
#include <algorithm>
#include <vector>

#include "cmdp/errors.hpp"

namespace cmdp {

enum class constraint_kind { column_simplex, row_ball };

struct constraint_set {
  constraint_kind kind = constraint_kind::column_simplex;
  double B_p = 1.0;           // row-norm bound (row_ball only)
  bool zero_last_row = false; // pin last row to 0 (row_ball only)

  static constraint_set simplex_columns() { return {constraint_kind::column_simplex, 0.0, false}; }
  static constraint_set ball_rows(double B_p, bool zero_last = false) {
    require(B_p > 0.0, errc::precondition, "row_ball: B_p must be positive");
    return {constraint_kind::row_ball, B_p, zero_last};
  }
};

// Euclidean projection of v onto the probability simplex (Held et al. sorting
// scheme): subtract the largest uniform shift that keeps the positive part
// summing to one.
inline Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
  const int n = int(v.size());
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double css = 0.0, theta = 0.0;
  int rho = 0;
  for (int i = 0; i < n; ++i) {
    css += u[i];
    const double cand = (css - 1.0) / double(i + 1);
    if (u[i] - cand > 0.0) {
      rho = i;
      theta = cand;
    }
  }
  (void)rho;
  return (v.array() - theta).max(0.0);
}

inline bool set_contains(const constraint_set& c, const Eigen::MatrixXd& W, double tol = 1e-9) {
  if (c.kind == constraint_kind::column_simplex) {
    if (W.minCoeff() < -tol) return false;
    for (int j = 0; j < W.cols(); ++j)
      if (std::abs(W.col(j).sum() - 1.0) > tol) return false;
    return true;
  }
  for (int i = 0; i < W.rows(); ++i)
    if (W.row(i).norm() > c.B_p + tol) return false;
  if (c.zero_last_row && W.rows() > 0 && W.row(W.rows() - 1).lpNorm<Eigen::Infinity>() > tol)
    return false;
  return true;
}

inline Eigen::MatrixXd project_to_set(const constraint_set& c, const Eigen::MatrixXd& W) {
  Eigen::MatrixXd P = W;
  if (c.kind == constraint_kind::column_simplex) {
    for (int j = 0; j < P.cols(); ++j) P.col(j) = project_to_simplex(P.col(j));
    return P;
  }
  for (int i = 0; i < P.rows(); ++i) {
    const double n = P.row(i).norm();
    if (n > c.B_p) P.row(i) *= c.B_p / n;
  }
  if (c.zero_last_row && P.rows() > 0) P.row(P.rows() - 1).setZero();
  return P;
}

}  // namespace cmdp
