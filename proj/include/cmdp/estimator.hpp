#pragma once
// Per-(state, action) online estimators with confidence sets.
//
//   ons_estimator        online Newton step on the multinomial GLM loss
//                        l(W) = Phi(W x) - <e_y, W x>, constrained to the
//                        feasible weight set, with an ellipsoidal confidence
//                        radius gamma_t and the derived transition-error width.
//   reward_estimator     ridge regression of observed rewards on contexts with
//                        the determinant-ratio confidence width.
//   conversion_tracker   turns the iterates of ANY external online learner
//                        with known regret bound B_t into a confidence
//                        ellipsoid (center W-bar, radius gamma_t).
//
// The design matrix Z of the ONS estimator accumulates (eta*alpha/2) x x^T per
// observation; the reward design matrix accumulates plain x x^T.  Both keep
// the inverse by rank-one (Sherman-Morrison) updates and the log-determinant
// by the matching log1p identity, so no refactorization ever happens on the
// hot path.
//
// lambda = 0 is accepted for the ONS estimator (needed by the tabular-recovery
// mode); until Z becomes numerically invertible the inverse is a pseudoinverse
// and the log-determinant is -inf, which makes the confidence radius +inf.

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>

#include <json.hpp>

#include "cmdp/constraint.hpp"
#include "cmdp/errors.hpp"
#include "cmdp/linkfn.hpp"

namespace cmdp {

namespace detail {

inline nlohmann::json mat_to_json(const Eigen::MatrixXd& M) {
  nlohmann::json a = nlohmann::json::array();
  for (int i = 0; i < M.rows(); ++i)
    for (int j = 0; j < M.cols(); ++j) a.push_back(M(i, j));  // row-major
  return a;
}

inline Eigen::MatrixXd mat_from_json(const nlohmann::json& a, int rows, int cols) {
  require(int(a.size()) == rows * cols, errc::io_failure,
          "checkpoint: matrix payload has wrong length");
  Eigen::MatrixXd M(rows, cols);
  int k = 0;
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) M(i, j) = a[k++].get<double>();
  return M;
}

inline nlohmann::json vec_to_json(const Eigen::VectorXd& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline Eigen::VectorXd vec_from_json(const nlohmann::json& a) {
  const auto raw = a.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(raw.data(), long(raw.size()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// ONS transition-weight estimator
// ---------------------------------------------------------------------------

struct ons_settings {
  double eta = 1.0;     // Newton step size
  double lambda = 1.0;  // ridge weight of the initial Z = lambda*I (>= 0)
  // When set, the Z increment coefficient is eta*alpha instead of eta*alpha/2.
  // With eta = alpha = 1, lambda = 0, d = 1 and the quadratic link this makes
  // the iterate the exact running mean of the observed one-hot outcomes.
  bool tabular_recovery = false;
};

class ons_estimator {
 public:
  ons_estimator() = default;

  ons_estimator(link_function link, constraint_set cset, int d, double alpha,
                ons_settings s = {})
      : link_(link), cset_(cset), d_(d), alpha_(alpha), eta_(s.eta),
        lambda_(s.lambda), tabular_recovery_(s.tabular_recovery) {
    require(d_ >= 1, errc::precondition, "ons: d must be positive");
    require(alpha_ > 0.0, errc::precondition, "ons: alpha must be positive");
    require(eta_ > 0.0, errc::precondition, "ons: eta must be positive");
    require(lambda_ >= 0.0, errc::precondition, "ons: lambda must be nonnegative");
    const int S = link_.output_dim;
    // Start from the most uninformed feasible point: the Euclidean projection
    // of the zero matrix (uniform columns for the simplex set, zero for balls).
    W_ = project_to_set(cset_, Eigen::MatrixXd::Zero(S, d_));
    Z_ = lambda_ * Eigen::MatrixXd::Identity(d_, d_);
    if (lambda_ > 0.0) {
      Zinv_ = (1.0 / lambda_) * Eigen::MatrixXd::Identity(d_, d_);
      log_det_Z_ = log_det_Z1_ = d_ * std::log(lambda_);
      singular_ = false;
    } else {
      Zinv_ = Eigen::MatrixXd::Zero(d_, d_);
      log_det_Z_ = log_det_Z1_ = -std::numeric_limits<double>::infinity();
      singular_ = true;
    }
  }

  int S() const { return link_.output_dim; }
  int d() const { return d_; }
  long t() const { return t_; }
  double eta() const { return eta_; }
  double lambda() const { return lambda_; }
  double alpha() const { return alpha_; }
  const link_function& link() const { return link_; }
  const constraint_set& constraints() const { return cset_; }
  const Eigen::MatrixXd& W_hat() const { return W_; }
  const Eigen::MatrixXd& Z() const { return Z_; }
  const Eigen::MatrixXd& Z_inv() const { return Zinv_; }
  double log_det_Z() const { return log_det_Z_; }
  double log_det_Z1() const { return log_det_Z1_; }

  // Distribution predicted for context x from the current estimate.
  Eigen::VectorXd predict(const Eigen::VectorXd& x) const {
    return predict_distribution(link_, W_, x);
  }

  // One observed transition: context x, realized next state y.
  void update(const Eigen::VectorXd& x, int y) {
    require(x.size() == d_, errc::dimension_mismatch, "ons.update: context length != d");
    require(x.allFinite(), errc::invalid_input, "ons.update: non-finite context");
    require(y >= 0 && y < S(), errc::invalid_input, "ons.update: next-state index out of range");

    // Loss gradient at the pre-update iterate: (grad Phi(Wx) - e_y) x^T.
    Eigen::VectorXd g = phi_gradient(link_, W_ * x);
    g(y) -= 1.0;

    advance_design(x);

    // Unconstrained minimizer of the local model
    //   0.5 * ||W - W_t||_Z^2 + eta * <g x^T, W - W_t>
    // (row-wise Z-norm), i.e. each row i moves by -eta * g_i * (Z^-1 x)^T.
    const Eigen::VectorXd u = Zinv_ * x;
    Eigen::MatrixXd cand = W_ - eta_ * g * u.transpose();
    if (set_contains(cset_, cand, 1e-9)) {
      W_ = cand;
    } else {
      W_ = constrained_step(cand, g, x);
    }
    ++t_;
  }

  // Ellipsoid radius gamma_{t+1} such that, with probability 1 - delta over
  // the whole trajectory, ||W_t - W*||_{Z_t}^2 <= gamma_t.  B bounds the
  // Frobenius norm of feasible weights, B_pR the magnitude of any logit.
  double confidence_radius(double B, double B_pR, double delta) const {
    require(t_ >= 1, errc::precondition, "confidence_radius: no observations yet");
    require(delta > 0.0 && delta < 1.0, errc::precondition,
            "confidence_radius: delta must lie in (0,1)");
    if (!std::isfinite(log_det_Z1_)) return std::numeric_limits<double>::infinity();
    const double tau = tau_term(delta);
    return lambda_ * B * B + 8.0 * eta_ * B_pR +
           2.0 * eta_ * ((4.0 / alpha_ + (8.0 / 3.0) * B_pR) * tau +
                         (4.0 / alpha_) * (log_det_Z_ - log_det_Z1_));
  }

  // One-sided width on the L1 transition-estimate error at context x:
  //   beta * sqrt(S) * sqrt(gamma) * ||x||_{Z^-1},
  // optionally capped at 2, the L1 diameter of the probability simplex.
  double transition_ci(double gamma, const Eigen::VectorXd& x, double beta_smooth,
                       bool capped = false) const {
    require(gamma >= 0.0, errc::precondition, "transition_ci: gamma must be nonnegative");
    const double q = std::max(0.0, double(x.transpose() * Zinv_ * x));
    const double v = beta_smooth * std::sqrt(double(S())) * std::sqrt(gamma) * std::sqrt(q);
    return capped ? std::min(2.0, v) : v;
  }

  nlohmann::json checkpoint() const {
    nlohmann::json j;
    j["version"] = 1;
    j["kind"] = "ons";
    j["S"] = S();
    j["d"] = d_;
    j["link"] = link_name(link_.kind);
    j["constraint"] = {{"kind", cset_.kind == constraint_kind::column_simplex
                                    ? "column_simplex" : "row_ball"},
                       {"B_p", cset_.B_p},
                       {"zero_last_row", cset_.zero_last_row}};
    j["eta"] = eta_;
    j["lambda"] = lambda_;
    j["alpha"] = alpha_;
    j["tabular_recovery"] = tabular_recovery_;
    j["t"] = t_;
    j["W_hat"] = detail::mat_to_json(W_);
    j["Z"] = detail::mat_to_json(Z_);
    j["Z_inv"] = detail::mat_to_json(Zinv_);
    j["log_det_Z"] = log_det_Z_;
    j["log_det_Z1"] = log_det_Z1_;
    j["singular"] = singular_;
    return j;
  }

  static ons_estimator from_checkpoint(const nlohmann::json& j) {
    require(j.value("kind", "") == std::string("ons"), errc::io_failure,
            "checkpoint: not an ons estimator");
    require(j.value("version", 0) == 1, errc::io_failure, "checkpoint: unknown version");
    link_function link{j.at("link").get<std::string>() == "multinomial_logit"
                           ? link_kind::multinomial_logit : link_kind::quadratic,
                       j.at("S").get<int>()};
    const auto& jc = j.at("constraint");
    constraint_set cs;
    cs.kind = jc.at("kind").get<std::string>() == "column_simplex"
                  ? constraint_kind::column_simplex : constraint_kind::row_ball;
    cs.B_p = jc.at("B_p").get<double>();
    cs.zero_last_row = jc.at("zero_last_row").get<bool>();
    ons_settings s{j.at("eta").get<double>(), j.at("lambda").get<double>(),
                   j.at("tabular_recovery").get<bool>()};
    ons_estimator e(link, cs, j.at("d").get<int>(), j.at("alpha").get<double>(), s);
    e.t_ = j.at("t").get<long>();
    e.W_ = detail::mat_from_json(j.at("W_hat"), link.output_dim, e.d_);
    e.Z_ = detail::mat_from_json(j.at("Z"), e.d_, e.d_);
    e.Zinv_ = detail::mat_from_json(j.at("Z_inv"), e.d_, e.d_);
    e.log_det_Z_ = j.at("log_det_Z").get<double>();
    e.log_det_Z1_ = j.at("log_det_Z1").get<double>();
    e.singular_ = j.at("singular").get<bool>();
    return e;
  }

 private:
  double z_coeff() const { return tabular_recovery_ ? eta_ * alpha_ : eta_ * alpha_ / 2.0; }

  double tau_term(double delta) const {
    const double st = double(S()) * double(t_);
    const double bracket = std::ceil(2.0 * std::log(st));
    return std::log(2.0 * bracket * double(t_) * double(t_) / delta);
  }

  void advance_design(const Eigen::VectorXd& x) {
    const double c = z_coeff();
    if (!singular_) {
      const Eigen::VectorXd w = Zinv_ * x;
      const double q = x.dot(w);
      log_det_Z_ += std::log1p(c * q);
      Zinv_.noalias() -= (c / (1.0 + c * q)) * w * w.transpose();
      Z_.noalias() += c * x * x.transpose();
      return;
    }
    // lambda = 0 and Z not yet full rank: keep the exact Z, refresh a
    // pseudoinverse, and switch to incremental maintenance once Z admits a
    // Cholesky factorization.
    Z_.noalias() += c * x * x.transpose();
    Eigen::LLT<Eigen::MatrixXd> llt(Z_);
    if (llt.info() == Eigen::Success) {
      Zinv_ = llt.solve(Eigen::MatrixXd::Identity(d_, d_));
      log_det_Z_ = 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
      singular_ = false;
    } else {
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(Z_);
      Zinv_ = cod.pseudoInverse();
      log_det_Z_ = -std::numeric_limits<double>::infinity();
    }
  }

  // Projected gradient descent on the strongly convex local model when the
  // closed-form step leaves the feasible set.  Step 1/lambda_max(Z) guarantees
  // monotone decrease; stops when the decrease drops below 1e-10.
  Eigen::MatrixXd constrained_step(const Eigen::MatrixXd& unconstrained,
                                   const Eigen::VectorXd& g,
                                   const Eigen::VectorXd& x) const {
    const Eigen::MatrixXd& W0 = W_;
    const Eigen::MatrixXd lin = eta_ * g * x.transpose();  // gradient of the linear term
    auto objective = [&](const Eigen::MatrixXd& W) {
      const Eigen::MatrixXd D = W - W0;
      return 0.5 * (D * Z_).cwiseProduct(D).sum() + lin.cwiseProduct(D).sum();
    };
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Z_, Eigen::EigenvaluesOnly);
    const double L = std::max(es.eigenvalues().maxCoeff(), 1e-12);

    Eigen::MatrixXd W = project_to_set(cset_, unconstrained);
    double f_prev = objective(W);
    constexpr int kMaxIter = 500;
    for (int it = 0; it < kMaxIter; ++it) {
      const Eigen::MatrixXd G = (W - W0) * Z_ + lin;
      W = project_to_set(cset_, W - G / L);
      const double f = objective(W);
      const double decrease = f_prev - f;
      f_prev = f;
      if (decrease < 1e-10) return W;
    }
    throw error(errc::numeric_failure,
                "ons.update: projected gradient descent hit the iteration cap",
                /*payload=*/f_prev);
  }

  link_function link_{};
  constraint_set cset_{};
  int d_ = 1;
  double alpha_ = 1.0, eta_ = 1.0, lambda_ = 1.0;
  bool tabular_recovery_ = false;
  Eigen::MatrixXd W_, Z_, Zinv_;
  double log_det_Z_ = 0.0, log_det_Z1_ = 0.0;
  bool singular_ = false;
  long t_ = 0;
};

// ---------------------------------------------------------------------------
// Ridge reward estimator
// ---------------------------------------------------------------------------

class reward_estimator {
 public:
  reward_estimator() = default;

  reward_estimator(int d, double lambda, double B_r)
      : d_(d), lambda_(lambda), B_r_(B_r) {
    require(d_ >= 1, errc::precondition, "reward: d must be positive");
    require(lambda_ > 0.0, errc::precondition, "reward: lambda must be positive");
    theta_ = Eigen::VectorXd::Zero(d_);
    b_ = Eigen::VectorXd::Zero(d_);
    Zr_ = lambda_ * Eigen::MatrixXd::Identity(d_, d_);
    Zrinv_ = (1.0 / lambda_) * Eigen::MatrixXd::Identity(d_, d_);
    log_det_ = d_ * std::log(lambda_);
  }

  int d() const { return d_; }
  long t() const { return t_; }
  double lambda() const { return lambda_; }
  double B_r() const { return B_r_; }
  const Eigen::VectorXd& theta_hat() const { return theta_; }
  const Eigen::MatrixXd& Zr() const { return Zr_; }
  const Eigen::MatrixXd& Zr_inv() const { return Zrinv_; }
  double log_det_Zr() const { return log_det_; }

  double predict(const Eigen::VectorXd& x) const { return theta_.dot(x); }

  void update(const Eigen::VectorXd& x, double r) {
    require(x.size() == d_, errc::dimension_mismatch, "reward.update: context length != d");
    require(x.allFinite() && std::isfinite(r), errc::invalid_input,
            "reward.update: non-finite input");
    const Eigen::VectorXd w = Zrinv_ * x;
    const double q = x.dot(w);
    log_det_ += std::log1p(q);
    Zrinv_.noalias() -= (1.0 / (1.0 + q)) * w * w.transpose();
    Zr_.noalias() += x * x.transpose();
    b_.noalias() += r * x;
    theta_ = Zrinv_ * b_;
    ++t_;
  }

  // Width of the reward-estimate interval at context x:
  //   zeta * ||x||_{Zr^-1},  zeta = sqrt(lambda d) + sqrt(log-det ratio / 4 - log(delta_r)/2),
  // optionally capped at B_r * R, the largest possible reward-estimate error.
  double ci(const Eigen::VectorXd& x, double delta_r, bool capped = false,
            double R = 1.0) const {
    require(delta_r > 0.0 && delta_r < 1.0, errc::precondition,
            "reward.ci: delta_r must lie in (0,1)");
    const double zeta =
        std::sqrt(lambda_ * d_) +
        std::sqrt(std::max(0.0, 0.25 * (log_det_ - d_ * std::log(lambda_) -
                                        2.0 * std::log(delta_r))));
    const double q = std::max(0.0, double(x.transpose() * Zrinv_ * x));
    const double v = zeta * std::sqrt(q);
    return capped ? std::min(B_r_ * R, v) : v;
  }

  nlohmann::json checkpoint() const {
    nlohmann::json j;
    j["version"] = 1;
    j["kind"] = "reward";
    j["d"] = d_;
    j["lambda"] = lambda_;
    j["B_r"] = B_r_;
    j["t"] = t_;
    j["theta_hat"] = detail::vec_to_json(theta_);
    j["b"] = detail::vec_to_json(b_);
    j["Zr"] = detail::mat_to_json(Zr_);
    j["Zr_inv"] = detail::mat_to_json(Zrinv_);
    j["log_det_Zr"] = log_det_;
    return j;
  }

  static reward_estimator from_checkpoint(const nlohmann::json& j) {
    require(j.value("kind", "") == std::string("reward"), errc::io_failure,
            "checkpoint: not a reward estimator");
    require(j.value("version", 0) == 1, errc::io_failure, "checkpoint: unknown version");
    reward_estimator e(j.at("d").get<int>(), j.at("lambda").get<double>(),
                       j.at("B_r").get<double>());
    e.t_ = j.at("t").get<long>();
    e.theta_ = detail::vec_from_json(j.at("theta_hat"));
    e.b_ = detail::vec_from_json(j.at("b"));
    e.Zr_ = detail::mat_from_json(j.at("Zr"), e.d_, e.d_);
    e.Zrinv_ = detail::mat_from_json(j.at("Zr_inv"), e.d_, e.d_);
    e.log_det_ = j.at("log_det_Zr").get<double>();
    return e;
  }

 private:
  int d_ = 1;
  double lambda_ = 1.0, B_r_ = 1.0;
  Eigen::VectorXd theta_, b_;
  Eigen::MatrixXd Zr_, Zrinv_;
  double log_det_ = 0.0;
  long t_ = 0;
};

// ---------------------------------------------------------------------------
// Online-to-confidence-set conversion
// ---------------------------------------------------------------------------

struct conversion_result {
  Eigen::MatrixXd center;  // S x d
  double radius = 0.0;
  // Set when the raw radius formula went negative (numerically possible when
  // the supplied regret bound is loose); radius is then reported as 0.
  bool degenerate = false;
};

class conversion_tracker {
 public:
  conversion_tracker() = default;

  conversion_tracker(int S, int d, double lambda, double alpha)
      : S_(S), d_(d), lambda_(lambda), alpha_(alpha) {
    require(S_ >= 1 && d_ >= 1, errc::precondition, "conversion: bad dimensions");
    require(lambda_ > 0.0, errc::precondition, "conversion: lambda must be positive");
    require(alpha_ > 0.0, errc::precondition, "conversion: alpha must be positive");
    XtC_ = Eigen::MatrixXd::Zero(d_, S_);
    Z_ = lambda_ * Eigen::MatrixXd::Identity(d_, d_);
  }

  int S() const { return S_; }
  int d() const { return d_; }
  long t() const { return t_; }
  const Eigen::MatrixXd& XtC() const { return XtC_; }
  const Eigen::MatrixXd& Z() const { return Z_; }
  double c_sq() const { return c_sq_; }

  // Feed the prediction W_t of the external learner for context x_t.
  void update(const Eigen::VectorXd& x, const Eigen::MatrixXd& w_pred) {
    require(x.size() == d_, errc::dimension_mismatch, "conversion.update: context length != d");
    require(w_pred.rows() == S_ && w_pred.cols() == d_, errc::dimension_mismatch,
            "conversion.update: predictor shape != S x d");
    const Eigen::VectorXd v = w_pred * x;
    XtC_.noalias() += x * v.transpose();
    Z_.noalias() += x * x.transpose();
    c_sq_ += v.squaredNorm();
    ++t_;
  }

  // Confidence set from a regret bound B_t valid for the learner at time t.
  // Center is the ridge regression of the learner's own predictions; the
  // radius combines the regret-dependent term gamma'_t(B_t) with the observed
  // fit quality.
  conversion_result confidence(double B_t, double delta, double B) const {
    require(B_t >= 0.0, errc::precondition, "conversion.confidence: B_t must be nonnegative");
    require(delta > 0.0 && delta < 1.0, errc::precondition,
            "conversion.confidence: delta must lie in (0,1)");
    const double a = alpha_;
    const double inner_sqrt = std::sqrt(4.0 + 8.0 * B_t / a + 16.0 / (a * a * a * a * delta * delta));
    const double gamma_prime = 1.0 + (4.0 / a) * B_t + (8.0 / (a * a)) * std::log(inner_sqrt / delta);

    Eigen::LLT<Eigen::MatrixXd> llt(Z_);
    const Eigen::MatrixXd M = llt.solve(XtC_);           // d x S
    const Eigen::MatrixXd center = M.transpose();        // S x d
    const double fit = c_sq_ - center.cwiseProduct(XtC_.transpose()).sum();
    double radius = gamma_prime + lambda_ * B * B * double(S_) - fit;
    conversion_result out;
    out.center = center;
    if (radius < 0.0) {
      out.radius = 0.0;
      out.degenerate = true;
    } else {
      out.radius = radius;
    }
    return out;
  }

 private:
  int S_ = 1, d_ = 1;
  double lambda_ = 1.0, alpha_ = 1.0;
  Eigen::MatrixXd XtC_, Z_;
  double c_sq_ = 0.0;
  long t_ = 0;
};

// Squared Z-weighted distance between weight matrices, rows treated
// independently: sum_i (A_i - B_i) Z (A_i - B_i)^T.
inline double weighted_sq_distance(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                   const Eigen::MatrixXd& Z) {
  const Eigen::MatrixXd D = A - B;
  return (D * Z).cwiseProduct(D).sum();
}

}  // namespace cmdp
