#pragma once
// Episodic agents.
//
//   orl_plan     backward induction on estimated transitions/rewards plus an
//                optimism bonus  bonus_scale * (||V_{h+1}||_inf * xi_p + xi_r)
//                per state-action, clipped to [0, H-h+1]; greedy policy.
//   rlsvi_plan   backward induction with an additive Gaussian perturbation
//                per (h,s,a) whose standard deviation is sqrt(S*H) times the
//                combined width  (H-h) * xi_p + xi_r;  no clipping.
//   glm_agent    owns one ONS transition estimator and one ridge reward
//                estimator per state-action pair; each episode it predicts the
//                realized model for the observed context, derives confidence
//                widths with the per-pair failure probability
//                delta' = delta / (2*S*A + S*H), plans, and later absorbs the
//                observed trajectory.
//   oracle_agent / uniform_agent   baselines: plan on the true realized MDP /
//                play a fresh uniformly random policy every episode.
//
// Cold start (no observations at a pair) uses the diameter widths: xi_p = 2
// (the L1 diameter of distributions) and xi_r = B_r * R, which makes the
// first optimistic plan maximal everywhere.

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <vector>

#include <json.hpp>

#include "cmdp/env.hpp"
#include "cmdp/errors.hpp"
#include "cmdp/estimator.hpp"

namespace cmdp {

struct agent_config {
  double delta = 0.1;        // global failure probability
  double bonus_scale = 1.0;  // multiplier on the combined confidence widths
  double eta = 1.0;          // ONS step size
  double lambda = 1.0;       // ridge weight for both estimators
  double B = 1.0;            // Frobenius bound on transition weights
  double B_p = 1.0;          // row bound on transition weights (max logit with R)
  double B_r = 1.0;          // norm bound on reward weights
  double R = 1.0;            // context norm bound
  bool rlsvi = false;        // randomized agent instead of the optimistic one
  std::uint64_t seed = 0;    // seed of the agent's private noise stream
  // Use the literal variance S*H*phi for the randomized bonus instead of the
  // dimensionally consistent S*H*phi^2.
  bool rlsvi_literal_variance = false;
  bool tabular_recovery = false;  // see ons_settings
  bool zero_last_row = false;     // pin last logit weight row to zero

  void validate() const {
    require(delta > 0.0 && delta < 1.0, errc::bad_config, "agent: delta must lie in (0,1)");
    require(bonus_scale > 0.0, errc::bad_config, "agent: bonus_scale must be positive");
    require(eta > 0.0, errc::bad_config, "agent: eta must be positive");
    require(lambda >= 0.0, errc::bad_config, "agent: lambda must be nonnegative");
    require(B > 0.0 && B_p > 0.0 && B_r > 0.0 && R > 0.0, errc::bad_config,
            "agent: bounds B, B_p, B_r, R must be positive");
  }
};

struct plan_output {
  int H = 0, S = 0, A = 0;
  std::vector<double> Q;  // index (h*S + s)*A + a
  std::vector<double> V;  // index h*S + s, h in [0, H] (V[H] = 0)
  policy_table policy;

  double Q_at(int h, int s, int a) const { return Q[(std::size_t(h) * S + s) * A + a]; }
  double V_at(int h, int s) const { return V[std::size_t(h) * S + s]; }
};

namespace detail {

inline void check_planning_inputs(const std::vector<Eigen::VectorXd>& P_hat,
                                  const std::vector<double>& r_hat,
                                  const std::vector<double>& xi_p,
                                  const std::vector<double>& xi_r, int S, int A) {
  const std::size_t n = std::size_t(S) * A;
  require(P_hat.size() == n && r_hat.size() == n && xi_p.size() == n && xi_r.size() == n,
          errc::dimension_mismatch, "plan: estimate arrays must have S*A entries");
  for (std::size_t i = 0; i < n; ++i) {
    require(P_hat[i].allFinite() && std::isfinite(r_hat[i]) && std::isfinite(xi_p[i]) &&
                std::isfinite(xi_r[i]),
            errc::planning_failure, "plan: non-finite estimate at pair " + std::to_string(i));
    require(xi_p[i] >= 0.0 && xi_r[i] >= 0.0, errc::precondition,
            "plan: confidence widths must be nonnegative");
  }
}

}  // namespace detail

// Optimistic plan.  h is zero-based internally; the clip cap at stage h is
// H - h (equivalently H - h' + 1 for one-based h'), matching rewards in [0,1].
inline plan_output orl_plan(const std::vector<Eigen::VectorXd>& P_hat,
                            const std::vector<double>& r_hat,
                            const std::vector<double>& xi_p,
                            const std::vector<double>& xi_r, int H, int S, int A,
                            double bonus_scale) {
  detail::check_planning_inputs(P_hat, r_hat, xi_p, xi_r, S, A);
  plan_output out;
  out.H = H; out.S = S; out.A = A;
  out.Q.assign(std::size_t(H) * S * A, 0.0);
  out.V.assign(std::size_t(H + 1) * S, 0.0);
  out.policy = policy_table(H, S);
  for (int h = H - 1; h >= 0; --h) {
    const double cap = double(H - h);
    double vmax_next = 0.0;
    for (int s = 0; s < S; ++s)
      vmax_next = std::max(vmax_next, std::abs(out.V[std::size_t(h + 1) * S + s]));
    for (int s = 0; s < S; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      int best_a = 0;
      for (int a = 0; a < A; ++a) {
        const std::size_t i = std::size_t(s) * A + a;
        double q = r_hat[i];
        const Eigen::VectorXd& p = P_hat[i];
        for (int j = 0; j < S; ++j) q += p(j) * out.V[std::size_t(h + 1) * S + j];
        q += bonus_scale * (vmax_next * xi_p[i] + xi_r[i]);
        q = std::min(cap, std::max(0.0, q));
        out.Q[(std::size_t(h) * S + s) * A + a] = q;
        if (q > best) { best = q; best_a = a; }
      }
      out.V[std::size_t(h) * S + s] = best;
      out.policy.at(h, s) = best_a;
    }
  }
  return out;
}

// Randomized plan.  Gaussian perturbations are drawn in a fixed order
// (h = H-1 .. 0, then s, then a) so a seed fully determines the plan.  The
// width multiplier at zero-based h is H-1-h: the final stage carries no
// next-state uncertainty.
inline plan_output rlsvi_plan(const std::vector<Eigen::VectorXd>& P_hat,
                              const std::vector<double>& r_hat,
                              const std::vector<double>& xi_p_capped,
                              const std::vector<double>& xi_r_capped, int H, int S, int A,
                              double bonus_scale, bool literal_variance, rng& gen) {
  detail::check_planning_inputs(P_hat, r_hat, xi_p_capped, xi_r_capped, S, A);
  plan_output out;
  out.H = H; out.S = S; out.A = A;
  out.Q.assign(std::size_t(H) * S * A, 0.0);
  out.V.assign(std::size_t(H + 1) * S, 0.0);
  out.policy = policy_table(H, S);
  for (int h = H - 1; h >= 0; --h) {
    for (int s = 0; s < S; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      int best_a = 0;
      for (int a = 0; a < A; ++a) {
        const std::size_t i = std::size_t(s) * A + a;
        const double phi =
            bonus_scale * (double(H - 1 - h) * xi_p_capped[i] + xi_r_capped[i]);
        const double stddev = literal_variance
                                  ? std::sqrt(double(S) * double(H) * phi)
                                  : std::sqrt(double(S) * double(H)) * phi;
        const double b = stddev > 0.0 ? gen.normal(0.0, stddev) : 0.0;
        double q = r_hat[i] + b;
        const Eigen::VectorXd& p = P_hat[i];
        for (int j = 0; j < S; ++j) q += p(j) * out.V[std::size_t(h + 1) * S + j];
        out.Q[(std::size_t(h) * S + s) * A + a] = q;
        if (q > best) { best = q; best_a = a; }
      }
      out.V[std::size_t(h) * S + s] = best;
      out.policy.at(h, s) = best_a;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Agents
// ---------------------------------------------------------------------------

class agent_base {
 public:
  virtual ~agent_base() = default;
  virtual policy_table step(const Eigen::VectorXd& x) = 0;
  virtual void observe(const std::vector<trajectory_step>&) {}
};

class glm_agent : public agent_base {
 public:
  glm_agent(int S, int A, int H, int d, link_kind link, agent_config cfg)
      : S_(S), A_(A), H_(H), d_(d), cfg_(cfg), noise_(mix_seed({cfg.seed, 0xA6E27ull})) {
    cfg_.validate();
    require(S >= 2 && A >= 1 && H >= 1 && d >= 1, errc::precondition,
            "glm_agent: S>=2, A>=1, H>=1, d>=1 required");
    link_ = {link, S};
    cset_ = link == link_kind::quadratic
                ? constraint_set::simplex_columns()
                : constraint_set::ball_rows(cfg_.B_p, cfg_.zero_last_row);
    // Convexity constants at the a-priori bound B_p * R (conservative).
    const convexity_params cp = link_convexity(link_, cfg_.B_p, cfg_.R, S);
    alpha_ = cp.alpha;
    beta_ = cp.beta;
    delta_prime_ = cfg_.delta / double(2 * S * A + S * H);
    ons_settings s{cfg_.eta, cfg_.lambda, cfg_.tabular_recovery};
    trans_.reserve(std::size_t(S) * A);
    rews_.reserve(std::size_t(S) * A);
    for (int i = 0; i < S * A; ++i) {
      trans_.emplace_back(link_, cset_, d, alpha_, s);
      rews_.emplace_back(d, cfg_.lambda > 0.0 ? cfg_.lambda : 1.0, cfg_.B_r);
    }
  }

  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  double delta_prime() const { return delta_prime_; }
  const ons_estimator& transition_estimator(int s, int a) const {
    return trans_[std::size_t(s) * A_ + a];
  }
  const reward_estimator& reward_est(int s, int a) const {
    return rews_[std::size_t(s) * A_ + a];
  }
  const plan_output& last_plan() const { return last_plan_; }

  policy_table step(const Eigen::VectorXd& x) override {
    require(x.size() == d_, errc::dimension_mismatch, "agent.step: context length != d");
    const std::size_t n = std::size_t(S_) * A_;
    std::vector<Eigen::VectorXd> P_hat(n);
    std::vector<double> r_hat(n), xi_p(n), xi_r(n);
    const bool capped = cfg_.rlsvi;
    for (std::size_t i = 0; i < n; ++i) {
      const ons_estimator& te = trans_[i];
      const reward_estimator& re = rews_[i];
      P_hat[i] = te.predict(x);
      r_hat[i] = re.predict(x);
      if (te.t() == 0) {
        xi_p[i] = 2.0;
        xi_r[i] = cfg_.B_r * cfg_.R;
      } else {
        const double gamma = te.confidence_radius(cfg_.B, cfg_.B_p * cfg_.R, delta_prime_);
        xi_p[i] = std::isfinite(gamma) ? te.transition_ci(gamma, x, beta_, capped) : 2.0;
        xi_r[i] = re.ci(x, delta_prime_, capped, cfg_.R);
      }
    }
    last_plan_ = cfg_.rlsvi
                     ? rlsvi_plan(P_hat, r_hat, xi_p, xi_r, H_, S_, A_, cfg_.bonus_scale,
                                  cfg_.rlsvi_literal_variance, noise_)
                     : orl_plan(P_hat, r_hat, xi_p, xi_r, H_, S_, A_, cfg_.bonus_scale);
    pending_x_ = x;
    has_pending_ = true;
    return last_plan_.policy;
  }

  void observe(const std::vector<trajectory_step>& traj) override {
    require(has_pending_, errc::precondition, "agent.observe: no preceding step call");
    for (const auto& st : traj) {
      require(st.s >= 0 && st.s < S_ && st.a >= 0 && st.a < A_ && st.s_next >= 0 &&
                  st.s_next < S_,
              errc::invalid_input, "agent.observe: trajectory index out of range");
      const std::size_t i = std::size_t(st.s) * A_ + st.a;
      trans_[i].update(pending_x_, st.s_next);
      rews_[i].update(pending_x_, st.r_obs);
    }
  }

  nlohmann::json checkpoint() const {
    nlohmann::json j;
    j["version"] = 1;
    j["kind"] = "agent";
    j["S"] = S_; j["A"] = A_; j["H"] = H_; j["d"] = d_;
    j["link"] = link_name(link_.kind);
    j["config"] = {{"delta", cfg_.delta},
                   {"bonus_scale", cfg_.bonus_scale},
                   {"eta", cfg_.eta},
                   {"lambda", cfg_.lambda},
                   {"B", cfg_.B},
                   {"B_p", cfg_.B_p},
                   {"B_r", cfg_.B_r},
                   {"R", cfg_.R},
                   {"rlsvi", cfg_.rlsvi},
                   {"seed", cfg_.seed},
                   {"rlsvi_literal_variance", cfg_.rlsvi_literal_variance},
                   {"tabular_recovery", cfg_.tabular_recovery},
                   {"zero_last_row", cfg_.zero_last_row}};
    nlohmann::json ts = nlohmann::json::array(), rs = nlohmann::json::array();
    for (const auto& e : trans_) ts.push_back(e.checkpoint());
    for (const auto& e : rews_) rs.push_back(e.checkpoint());
    j["transition_estimators"] = ts;
    j["reward_estimators"] = rs;
    nlohmann::json st = nlohmann::json::array();
    for (auto w : noise_.state()) st.push_back(w);
    j["noise_state"] = st;
    j["has_pending"] = has_pending_;
    if (has_pending_) j["pending_context"] = detail::vec_to_json(pending_x_);
    return j;
  }

  static glm_agent from_checkpoint(const nlohmann::json& j) {
    require(j.value("kind", "") == std::string("agent"), errc::io_failure,
            "checkpoint: not an agent");
    require(j.value("version", 0) == 1, errc::io_failure, "checkpoint: unknown version");
    const auto& c = j.at("config");
    agent_config cfg;
    cfg.delta = c.at("delta").get<double>();
    cfg.bonus_scale = c.at("bonus_scale").get<double>();
    cfg.eta = c.at("eta").get<double>();
    cfg.lambda = c.at("lambda").get<double>();
    cfg.B = c.at("B").get<double>();
    cfg.B_p = c.at("B_p").get<double>();
    cfg.B_r = c.at("B_r").get<double>();
    cfg.R = c.at("R").get<double>();
    cfg.rlsvi = c.at("rlsvi").get<bool>();
    cfg.seed = c.at("seed").get<std::uint64_t>();
    cfg.rlsvi_literal_variance = c.at("rlsvi_literal_variance").get<bool>();
    cfg.tabular_recovery = c.at("tabular_recovery").get<bool>();
    cfg.zero_last_row = c.at("zero_last_row").get<bool>();
    glm_agent a(j.at("S").get<int>(), j.at("A").get<int>(), j.at("H").get<int>(),
                j.at("d").get<int>(),
                j.at("link").get<std::string>() == "multinomial_logit"
                    ? link_kind::multinomial_logit : link_kind::quadratic,
                cfg);
    a.trans_.clear();
    for (const auto& e : j.at("transition_estimators"))
      a.trans_.push_back(ons_estimator::from_checkpoint(e));
    a.rews_.clear();
    for (const auto& e : j.at("reward_estimators"))
      a.rews_.push_back(reward_estimator::from_checkpoint(e));
    rng::state_type st{};
    const auto& js = j.at("noise_state");
    for (int i = 0; i < 4; ++i) st[std::size_t(i)] = js[std::size_t(i)].get<std::uint64_t>();
    a.noise_.set_state(st);
    a.has_pending_ = j.at("has_pending").get<bool>();
    if (a.has_pending_) a.pending_x_ = detail::vec_from_json(j.at("pending_context"));
    return a;
  }

 private:
  int S_, A_, H_, d_;
  agent_config cfg_;
  link_function link_;
  constraint_set cset_;
  double alpha_ = 1.0, beta_ = 1.0, delta_prime_ = 0.1;
  std::vector<ons_estimator> trans_;
  std::vector<reward_estimator> rews_;
  rng noise_;
  Eigen::VectorXd pending_x_;
  bool has_pending_ = false;
  plan_output last_plan_;
};

// Plans on the true realized MDP; its regret is identically zero.
class oracle_agent : public agent_base {
 public:
  explicit oracle_agent(cmdp_truth truth) : truth_(std::move(truth)) {}
  policy_table step(const Eigen::VectorXd& x) override {
    return exact_values(realize_mdp(truth_, x)).greedy;
  }

 private:
  cmdp_truth truth_;
};

// Plays a freshly drawn uniformly random policy every episode.
class uniform_agent : public agent_base {
 public:
  uniform_agent(int S, int A, int H, std::uint64_t seed)
      : S_(S), A_(A), H_(H), gen_(mix_seed({seed, 0x7A11ull})) {}
  policy_table step(const Eigen::VectorXd&) override {
    policy_table pi(H_, S_);
    for (int h = 0; h < H_; ++h)
      for (int s = 0; s < S_; ++s) pi.at(h, s) = int(gen_.below(std::uint64_t(A_)));
    return pi;
  }

 private:
  int S_, A_, H_;
  rng gen_;
};

}  // namespace cmdp
