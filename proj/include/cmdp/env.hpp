#pragma once
// Context-parameterized episodic MDP environments.
//
// A "truth" holds, for every state-action pair, a transition weight matrix
// W* (S x d) and a reward weight vector theta* (d).  Observing a context x at
// episode start realizes a concrete MDP with
//
//   P(.|s,a) = grad Phi(W*_{sa} x)      (link gradient)
//   r(s,a)   = <theta*_{sa}, x>         (clamped to [0,1], counted if it fires)
//
// Provided generators:
//   generate_benchmark      d random base MDPs (Dirichlet next-state columns,
//                           Beta mean rewards); contexts mix them linearly
//                           under the quadratic link.
//   generate_hard_instance  paired two-state blocks where exactly one
//                           designated action per indicator context moves the
//                           stay-probability of the rewarding state from 1/2
//                           to 1/2 + epsilon.
//
// Values are exact: backward induction on the realized true model, never
// sampled returns.

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <json.hpp>

#include "cmdp/errors.hpp"
#include "cmdp/estimator.hpp"
#include "cmdp/linkfn.hpp"
#include "cmdp/rng.hpp"

namespace cmdp {

enum class context_kind { dirichlet, indicator_cycle };

struct env_config {
  int S = 2, A = 2, H = 1, d = 1;
  link_kind link = link_kind::quadratic;
  context_kind context = context_kind::dirichlet;
  std::vector<double> concentration;  // Dirichlet parameters, length d
  double reward_noise_sigma = 0.05;
  std::uint64_t seed = 0;

  void validate() const {
    require(S >= 2 && A >= 1 && H >= 1 && d >= 1, errc::bad_config,
            "env_config: S>=2, A>=1, H>=1, d>=1 required");
    require(reward_noise_sigma >= 0.0, errc::bad_config,
            "env_config: reward noise must be nonnegative");
    if (context == context_kind::dirichlet) {
      require(int(concentration.size()) == d, errc::bad_config,
              "env_config: concentration length must equal d");
      for (double c : concentration)
        require(c > 0.0, errc::bad_config, "env_config: concentrations must be positive");
    }
  }

  static std::vector<double> symmetric(int d, double c) {
    return std::vector<double>(std::size_t(d), c);
  }
};

struct cmdp_truth {
  int S = 0, A = 0, d = 0, H = 0;
  link_function link{};
  std::vector<Eigen::MatrixXd> W;      // per (s,a), index s*A + a, each S x d
  std::vector<Eigen::VectorXd> theta;  // per (s,a), each length d

  const Eigen::MatrixXd& W_at(int s, int a) const { return W[std::size_t(s) * A + a]; }
  const Eigen::VectorXd& theta_at(int s, int a) const { return theta[std::size_t(s) * A + a]; }
};

struct contextual_mdp {
  int S = 0, A = 0, H = 0;
  Eigen::VectorXd x;                // the generating context
  std::vector<Eigen::VectorXd> P;   // per (s,a), next-state distribution
  std::vector<double> r;            // per (s,a), mean reward in [0,1]
  long clamp_count = 0;             // times the reward clamp fired

  const Eigen::VectorXd& P_at(int s, int a) const { return P[std::size_t(s) * A + a]; }
  double r_at(int s, int a) const { return r[std::size_t(s) * A + a]; }
};

struct trajectory_step {
  int h;        // 1-based step index
  int s, a;
  double r_obs; // noisy observed reward
  int s_next;
};

// Deterministic nonstationary policy: action for every (step, state).
struct policy_table {
  int H = 0, S = 0;
  std::vector<int> a;  // index h*S + s, h zero-based

  policy_table() = default;
  policy_table(int H_, int S_) : H(H_), S(S_), a(std::size_t(H_) * S_, 0) {}
  int& at(int h, int s) { return a[std::size_t(h) * S + s]; }
  int at(int h, int s) const { return a[std::size_t(h) * S + s]; }
};

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

// Random benchmark: d base MDPs, quadratic link.  Column i of every W*_{sa}
// is the next-state distribution of base MDP i at (s,a), drawn from a
// symmetric Dirichlet; theta*_{sa}[i] is the base mean reward, drawn from a
// Beta and multiplied by reward_scale (see the benchmark preset for why the
// scale matters: it calibrates the mean optimal value of the mixture).
inline cmdp_truth generate_benchmark(const env_config& cfg, double dirichlet_base = 0.4,
                                     double beta_a = 0.4, double beta_b = 0.4,
                                     double reward_scale = 1.0) {
  cfg.validate();
  require(cfg.link == link_kind::quadratic, errc::precondition,
          "generate_benchmark: quadratic link required (contexts mix base MDPs)");
  require(dirichlet_base > 0.0 && beta_a > 0.0 && beta_b > 0.0, errc::precondition,
          "generate_benchmark: shape parameters must be positive");
  require(reward_scale > 0.0 && reward_scale <= 1.0, errc::precondition,
          "generate_benchmark: reward_scale must lie in (0,1]");

  cmdp_truth truth;
  truth.S = cfg.S; truth.A = cfg.A; truth.d = cfg.d; truth.H = cfg.H;
  truth.link = {link_kind::quadratic, cfg.S};
  truth.W.assign(std::size_t(cfg.S) * cfg.A, Eigen::MatrixXd::Zero(cfg.S, cfg.d));
  truth.theta.assign(std::size_t(cfg.S) * cfg.A, Eigen::VectorXd::Zero(cfg.d));

  rng gen(mix_seed({cfg.seed, std::uint64_t(0xBE5C)}));
  const std::vector<double> conc(std::size_t(cfg.S), dirichlet_base);
  std::vector<double> draw;
  for (int i = 0; i < cfg.d; ++i)
    for (int s = 0; s < cfg.S; ++s)
      for (int a = 0; a < cfg.A; ++a) {
        gen.dirichlet(conc, draw);
        for (int j = 0; j < cfg.S; ++j) truth.W[std::size_t(s) * cfg.A + a](j, i) = draw[j];
      }
  for (int i = 0; i < cfg.d; ++i)
    for (int s = 0; s < cfg.S; ++s)
      for (int a = 0; a < cfg.A; ++a)
        truth.theta[std::size_t(s) * cfg.A + a](i) = reward_scale * gen.beta(beta_a, beta_b);
  return truth;
}

// Hard instance: floor(S/2) independent two-state blocks (low state rewards 0,
// high state rewards 1).  At indicator context e_i the designated action
// a*_i = i mod A keeps the high state with probability 1/2 + epsilon; every
// other action (and every action from the low state's return transition) uses
// the epsilon-free or epsilon-fixed probabilities below.  Odd S adds one
// absorbing zero-reward state.  Under the logit link the two in-block logits
// are (log((1/2+eps)/(1/2-eps)), 0); cross-block logits are -40, which leaves
// cross-block mass below 1e-17 (exactly 0 under the quadratic link).
inline cmdp_truth generate_hard_instance(int S, int A, int H, int d, double epsilon,
                                         link_kind link) {
  require(S >= 2 && A >= 1 && H >= 1 && d >= 1, errc::precondition,
          "generate_hard_instance: S>=2, A>=1, H>=1, d>=1 required");
  require(epsilon > 0.0 && epsilon < 0.5, errc::precondition,
          "generate_hard_instance: epsilon must lie in (0, 1/2)");

  cmdp_truth truth;
  truth.S = S; truth.A = A; truth.d = d; truth.H = H;
  truth.link = {link, S};
  truth.W.assign(std::size_t(S) * A, Eigen::MatrixXd::Zero(S, d));
  truth.theta.assign(std::size_t(S) * A, Eigen::VectorXd::Zero(d));

  const int blocks = S / 2;
  const double p_hi = 0.5 + epsilon;
  const double c_star = std::log(p_hi / (1.0 - p_hi));  // logit of the boosted stay
  const double kFar = -40.0;                            // cross-block logit

  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      Eigen::MatrixXd& W = truth.W[std::size_t(s) * A + a];
      Eigen::VectorXd& th = truth.theta[std::size_t(s) * A + a];
      const int b = s / 2;
      const bool in_block = b < blocks && s < 2 * blocks;
      const bool high = in_block && (s % 2 == 1);
      if (high) th.setConstant(1.0);  // reward 1 at any context

      for (int i = 0; i < d; ++i) {
        const int designated = i % A;
        if (!in_block) {  // absorbing extra state
          if (link == link_kind::quadratic) {
            W(s, i) = 1.0;
          } else {
            for (int j = 0; j < S; ++j) W(j, i) = (j == s) ? 0.0 : kFar;
          }
          continue;
        }
        const int lo = 2 * b, hi = 2 * b + 1;
        // Probability that the next state is the high state of this block.
        double p_next_hi;
        if (high) p_next_hi = (a == designated) ? p_hi : 0.5;
        else      p_next_hi = p_hi;  // low state returns upward regardless of action
        if (link == link_kind::quadratic) {
          W(hi, i) = p_next_hi;
          W(lo, i) = 1.0 - p_next_hi;
        } else {
          const bool boosted = p_next_hi != 0.5;
          for (int j = 0; j < S; ++j) {
            if (j == hi)      W(j, i) = boosted ? c_star : 0.0;
            else if (j == lo) W(j, i) = 0.0;
            else              W(j, i) = kFar;
          }
        }
      }
    }
  return truth;
}

// ---------------------------------------------------------------------------
// Context sampling
// ---------------------------------------------------------------------------

// Stateful so the indicator-cycle source can advance e_1, e_2, ..., e_d, e_1...
class context_sampler {
 public:
  explicit context_sampler(const env_config& cfg) : cfg_(cfg) { cfg_.validate(); }

  Eigen::VectorXd sample(rng& gen) {
    Eigen::VectorXd x(cfg_.d);
    if (cfg_.context == context_kind::indicator_cycle) {
      x.setZero();
      x(cycle_pos_) = 1.0;
      cycle_pos_ = (cycle_pos_ + 1) % cfg_.d;
      return x;
    }
    std::vector<double> draw;
    gen.dirichlet(cfg_.concentration, draw);
    for (int i = 0; i < cfg_.d; ++i) x(i) = draw[i];
    return x;
  }

  int cycle_pos() const { return cycle_pos_; }
  void set_cycle_pos(int p) { cycle_pos_ = p % cfg_.d; }

 private:
  env_config cfg_;
  int cycle_pos_ = 0;
};

// ---------------------------------------------------------------------------
// Realization, rollout, exact values
// ---------------------------------------------------------------------------

inline contextual_mdp realize_mdp(const cmdp_truth& truth, const Eigen::VectorXd& x) {
  require(x.size() == truth.d, errc::dimension_mismatch, "realize_mdp: context length != d");
  require(x.allFinite(), errc::invalid_input, "realize_mdp: non-finite context");
  contextual_mdp m;
  m.S = truth.S; m.A = truth.A; m.H = truth.H; m.x = x;
  m.P.reserve(truth.W.size());
  m.r.reserve(truth.W.size());
  for (int s = 0; s < truth.S; ++s)
    for (int a = 0; a < truth.A; ++a) {
      m.P.push_back(predict_distribution(truth.link, truth.W_at(s, a), x));
      double rv = truth.theta_at(s, a).dot(x);
      if (rv < 0.0 || rv > 1.0) {
        ++m.clamp_count;
        rv = std::min(1.0, std::max(0.0, rv));
      }
      m.r.push_back(rv);
    }
  return m;
}

inline std::vector<trajectory_step> rollout(const contextual_mdp& m, const policy_table& pi,
                                            int s1, double sigma, rng& gen) {
  require(pi.H == m.H && pi.S == m.S, errc::dimension_mismatch,
          "rollout: policy shape != (H, S)");
  require(s1 >= 0 && s1 < m.S, errc::invalid_input, "rollout: start state out of range");
  std::vector<trajectory_step> traj;
  traj.reserve(std::size_t(m.H));
  int s = s1;
  for (int h = 0; h < m.H; ++h) {
    const int a = pi.at(h, s);
    require(a >= 0 && a < m.A, errc::invalid_input, "rollout: policy action out of range");
    const int s_next = gen.categorical(m.P_at(s, a));
    const double r_obs = m.r_at(s, a) + (sigma > 0.0 ? gen.normal(0.0, sigma) : 0.0);
    traj.push_back({h + 1, s, a, r_obs, s_next});
    s = s_next;
  }
  return traj;
}

struct value_solution {
  double v_star = 0.0;                    // optimal value from the start state
  std::optional<double> v_pi;             // value of the supplied policy, if any
  std::vector<double> Q;                  // optimal Q, index (h*S + s)*A + a
  std::vector<double> V;                  // optimal V, index h*S + s, h in [0,H]
  policy_table greedy;                    // an optimal policy (lowest-index argmax)

  double Q_at(int h, int s, int a, int S, int A) const {
    return Q[(std::size_t(h) * S + s) * A + a];
  }
};

// Exact finite-horizon backward induction on the true model.  Values are
// expectations, not sampled returns.  Start state is 0 by convention.
inline value_solution exact_values(const contextual_mdp& m,
                                   const policy_table* pi = nullptr, int s1 = 0) {
  const int S = m.S, A = m.A, H = m.H;
  value_solution out;
  out.Q.assign(std::size_t(H) * S * A, 0.0);
  out.V.assign(std::size_t(H + 1) * S, 0.0);
  out.greedy = policy_table(H, S);
  for (int h = H - 1; h >= 0; --h)
    for (int s = 0; s < S; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      int best_a = 0;
      for (int a = 0; a < A; ++a) {
        double q = m.r_at(s, a);
        const Eigen::VectorXd& p = m.P_at(s, a);
        for (int j = 0; j < S; ++j) q += p(j) * out.V[std::size_t(h + 1) * S + j];
        out.Q[(std::size_t(h) * S + s) * A + a] = q;
        if (q > best) { best = q; best_a = a; }
      }
      out.V[std::size_t(h) * S + s] = best;
      out.greedy.at(h, s) = best_a;
    }
  out.v_star = out.V[std::size_t(0) * S + s1];

  if (pi) {
    require(pi->H == H && pi->S == S, errc::dimension_mismatch,
            "exact_values: policy shape != (H, S)");
    std::vector<double> V(std::size_t(S), 0.0), Vn(std::size_t(S), 0.0);
    for (int h = H - 1; h >= 0; --h) {
      for (int s = 0; s < S; ++s) {
        const int a = pi->at(h, s);
        require(a >= 0 && a < A, errc::invalid_input, "exact_values: policy action out of range");
        double q = m.r_at(s, a);
        const Eigen::VectorXd& p = m.P_at(s, a);
        for (int j = 0; j < S; ++j) q += p(j) * V[std::size_t(j)];
        Vn[std::size_t(s)] = q;
      }
      std::swap(V, Vn);
    }
    out.v_pi = V[std::size_t(s1)];
  }
  return out;
}

// Worst-case weight norms realized by a truth; convenient defaults for the
// agent's bound parameters.
struct truth_bounds {
  double B = 0.0;    // max Frobenius norm of W*_{sa}
  double B_p = 0.0;  // max row norm of W*_{sa}
  double B_r = 0.0;  // max norm of theta*_{sa}
};

inline truth_bounds compute_bounds(const cmdp_truth& truth) {
  truth_bounds b;
  for (const auto& W : truth.W) {
    b.B = std::max(b.B, W.norm());
    for (int i = 0; i < W.rows(); ++i) b.B_p = std::max(b.B_p, W.row(i).norm());
  }
  for (const auto& th : truth.theta) b.B_r = std::max(b.B_r, th.norm());
  return b;
}

// ---------------------------------------------------------------------------
// Truth serialization
// ---------------------------------------------------------------------------

inline nlohmann::json truth_to_json(const cmdp_truth& truth) {
  nlohmann::json j;
  j["version"] = 1;
  j["kind"] = "truth";
  j["link"] = link_name(truth.link.kind);
  j["S"] = truth.S; j["A"] = truth.A; j["d"] = truth.d; j["H"] = truth.H;
  nlohmann::json Ws = nlohmann::json::array(), ths = nlohmann::json::array();
  for (const auto& W : truth.W) Ws.push_back(detail::mat_to_json(W));
  for (const auto& th : truth.theta) ths.push_back(detail::vec_to_json(th));
  j["W"] = Ws;
  j["theta"] = ths;
  return j;
}

inline cmdp_truth truth_from_json(const nlohmann::json& j) {
  require(j.value("kind", "") == std::string("truth"), errc::io_failure,
          "truth_from_json: not a truth file");
  require(j.value("version", 0) == 1, errc::io_failure, "truth_from_json: unknown version");
  cmdp_truth t;
  t.S = j.at("S").get<int>(); t.A = j.at("A").get<int>();
  t.d = j.at("d").get<int>(); t.H = j.at("H").get<int>();
  t.link = {j.at("link").get<std::string>() == "multinomial_logit"
                ? link_kind::multinomial_logit : link_kind::quadratic, t.S};
  const auto& Ws = j.at("W");
  const auto& ths = j.at("theta");
  require(int(Ws.size()) == t.S * t.A && int(ths.size()) == t.S * t.A, errc::io_failure,
          "truth_from_json: wrong number of state-action entries");
  for (const auto& w : Ws) t.W.push_back(detail::mat_from_json(w, t.S, t.d));
  for (const auto& th : ths) t.theta.push_back(detail::vec_from_json(th));
  return t;
}

}  // namespace cmdp
