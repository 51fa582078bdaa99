// Online estimators: Newton-step transition estimator, ridge reward estimator,
// and the online-to-confidence-set conversion.  Reference values come from
// independent oracles implemented here: a dense-grid + pattern-search solver
// for the per-step constrained objective, batch least-squares replays, and
// direct evaluation of the closed-form radius formulas.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "cmdp/estimator.hpp"
#include "cmdp/rng.hpp"

using namespace cmdp;

namespace {

link_function logit(int S) { return {link_kind::multinomial_logit, S}; }
link_function quad(int S) { return {link_kind::quadratic, S}; }

Vec vec1(double a) {
  Vec v(1);
  v << a;
  return v;
}

Vec random_simplex(rng& g, int n) {
  std::vector<double> conc(std::size_t(n), 1.0), out;
  g.dirichlet(conc, out);
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = out[std::size_t(i)];
  return v;
}

Vec random_unit_ball(rng& g, int n) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = g.normal();
  v /= v.norm();
  v *= std::pow(g.uniform(), 1.0 / n);
  return v;
}

Mat random_column_stochastic(rng& g, int S, int d) {
  Mat W(S, d);
  for (int j = 0; j < d; ++j) W.col(j) = random_simplex(g, S);
  return W;
}

Mat random_row_ball(rng& g, int S, int d, double B_p) {
  Mat W(S, d);
  for (int i = 0; i < S; ++i) W.row(i) = (B_p * random_unit_ball(g, d)).transpose();
  return W;
}

// Independent solver for one row of the per-step objective
//   min_{||w|| <= Bp}  0.5 (w-a)^T Z (w-a) + c^T (w-a)
// by dense grid scan followed by pattern-search refinement.  Deliberately
// shares no code with the production projected-gradient path.
Vec brute_force_row(const Mat& Z, const Vec& a, const Vec& c, double Bp) {
  const int n = int(a.size());
  auto f = [&](const Vec& w) {
    const Vec d = w - a;
    return 0.5 * d.dot(Z * d) + c.dot(d);
  };
  auto clip = [&](Vec w) {
    const double nn = w.norm();
    if (nn > Bp) w *= Bp / nn;
    return w;
  };
  Vec best = clip(a);
  double fbest = f(best);
  REQUIRE(n == 2);  // grid scan is written for the 2-d case used below
  const int N = 160;
  for (int i = 0; i <= N; ++i)
    for (int j = 0; j <= N; ++j) {
      Vec w(2);
      w << -Bp + 2.0 * Bp * i / N, -Bp + 2.0 * Bp * j / N;
      if (w.norm() > Bp) continue;
      const double fw = f(w);
      if (fw < fbest) {
        fbest = fw;
        best = w;
      }
    }
  double step = 2.0 * Bp / N;
  while (step > 1e-9) {
    bool improved = false;
    for (int dim = 0; dim < n; ++dim)
      for (double s : {step, -step}) {
        Vec cand = best;
        cand[dim] += s;
        cand = clip(cand);
        const double fc = f(cand);
        if (fc < fbest - 1e-16) {
          fbest = fc;
          best = cand;
          improved = true;
        }
      }
    if (!improved) step *= 0.5;
  }
  return best;
}

}  // namespace

// ---------------------------------------------------------------------------
// ONS estimator
// ---------------------------------------------------------------------------

TEST_CASE("zero context leaves the iterate unchanged") {
  ons_estimator e(logit(3), constraint_set::ball_rows(2.0), 2, 0.5);
  const Mat before = e.W_hat();
  const Mat Z_before = e.Z();
  e.update(Vec::Zero(2), 1);
  CHECK((e.W_hat() - before).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((e.Z() - Z_before).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(e.t() == 1);
}

TEST_CASE("tabular recovery reproduces the running mean") {
  // d=1, x=1, quadratic link, lambda=0 and the doubled design coefficient turn
  // the Newton step into the exact running mean of the one-hot outcomes.
  ons_settings s;
  s.eta = 1.0;
  s.lambda = 0.0;
  s.tabular_recovery = true;
  ons_estimator e(quad(2), constraint_set::simplex_columns(), 1, 1.0, s);
  const Vec x = vec1(1.0);
  e.update(x, 0);
  CHECK(e.W_hat()(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  e.update(x, 1);
  CHECK(e.W_hat()(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  e.update(x, 1);
  CHECK(e.W_hat()(0, 0) == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(e.W_hat()(1, 0) == doctest::Approx(2.0 / 3).epsilon(1e-12));
  CHECK(e.Z()(0, 0) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("updates match an independent brute-force solve of the step objective") {
  rng g(71);
  // Wide ball: the closed-form step stays feasible.  Tight ball: the
  // constrained path must activate.  Both must agree with the oracle.
  for (double B_p : {5.0, 0.5}) {
    const link_function link = logit(2);
    const auto cset = constraint_set::ball_rows(B_p);
    const double alpha = link_convexity(link, B_p, 1.0, 2).alpha;
    ons_settings s;
    s.eta = 1.0;
    ons_estimator e(link, cset, 2, alpha, s);

    Mat Z_ref = Mat::Identity(2, 2);  // lambda = 1
    Mat W_ref = Mat::Zero(2, 2);
    bool constrained_seen = false;
    for (int step = 0; step < 3; ++step) {
      const Vec x = random_unit_ball(g, 2);
      const int y = int(g.below(2));

      // Oracle replay: advance the design, then solve each row's subproblem.
      Vec grad = phi_gradient(link, W_ref * x);
      grad[y] -= 1.0;
      Z_ref += (s.eta * alpha / 2.0) * x * x.transpose();
      Mat W_next(2, 2);
      for (int i = 0; i < 2; ++i)
        W_next.row(i) =
            brute_force_row(Z_ref, W_ref.row(i).transpose(), s.eta * grad[i] * x, B_p)
                .transpose();
      if (!set_contains(cset, Mat(W_ref - s.eta * grad * (Z_ref.inverse() * x).transpose()),
                        1e-9))
        constrained_seen = true;
      W_ref = W_next;

      e.update(x, y);
      CHECK((e.W_hat() - W_ref).lpNorm<Eigen::Infinity>() < 1e-3);
      CHECK((e.Z() - Z_ref).lpNorm<Eigen::Infinity>() < 1e-12);
    }
    if (B_p == 0.5) CHECK(constrained_seen);
  }
}

TEST_CASE("design matrix replays as lambda*I plus scaled outer products") {
  rng g(72);
  ons_settings s;
  s.eta = 0.7;
  s.lambda = 2.5;
  const double alpha = 0.3;
  ons_estimator e(logit(3), constraint_set::ball_rows(1.0), 3, alpha, s);
  Mat acc = s.lambda * Mat::Identity(3, 3);
  for (int i = 0; i < 25; ++i) {
    const Vec x = random_unit_ball(g, 3);
    e.update(x, int(g.below(3)));
    acc += (s.eta * alpha / 2.0) * x * x.transpose();
    CHECK((e.Z() - acc).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((e.Z_inv() * e.Z() - Mat::Identity(3, 3)).norm() < 1e-8);
    CHECK(set_contains(e.constraints(), e.W_hat(), 1e-7));
  }
}

TEST_CASE("confidence radius matches hand-evaluated formulas") {
  // One observation with x=[1]: design grows to 1.5, tau_1 = log 40.
  ons_estimator e(quad(2), constraint_set::simplex_columns(), 1, 1.0);
  e.update(vec1(1.0), 0);
  const double tau1 = std::log(40.0);
  const double expect =
      1.0 + 8.0 + 2.0 * ((4.0 + 8.0 / 3.0) * tau1 + 4.0 * std::log(1.5));
  const double got = e.confidence_radius(1.0, 1.0, 0.1);
  CHECK(got == doctest::Approx(expect).epsilon(1e-12));
  CHECK(got == doctest::Approx(61.43).epsilon(1e-3));

  // Zero context: the design never moves, so the log-det term drops out.
  ons_estimator z(logit(2), constraint_set::ball_rows(1.0), 1, 1.0);
  z.update(vec1(0.0), 0);
  CHECK(z.confidence_radius(1.0, 1.0, 0.1) ==
        doctest::Approx(9.0 + 2.0 * (20.0 / 3.0) * tau1).epsilon(1e-12));

  // Preconditions: no data, or delta outside (0,1).
  ons_estimator fresh(logit(2), constraint_set::ball_rows(1.0), 1, 1.0);
  CHECK_THROWS_AS((void)fresh.confidence_radius(1.0, 1.0, 0.1), error);
  CHECK_THROWS_AS((void)e.confidence_radius(1.0, 1.0, 0.0), error);
}

TEST_CASE("confidence radius is nondecreasing along a trace") {
  rng g(73);
  ons_estimator e(logit(3), constraint_set::ball_rows(1.0), 3,
                  link_convexity(logit(3), 1.0, 1.0, 3).alpha);
  double prev = 0.0;
  for (int t = 0; t < 50; ++t) {
    e.update(random_unit_ball(g, 3), int(g.below(3)));
    const double gamma = e.confidence_radius(std::sqrt(3.0), 1.0, 0.1);
    CHECK(gamma >= prev - 1e-12);
    prev = gamma;
  }
}

TEST_CASE("transition width: zero context, cap, and plug-in value") {
  ons_estimator e(quad(4), constraint_set::simplex_columns(), 1, 1.0,
                  ons_settings{1.0, 2.0, false});
  CHECK(e.transition_ci(5.0, vec1(0.0), 1.0) == 0.0);
  CHECK(e.transition_ci(1e12, vec1(1.0), 1.0, /*capped=*/true) == 2.0);
  // Z = 2 (from lambda), x=1, gamma=4, beta=1, S=4: 1*2*2/sqrt(2).
  CHECK(e.transition_ci(4.0, vec1(1.0), 1.0) ==
        doctest::Approx(2.0 * 2.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS((void)e.transition_ci(-1.0, vec1(1.0), 1.0), error);
}

TEST_CASE("post-update iterate satisfies first-order optimality") {
  rng g(74);
  // Tight ball with a large step size so the projection is active often.
  const auto cset = constraint_set::ball_rows(0.3);
  const link_function link = logit(2);
  ons_settings s;
  s.eta = 2.0;
  ons_estimator e(link, cset, 2, link_convexity(link, 0.3, 1.0, 2).alpha, s);
  for (int step = 0; step < 20; ++step) {
    const Mat W_prev = e.W_hat();
    const Vec x = random_unit_ball(g, 2);
    const int y = int(g.below(2));
    Vec grad = phi_gradient(link, W_prev * x);
    grad[y] -= 1.0;
    e.update(x, y);
    // Gradient of the step objective at the returned point.
    const Mat G = (e.W_hat() - W_prev) * e.Z() + s.eta * grad * x.transpose();
    for (int probe = 0; probe < 100; ++probe) {
      const Mat W = random_row_ball(g, 2, 2, 0.3);
      CHECK(G.cwiseProduct(W - e.W_hat()).sum() >= -1e-6);
    }
  }
}

TEST_CASE("incremental log-determinant stays exact over 1000 updates") {
  rng g(75);
  ons_estimator e(logit(3), constraint_set::ball_rows(1.0), 3, 0.25,
                  ons_settings{1.0, 0.5, false});
  for (int i = 0; i < 1000; ++i) e.update(random_unit_ball(g, 3), int(g.below(3)));
  const double direct = std::log(e.Z().determinant());
  CHECK(std::abs(e.log_det_Z() - direct) < 1e-8);
  CHECK((e.Z_inv() * e.Z() - Mat::Identity(3, 3)).norm() < 1e-8);
}

TEST_CASE("estimate converges to the truth under the quadratic link") {
  rng g(76);
  const int S = 3, d = 3;
  const Mat W_star = random_column_stochastic(g, S, d);
  ons_estimator e(quad(S), constraint_set::simplex_columns(), d, 1.0);
  for (int t = 0; t < 5000; ++t) {
    const Vec x = random_simplex(g, d);
    const Vec p = W_star * x;
    std::vector<double> probs(p.data(), p.data() + S);
    e.update(x, int(g.categorical(probs)));
  }
  CHECK((e.W_hat() - W_star).norm() < 0.1);
}

TEST_CASE("confidence set covers the truth along logit traces") {
  // Reduced-size version of the coverage property: the bound is conservative,
  // so every (run, t) pair should be covered, far above the 1 - delta floor.
  rng g(77);
  const int S = 3, d = 3, runs = 30, steps = 300;
  const double B_p = 1.0, R = 1.0, delta = 0.1;
  const double alpha = link_convexity(logit(S), B_p, R, S).alpha;
  long covered = 0, total = 0;
  for (int run = 0; run < runs; ++run) {
    const Mat W_star = random_row_ball(g, S, d, B_p);
    const double B = std::sqrt(double(S)) * B_p;
    ons_estimator e(logit(S), constraint_set::ball_rows(B_p), d, alpha);
    for (int t = 0; t < steps; ++t) {
      const Vec x = random_unit_ball(g, d);
      const Vec p = phi_gradient(logit(S), W_star * x);
      std::vector<double> probs(p.data(), p.data() + S);
      e.update(x, int(g.categorical(probs)));
      const double gamma = e.confidence_radius(B, B_p * R, delta);
      covered += weighted_sq_distance(e.W_hat(), W_star, e.Z()) <= gamma ? 1 : 0;
      ++total;
    }
  }
  CHECK(double(covered) / double(total) >= 1.0 - delta);
}

TEST_CASE("zero ridge weight starts singular and recovers") {
  ons_settings s;
  s.lambda = 0.0;
  ons_estimator e(quad(2), constraint_set::simplex_columns(), 2, 1.0, s);
  CHECK(e.log_det_Z() == -std::numeric_limits<double>::infinity());
  Vec x1(2), x2(2);
  x1 << 1.0, 0.0;
  x2 << 0.0, 1.0;
  e.update(x1, 0);
  // Rank one: still singular, radius undefined (infinite).
  CHECK(e.confidence_radius(1.0, 1.0, 0.1) == std::numeric_limits<double>::infinity());
  e.update(x2, 1);
  CHECK(std::isfinite(e.log_det_Z()));
  CHECK((e.Z_inv() * e.Z() - Mat::Identity(2, 2)).norm() < 1e-8);
  // The initial log-det is still -inf, so the radius stays infinite: the
  // formula has no finite meaning without a ridge term.
  CHECK(e.confidence_radius(1.0, 1.0, 0.1) == std::numeric_limits<double>::infinity());
}

TEST_CASE("updates reject malformed inputs") {
  ons_estimator e(logit(2), constraint_set::ball_rows(1.0), 2, 0.25);
  CHECK_THROWS_AS(e.update(Vec::Zero(3), 0), error);
  CHECK_THROWS_AS(e.update(Vec::Zero(2), 2), error);
  CHECK_THROWS_AS(e.update(Vec::Zero(2), -1), error);
  Vec bad(2);
  bad << 1.0, std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(e.update(bad, 0), error);
  try {
    e.update(bad, 0);
  } catch (const error& err) {
    CHECK(err.code() == errc::invalid_input);
  }
}

TEST_CASE("checkpoint restores the estimator bit-for-bit") {
  rng g(78);
  ons_estimator a(logit(3), constraint_set::ball_rows(1.5, true), 2, 0.2,
                  ons_settings{0.9, 1.3, false});
  std::vector<std::pair<Vec, int>> trace;
  for (int i = 0; i < 50; ++i) trace.emplace_back(random_unit_ball(g, 2), int(g.below(3)));
  for (const auto& [x, y] : trace) a.update(x, y);

  ons_estimator b = ons_estimator::from_checkpoint(a.checkpoint());
  CHECK(b.t() == a.t());
  CHECK((b.W_hat() - a.W_hat()).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((b.Z() - a.Z()).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(b.log_det_Z() == a.log_det_Z());

  // Continued updates agree exactly: the restored state is the full state.
  for (int i = 0; i < 20; ++i) {
    const Vec x = random_unit_ball(g, 2);
    const int y = int(g.below(3));
    a.update(x, y);
    b.update(x, y);
    CHECK((b.W_hat() - a.W_hat()).lpNorm<Eigen::Infinity>() == 0.0);
  }

  nlohmann::json j = a.checkpoint();
  j["kind"] = "reward";
  CHECK_THROWS_AS((void)ons_estimator::from_checkpoint(j), error);
}

// ---------------------------------------------------------------------------
// Reward estimator
// ---------------------------------------------------------------------------

TEST_CASE("single ridge observation") {
  reward_estimator e(2, 1.0, 1.0);
  Vec x(2);
  x << 1.0, 0.0;
  e.update(x, 0.5);
  CHECK(e.theta_hat()[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(e.theta_hat()[1] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("zero rewards keep the estimate at zero") {
  rng g(81);
  reward_estimator e(3, 0.5, 1.0);
  for (int i = 0; i < 40; ++i) e.update(random_unit_ball(g, 3), 0.0);
  CHECK(e.theta_hat().lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("incremental ridge equals the batch solve") {
  rng g(82);
  const int d = 3, n = 40;
  const double lambda = 0.7;
  reward_estimator e(d, lambda, 1.0);
  Mat X(n, d);
  Vec r(n);
  for (int i = 0; i < n; ++i) {
    const Vec x = random_unit_ball(g, d);
    X.row(i) = x.transpose();
    r[i] = 2.0 * g.uniform() - 1.0;
    e.update(x, r[i]);
  }
  const Mat A = lambda * Mat::Identity(d, d) + X.transpose() * X;
  const Vec batch = A.llt().solve(X.transpose() * r);
  CHECK((e.theta_hat() - batch).lpNorm<Eigen::Infinity>() < 1e-9);
  CHECK((e.Zr_inv() * e.Zr() - Mat::Identity(d, d)).norm() < 1e-8);
  CHECK(std::abs(e.log_det_Zr() - std::log(A.determinant())) < 1e-8);
}

TEST_CASE("reward width: zero context, fresh state, plug-in, cap") {
  reward_estimator fresh(2, 1.0, 1.0);
  CHECK(fresh.ci(Vec::Zero(2), 0.1) == 0.0);
  // No data: det ratio is one, zeta = sqrt(lambda d) + sqrt(-log(delta)/2),
  // and the x-weighted norm under Zr = I is just ||x||.
  Vec e1(2);
  e1 << 1.0, 0.0;
  const double zeta0 = std::sqrt(2.0) + std::sqrt(-0.5 * std::log(0.1));
  CHECK(fresh.ci(e1, 0.1) == doctest::Approx(zeta0).epsilon(1e-12));

  // Design grown to e^4 in one dimension: zeta = 1 + sqrt(2) at delta = e^-2.
  reward_estimator one(1, 1.0, 1.0);
  one.update(vec1(std::sqrt(std::exp(4.0) - 1.0)), 0.3);
  const double deltar = std::exp(-2.0);
  const double width = one.ci(vec1(1.0), deltar);
  CHECK(width * std::exp(2.0) == doctest::Approx(1.0 + std::sqrt(2.0)).epsilon(1e-9));

  // Cap at B_r * R.
  reward_estimator capped(1, 4.0, 0.05);
  CHECK(capped.ci(vec1(1.0), 0.1, /*capped=*/true, 2.0) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK_THROWS_AS((void)capped.ci(vec1(1.0), 1.5), error);
}

TEST_CASE("reward checkpoint roundtrip") {
  rng g(83);
  reward_estimator a(2, 1.1, 0.8);
  for (int i = 0; i < 30; ++i) a.update(random_unit_ball(g, 2), g.uniform());
  reward_estimator b = reward_estimator::from_checkpoint(a.checkpoint());
  CHECK((b.theta_hat() - a.theta_hat()).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(b.t() == a.t());
  const Vec x = random_unit_ball(g, 2);
  a.update(x, 0.4);
  b.update(x, 0.4);
  CHECK((b.theta_hat() - a.theta_hat()).lpNorm<Eigen::Infinity>() == 0.0);
}

// ---------------------------------------------------------------------------
// Online-to-confidence-set conversion
// ---------------------------------------------------------------------------

TEST_CASE("conversion accumulators: trivial predictor and outer product") {
  conversion_tracker c(2, 2, 1.0, 1.0);
  for (int i = 0; i < 5; ++i) {
    Vec x(2);
    x << 0.3, 0.7;
    c.update(x, Mat::Zero(2, 2));
  }
  CHECK(c.XtC().lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(c.c_sq() == 0.0);
  const auto res = c.confidence(0.0, 0.1, 1.0);
  CHECK(res.center.lpNorm<Eigen::Infinity>() < 1e-15);

  conversion_tracker one(2, 2, 1.0, 1.0);
  Mat W(2, 2);
  W << 0.4, 0.0, 0.6, 0.0;
  Vec e1(2);
  e1 << 1.0, 0.0;
  one.update(e1, W);  // prediction W e1 = first column v
  Mat expect = Mat::Zero(2, 2);
  expect(0, 0) = 0.4;
  expect(0, 1) = 0.6;  // e1 v^T
  CHECK((one.XtC() - expect).lpNorm<Eigen::Infinity>() < 1e-15);
  CHECK(one.c_sq() == doctest::Approx(0.4 * 0.4 + 0.6 * 0.6).epsilon(1e-12));
}

TEST_CASE("conversion accumulators replay as batch matrices") {
  rng g(91);
  const int S = 3, d = 2, n = 20;
  conversion_tracker c(S, d, 0.8, 1.0);
  Mat X(n, d), C(n, S);
  for (int i = 0; i < n; ++i) {
    const Vec x = random_unit_ball(g, d);
    const Mat W = random_row_ball(g, S, d, 1.0);
    X.row(i) = x.transpose();
    C.row(i) = (W * x).transpose();
    c.update(x, W);
  }
  CHECK((c.XtC() - X.transpose() * C).lpNorm<Eigen::Infinity>() < 1e-10);
  CHECK((c.Z() - (0.8 * Mat::Identity(d, d) + X.transpose() * X)).lpNorm<Eigen::Infinity>() <
        1e-10);
  CHECK(c.c_sq() == doctest::Approx(C.squaredNorm()).epsilon(1e-12));
}

TEST_CASE("regret-to-radius formula at the origin") {
  conversion_tracker c(2, 2, 1.0, 1.0);
  const auto res = c.confidence(0.0, 0.1, 1.0);
  const double gamma_prime = 1.0 + 8.0 * std::log(10.0 * std::sqrt(1604.0));
  CHECK(gamma_prime == doctest::Approx(48.94).epsilon(1e-3));
  // No data: radius is gamma' plus the ridge term lambda B^2 S.
  CHECK(res.radius == doctest::Approx(gamma_prime + 2.0).epsilon(1e-12));
  CHECK_FALSE(res.degenerate);
  CHECK_THROWS_AS((void)c.confidence(-1.0, 0.1, 1.0), error);
}

TEST_CASE("confidence set contains the truth along an online-gradient trace") {
  // External learner: projected online gradient descent on the sequential
  // losses l_i(W) = 0.5*||W x_i||^2 - (W x_i)_{y_i}, with the textbook regret
  // bound 1.5 * D * G * sqrt(t) fed to the conversion as B_t.
  rng g(92);
  const int S = 2, d = 2, steps = 50;
  const double lambda = 1.0;
  const double D = std::sqrt(2.0 * d);  // feasible-set diameter
  const double G = 2.0;                 // loss-gradient norm bound
  const Mat W_star = random_column_stochastic(g, S, d);
  const double B = std::sqrt(double(d));
  const auto cset = constraint_set::simplex_columns();

  conversion_tracker c(S, d, lambda, 1.0);
  Mat W = project_to_set(cset, Mat::Zero(S, d));
  for (int t = 1; t <= steps; ++t) {
    const Vec x = random_simplex(g, d);
    c.update(x, W);  // prediction made before seeing the outcome

    const Vec p = W_star * x;
    std::vector<double> probs(p.data(), p.data() + S);
    const int y = int(g.categorical(probs));

    const auto res = c.confidence(1.5 * D * G * std::sqrt(double(t)), 0.1, B);
    CHECK(weighted_sq_distance(W_star, res.center, c.Z()) <= res.radius);

    // Learner step on the revealed loss.
    Vec grad_y = W * x;
    grad_y[y] -= 1.0;
    const double step = D / (G * std::sqrt(double(t)));
    W = project_to_set(cset, Mat(W - step * grad_y * x.transpose()));
  }
}

TEST_CASE("negative raw radius is clamped and flagged") {
  // A predictor that fits pure noise poorly drives the fit term above the
  // regret term when B_t is tiny and the predictions are large.
  conversion_tracker c(1, 1, 1.0, 1.0);
  Mat W(1, 1);
  W << 40.0;
  for (int i = 0; i < 30; ++i) c.update(vec1(1.0), W);
  const auto res = c.confidence(0.0, 0.5, 0.1);
  CHECK(res.degenerate);
  CHECK(res.radius == 0.0);
}

TEST_CASE("conversion rejects shape mismatches") {
  conversion_tracker c(2, 3, 1.0, 1.0);
  CHECK_THROWS_AS(c.update(Vec::Zero(2), Mat::Zero(2, 3)), error);
  CHECK_THROWS_AS(c.update(Vec::Zero(3), Mat::Zero(3, 3)), error);
}
