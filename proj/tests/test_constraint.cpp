// Feasible sets: exact simplex / row-ball projection, membership tests, and
// the variational characterization of Euclidean projection.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cmdp/constraint.hpp"
#include "cmdp/rng.hpp"

using namespace cmdp;

namespace {
Eigen::VectorXd random_simplex_vec(rng& g, int n) {
  std::vector<double> conc(std::size_t(n), 1.0), out;
  g.dirichlet(conc, out);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = out[std::size_t(i)];
  return v;
}
}  // namespace

TEST_CASE("simplex projection fixes feasible points and known cases") {
  Eigen::VectorXd p(3);
  p << 0.2, 0.5, 0.3;
  const Eigen::VectorXd q = project_to_simplex(p);
  CHECK((q - p).lpNorm<Eigen::Infinity>() < 1e-15);

  // One dominant coordinate: everything else is clipped away.
  Eigen::VectorXd big(3);
  big << 5.0, 0.0, -1.0;
  const Eigen::VectorXd e1 = project_to_simplex(big);
  CHECK(e1[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(e1[1] == 0.0);
  CHECK(e1[2] == 0.0);

  // Symmetric shift: projection subtracts the mean excess uniformly.
  Eigen::VectorXd shifted(2);
  shifted << 0.9, 0.7;
  const Eigen::VectorXd s = project_to_simplex(shifted);
  CHECK(s[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(s[1] == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("simplex projection is the nearest feasible point") {
  rng g(11);
  for (int rep = 0; rep < 500; ++rep) {
    const int n = 2 + int(g.below(6));
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = 6.0 * g.uniform() - 3.0;
    const Eigen::VectorXd p = project_to_simplex(v);
    REQUIRE(p.minCoeff() >= 0.0);
    REQUIRE(std::abs(p.sum() - 1.0) <= 1e-12);
    // Variational inequality: <v - p, q - p> <= 0 for all feasible q.
    for (int probe = 0; probe < 20; ++probe) {
      const Eigen::VectorXd q = random_simplex_vec(g, n);
      CHECK((v - p).dot(q - p) <= 1e-10);
    }
  }
}

TEST_CASE("membership tests respect tolerances") {
  const auto simplex = constraint_set::simplex_columns();
  Eigen::MatrixXd W(2, 2);
  W << 0.25, 1.0, 0.75, 0.0;
  CHECK(set_contains(simplex, W));
  W(0, 0) = 0.30;  // column no longer sums to one
  CHECK_FALSE(set_contains(simplex, W));
  W(0, 0) = 0.25;
  W(1, 1) = -1e-12;  // inside tolerance
  CHECK(set_contains(simplex, W, 1e-9));
  W(1, 1) = -1e-3;
  CHECK_FALSE(set_contains(simplex, W));

  const auto ball = constraint_set::ball_rows(2.0);
  Eigen::MatrixXd V(2, 2);
  V << 1.0, 1.0, 2.0, 0.0;
  CHECK(set_contains(ball, V));  // row norms sqrt(2) and 2
  V(1, 0) = 2.5;
  CHECK_FALSE(set_contains(ball, V));

  const auto pinned = constraint_set::ball_rows(2.0, true);
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(3, 2);
  Z.row(0) << 1.0, 0.5;
  CHECK(set_contains(pinned, Z));
  Z(2, 0) = 0.1;  // last row must stay zero
  CHECK_FALSE(set_contains(pinned, Z));

  CHECK_THROWS_AS((void)constraint_set::ball_rows(0.0), error);
}

TEST_CASE("matrix projection lands in the set and is idempotent") {
  rng g(22);
  const auto simplex = constraint_set::simplex_columns();
  const auto ball = constraint_set::ball_rows(1.5, true);
  for (int rep = 0; rep < 200; ++rep) {
    Eigen::MatrixXd W(3, 4);
    for (int i = 0; i < W.size(); ++i) W.data()[i] = 8.0 * g.uniform() - 4.0;

    const Eigen::MatrixXd Ps = project_to_set(simplex, W);
    CHECK(set_contains(simplex, Ps, 1e-9));
    CHECK((project_to_set(simplex, Ps) - Ps).lpNorm<Eigen::Infinity>() < 1e-12);

    const Eigen::MatrixXd Pb = project_to_set(ball, W);
    CHECK(set_contains(ball, Pb, 1e-9));
    CHECK((project_to_set(ball, Pb) - Pb).lpNorm<Eigen::Infinity>() < 1e-12);
    // Radial rescaling is exact: an oversized row lands exactly on the sphere.
    for (int i = 0; i < 2; ++i) {
      if (W.row(i).norm() > 1.5) CHECK(Pb.row(i).norm() == doctest::Approx(1.5).epsilon(1e-12));
      else CHECK((Pb.row(i) - W.row(i)).norm() < 1e-15);
    }
    CHECK(Pb.row(2).lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("projection of a feasible matrix is the identity") {
  rng g(33);
  const auto simplex = constraint_set::simplex_columns();
  for (int rep = 0; rep < 100; ++rep) {
    Eigen::MatrixXd W(4, 3);
    for (int j = 0; j < 3; ++j) W.col(j) = random_simplex_vec(g, 4);
    CHECK((project_to_set(simplex, W) - W).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}
