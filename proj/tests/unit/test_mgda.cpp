#include "gdrift/mgda.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace gdrift;
using gdrift::testing::gaussian_vector;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

void expect_on_simplex(const SimplexWeights& w) {
  for (Eigen::Index i = 0; i < w.alpha.size(); ++i) EXPECT_GE(w.alpha[i], 0.0);
  EXPECT_NEAR(w.alpha.sum(), 1.0, 1e-12);
}

double objective(const Matrix& h, const Vector& a) { return a.dot(h * a); }

}  // namespace

TEST(GramMatrix, Examples) {
  const Vector g[2] = {vec({1, 0}), vec({0, 1})};
  EXPECT_EQ(gram_matrix(g), Matrix::Identity(2, 2));
  const Vector one[1] = {vec({3, 4})};
  EXPECT_EQ(gram_matrix(one)(0, 0), 25.0);
  const Vector bad[2] = {vec({1, 0}), vec({1, 0, 0})};
  EXPECT_THROW(gram_matrix(bad), std::invalid_argument);
}

TEST(GramMatrix, LoopOracleSymmetricPsd) {
  std::vector<Vector> g;
  for (int i = 0; i < 3; ++i) g.push_back(gaussian_vector(100 + i, 9));
  const Matrix h = gram_matrix(g);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 9; ++k) s += g[i][k] * g[j][k];
      EXPECT_NEAR(h(i, j), s, 1e-12);
      EXPECT_EQ(h(i, j), h(j, i));
    }
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(h)};
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-9);
}

TEST(ProjectToSimplex, Examples) {
  EXPECT_LE((project_to_simplex(vec({0.2, 0.3, 0.5})).alpha - vec({0.2, 0.3, 0.5})).norm(), 1e-15);
  EXPECT_LE((project_to_simplex(vec({0.6, 0.6})).alpha - vec({0.5, 0.5})).norm(), 1e-15);
  const Vector p = project_to_simplex(vec({2, 0})).alpha;
  EXPECT_EQ(p, vec({1, 0}));
  // Grid check: no simplex point on a 0.001 grid is closer to v.
  double best = 1e300;
  for (int i = 0; i <= 1000; ++i) {
    const double a = i / 1000.0;
    best = std::min(best, (vec({a, 1 - a}) - vec({2, 0})).norm());
  }
  EXPECT_LE((p - vec({2, 0})).norm(), best + 1e-12);
  EXPECT_THROW(project_to_simplex(Vector()), std::invalid_argument);
}

TEST(ProjectToSimplex, RandomInputsLandOnSimplex) {
  for (int s = 0; s < 200; ++s) {
    const Vector v = gaussian_vector(s, 1 + s % 5) * 3.0;
    const SimplexWeights w = project_to_simplex(v);
    expect_on_simplex(w);
    // Optimality: v - alpha is constant on the support and no larger off it.
    double theta = 0.0;
    bool first = true;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (w.alpha[i] > 0.0) {
        if (first) theta = v[i] - w.alpha[i];
        EXPECT_NEAR(v[i] - w.alpha[i], theta, 1e-12);
        first = false;
      }
    }
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (w.alpha[i] == 0.0) EXPECT_LE(v[i], theta + 1e-12);
    }
  }
}

TEST(SolveSimplexQp, Examples) {
  const Matrix flat = Matrix::Constant(2, 2, 3.0);
  EXPECT_EQ(solve_simplex_qp(flat).alpha, vec({0.5, 0.5}));
  const Vector orth[2] = {vec({1, 0}), vec({0, 1})};
  EXPECT_LE((solve_simplex_qp(gram_matrix(orth)).alpha - vec({0.5, 0.5})).norm(), 1e-9);
  const Vector g = vec({0.3, -1.2, 0.7});
  const Vector par[2] = {g, 2.0 * g};
  EXPECT_EQ(solve_simplex_qp(gram_matrix(par)).alpha, vec({1, 0}));
  Matrix nan = Matrix::Identity(2, 2);
  nan(0, 1) = std::nan("");
  EXPECT_THROW(solve_simplex_qp(nan), std::invalid_argument);
}

TEST(SolveSimplexQp, AgreesWithClosedFormForTwoObjectives) {
  for (int s = 0; s < 1000; ++s) {
    const Vector g1 = gaussian_vector(derive_seed(s, {1}), 8);
    const Vector g2 = gaussian_vector(derive_seed(s, {2}), 8) * (0.25 + (s % 7));
    const Vector g[2] = {g1, g2};
    const SimplexWeights pgd = solve_simplex_qp(gram_matrix(g));
    const SimplexWeights cf = two_objective_closed_form(g1, g2);
    EXPECT_LE((pgd.alpha - cf.alpha).cwiseAbs().maxCoeff(), 1e-6) << "seed " << s;
    expect_on_simplex(pgd);
  }
}

TEST(SolveSimplexQp, ThreeObjectivesBeatGridAndVertices) {
  for (int s = 0; s < 100; ++s) {
    std::vector<Vector> g;
    for (int i = 0; i < 3; ++i) g.push_back(gaussian_vector(derive_seed(s, {10, static_cast<std::uint64_t>(i)}), 5));
    const Matrix h = gram_matrix(g);
    const SimplexWeights w = solve_simplex_qp(h);
    expect_on_simplex(w);
    double grid = 1e300;
    for (int i = 0; i <= 100; ++i) {
      for (int j = 0; i + j <= 100; ++j) {
        grid = std::min(grid, objective(h, vec({i / 100.0, j / 100.0, (100 - i - j) / 100.0})));
      }
    }
    const double obj = objective(h, w.alpha);
    EXPECT_LE(obj, grid + 1e-6);
    EXPECT_LE(obj, h.diagonal().minCoeff() + 1e-8);
  }
}

TEST(SolveSimplexQp, ObjectiveNonIncreasingAcrossIterations) {
  std::vector<Vector> g;
  for (int i = 0; i < 4; ++i) g.push_back(gaussian_vector(300 + i, 6));
  const Matrix h = gram_matrix(g);
  double prev = 1e300;
  for (int iters = 1; iters <= 64; iters *= 2) {
    QpOptions o;
    o.max_iters = iters;
    o.tol = 0.0;
    const double obj = objective(h, solve_simplex_qp(h, o).alpha);
    EXPECT_LE(obj, prev + 1e-15);
    prev = obj;
  }
}

TEST(TwoObjectiveClosedForm, Examples) {
  const Vector g = vec({1, 2});
  EXPECT_EQ(two_objective_closed_form(g, g).alpha, vec({0.5, 0.5}));
  EXPECT_EQ(two_objective_closed_form(vec({1, 0}), vec({0, 1})).alpha, vec({0.5, 0.5}));
  EXPECT_EQ(two_objective_closed_form(vec({1, 0}), vec({3, 0})).alpha, vec({1, 0}));
  EXPECT_THROW(two_objective_closed_form(vec({0, 0}), vec({0, 0})), std::invalid_argument);
}

TEST(Coordinate, ZeroDriftAndZeroLambda) {
  const Vector f = gaussian_vector(5, 10);
  const Vector d = gaussian_vector(6, 10);
  const Coordination zero = coordinate(f, Vector::Zero(10), 3e-4);
  EXPECT_EQ(zero.weights.alpha, vec({0, 1}));
  EXPECT_EQ(zero.combined, Vector::Zero(10));
  const Coordination lam0 = coordinate(f, d, 0.0);
  EXPECT_EQ(lam0.weights.alpha, zero.weights.alpha);
  EXPECT_EQ(lam0.combined, zero.combined);
  EXPECT_THROW(coordinate(f, Vector::Zero(3), 1.0), std::invalid_argument);
}

TEST(Coordinate, AntiParallelConflictIsStationary) {
  const Vector g = gaussian_vector(7, 12);
  const Coordination c = coordinate(g, -g, 1.0);
  EXPECT_LE((c.weights.alpha - vec({0.5, 0.5})).norm(), 1e-9);
  EXPECT_LE(c.combined.norm(), 1e-9 * g.norm());
}

TEST(Coordinate, CombinedNormBound) {
  for (int s = 0; s < 200; ++s) {
    const Vector f = gaussian_vector(derive_seed(s, {20}), 7);
    const Vector d = gaussian_vector(derive_seed(s, {21}), 7);
    const double lambda = 0.1 * (1 + s % 13);
    const Coordination c = coordinate(f, d, lambda);
    EXPECT_LE(c.combined.norm(), std::max(f.norm(), lambda * d.norm()) * (1 + 1e-12));
    EXPECT_LE((c.combined - (c.weights.alpha[0] * f + c.weights.alpha[1] * lambda * d)).norm(), 1e-14 * f.norm());
  }
}
