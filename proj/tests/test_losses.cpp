#include <doctest.h>

#include <cmath>
#include <random>

#include "imvc/error.hpp"
#include "imvc/losses.hpp"

using namespace imvc;

namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                     double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = gauss(rng);
  return m;
}

// Per-sample row losses the gradient oracles differentiate.
double row_loss(const Matrix& h, const Matrix& selected, const Matrix& a_global, double t,
                int i) {
  const SimilarityMatrix a_hat = rbf_similarity(h, t);
  double sum = 0.0;
  for (Eigen::Index j = 0; j < h.rows(); ++j) {
    const double r = selected(i, j) * a_hat(i, j) - a_global(i, j);
    sum += r * r;
  }
  return sum;
}

// Central finite differences of the row loss w.r.t. h_i.
Vector fd_row_grad(const Matrix& h, const Matrix& selected, const Matrix& a_global, double t,
                   int i, double step = 1e-5) {
  Vector g(h.cols());
  for (Eigen::Index c = 0; c < h.cols(); ++c) {
    Matrix hi = h, lo = h;
    hi(i, c) += step;
    lo(i, c) -= step;
    g(c) = (row_loss(hi, selected, a_global, t, i) - row_loss(lo, selected, a_global, t, i)) /
           (2.0 * step);
  }
  return g;
}

double rel_err(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-12});
}

AdjacencyGraph random_graph(int n, int k, std::mt19937_64& rng) {
  return top_k_binarize(rbf_similarity(random_matrix(n, 3, rng), 2.0), k);
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("reconstructed_graph is the RBF similarity over features") {
  Matrix h(3, 2);
  h << 0, 0, 1, 1, 0, 0;
  const SimilarityMatrix a_hat = reconstructed_graph(h, 2.0);
  CHECK(a_hat(0, 2) == 1.0);  // identical rows
  CHECK(a_hat(0, 0) == 1.0);  // diagonal
  CHECK(a_hat(0, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));  // dist^2 = 2, t = 2
}

TEST_CASE("graph_mask selects per-row top-k") {
  SUBCASE("saturation: k=N on positive entries marks everything") {
    const GraphMask m = graph_mask(Matrix::Constant(3, 3, 0.2), 3);
    CHECK(m.values.sum() == 9.0);
  }
  SUBCASE("row (1,.9,.1) with k=2") {
    Matrix a_hat(1, 3);
    a_hat << 1.0, 0.9, 0.1;
    const GraphMask m = graph_mask(a_hat, 2);
    CHECK(m.values(0, 0) == 1.0);
    CHECK(m.values(0, 1) == 1.0);
    CHECK(m.values(0, 2) == 0.0);
  }
  SUBCASE("masking the masked graph is idempotent in support") {
    std::mt19937_64 rng(2);
    const SimilarityMatrix a_hat = rbf_similarity(random_matrix(6, 2, rng), 2.0);
    const GraphMask m1 = graph_mask(a_hat, 3);
    const GraphMask m2 = graph_mask(m1.values.cwiseProduct(a_hat), 3);
    CHECK((m1.values - m2.values).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("zero entries are never selected") {
    Matrix a_hat(1, 3);
    a_hat << 0.0, 0.4, 0.0;
    const GraphMask m = graph_mask(a_hat, 2);
    CHECK(m.values.sum() == 1.0);  // min(k, #positive) ones
    CHECK(m.values(0, 1) == 1.0);
  }
  SUBCASE("ties break to the lowest column") {
    Matrix a_hat(1, 3);
    a_hat << 0.5, 0.5, 0.5;
    const GraphMask m = graph_mask(a_hat, 1);
    CHECK(m.values(0, 0) == 1.0);
  }
}

TEST_CASE("masked_rec_loss closed forms") {
  SUBCASE("perfect reconstruction gives zero") {
    std::mt19937_64 rng(3);
    const AdjacencyGraph a_global = random_graph(5, 2, rng);
    const std::vector<SimilarityMatrix> a_hats{a_global.values};
    CHECK(masked_rec_loss(a_hats, a_global, 3) == 0.0);
  }
  SUBCASE("2x2 hand-computed instance") {
    // A_hat all ones, target identity, k=1: each row keeps column 0 only.
    const AdjacencyGraph a_global{Matrix::Identity(2, 2), 1};
    const std::vector<SimilarityMatrix> a_hats{Matrix::Ones(2, 2)};
    CHECK(masked_rec_loss(a_hats, a_global, 1) == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("replicating the same view V times leaves the mean unchanged") {
    std::mt19937_64 rng(4);
    const AdjacencyGraph a_global = random_graph(6, 2, rng);
    const SimilarityMatrix a_hat = rbf_similarity(random_matrix(6, 3, rng), 2.0);
    const double once = masked_rec_loss({a_hat}, a_global, 2);
    const double thrice = masked_rec_loss({a_hat, a_hat, a_hat}, a_global, 2);
    CHECK(thrice == doctest::Approx(once).epsilon(1e-15));
  }
}

TEST_CASE("traditional_rec_loss closed forms") {
  SUBCASE("epsilon off-support entries") {
    std::mt19937_64 rng(5);
    const AdjacencyGraph a_global = random_graph(4, 2, rng);
    const double eps = 1e-3;
    Matrix a_hat = a_global.values;
    int off_support = 0;
    for (Eigen::Index i = 0; i < 4; ++i)
      for (Eigen::Index j = 0; j < 4; ++j)
        if (a_global.values(i, j) == 0.0) {
          a_hat(i, j) = eps;
          ++off_support;
        }
    const double expected = off_support * eps * eps / 4.0;
    CHECK(traditional_rec_loss({a_hat}, a_global) == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("N=1 reduces to one squared residual") {
    const AdjacencyGraph a_global{Matrix::Ones(1, 1), 1};
    const std::vector<SimilarityMatrix> a_hats{Matrix::Constant(1, 1, 0.3)};
    CHECK(traditional_rec_loss(a_hats, a_global) == doctest::Approx(0.49).epsilon(1e-15));
  }
  SUBCASE("masked equals traditional at k=N") {
    std::mt19937_64 rng(6);
    const AdjacencyGraph a_global = random_graph(7, 3, rng);
    const SimilarityMatrix a_hat = rbf_similarity(random_matrix(7, 2, rng), 2.0);
    CHECK(masked_rec_loss({a_hat}, a_global, 7) == traditional_rec_loss({a_hat}, a_global));
  }
}

TEST_CASE("grad_traditional matches finite differences") {
  SUBCASE("identical features give a zero gradient") {
    const Matrix h = Matrix::Ones(4, 3);
    std::mt19937_64 rng(7);
    const AdjacencyGraph a_global = random_graph(4, 2, rng);
    CHECK(grad_traditional(h, a_global, 2.0, 1).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("N=2 scalar instance at rel err < 1e-6") {
    Matrix h(2, 1);
    h << 0.0, 1.0;
    const AdjacencyGraph a_global{Matrix::Identity(2, 2), 1};
    const Matrix all = Matrix::Ones(2, 2);
    const Vector g = grad_traditional(h, a_global, 2.0, 0);
    const Vector fd = fd_row_grad(h, all, a_global.values, 2.0, 0);
    CHECK(rel_err(g, fd) < 1e-6);
    // hand value: (4/t) * A01^2 * (h1 - h0) with A01 = e^{-1/2}
    CHECK(g(0) == doctest::Approx(2.0 * std::exp(-1.0)).epsilon(1e-12));
  }
  SUBCASE("random instances at rel err < 1e-4") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 10;
      const Matrix h = random_matrix(n, 3, rng);
      const AdjacencyGraph a_global = random_graph(n, 3, rng);
      const Matrix all = Matrix::Ones(n, n);
      for (int i : {0, 4, 9}) {
        const Vector g = grad_traditional(h, a_global, 2.0, i);
        const Vector fd = fd_row_grad(h, all, a_global.values, 2.0, i);
        CHECK(rel_err(g, fd) < 1e-4);
      }
    }
  }
}

TEST_CASE("grad_masked matches finite differences with the mask frozen") {
  SUBCASE("k=N reproduces the traditional gradient bitwise") {
    std::mt19937_64 rng(9);
    const int n = 8;
    const Matrix h = random_matrix(n, 4, rng);
    const AdjacencyGraph a_global = random_graph(n, 3, rng);
    for (int i = 0; i < n; ++i) {
      const Vector masked = grad_masked(h, a_global, 2.0, n, i);
      const Vector traditional = grad_traditional(h, a_global, 2.0, i);
      CHECK((masked - traditional).cwiseAbs().maxCoeff() == 0.0);
    }
  }
  SUBCASE("identical features give a zero gradient") {
    const Matrix h = Matrix::Ones(5, 2);
    std::mt19937_64 rng(10);
    const AdjacencyGraph a_global = random_graph(5, 2, rng);
    CHECK(grad_masked(h, a_global, 2.0, 2, 0).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("random instances at rel err < 1e-4") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 10, k = 3;
      const Matrix h = random_matrix(n, 3, rng);
      const AdjacencyGraph a_global = random_graph(n, 3, rng);
      const Matrix frozen = graph_mask(rbf_similarity(h, 2.0), k).values;
      for (int i : {0, 5, 9}) {
        const Vector g = grad_masked(h, a_global, 2.0, k, i);
        const Vector fd = fd_row_grad(h, frozen, a_global.values, 2.0, i);
        CHECK(rel_err(g, fd) < 1e-4);
      }
    }
  }
}

TEST_CASE("masked_rec_grad_h matches full-matrix finite differences") {
  std::mt19937_64 rng(12);
  const int n = 7;
  const Matrix h = random_matrix(n, 3, rng);
  const AdjacencyGraph a_global = random_graph(n, 2, rng);
  const Matrix frozen = graph_mask(rbf_similarity(h, 2.0), 3).values;
  const Matrix analytic = masked_rec_grad_h(h, frozen, a_global.values, 2.0);
  const double step = 1e-5;
  Matrix fd(n, 3);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index c = 0; c < 3; ++c) {
      Matrix hi = h, lo = h;
      hi(i, c) += step;
      lo(i, c) -= step;
      fd(i, c) = (masked_rec_term(rbf_similarity(hi, 2.0), frozen, a_global.values) -
                  masked_rec_term(rbf_similarity(lo, 2.0), frozen, a_global.values)) /
                 (2.0 * step);
    }
  CHECK((analytic - fd).norm() / std::max(1.0, fd.norm()) < 1e-6);
}

TEST_CASE("mask bounds the repulsive terms; attractive coefficients are nonpositive") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 12, k = 4;
    const Matrix h = random_matrix(n, 3, rng);
    const AdjacencyGraph a_global = random_graph(n, 3, rng);
    const SimilarityMatrix a_hat = rbf_similarity(h, 2.0);
    const GraphMask mask = graph_mask(a_hat, k);
    for (int i = 0; i < n; ++i) {
      int repulsive_masked = 0, informative = 0;
      for (int j = 0; j < n; ++j) {
        const bool in_graph = a_global.values(i, j) != 0.0;
        if (in_graph) {
          ++informative;
          if (mask.values(i, j) != 0.0) {
            CHECK((a_hat(i, j) - 1.0) * a_hat(i, j) <= 0.0);
          }
        } else if (mask.values(i, j) != 0.0) {
          ++repulsive_masked;
        }
      }
      CHECK(repulsive_masked <= k);
      // traditional loss touches every non-edge
      CHECK(n - informative == n - static_cast<int>(a_global.values.row(i).sum()));
    }
  }
}

TEST_CASE("contrastive_loss closed forms and properties") {
  SUBCASE("two views, two samples, all rows identical") {
    const Matrix s = Matrix::Ones(2, 2);
    const double loss = contrastive_loss({s, s}, 0.5);
    CHECK(loss == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("per-term limit log(#negatives) as tau grows") {
    std::mt19937_64 rng(14);
    const int n = 5;
    const SimilarityMatrix s0 = rbf_similarity(random_matrix(n, 3, rng), 2.0);
    const SimilarityMatrix s1 = rbf_similarity(random_matrix(n, 3, rng), 2.0);
    const double limit = 2.0 * std::log(2.0 * (n - 1));  // two ordered pairs
    double prev_gap = std::numeric_limits<double>::infinity();
    for (double tau : {1.0, 10.0, 100.0, 1000.0}) {
      const double gap = std::abs(contrastive_loss({s0, s1}, tau) - limit);
      CHECK(gap < prev_gap);
      prev_gap = gap;
    }
  }
  SUBCASE("swapping view order leaves the loss unchanged") {
    std::mt19937_64 rng(15);
    const SimilarityMatrix s0 = rbf_similarity(random_matrix(4, 2, rng), 2.0);
    const SimilarityMatrix s1 = rbf_similarity(random_matrix(4, 2, rng), 2.0);
    CHECK(contrastive_loss({s0, s1}, 0.5) ==
          doctest::Approx(contrastive_loss({s1, s0}, 0.5)).epsilon(1e-12));
  }
  SUBCASE("invariant under joint row-and-column permutation") {
    std::mt19937_64 rng(16);
    const int n = 5;
    const SimilarityMatrix s0 = rbf_similarity(random_matrix(n, 3, rng), 2.0);
    const SimilarityMatrix s1 = rbf_similarity(random_matrix(n, 3, rng), 2.0);
    std::vector<int> perm{2, 0, 4, 1, 3};
    auto permute = [&](const SimilarityMatrix& s) {
      SimilarityMatrix p(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) p(i, j) = s(perm[i], perm[j]);
      return p;
    };
    CHECK(contrastive_loss({permute(s0), permute(s1)}, 0.5) ==
          doctest::Approx(contrastive_loss({s0, s1}, 0.5)).epsilon(1e-9));
  }
  SUBCASE("N=1 is a contract violation") {
    CHECK_THROWS_AS(contrastive_loss({Matrix::Ones(1, 1), Matrix::Ones(1, 1)}, 0.5),
                    ContractError);
  }
  SUBCASE("zero rows behave as cosine 0") {
    Matrix s0 = Matrix::Zero(2, 2);
    s0(1, 0) = 1.0;
    const Matrix s1 = Matrix::Ones(2, 2);
    // row 0 of view 0 is all-zero: its positive-pair cosine is 0, negatives
    // e^{d/tau} with d in {0, cos}, all finite
    CHECK(std::isfinite(contrastive_loss({s0, s1}, 0.5)));
  }
}

TEST_CASE("kl_loss closed forms") {
  Matrix p(2, 2);
  p << 1, 0, 0.5, 0.5;
  SUBCASE("KL(P||P) is zero") { CHECK(kl_loss(p, {p, p}) == 0.0); }
  SUBCASE("row (1,0) against (0.5,0.5) contributes log 2") {
    Matrix q(2, 2);
    q << 0.5, 0.5, 0.5, 0.5;
    Matrix p_single(2, 2);
    p_single << 1, 0, 0.5, 0.5;
    const double loss = kl_loss(p_single, {q});
    CHECK(loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("nonnegative on random distributions") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
      Matrix pr = random_matrix(4, 3, rng).cwiseAbs().array() + 0.01;
      Matrix qr = random_matrix(4, 3, rng).cwiseAbs().array() + 0.01;
      for (Eigen::Index i = 0; i < 4; ++i) {
        pr.row(i) /= pr.row(i).sum();
        qr.row(i) /= qr.row(i).sum();
      }
      CHECK(kl_loss(pr, {qr}) >= 0.0);
    }
  }
  SUBCASE("non-normalized rows are a contract violation") {
    Matrix bad(1, 2);
    bad << 0.7, 0.7;
    Matrix good(1, 2);
    good << 0.5, 0.5;
    CHECK_THROWS_AS(kl_loss(bad, {good}), ContractError);
    CHECK_THROWS_AS(kl_loss(good, {bad}), ContractError);
  }
}

TEST_CASE("total_loss composes the affine combination") {
  CHECK(total_loss(1.5, 2.0, 3.0, 0.0, 0.0).total == 1.5);
  CHECK(total_loss(1.0, 2.0, 3.0, 1.0, 1.0).total == 6.0);
  const LossBreakdown out = total_loss(0.5, 0.25, 0.125, 2.0, 4.0);
  CHECK(out.total == doctest::Approx(0.5 + 2.0 * 0.25 + 4.0 * 0.125).epsilon(1e-15));
  CHECK(out.rec == 0.5);
  CHECK(out.con == 0.25);
  CHECK(out.kl == 0.125);
}

}  // TEST_SUITE
