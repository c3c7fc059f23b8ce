#include <doctest.h>

#include <cmath>
#include <random>

#include "imvc/error.hpp"
#include "imvc/model.hpp"

using namespace imvc;

namespace {

ViewParams zeroed_view(int d_in, int width, int layers) {
  ViewParams vp;
  vp.w_embed = Matrix::Zero(d_in, width);
  vp.b_embed = Matrix::Zero(1, width);
  for (int l = 0; l < layers; ++l) {
    LayerParams lp;
    lp.w_query = Matrix::Zero(width, width);
    lp.w_key = Matrix::Zero(width, width);
    lp.w_value = Matrix::Zero(width, width);
    lp.w_out = Matrix::Zero(width, width);
    lp.b_out = Matrix::Zero(1, width);
    vp.layers.push_back(lp);
  }
  return vp;
}

AdjacencyGraph full_graph(int n) { return {Matrix::Ones(n, n), n}; }

MultiViewDataset blob2(int n, int d, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  MultiViewDataset ds;
  Matrix x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = gauss(rng) + (i % 2) * 4.0;
  ds.views.push_back(x);
  ds.mask = IntMatrix::Ones(n, 1);
  return ds;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("embed with identity pieces reproduces the input") {
  ViewParams vp = zeroed_view(3, 3, 0);
  vp.w_embed = Matrix::Identity(3, 3);
  Matrix x(2, 3);
  x << 1, 2, 3, 4, 5, 6;
  const Matrix z = embed(x, Matrix::Identity(2, 2), vp);
  CHECK((z - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("embed imputes a missing row from its neighbor") {
  // Sample 0 is missing (zero features); its adjacency row points at sample 1.
  Matrix x(2, 2);
  x << 0, 0, 3, 1;
  Matrix a_norm(2, 2);
  a_norm << 0, 0.5, 0, 1.0;
  ViewParams vp = zeroed_view(2, 2, 0);
  vp.w_embed << 1, 0, 0, 2;
  vp.b_embed << 0.1, 0.2;
  const Matrix z = embed(x, a_norm, vp);
  // z_0 = 0.5 * x_1 * W + b = (1.5, 1.0) + (0.1, 0.2)
  CHECK(z(0, 0) == doctest::Approx(1.6));
  CHECK(z(0, 1) == doctest::Approx(1.2));
  CHECK(z(0, 0) != doctest::Approx(vp.b_embed(0, 0)));  // imputation is not bias-only
}

TEST_CASE("embed with an all-zero adjacency row returns the bias") {
  Matrix x(2, 2);
  x << 1, 2, 3, 4;
  Matrix a_norm = Matrix::Zero(2, 2);
  ViewParams vp = zeroed_view(2, 2, 0);
  vp.w_embed = Matrix::Identity(2, 2);
  vp.b_embed << 7, 8;
  const Matrix z = embed(x, a_norm, vp);
  CHECK(z(0, 0) == 7.0);
  CHECK(z(1, 1) == 8.0);
}

TEST_CASE("build_view_graph composes similarity, top-k and refinement") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss;
  Matrix z(6, 2);
  for (Eigen::Index i = 0; i < 6; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) z(i, j) = gauss(rng);
  AdjacencyGraph global = top_k_binarize(rbf_similarity(z, 2.0) * 0.9, 3);
  IntVector mask = IntVector::Ones(6);
  SUBCASE("complete view: refinement is a no-op") {
    auto [s_hat, a] = build_view_graph(z, 2.0, 3, global, mask);
    const AdjacencyGraph direct = top_k_binarize(rbf_similarity(z, 2.0), 3);
    CHECK((a.values - direct.values).cwiseAbs().maxCoeff() == 0.0);
    CHECK((s_hat - rbf_similarity(z, 2.0)).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("identical rows are mutually nearest for K >= 2") {
    Matrix z2 = z;
    z2.row(1) = z2.row(0);
    auto [s_hat, a] = build_view_graph(z2, 2.0, 2, global, mask);
    CHECK(s_hat(0, 1) == 1.0);
    CHECK(a.values(0, 1) == 1.0);
    CHECK(a.values(1, 0) == 1.0);
  }
  SUBCASE("per-row ones count stays K after refinement") {
    IntVector holes = mask;
    holes(2) = 0;
    holes(4) = 0;
    auto [s_hat, a] = build_view_graph(z, 2.0, 3, global, holes);
    for (Eigen::Index i = 0; i < 6; ++i) CHECK(a.values.row(i).sum() == 3.0);
  }
}

TEST_CASE("attention_logits is the Gram matrix under identity projections") {
  Matrix h(3, 2);
  h << 1, 0, 0, 1, 1, 1;
  const Matrix e = attention_logits(h, Matrix::Identity(2, 2), Matrix::Identity(2, 2));
  CHECK((e - h * h.transpose()).cwiseAbs().maxCoeff() == 0.0);
  // scaling h by c scales logits by c^2
  const Matrix e2 = attention_logits(2.0 * h, Matrix::Identity(2, 2), Matrix::Identity(2, 2));
  CHECK((e2 - 4.0 * e).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("masked_softmax closed forms") {
  SUBCASE("single neighbor gets weight 1") {
    Matrix logits(1, 2);
    logits << 5.0, -3.0;
    AdjacencyGraph a{(Matrix(1, 2) << 0, 1).finished(), 1};
    const Matrix w = masked_softmax(logits, a);
    CHECK(w(0, 0) == 0.0);
    CHECK(w(0, 1) == 1.0);
  }
  SUBCASE("equal logits over two neighbors split evenly") {
    Matrix logits = Matrix::Constant(1, 2, 0.7);
    AdjacencyGraph a{Matrix::Ones(1, 2), 2};
    const Matrix w = masked_softmax(logits, a);
    CHECK(w(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("logits (1,2) give sigma = 1/(1+e)") {
    Matrix logits(1, 2);
    logits << 1.0, 2.0;
    AdjacencyGraph a{Matrix::Ones(1, 2), 2};
    const Matrix w = masked_softmax(logits, a);
    CHECK(w(0, 0) == doctest::Approx(0.2689414213699951).epsilon(1e-12));
    CHECK(w(0, 1) == doctest::Approx(1.0 - 0.2689414213699951).epsilon(1e-12));
  }
  SUBCASE("rows sum to one over neighbors, zero off support") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> gauss;
    Matrix logits(5, 5);
    for (Eigen::Index i = 0; i < 5; ++i)
      for (Eigen::Index j = 0; j < 5; ++j) logits(i, j) = 30.0 * gauss(rng);
    AdjacencyGraph a{Matrix::Identity(5, 5), 1};
    a.values(0, 3) = 1.0;
    a.values(2, 4) = 1.0;
    const Matrix w = masked_softmax(logits, a);
    for (Eigen::Index i = 0; i < 5; ++i) {
      CHECK(w.row(i).sum() == doctest::Approx(1.0).epsilon(1e-9));
      for (Eigen::Index j = 0; j < 5; ++j)
        if (a.values(i, j) == 0.0) CHECK(w(i, j) == 0.0);
    }
  }
  SUBCASE("all-zero adjacency row is a contract violation") {
    AdjacencyGraph a{Matrix::Zero(2, 2), 0};
    CHECK_THROWS_AS(masked_softmax(Matrix::Zero(2, 2), a), ContractError);
  }
}

TEST_CASE("encoder_layer with zero weights is the identity") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss;
  Matrix h(4, 3);
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 3; ++j) h(i, j) = gauss(rng);
  const ViewParams vp = zeroed_view(3, 3, 2);
  Matrix out = h;
  for (const auto& lp : vp.layers) out = encoder_layer(out, full_graph(4), lp);
  CHECK((out - h).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("encoder_layer matches a scalar hand trace") {
  // N=2, width 1: H = (a, b)^T, all weights scalars.
  const double a = 1.0, b = 2.0, q = 0.5, k = 0.25, v = 2.0, w = 0.5, c = 0.1;
  Matrix h(2, 1);
  h << a, b;
  LayerParams lp;
  lp.w_query = Matrix::Constant(1, 1, q);
  lp.w_key = Matrix::Constant(1, 1, k);
  lp.w_value = Matrix::Constant(1, 1, v);
  lp.w_out = Matrix::Constant(1, 1, w);
  lp.b_out = Matrix::Constant(1, 1, c);
  const Matrix out = encoder_layer(h, full_graph(2), lp);

  auto row = [&](double hi) {
    const double e_self = (hi * q) * (hi * k);
    const double e_a = (hi * q) * (a * k);
    const double e_b = (hi * q) * (b * k);
    (void)e_self;
    const double m = std::max(e_a, e_b);
    const double wa = std::exp(e_a - m), wb = std::exp(e_b - m);
    const double mix = (wa * a + wb * b) / (wa + wb);
    const double pre = mix * v * w + c;
    return std::max(pre, 0.0) + hi;
  };
  CHECK(out(0, 0) == doctest::Approx(row(a)).epsilon(1e-12));
  CHECK(out(1, 0) == doctest::Approx(row(b)).epsilon(1e-12));
}

TEST_CASE("attention rows are local to their neighborhoods") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> gauss;
  Matrix h(5, 2);
  for (Eigen::Index i = 0; i < 5; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) h(i, j) = gauss(rng);
  AdjacencyGraph a{Matrix::Identity(5, 5), 1};
  a.values(0, 1) = 1.0;
  a.values(2, 3) = 1.0;
  const Matrix wq = Matrix::Identity(2, 2), wk = Matrix::Identity(2, 2);
  const Matrix before = masked_softmax(attention_logits(h, wq, wk), a);
  Matrix h2 = h;
  h2.row(4) += Matrix::Constant(1, 2, 3.0);  // sample 4 is nobody's neighbor except itself
  const Matrix after = masked_softmax(attention_logits(h2, wq, wk), a);
  for (Eigen::Index i = 0; i < 4; ++i)
    CHECK((before.row(i) - after.row(i)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward obeys shape contracts and is deterministic") {
  MultiViewDataset ds = blob2(10, 3, 42);
  ds.views.push_back(ds.views[0] * 0.5);
  ds.mask = IntMatrix::Ones(10, 2);
  TrainConfig cfg;
  cfg.n_clusters = 2;
  cfg.n_neighbors = 3;
  cfg.n_mask_edges = 3;
  cfg.hidden_dims = {7, 4};
  cfg.n_gat_layers = 2;
  cfg.seed = 11;
  const AdjacencyGraph a_global =
      fuse_global_graph(ds.views, ds.mask, cfg.rbf_scale, cfg.n_neighbors);
  const ModelParams params = init_params(ds, cfg);
  const ForwardCache c1 = forward(ds, a_global, params, cfg);
  const ForwardCache c2 = forward(ds, a_global, params, cfg);
  REQUIRE(c1.high_level.size() == 2);
  CHECK(c1.high_level[0].rows() == 10);
  CHECK(c1.high_level[0].cols() == 7);
  CHECK(c1.high_level[1].cols() == 4);
  CHECK(c1.primary[0].cols() == 7);
  CHECK(c1.s_hat[0].rows() == 10);
  CHECK(c1.layer_features[0].size() == 3);  // input plus two layers
  for (int v = 0; v < 2; ++v) {
    CHECK((c1.high_level[v] - c2.high_level[v]).cwiseAbs().maxCoeff() == 0.0);
    CHECK(c1.high_level[v].allFinite());
  }
}

TEST_CASE("forward with zeroed encoder reduces to the embedding") {
  MultiViewDataset ds = blob2(8, 3, 7);
  TrainConfig cfg;
  cfg.n_clusters = 2;
  cfg.n_neighbors = 3;
  cfg.n_mask_edges = 3;
  cfg.hidden_dims = {5};
  cfg.n_gat_layers = 2;
  const AdjacencyGraph a_global =
      fuse_global_graph(ds.views, ds.mask, cfg.rbf_scale, cfg.n_neighbors);
  ModelParams params = init_params(ds, cfg);
  for (auto& lp : params.views[0].layers) {
    lp.w_query.setZero();
    lp.w_key.setZero();
    lp.w_value.setZero();
    lp.w_out.setZero();
    lp.b_out.setZero();
  }
  const ForwardCache cache = forward(ds, a_global, params, cfg);
  const Matrix expected = (normalize_adjacency(a_global) * ds.views[0]) *
                              params.views[0].w_embed +
                          Matrix::Ones(8, 1) * params.views[0].b_embed;
  CHECK((cache.high_level[0] - expected).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((cache.primary[0] - expected).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("init_params dimensions follow the config") {
  MultiViewDataset ds = blob2(6, 4, 1);
  TrainConfig cfg;
  cfg.n_clusters = 2;
  cfg.hidden_dims = {9};
  cfg.n_gat_layers = 3;
  const ModelParams params = init_params(ds, cfg);
  CHECK(params.views[0].w_embed.rows() == 4);
  CHECK(params.views[0].w_embed.cols() == 9);
  CHECK(params.views[0].layers.size() == 3);
  CHECK(params.views[0].layers[0].w_query.rows() == 9);
  const double bound = 1.0 / std::sqrt(4.0);
  CHECK(params.views[0].w_embed.cwiseAbs().maxCoeff() <= bound);

  SUBCASE("without the embedding layer the encoder works at raw width") {
    TrainConfig cfg2 = cfg;
    cfg2.toggles.embed = false;
    const ModelParams p2 = init_params(ds, cfg2);
    CHECK_FALSE(p2.views[0].has_embed());
    CHECK(p2.views[0].layers[0].w_query.rows() == 4);
  }
}

}  // TEST_SUITE
