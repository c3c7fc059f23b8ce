#include "imvc/trainer.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "imvc/autodiff.hpp"
#include "imvc/error.hpp"

namespace imvc {

namespace {

using nlohmann::json;

constexpr int kWarmStartIters = 5;
constexpr std::uint64_t kKmeansSeedOffset = 1000003;

int resolve_clusters(const MultiViewDataset& ds, const TrainConfig& cfg) {
  if (cfg.n_clusters > 0) return cfg.n_clusters;
  if (!ds.labels) throw ArgumentError("n_clusters not set and dataset has no labels");
  std::set<int> distinct;
  for (Eigen::Index i = 0; i < ds.labels->size(); ++i) distinct.insert((*ds.labels)(i));
  return static_cast<int>(distinct.size());
}

Gradients zeros_like(const ModelParams& params) {
  Gradients g = params;
  g.for_each([](const std::string&, Matrix& m) { m.setZero(); });
  return g;
}

// Everything the backward pass treats as constant.
struct FrozenContext {
  Matrix a_norm;
  Matrix a_global;
  std::vector<Matrix> supports;      // refined A^v
  std::vector<Matrix> masks;         // graph masks (empty when rec disabled)
  Matrix centers;                    // empty when kl disabled
  Matrix p;                          // pseudo-labels
  std::vector<int> widths;           // per-view feature widths
  bool use_rec = false;
  bool use_con = false;
  bool use_kl = false;
};

FrozenContext make_context(const TrainState& state, const ForwardCache& cache,
                           const MultiViewDataset& ds, const TrainConfig& cfg) {
  FrozenContext ctx;
  const AdjacencyGraph a_global =
      fuse_global_graph(ds.views, ds.mask, cfg.rbf_scale, cfg.n_neighbors);
  ctx.a_global = a_global.values;
  ctx.a_norm = normalize_adjacency(a_global);
  for (const auto& g : cache.view_graphs) ctx.supports.push_back(g.values);
  for (const auto& h : cache.high_level) ctx.widths.push_back(static_cast<int>(h.cols()));

  ctx.use_rec = cfg.toggles.rec;
  if (ctx.use_rec) {
    for (const auto& h : cache.high_level) {
      const SimilarityMatrix a_hat = reconstructed_graph(h, cfg.rbf_scale);
      if (cfg.rec_variant == RecLossVariant::kMasked)
        ctx.masks.push_back(graph_mask(a_hat, cfg.n_mask_edges).values);
      else
        ctx.masks.push_back(Matrix::Ones(a_hat.rows(), a_hat.cols()));
    }
  }
  ctx.use_con = cfg.toggles.embed && cfg.alpha != 0.0 && ds.n_views() >= 2;
  ctx.use_kl = cfg.toggles.kl && cfg.beta != 0.0;
  if (ctx.use_kl) {
    if (state.cluster.centers.size() == 0)
      throw ContractError("compute_gradients: cluster state not initialized");
    ctx.centers = state.cluster.centers;
    ctx.p = state.cluster.p;
  }
  return ctx;
}

struct TapeLayer {
  ad::Var wq, wk, wv, wo, bo;
};
struct TapeView {
  ad::Var we, be;
  bool has_embed = false;
  std::vector<TapeLayer> layers;
};

std::vector<TapeView> register_params(ad::Tape& tape, const ModelParams& params) {
  std::vector<TapeView> out;
  for (const auto& vp : params.views) {
    TapeView tv;
    tv.has_embed = vp.has_embed();
    if (tv.has_embed) {
      tv.we = tape.parameter(vp.w_embed);
      tv.be = tape.parameter(vp.b_embed);
    }
    for (const auto& lp : vp.layers) {
      TapeLayer tl;
      tl.wq = tape.parameter(lp.w_query);
      tl.wk = tape.parameter(lp.w_key);
      tl.wv = tape.parameter(lp.w_value);
      tl.wo = tape.parameter(lp.w_out);
      tl.bo = tape.parameter(lp.b_out);
      tv.layers.push_back(tl);
    }
    out.push_back(std::move(tv));
  }
  return out;
}

// Builds the total-loss tape at `params` with `ctx` frozen. Returns the loss
// values; when `grads` is non-null also runs backward and fills them in.
LossBreakdown run_tape(const ModelParams& params, const FrozenContext& ctx,
                       const MultiViewDataset& ds, const TrainConfig& cfg, Gradients* grads) {
  const int v_count = ds.n_views();
  const double n = static_cast<double>(ds.n_samples());
  ad::Tape tape;
  std::vector<TapeView> tp = register_params(tape, params);

  std::vector<ad::Var> s_hats, highs;
  for (int v = 0; v < v_count; ++v) {
    const auto vi = static_cast<size_t>(v);
    ad::Var z;
    if (tp[vi].has_embed) {
      ad::Var ax = tape.constant(ctx.a_norm * ds.views[vi]);
      z = tape.add_row_vector(tape.matmul(ax, tp[vi].we), tp[vi].be);
    } else {
      z = tape.constant(ds.views[vi]);
    }
    if (ctx.use_con) s_hats.push_back(tape.rbf_similarity(z, cfg.rbf_scale));
    ad::Var h = z;
    for (const TapeLayer& tl : tp[vi].layers) {
      ad::Var logits = tape.matmul_nt(tape.matmul(h, tl.wq), tape.matmul(h, tl.wk));
      ad::Var attn = tape.masked_softmax(logits, ctx.supports[vi]);
      ad::Var pre = tape.add_row_vector(
          tape.matmul(tape.matmul(tape.matmul(attn, h), tl.wv), tl.wo), tl.bo);
      h = tape.add(tape.relu(pre), h);
    }
    highs.push_back(h);
  }

  LossBreakdown out;
  ad::Var total = tape.constant(Matrix::Zero(1, 1));

  if (ctx.use_rec) {
    ad::Var rec;
    for (int v = 0; v < v_count; ++v) {
      const auto vi = static_cast<size_t>(v);
      ad::Var a_hat = tape.rbf_similarity(highs[vi], cfg.rbf_scale);
      ad::Var term = tape.masked_squared_error(a_hat, ctx.masks[vi], ctx.a_global, 1.0 / n);
      rec = (v == 0) ? term : tape.add(rec, term);
    }
    rec = tape.scale(rec, 1.0 / static_cast<double>(v_count));
    out.rec = tape.scalar(rec);
    total = tape.add(total, rec);
  }

  if (ctx.use_con) {
    std::vector<ad::Var> units, selfs;
    for (int v = 0; v < v_count; ++v) {
      units.push_back(tape.row_normalize(s_hats[static_cast<size_t>(v)]));
      selfs.push_back(tape.matmul_nt(units.back(), units.back()));
    }
    ad::Var con;
    bool first = true;
    for (int v = 0; v < v_count; ++v) {
      for (int w = 0; w < v_count; ++w) {
        if (w == v) continue;
        ad::Var cross =
            tape.matmul_nt(units[static_cast<size_t>(v)], units[static_cast<size_t>(w)]);
        ad::Var term = tape.graph_contrast(cross, selfs[static_cast<size_t>(v)], cfg.temperature);
        con = first ? term : tape.add(con, term);
        first = false;
      }
    }
    out.con = tape.scalar(con);
    total = tape.add(total, tape.scale(con, cfg.alpha));
  }

  if (ctx.use_kl) {
    ad::Var kl;
    Eigen::Index offset = 0;
    for (int v = 0; v < v_count; ++v) {
      const auto vi = static_cast<size_t>(v);
      const Matrix block = ctx.centers.middleCols(offset, ctx.widths[vi]);
      offset += ctx.widths[vi];
      ad::Var q = tape.student_t_assign(highs[vi], block);
      ad::Var term = tape.kl_divergence(q, ctx.p);
      kl = (v == 0) ? term : tape.add(kl, term);
    }
    out.kl = tape.scalar(kl);
    total = tape.add(total, tape.scale(kl, cfg.beta));
  }

  out.total = out.rec + cfg.alpha * out.con + cfg.beta * out.kl;
  if (!std::isfinite(out.rec)) throw std::runtime_error("non-finite reconstruction loss");
  if (!std::isfinite(out.con)) throw std::runtime_error("non-finite contrastive loss");
  if (!std::isfinite(out.kl)) throw std::runtime_error("non-finite kl loss");

  if (grads != nullptr) {
    tape.backward(total);
    *grads = zeros_like(params);
    for (int v = 0; v < v_count; ++v) {
      const auto vi = static_cast<size_t>(v);
      if (tp[vi].has_embed) {
        grads->views[vi].w_embed = tape.gradient(tp[vi].we);
        grads->views[vi].b_embed = tape.gradient(tp[vi].be);
      }
      for (size_t l = 0; l < tp[vi].layers.size(); ++l) {
        grads->views[vi].layers[l].w_query = tape.gradient(tp[vi].layers[l].wq);
        grads->views[vi].layers[l].w_key = tape.gradient(tp[vi].layers[l].wk);
        grads->views[vi].layers[l].w_value = tape.gradient(tp[vi].layers[l].wv);
        grads->views[vi].layers[l].w_out = tape.gradient(tp[vi].layers[l].wo);
        grads->views[vi].layers[l].b_out = tape.gradient(tp[vi].layers[l].bo);
      }
    }
  }
  return out;
}

void check_finite(const LossBreakdown& losses, int epoch) {
  auto bad = [epoch](const char* term) {
    throw std::runtime_error("non-finite " + std::string(term) + " loss at epoch " +
                             std::to_string(epoch));
  };
  if (!std::isfinite(losses.rec)) bad("reconstruction");
  if (!std::isfinite(losses.con)) bad("contrastive");
  if (!std::isfinite(losses.kl)) bad("kl");
  if (!std::isfinite(losses.total)) bad("total");
}

void update_cluster(TrainState& state, const ForwardCache& cache, const TrainConfig& cfg,
                    int n_clusters) {
  const Matrix fused = fuse_features(cache.high_level);
  std::optional<Matrix> warm;
  if (state.cluster.centers.size() > 0) warm = state.cluster.centers;
  const int iters = warm ? kWarmStartIters : cfg.kmeans_max_iter;
  state.cluster.centers =
      kmeans_update(fused, n_clusters, warm, iters, cfg.seed + kKmeansSeedOffset);
  state.cluster.q = soft_labels(fused, state.cluster.centers);
  state.cluster.p = sharpen(state.cluster.q);
  state.cluster.q_views = view_soft_labels(cache.high_level, state.cluster.centers);
  state.cluster.view_dims.clear();
  for (const auto& h : cache.high_level)
    state.cluster.view_dims.push_back(static_cast<int>(h.cols()));
}

}  // namespace

Gradients compute_gradients(const TrainState& state, const ForwardCache& cache,
                            const MultiViewDataset& ds, const TrainConfig& cfg,
                            LossBreakdown* breakdown) {
  const FrozenContext ctx = make_context(state, cache, ds, cfg);
  Gradients grads;
  const LossBreakdown losses = run_tape(state.params, ctx, ds, cfg, &grads);
  if (breakdown != nullptr) *breakdown = losses;
  return grads;
}

LossBreakdown eval_loss_frozen(const ModelParams& params, const TrainState& state,
                               const ForwardCache& cache, const MultiViewDataset& ds,
                               const TrainConfig& cfg) {
  const FrozenContext ctx = make_context(state, cache, ds, cfg);
  return run_tape(params, ctx, ds, cfg, nullptr);
}

void adam_step(ModelParams& params, const Gradients& grads, AdamState& adam, double lr) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  adam.step += 1;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam.step));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam.step));
  for (size_t v = 0; v < params.views.size(); ++v) {
    auto update = [&](Matrix& p, const Matrix& g, Matrix& m, Matrix& sv) {
      m = kBeta1 * m + (1.0 - kBeta1) * g;
      sv = kBeta2 * sv + (1.0 - kBeta2) * g.cwiseProduct(g);
      const Matrix m_hat = m / bc1;
      const Matrix v_hat = sv / bc2;
      p -= lr * (m_hat.array() / (v_hat.array().sqrt() + kEps)).matrix();
    };
    ViewParams& pv = params.views[v];
    const ViewParams& gv = grads.views[v];
    ViewParams& mv = adam.m.views[v];
    ViewParams& vv = adam.v.views[v];
    if (pv.has_embed()) {
      update(pv.w_embed, gv.w_embed, mv.w_embed, vv.w_embed);
      update(pv.b_embed, gv.b_embed, mv.b_embed, vv.b_embed);
    }
    for (size_t l = 0; l < pv.layers.size(); ++l) {
      update(pv.layers[l].w_query, gv.layers[l].w_query, mv.layers[l].w_query,
             vv.layers[l].w_query);
      update(pv.layers[l].w_key, gv.layers[l].w_key, mv.layers[l].w_key, vv.layers[l].w_key);
      update(pv.layers[l].w_value, gv.layers[l].w_value, mv.layers[l].w_value,
             vv.layers[l].w_value);
      update(pv.layers[l].w_out, gv.layers[l].w_out, mv.layers[l].w_out, vv.layers[l].w_out);
      update(pv.layers[l].b_out, gv.layers[l].b_out, mv.layers[l].b_out, vv.layers[l].b_out);
    }
  }
}

TrainResult train(const MultiViewDataset& ds, const TrainConfig& cfg_in) {
  ds.validate();
  TrainConfig cfg = cfg_in;
  cfg.n_clusters = resolve_clusters(ds, cfg_in);
  cfg.validate(ds);

  const AdjacencyGraph a_global =
      fuse_global_graph(ds.views, ds.mask, cfg.rbf_scale, cfg.n_neighbors);

  TrainState state;
  state.params = init_params(ds, cfg);
  state.adam.m = zeros_like(state.params);
  state.adam.v = zeros_like(state.params);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const ForwardCache cache = forward(ds, a_global, state.params, cfg);
    if (cfg.toggles.kl) update_cluster(state, cache, cfg, cfg.n_clusters);

    LossBreakdown losses;
    const Gradients grads = compute_gradients(state, cache, ds, cfg, &losses);
    check_finite(losses, epoch);
    adam_step(state.params, grads, state.adam, cfg.learning_rate);

    EpochRecord record;
    record.epoch = epoch;
    record.losses = losses;
    if (ds.labels && !state.cluster.q_views.empty()) {
      const IntVector pred = final_assignment(state.cluster.q_views);
      record.metrics = evaluate(pred, *ds.labels);
    }
    state.history.push_back(std::move(record));
    state.epoch = epoch;
  }

  // Final forward with the trained parameters, then the view-summed
  // soft-label assignment.
  const ForwardCache cache = forward(ds, a_global, state.params, cfg);
  update_cluster(state, cache, cfg, cfg.n_clusters);
  IntVector labels = final_assignment(state.cluster.q_views);
  return TrainResult{std::move(state), std::move(labels)};
}

namespace {

void append_tensor(json& manifest, std::vector<const Matrix*>& order, const std::string& name,
                   const Matrix& m) {
  manifest["tensors"].push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  order.push_back(&m);
}

}  // namespace

void save_checkpoint(const TrainState& state, const std::string& path) {
  json manifest;
  manifest["format"] = "imvc-checkpoint-v1";
  manifest["step"] = state.adam.step;
  manifest["epoch"] = state.epoch;
  manifest["views"] = json::array();
  for (const auto& vp : state.params.views)
    manifest["views"].push_back(
        {{"has_embed", vp.has_embed()}, {"n_layers", vp.layers.size()}});
  manifest["view_dims"] = state.cluster.view_dims;
  manifest["tensors"] = json::array();

  std::vector<const Matrix*> order;
  const_cast<ModelParams&>(state.params).for_each([&](const std::string& n, Matrix& m) {
    append_tensor(manifest, order, "params." + n, m);
  });
  const_cast<Gradients&>(state.adam.m).for_each([&](const std::string& n, Matrix& m) {
    append_tensor(manifest, order, "adam_m." + n, m);
  });
  const_cast<Gradients&>(state.adam.v).for_each([&](const std::string& n, Matrix& m) {
    append_tensor(manifest, order, "adam_v." + n, m);
  });
  if (state.cluster.centers.size() > 0) {
    append_tensor(manifest, order, "cluster.centers", state.cluster.centers);
    append_tensor(manifest, order, "cluster.q", state.cluster.q);
    append_tensor(manifest, order, "cluster.p", state.cluster.p);
    for (size_t v = 0; v < state.cluster.q_views.size(); ++v)
      append_tensor(manifest, order, "cluster.q_view" + std::to_string(v),
                    state.cluster.q_views[v]);
  }

  manifest["history"] = json::array();
  for (const auto& rec : state.history) {
    json row = {{"epoch", rec.epoch},
                {"rec", rec.losses.rec},
                {"con", rec.losses.con},
                {"kl", rec.losses.kl},
                {"total", rec.losses.total}};
    if (rec.metrics)
      row["metrics"] = {rec.metrics->acc, rec.metrics->nmi, rec.metrics->ari};
    else
      row["metrics"] = nullptr;
    manifest["history"].push_back(std::move(row));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot write checkpoint " + path);
  const std::string header = manifest.dump();
  const std::uint64_t header_len = header.size();
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const Matrix* m : order)
    out.write(reinterpret_cast<const char*>(m->data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(m->size())));
}

TrainState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint " + path);
  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  json manifest;
  try {
    manifest = json::parse(header);
  } catch (const json::exception& e) {
    throw ParseError("malformed checkpoint manifest: " + std::string(e.what()));
  }
  if (manifest.value("format", "") != "imvc-checkpoint-v1")
    throw ParseError("unrecognized checkpoint format");

  TrainState state;
  state.adam.step = manifest.at("step").get<long>();
  state.epoch = manifest.at("epoch").get<int>();
  // Skeletons first; shapes come from the tensor records.
  for (const auto& view : manifest.at("views")) {
    ViewParams vp;
    if (view.at("has_embed").get<bool>()) {
      vp.w_embed = Matrix::Zero(1, 1);  // placeholder, resized below
      vp.b_embed = Matrix::Zero(1, 1);
    }
    vp.layers.resize(view.at("n_layers").get<size_t>());
    state.params.views.push_back(vp);
  }
  state.adam.m = state.params;
  state.adam.v = state.params;
  state.cluster.view_dims = manifest.value("view_dims", std::vector<int>{});

  std::map<std::string, Matrix*> slots;
  state.params.for_each([&](const std::string& n, Matrix& m) { slots["params." + n] = &m; });
  state.adam.m.for_each([&](const std::string& n, Matrix& m) { slots["adam_m." + n] = &m; });
  state.adam.v.for_each([&](const std::string& n, Matrix& m) { slots["adam_v." + n] = &m; });

  for (const auto& rec : manifest.at("tensors")) {
    const std::string name = rec.at("name").get<std::string>();
    const Eigen::Index rows = rec.at("rows").get<Eigen::Index>();
    const Eigen::Index cols = rec.at("cols").get<Eigen::Index>();
    Matrix buf(rows, cols);
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(buf.size())));
    if (!in) throw ParseError("checkpoint truncated at tensor " + name);
    auto it = slots.find(name);
    if (it != slots.end()) {
      *it->second = std::move(buf);
    } else if (name == "cluster.centers") {
      state.cluster.centers = std::move(buf);
    } else if (name == "cluster.q") {
      state.cluster.q = std::move(buf);
    } else if (name == "cluster.p") {
      state.cluster.p = std::move(buf);
    } else if (name.rfind("cluster.q_view", 0) == 0) {
      state.cluster.q_views.push_back(std::move(buf));
    } else {
      throw ParseError("unknown tensor '" + name + "' in checkpoint");
    }
  }

  for (const auto& row : manifest.at("history")) {
    EpochRecord rec;
    rec.epoch = row.at("epoch").get<int>();
    rec.losses.rec = row.at("rec").get<double>();
    rec.losses.con = row.at("con").get<double>();
    rec.losses.kl = row.at("kl").get<double>();
    rec.losses.total = row.at("total").get<double>();
    if (!row.at("metrics").is_null()) {
      const auto m = row.at("metrics").get<std::vector<double>>();
      rec.metrics = MetricTriple{m.at(0), m.at(1), m.at(2)};
    }
    state.history.push_back(std::move(rec));
  }
  return state;
}

void write_history_csv(const std::vector<EpochRecord>& history, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ParseError("cannot write " + path);
  out << "epoch,rec,con,kl,total,acc,nmi,ari\n";
  char buf[64];
  auto fmt = [&buf](double x) {
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
  };
  for (const auto& rec : history) {
    out << rec.epoch << ',' << fmt(rec.losses.rec) << ',' << fmt(rec.losses.con) << ','
        << fmt(rec.losses.kl) << ',' << fmt(rec.losses.total);
    if (rec.metrics)
      out << ',' << fmt(rec.metrics->acc) << ',' << fmt(rec.metrics->nmi) << ','
          << fmt(rec.metrics->ari);
    else
      out << ",,,";
    out << '\n';
  }
}

}  // namespace imvc
