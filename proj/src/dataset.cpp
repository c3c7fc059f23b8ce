#include "imvc/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "imvc/error.hpp"

namespace imvc {

namespace fs = std::filesystem;
using nlohmann::json;

void MultiViewDataset::validate() const {
  if (views.empty()) throw ContractError("dataset has no views");
  const int n = n_samples();
  const int v_count = n_views();
  for (int v = 0; v < v_count; ++v) {
    if (views[static_cast<size_t>(v)].rows() != n)
      throw DimensionError("view " + std::to_string(v) + " has " +
                           std::to_string(views[static_cast<size_t>(v)].rows()) +
                           " rows, expected " + std::to_string(n));
  }
  if (mask.rows() != n || mask.cols() != v_count)
    throw DimensionError("mask must be " + std::to_string(n) + "x" + std::to_string(v_count));
  for (int i = 0; i < n; ++i) {
    int available = 0;
    for (int v = 0; v < v_count; ++v) {
      const int m = mask(i, v);
      if (m != 0 && m != 1) throw ContractError("mask entries must be 0 or 1");
      available += m;
    }
    if (available == 0)
      throw ContractError("sample " + std::to_string(i) + " has no views");
  }
  for (int v = 0; v < v_count; ++v)
    for (int i = 0; i < n; ++i)
      if (mask(i, v) == 0 && views[static_cast<size_t>(v)].row(i).cwiseAbs().sum() != 0.0)
        throw ContractError("masked-out row " + std::to_string(i) + " of view " +
                            std::to_string(v) + " is not zero");
  if (labels && labels->size() != n)
    throw DimensionError("labels length " + std::to_string(labels->size()) + " != N");
}

void TrainConfig::validate(const MultiViewDataset& ds) const {
  const int n = ds.n_samples();
  if (n_neighbors <= 0 || n_neighbors > n)
    throw ArgumentError("n_neighbors must be in [1, N]");
  if (n_mask_edges <= 0 || n_mask_edges > n_neighbors)
    throw ArgumentError("n_mask_edges must be in [1, n_neighbors]");
  if (n_clusters <= 0 || n_clusters > n)
    throw ArgumentError("n_clusters must be in [1, N]");
  if (rbf_scale <= 0) throw ArgumentError("rbf_scale must be positive");
  if (temperature <= 0) throw ArgumentError("temperature must be positive");
  if (alpha < 0 || beta < 0) throw ArgumentError("alpha/beta must be nonnegative");
  if (learning_rate <= 0) throw ArgumentError("learning_rate must be positive");
  if (epochs < 0) throw ArgumentError("epochs must be nonnegative");
  if (n_gat_layers <= 0) throw ArgumentError("n_gat_layers must be positive");
  if (kmeans_max_iter <= 0) throw ArgumentError("kmeans_max_iter must be positive");
  if (!hidden_dims.empty() && static_cast<int>(hidden_dims.size()) != ds.n_views())
    throw ArgumentError("hidden_dims must list one width per view");
  for (int h : hidden_dims)
    if (h <= 0) throw ArgumentError("hidden dims must be positive");
}

namespace {

// Shortest round-trip decimal form.
std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& tok, const std::string& where) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || errno == ERANGE)
    throw ParseError("bad number '" + tok + "' in " + where);
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

Matrix read_csv_matrix(const fs::path& file, const std::string& what) {
  std::ifstream in(file);
  if (!in) throw ParseError("cannot open " + file.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  size_t width = 0;
  int row_idx = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto toks = split_csv_line(line);
    std::vector<double> row;
    row.reserve(toks.size());
    for (const auto& t : toks)
      row.push_back(parse_double(t, what + " row " + std::to_string(row_idx)));
    if (rows.empty()) {
      width = row.size();
    } else if (row.size() != width) {
      throw ParseError(what + " row " + std::to_string(row_idx) + " has " +
                       std::to_string(row.size()) + " columns, expected " +
                       std::to_string(width));
    }
    rows.push_back(std::move(row));
    ++row_idx;
  }
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < width; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

void write_csv_matrix(const Matrix& m, const fs::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw ParseError("cannot write " + file.string());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

// Round half to even for fractional missing counts.
long long round_half_even(double x) {
  const double f = std::floor(x);
  const double frac = x - f;
  const long long lo = static_cast<long long>(f);
  if (frac > 0.5) return lo + 1;
  if (frac < 0.5) return lo;
  return (lo % 2 == 0) ? lo : lo + 1;
}

}  // namespace

MultiViewDataset load_dataset(const std::string& path) {
  const fs::path dir(path);
  const fs::path meta_path = dir / "meta.json";
  std::ifstream meta_in(meta_path);
  if (!meta_in) throw ParseError("cannot open manifest " + meta_path.string());
  json meta;
  try {
    meta_in >> meta;
  } catch (const json::exception& e) {
    throw ParseError("malformed manifest " + meta_path.string() + ": " + e.what());
  }

  MultiViewDataset ds;
  const int v_count = meta.at("n_views").get<int>();
  const int n = meta.at("n_samples").get<int>();
  const auto dims = meta.at("view_dims").get<std::vector<int>>();
  if (static_cast<int>(dims.size()) != v_count)
    throw ParseError("manifest view_dims length != n_views");

  for (int v = 0; v < v_count; ++v) {
    const std::string name = "view_" + std::to_string(v) + ".csv";
    Matrix m = read_csv_matrix(dir / name, name);
    if (m.rows() != n)
      throw DimensionError(name + " has " + std::to_string(m.rows()) + " rows, expected " +
                           std::to_string(n));
    if (m.cols() != dims[static_cast<size_t>(v)])
      throw DimensionError(name + " has " + std::to_string(m.cols()) + " columns, expected " +
                           std::to_string(dims[static_cast<size_t>(v)]));
    ds.views.push_back(std::move(m));
  }

  if (meta.value("has_mask", false)) {
    Matrix m = read_csv_matrix(dir / "mask.csv", "mask.csv");
    ds.mask = m.cast<int>();
  } else {
    ds.mask = IntMatrix::Ones(n, v_count);
  }
  if (meta.value("has_labels", false)) {
    Matrix m = read_csv_matrix(dir / "labels.csv", "labels.csv");
    if (m.cols() != 1) throw ParseError("labels.csv must have one column");
    ds.labels = m.col(0).cast<int>();
  }
  ds.validate();
  return ds;
}

void save_dataset(const MultiViewDataset& ds, const std::string& path) {
  ds.validate();
  const fs::path dir(path);
  fs::create_directories(dir);
  json meta;
  meta["n_samples"] = ds.n_samples();
  meta["n_views"] = ds.n_views();
  std::vector<int> dims;
  for (int v = 0; v < ds.n_views(); ++v) dims.push_back(ds.view_dim(v));
  meta["view_dims"] = dims;
  meta["has_mask"] = true;
  meta["has_labels"] = ds.labels.has_value();
  std::ofstream meta_out(dir / "meta.json", std::ios::trunc);
  meta_out << meta.dump(2) << '\n';

  for (int v = 0; v < ds.n_views(); ++v)
    write_csv_matrix(ds.views[static_cast<size_t>(v)],
                     dir / ("view_" + std::to_string(v) + ".csv"));
  write_csv_matrix(ds.mask.cast<double>(), dir / "mask.csv");
  if (ds.labels) write_csv_matrix(ds.labels->cast<double>(), dir / "labels.csv");
}

MultiViewDataset simulate_missing(const MultiViewDataset& complete, double delta,
                                  std::uint64_t rng_seed) {
  complete.validate();
  const int n = complete.n_samples();
  const int v_count = complete.n_views();
  if (delta < 0.0) throw ArgumentError("delta must be nonnegative");
  if (complete.mask.sum() != n * v_count)
    throw ContractError("simulate_missing needs a complete dataset (all-ones mask)");
  if (v_count < 2) throw ContractError("simulate_missing needs at least 2 views");
  const long long affected = round_half_even(delta * n);
  if (affected > n) throw ArgumentError("delta produces more affected samples than N");

  MultiViewDataset out = complete;
  std::mt19937_64 rng(rng_seed);

  // Partial Fisher-Yates: the first `affected` entries are the hit samples.
  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  for (long long i = 0; i < affected; ++i) {
    std::uniform_int_distribution<long long> pick(i, n - 1);
    std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(pick(rng))]);
  }

  std::vector<int> view_order(static_cast<size_t>(v_count));
  for (long long a = 0; a < affected; ++a) {
    const int sample = order[static_cast<size_t>(a)];
    std::uniform_int_distribution<int> count_dist(1, v_count - 1);
    const int removed = count_dist(rng);
    for (int v = 0; v < v_count; ++v) view_order[static_cast<size_t>(v)] = v;
    for (int r = 0; r < removed; ++r) {
      std::uniform_int_distribution<int> pick(r, v_count - 1);
      std::swap(view_order[static_cast<size_t>(r)], view_order[static_cast<size_t>(pick(rng))]);
      const int view = view_order[static_cast<size_t>(r)];
      out.mask(sample, view) = 0;
      out.views[static_cast<size_t>(view)].row(sample).setZero();
    }
  }
  out.validate();
  return out;
}

MultiViewDataset normalize_views(const MultiViewDataset& ds) {
  ds.validate();
  MultiViewDataset out = ds;
  const int n = ds.n_samples();
  for (int v = 0; v < ds.n_views(); ++v) {
    Matrix& x = out.views[static_cast<size_t>(v)];
    for (Eigen::Index col = 0; col < x.cols(); ++col) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i) {
        if (ds.mask(i, v) == 0) continue;
        lo = std::min(lo, x(i, col));
        hi = std::max(hi, x(i, col));
      }
      if (!std::isfinite(lo)) continue;  // no available samples in this view
      const double range = hi - lo;
      for (int i = 0; i < n; ++i) {
        if (ds.mask(i, v) == 0) {
          x(i, col) = 0.0;
        } else {
          x(i, col) = range > 0.0 ? (x(i, col) - lo) / range : 0.0;
        }
      }
    }
  }
  return out;
}

}  // namespace imvc
