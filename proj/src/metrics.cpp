#include "imvc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "imvc/error.hpp"

namespace imvc {

namespace {

std::map<int, int> compact_labels(const IntVector& labels) {
  std::map<int, int> index;
  for (Eigen::Index i = 0; i < labels.size(); ++i) index.emplace(labels(i), 0);
  int next = 0;
  for (auto& [value, idx] : index) idx = next++;
  return index;
}

double choose2(double m) { return m * (m - 1.0) / 2.0; }

}  // namespace

ContingencyTable contingency_table(const IntVector& pred, const IntVector& truth) {
  if (pred.size() != truth.size())
    throw ArgumentError("label vectors must have equal length");
  if (pred.size() == 0) throw ArgumentError("label vectors must be nonempty");
  const auto pi = compact_labels(pred);
  const auto ti = compact_labels(truth);
  ContingencyTable table;
  table.n = static_cast<int>(pred.size());
  table.counts = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(pi.size()),
                                       static_cast<Eigen::Index>(ti.size()));
  for (Eigen::Index i = 0; i < pred.size(); ++i)
    table.counts(pi.at(pred(i)), ti.at(truth(i))) += 1;
  return table;
}

std::vector<int> hungarian(const Matrix& cost) {
  if (cost.rows() != cost.cols()) throw ArgumentError("hungarian needs a square matrix");
  const int n = static_cast<int>(cost.rows());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // Shortest augmenting path with potentials, 1-indexed with column 0 as slack.
  std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(n) + 1, 0.0);
  std::vector<int> match(static_cast<size_t>(n) + 1, 0), way(static_cast<size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<size_t>(n) + 1, kInf);
    std::vector<bool> used(static_cast<size_t>(n) + 1, false);
    do {
      used[static_cast<size_t>(j0)] = true;
      const int i0 = match[static_cast<size_t>(j0)];
      int j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(match[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<size_t>(j0)];
      match[static_cast<size_t>(j0)] = match[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(static_cast<size_t>(n), -1);
  for (int j = 1; j <= n; ++j)
    if (match[static_cast<size_t>(j)] != 0)
      row_to_col[static_cast<size_t>(match[static_cast<size_t>(j)]) - 1] = j - 1;
  return row_to_col;
}

double accuracy(const IntVector& pred, const IntVector& truth) {
  const ContingencyTable table = contingency_table(pred, truth);
  const int k = static_cast<int>(std::max(table.counts.rows(), table.counts.cols()));
  Matrix cost = Matrix::Zero(k, k);
  cost.topLeftCorner(table.counts.rows(), table.counts.cols()) = -table.counts.cast<double>();
  const auto assignment = hungarian(cost);
  double matched = 0.0;
  for (Eigen::Index i = 0; i < table.counts.rows(); ++i) {
    const int j = assignment[static_cast<size_t>(i)];
    if (j < table.counts.cols()) matched += table.counts(i, j);
  }
  return matched / static_cast<double>(table.n);
}

double nmi(const IntVector& pred, const IntVector& truth) {
  const ContingencyTable table = contingency_table(pred, truth);
  const double n = table.n;
  const Eigen::VectorXi a = table.counts.rowwise().sum();
  const Eigen::VectorXi b = table.counts.colwise().sum();
  auto entropy = [n](const Eigen::VectorXi& counts) {
    double h = 0.0;
    for (Eigen::Index i = 0; i < counts.size(); ++i) {
      if (counts(i) == 0) continue;
      const double f = counts(i) / n;
      h -= f * std::log(f);
    }
    return h;
  };
  const double hp = entropy(a);
  const double ht = entropy(b);
  if (hp == 0.0 && ht == 0.0) return 1.0;  // both single-cluster
  if (hp == 0.0 || ht == 0.0) return 0.0;
  double info = 0.0;
  for (Eigen::Index i = 0; i < table.counts.rows(); ++i)
    for (Eigen::Index j = 0; j < table.counts.cols(); ++j) {
      const int nij = table.counts(i, j);
      if (nij == 0) continue;
      info += (nij / n) * std::log(n * nij / (static_cast<double>(a(i)) * b(j)));
    }
  return std::clamp(info / std::sqrt(hp * ht), 0.0, 1.0);
}

double ari(const IntVector& pred, const IntVector& truth) {
  const ContingencyTable table = contingency_table(pred, truth);
  double sum_ij = 0.0;
  for (Eigen::Index i = 0; i < table.counts.rows(); ++i)
    for (Eigen::Index j = 0; j < table.counts.cols(); ++j)
      sum_ij += choose2(table.counts(i, j));
  double sum_a = 0.0, sum_b = 0.0;
  const Eigen::VectorXi a = table.counts.rowwise().sum();
  const Eigen::VectorXi b = table.counts.colwise().sum();
  for (Eigen::Index i = 0; i < a.size(); ++i) sum_a += choose2(a(i));
  for (Eigen::Index j = 0; j < b.size(); ++j) sum_b += choose2(b(j));
  const double pairs = choose2(static_cast<double>(table.n));
  if (pairs == 0.0) return 1.0;
  const double expected = sum_a * sum_b / pairs;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;  // both partitions identical single-cluster
  return (sum_ij - expected) / (max_index - expected);
}

MetricTriple evaluate(const IntVector& pred, const IntVector& truth) {
  return MetricTriple{accuracy(pred, truth), nmi(pred, truth), ari(pred, truth)};
}

}  // namespace imvc
