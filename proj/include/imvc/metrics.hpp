#pragma once

#include <vector>

#include "imvc/types.hpp"

namespace imvc {

/// Cross-tabulation of two label vectors over their distinct values
/// (ascending order on each side).
struct ContingencyTable {
  Eigen::MatrixXi counts;  // K_pred x K_true
  int n = 0;
};

ContingencyTable contingency_table(const IntVector& pred, const IntVector& truth);

/// Exact min-cost assignment on a square cost matrix; returns column of each
/// row. O(n^3) shortest-augmenting-path with potentials.
std::vector<int> hungarian(const Matrix& cost);

/// Best one-to-one cluster-to-class matching fraction.
double accuracy(const IntVector& pred, const IntVector& truth);

/// I(pred;truth) / sqrt(H(pred) H(truth)), natural logs. 1 when both
/// partitions are single-cluster; 0 when exactly one entropy is zero.
double nmi(const IntVector& pred, const IntVector& truth);

/// Adjusted Rand index; 1 when both partitions are identical single-cluster.
double ari(const IntVector& pred, const IntVector& truth);

struct MetricTriple {
  double acc = 0.0;
  double nmi = 0.0;
  double ari = 0.0;
};

MetricTriple evaluate(const IntVector& pred, const IntVector& truth);

}  // namespace imvc
