#pragma once

#include <vector>

#include "pgnd/types.hpp"

namespace pgnd {

// All three point-cloud metrics are in meters.

// Mean distance over an aligned, index-identified correspondence.
double mde(const Points& pred, const Points& truth);

// Symmetric nearest-neighbor distance:
// 0.5 * [ mean_a min_b |a-b| + mean_b min_a |a-b| ], plain L2.
double chamfer(const Points& a, const Points& b);

// Optimal-correspondence distance: min over permutations pi of
// mean_i |a_i - b_pi(i)|, solved exactly (Hungarian algorithm, O(n^3)).
// Requires equal sizes and n <= 512.
double emd(const Points& a, const Points& b);

// For each point of `from`, the distance to its nearest neighbor in `to`.
// Uses a uniform spatial hash above 256 points, brute force below; both
// paths return identical values.
std::vector<double> nn_distances(const Points& from, const Points& to);

// Minimum-cost row->column assignment on a dense n x n cost matrix
// (row-major). Returns match[row] = column.
std::vector<int> min_cost_assignment(const std::vector<double>& cost, int n);

// Per-clip values folded into mean and population standard deviation.
struct MetricStat {
  double mean = 0.0;
  double std_dev = 0.0;
  std::vector<double> per_clip;
};

MetricStat summarize(const std::vector<double>& per_clip);

struct MetricReport {
  MetricStat mde;
  MetricStat chamfer;
  MetricStat emd;
};

}  // namespace pgnd
