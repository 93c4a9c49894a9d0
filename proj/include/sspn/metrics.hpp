#pragma once

#include <cstddef>
#include <vector>

namespace sspn {

// max(estimate/truth, truth/estimate); both inputs must be positive
double q_error(double estimate, double truth);

// nearest-rank percentile, p in (0, 100]
double percentile_nearest_rank(std::vector<double> values, double p);

struct QErrorStats {
  double p50 = 0, p90 = 0, p95 = 0, p99 = 0, max = 0;
};

struct MetricSummary {
  QErrorStats qerror;
  double mean_relative_error = 0.0;  // signed, (estimate - truth) / truth
  size_t count = 0;
  size_t zero_truth_clamped = 0;
};

// truths <= 0 are clamped to 1 and counted
MetricSummary evaluate_metrics(const std::vector<std::pair<double, double>>& estimate_truth);

}  // namespace sspn
