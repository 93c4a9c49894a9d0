#include "sspn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sspn {

double q_error(double estimate, double truth) {
  if (estimate <= 0.0 || truth <= 0.0)
    throw std::invalid_argument("q-error is defined for positive cardinalities only");
  return std::max(estimate / truth, truth / estimate);
}

double percentile_nearest_rank(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty sample");
  if (p <= 0.0 || p > 100.0) throw std::invalid_argument("percentile must lie in (0,100]");
  std::sort(values.begin(), values.end());
  size_t rank = static_cast<size_t>(std::ceil(p / 100.0 * static_cast<double>(values.size())));
  if (rank == 0) rank = 1;
  return values[rank - 1];
}

MetricSummary evaluate_metrics(const std::vector<std::pair<double, double>>& estimate_truth) {
  MetricSummary s;
  s.count = estimate_truth.size();
  if (estimate_truth.empty()) return s;

  std::vector<double> qerrors;
  qerrors.reserve(estimate_truth.size());
  double rel_sum = 0.0;
  for (auto [estimate, truth] : estimate_truth) {
    if (truth <= 0.0) {
      truth = 1.0;
      ++s.zero_truth_clamped;
    }
    qerrors.push_back(q_error(estimate, truth));
    rel_sum += (estimate - truth) / truth;
  }
  s.mean_relative_error = rel_sum / static_cast<double>(estimate_truth.size());
  s.qerror.p50 = percentile_nearest_rank(qerrors, 50);
  s.qerror.p90 = percentile_nearest_rank(qerrors, 90);
  s.qerror.p95 = percentile_nearest_rank(qerrors, 95);
  s.qerror.p99 = percentile_nearest_rank(qerrors, 99);
  s.qerror.max = *std::max_element(qerrors.begin(), qerrors.end());
  return s;
}

}  // namespace sspn
