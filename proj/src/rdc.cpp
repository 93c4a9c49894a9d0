#include "sspn/rdc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "sspn/random.hpp"

namespace sspn {

namespace {

constexpr double kRidge = 1e-9;

// column-major k x k helpers
using Mat = std::vector<double>;

double& at(Mat& m, uint32_t k, uint32_t r, uint32_t c) { return m[c * k + r]; }
double at(const Mat& m, uint32_t k, uint32_t r, uint32_t c) { return m[c * k + r]; }

// in-place lower Cholesky; returns false when not positive definite
bool cholesky(Mat& a, uint32_t k) {
  for (uint32_t j = 0; j < k; ++j) {
    double d = at(a, k, j, j);
    for (uint32_t p = 0; p < j; ++p) d -= at(a, k, j, p) * at(a, k, j, p);
    if (d <= 0.0) return false;
    double l = std::sqrt(d);
    at(a, k, j, j) = l;
    for (uint32_t i = j + 1; i < k; ++i) {
      double s = at(a, k, i, j);
      for (uint32_t p = 0; p < j; ++p) s -= at(a, k, i, p) * at(a, k, j, p);
      at(a, k, i, j) = s / l;
    }
    for (uint32_t i = 0; i < j; ++i) at(a, k, i, j) = 0.0;
  }
  return true;
}

// solve L x = b in place (lower triangular)
void forward_solve(const Mat& l, uint32_t k, double* b) {
  for (uint32_t i = 0; i < k; ++i) {
    double s = b[i];
    for (uint32_t p = 0; p < i; ++p) s -= at(l, k, i, p) * b[p];
    b[i] = s / at(l, k, i, i);
  }
}

std::vector<double> sine_features(const std::vector<double>& u, uint32_t k, double s,
                                  uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<double> w(k), b(k);
  for (uint32_t j = 0; j < k; ++j) w[j] = s * rng.next_gaussian();
  for (uint32_t j = 0; j < k; ++j) b[j] = s * rng.next_gaussian();
  const size_t n = u.size();
  std::vector<double> phi(n * k);
  for (size_t i = 0; i < n; ++i)
    for (uint32_t j = 0; j < k; ++j) phi[i * k + j] = std::sin(w[j] * u[i] + b[j]);
  return phi;
}

}  // namespace

std::vector<double> copula_transform(std::span<const int64_t> column) {
  const size_t n = column.size();
  std::vector<uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](uint32_t a, uint32_t b) { return column[a] < column[b]; });
  std::vector<double> u(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && column[order[j + 1]] == column[order[i]]) ++j;
    double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based average rank
    for (size_t p = i; p <= j; ++p) u[order[p]] = avg_rank / static_cast<double>(n);
    i = j + 1;
  }
  return u;
}

std::vector<double> rdc_features(std::span<const int64_t> column, uint32_t k, double s,
                                 uint64_t seed) {
  return sine_features(copula_transform(column), k, s, seed);
}

double rdc(std::span<const int64_t> x, std::span<const int64_t> y, uint32_t k, double s,
           uint64_t seed) {
  if (x.size() != y.size()) throw std::invalid_argument("rdc columns differ in length");
  const size_t n = x.size();
  if (n < 2) throw std::invalid_argument("rdc needs at least two rows");

  // constant column: independent of everything
  bool x_const = std::all_of(x.begin(), x.end(), [&](int64_t v) { return v == x[0]; });
  bool y_const = std::all_of(y.begin(), y.end(), [&](int64_t v) { return v == y[0]; });
  if (x_const || y_const) return 0.0;

  auto phix = sine_features(copula_transform(x), k, s, mix_seed(seed, 1));
  auto phiy = sine_features(copula_transform(y), k, s, mix_seed(seed, 2));

  // center
  for (auto* phi : {&phix, &phiy}) {
    for (uint32_t j = 0; j < k; ++j) {
      double mean = 0.0;
      for (size_t i = 0; i < n; ++i) mean += (*phi)[i * k + j];
      mean /= static_cast<double>(n);
      for (size_t i = 0; i < n; ++i) (*phi)[i * k + j] -= mean;
    }
  }

  Mat cxx(k * k, 0.0), cyy(k * k, 0.0), cxy(k * k, 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (size_t i = 0; i < n; ++i) {
    const double* xr = &phix[i * k];
    const double* yr = &phiy[i * k];
    for (uint32_t a = 0; a < k; ++a) {
      for (uint32_t b = 0; b < k; ++b) {
        at(cxx, k, a, b) += xr[a] * xr[b] * inv_n;
        at(cyy, k, a, b) += yr[a] * yr[b] * inv_n;
        at(cxy, k, a, b) += xr[a] * yr[b] * inv_n;
      }
    }
  }
  for (uint32_t j = 0; j < k; ++j) {
    at(cxx, k, j, j) += kRidge;
    at(cyy, k, j, j) += kRidge;
  }

  Mat lx = cxx, ly = cyy;
  if (!cholesky(lx, k) || !cholesky(ly, k)) return 0.0;

  // A = Lx^-1 Cxy Ly^-T; rho = sigma_max(A)
  Mat a = cxy;
  for (uint32_t c = 0; c < k; ++c) forward_solve(lx, k, &a[c * k]);  // Lx^-1 applied per column
  // right-multiply by Ly^-T == solve L y^T rows
  Mat at_mat(k * k);
  for (uint32_t r = 0; r < k; ++r)
    for (uint32_t c = 0; c < k; ++c) at_mat[r * k + c] = at(a, k, r, c);  // row-major copy
  for (uint32_t r = 0; r < k; ++r) forward_solve(ly, k, &at_mat[r * k]);
  // power iteration on M = A^T A (row-major at_mat is A with rows contiguous)
  std::vector<double> v(k, 1.0 / std::sqrt(static_cast<double>(k))), av(k), mv(k);
  double lambda = 0.0;
  for (int iter = 0; iter < 200; ++iter) {
    for (uint32_t r = 0; r < k; ++r) {
      double sum = 0.0;
      for (uint32_t c = 0; c < k; ++c) sum += at_mat[r * k + c] * v[c];
      av[r] = sum;
    }
    for (uint32_t c = 0; c < k; ++c) {
      double sum = 0.0;
      for (uint32_t r = 0; r < k; ++r) sum += at_mat[r * k + c] * av[r];
      mv[c] = sum;
    }
    double norm = 0.0;
    for (double z : mv) norm += z * z;
    norm = std::sqrt(norm);
    if (norm < 1e-300) return 0.0;
    lambda = norm;
    for (uint32_t c = 0; c < k; ++c) v[c] = mv[c] / norm;
  }
  double rho = std::sqrt(std::min(std::max(lambda, 0.0), 1.0));
  return std::min(std::max(rho, 0.0), 1.0);
}

}  // namespace sspn
