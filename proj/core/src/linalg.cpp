#include "lelp/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lelp/rng.hpp"

namespace lelp::linalg {

namespace {

constexpr double kRankDropTol = 1e-10;
constexpr double kJacobiTol = 1e-12;
constexpr int kJacobiMaxSweeps = 100;

}  // namespace

Matrix orthonormalize_columns(const Matrix& w) {
  if (w.rows < 1 || w.cols < 1)
    throw std::invalid_argument("orthonormalize_columns: empty input");

  const std::size_t d = w.rows;
  double max_col_norm = 0.0;
  for (std::size_t j = 0; j < w.cols; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += w(i, j) * w(i, j);
    max_col_norm = std::max(max_col_norm, std::sqrt(s));
  }
  if (max_col_norm == 0.0) return Matrix(d, 0);

  const double drop = kRankDropTol * max_col_norm;
  std::vector<Vector> basis;
  for (std::size_t j = 0; j < w.cols; ++j) {
    Vector v(d);
    for (std::size_t i = 0; i < d; ++i) v[i] = w(i, j);
    // Two MGS passes for orthogonality well below the drop tolerance.
    for (int pass = 0; pass < 2; ++pass) {
      for (const Vector& q : basis) {
        const double r = dot(q, v);
        for (std::size_t i = 0; i < d; ++i) v[i] -= r * q[i];
      }
    }
    const double r = norm(v);
    if (r <= drop) continue;
    for (double& x : v) x /= r;
    basis.push_back(std::move(v));
  }

  Matrix q(d, basis.size());
  for (std::size_t j = 0; j < basis.size(); ++j)
    for (std::size_t i = 0; i < d; ++i) q(i, j) = basis[j][i];
  return q;
}

Matrix nullspace_project(const Matrix& h, const Matrix& q) {
  if (q.cols == 0) return h;
  if (h.cols != q.rows)
    throw std::invalid_argument("nullspace_project: dimension mismatch");
  // h - (h q) qᵀ
  const Matrix hq = matmul(h, q);
  Matrix out = h;
  for (std::size_t i = 0; i < h.rows; ++i)
    for (std::size_t k = 0; k < q.cols; ++k) {
      const double c = hq(i, k);
      if (c == 0.0) continue;
      for (std::size_t j = 0; j < h.cols; ++j) out(i, j) -= c * q(j, k);
    }
  return out;
}

EigenSym eigen_symmetric(const Matrix& a) {
  if (a.rows != a.cols) throw std::invalid_argument("eigen_symmetric: not square");
  const std::size_t n = a.rows;
  Matrix m = a;
  Matrix v = Matrix::identity(n);

  auto off_mass = [&]() {
    double s = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) s += m(p, q) * m(p, q);
    return std::sqrt(2.0 * s);
  };
  double frob = 0.0;
  for (double x : m.data) frob += x * x;
  frob = std::sqrt(frob);
  const double tol = kJacobiTol * std::max(frob, 1.0);

  for (int sweep = 0; sweep < kJacobiMaxSweeps && off_mass() > tol; ++sweep) {
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = m(p, q);
        if (std::abs(apq) <= tol / static_cast<double>(n * n)) continue;
        const double app = m(p, p);
        const double aqq = m(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        // Smaller-magnitude tangent root for stability.
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double mkp = m(k, p);
          const double mkq = m(k, q);
          m(k, p) = c * mkp - s * mkq;
          m(k, q) = s * mkp + c * mkq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double mpk = m(p, k);
          const double mqk = m(q, k);
          m(p, k) = c * mpk - s * mqk;
          m(q, k) = s * mpk + c * mqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return m(i, i) > m(j, j); });

  EigenSym out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t c = order[r];
    out.values[r] = m(c, c);
    for (std::size_t k = 0; k < n; ++k) out.vectors(r, k) = v(k, c);
  }
  return out;
}

Pca top_pca(const Matrix& h, std::size_t s) {
  const std::size_t n = h.rows;
  const std::size_t d = h.cols;
  if (n < 2) throw std::invalid_argument("top_pca: need at least 2 rows");
  if (s > std::min(n - 1, d))
    throw std::invalid_argument("top_pca: s exceeds min(n - 1, d)");

  Pca out;
  out.mean = column_mean(h);
  Matrix centered = h;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) centered(i, j) -= out.mean[j];

  // 1/N sample covariance, matching the per-class variance convention used
  // by the projector normalization.
  Matrix cov = matmul_tn(centered, centered);
  for (double& x : cov.data) x /= static_cast<double>(n);

  double total_var = 0.0;
  for (std::size_t j = 0; j < d; ++j) total_var += cov(j, j);
  if (total_var <= 1e-18)
    throw degenerate_data_error("top_pca: covariance numerically zero");

  EigenSym eig = eigen_symmetric(cov);
  out.dirs = Matrix(s, d);
  out.stds.resize(s);
  for (std::size_t r = 0; r < s; ++r) {
    // Sign convention: largest-magnitude entry positive, first index on ties.
    std::size_t arg = 0;
    double best = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double mag = std::abs(eig.vectors(r, k));
      if (mag > best) {
        best = mag;
        arg = k;
      }
    }
    const double sign = eig.vectors(r, arg) < 0.0 ? -1.0 : 1.0;
    for (std::size_t k = 0; k < d; ++k) out.dirs(r, k) = sign * eig.vectors(r, k);
    out.stds[r] = std::sqrt(std::max(eig.values[r], 0.0));
  }
  return out;
}

Matrix random_orthogonal(std::size_t s, std::uint64_t seed) {
  if (s < 1) throw std::invalid_argument("random_orthogonal: s must be >= 1");
  Rng rng(mix_seed(seed, "random_orthogonal"));
  Matrix g(s, s);
  for (double& x : g.data) x = rng.normal();
  Matrix q = orthonormalize_columns(g);
  // A Gaussian matrix is full rank with probability one; regenerate on the
  // measure-zero failure so the result is always s x s.
  while (q.cols < s) {
    for (double& x : g.data) x = rng.normal();
    q = orthonormalize_columns(g);
  }
  for (std::size_t j = 0; j < s; ++j) {
    if (q(j, j) < 0.0)
      for (std::size_t i = 0; i < s; ++i) q(i, j) = -q(i, j);
  }
  return q;
}

}  // namespace lelp::linalg
