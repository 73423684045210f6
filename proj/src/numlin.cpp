#include "collapse/numlin.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numeric>
#include <string>

#include "collapse/errors.hpp"
#include "collapse/kernels.hpp"

namespace collapse::numlin {
namespace {

// Flip sign so the first non-negligible component is positive.
void fix_column_sign(Matrix& u, std::size_t j, Matrix* paired, std::size_t paired_j) {
  double scale = 0.0;
  for (std::size_t i = 0; i < u.rows(); ++i) scale = std::max(scale, std::abs(u(i, j)));
  if (scale == 0.0) return;
  double lead = 0.0;
  for (std::size_t i = 0; i < u.rows(); ++i) {
    if (std::abs(u(i, j)) > 1e-12 * scale) {
      lead = u(i, j);
      break;
    }
  }
  if (lead >= 0.0) return;
  for (std::size_t i = 0; i < u.rows(); ++i) u(i, j) = -u(i, j);
  if (paired != nullptr)
    for (std::size_t i = 0; i < paired->rows(); ++i)
      (*paired)(i, paired_j) = -(*paired)(i, paired_j);
}

// Exact power-of-two prescale bringing the largest entry to [1, 2), keeping
// sums of squares and products away from overflow/underflow; returns the
// factor the singular values must be multiplied by afterwards. Powers of two
// rescale exactly, so well-scaled inputs see bit-identical results.
double rescale_exponent(const Matrix& a) {
  const double scale = max_abs(a);
  if (scale == 0.0) return 1.0;
  return std::ldexp(1.0, std::ilogb(scale));
}

// One-sided Jacobi on a tall matrix (m >= n). Returns U (m x n), sigma, V (n x n).
Svd svd_tall(const Matrix& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  const double restore = rescale_exponent(a);
  const double prescale = 1.0 / restore;
  // Column-major working copy so column operations are contiguous.
  std::vector<double> g(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) g[j * m + i] = prescale * a(i, j);
  std::vector<double> v(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) v[j * n + j] = 1.0;

  // Columns more than ~130 orders of magnitude below the working scale have
  // pairwise dot products in subnormal territory, where the orthogonality
  // test loses all relative precision. Their singular values are beyond any
  // double-precision meaning; flush them to exact zeros up front.
  for (std::size_t j = 0; j < n; ++j) {
    if (kern::active().sum_sq(g.data() + j * m, m) <= 1e-260)
      std::fill(g.begin() + j * m, g.begin() + (j + 1) * m, 0.0);
  }

  const auto& k = kern::active();
  const std::size_t sweep_cap = 100 * std::max(m, n);
  // A computed column dot carries up to ~m*eps relative rounding, so pairs
  // below that floor count as orthogonal; a tighter threshold cycles forever
  // on columns with wide internal dynamic range.
  const double tol =
      2.0 * static_cast<double>(m) * std::numeric_limits<double>::epsilon();

  bool converged = (n < 2);
  for (std::size_t sweep = 0; sweep < sweep_cap && !converged; ++sweep) {
    converged = true;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double* gp = g.data() + p * m;
        double* gq = g.data() + q * m;
        const double app = k.sum_sq(gp, m);
        const double aqq = k.sum_sq(gq, m);
        const double apq = k.dot(gp, gq, m);
        // Split square roots: the product app * aqq can underflow to zero for
        // subnormal columns, which would disable this test and spin forever.
        if (apq == 0.0 || app == 0.0 || aqq == 0.0) continue;
        if (std::abs(apq) <= tol * std::sqrt(app) * std::sqrt(aqq)) continue;
        converged = false;
        const double zeta = (aqq - app) / (2.0 * apq);
        // zeta^2 overflows past ~1e154; switch to the asymptotic root there,
        // otherwise t underflows to zero and the rotation becomes a no-op.
        const double t = (std::abs(zeta) > 1e150)
                             ? 1.0 / (2.0 * zeta)
                             : (zeta >= 0.0 ? 1.0 : -1.0) /
                                   (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double gpi = gp[i];
          const double gqi = gq[i];
          gp[i] = c * gpi - s * gqi;
          gq[i] = s * gpi + c * gqi;
        }
        double* vp = v.data() + p * n;
        double* vq = v.data() + q * n;
        for (std::size_t i = 0; i < n; ++i) {
          const double vpi = vp[i];
          const double vqi = vq[i];
          vp[i] = c * vpi - s * vqi;
          vq[i] = s * vpi + c * vqi;
        }
      }
    }
  }
  if (!converged)
    throw NumericalError("svd: Jacobi sweeps did not converge within cap of " +
                         std::to_string(sweep_cap));

  // Singular values of the prescaled copy; restored on output.
  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = std::sqrt(k.sum_sq(g.data() + j * m, m));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  Svd out;
  out.sigma.resize(n);
  out.u = Matrix(m, n);
  out.v = Matrix(n, n);
  // Below this the column sum of squares sits in (or near) the subnormal
  // range where the computed norm has O(1) relative error: no usable
  // direction survives normalization. Such columns (sweeps can shrink a
  // column this far even after the upfront flush) are exact zeros of the
  // working precision, so their sigma is reported as 0 and the left basis
  // is completed from coordinate vectors instead.
  const double dead = 1e-140;
  std::vector<bool> valid(n, false);
  for (std::size_t jj = 0; jj < n; ++jj) {
    const std::size_t src = order[jj];
    for (std::size_t i = 0; i < n; ++i) out.v(i, jj) = v[src * n + i];
    if (sigma[src] > dead) {
      out.sigma[jj] = restore * sigma[src];
      const double inv = 1.0 / sigma[src];
      for (std::size_t i = 0; i < m; ++i) out.u(i, jj) = g[src * m + i] * inv;
      valid[jj] = true;
    } else {
      out.sigma[jj] = 0.0;
    }
  }
  // Orthonormal completion of U for exactly-zero singular values. The
  // coordinate vector with the largest residual is kept; its norm is at
  // least sqrt(deficit/m), so the normalization is always well-conditioned.
  std::vector<double> w(m), best(m);
  for (std::size_t jj = 0; jj < n; ++jj) {
    if (valid[jj]) continue;
    double best_norm = 0.0;
    for (std::size_t e = 0; e < m; ++e) {
      std::fill(w.begin(), w.end(), 0.0);
      w[e] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t l = 0; l < n; ++l) {
          if (!valid[l]) continue;
          double d = 0.0;
          for (std::size_t i = 0; i < m; ++i) d += out.u(i, l) * w[i];
          for (std::size_t i = 0; i < m; ++i) w[i] -= d * out.u(i, l);
        }
      }
      const double nrm = std::sqrt(k.sum_sq(w.data(), m));
      if (nrm > best_norm) {
        best_norm = nrm;
        best = w;
      }
    }
    if (best_norm <= 1e-6) throw NumericalError("svd: failed to complete orthonormal basis");
    for (std::size_t i = 0; i < m; ++i) out.u(i, jj) = best[i] / best_norm;
    valid[jj] = true;
  }
  for (std::size_t j = 0; j < n; ++j) fix_column_sign(out.u, j, &out.v, j);
  return out;
}

}  // namespace

Svd svd(const Matrix& a) {
  if (!a.all_finite()) throw DimensionError("svd: input must be finite");
  if (a.rows() == 0 || a.cols() == 0)
    throw DimensionError("svd: input must be non-empty");
  if (a.rows() >= a.cols()) return svd_tall(a);
  Svd t = svd_tall(transposed(a));
  return Svd{std::move(t.v), std::move(t.sigma), std::move(t.u)};
}

SymEig sym_eig(const Matrix& s) {
  if (s.rows() != s.cols()) throw DimensionError("sym_eig: input must be square");
  const std::size_t n = s.rows();
  const double norm_s = frobenius_norm(s);
  {
    double asym = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double d = s(i, j) - s(j, i);
        asym += 2.0 * d * d;
      }
    if (std::sqrt(asym) > 1e-8 * std::max(norm_s, 1e-300))
      throw DegenerateInputError("sym_eig: input is not symmetric");
  }

  const double restore = rescale_exponent(s);
  const double prescale = 1.0 / restore;
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * prescale * (s(i, j) + s(j, i));
  Matrix q = Matrix::identity(n);

  const double skip = 1e-15 * frobenius_norm(a);
  const std::size_t sweep_cap = 100 * std::max<std::size_t>(n, 1);
  bool converged = (n < 2) || norm_s == 0.0;
  for (std::size_t sweep = 0; sweep < sweep_cap && !converged; ++sweep) {
    converged = true;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t qq = p + 1; qq < n; ++qq) {
        const double apq = a(p, qq);
        if (std::abs(apq) <= skip) continue;
        converged = false;
        const double theta = (a(qq, qq) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(1.0 + theta * theta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = c * t;
        // A <- J^T A J with the rotation in the (p, qq) plane.
        for (std::size_t i = 0; i < n; ++i) {
          const double aip = a(i, p);
          const double aiq = a(i, qq);
          a(i, p) = c * aip - sn * aiq;
          a(i, qq) = sn * aip + c * aiq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double api = a(p, i);
          const double aqi = a(qq, i);
          a(p, i) = c * api - sn * aqi;
          a(qq, i) = sn * api + c * aqi;
        }
        a(p, qq) = 0.0;
        a(qq, p) = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double qip = q(i, p);
          const double qiq = q(i, qq);
          q(i, p) = c * qip - sn * qiq;
          q(i, qq) = sn * qip + c * qiq;
        }
      }
    }
  }
  if (!converged)
    throw NumericalError("sym_eig: Jacobi sweeps did not converge within cap of " +
                         std::to_string(sweep_cap));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

  SymEig out;
  out.lambda.resize(n);
  out.q = Matrix(n, n);
  for (std::size_t jj = 0; jj < n; ++jj) {
    out.lambda[jj] = restore * a(order[jj], order[jj]);
    for (std::size_t i = 0; i < n; ++i) out.q(i, jj) = q(i, order[jj]);
  }
  for (std::size_t j = 0; j < n; ++j) fix_column_sign(out.q, j, nullptr, 0);
  return out;
}

Matrix pinv(const Matrix& a, double rel_tol) {
  if (rel_tol <= 0.0) throw DimensionError("pinv: rel_tol must be positive");
  Svd f = svd(a);
  const double smax = f.sigma.empty() ? 0.0 : f.sigma.front();
  const double cut = rel_tol * smax;
  // A^+ = V diag(1/sigma) U^T over the retained spectrum.
  Matrix vs = f.v;
  for (std::size_t j = 0; j < f.sigma.size(); ++j) {
    const double inv = (f.sigma[j] > cut) ? 1.0 / f.sigma[j] : 0.0;
    for (std::size_t i = 0; i < vs.rows(); ++i) vs(i, j) *= inv;
  }
  return matmul_abt(vs, f.u);
}

Matrix qr_orthonormal(const Matrix& a) {
  const std::size_t d = a.rows();
  const std::size_t kcols = a.cols();
  if (d < kcols) throw DimensionError("qr_orthonormal: need rows >= cols");
  const auto& k = kern::active();

  // Modified Gram-Schmidt, two passes; R diagonals come out positive.
  Matrix q(d, kcols);
  std::vector<double> col(d);
  for (std::size_t j = 0; j < kcols; ++j) {
    for (std::size_t i = 0; i < d; ++i) col[i] = a(i, j);
    const double orig = std::sqrt(k.sum_sq(col.data(), d));
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t l = 0; l < j; ++l) {
        double dp = 0.0;
        for (std::size_t i = 0; i < d; ++i) dp += q(i, l) * col[i];
        for (std::size_t i = 0; i < d; ++i) col[i] -= dp * q(i, l);
      }
    }
    const double rjj = std::sqrt(k.sum_sq(col.data(), d));
    if (orig == 0.0 || rjj <= 1e-10 * orig)
      throw DegenerateInputError("qr_orthonormal: rank-deficient input at column " +
                                 std::to_string(j));
    for (std::size_t i = 0; i < d; ++i) q(i, j) = col[i] / rjj;
  }
  return q;
}

Norms norms(const Matrix& a) {
  if (!a.all_finite()) throw DimensionError("norms: input must be finite");
  Svd f = svd(a);
  Norms out{};
  out.frobenius = frobenius_norm(a);
  out.spectral = f.sigma.empty() ? 0.0 : f.sigma.front();
  out.nuclear = 0.0;
  for (double sv : f.sigma) out.nuclear += sv;
  return out;
}

}  // namespace collapse::numlin
