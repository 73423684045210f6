#include "collapse/lemmas.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "collapse/errors.hpp"
#include "collapse/numlin.hpp"

namespace collapse::lemmas {
namespace {

struct Survivor {
  double d;
  double weight_sq;  // combined z^2 of the merged group
};

double secular(const std::vector<Survivor>& s, double tau, double lambda) {
  double acc = 1.0;
  for (const auto& t : s) acc += tau * t.weight_sq / (t.d - lambda);
  return acc;
}

// Root of the secular function in (lo, hi) with w(lo) > 0 > w(hi).
double bisect_root(const std::vector<Survivor>& s, double tau, double lo, double hi,
                   double tol) {
  for (int it = 0; it < 200 && (hi - lo) > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (secular(s, tau, mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

std::vector<double> dpr1_eigenvalues(const Dpr1Instance& inst) {
  const std::size_t n = inst.d_vec.size();
  if (n == 0) throw DimensionError("dpr1: empty instance");
  if (inst.z.size() != n) throw DimensionError("dpr1: z and d lengths differ");
  if (!(inst.tau < 0.0)) throw DimensionError("dpr1: tau must be negative");

  double d_scale = 0.0;
  for (double d : inst.d_vec) d_scale = std::max(d_scale, std::abs(d));
  const double merge_tol = 1e-14 * std::max(1.0, d_scale);

  std::vector<double> eigenvalues;
  eigenvalues.reserve(n);

  // Case 2: zero z entries deflate immediately.
  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < n; ++i) {
    if (inst.z[i] == 0.0)
      eigenvalues.push_back(inst.d_vec[i]);
    else
      live.push_back(i);
  }

  // Case 3: equal diagonals merge; d survives with multiplicity m-1 and one
  // representative keeps the rotated weight sqrt(sum z^2).
  std::sort(live.begin(), live.end(), [&](std::size_t a, std::size_t b) {
    return inst.d_vec[a] > inst.d_vec[b];
  });
  std::vector<Survivor> survivors;
  for (std::size_t pos = 0; pos < live.size();) {
    std::size_t end = pos + 1;
    double wsq = inst.z[live[pos]] * inst.z[live[pos]];
    while (end < live.size() &&
           std::abs(inst.d_vec[live[pos]] - inst.d_vec[live[end]]) <= merge_tol) {
      wsq += inst.z[live[end]] * inst.z[live[end]];
      ++end;
    }
    for (std::size_t r = pos + 1; r < end; ++r) eigenvalues.push_back(inst.d_vec[live[pos]]);
    survivors.push_back({inst.d_vec[live[pos]], wsq});
    pos = end;
  }

  // Case 1 on the survivors: strictly separated diagonals, nonzero weights.
  if (survivors.size() == 1) {
    eigenvalues.push_back(survivors[0].d + inst.tau * survivors[0].weight_sq);
  } else if (!survivors.empty()) {
    const double tol = 1e-14 * std::max(1.0, d_scale);
    double total_wsq = 0.0;
    for (const auto& s : survivors) total_wsq += s.weight_sq;
    for (std::size_t i = 0; i < survivors.size(); ++i) {
      double lo, hi;
      if (i + 1 < survivors.size()) {
        lo = survivors[i + 1].d;
        hi = survivors[i].d;
      } else {
        hi = survivors.back().d;
        lo = hi + inst.tau * total_wsq;  // tau < 0, so below the smallest d
        double width = std::max(hi - lo, tol);
        int guard = 0;
        while (secular(survivors, inst.tau, lo) < 0.0 && guard++ < 64) {
          lo -= width;
          width *= 2.0;
        }
      }
      eigenvalues.push_back(bisect_root(survivors, inst.tau, lo, hi, tol));
    }
  }

  std::sort(eigenvalues.begin(), eigenvalues.end(), std::greater<double>());
  return eigenvalues;
}

ZClassification z_structure_classify(const std::vector<double>& rho) {
  const std::size_t k = rho.size();
  if (k < 3) throw DimensionError("z_structure_classify: need K >= 3");
  if (std::abs(rho[0]) == 0.0)
    throw DimensionError("z_structure_classify: need |rho_1| > 0");
  for (std::size_t i = 0; i + 1 < k; ++i)
    if (std::abs(rho[i]) < std::abs(rho[i + 1]))
      throw DimensionError("z_structure_classify: |rho| must be sorted descending");

  // Z = -(I - 1 1^T / K) diag(rho)
  Matrix z(k, k);
  const double inv_k = 1.0 / static_cast<double>(k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j)
      z(i, j) = (inv_k - (i == j ? 1.0 : 0.0)) * rho[j];

  const auto f = numlin::svd(z);
  const double smax = f.sigma.front();
  const double tol = 1e-10 * std::max(1.0, smax);

  ZClassification out;
  out.sigma_max = smax;
  for (double s : f.sigma) {
    if (s > tol && std::abs(s - smax) > tol) {
      out.form = ZForm::ViolatesTwoLevel;
      return out;
    }
  }
  // Two-level spectrum; the lemma leaves exactly two possibilities.
  out.form = (std::abs(rho[k - 1]) > 1e-10 * std::max(1.0, std::abs(rho[0])))
                 ? ZForm::AllEqual
                 : ZForm::OnlyFirstNonzero;
  return out;
}

double nuclear_variational_gap(const Matrix& w, const Matrix& h, double alpha) {
  if (w.cols() != h.rows()) throw DimensionError("nuclear_variational_gap: W H undefined");
  if (!(alpha > 0.0)) throw DimensionError("nuclear_variational_gap: alpha must be > 0");
  const double wf = frobenius_norm(w);
  const double hf = frobenius_norm(h);
  const double bound = (wf * wf + alpha * hf * hf) / (2.0 * std::sqrt(alpha));
  return bound - numlin::norms(matmul(w, h)).nuclear;
}

}  // namespace collapse::lemmas
