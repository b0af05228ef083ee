#pragma once

// Straight-line loop implementation of the empirical drift field, written
// independently of the library (no Eigen, no shared helpers).

#include <algorithm>
#include <cmath>
#include <vector>

namespace gdrift::reference {

using Array3 = std::vector<std::vector<std::vector<double>>>;  // [n][m][c]

struct Options {
  std::vector<double> temperatures{0.004, 0.01, 0.04};
  double mu_mask = 1e4;
  double eps = 1e-8;
  bool include_mask_in_scale = true;
  bool normalize_temperatures = true;
};

struct Result {
  Array3 v;
  double scale = 0.0;
};

inline double distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

inline Result drift_field(const Array3& h, const Array3& pos, const Array3& neg, const Options& o) {
  const std::size_t n = h.size();
  const std::size_t m = h[0].size();
  const std::size_t c = h[0][0].size();
  const std::size_t rows = n * m;

  // Global scale over all flattened (sample, location) rows.
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t q = 0; q < rows; ++q) {
      const auto& hr = h[r / m][r % m];
      total += distance(hr, pos[q / m][q % m]);
      double dn = distance(hr, neg[q / m][q % m]);
      if (r == q && o.include_mask_in_scale) dn += o.mu_mask;
      total += dn;
    }
  }
  double s = total / (2.0 * static_cast<double>(rows * rows)) / std::sqrt(static_cast<double>(c));
  if (!(s > 0.0)) s = o.eps;

  Array3 hn = h, pn = pos, nn = neg;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t k = 0; k < c; ++k) {
        hn[i][j][k] /= s;
        pn[i][j][k] /= s;
        nn[i][j][k] /= s;
      }
    }
  }

  Result out;
  out.scale = s;
  out.v.assign(n, std::vector<std::vector<double>>(m, std::vector<double>(c, 0.0)));
  for (double tau : o.temperatures) {
    const double t = tau * std::sqrt(static_cast<double>(c));
    Array3 vt(n, std::vector<std::vector<double>>(m, std::vector<double>(c, 0.0)));
    for (std::size_t j = 0; j < m; ++j) {
      // Logits of query i against candidate k: positives k < n, negatives k >= n.
      std::vector<std::vector<double>> z(n, std::vector<double>(2 * n));
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
          z[i][k] = -distance(hn[i][j], pn[k][j]) / t;
          double dn = distance(hn[i][j], nn[k][j]);
          if (i == k) dn += o.mu_mask;
          z[i][n + k] = -dn / t;
        }
      }
      std::vector<std::vector<double>> row_sm(n, std::vector<double>(2 * n));
      for (std::size_t i = 0; i < n; ++i) {
        double mx = z[i][0];
        for (std::size_t k = 1; k < 2 * n; ++k) mx = std::max(mx, z[i][k]);
        double sum = 0.0;
        for (std::size_t k = 0; k < 2 * n; ++k) sum += std::exp(z[i][k] - mx);
        for (std::size_t k = 0; k < 2 * n; ++k) row_sm[i][k] = std::exp(z[i][k] - mx) / sum;
      }
      std::vector<std::vector<double>> col_sm(n, std::vector<double>(2 * n));
      for (std::size_t k = 0; k < 2 * n; ++k) {
        double mx = z[0][k];
        for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, z[i][k]);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += std::exp(z[i][k] - mx);
        for (std::size_t i = 0; i < n; ++i) col_sm[i][k] = std::exp(z[i][k] - mx) / sum;
      }
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> a(2 * n);
        double s_pos = 0.0, s_neg = 0.0;
        for (std::size_t k = 0; k < 2 * n; ++k) {
          a[k] = std::sqrt(row_sm[i][k] * col_sm[i][k]);
          (k < n ? s_pos : s_neg) += a[k];
        }
        for (std::size_t ch = 0; ch < c; ++ch) {
          double acc = 0.0;
          for (std::size_t k = 0; k < n; ++k) {
            acc += s_neg * a[k] * pn[k][j][ch];
            acc -= s_pos * a[n + k] * nn[k][j][ch];
          }
          vt[i][j][ch] = acc;
        }
      }
    }
    double fro = 0.0;
    for (const auto& a : vt) for (const auto& b : a) for (double x : b) fro += x * x;
    const double denom = o.normalize_temperatures ? std::sqrt(fro) / std::sqrt(static_cast<double>(n * m * c)) + o.eps : 1.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j)
        for (std::size_t k = 0; k < c; ++k) out.v[i][j][k] += vt[i][j][k] / denom;
  }
  return out;
}

}  // namespace gdrift::reference
