#pragma once

// Graph signal processing on the normalized Laplacian L = I - D^-1/2 A D^-1/2.
// For a signal x with graph Fourier transform x_hat = U^T x, the high-frequency
// area is the Rayleigh quotient x^T L x / x^T x = sum_k lambda_k x_hat_k^2 / sum_k x_hat_k^2.

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "graph.hpp"
#include "stats.hpp"

namespace gcond {

/// I - D^-1/2 A D^-1/2 without self-loops; an isolated node keeps diagonal 1.
inline Matrix laplacian(const SparseMatrix& adjacency) {
  Matrix l = -normalize_adjacency(adjacency, false);
  l.diagonal().array() += 1.0;
  return l;
}

inline Matrix laplacian(const Matrix& adjacency) {
  Matrix l = -normalize_adjacency(adjacency, false);
  l.diagonal().array() += 1.0;
  return l;
}

struct EigenDecomposition {
  Vector eigenvalues;  // ascending
  Matrix eigenvectors;  // columns, matching eigenvalues
  int sweeps = 0;
};

inline constexpr Index kMaxEigenDimension = 4000;

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm is below `tolerance`.
inline EigenDecomposition jacobi_eigh(const Matrix& m, double tolerance = 1e-10, int max_sweeps = 100) {
  const Index n = m.rows();
  require(m.cols() == n, "jacobi_eigh: matrix must be square");
  require(n <= kMaxEigenDimension, "jacobi_eigh: dimension " + std::to_string(n) + " exceeds the dense solver limit");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale, "jacobi_eigh: non-symmetric input");

  Matrix a = 0.5 * (m + m.transpose());
  Matrix v = Matrix::Identity(n, n);
  auto off_norm = [&] {
    double s = 0.0;
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < n; ++i)
        if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  EigenDecomposition out;
  for (int sweep = 0; sweep < max_sweeps && off_norm() >= tolerance; ++sweep) {
    out.sweeps = sweep + 1;
    for (Index p = 0; p < n - 1; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) { return a(x, x) < a(y, y); });
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  for (Index k = 0; k < n; ++k) {
    out.eigenvalues(k) = a(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
    out.eigenvectors.col(k) = v.col(order[static_cast<std::size_t>(k)]);
  }
  return out;
}

/// Graph Fourier transform U^T x.
inline Vector gdft(const Matrix& u, const Vector& x) {
  require(u.rows() == x.size(), "gdft: shape mismatch " + shape_str(u.rows(), u.cols()) + " vs " +
                                    std::to_string(x.size()));
  return u.transpose() * x;
}

struct HighFrequencyArea {
  Vector per_dim;                  // 0 for all-zero columns
  std::vector<int> zero_columns;   // flagged columns
  double mean = 0.0;               // over non-zero columns
};

inline HighFrequencyArea high_freq_area(const Matrix& lap, const Matrix& x) {
  require(lap.rows() == x.rows() && lap.cols() == x.rows(), "high_freq_area: shape mismatch");
  HighFrequencyArea out;
  out.per_dim = Vector::Zero(x.cols());
  const Matrix lx = lap * x;
  double total = 0.0;
  int counted = 0;
  for (Index j = 0; j < x.cols(); ++j) {
    const double energy = x.col(j).squaredNorm();
    if (energy == 0.0) {
      out.zero_columns.push_back(static_cast<int>(j));
      continue;
    }
    out.per_dim(j) = x.col(j).dot(lx.col(j)) / energy;
    total += out.per_dim(j);
    ++counted;
  }
  out.mean = counted ? total / counted : 0.0;
  return out;
}

struct SpectralReport {
  double low_freq_energy_fraction = 0.0;
  double high_freq_area_mean = 0.0;
  double skewness = 0.0;
  double peakedness = 0.0;  // excess kurtosis
  double spectral_radius = 0.0;
  double eigenvalue_variance = 0.0;

  std::array<double, 6> values() const {
    return {low_freq_energy_fraction, high_freq_area_mean, skewness, peakedness, spectral_radius, eigenvalue_variance};
  }
  static constexpr std::array<const char*, 6> names() {
    return {"low_freq_energy_fraction", "high_freq_area_mean", "skewness",
            "peakedness",               "spectral_radius",     "eigenvalue_variance"};
  }
};

inline constexpr double kDefaultLowFrequencyCutoff = 1.0;

/// Six descriptors of how feature energy spreads over the Laplacian spectrum.
/// Per-dimension quantities are averaged over non-zero feature columns. Skewness
/// and peakedness are moments of the eigenvalue distribution weighted by each
/// column's spectral energy; they are computed from x^T L^p x, which equals
/// sum_k lambda_k^p x_hat_k^2.
inline SpectralReport spectral_metrics(const SparseMatrix& adjacency, const Matrix& features,
                                       double cutoff = kDefaultLowFrequencyCutoff) {
  const Index n = adjacency.rows();
  require(features.rows() == n, "spectral_metrics: feature rows do not match node count");
  const Matrix lap = laplacian(adjacency);
  const auto eig = jacobi_eigh(lap);
  const Matrix x_hat = eig.eigenvectors.transpose() * features;
  const Matrix lx = lap * features;
  const Matrix llx = lap * lx;

  SpectralReport r;
  int counted = 0;
  for (Index j = 0; j < features.cols(); ++j) {
    const double energy = features.col(j).squaredNorm();
    if (energy == 0.0) continue;
    ++counted;
    double low = 0.0, spectral_energy = 0.0;
    for (Index k = 0; k < n; ++k) {
      const double e = x_hat(k, j) * x_hat(k, j);
      spectral_energy += e;
      // eigenvalues within rounding of the cutoff count as high, so the split
      // does not depend on node order
      if (eig.eigenvalues(k) < cutoff - 1e-9) low += e;
    }
    r.low_freq_energy_fraction += low / spectral_energy;

    const double m1 = features.col(j).dot(lx.col(j)) / energy;
    const double m2 = lx.col(j).squaredNorm() / energy;
    const double m3 = lx.col(j).dot(llx.col(j)) / energy;
    const double m4 = llx.col(j).squaredNorm() / energy;
    r.high_freq_area_mean += m1;
    const double var = m2 - m1 * m1;
    if (var > 1e-12) {
      const double mu3 = m3 - 3.0 * m1 * m2 + 2.0 * m1 * m1 * m1;
      const double mu4 = m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * m1 * m1 * m1 * m1;
      r.skewness += mu3 / std::pow(var, 1.5);
      r.peakedness += mu4 / (var * var) - 3.0;
    }
  }
  if (counted > 0) {
    r.low_freq_energy_fraction /= counted;
    r.high_freq_area_mean /= counted;
    r.skewness /= counted;
    r.peakedness /= counted;
  }
  r.spectral_radius = n > 0 ? eig.eigenvalues(n - 1) : 0.0;
  if (n > 0) {
    const double tr = lap.trace() / static_cast<double>(n);
    const double tr2 = lap.squaredNorm() / static_cast<double>(n);  // trace(L^2) for symmetric L
    r.eigenvalue_variance = std::max(0.0, tr2 - tr * tr);
  }
  return r;
}

inline SpectralReport spectral_metrics(const GraphDataset& d, double cutoff = kDefaultLowFrequencyCutoff) {
  return spectral_metrics(d.adjacency, d.features, cutoff);
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
inline double power_iteration_radius(const Matrix& m, int max_iterations = 200000, double tolerance = 1e-13) {
  const Index n = m.rows();
  Vector x(n);
  for (Index i = 0; i < n; ++i) x(i) = 1.0 + 0.37 * static_cast<double>(i % 7) - 0.11 * static_cast<double>(i % 3);
  x.normalize();
  double lambda = 0.0;
  for (int it = 0; it < max_iterations; ++it) {
    Vector y = m * x;
    const double next = x.dot(y);
    const double norm = y.norm();
    if (norm == 0.0) return 0.0;
    x = y / norm;
    if (it > 10 && std::abs(next - lambda) < tolerance) return next;
    lambda = next;
  }
  return lambda;
}

/// Pearson correlation between two reports after putting each metric on the
/// decade of its original-graph value: both sides are multiplied by
/// 10^-floor(log10 |v_original|), and a zero original value leaves the metric unscaled.
inline double fidelity_pearson(const SpectralReport& synthetic, const SpectralReport& original) {
  const auto s = synthetic.values();
  const auto t = original.values();
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < s.size(); ++k) {
    require(std::isfinite(s[k]) && std::isfinite(t[k]), "fidelity_pearson: non-finite metric");
    const double factor = t[k] == 0.0 ? 1.0 : std::pow(10.0, -std::floor(std::log10(std::abs(t[k]))));
    xs.push_back(s[k] * factor);
    ys.push_back(t[k] * factor);
  }
  return pearson(xs, ys);
}

}  // namespace gcond
