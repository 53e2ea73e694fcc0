#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "hgc/common.hpp"
#include "hgc/hsi_io.hpp"

namespace hgc {

struct PcaModel {
  Vector mean;               // per-band mean, length B
  Matrix components;         // d x B, orthonormal rows, descending variance
  Vector explained_variance; // length d, non-increasing, non-negative
};

namespace detail {

// Cyclic Jacobi on a symmetric matrix. The matrix is scaled to unit
// Frobenius norm first so the 1e-10 off-diagonal threshold is scale-free;
// raw radiance covariances can sit many orders of magnitude above 1.
inline void jacobi_eigen_symmetric(Matrix a, Vector& eigenvalues, Matrix& eigenvectors) {
  const int n = static_cast<int>(a.rows());
  eigenvectors = Matrix::Identity(n, n);
  if (n == 1) {
    eigenvalues = Vector::Constant(1, a(0, 0));
    return;
  }

  const double scale = a.norm();
  if (scale > 0) a /= scale;

  auto off_diagonal_norm = [&a, n]() {
    double s = 0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) s += 2 * a(p, q) * a(p, q);
    return std::sqrt(s);
  };

  const double tol = 1e-10;
  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps && off_diagonal_norm() >= tol; ++sweep) {
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double cs = 1.0 / std::sqrt(t * t + 1);
        const double sn = t * cs;
        for (int i = 0; i < n; ++i) {
          const double aip = a(i, p), aiq = a(i, q);
          a(i, p) = cs * aip - sn * aiq;
          a(i, q) = sn * aip + cs * aiq;
        }
        for (int i = 0; i < n; ++i) {
          const double api = a(p, i), aqi = a(q, i);
          a(p, i) = cs * api - sn * aqi;
          a(q, i) = sn * api + cs * aqi;
        }
        for (int i = 0; i < n; ++i) {
          const double vip = eigenvectors(i, p), viq = eigenvectors(i, q);
          eigenvectors(i, p) = cs * vip - sn * viq;
          eigenvectors(i, q) = sn * vip + cs * viq;
        }
      }
    }
  }

  eigenvalues = a.diagonal() * scale;
}

}  // namespace detail

// Covariance uses the 1/n population convention.
inline PcaModel fit_pca(const HsiCube& cube, int d) {
  const int B = cube.bands;
  const std::size_t n = cube.pixel_count();
  if (d < 1 || d > B)
    throw Error("pca_dim " + std::to_string(d) + " out of range 1.." + std::to_string(B));
  if (n < static_cast<std::size_t>(d) + 1)
    throw Error("need at least pca_dim+1 pixels to fit");

  Vector mean = Vector::Zero(B);
  for (int b = 0; b < B; ++b) {
    double s = 0;
    const double* band = cube.data.data() + static_cast<std::size_t>(b) * n;
    for (std::size_t i = 0; i < n; ++i) s += band[i];
    mean[b] = s / static_cast<double>(n);
  }

  // Accumulate the covariance in pixel blocks; fixed block order keeps the
  // result identical no matter the cube size.
  Matrix cov = Matrix::Zero(B, B);
  const std::size_t block = 4096;
  Matrix centered(block, B);
  for (std::size_t start = 0; start < n; start += block) {
    const std::size_t len = std::min(block, n - start);
    for (int b = 0; b < B; ++b) {
      const double* band = cube.data.data() + static_cast<std::size_t>(b) * n;
      for (std::size_t i = 0; i < len; ++i)
        centered(static_cast<Eigen::Index>(i), b) = band[start + i] - mean[b];
    }
    cov.noalias() += centered.topRows(static_cast<Eigen::Index>(len)).transpose() *
                     centered.topRows(static_cast<Eigen::Index>(len));
  }
  cov /= static_cast<double>(n);

  if (cov.norm() == 0.0)
    throw Error("degenerate cube: zero covariance (all pixels identical)");

  Vector eigenvalues;
  Matrix eigenvectors;  // columns
  detail::jacobi_eigen_symmetric(cov, eigenvalues, eigenvectors);

  std::vector<int> order(B);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&eigenvalues](int i, int j) { return eigenvalues[i] > eigenvalues[j]; });

  PcaModel model;
  model.mean = mean;
  model.components.resize(d, B);
  model.explained_variance.resize(d);
  for (int r = 0; r < d; ++r) {
    Vector v = eigenvectors.col(order[r]);
    int arg = 0;
    for (int i = 1; i < B; ++i)
      if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
    if (v[arg] < 0) v = -v;  // sign convention: largest-magnitude entry positive
    model.components.row(r) = v.transpose();
    model.explained_variance[r] = std::max(0.0, eigenvalues[order[r]]);
  }
  return model;
}

// Maps each pixel to components * (x - mean); spatial dims preserved.
inline HsiCube transform(const HsiCube& cube, const PcaModel& model) {
  const int B = static_cast<int>(model.mean.size());
  if (cube.bands != B)
    throw Error("cube has " + std::to_string(cube.bands) + " bands, model expects " +
                std::to_string(B));
  const int d = static_cast<int>(model.components.rows());
  const std::size_t n = cube.pixel_count();

  HsiCube out;
  out.width = cube.width;
  out.height = cube.height;
  out.bands = d;
  out.data.assign(n * static_cast<std::size_t>(d), 0.0);

  const std::size_t block = 4096;
  Matrix chunk(block, B);
  for (std::size_t start = 0; start < n; start += block) {
    const std::size_t len = std::min(block, n - start);
    for (int b = 0; b < B; ++b) {
      const double* band = cube.data.data() + static_cast<std::size_t>(b) * n;
      for (std::size_t i = 0; i < len; ++i)
        chunk(static_cast<Eigen::Index>(i), b) = band[start + i] - model.mean[b];
    }
    const Matrix projected =
        chunk.topRows(static_cast<Eigen::Index>(len)) * model.components.transpose();
    for (int r = 0; r < d; ++r) {
      double* band = out.data.data() + static_cast<std::size_t>(r) * n;
      for (std::size_t i = 0; i < len; ++i)
        band[start + i] = projected(static_cast<Eigen::Index>(i), r);
    }
  }
  return out;
}

inline nlohmann::json pca_model_to_json(const PcaModel& model) {
  nlohmann::json j;
  j["mean"] = std::vector<double>(model.mean.data(), model.mean.data() + model.mean.size());
  j["explained_variance"] =
      std::vector<double>(model.explained_variance.data(),
                          model.explained_variance.data() + model.explained_variance.size());
  auto rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < model.components.rows(); ++r) {
    std::vector<double> row(model.components.cols());
    for (Eigen::Index c = 0; c < model.components.cols(); ++c) row[c] = model.components(r, c);
    rows.push_back(row);
  }
  j["components"] = rows;
  return j;
}

}  // namespace hgc
