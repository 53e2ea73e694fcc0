#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "hgc/common.hpp"
#include "hgc/graph.hpp"
#include "hgc/superpixel.hpp"

namespace hgc {

struct GcnDims {
  int feature = 0;   // F, attribute width
  int conv = 128;    // 1x1 convolution width
  int hidden = 64;   // graph convolution width
  int classes = 0;   // C

  bool operator==(const GcnDims&) const = default;
};

// Two graph convolutions behind a leading 1x1 feature transform:
//   P = softmax(A' relu(A' relu(X Theta) W0) W1)
struct GcnModel {
  GcnDims dims;
  Matrix theta;  // F x conv
  Matrix w0;     // conv x hidden
  Matrix w1;     // hidden x classes
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long t = 0;
  Matrix m_theta, v_theta, m_w0, v_w0, m_w1, v_w1;
};

struct ForwardCache {
  Matrix h0;  // relu(X Theta)
  Matrix z1;  // A' h0 W0
  Matrix h1;  // relu(z1)
  Matrix z2;  // A' h1 W1
  Matrix p;   // row softmax of z2
};

struct Gradients {
  Matrix theta, w0, w1;
};

namespace detail {

inline Matrix glorot_uniform(int rows, int cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / (rows + cols));
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform(-bound, bound);
  return m;
}

inline void check_finite(const Matrix& m, const char* layer) {
  if (!m.allFinite())
    throw Error(std::string("non-finite values in layer ") + layer);
}

inline Matrix relu(const Matrix& m) { return m.cwiseMax(0.0); }

// Row-wise softmax with max subtraction.
inline Matrix row_softmax(const Matrix& z) {
  Matrix p(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double mx = z.row(r).maxCoeff();
    double sum = 0;
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      p(r, c) = std::exp(z(r, c) - mx);
      sum += p(r, c);
    }
    p.row(r) /= sum;
  }
  return p;
}

}  // namespace detail

// Glorot-uniform entries, filled theta -> w0 -> w1 in row-major order.
inline GcnModel init_model(const GcnDims& dims, std::uint64_t seed) {
  if (dims.feature < 1 || dims.conv < 1 || dims.hidden < 1 || dims.classes < 1)
    throw Error("model dimensions must be positive");
  GcnModel model;
  model.dims = dims;
  Rng rng(seed);
  model.theta = detail::glorot_uniform(dims.feature, dims.conv, rng);
  model.w0 = detail::glorot_uniform(dims.conv, dims.hidden, rng);
  model.w1 = detail::glorot_uniform(dims.hidden, dims.classes, rng);
  return model;
}

inline ForwardCache forward(const GcnModel& model, const NormalizedAdjacency& aprime,
                            const Matrix& x) {
  if (x.cols() != model.dims.feature || x.rows() != aprime.n)
    throw Error("forward: attribute shape disagrees with model/adjacency");
  ForwardCache cache;
  cache.h0 = detail::relu(x * model.theta);
  detail::check_finite(cache.h0, "conv1x1");
  cache.z1 = aprime.multiply(cache.h0) * model.w0;
  detail::check_finite(cache.z1, "graphconv1");
  cache.h1 = detail::relu(cache.z1);
  cache.z2 = aprime.multiply(cache.h1) * model.w1;
  detail::check_finite(cache.z2, "graphconv2");
  cache.p = detail::row_softmax(cache.z2);
  detail::check_finite(cache.p, "softmax");
  return cache;
}

// Unreduced cross-entropy over the masked nodes: -sum ln P[g, label_g].
// labels holds class ids 1..C (0 = unlabeled); mask selects the nodes.
inline double loss(const Matrix& p, const std::vector<int>& labels,
                   const std::vector<std::uint8_t>& mask) {
  if (static_cast<Eigen::Index>(labels.size()) != p.rows() || mask.size() != labels.size())
    throw Error("loss: label/mask size mismatch");
  double total = 0;
  std::size_t selected = 0;
  for (std::size_t g = 0; g < mask.size(); ++g) {
    if (!mask[g]) continue;
    const int cls = labels[g];
    if (cls < 1 || cls > p.cols())
      throw Error("loss: masked node " + std::to_string(g) + " has no valid label");
    total -= std::log(p(static_cast<Eigen::Index>(g), cls - 1));
    ++selected;
  }
  if (selected == 0) throw Error("loss: mask selects no nodes");
  return total;
}

// Analytic gradients of the masked cross-entropy; softmax and loss combine
// into (P - Y) on masked rows, and A' re-enters as itself (symmetric).
inline Gradients backward(const ForwardCache& cache, const GcnModel& model,
                          const NormalizedAdjacency& aprime, const Matrix& x,
                          const std::vector<int>& labels,
                          const std::vector<std::uint8_t>& mask) {
  Matrix dz2 = Matrix::Zero(cache.p.rows(), cache.p.cols());
  std::size_t selected = 0;
  for (std::size_t g = 0; g < mask.size(); ++g) {
    if (!mask[g]) continue;
    const int cls = labels[g];
    if (cls < 1 || cls > cache.p.cols())
      throw Error("backward: masked node " + std::to_string(g) + " has no valid label");
    dz2.row(static_cast<Eigen::Index>(g)) = cache.p.row(static_cast<Eigen::Index>(g));
    dz2(static_cast<Eigen::Index>(g), cls - 1) -= 1.0;
    ++selected;
  }
  if (selected == 0) throw Error("backward: mask selects no nodes");

  Gradients grads;
  const Matrix a_dz2 = aprime.multiply(dz2);
  grads.w1 = cache.h1.transpose() * a_dz2;
  Matrix dz1 = (a_dz2 * model.w1.transpose()).cwiseProduct(
      (cache.z1.array() > 0.0).cast<double>().matrix());
  const Matrix a_dz1 = aprime.multiply(dz1);
  grads.w0 = cache.h0.transpose() * a_dz1;
  Matrix dh0 = (a_dz1 * model.w0.transpose()).cwiseProduct(
      (cache.h0.array() > 0.0).cast<double>().matrix());
  grads.theta = x.transpose() * dh0;
  return grads;
}

// Standard Adam with bias correction; one shared step counter.
inline void adam_step(GcnModel& model, const Gradients& grads, AdamState& state, double lr) {
  if (state.t == 0) {
    state.m_theta = Matrix::Zero(model.theta.rows(), model.theta.cols());
    state.v_theta = state.m_theta;
    state.m_w0 = Matrix::Zero(model.w0.rows(), model.w0.cols());
    state.v_w0 = state.m_w0;
    state.m_w1 = Matrix::Zero(model.w1.rows(), model.w1.cols());
    state.v_w1 = state.m_w1;
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  auto update = [&](Matrix& param, Matrix& m, Matrix& v, const Matrix& g) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    const Matrix m_hat = m / bc1;
    const Matrix v_hat = v / bc2;
    param -= lr * (m_hat.array() / (v_hat.array().sqrt() + state.eps)).matrix();
  };
  update(model.theta, state.m_theta, state.v_theta, grads.theta);
  update(model.w0, state.m_w0, state.v_w0, grads.w0);
  update(model.w1, state.m_w1, state.v_w1, grads.w1);
}

// --- checkpoints ------------------------------------------------------------

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    rows.push_back(row);
  }
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return {};
  const auto cols = static_cast<Eigen::Index>(j.at(0).size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != cols)
      throw Error("ragged matrix in checkpoint");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

}  // namespace detail

inline nlohmann::json checkpoint_to_json(const GcnModel& model, const AdamState& state) {
  nlohmann::json j;
  j["format"] = "hgc-checkpoint";
  j["version"] = 1;
  j["dims"] = {{"feature", model.dims.feature},
               {"conv", model.dims.conv},
               {"hidden", model.dims.hidden},
               {"classes", model.dims.classes}};
  j["theta"] = detail::matrix_to_json(model.theta);
  j["w0"] = detail::matrix_to_json(model.w0);
  j["w1"] = detail::matrix_to_json(model.w1);
  nlohmann::json adam;
  adam["beta1"] = state.beta1;
  adam["beta2"] = state.beta2;
  adam["eps"] = state.eps;
  adam["t"] = state.t;
  if (state.t > 0) {
    adam["m_theta"] = detail::matrix_to_json(state.m_theta);
    adam["v_theta"] = detail::matrix_to_json(state.v_theta);
    adam["m_w0"] = detail::matrix_to_json(state.m_w0);
    adam["v_w0"] = detail::matrix_to_json(state.v_w0);
    adam["m_w1"] = detail::matrix_to_json(state.m_w1);
    adam["v_w1"] = detail::matrix_to_json(state.v_w1);
  }
  j["adam"] = adam;
  return j;
}

inline std::pair<GcnModel, AdamState> checkpoint_from_json(const nlohmann::json& j) {
  if (!j.contains("format") || j.at("format") != "hgc-checkpoint")
    throw Error("not a checkpoint file");
  if (j.at("version").get<int>() != 1) throw Error("unsupported checkpoint version");
  GcnModel model;
  const auto& d = j.at("dims");
  model.dims.feature = d.at("feature").get<int>();
  model.dims.conv = d.at("conv").get<int>();
  model.dims.hidden = d.at("hidden").get<int>();
  model.dims.classes = d.at("classes").get<int>();
  model.theta = detail::matrix_from_json(j.at("theta"));
  model.w0 = detail::matrix_from_json(j.at("w0"));
  model.w1 = detail::matrix_from_json(j.at("w1"));
  AdamState state;
  const auto& adam = j.at("adam");
  state.beta1 = adam.at("beta1").get<double>();
  state.beta2 = adam.at("beta2").get<double>();
  state.eps = adam.at("eps").get<double>();
  state.t = adam.at("t").get<long>();
  if (state.t > 0) {
    state.m_theta = detail::matrix_from_json(adam.at("m_theta"));
    state.v_theta = detail::matrix_from_json(adam.at("v_theta"));
    state.m_w0 = detail::matrix_from_json(adam.at("m_w0"));
    state.v_w0 = detail::matrix_from_json(adam.at("v_w0"));
    state.m_w1 = detail::matrix_from_json(adam.at("m_w1"));
    state.v_w1 = detail::matrix_from_json(adam.at("v_w1"));
  }
  return {std::move(model), std::move(state)};
}

inline void save_checkpoint(const GcnModel& model, const AdamState& state,
                            const std::string& path) {
  write_file_atomic(path, checkpoint_to_json(model, state).dump() + "\n");
}

inline std::pair<GcnModel, AdamState> load_checkpoint(const std::string& path) {
  return checkpoint_from_json(detail::parse_json_file(path));
}

}  // namespace hgc
