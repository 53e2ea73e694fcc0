#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hgc/common.hpp"
#include "hgc/gcn.hpp"
#include "hgc/partition.hpp"

namespace hgc {

enum class Role { kTrain, kVal, kTest };

struct TrainHistory {
  std::vector<double> loss;       // mean step loss per epoch
  std::vector<double> train_acc;  // node-level accuracy
  std::vector<double> val_oa;     // NaN when no validation nodes exist
  int best_epoch = 0;
  long total_steps = 0;
};

struct TrainResult {
  GcnModel model;  // checkpoint with the best validation OA
  AdamState state;
  TrainHistory history;
};

// Seed tags; the model init stream and the sub-graph sampler stream are
// independent so sampling never perturbs the arithmetic.
inline constexpr std::uint64_t kModelSeedTag = 0x6d6f64656c5f7467ULL;
inline constexpr std::uint64_t kSampleSeedTag = 0x73616d706c655f74ULL;

namespace detail {

inline const std::vector<int>& role_labels(const NodeLabels& labels, Role role) {
  switch (role) {
    case Role::kTrain: return labels.train;
    case Role::kVal: return labels.val;
    default: return labels.test;
  }
}

// argmax with ties to the smallest class id
inline int predicted_class(const Matrix& p, Eigen::Index row) {
  int best = 0;
  for (Eigen::Index c = 1; c < p.cols(); ++c)
    if (p(row, c) > p(row, best)) best = static_cast<int>(c);
  return best + 1;
}

}  // namespace detail

// Fraction of role-labeled nodes predicted correctly; absent when the role
// has no nodes anywhere.
inline std::optional<double> evaluate_epoch(const GcnModel& model,
                                            const std::vector<SubGraph>& subgraphs,
                                            Role role) {
  long correct = 0, total = 0;
  for (const auto& sub : subgraphs) {
    const std::vector<int>& labels = detail::role_labels(sub.labels, role);
    bool any = false;
    for (int v : labels)
      if (v > 0) {
        any = true;
        break;
      }
    if (!any) continue;
    const ForwardCache cache = forward(model, sub.aprime, sub.graph.x);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == 0) continue;
      ++total;
      if (detail::predicted_class(cache.p, static_cast<Eigen::Index>(i)) == labels[i])
        ++correct;
    }
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(correct) / static_cast<double>(total);
}

// Training loop: epochs x (5 * c) optimizer steps, each on a uniformly
// sampled sub-graph. Sub-graphs without a train-labeled node are resampled
// without consuming the step. Returns the best-validation checkpoint.
inline TrainResult train(const std::vector<SubGraph>& subgraphs, const RunConfig& cfg,
                         std::uint64_t seed) {
  if (subgraphs.empty()) throw Error("train: no sub-graphs");
  const int c = static_cast<int>(subgraphs.size());

  std::vector<std::vector<std::uint8_t>> train_masks(c);
  std::vector<char> has_train(c, 0);
  int num_classes = 0;
  for (int i = 0; i < c; ++i) {
    const auto& labels = subgraphs[i].labels;
    train_masks[i].assign(labels.train.size(), 0);
    for (std::size_t v = 0; v < labels.train.size(); ++v) {
      if (labels.train[v] > 0) {
        train_masks[i][v] = 1;
        has_train[i] = 1;
      }
      num_classes = std::max({num_classes, labels.train[v], labels.val[v], labels.test[v]});
    }
  }
  if (std::find(has_train.begin(), has_train.end(), 1) == has_train.end())
    throw Error("train: no sub-graph contains a train-labeled node");

  GcnDims dims;
  dims.feature = static_cast<int>(subgraphs[0].graph.x.cols());
  dims.conv = cfg.conv_dim;
  dims.hidden = cfg.hidden_units;
  dims.classes = num_classes;

  GcnModel model = init_model(dims, splitmix64(seed ^ kModelSeedTag));
  AdamState state;
  Rng sampler(splitmix64(seed ^ kSampleSeedTag));

  TrainHistory history;
  history.loss.reserve(cfg.epochs);
  history.train_acc.reserve(cfg.epochs);
  history.val_oa.reserve(cfg.epochs);

  GcnModel best_model = model;
  AdamState best_state = state;
  double best_val = -1.0;
  bool any_val = false;
  const long steps_per_epoch = 5L * c;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0;
    for (long step = 0; step < steps_per_epoch; ++step) {
      int idx = sampler.index(c);
      while (!has_train[idx]) idx = sampler.index(c);
      const SubGraph& sub = subgraphs[idx];
      const ForwardCache cache = forward(model, sub.aprime, sub.graph.x);
      loss_sum += loss(cache.p, sub.labels.train, train_masks[idx]);
      const Gradients grads =
          backward(cache, model, sub.aprime, sub.graph.x, sub.labels.train, train_masks[idx]);
      adam_step(model, grads, state, cfg.learning_rate);
      ++history.total_steps;
    }
    history.loss.push_back(loss_sum / static_cast<double>(steps_per_epoch));
    history.train_acc.push_back(evaluate_epoch(model, subgraphs, Role::kTrain).value_or(
        std::numeric_limits<double>::quiet_NaN()));
    const std::optional<double> val = evaluate_epoch(model, subgraphs, Role::kVal);
    history.val_oa.push_back(val.value_or(std::numeric_limits<double>::quiet_NaN()));
    if (val) {
      any_val = true;
      if (*val > best_val) {
        best_val = *val;
        best_model = model;
        best_state = state;
        history.best_epoch = epoch;
      }
    }
  }
  if (!any_val) {  // nothing to select on; keep the final model
    best_model = model;
    best_state = state;
    history.best_epoch = cfg.epochs - 1;
  }

  TrainResult result;
  result.model = std::move(best_model);
  result.state = std::move(best_state);
  result.history = std::move(history);
  return result;
}

inline std::string history_to_csv(const TrainHistory& history) {
  std::ostringstream out;
  out << "epoch,loss,train_acc,val_oa\n";
  for (std::size_t e = 0; e < history.loss.size(); ++e) {
    out << e << ',' << format_double(history.loss[e]) << ','
        << format_double(history.train_acc[e]) << ',' << format_double(history.val_oa[e])
        << '\n';
  }
  return out.str();
}

}  // namespace hgc
