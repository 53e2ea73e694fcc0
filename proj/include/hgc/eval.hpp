#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hgc/common.hpp"
#include "hgc/gcn.hpp"
#include "hgc/partition.hpp"
#include "hgc/trainer.hpp"

namespace hgc {

// Rows are ground truth, columns are predictions; both 1-based class ids
// stored at index id-1.
struct ConfusionMatrix {
  int classes = 0;
  std::vector<long> counts;  // classes x classes, row-major

  long& at(int truth, int pred) { return counts[(truth - 1) * classes + (pred - 1)]; }
  long at(int truth, int pred) const { return counts[(truth - 1) * classes + (pred - 1)]; }
  long total() const {
    long t = 0;
    for (long v : counts) t += v;
    return t;
  }
};

struct MetricsReport {
  std::vector<double> per_class;  // NaN for classes absent from the ground truth
  double oa = 0;
  double aa = 0;
  double kappa = 0;
};

// Every pixel takes the argmax class of its superpixel's node; ties go to
// the smallest class id. Unpartitioned superpixels violate upstream
// invariants and are reported as internal errors.
inline std::vector<int> predict_pixels(const GcnModel& model,
                                       const std::vector<SubGraph>& subgraphs,
                                       const SuperpixelMap& map) {
  std::vector<int> node_class(map.p, 0);
  std::vector<char> covered(map.p, 0);
  for (const auto& sub : subgraphs) {
    const ForwardCache cache = forward(model, sub.aprime, sub.graph.x);
    for (std::size_t i = 0; i < sub.nodes.size(); ++i) {
      const int node = sub.nodes[i];
      if (node < 0 || node >= map.p || covered[node])
        throw Error("internal error: sub-graphs do not partition the superpixels");
      covered[node] = 1;
      node_class[node] = detail::predicted_class(cache.p, static_cast<Eigen::Index>(i));
    }
  }
  for (int s = 0; s < map.p; ++s)
    if (!covered[s])
      throw Error("internal error: superpixel " + std::to_string(s) +
                  " missing from all sub-graphs");
  std::vector<int> pixels(map.assignment.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = node_class[map.assignment[i]];
  return pixels;
}

// Counts over eval_pixels only; every evaluated pixel must carry a label.
inline ConfusionMatrix confusion(const std::vector<int>& pred, const LabelMap& truth,
                                 const std::vector<int>& eval_pixels) {
  if (pred.size() != truth.labels.size())
    throw Error("prediction and ground truth sizes disagree");
  ConfusionMatrix m;
  m.classes = truth.num_classes;
  m.counts.assign(static_cast<std::size_t>(m.classes) * m.classes, 0);
  for (int idx : eval_pixels) {
    if (idx < 0 || idx >= static_cast<int>(pred.size()))
      throw Error("eval pixel outside the image");
    const int t = truth.labels[idx];
    if (t == 0) throw Error("eval pixel " + std::to_string(idx) + " has truth label 0");
    const int p = pred[idx];
    if (p < 1 || p > m.classes)
      throw Error("prediction out of class range at pixel " + std::to_string(idx));
    ++m.at(t, p);
  }
  return m;
}

// OA = trace/total, per-class accuracy = diagonal/row, AA = mean per-class,
// Cohen's kappa = (OA - p_e) / (1 - p_e). Classes with empty ground-truth
// rows are excluded from AA with a warning.
inline MetricsReport metrics(const ConfusionMatrix& m) {
  const long total = m.total();
  if (total <= 0) throw Error("metrics: empty confusion matrix");

  MetricsReport report;
  report.per_class.assign(m.classes, std::numeric_limits<double>::quiet_NaN());
  long trace = 0;
  double aa_sum = 0;
  int aa_count = 0;
  double pe = 0;
  for (int c = 1; c <= m.classes; ++c) {
    long row = 0, col = 0;
    for (int j = 1; j <= m.classes; ++j) {
      row += m.at(c, j);
      col += m.at(j, c);
    }
    trace += m.at(c, c);
    pe += static_cast<double>(row) * static_cast<double>(col);
    if (row == 0) {
      std::cerr << "warning: class " << c << " has no ground-truth pixels; excluded from AA\n";
      continue;
    }
    report.per_class[c - 1] = static_cast<double>(m.at(c, c)) / static_cast<double>(row);
    aa_sum += report.per_class[c - 1];
    ++aa_count;
  }
  pe /= static_cast<double>(total) * static_cast<double>(total);
  report.oa = static_cast<double>(trace) / static_cast<double>(total);
  report.aa = aa_count > 0 ? aa_sum / aa_count : std::numeric_limits<double>::quiet_NaN();
  report.kappa = pe < 1.0 ? (report.oa - pe) / (1.0 - pe) : (report.oa == 1.0 ? 1.0 : 0.0);
  return report;
}

// --- rendering --------------------------------------------------------------

using Palette = std::map<int, std::array<unsigned char, 3>>;

// Deterministic distinct colors via a golden-angle hue walk.
inline Palette default_palette(int classes) {
  Palette palette;
  for (int c = 1; c <= classes; ++c) {
    const double hue = std::fmod(0.618033988749895 * (c - 1), 1.0) * 6.0;
    const double sat = 0.85, val = c % 2 ? 0.95 : 0.72;
    const int sector = static_cast<int>(hue);
    const double f = hue - sector;
    const double p = val * (1 - sat), q = val * (1 - sat * f), t = val * (1 - sat * (1 - f));
    double r, g, b;
    switch (sector % 6) {
      case 0: r = val; g = t; b = p; break;
      case 1: r = q; g = val; b = p; break;
      case 2: r = p; g = val; b = t; break;
      case 3: r = p; g = q; b = val; break;
      case 4: r = t; g = p; b = val; break;
      default: r = val; g = p; b = q; break;
    }
    palette[c] = {static_cast<unsigned char>(std::lround(255 * r)),
                  static_cast<unsigned char>(std::lround(255 * g)),
                  static_cast<unsigned char>(std::lround(255 * b))};
  }
  return palette;
}

// "class r g b" lines
inline Palette load_palette(const std::string& path) {
  std::istringstream in(read_text_file(path));
  Palette palette;
  int cls, r, g, b;
  while (in >> cls >> r >> g >> b)
    palette[cls] = {static_cast<unsigned char>(r), static_cast<unsigned char>(g),
                    static_cast<unsigned char>(b)};
  return palette;
}

// P6 map of the per-pixel classes; unlabeled pixels render black.
inline std::string classification_map_ppm(const std::vector<int>& pred, int width,
                                          int height, const Palette& palette) {
  std::vector<unsigned char> rgb(static_cast<std::size_t>(width) * height * 3, 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == 0) continue;
    const auto it = palette.find(pred[i]);
    if (it == palette.end())
      throw Error("palette has no entry for class " + std::to_string(pred[i]));
    rgb[3 * i] = it->second[0];
    rgb[3 * i + 1] = it->second[1];
    rgb[3 * i + 2] = it->second[2];
  }
  return encode_ppm(width, height, rgb);
}

inline void export_map(const std::vector<int>& pred, int width, int height,
                       const Palette& palette, const std::string& path) {
  write_file_atomic(path, classification_map_ppm(pred, width, height, palette));
}

// --- reports ----------------------------------------------------------------

inline nlohmann::json metrics_to_json(const MetricsReport& report) {
  nlohmann::json j;
  j["oa"] = report.oa;
  j["aa"] = report.aa;
  j["kappa"] = report.kappa;
  auto per_class = nlohmann::json::array();
  for (double v : report.per_class)
    per_class.push_back(std::isnan(v) ? nlohmann::json() : nlohmann::json(v));
  j["per_class"] = per_class;
  return j;
}

// Per-class rows with an OA/AA/Kappa footer, mirroring the usual table layout.
inline std::string metrics_to_table(const MetricsReport& report) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    out << std::setw(5) << (c + 1) << "  ";
    if (std::isnan(report.per_class[c]))
      out << "    -\n";
    else
      out << std::setw(6) << 100.0 * report.per_class[c] << '\n';
  }
  out << "   OA  " << std::setw(6) << 100.0 * report.oa << '\n';
  out << "   AA  " << std::setw(6) << 100.0 * report.aa << '\n';
  out << "Kappa  " << std::setw(6) << 100.0 * report.kappa << '\n';
  return out.str();
}

}  // namespace hgc
