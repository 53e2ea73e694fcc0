#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <vector>

#include "hgc/common.hpp"
#include "hgc/hsi_io.hpp"

namespace hgc {

struct SuperpixelMap {
  int width = 0;
  int height = 0;
  int p = 0;                    // superpixel count
  std::vector<int> assignment;  // per-pixel id in 0..p-1
  std::vector<int> sizes;       // pixels per superpixel

  void validate() const {
    if (static_cast<std::size_t>(width) * height != assignment.size())
      throw Error("assignment length does not match dimensions");
    if (p <= 0) throw Error("superpixel count must be positive");
    std::vector<int> counts(p, 0);
    for (int a : assignment) {
      if (a < 0 || a >= p) throw Error("assignment id out of range");
      ++counts[a];
    }
    long total = 0;
    for (int s = 0; s < p; ++s) {
      if (counts[s] == 0) throw Error("empty superpixel " + std::to_string(s));
      if (counts[s] != sizes[s]) throw Error("stored sizes inconsistent");
      total += counts[s];
    }
    if (total != static_cast<long>(width) * height)
      throw Error("superpixel sizes do not sum to pixel count");
    // flood fill: each superpixel must be one 4-connected component
    std::vector<char> seen(assignment.size(), 0);
    std::vector<int> components(p, 0);
    std::vector<int> stack;
    for (std::size_t start = 0; start < assignment.size(); ++start) {
      if (seen[start]) continue;
      const int id = assignment[start];
      if (++components[id] > 1)
        throw Error("superpixel " + std::to_string(id) + " is disconnected");
      stack.assign(1, static_cast<int>(start));
      seen[start] = 1;
      while (!stack.empty()) {
        const int idx = stack.back();
        stack.pop_back();
        const int x = idx % width, y = idx / width;
        const int nbr[4] = {x > 0 ? idx - 1 : -1, x + 1 < width ? idx + 1 : -1,
                            y > 0 ? idx - width : -1, y + 1 < height ? idx + width : -1};
        for (int nb : nbr)
          if (nb >= 0 && !seen[nb] && assignment[nb] == id) {
            seen[nb] = 1;
            stack.push_back(nb);
          }
      }
    }
  }
};

// Eq-style per-superpixel mean spectra, rows aligned with superpixel ids.
struct NodeAttributes {
  Matrix x;  // p x F
};

// Per-superpixel labels for each split role; 0 means no pixels of that role.
struct NodeLabels {
  std::vector<int> train;
  std::vector<int> val;
  std::vector<int> test;
  std::vector<std::uint8_t> impure;  // >1 train class inside the superpixel
  int num_classes = 0;
};

namespace detail {

struct SlicCenter {
  double cx, cy;
  Vector feature;
};

inline double spectral_gradient(const HsiCube& cube, int x, int y) {
  const int xl = std::max(0, x - 1), xr = std::min(cube.width - 1, x + 1);
  const int yu = std::max(0, y - 1), yd = std::min(cube.height - 1, y + 1);
  double g = 0;
  const std::size_t n = cube.pixel_count();
  for (int b = 0; b < cube.bands; ++b) {
    const double* band = cube.data.data() + static_cast<std::size_t>(b) * n;
    const double dx = band[static_cast<std::size_t>(y) * cube.width + xr] -
                      band[static_cast<std::size_t>(y) * cube.width + xl];
    const double dy = band[static_cast<std::size_t>(yd) * cube.width + x] -
                      band[static_cast<std::size_t>(yu) * cube.width + x];
    g += dx * dx + dy * dy;
  }
  return g;
}

// Relabels so every superpixel is one 4-connected component: each id keeps
// its largest fragment, stray fragments are absorbed into the largest
// adjacent superpixel, then ids are compacted in row-major first-occurrence
// order.
inline void enforce_connectivity(std::vector<int>& label, int width, int height) {
  const int n = width * height;
  std::vector<int> comp(n, -1);
  std::vector<std::vector<int>> comp_pixels;
  std::vector<int> comp_label;
  std::vector<int> stack;
  for (int start = 0; start < n; ++start) {
    if (comp[start] >= 0) continue;
    const int cid = static_cast<int>(comp_pixels.size());
    comp_pixels.emplace_back();
    comp_label.push_back(label[start]);
    stack.assign(1, start);
    comp[start] = cid;
    while (!stack.empty()) {
      const int idx = stack.back();
      stack.pop_back();
      comp_pixels[cid].push_back(idx);
      const int x = idx % width, y = idx / width;
      const int nbr[4] = {x > 0 ? idx - 1 : -1, x + 1 < width ? idx + 1 : -1,
                          y > 0 ? idx - width : -1, y + 1 < height ? idx + width : -1};
      for (int nb : nbr)
        if (nb >= 0 && comp[nb] < 0 && label[nb] == label[start]) {
          comp[nb] = cid;
          stack.push_back(nb);
        }
    }
  }

  // keeper fragment per id: largest, ties to the one seen first (smallest pixel)
  std::map<int, int> keeper;
  for (int cid = 0; cid < static_cast<int>(comp_pixels.size()); ++cid) {
    auto it = keeper.find(comp_label[cid]);
    if (it == keeper.end()) {
      keeper[comp_label[cid]] = cid;
    } else if (comp_pixels[cid].size() > comp_pixels[it->second].size()) {
      it->second = cid;
    }
  }

  // Grow final regions outward: an orphan may only merge into an already
  // final region, so every region stays one component. Orphans not yet
  // touching a final region wait for a later sweep.
  const int max_label = *std::max_element(label.begin(), label.end());
  std::vector<int> final_label(n, -1);
  std::vector<long> final_size(static_cast<std::size_t>(max_label) + 1, 0);
  std::vector<int> orphans;
  for (int cid = 0; cid < static_cast<int>(comp_pixels.size()); ++cid) {
    if (keeper[comp_label[cid]] == cid) {
      for (int idx : comp_pixels[cid]) final_label[idx] = comp_label[cid];
      final_size[comp_label[cid]] += static_cast<long>(comp_pixels[cid].size());
    } else {
      orphans.push_back(cid);
    }
  }
  while (!orphans.empty()) {
    bool progress = false;
    std::vector<int> waiting;
    for (int cid : orphans) {
      int best = -1;
      for (int idx : comp_pixels[cid]) {
        const int x = idx % width, y = idx / width;
        const int nbr[4] = {x > 0 ? idx - 1 : -1, x + 1 < width ? idx + 1 : -1,
                            y > 0 ? idx - width : -1, y + 1 < height ? idx + width : -1};
        for (int nb : nbr) {
          if (nb < 0) continue;
          const int other = final_label[nb];
          if (other < 0) continue;
          if (best < 0 || final_size[other] > final_size[best] ||
              (final_size[other] == final_size[best] && other < best))
            best = other;
        }
      }
      if (best < 0) {
        waiting.push_back(cid);
        continue;
      }
      for (int idx : comp_pixels[cid]) final_label[idx] = best;
      final_size[best] += static_cast<long>(comp_pixels[cid].size());
      progress = true;
    }
    if (!progress) throw Error("orphan region with no neighbor");
    orphans = std::move(waiting);
  }
  label = std::move(final_label);

  // compact ids by first occurrence
  std::map<int, int> remap;
  for (int i = 0; i < n; ++i) {
    auto [it, inserted] = remap.try_emplace(label[i], static_cast<int>(remap.size()));
    label[i] = it->second;
  }
}

}  // namespace detail

// SLIC over the reduced spectra. Joint distance
//   D = sqrt(d_spec^2 + compactness^2 * (d_xy / S)^2),  S = sqrt(W*H / p_target),
// grid-seeded centers, fixed iteration count, then fragment absorption.
inline SuperpixelMap segment(const HsiCube& reduced, int p_target, double compactness,
                             int iters, std::uint64_t seed) {
  (void)seed;  // the procedure is deterministic; seed kept for interface stability
  const int W = reduced.width, H = reduced.height, F = reduced.bands;
  const long pixels = static_cast<long>(W) * H;
  if (p_target < 1) throw Error("p_target must be positive");
  if (p_target > pixels)
    throw Error("p_target " + std::to_string(p_target) + " exceeds pixel count " +
                std::to_string(pixels));
  if (iters < 1) throw Error("iters must be positive");

  const double S = std::sqrt(static_cast<double>(pixels) / p_target);
  const int nx = std::max(1, static_cast<int>(std::lround(W / S)));
  const int ny = std::max(1, static_cast<int>(std::lround(H / S)));

  std::vector<detail::SlicCenter> centers;
  centers.reserve(static_cast<std::size_t>(nx) * ny);
  const std::size_t n = reduced.pixel_count();
  auto feature_at = [&](int x, int y) {
    Vector f(F);
    for (int b = 0; b < F; ++b)
      f[b] = reduced.data[static_cast<std::size_t>(b) * n +
                          static_cast<std::size_t>(y) * W + x];
    return f;
  };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      detail::SlicCenter c;
      c.cx = (i + 0.5) * (static_cast<double>(W) / nx) - 0.5;
      c.cy = (j + 0.5) * (static_cast<double>(H) / ny) - 0.5;
      // seed the spectrum from the lowest-gradient pixel in a 3x3 patch
      int px = std::clamp(static_cast<int>(std::lround(c.cx)), 0, W - 1);
      int py = std::clamp(static_cast<int>(std::lround(c.cy)), 0, H - 1);
      double best_grad = detail::spectral_gradient(reduced, px, py);
      int bx = px, by = py;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int qx = px + dx, qy = py + dy;
          if (qx < 0 || qy < 0 || qx >= W || qy >= H) continue;
          const double g = detail::spectral_gradient(reduced, qx, qy);
          if (g < best_grad) {
            best_grad = g;
            bx = qx;
            by = qy;
          }
        }
      c.feature = feature_at(bx, by);
      centers.push_back(std::move(c));
    }
  }

  const double inv_s2 = (compactness * compactness) / (S * S);
  std::vector<int> label(pixels, -1);
  std::vector<double> dist(pixels);
  for (int iter = 0; iter < iters; ++iter) {
    std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
    std::fill(label.begin(), label.end(), -1);
    for (int cidx = 0; cidx < static_cast<int>(centers.size()); ++cidx) {
      const auto& c = centers[cidx];
      const int x0 = std::max(0, static_cast<int>(std::ceil(c.cx - 2 * S)));
      const int x1 = std::min(W - 1, static_cast<int>(std::floor(c.cx + 2 * S)));
      const int y0 = std::max(0, static_cast<int>(std::ceil(c.cy - 2 * S)));
      const int y1 = std::min(H - 1, static_cast<int>(std::floor(c.cy + 2 * S)));
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const std::size_t idx = static_cast<std::size_t>(y) * W + x;
          double d_spec2 = 0;
          for (int b = 0; b < F; ++b) {
            const double diff = reduced.data[static_cast<std::size_t>(b) * n + idx] -
                                c.feature[b];
            d_spec2 += diff * diff;
          }
          const double dx = x - c.cx, dy = y - c.cy;
          const double d2 = d_spec2 + inv_s2 * (dx * dx + dy * dy);
          if (d2 < dist[idx]) {
            dist[idx] = d2;
            label[idx] = cidx;
          }
        }
      }
    }
    // pixels outside every search window fall back to the spatially nearest center
    for (long idx = 0; idx < pixels; ++idx) {
      if (label[idx] >= 0) continue;
      const int x = static_cast<int>(idx % W), y = static_cast<int>(idx / W);
      double best = std::numeric_limits<double>::infinity();
      for (int cidx = 0; cidx < static_cast<int>(centers.size()); ++cidx) {
        const double dx = x - centers[cidx].cx, dy = y - centers[cidx].cy;
        const double d2 = dx * dx + dy * dy;
        if (d2 < best) {
          best = d2;
          label[idx] = cidx;
        }
      }
    }

    std::vector<double> sx(centers.size(), 0), sy(centers.size(), 0);
    std::vector<long> cnt(centers.size(), 0);
    Matrix fsum = Matrix::Zero(static_cast<Eigen::Index>(centers.size()), F);
    for (long idx = 0; idx < pixels; ++idx) {
      const int cidx = label[idx];
      sx[cidx] += static_cast<double>(idx % W);
      sy[cidx] += static_cast<double>(idx / W);
      ++cnt[cidx];
      for (int b = 0; b < F; ++b)
        fsum(cidx, b) += reduced.data[static_cast<std::size_t>(b) * n + idx];
    }
    for (std::size_t cidx = 0; cidx < centers.size(); ++cidx) {
      if (cnt[cidx] == 0) continue;  // empty cluster keeps its previous center
      centers[cidx].cx = sx[cidx] / cnt[cidx];
      centers[cidx].cy = sy[cidx] / cnt[cidx];
      for (int b = 0; b < F; ++b) centers[cidx].feature[b] = fsum(cidx, b) / cnt[cidx];
    }
  }

  detail::enforce_connectivity(label, W, H);

  SuperpixelMap map;
  map.width = W;
  map.height = H;
  map.assignment = std::move(label);
  map.p = *std::max_element(map.assignment.begin(), map.assignment.end()) + 1;
  map.sizes.assign(map.p, 0);
  for (int a : map.assignment) ++map.sizes[a];
  return map;
}

// Row i is the arithmetic mean of the feature vectors assigned to superpixel i.
inline NodeAttributes compute_attributes(const SuperpixelMap& map, const HsiCube& reduced) {
  if (map.width != reduced.width || map.height != reduced.height)
    throw Error("superpixel map and cube dimensions disagree");
  const int F = reduced.bands;
  const std::size_t n = reduced.pixel_count();
  NodeAttributes attrs;
  attrs.x = Matrix::Zero(map.p, F);
  for (std::size_t idx = 0; idx < n; ++idx) {
    const int s = map.assignment[idx];
    for (int b = 0; b < F; ++b)
      attrs.x(s, b) += reduced.data[static_cast<std::size_t>(b) * n + idx];
  }
  for (int s = 0; s < map.p; ++s) {
    if (map.sizes[s] == 0) throw Error("empty superpixel " + std::to_string(s));
    attrs.x.row(s) /= static_cast<double>(map.sizes[s]);
  }
  return attrs;
}

namespace detail {

// majority class, ties to the smallest id; 0 when no votes
inline int majority_label(const std::map<int, int>& votes) {
  int best = 0, best_count = 0;
  for (const auto& [cls, count] : votes) {
    if (count > best_count) {
      best = cls;
      best_count = count;
    }
  }
  return best;
}

}  // namespace detail

// Train/val labels propagate from pixels to their superpixels by majority
// vote; superpixels whose train pixels span several classes keep the
// majority (smallest id on ties) and are flagged impure.
inline NodeLabels aggregate_labels(const SuperpixelMap& map, const DatasetSplit& split,
                                   const LabelMap& labels) {
  if (labels.width != map.width || labels.height != map.height)
    throw Error("label map and superpixel map dimensions disagree");
  const auto pixel_ok = [&](int idx) {
    return idx >= 0 && idx < static_cast<int>(map.assignment.size());
  };

  NodeLabels out;
  out.num_classes = labels.num_classes;
  out.train.assign(map.p, 0);
  out.val.assign(map.p, 0);
  out.test.assign(map.p, 0);
  out.impure.assign(map.p, 0);

  std::vector<std::map<int, int>> votes(map.p);
  auto tally = [&](const std::vector<int>& pixels, int cls) {
    for (int idx : pixels) {
      if (!pixel_ok(idx)) throw Error("split pixel outside the image");
      votes[map.assignment[idx]][cls] += 1;
    }
  };

  for (int c = 0; c < static_cast<int>(split.train_pixels.size()); ++c)
    tally(split.train_pixels[c], c + 1);
  for (int s = 0; s < map.p; ++s) {
    out.train[s] = detail::majority_label(votes[s]);
    out.impure[s] = votes[s].size() > 1 ? 1 : 0;
    votes[s].clear();
  }

  for (int c = 0; c < static_cast<int>(split.val_pixels.size()); ++c)
    tally(split.val_pixels[c], c + 1);
  for (int s = 0; s < map.p; ++s) {
    out.val[s] = detail::majority_label(votes[s]);
    votes[s].clear();
  }

  for (int idx : split.test_pixels) {
    if (!pixel_ok(idx)) throw Error("split pixel outside the image");
    votes[map.assignment[idx]][labels.labels[idx]] += 1;
  }
  for (int s = 0; s < map.p; ++s) out.test[s] = detail::majority_label(votes[s]);
  return out;
}

// Gray render of the first band with superpixel boundaries in red.
inline std::string segmentation_overlay_ppm(const SuperpixelMap& map, const HsiCube& reduced) {
  const int W = map.width, H = map.height;
  const std::size_t n = reduced.pixel_count();
  double lo = reduced.data[0], hi = reduced.data[0];
  for (std::size_t i = 0; i < n; ++i) {
    lo = std::min(lo, reduced.data[i]);
    hi = std::max(hi, reduced.data[i]);
  }
  const double range = hi > lo ? hi - lo : 1.0;
  std::vector<unsigned char> rgb(static_cast<std::size_t>(W) * H * 3);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * W + x;
      const int id = map.assignment[idx];
      const bool boundary = (x + 1 < W && map.assignment[idx + 1] != id) ||
                            (y + 1 < H && map.assignment[idx + W] != id);
      if (boundary) {
        rgb[3 * idx] = 255;
        rgb[3 * idx + 1] = 0;
        rgb[3 * idx + 2] = 0;
      } else {
        const auto g = static_cast<unsigned char>(
            std::clamp(255.0 * (reduced.data[idx] - lo) / range, 0.0, 255.0));
        rgb[3 * idx] = rgb[3 * idx + 1] = rgb[3 * idx + 2] = g;
      }
    }
  }
  return encode_ppm(W, H, rgb);
}

}  // namespace hgc
