#pragma once

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hgc/common.hpp"

namespace hgc {

// W x H x B radiance cube, band-sequential with row-major bands.
// Index of (x, y, band) is band*W*H + y*W + x.
struct HsiCube {
  int width = 0;
  int height = 0;
  int bands = 0;
  std::vector<double> data;

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }

  double at(int x, int y, int band) const {
    return data[static_cast<std::size_t>(band) * pixel_count() +
                static_cast<std::size_t>(y) * width + x];
  }
  double& at(int x, int y, int band) {
    return data[static_cast<std::size_t>(band) * pixel_count() +
                static_cast<std::size_t>(y) * width + x];
  }

  Vector spectrum(std::size_t pixel) const {
    Vector s(bands);
    const std::size_t n = pixel_count();
    for (int b = 0; b < bands; ++b) s[b] = data[b * n + pixel];
    return s;
  }

  void validate() const {
    if (width <= 0 || height <= 0 || bands <= 0)
      throw Error("cube dimensions must be positive");
    if (data.size() != pixel_count() * static_cast<std::size_t>(bands))
      throw Error("cube data length does not match dimensions");
    for (double v : data)
      if (!std::isfinite(v)) throw Error("cube contains non-finite values");
  }
};

// Per-pixel class ids; 0 marks unlabeled, classes run 1..num_classes.
struct LabelMap {
  int width = 0;
  int height = 0;
  int num_classes = 0;
  std::vector<int> labels;

  int at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }

  std::vector<int> class_counts() const {
    std::vector<int> counts(num_classes + 1, 0);
    for (int v : labels) ++counts[v];
    return counts;
  }

  std::size_t labeled_count() const {
    std::size_t n = 0;
    for (int v : labels) n += v != 0;
    return n;
  }
};

// Seeded labeled/validation/test pixel split. train_pixels and val_pixels
// are indexed by class (entry c-1 holds class c); test_pixels is flat.
struct DatasetSplit {
  std::vector<std::vector<int>> train_pixels;
  std::vector<std::vector<int>> val_pixels;
  std::vector<int> test_pixels;
  std::uint64_t seed = 0;
};

struct RunConfig {
  int pca_dim = 30;
  int num_superpixels = 0;  // 0 resolves to min(2000, W*H/14) at run time
  double compactness = 1.0;
  int slic_iters = 10;
  int o = 2;
  int k = 5;
  int c = 5;
  int hidden_units = 64;
  int conv_dim = 128;
  int epochs = 400;
  double learning_rate = 0.005;
  std::uint64_t seed = 1;
  int per_class = 30;
  int per_class_small = 15;
  double val_fraction = 0.1;
  double balance_eps = 0.1;

  void validate() const {
    if (pca_dim < 1) throw Error("pca_dim must be positive");
    if (num_superpixels < 0) throw Error("num_superpixels must be positive or 0 (auto)");
    if (compactness <= 0) throw Error("compactness must be positive");
    if (slic_iters < 1) throw Error("slic_iters must be positive");
    if (o < 1) throw Error("o must be >= 1");
    if (k < 1) throw Error("k must be >= 1");
    if (c < 1) throw Error("c must be >= 1");
    if (hidden_units < 1) throw Error("hidden_units must be positive");
    if (conv_dim < 1) throw Error("conv_dim must be positive");
    if (epochs < 1) throw Error("epochs must be positive");
    if (learning_rate <= 0) throw Error("learning_rate must be positive");
    if (per_class < 1 || per_class_small < 1 || per_class < per_class_small)
      throw Error("require per_class >= per_class_small >= 1");
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
      throw Error("val_fraction must be in (0, 1)");
    if (balance_eps <= 0) throw Error("balance_eps must be positive");
  }

  int resolve_num_superpixels(int width, int height) const {
    if (num_superpixels > 0) return num_superpixels;
    const long pixels = static_cast<long>(width) * height;
    return static_cast<int>(std::min<long>(2000, std::max<long>(1, pixels / 14)));
  }
};

namespace detail {

inline nlohmann::json parse_json_file(const std::string& path) {
  const std::string text = read_text_file(path);
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error("ill-formed JSON in " + path);
  return j;
}

inline float decode_f32le(const unsigned char* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                             (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) |
                             (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(bits);
}

inline void encode_f32le(float v, unsigned char* p) {
  const std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
  p[0] = static_cast<unsigned char>(bits & 0xff);
  p[1] = static_cast<unsigned char>((bits >> 8) & 0xff);
  p[2] = static_cast<unsigned char>((bits >> 16) & 0xff);
  p[3] = static_cast<unsigned char>((bits >> 24) & 0xff);
}

}  // namespace detail

// Reads a <name>.hgc.json header plus its raw f32 little-endian payload.
inline HsiCube load_cube(const std::string& header_path) {
  if (!std::filesystem::exists(header_path))
    throw IoError("cube header not found: " + header_path);
  const nlohmann::json j = detail::parse_json_file(header_path);
  for (const char* key : {"width", "height", "bands", "dtype", "payload"})
    if (!j.contains(key)) throw Error("cube header missing field '" + std::string(key) +
                                      "': " + header_path);
  HsiCube cube;
  cube.width = j.at("width").get<int>();
  cube.height = j.at("height").get<int>();
  cube.bands = j.at("bands").get<int>();
  if (cube.width <= 0 || cube.height <= 0 || cube.bands <= 0)
    throw Error("cube header declares non-positive dimensions: " + header_path);
  if (j.at("dtype").get<std::string>() != "f32le")
    throw Error("unsupported dtype (expected f32le): " + header_path);

  const std::filesystem::path payload_path =
      std::filesystem::path(header_path).parent_path() /
      j.at("payload").get<std::string>();
  std::ifstream in(payload_path, std::ios::binary);
  if (!in) throw IoError("cube payload not found: " + payload_path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());

  const std::size_t expected =
      cube.pixel_count() * static_cast<std::size_t>(cube.bands) * 4;
  if (bytes.size() != expected)
    throw Error("payload length mismatch: " + payload_path.string() + " holds " +
                std::to_string(bytes.size() / 4) + " values, header declares " +
                std::to_string(expected / 4));

  cube.data.resize(expected / 4);
  for (std::size_t i = 0; i < cube.data.size(); ++i) {
    const float v = detail::decode_f32le(bytes.data() + 4 * i);
    if (!std::isfinite(v))
      throw Error("cube contains non-finite values: " + payload_path.string());
    cube.data[i] = static_cast<double>(v);
  }
  return cube;
}

inline void save_cube(const HsiCube& cube, const std::string& header_path) {
  cube.validate();
  const std::filesystem::path hp(header_path);
  std::string stem = hp.filename().string();
  const std::string suffix = ".hgc.json";
  if (stem.size() > suffix.size() && stem.ends_with(suffix))
    stem = stem.substr(0, stem.size() - suffix.size());
  const std::string payload_name = stem + ".hgc.bin";

  nlohmann::json j;
  j["width"] = cube.width;
  j["height"] = cube.height;
  j["bands"] = cube.bands;
  j["dtype"] = "f32le";
  j["payload"] = payload_name;

  std::string payload(cube.data.size() * 4, '\0');
  for (std::size_t i = 0; i < cube.data.size(); ++i) {
    detail::encode_f32le(static_cast<float>(cube.data[i]),
                         reinterpret_cast<unsigned char*>(payload.data()) + 4 * i);
  }
  write_file_atomic((hp.parent_path() / payload_name).string(), payload);
  write_file_atomic(header_path, j.dump(2) + "\n");
}

namespace detail {

inline LabelMap labels_from_grid(std::vector<std::vector<int>> rows,
                                 const std::string& path) {
  LabelMap map;
  map.height = static_cast<int>(rows.size());
  if (map.height == 0) throw Error("empty label file: " + path);
  map.width = static_cast<int>(rows[0].size());
  for (const auto& r : rows)
    if (static_cast<int>(r.size()) != map.width)
      throw Error("ragged label rows in " + path);
  map.labels.reserve(static_cast<std::size_t>(map.width) * map.height);
  int max_id = 0;
  for (const auto& r : rows)
    for (int v : r) {
      if (v < 0) throw Error("negative class id in " + path);
      max_id = std::max(max_id, v);
      map.labels.push_back(v);
    }
  map.num_classes = max_id;

  if (max_id == 0) {
    std::cerr << "warning: " << path << " contains no labeled pixels\n";
    return map;
  }
  std::vector<bool> present(max_id + 1, false);
  for (int v : map.labels) present[v] = true;
  std::vector<int> missing;
  for (int c = 1; c <= max_id; ++c)
    if (!present[c]) missing.push_back(c);
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << "non-contiguous class ids in " << path << " (missing";
    for (int c : missing) msg << ' ' << c;
    msg << "); remap ids to 1.." << (max_id - static_cast<int>(missing.size()))
        << " before loading";
    throw Error(msg.str());
  }
  return map;
}

inline LabelMap load_labels_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("label file not found: " + path);
  std::string magic;
  in >> magic;
  if (magic != "P2" && magic != "P5") throw Error("unsupported PGM magic in " + path);
  auto next_int = [&in, &path]() {
    // skip whitespace and '#' comments
    for (;;) {
      const int ch = in.peek();
      if (ch == '#') {
        std::string line;
        std::getline(in, line);
      } else if (std::isspace(ch)) {
        in.get();
      } else {
        break;
      }
    }
    long v = 0;
    if (!(in >> v)) throw Error("truncated PGM header in " + path);
    return v;
  };
  const long w = next_int(), h = next_int(), maxval = next_int();
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
    throw Error("bad PGM dimensions in " + path);
  std::vector<std::vector<int>> rows(h, std::vector<int>(w));
  if (magic == "P2") {
    for (auto& row : rows)
      for (int& v : row) {
        long x;
        if (!(in >> x)) throw Error("truncated PGM payload in " + path);
        v = static_cast<int>(x);
      }
  } else {
    in.get();  // single whitespace after maxval
    const int bytes_per = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * bytes_per);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size()))
      throw Error("truncated PGM payload in " + path);
    std::size_t pos = 0;
    for (auto& row : rows)
      for (int& v : row) {
        if (bytes_per == 2) {
          v = (static_cast<int>(buf[pos]) << 8) | buf[pos + 1];  // big-endian per spec
          pos += 2;
        } else {
          v = buf[pos++];
        }
      }
  }
  return labels_from_grid(std::move(rows), path);
}

}  // namespace detail

// Plain-text grid (height rows of width integers) or 8/16-bit PGM.
inline LabelMap load_labels(const std::string& path,
                            const HsiCube* cube = nullptr) {
  if (!std::filesystem::exists(path)) throw IoError("label file not found: " + path);
  LabelMap map;
  if (std::filesystem::path(path).extension() == ".pgm") {
    map = detail::load_labels_pgm(path);
  } else {
    std::ifstream in(path);
    if (!in) throw IoError("label file not found: " + path);
    std::vector<std::vector<int>> rows;
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::vector<int> row;
      long v;
      while (ls >> v) row.push_back(static_cast<int>(v));
      if (!ls.eof()) throw Error("non-integer token in " + path);
      if (!row.empty()) rows.push_back(std::move(row));
    }
    map = detail::labels_from_grid(std::move(rows), path);
  }
  if (cube && (cube->width != map.width || cube->height != map.height))
    throw Error("label dimensions " + std::to_string(map.width) + "x" +
                std::to_string(map.height) + " do not match cube " +
                std::to_string(cube->width) + "x" + std::to_string(cube->height));
  return map;
}

inline void save_labels(const std::vector<int>& labels, int width, int height,
                        const std::string& path) {
  std::ostringstream out;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (x) out << ' ';
      out << labels[static_cast<std::size_t>(y) * width + x];
    }
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

// Draws per_class pixels per class without replacement (per_class_small for
// classes with fewer than per_class labeled pixels), sends ceil(val_fraction*n)
// of each draw to validation, and routes every remaining labeled pixel to test.
inline DatasetSplit split_samples(const LabelMap& labels, int per_class,
                                  int per_class_small, double val_fraction,
                                  std::uint64_t seed) {
  if (per_class < 1 || per_class_small < 1 || per_class < per_class_small)
    throw Error("require per_class >= per_class_small >= 1");
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    throw Error("val_fraction must be in (0, 1)");

  const int C = labels.num_classes;
  std::vector<std::vector<int>> by_class(C);
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    const int v = labels.labels[i];
    if (v > 0) by_class[v - 1].push_back(static_cast<int>(i));
  }

  DatasetSplit split;
  split.seed = seed;
  split.train_pixels.resize(C);
  split.val_pixels.resize(C);
  Rng rng(seed);

  for (int c = 0; c < C; ++c) {
    auto& pool = by_class[c];
    const int available = static_cast<int>(pool.size());
    if (available < per_class_small)
      throw Error("class " + std::to_string(c + 1) + " has only " +
                  std::to_string(available) + " labeled pixels, fewer than per_class_small=" +
                  std::to_string(per_class_small));
    const int n_draw = available < per_class ? per_class_small : per_class;
    rng.shuffle(pool);
    const int n_val = static_cast<int>(std::ceil(val_fraction * n_draw));
    const int n_train = n_draw - n_val;
    split.train_pixels[c].assign(pool.begin(), pool.begin() + n_train);
    split.val_pixels[c].assign(pool.begin() + n_train, pool.begin() + n_draw);
    std::vector<int> rest(pool.begin() + n_draw, pool.end());
    std::sort(rest.begin(), rest.end());
    split.test_pixels.insert(split.test_pixels.end(), rest.begin(), rest.end());
  }
  std::sort(split.test_pixels.begin(), split.test_pixels.end());
  return split;
}

inline RunConfig run_config_from_json(const nlohmann::json& j);

// Flat key=value lines ('#' comments) or a JSON object, chosen by extension.
inline RunConfig load_run_config(const std::string& path) {
  if (std::filesystem::path(path).extension() == ".json")
    return run_config_from_json(detail::parse_json_file(path));
  nlohmann::json j = nlohmann::json::object();
  std::istringstream in(read_text_file(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(path + ":" + std::to_string(lineno) + ": expected key=value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw Error(path + ":" + std::to_string(lineno) + ": expected key=value");
    j[key] = nlohmann::json::parse(value, nullptr, false);
    if (j[key].is_discarded()) j[key] = value;  // bare strings (paths)
  }
  return run_config_from_json(j);
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig cfg;
  auto get_int = [&j](const char* key, int& out) {
    if (j.contains(key)) out = j.at(key).get<int>();
  };
  auto get_double = [&j](const char* key, double& out) {
    if (j.contains(key)) out = j.at(key).get<double>();
  };
  get_int("pca_dim", cfg.pca_dim);
  get_int("num_superpixels", cfg.num_superpixels);
  get_double("compactness", cfg.compactness);
  get_int("slic_iters", cfg.slic_iters);
  get_int("o", cfg.o);
  get_int("k", cfg.k);
  get_int("c", cfg.c);
  get_int("hidden_units", cfg.hidden_units);
  get_int("conv_dim", cfg.conv_dim);
  get_int("epochs", cfg.epochs);
  get_double("learning_rate", cfg.learning_rate);
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  get_int("per_class", cfg.per_class);
  get_int("per_class_small", cfg.per_class_small);
  get_double("val_fraction", cfg.val_fraction);
  get_double("balance_eps", cfg.balance_eps);
  cfg.validate();
  return cfg;
}

inline nlohmann::json run_config_to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["pca_dim"] = cfg.pca_dim;
  j["num_superpixels"] = cfg.num_superpixels;
  j["compactness"] = cfg.compactness;
  j["slic_iters"] = cfg.slic_iters;
  j["o"] = cfg.o;
  j["k"] = cfg.k;
  j["c"] = cfg.c;
  j["hidden_units"] = cfg.hidden_units;
  j["conv_dim"] = cfg.conv_dim;
  j["epochs"] = cfg.epochs;
  j["learning_rate"] = cfg.learning_rate;
  j["seed"] = cfg.seed;
  j["per_class"] = cfg.per_class;
  j["per_class_small"] = cfg.per_class_small;
  j["val_fraction"] = cfg.val_fraction;
  j["balance_eps"] = cfg.balance_eps;
  return j;
}

}  // namespace hgc
