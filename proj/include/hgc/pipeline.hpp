#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "hgc/common.hpp"
#include "hgc/eval.hpp"
#include "hgc/gcn.hpp"
#include "hgc/graph.hpp"
#include "hgc/hsi_io.hpp"
#include "hgc/partition.hpp"
#include "hgc/pca.hpp"
#include "hgc/superpixel.hpp"
#include "hgc/trainer.hpp"

namespace hgc {

inline constexpr std::uint64_t kSegmentSeedTag = 0x7365676d656e7400ULL;
inline constexpr std::uint64_t kPartitionSeedTag = 0x706172746974696fULL;
inline constexpr std::uint64_t kSplitSeedTag = 0x73706c6974000000ULL;
inline constexpr std::uint64_t kTrainSeedTag = 0x747261696e000000ULL;

struct JobConfig {
  std::string cube_path;
  std::string labels_path;
  std::string palette_path;  // empty selects the generated palette
  RunConfig run;
};

// Accepts the run-config keys plus cube/labels/palette; relative paths
// resolve against the config file's directory.
inline JobConfig load_job_config(const std::string& path) {
  namespace fs = std::filesystem;
  nlohmann::json j;
  if (fs::path(path).extension() == ".json") {
    j = detail::parse_json_file(path);
  } else {
    // reuse the key=value reader by parsing into JSON the same way
    j = nlohmann::json::object();
    std::istringstream in(read_text_file(path));
    std::string line;
    while (std::getline(in, line)) {
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw Error(path + ": expected key=value");
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
      j[key] = parsed.is_discarded() ? nlohmann::json(value) : parsed;
    }
  }

  JobConfig cfg;
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&base](const std::string& p) {
    return fs::path(p).is_absolute() ? p : (base / p).string();
  };
  if (!j.contains("cube")) throw Error("config is missing 'cube': " + path);
  if (!j.contains("labels")) throw Error("config is missing 'labels': " + path);
  cfg.cube_path = resolve(j.at("cube").get<std::string>());
  cfg.labels_path = resolve(j.at("labels").get<std::string>());
  if (j.contains("palette")) cfg.palette_path = resolve(j.at("palette").get<std::string>());
  cfg.run = run_config_from_json(j);
  return cfg;
}

namespace detail {

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::vector<int> read_grid(const std::string& path, int& width, int& height) {
  std::istringstream in(read_text_file(path));
  std::vector<int> grid;
  width = -1;
  height = 0;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::vector<int> row;
    long v;
    while (ls >> v) row.push_back(static_cast<int>(v));
    if (row.empty()) continue;
    if (width < 0)
      width = static_cast<int>(row.size());
    else if (width != static_cast<int>(row.size()))
      throw Error("ragged rows in " + path);
    ++height;
    grid.insert(grid.end(), row.begin(), row.end());
  }
  if (height == 0) throw Error("empty grid file: " + path);
  return grid;
}

inline SuperpixelMap superpixel_map_from_grid(std::vector<int> grid, int width, int height) {
  SuperpixelMap map;
  map.width = width;
  map.height = height;
  map.assignment = std::move(grid);
  map.p = *std::max_element(map.assignment.begin(), map.assignment.end()) + 1;
  map.sizes.assign(map.p, 0);
  for (int a : map.assignment) ++map.sizes[a];
  map.validate();
  return map;
}

}  // namespace detail

// Per-band centering plus one global scale (RMS band deviation). Pairwise
// feature distances keep their ordering exactly, so segmentation stays
// meaningful under compactness ~ 1 and graph construction is unchanged up
// to a uniform factor, while the GCN sees O(1) inputs instead of raw
// radiance magnitudes.
inline HsiCube standardize_cube(const HsiCube& cube) {
  const std::size_t n = cube.pixel_count();
  HsiCube out = cube;
  double total_variance = 0;
  for (int b = 0; b < cube.bands; ++b) {
    double* band = out.data.data() + static_cast<std::size_t>(b) * n;
    double mean = 0;
    for (std::size_t i = 0; i < n; ++i) mean += band[i];
    mean /= static_cast<double>(n);
    double var = 0;
    for (std::size_t i = 0; i < n; ++i) {
      band[i] -= mean;
      var += band[i] * band[i];
    }
    total_variance += var / static_cast<double>(n);
  }
  const double scale = std::sqrt(total_variance / cube.bands);
  if (scale > 0)
    for (double& v : out.data) v /= scale;
  return out;
}

struct PipelineArtifacts {
  SuperpixelMap map;
  SuperpixelGraph graph;
  PartitionAssignment assignment;
  std::vector<SubGraph> subgraphs;
  TrainResult training;
  std::vector<int> prediction;
  ConfusionMatrix cm;
  MetricsReport report;
};

// The whole pipeline on in-memory inputs; the staged runner below persists
// the same computation through files.
inline PipelineArtifacts run_pipeline_in_memory(const HsiCube& cube, const LabelMap& labels,
                                                const RunConfig& run,
                                                bool keep_intermediates = false) {
  run.validate();
  if (labels.width != cube.width || labels.height != cube.height)
    throw Error("cube and label dimensions disagree");

  const PcaModel pca = fit_pca(cube, run.pca_dim);
  const HsiCube reduced = standardize_cube(transform(cube, pca));

  PipelineArtifacts art;
  art.map = segment(reduced, run.resolve_num_superpixels(cube.width, cube.height),
                    run.compactness, run.slic_iters, derive_seed(run.seed, kSegmentSeedTag));
  const NodeAttributes attrs = compute_attributes(art.map, reduced);
  const SpatialAdjacency spatial = spatial_adjacency(art.map);
  art.graph = build_graph(spatial, attrs.x, run.o, run.k);
  art.graph.node_weights.assign(art.map.sizes.begin(), art.map.sizes.end());

  art.assignment = partition(art.graph, run.c, run.balance_eps,
                             derive_seed(run.seed, kPartitionSeedTag));

  const DatasetSplit split = split_samples(labels, run.per_class, run.per_class_small,
                                           run.val_fraction,
                                           derive_seed(run.seed, kSplitSeedTag));
  const NodeLabels node_labels = aggregate_labels(art.map, split, labels);
  art.subgraphs = induce_subgraphs(art.graph, art.assignment, &node_labels);
  art.training = train(art.subgraphs, run, derive_seed(run.seed, kTrainSeedTag));

  art.prediction = predict_pixels(art.training.model, art.subgraphs, art.map);
  art.cm = confusion(art.prediction, labels, split.test_pixels);
  art.report = metrics(art.cm);
  if (!keep_intermediates) {
    art.subgraphs.clear();
    art.graph = SuperpixelGraph{};
  }
  return art;
}

// --- staged execution -------------------------------------------------------

inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"pca",   "segment", "graph", "partition",
                                              "train", "predict", "eval"};
  return names;
}

class Pipeline {
 public:
  Pipeline(JobConfig cfg, std::string out_dir, bool force = false, bool timing = false)
      : cfg_(std::move(cfg)), out_(std::move(out_dir)), force_(force), timing_(timing) {
    cfg_.run.validate();
    std::filesystem::create_directories(out_);
    manifest_path_ = (std::filesystem::path(out_) / "manifest.json").string();
    if (std::filesystem::exists(manifest_path_))
      manifest_ = detail::parse_json_file(manifest_path_);
    else
      manifest_ = fresh_manifest();
  }

  std::string artifact(const std::string& name) const {
    return (std::filesystem::path(out_) / name).string();
  }

  // Runs one stage after checking that everything upstream is current.
  void run_stage(const std::string& name, const std::string& partition_import = "") {
    const auto& order = stage_names();
    const auto it = std::find(order.begin(), order.end(), name);
    if (it == order.end()) throw Error("unknown stage: " + name);
    if (!force_) verify_upstream(static_cast<int>(it - order.begin()));
    const auto start = std::chrono::steady_clock::now();
    try {
      dispatch(name, partition_import);
    } catch (const IoError& e) {
      throw IoError("stage " + name + ": " + e.what());
    } catch (const Error& e) {
      throw Error("stage " + name + ": " + e.what());
    }
    if (timing_) {
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
      std::cout << "stage " << name << ": " << elapsed.count() << " s\n";
    }
  }

  // Full run: fresh manifest, every stage in order.
  void run_all() {
    manifest_ = fresh_manifest();
    save_manifest();
    for (const auto& name : stage_names()) {
      const auto start = std::chrono::steady_clock::now();
      try {
        dispatch(name, "");
      } catch (const IoError& e) {
        throw IoError("stage " + name + ": " + e.what());
      } catch (const Error& e) {
        throw Error("stage " + name + ": " + e.what());
      }
      if (timing_) {
        const std::chrono::duration<double> elapsed =
            std::chrono::steady_clock::now() - start;
        std::cout << "stage " << name << ": " << elapsed.count() << " s\n";
      }
    }
  }

  const JobConfig& config() const { return cfg_; }

 private:
  nlohmann::json fresh_manifest() const {
    nlohmann::json m;
    m["config"] = config_snapshot();
    m["stages"] = nlohmann::json::object();
    return m;
  }

  nlohmann::json config_snapshot() const {
    nlohmann::json j = run_config_to_json(cfg_.run);
    j["cube"] = cfg_.cube_path;
    j["labels"] = cfg_.labels_path;
    if (!cfg_.palette_path.empty()) j["palette"] = cfg_.palette_path;
    return j;
  }

  void verify_upstream(int stage_index) const {
    if (manifest_.at("config") != config_snapshot())
      throw Error("stale artifact: config changed since the manifest was written "
                  "(rerun upstream stages or pass --force)");
    const auto& order = stage_names();
    const auto& stages = manifest_.at("stages");
    for (int i = 0; i < stage_index; ++i) {
      if (!stages.contains(order[i]))
        throw Error("stage " + order[i] + " has not run yet (required before " +
                    order[stage_index] + ")");
      for (const char* section : {"inputs", "outputs"}) {
        for (const auto& [path, hash] : stages.at(order[i]).at(section).items()) {
          if (!std::filesystem::exists(path))
            throw IoError("stale artifact: " + path + " is missing");
          if (detail::hash_hex(hash_file(path)) != hash.get<std::string>())
            throw Error("stale artifact: " + path +
                        " changed since stage " + order[i] + " ran (pass --force to override)");
        }
      }
    }
  }

  void record(const std::string& stage, const std::vector<std::string>& inputs,
              const std::vector<std::string>& outputs) {
    nlohmann::json in = nlohmann::json::object(), out = nlohmann::json::object();
    for (const auto& p : inputs) in[p] = detail::hash_hex(hash_file(p));
    for (const auto& p : outputs) out[p] = detail::hash_hex(hash_file(p));
    manifest_["config"] = config_snapshot();
    manifest_["stages"][stage] = {{"inputs", in}, {"outputs", out}};
    save_manifest();
  }

  void save_manifest() const {
    write_file_atomic(manifest_path_, manifest_.dump(2) + "\n");
  }

  std::string cube_payload_path() const {
    const nlohmann::json header = detail::parse_json_file(cfg_.cube_path);
    return (std::filesystem::path(cfg_.cube_path).parent_path() /
            header.at("payload").get<std::string>())
        .string();
  }

  void dispatch(const std::string& name, const std::string& partition_import) {
    if (name == "pca") stage_pca();
    else if (name == "segment") stage_segment();
    else if (name == "graph") stage_graph();
    else if (name == "partition") stage_partition(partition_import);
    else if (name == "train") stage_train();
    else if (name == "predict") stage_predict();
    else stage_eval();
  }

  void stage_pca() {
    const HsiCube cube = load_cube(cfg_.cube_path);
    const PcaModel model = fit_pca(cube, cfg_.run.pca_dim);
    const HsiCube reduced = standardize_cube(transform(cube, model));
    save_cube(reduced, artifact("reduced.hgc.json"));
    write_file_atomic(artifact("pca_model.json"), pca_model_to_json(model).dump() + "\n");
    record("pca", {cfg_.cube_path, cube_payload_path()},
           {artifact("reduced.hgc.json"), artifact("reduced.hgc.bin"),
            artifact("pca_model.json")});
  }

  void stage_segment() {
    const HsiCube reduced = load_cube(artifact("reduced.hgc.json"));
    const int p_target = cfg_.run.resolve_num_superpixels(reduced.width, reduced.height);
    const SuperpixelMap map =
        segment(reduced, p_target, cfg_.run.compactness, cfg_.run.slic_iters,
                derive_seed(cfg_.run.seed, kSegmentSeedTag));
    save_labels(map.assignment, map.width, map.height, artifact("segmentation.txt"));
    write_file_atomic(artifact("segmentation.ppm"), segmentation_overlay_ppm(map, reduced));
    record("segment", {artifact("reduced.hgc.json"), artifact("reduced.hgc.bin")},
           {artifact("segmentation.txt"), artifact("segmentation.ppm")});
  }

  SuperpixelMap load_segmentation() const {
    int w = 0, h = 0;
    std::vector<int> grid = detail::read_grid(artifact("segmentation.txt"), w, h);
    return detail::superpixel_map_from_grid(std::move(grid), w, h);
  }

  SuperpixelGraph load_graph_artifacts() const {
    int w = 0, h = 0;
    (void)w;
    (void)h;
    std::vector<long> weights;
    {
      std::istringstream in(read_text_file(artifact("graph_weights.txt")));
      long v;
      while (in >> v) weights.push_back(v);
    }
    return graph_from_text(read_text_file(artifact("graph_edges.txt")),
                           read_text_file(artifact("graph_attrs.txt")), &weights);
  }

  void stage_graph() {
    const HsiCube reduced = load_cube(artifact("reduced.hgc.json"));
    const SuperpixelMap map = load_segmentation();
    if (map.width != reduced.width || map.height != reduced.height)
      throw Error("segmentation does not match the reduced cube");
    const NodeAttributes attrs = compute_attributes(map, reduced);
    const SpatialAdjacency spatial = spatial_adjacency(map);
    SuperpixelGraph g = build_graph(spatial, attrs.x, cfg_.run.o, cfg_.run.k);
    g.node_weights.assign(map.sizes.begin(), map.sizes.end());
    write_file_atomic(artifact("graph_edges.txt"), graph_edges_to_text(g));
    write_file_atomic(artifact("graph_attrs.txt"), attributes_to_text(g.x));
    std::ostringstream ws;
    for (long v : g.node_weights) ws << v << '\n';
    write_file_atomic(artifact("graph_weights.txt"), ws.str());
    record("graph",
           {artifact("reduced.hgc.json"), artifact("reduced.hgc.bin"),
            artifact("segmentation.txt")},
           {artifact("graph_edges.txt"), artifact("graph_attrs.txt"),
            artifact("graph_weights.txt")});
  }

  void stage_partition(const std::string& import_path) {
    const SuperpixelGraph g = load_graph_artifacts();
    PartitionAssignment assign;
    std::vector<std::string> inputs{artifact("graph_edges.txt"),
                                    artifact("graph_weights.txt")};
    if (!import_path.empty()) {
      if (!std::filesystem::exists(import_path))
        throw IoError("partition file not found: " + import_path);
      assign = assignment_from_text(read_text_file(import_path), g.n);
      inputs.push_back(import_path);
    } else {
      assign = partition(g, cfg_.run.c, cfg_.run.balance_eps,
                         derive_seed(cfg_.run.seed, kPartitionSeedTag));
    }
    write_file_atomic(artifact("partition.txt"), assignment_to_text(assign));
    record("partition", inputs, {artifact("partition.txt")});
  }

  void stage_train() {
    const SuperpixelGraph g = load_graph_artifacts();
    const PartitionAssignment assign =
        assignment_from_text(read_text_file(artifact("partition.txt")), g.n);
    const SuperpixelMap map = load_segmentation();
    const LabelMap labels = load_labels(cfg_.labels_path);
    if (labels.width != map.width || labels.height != map.height)
      throw Error("label dimensions do not match the segmentation");
    const DatasetSplit split =
        split_samples(labels, cfg_.run.per_class, cfg_.run.per_class_small,
                      cfg_.run.val_fraction, derive_seed(cfg_.run.seed, kSplitSeedTag));
    const NodeLabels node_labels = aggregate_labels(map, split, labels);
    const std::vector<SubGraph> subs = induce_subgraphs(g, assign, &node_labels);
    const TrainResult result = train(subs, cfg_.run, derive_seed(cfg_.run.seed, kTrainSeedTag));

    nlohmann::json ckpt = checkpoint_to_json(result.model, result.state);
    ckpt["best_epoch"] = result.history.best_epoch;
    ckpt["total_steps"] = result.history.total_steps;
    write_file_atomic(artifact("checkpoint.json"), ckpt.dump() + "\n");
    write_file_atomic(artifact("history.csv"), history_to_csv(result.history));
    record("train",
           {artifact("graph_edges.txt"), artifact("graph_attrs.txt"),
            artifact("graph_weights.txt"), artifact("partition.txt"),
            artifact("segmentation.txt"), cfg_.labels_path},
           {artifact("checkpoint.json"), artifact("history.csv")});
  }

  void stage_predict() {
    const auto [model, state] = load_checkpoint(artifact("checkpoint.json"));
    (void)state;
    const SuperpixelGraph g = load_graph_artifacts();
    const PartitionAssignment assign =
        assignment_from_text(read_text_file(artifact("partition.txt")), g.n);
    const SuperpixelMap map = load_segmentation();
    const std::vector<SubGraph> subs = induce_subgraphs(g, assign);
    const std::vector<int> pred = predict_pixels(model, subs, map);
    save_labels(pred, map.width, map.height, artifact("prediction.txt"));
    const Palette palette = cfg_.palette_path.empty()
                                ? default_palette(model.dims.classes)
                                : load_palette(cfg_.palette_path);
    export_map(pred, map.width, map.height, palette, artifact("classification.ppm"));
    record("predict",
           {artifact("checkpoint.json"), artifact("graph_edges.txt"),
            artifact("graph_attrs.txt"), artifact("partition.txt"),
            artifact("segmentation.txt")},
           {artifact("prediction.txt"), artifact("classification.ppm")});
  }

  void stage_eval() {
    int w = 0, h = 0;
    const std::vector<int> pred = detail::read_grid(artifact("prediction.txt"), w, h);
    const LabelMap labels = load_labels(cfg_.labels_path);
    if (labels.width != w || labels.height != h)
      throw Error("prediction dimensions do not match the ground truth");
    const DatasetSplit split =
        split_samples(labels, cfg_.run.per_class, cfg_.run.per_class_small,
                      cfg_.run.val_fraction, derive_seed(cfg_.run.seed, kSplitSeedTag));
    const ConfusionMatrix cm = confusion(pred, labels, split.test_pixels);
    const MetricsReport report = metrics(cm);
    nlohmann::json j = metrics_to_json(report);
    j["test_pixels"] = static_cast<long>(split.test_pixels.size());
    j["seed"] = cfg_.run.seed;
    write_file_atomic(artifact("metrics.json"), j.dump(2) + "\n");
    write_file_atomic(artifact("metrics.txt"), metrics_to_table(report));
    record("eval", {artifact("prediction.txt"), cfg_.labels_path},
           {artifact("metrics.json"), artifact("metrics.txt")});
  }

  JobConfig cfg_;
  std::string out_;
  bool force_;
  bool timing_;
  std::string manifest_path_;
  nlohmann::json manifest_;
};

// --- sweeps -----------------------------------------------------------------

struct SweepSpec {
  std::vector<int> o, k, c, per_class;
  std::vector<std::uint64_t> seeds;
};

// Missing grids fall back to the base config; seeds default to ten
// consecutive seeds starting at the base seed.
inline SweepSpec load_sweep_spec(const std::string& path, const RunConfig& base) {
  const nlohmann::json j = detail::parse_json_file(path);
  SweepSpec spec;
  auto grid = [&j](const char* key, int fallback) {
    std::vector<int> v;
    if (j.contains(key))
      for (const auto& e : j.at(key)) v.push_back(e.get<int>());
    else
      v.push_back(fallback);
    if (v.empty()) throw Error(std::string("empty grid for ") + key);
    return v;
  };
  spec.o = grid("o", base.o);
  spec.k = grid("k", base.k);
  spec.c = grid("c", base.c);
  spec.per_class = grid("per_class", base.per_class);
  if (j.contains("seeds")) {
    for (const auto& e : j.at("seeds")) spec.seeds.push_back(e.get<std::uint64_t>());
    if (spec.seeds.empty()) throw Error("empty seed list");
  } else {
    const int n = j.value("num_seeds", 10);
    if (n < 1) throw Error("num_seeds must be positive");
    for (int i = 0; i < n; ++i) spec.seeds.push_back(base.seed + static_cast<std::uint64_t>(i));
  }
  return spec;
}

struct SweepRow {
  int o = 0, k = 0, c = 0, per_class = 0;
  std::vector<double> oa, aa, kappa;  // per seed
  double oa_mean = 0, oa_std = 0;
  double aa_mean = 0, aa_std = 0;
  double kappa_mean = 0, kappa_std = 0;
};

namespace detail {

inline std::pair<double, double> mean_and_population_std(const std::vector<double>& xs) {
  double mean = 0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size());
  return {mean, std::sqrt(var)};
}

inline int worker_count(std::size_t tasks) {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("HGC_THREADS")) {
    char* end = nullptr;
    const long parsed = std::strtol(env, &end, 10);
    if (end && *end == '\0' && parsed > 0) n = static_cast<int>(parsed);
  }
  return static_cast<int>(std::min<std::size_t>(n, std::max<std::size_t>(tasks, 1)));
}

}  // namespace detail

// One run per grid point x seed in a bounded worker pool; rows aggregate
// mean +- population standard deviation per grid point.
inline std::vector<SweepRow> run_sweep(const JobConfig& cfg, const SweepSpec& spec) {
  const HsiCube cube = load_cube(cfg.cube_path);
  const LabelMap labels = load_labels(cfg.labels_path, &cube);

  struct Task {
    std::size_t row;
    RunConfig run;
  };
  std::vector<SweepRow> rows;
  std::vector<Task> tasks;
  for (int o : spec.o)
    for (int k : spec.k)
      for (int c : spec.c)
        for (int pc : spec.per_class) {
          SweepRow row;
          row.o = o;
          row.k = k;
          row.c = c;
          row.per_class = pc;
          const std::size_t row_id = rows.size();
          rows.push_back(row);
          for (std::uint64_t seed : spec.seeds) {
            RunConfig run = cfg.run;
            run.o = o;
            run.k = k;
            run.c = c;
            run.per_class = pc;
            run.per_class_small = std::min(run.per_class_small, pc);
            run.seed = seed;
            tasks.push_back({row_id, run});
          }
        }

  std::vector<MetricsReport> results(tasks.size());
  std::vector<std::string> failures(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        results[i] = run_pipeline_in_memory(cube, labels, tasks[i].run).report;
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  const int workers = detail::worker_count(tasks.size());
  for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (!failures[i].empty())
      throw Error("sweep run (o=" + std::to_string(tasks[i].run.o) +
                  " k=" + std::to_string(tasks[i].run.k) + " c=" + std::to_string(tasks[i].run.c) +
                  " seed=" + std::to_string(tasks[i].run.seed) + ") failed: " + failures[i]);
    SweepRow& row = rows[tasks[i].row];
    row.oa.push_back(results[i].oa);
    row.aa.push_back(results[i].aa);
    row.kappa.push_back(results[i].kappa);
  }
  for (auto& row : rows) {
    std::tie(row.oa_mean, row.oa_std) = detail::mean_and_population_std(row.oa);
    std::tie(row.aa_mean, row.aa_std) = detail::mean_and_population_std(row.aa);
    std::tie(row.kappa_mean, row.kappa_std) = detail::mean_and_population_std(row.kappa);
  }
  return rows;
}

inline nlohmann::json sweep_rows_to_json(const std::vector<SweepRow>& rows) {
  auto arr = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json j;
    j["o"] = row.o;
    j["k"] = row.k;
    j["c"] = row.c;
    j["per_class"] = row.per_class;
    j["oa"] = {{"mean", row.oa_mean}, {"std", row.oa_std}, {"per_seed", row.oa}};
    j["aa"] = {{"mean", row.aa_mean}, {"std", row.aa_std}, {"per_seed", row.aa}};
    j["kappa"] = {{"mean", row.kappa_mean}, {"std", row.kappa_std}, {"per_seed", row.kappa}};
    arr.push_back(j);
  }
  return arr;
}

inline std::string sweep_rows_to_table(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "    o     k     c  per_class            OA            AA         Kappa\n";
  out << std::fixed << std::setprecision(2);
  for (const auto& row : rows) {
    out << std::setw(5) << row.o << std::setw(6) << row.k << std::setw(6) << row.c
        << std::setw(11) << row.per_class << "  ";
    auto cell = [&out](double mean, double sd) {
      std::ostringstream s;
      s << std::fixed << std::setprecision(2) << 100.0 * mean << "+-" << 100.0 * sd;
      out << std::setw(14) << s.str();
    };
    cell(row.oa_mean, row.oa_std);
    cell(row.aa_mean, row.aa_std);
    cell(row.kappa_mean, row.kappa_std);
    out << '\n';
  }
  return out.str();
}

// --- inspect ----------------------------------------------------------------

inline std::string inspect_artifact(const std::string& path) {
  namespace fs = std::filesystem;
  if (!fs::exists(path)) throw IoError("artifact not found: " + path);
  const std::string name = fs::path(path).filename().string();
  std::ostringstream out;

  if (name.ends_with(".hgc.json")) {
    const HsiCube cube = load_cube(path);
    double lo = cube.data[0], hi = cube.data[0], sum = 0;
    for (double v : cube.data) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      sum += v;
    }
    out << "cube " << cube.width << "x" << cube.height << "x" << cube.bands
        << " min " << format_double(lo) << " max " << format_double(hi) << " mean "
        << format_double(sum / static_cast<double>(cube.data.size())) << '\n';
  } else if (name == "manifest.json") {
    const nlohmann::json m = detail::parse_json_file(path);
    out << "manifest with " << m.at("stages").size() << " recorded stage(s)\n";
    for (const auto& stage : stage_names())
      if (m.at("stages").contains(stage)) {
        out << "  " << stage << ":\n";
        for (const auto& [p, hash] : m.at("stages").at(stage).at("outputs").items())
          out << "    " << p << "  " << hash.get<std::string>() << '\n';
      }
  } else if (name == "checkpoint.json") {
    const auto [model, state] = load_checkpoint(path);
    out << "checkpoint: F=" << model.dims.feature << " conv=" << model.dims.conv
        << " hidden=" << model.dims.hidden << " classes=" << model.dims.classes
        << " adam_t=" << state.t << '\n';
  } else if (name == "metrics.json") {
    const nlohmann::json j = detail::parse_json_file(path);
    out << "OA " << format_double(j.at("oa").get<double>()) << "  AA "
        << format_double(j.at("aa").get<double>()) << "  Kappa "
        << format_double(j.at("kappa").get<double>()) << "  test pixels "
        << j.at("test_pixels").get<long>() << '\n';
  } else if (name == "sweep_results.json") {
    const nlohmann::json j = detail::parse_json_file(path);
    out << j.size() << " sweep row(s)\n";
    for (const auto& row : j)
      out << "  o=" << row.at("o").get<int>() << " k=" << row.at("k").get<int>()
          << " c=" << row.at("c").get<int>() << "  OA "
          << format_double(row.at("oa").at("mean").get<double>()) << " +- "
          << format_double(row.at("oa").at("std").get<double>()) << '\n';
  } else if (name == "graph_edges.txt") {
    std::istringstream in(read_text_file(path));
    int n, o, k;
    if (!(in >> n >> o >> k)) throw Error("ill-formed graph edge list");
    long edges = 0, weight = 0, i, j, w;
    while (in >> i >> j >> w) {
      ++edges;
      weight += w;
    }
    out << "graph: " << n << " nodes, " << edges << " edges, total weight " << weight
        << " (o=" << o << " k=" << k << ")\n";
  } else if (name == "partition.txt") {
    const PartitionAssignment assign = assignment_from_text(
        read_text_file(path), [&path] {
          std::istringstream in(read_text_file(path));
          int nodes = 0;
          long a, b;
          while (in >> a >> b) ++nodes;
          return nodes;
        }());
    std::vector<int> sizes(assign.c, 0);
    for (int v : assign.part) ++sizes[v];
    out << "partition: " << assign.part.size() << " nodes in " << assign.c << " cluster(s):";
    for (int s : sizes) out << ' ' << s;
    out << '\n';
  } else if (name.ends_with(".txt")) {
    int w = 0, h = 0;
    const std::vector<int> grid = detail::read_grid(path, w, h);
    const int mx = *std::max_element(grid.begin(), grid.end());
    std::vector<long> counts(mx + 1, 0);
    for (int v : grid) ++counts[v];
    out << "grid " << w << "x" << h << ", values 0.." << mx << ", counts:";
    for (long c : counts) out << ' ' << c;
    out << '\n';
  } else {
    throw Error("don't know how to inspect " + name);
  }
  return out.str();
}

}  // namespace hgc
