// Regenerates the bundled synthetic dataset under data/synthetic/: a 20x20
// cube with 8 bands and 4 fully labeled quadrant classes whose spectra are
// separated far beyond the noise level.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "hgc/hsi_io.hpp"

int main(int argc, char** argv) {
  const std::string out_dir = argc > 1 ? argv[1] : "data/synthetic";
  std::filesystem::create_directories(out_dir);

  const int size = 20, bands = 8;
  hgc::HsiCube cube;
  cube.width = size;
  cube.height = size;
  cube.bands = bands;
  cube.data.assign(static_cast<std::size_t>(size) * size * bands, 0.0);

  std::vector<int> labels(static_cast<std::size_t>(size) * size, 0);
  hgc::Rng rng(20240817);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const int cls = (y < size / 2 ? 0 : 2) + (x < size / 2 ? 0 : 1) + 1;
      labels[static_cast<std::size_t>(y) * size + x] = cls;
      for (int b = 0; b < bands; ++b) {
        const double base = (b / 2 == cls - 1) ? 10.0 : 0.0;
        const double noise = 0.2 * rng.normal();
        // keep values exactly representable in the f32 payload
        cube.at(x, y, b) = static_cast<double>(static_cast<float>(base + noise));
      }
    }
  }

  hgc::save_cube(cube, out_dir + "/synthetic.hgc.json");
  hgc::save_labels(labels, size, size, out_dir + "/synthetic.labels.txt");

  hgc::write_file_atomic(out_dir + "/config.json", R"({
  "cube": "synthetic.hgc.json",
  "labels": "synthetic.labels.txt",
  "pca_dim": 4,
  "num_superpixels": 36,
  "c": 4,
  "epochs": 200,
  "seed": 7
}
)");
  hgc::write_file_atomic(out_dir + "/sweep_c.json", R"({
  "c": [1, 3, 5, 7],
  "seeds": [7, 8, 9]
}
)");
  std::cout << "wrote synthetic dataset to " << out_dir << '\n';
  return 0;
}
