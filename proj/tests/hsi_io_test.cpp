#include "hgc/hsi_io.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace {

using hgc::HsiCube;
using hgc::LabelMap;

TEST(CubeIo, RoundTripIsBitExact) {
  HsiCube cube;
  cube.width = 2;
  cube.height = 2;
  cube.bands = 3;
  cube.data = {1.0, 2.5, -3.25, 4.0, 0.0, 100.5, -0.125, 7.0, 8.0, 9.5, 10.0, 11.75};
  const std::string dir = testsupport::temp_dir("cube_rt");
  hgc::save_cube(cube, dir + "/tiny.hgc.json");
  const HsiCube back = hgc::load_cube(dir + "/tiny.hgc.json");
  EXPECT_EQ(back.width, 2);
  EXPECT_EQ(back.height, 2);
  EXPECT_EQ(back.bands, 3);
  ASSERT_EQ(back.data.size(), cube.data.size());
  for (std::size_t i = 0; i < cube.data.size(); ++i) EXPECT_EQ(back.data[i], cube.data[i]);
}

TEST(CubeIo, PayloadLengthMismatchIsRejected) {
  const std::string dir = testsupport::temp_dir("cube_short");
  hgc::write_file_atomic(dir + "/bad.hgc.json",
                         R"({"width":2,"height":2,"bands":1,"dtype":"f32le","payload":"bad.hgc.bin"})");
  hgc::write_file_atomic(dir + "/bad.hgc.bin", std::string(12, '\0'));  // 3 of 4 values
  try {
    hgc::load_cube(dir + "/bad.hgc.json");
    FAIL() << "expected payload length mismatch";
  } catch (const hgc::Error& e) {
    EXPECT_NE(std::string(e.what()).find("payload length mismatch"), std::string::npos);
  }
}

TEST(CubeIo, MissingHeaderAndIllFormedHeader) {
  EXPECT_THROW(hgc::load_cube("/nonexistent/cube.hgc.json"), hgc::IoError);
  const std::string dir = testsupport::temp_dir("cube_bad_json");
  hgc::write_file_atomic(dir + "/x.hgc.json", "{not json");
  EXPECT_THROW(hgc::load_cube(dir + "/x.hgc.json"), hgc::Error);
  hgc::write_file_atomic(dir + "/y.hgc.json", R"({"width":2,"height":2})");
  EXPECT_THROW(hgc::load_cube(dir + "/y.hgc.json"), hgc::Error);
}

TEST(CubeIo, NonFinitePayloadIsRejected) {
  const std::string dir = testsupport::temp_dir("cube_nan");
  hgc::write_file_atomic(dir + "/n.hgc.json",
                         R"({"width":1,"height":1,"bands":1,"dtype":"f32le","payload":"n.hgc.bin"})");
  const unsigned char nan_bytes[4] = {0x00, 0x00, 0xc0, 0x7f};
  hgc::write_file_atomic(dir + "/n.hgc.bin",
                         std::string(reinterpret_cast<const char*>(nan_bytes), 4));
  EXPECT_THROW(hgc::load_cube(dir + "/n.hgc.json"), hgc::Error);
}

TEST(CubeIo, IndianPinesDimensionsWhenDatasetPresent) {
  const std::string path = std::string(HGC_DATA_DIR) + "/indian_pines/indian_pines.hgc.json";
  if (!std::filesystem::exists(path)) GTEST_SKIP() << "dataset not bundled";
  const HsiCube cube = hgc::load_cube(path);
  EXPECT_EQ(cube.width, 145);
  EXPECT_EQ(cube.height, 145);
  EXPECT_EQ(cube.bands, 200);
}

TEST(LabelIo, GridRoundTripAndCounts) {
  const std::string dir = testsupport::temp_dir("labels");
  hgc::write_file_atomic(dir + "/l.labels.txt", "0 1 2\n2 2 1\n");
  const LabelMap map = hgc::load_labels(dir + "/l.labels.txt");
  EXPECT_EQ(map.width, 3);
  EXPECT_EQ(map.height, 2);
  EXPECT_EQ(map.num_classes, 2);
  const auto counts = map.class_counts();
  EXPECT_EQ(counts[0], 1);
  EXPECT_EQ(counts[1], 2);
  EXPECT_EQ(counts[2], 3);
}

TEST(LabelIo, AllZeroFileIsValidButEmpty) {
  const std::string dir = testsupport::temp_dir("labels_zero");
  hgc::write_file_atomic(dir + "/z.labels.txt", "0 0\n0 0\n");
  const LabelMap map = hgc::load_labels(dir + "/z.labels.txt");
  EXPECT_EQ(map.num_classes, 0);
  EXPECT_EQ(map.labeled_count(), 0u);
}

TEST(LabelIo, NonContiguousIdsAreRejectedWithRemapHint) {
  const std::string dir = testsupport::temp_dir("labels_gap");
  hgc::write_file_atomic(dir + "/g.labels.txt", "1 3\n1 3\n");
  try {
    hgc::load_labels(dir + "/g.labels.txt");
    FAIL() << "expected non-contiguous error";
  } catch (const hgc::Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("non-contiguous class ids"), std::string::npos);
    EXPECT_NE(msg.find("remap"), std::string::npos);
  }
}

TEST(LabelIo, NegativeIdsAndDimensionMismatch) {
  const std::string dir = testsupport::temp_dir("labels_bad");
  hgc::write_file_atomic(dir + "/neg.labels.txt", "0 -1\n");
  EXPECT_THROW(hgc::load_labels(dir + "/neg.labels.txt"), hgc::Error);

  hgc::write_file_atomic(dir + "/ok.labels.txt", "1 1\n");
  HsiCube cube;
  cube.width = 3;
  cube.height = 1;
  cube.bands = 1;
  cube.data = {0, 0, 0};
  EXPECT_THROW(hgc::load_labels(dir + "/ok.labels.txt", &cube), hgc::Error);
}

TEST(LabelIo, SixteenBitPgm) {
  const std::string dir = testsupport::temp_dir("labels_pgm");
  std::string pgm = "P5\n2 2\n65535\n";
  const unsigned char payload[8] = {0, 1, 0, 2, 1, 0, 0, 0};  // 1 2 / 256 0 big-endian
  pgm.append(reinterpret_cast<const char*>(payload), 8);
  hgc::write_file_atomic(dir + "/l.pgm", pgm);
  try {
    hgc::load_labels(dir + "/l.pgm");
    FAIL() << "ids 1,2,256 are not contiguous";
  } catch (const hgc::Error& e) {
    EXPECT_NE(std::string(e.what()).find("non-contiguous"), std::string::npos);
  }
  const unsigned char ok_payload[8] = {0, 1, 0, 2, 0, 2, 0, 0};
  pgm = "P5\n2 2\n65535\n";
  pgm.append(reinterpret_cast<const char*>(ok_payload), 8);
  hgc::write_file_atomic(dir + "/ok.pgm", pgm);
  const LabelMap map = hgc::load_labels(dir + "/ok.pgm");
  EXPECT_EQ(map.labels, (std::vector<int>{1, 2, 2, 0}));
}

// --- split_samples ----------------------------------------------------------

LabelMap grid_labels(int width, int height, const std::vector<int>& labels) {
  LabelMap map;
  map.width = width;
  map.height = height;
  map.labels = labels;
  map.num_classes = *std::max_element(labels.begin(), labels.end());
  return map;
}

TEST(Split, SmallClassFallsBackToSmallDraw) {
  // class 1: 40 pixels, class 2: 20 pixels -> 30 and 15 drawn
  std::vector<int> labels(60, 1);
  std::fill(labels.begin() + 40, labels.end(), 2);
  const LabelMap map = grid_labels(6, 10, labels);
  const hgc::DatasetSplit split = hgc::split_samples(map, 30, 15, 0.1, 42);
  EXPECT_EQ(split.train_pixels[0].size() + split.val_pixels[0].size(), 30u);
  EXPECT_EQ(split.train_pixels[1].size() + split.val_pixels[1].size(), 15u);
  EXPECT_EQ(split.val_pixels[0].size(), 3u);  // ceil(0.1 * 30)
  EXPECT_EQ(split.val_pixels[1].size(), 2u);  // ceil(0.1 * 15)
  EXPECT_EQ(split.test_pixels.size(), 60u - 45u);
}

TEST(Split, ClassWithExactlyPerClassHasNoTestPixels) {
  std::vector<int> labels(30, 1);
  labels.resize(90, 2);
  const LabelMap map = grid_labels(9, 10, labels);
  const hgc::DatasetSplit split = hgc::split_samples(map, 30, 15, 0.1, 1);
  EXPECT_EQ(split.train_pixels[0].size() + split.val_pixels[0].size(), 30u);
  for (int idx : split.test_pixels) EXPECT_EQ(map.labels[idx], 2);
}

TEST(Split, TooSmallClassIsAnError) {
  std::vector<int> labels(20, 1);
  labels.resize(30, 2);  // class 2 has 10 < per_class_small
  const LabelMap map = grid_labels(5, 6, labels);
  EXPECT_THROW(hgc::split_samples(map, 30, 15, 0.1, 1), hgc::Error);
}

TEST(Split, DeterministicAndDisjoint) {
  hgc::Rng rng(7);
  std::vector<int> labels(400);
  for (auto& v : labels) v = static_cast<int>(rng.below(5));  // classes 0..4, 0 = unlabeled
  const LabelMap map = grid_labels(20, 20, labels);
  const auto a = hgc::split_samples(map, 20, 5, 0.25, 99);
  const auto b = hgc::split_samples(map, 20, 5, 0.25, 99);
  EXPECT_EQ(a.train_pixels, b.train_pixels);
  EXPECT_EQ(a.val_pixels, b.val_pixels);
  EXPECT_EQ(a.test_pixels, b.test_pixels);

  // disjoint, all labeled, and the union per class covers the class exactly
  std::set<int> seen;
  std::size_t total = 0;
  auto absorb = [&](const std::vector<int>& pixels) {
    for (int idx : pixels) {
      EXPECT_TRUE(seen.insert(idx).second) << "pixel in two sets";
      EXPECT_GT(map.labels[idx], 0);
      ++total;
    }
  };
  for (const auto& v : a.train_pixels) absorb(v);
  for (const auto& v : a.val_pixels) absorb(v);
  absorb(a.test_pixels);
  EXPECT_EQ(total, map.labeled_count());

  const auto c = hgc::split_samples(map, 20, 5, 0.25, 100);
  EXPECT_NE(a.train_pixels, c.train_pixels);
}

TEST(RunConfig, KeyValueAndJsonAgree) {
  const std::string dir = testsupport::temp_dir("cfg");
  hgc::write_file_atomic(dir + "/a.cfg", "o = 3\nk = 7\nlearning_rate = 0.01\nseed = 5\n# c\nc = 2\n");
  hgc::write_file_atomic(dir + "/a.json", R"({"o":3,"k":7,"learning_rate":0.01,"seed":5,"c":2})");
  const hgc::RunConfig a = hgc::load_run_config(dir + "/a.cfg");
  const hgc::RunConfig b = hgc::load_run_config(dir + "/a.json");
  EXPECT_EQ(a.o, 3);
  EXPECT_EQ(a.k, 7);
  EXPECT_EQ(a.c, 2);
  EXPECT_DOUBLE_EQ(a.learning_rate, 0.01);
  EXPECT_EQ(a.seed, 5u);
  EXPECT_EQ(hgc::run_config_to_json(a), hgc::run_config_to_json(b));
}

TEST(RunConfig, InvalidValuesAreRejected) {
  hgc::RunConfig cfg;
  cfg.o = 0;
  EXPECT_THROW(cfg.validate(), hgc::Error);
  cfg = {};
  cfg.val_fraction = 1.0;
  EXPECT_THROW(cfg.validate(), hgc::Error);
  cfg = {};
  cfg.per_class_small = 40;  // > per_class
  EXPECT_THROW(cfg.validate(), hgc::Error);
}

}  // namespace
