#include "hgc/superpixel.hpp"

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace {

using hgc::HsiCube;
using hgc::SuperpixelMap;

HsiCube constant_cube(int width, int height, int bands, double value) {
  HsiCube cube;
  cube.width = width;
  cube.height = height;
  cube.bands = bands;
  cube.data.assign(static_cast<std::size_t>(width) * height * bands, value);
  return cube;
}

TEST(Segment, ConstantImageGivesGridVoronoiCells) {
  const HsiCube cube = constant_cube(12, 12, 3, 5.0);
  const SuperpixelMap map = hgc::segment(cube, 4, 1.0, 10, 1);
  map.validate();
  ASSERT_EQ(map.p, 4);
  for (int s = 0; s < 4; ++s) EXPECT_EQ(map.sizes[s], 36);
  // quadrant membership
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 12; ++x) {
      const int id = map.assignment[y * 12 + x];
      const int expected_cell = (y < 6 ? 0 : 2) + (x < 6 ? 0 : 1);
      const int first_of_cell =
          map.assignment[(expected_cell / 2 ? 6 : 0) * 12 + (expected_cell % 2 ? 6 : 0)];
      EXPECT_EQ(id, first_of_cell);
    }
}

TEST(Segment, SingleSuperpixelCoversImage) {
  hgc::Rng rng(2);
  const HsiCube cube = testsupport::random_cube(7, 5, 4, rng);
  const SuperpixelMap map = hgc::segment(cube, 1, 1.0, 5, 0);
  map.validate();
  EXPECT_EQ(map.p, 1);
  EXPECT_EQ(map.sizes[0], 35);
}

TEST(Segment, TwoHomogeneousHalvesSplitAtInterface) {
  // left half 0, right half 10: 2-means over the feature space puts the
  // boundary exactly at the interface
  HsiCube cube = constant_cube(8, 4, 2, 0.0);
  for (int y = 0; y < 4; ++y)
    for (int x = 4; x < 8; ++x)
      for (int b = 0; b < 2; ++b) cube.at(x, y, b) = 10.0;
  const SuperpixelMap map = hgc::segment(cube, 2, 1.0, 10, 3);
  map.validate();
  ASSERT_EQ(map.p, 2);
  const int left = map.assignment[0];
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 8; ++x)
      EXPECT_EQ(map.assignment[y * 8 + x] == left, x < 4) << "x=" << x << " y=" << y;
}

TEST(Segment, CountStaysNearTarget) {
  hgc::Rng rng(9);
  const HsiCube cube = testsupport::random_cube(30, 30, 3, rng);
  for (int target : {4, 9, 25, 60}) {
    const SuperpixelMap map = hgc::segment(cube, target, 1.0, 10, 7);
    map.validate();
    EXPECT_GE(map.p, target / 2) << "target " << target;
    EXPECT_LE(map.p, target + target / 2) << "target " << target;
  }
}

TEST(Segment, DeterministicAndValidatesInput) {
  hgc::Rng rng(5);
  const HsiCube cube = testsupport::random_cube(16, 16, 3, rng);
  const SuperpixelMap a = hgc::segment(cube, 9, 2.0, 10, 42);
  const SuperpixelMap b = hgc::segment(cube, 9, 2.0, 10, 42);
  EXPECT_EQ(a.assignment, b.assignment);
  EXPECT_THROW(hgc::segment(cube, 0, 1.0, 10, 1), hgc::Error);
  EXPECT_THROW(hgc::segment(cube, 257, 1.0, 10, 1), hgc::Error);
  EXPECT_THROW(hgc::segment(cube, 9, 1.0, 0, 1), hgc::Error);
}

TEST(ComputeAttributes, TwoPixelMean) {
  HsiCube cube;
  cube.width = 2;
  cube.height = 1;
  cube.bands = 2;
  cube.data = {1, 3, 2, 4};  // pixel0 = (1,2), pixel1 = (3,4)
  SuperpixelMap map;
  map.width = 2;
  map.height = 1;
  map.p = 1;
  map.assignment = {0, 0};
  map.sizes = {2};
  const hgc::NodeAttributes attrs = hgc::compute_attributes(map, cube);
  EXPECT_DOUBLE_EQ(attrs.x(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(attrs.x(0, 1), 3.0);
}

TEST(ComputeAttributes, SingleSuperpixelEqualsGlobalMean) {
  hgc::Rng rng(8);
  const HsiCube cube = testsupport::random_cube(6, 6, 3, rng);
  SuperpixelMap map;
  map.width = 6;
  map.height = 6;
  map.p = 1;
  map.assignment.assign(36, 0);
  map.sizes = {36};
  const hgc::NodeAttributes attrs = hgc::compute_attributes(map, cube);
  const std::size_t n = cube.pixel_count();
  for (int b = 0; b < 3; ++b) {
    double mean = 0;
    for (std::size_t i = 0; i < n; ++i) mean += cube.data[b * n + i];
    mean /= static_cast<double>(n);
    EXPECT_NEAR(attrs.x(0, b), mean, 1e-12);
  }
}

TEST(ComputeAttributes, MatchesGroupByOracleOnRandomInputs) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    hgc::Rng rng(seed);
    const HsiCube cube = testsupport::random_cube(5, 5, 3, rng);
    const SuperpixelMap map = testsupport::random_superpixel_map(5, 5, 4, rng);
    const hgc::NodeAttributes attrs = hgc::compute_attributes(map, cube);
    const hgc::Matrix expected = testsupport::attributes_oracle(map, cube);
    for (int s = 0; s < map.p; ++s)
      for (int b = 0; b < 3; ++b) EXPECT_NEAR(attrs.x(s, b), expected(s, b), 1e-6);
  }
}

// --- aggregate_labels -------------------------------------------------------

struct LabelFixture {
  SuperpixelMap map;
  hgc::LabelMap labels;

  LabelFixture() {
    map.width = 4;
    map.height = 2;
    map.p = 2;
    map.assignment = {0, 0, 1, 1, 0, 0, 1, 1};
    map.sizes = {4, 4};
    labels.width = 4;
    labels.height = 2;
    labels.num_classes = 7;
    labels.labels = {5, 3, 0, 7, 3, 7, 0, 0};
  }
};

TEST(AggregateLabels, SingletonTrainPixel) {
  LabelFixture fx;
  hgc::DatasetSplit split;
  split.train_pixels.assign(7, {});
  split.val_pixels.assign(7, {});
  split.train_pixels[4] = {0};  // class 5 at pixel 0 -> superpixel 0
  const hgc::NodeLabels out = hgc::aggregate_labels(fx.map, split, fx.labels);
  EXPECT_EQ(out.train[0], 5);
  EXPECT_EQ(out.train[1], 0);
  EXPECT_FALSE(out.impure[0]);
}

TEST(AggregateLabels, MajorityWithImpureFlag) {
  LabelFixture fx;
  hgc::DatasetSplit split;
  split.train_pixels.assign(7, {});
  split.val_pixels.assign(7, {});
  split.train_pixels[2] = {1, 4};  // class 3 twice in superpixel 0
  split.train_pixels[6] = {5};     // class 7 once in superpixel 0
  const hgc::NodeLabels out = hgc::aggregate_labels(fx.map, split, fx.labels);
  EXPECT_EQ(out.train[0], 3);
  EXPECT_TRUE(out.impure[0]);
  EXPECT_FALSE(out.impure[1]);
}

TEST(AggregateLabels, TieGoesToSmallestClassAndEmptyIsZero) {
  LabelFixture fx;
  hgc::DatasetSplit split;
  split.train_pixels.assign(7, {});
  split.val_pixels.assign(7, {});
  split.train_pixels[2] = {1};  // class 3
  split.train_pixels[6] = {5};  // class 7 -> tie 1:1, smaller class id wins
  const hgc::NodeLabels out = hgc::aggregate_labels(fx.map, split, fx.labels);
  EXPECT_EQ(out.train[0], 3);
  EXPECT_TRUE(out.impure[0]);
  EXPECT_EQ(out.train[1], 0);
  EXPECT_EQ(out.val[0], 0);
  EXPECT_EQ(out.test[0], 0);
}

TEST(AggregateLabels, ValAndTestRoles) {
  LabelFixture fx;
  hgc::DatasetSplit split;
  split.train_pixels.assign(7, {});
  split.val_pixels.assign(7, {});
  split.val_pixels[6] = {3};  // class 7 at pixel 3 -> superpixel 1
  split.test_pixels = {0, 1};  // classes 5 and 3 -> superpixel 0
  const hgc::NodeLabels out = hgc::aggregate_labels(fx.map, split, fx.labels);
  EXPECT_EQ(out.val[1], 7);
  EXPECT_EQ(out.test[0], 3);  // 1:1 tie between 3 and 5
  EXPECT_THROW(
      [&] {
        hgc::DatasetSplit bad = split;
        bad.test_pixels = {99};
        hgc::aggregate_labels(fx.map, bad, fx.labels);
      }(),
      hgc::Error);
}

}  // namespace
