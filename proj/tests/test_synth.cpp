// Copyright 2026 The SynergyNet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <random>

#include "synergy/config.hpp"
#include "synergy/errors.hpp"
#include "synergy/metrics.hpp"
#include "synergy/serialize.hpp"
#include "synergy/synth.hpp"

namespace synergy {
namespace fs = std::filesystem;
namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("synergy_synth_" + name);
  fs::remove_all(dir);
  return dir;
}

std::map<std::string, std::string> read_tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    files[fs::relative(e.path(), dir).string()] = {std::istreambuf_iterator<char>(in), {}};
  }
  return files;
}

SynthSpec small_spec(std::size_t count = 6) {
  SynthSpec s;
  s.image_size = 16;
  s.num_classes = 3;
  s.min_radius = 2;
  s.max_radius = 5;
  s.count = count;
  s.seed = 42;
  return s;
}

TEST(SynthTest, NoiselessCircleMatchesRasterization) {
  SynthSpec s = small_spec();
  s.noise_std = 0.0;
  s.min_shapes = s.max_shapes = 1;
  s.kinds = {ShapeKind::kCircle};
  for (std::size_t i = 0; i < 20; ++i) {
    const Sample x = generate_sample(s, i);
    ASSERT_EQ(x.shapes.size(), 1u);
    const auto& c = x.shapes[0];
    EXPECT_EQ(c.rx, c.ry);
    for (std::int64_t y = 0; y < 16; ++y) {
      for (std::int64_t px = 0; px < 16; ++px) {
        const bool in = (px - c.cx) * (px - c.cx) + (y - c.cy) * (y - c.cy) <= c.rx * c.rx;
        const auto label = x.mask.at(static_cast<std::size_t>(y), static_cast<std::size_t>(px));
        EXPECT_EQ(label, in ? c.class_id : 0);
        EXPECT_EQ(x.image.data()[static_cast<std::size_t>(y * 16 + px)], class_intensity(static_cast<std::size_t>(label)));
      }
    }
  }
}

TEST(SynthTest, LaterShapesOverwriteEarlierOnes) {
  SynthSpec s = small_spec();
  s.min_shapes = 3;
  s.max_shapes = 5;
  for (std::size_t i = 0; i < 20; ++i) {
    const Sample x = generate_sample(s, i);
    for (std::int64_t y = 0; y < 16; ++y) {
      for (std::int64_t px = 0; px < 16; ++px) {
        std::int32_t expect = 0;
        for (const auto& shape : x.shapes)
          if (shape.contains(px, y)) expect = shape.class_id;
        EXPECT_EQ(x.mask.at(static_cast<std::size_t>(y), static_cast<std::size_t>(px)), expect);
      }
    }
    for (double v : x.image.data()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(SynthTest, DisallowedOverlapKeepsShapesDisjoint) {
  SynthSpec s = small_spec();
  s.min_shapes = s.max_shapes = 3;
  s.overlap_allowed = false;
  for (std::size_t i = 0; i < 20; ++i) {
    const Sample x = generate_sample(s, i);
    for (std::int64_t y = 0; y < 16; ++y)
      for (std::int64_t px = 0; px < 16; ++px) {
        int hits = 0;
        for (const auto& shape : x.shapes) hits += shape.contains(px, y);
        EXPECT_LE(hits, 1);
      }
  }
}

TEST(SynthTest, EmptyCountAndDeterminism) {
  EXPECT_TRUE(generate(small_spec(0)).samples.empty());
  const Dataset a = generate(small_spec()), b = generate(small_spec());
  ASSERT_EQ(a.samples.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(encode_tensor(a.samples[i].image), encode_tensor(b.samples[i].image));
    EXPECT_EQ(a.samples[i].mask, b.samples[i].mask);
  }
  SynthSpec other = small_spec();
  other.seed = 43;
  EXPECT_NE(encode_tensor(generate(other).samples[0].image), encode_tensor(a.samples[0].image));
}

TEST(SynthTest, ImpossibleGeometryIsRejected) {
  SynthSpec s = small_spec();
  s.max_radius = 8;  // 17 pixels wide does not fit in 16
  EXPECT_THROW(s.validate(), ConfigError);
  s = small_spec();
  s.num_classes = 1;
  EXPECT_THROW(s.validate(), ConfigError);
  s = small_spec();
  s.min_radius = 6;
  EXPECT_THROW(s.validate(), ConfigError);
  s = small_spec();
  s.kinds.clear();
  EXPECT_THROW(generate(s), ConfigError);
}

TEST(SynthTest, LabelsStayBelowClassCount) {
  const Dataset d = generate(small_spec(50));
  for (const auto& x : d.samples)
    for (auto l : x.mask.labels) {
      EXPECT_GE(l, 0);
      EXPECT_LT(l, 3);
    }
}

TEST(DatasetIoTest, SaveLoadSaveIsByteIdentical) {
  const fs::path a = scratch("a"), b = scratch("b");
  save_dataset(a, generate(small_spec()));
  const Dataset back = load_dataset(a);
  EXPECT_EQ(back.samples.size(), 6u);
  save_dataset(b, back);
  EXPECT_EQ(read_tree(a), read_tree(b));
  EXPECT_EQ(to_json(back.spec), to_json(small_spec()));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(DatasetIoTest, DamagedPayloadsNameTheFile) {
  const fs::path dir = scratch("damaged");
  save_dataset(dir, generate(small_spec(3)));
  auto expect_integrity = [&](const std::string& needle) {
    try {
      load_dataset(dir);
      FAIL() << "expected IntegrityError mentioning " << needle;
    } catch (const IntegrityError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  // Label outside the class range.
  const fs::path mask = dir / "samples" / "0001.msk";
  const std::string original_mask = read_tree(dir)["samples/0001.msk"];
  save_tensor(mask, Tensor::full({16, 16}, 7.0));
  expect_integrity("0001.msk");
  // Wrong mask shape.
  save_tensor(mask, Tensor::zeros({16, 15}));
  expect_integrity("0001.msk");
  std::ofstream(mask, std::ios::binary) << original_mask;
  EXPECT_NO_THROW(load_dataset(dir));
  // Pixel outside [0, 1].
  save_tensor(dir / "samples" / "0002.img", Tensor::full({1, 16, 16}, 1.5));
  expect_integrity("0002.img");
  fs::remove(dir / "samples" / "0002.img");
  expect_integrity("0002.img");
  fs::remove(dir / "manifest.json");
  expect_integrity("manifest.json");
  fs::remove_all(dir);
}

TEST(AugmentTest, InversesAndCounts) {
  const Sample x = generate_sample(small_spec(), 3);
  auto same = [](const Sample& a, const Sample& b) {
    return a.mask == b.mask && encode_tensor(a.image) == encode_tensor(b.image);
  };
  using A = Augmentation;
  EXPECT_TRUE(same(apply_augmentation(apply_augmentation(x, A::kRot180), A::kRot180), x));
  EXPECT_TRUE(same(apply_augmentation(apply_augmentation(x, A::kHFlip), A::kHFlip), x));
  EXPECT_TRUE(same(apply_augmentation(apply_augmentation(x, A::kVFlip), A::kVFlip), x));
  EXPECT_TRUE(same(apply_augmentation(apply_augmentation(x, A::kRot90), A::kRot270), x));
  EXPECT_TRUE(same(apply_augmentation(x, A::kIdentity), x));
  EXPECT_TRUE(same(apply_augmentation(apply_augmentation(x, A::kHFlip), A::kVFlip), apply_augmentation(x, A::kRot180)));
  // Clockwise: the top-left pixel moves to the top-right corner.
  EXPECT_EQ(apply_augmentation(x, A::kRot90).mask.at(0, 15), x.mask.at(0, 0));
  for (int k = 0; k < 6; ++k) {
    Dataset before{small_spec(), {x}}, after{small_spec(), {apply_augmentation(x, static_cast<A>(k))}};
    EXPECT_EQ(class_pixel_counts(before), class_pixel_counts(after));
  }
}

TEST(AugmentTest, JointTransformKeepsMetrics) {
  const LabelMap truth = generate_sample(small_spec(), 0).mask;
  const LabelMap pred = generate_sample(small_spec(), 1).mask;
  for (int k = 0; k < 6; ++k) {
    const auto kind = static_cast<Augmentation>(k);
    const MaskPair a{pred, truth, 3}, b{apply_augmentation(pred, kind), apply_augmentation(truth, kind), 3};
    for (std::int32_t c = 0; c < 3; ++c) {
      EXPECT_EQ(dice_score(a, c).value, dice_score(b, c).value);
      EXPECT_EQ(hausdorff95(a, c), hausdorff95(b, c));
    }
  }
}

TEST(AugmentTest, DrawIsSeeded) {
  const Sample x = generate_sample(small_spec(), 2);
  CounterRng r1(9), r2(9);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(augment(x, r1).mask, augment(x, r2).mask);
}

// Independent sampler of the same generative process on a different engine.
std::vector<double> coverage_oracle(const SynthSpec& s, std::size_t images, std::vector<double>& variance) {
  std::mt19937_64 eng(2026);
  auto uniform = [&](std::int64_t lo, std::int64_t hi) { return std::uniform_int_distribution<std::int64_t>(lo, hi)(eng); };
  const auto n = static_cast<std::int64_t>(s.image_size);
  std::vector<double> sum(s.num_classes, 0.0), sq(s.num_classes, 0.0);
  for (std::size_t img = 0; img < images; ++img) {
    std::vector<std::int32_t> mask(s.image_size * s.image_size, 0);
    const auto shapes = uniform(static_cast<std::int64_t>(s.min_shapes), static_cast<std::int64_t>(s.max_shapes));
    for (std::int64_t k = 0; k < shapes; ++k) {
      const auto label = static_cast<std::int32_t>(uniform(1, static_cast<std::int64_t>(s.num_classes) - 1));
      const ShapeKind kind = s.kinds[static_cast<std::size_t>(uniform(0, static_cast<std::int64_t>(s.kinds.size()) - 1))];
      const auto rx = uniform(static_cast<std::int64_t>(s.min_radius), static_cast<std::int64_t>(s.max_radius));
      const auto ry = kind == ShapeKind::kCircle ? rx : uniform(static_cast<std::int64_t>(s.min_radius), static_cast<std::int64_t>(s.max_radius));
      const auto cx = uniform(rx, n - 1 - rx), cy = uniform(ry, n - 1 - ry);
      for (std::int64_t y = 0; y < n; ++y)
        for (std::int64_t x = 0; x < n; ++x) {
          const std::int64_t dx = x - cx, dy = y - cy;
          const bool in = kind == ShapeKind::kRectangle ? std::abs(dx) <= rx && std::abs(dy) <= ry
                                                        : dx * dx * ry * ry + dy * dy * rx * rx <= rx * rx * ry * ry;
          if (in) mask[static_cast<std::size_t>(y * n + x)] = label;
        }
    }
    std::vector<double> frac(s.num_classes, 0.0);
    for (auto l : mask) frac[static_cast<std::size_t>(l)] += 1.0 / static_cast<double>(mask.size());
    for (std::size_t c = 0; c < s.num_classes; ++c) {
      sum[c] += frac[c];
      sq[c] += frac[c] * frac[c];
    }
  }
  variance.assign(s.num_classes, 0.0);
  for (std::size_t c = 0; c < s.num_classes; ++c) {
    sum[c] /= static_cast<double>(images);
    variance[c] = sq[c] / static_cast<double>(images) - sum[c] * sum[c];
  }
  return sum;
}

TEST(SynthStatisticsTest, ClassCoverageWithinThreeSigmaOfMonteCarlo) {
  SynthSpec s;  // default 32 x 32, 4 classes, ellipses and rectangles
  s.kinds = {ShapeKind::kCircle, ShapeKind::kEllipse, ShapeKind::kRectangle};
  s.count = 2000;
  s.seed = 11;
  const std::size_t oracle_images = 20000;
  std::vector<double> var;
  const auto expect = coverage_oracle(s, oracle_images, var);
  const Dataset d = generate(s);
  const auto counts = class_pixel_counts(d);
  const double pixels = static_cast<double>(s.count * s.image_size * s.image_size);
  for (std::size_t c = 0; c < s.num_classes; ++c) {
    const double observed = static_cast<double>(counts[c]) / pixels;
    const double sigma = std::sqrt(var[c] / static_cast<double>(s.count) + var[c] / static_cast<double>(oracle_images));
    EXPECT_LT(std::abs(observed - expect[c]), 3.0 * sigma) << "class " << c << " observed " << observed << " expected " << expect[c];
  }
}

}  // namespace
}  // namespace synergy
