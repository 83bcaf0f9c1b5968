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

#include "synergy/synth.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "synergy/config.hpp"
#include "synergy/errors.hpp"
#include "synergy/serialize.hpp"

namespace synergy {

std::string to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::kCircle:
      return "circle";
    case ShapeKind::kEllipse:
      return "ellipse";
    case ShapeKind::kRectangle:
      return "rectangle";
  }
  return "unknown";
}

ShapeKind parse_shape_kind(const std::string& name) {
  if (name == "circle") return ShapeKind::kCircle;
  if (name == "ellipse") return ShapeKind::kEllipse;
  if (name == "rectangle") return ShapeKind::kRectangle;
  throw ConfigError("unknown shape kind \"" + name + "\" (expected circle, ellipse or rectangle)");
}

double class_intensity(std::size_t class_id) { return 0.1 + kIntensityStep * static_cast<double>(class_id); }

void SynthSpec::validate() const {
  if (image_size == 0) throw ConfigError("image_size must be positive");
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2 (background plus one foreground class)");
  if (class_intensity(num_classes - 1) > 1.0) {
    throw ConfigError("num_classes " + std::to_string(num_classes) + " leaves no room for distinct intensity bands");
  }
  if (min_shapes > max_shapes) throw ConfigError("min_shapes exceeds max_shapes");
  if (min_radius > max_radius) throw ConfigError("min_radius exceeds max_radius");
  if (2 * max_radius + 1 > image_size) {
    throw ConfigError("max_radius " + std::to_string(max_radius) + " does not fit in a " +
                      std::to_string(image_size) + "-pixel image");
  }
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw ConfigError("noise_std must be finite and >= 0");
  if (kinds.empty()) throw ConfigError("kinds must list at least one shape kind");
}

bool ShapeRecord::contains(std::int64_t x, std::int64_t y) const {
  const std::int64_t dx = x - cx;
  const std::int64_t dy = y - cy;
  if (kind == ShapeKind::kRectangle) return std::abs(dx) <= rx && std::abs(dy) <= ry;
  return dx * dx * ry * ry + dy * dy * rx * rx <= rx * rx * ry * ry;
}

namespace {

constexpr int kPlacementAttempts = 100;

ShapeRecord draw_shape(const SynthSpec& spec, CounterRng& rng) {
  ShapeRecord s;
  s.class_id = static_cast<std::int32_t>(1 + rng.below(spec.num_classes - 1));
  s.kind = spec.kinds[rng.below(spec.kinds.size())];
  const std::uint64_t span = spec.max_radius - spec.min_radius + 1;
  s.rx = static_cast<std::int64_t>(spec.min_radius + rng.below(span));
  s.ry = s.kind == ShapeKind::kCircle ? s.rx : static_cast<std::int64_t>(spec.min_radius + rng.below(span));
  const auto size = static_cast<std::int64_t>(spec.image_size);
  s.cx = s.rx + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(size - 2 * s.rx)));
  s.cy = s.ry + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(size - 2 * s.ry)));
  return s;
}

bool overlaps(const ShapeRecord& s, const LabelMap& mask) {
  for (std::int64_t y = s.cy - s.ry; y <= s.cy + s.ry; ++y) {
    for (std::int64_t x = s.cx - s.rx; x <= s.cx + s.rx; ++x) {
      if (s.contains(x, y) && mask.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) != 0) return true;
    }
  }
  return false;
}

void paint(const ShapeRecord& s, LabelMap& mask) {
  for (std::int64_t y = s.cy - s.ry; y <= s.cy + s.ry; ++y) {
    for (std::int64_t x = s.cx - s.rx; x <= s.cx + s.rx; ++x) {
      if (s.contains(x, y)) mask.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = s.class_id;
    }
  }
}

std::string sample_stem(std::size_t index) {
  std::ostringstream os;
  os << std::setw(4) << std::setfill('0') << index;
  return os.str();
}

}  // namespace

Sample generate_sample(const SynthSpec& spec, std::size_t index) {
  spec.validate();
  CounterRng rng(spec.seed ^ static_cast<std::uint64_t>(index));
  const std::size_t n = spec.image_size;
  Sample sample;
  sample.mask = LabelMap(n, n, 0);

  const std::size_t shapes = spec.min_shapes + rng.below(spec.max_shapes - spec.min_shapes + 1);
  for (std::size_t i = 0; i < shapes; ++i) {
    ShapeRecord s = draw_shape(spec, rng);
    if (!spec.overlap_allowed) {
      int attempts = 1;
      while (overlaps(s, sample.mask) && attempts < kPlacementAttempts) {
        s = draw_shape(spec, rng);
        ++attempts;
      }
      if (overlaps(s, sample.mask)) continue;  // no free spot; drop the shape
    }
    paint(s, sample.mask);
    sample.shapes.push_back(s);
  }

  std::vector<double> pixels(n * n);
  for (std::size_t i = 0; i < n * n; ++i) {
    double v = class_intensity(static_cast<std::size_t>(sample.mask.labels[i]));
    if (spec.noise_std > 0.0) v += spec.noise_std * rng.normal();
    pixels[i] = std::clamp(v, 0.0, 1.0);
  }
  sample.image = Tensor::from({1, n, n}, std::move(pixels));
  return sample;
}

Dataset generate(const SynthSpec& spec) {
  spec.validate();
  Dataset data;
  data.spec = spec;
  data.samples.reserve(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) data.samples.push_back(generate_sample(spec, i));
  return data;
}

namespace {

// Source coordinate for destination (y, x) of an h_out x w_out result.
template <typename F>
void remap(std::size_t h, std::size_t w, Augmentation kind, F&& emit) {
  const bool swap = kind == Augmentation::kRot90 || kind == Augmentation::kRot270;
  const std::size_t ho = swap ? w : h;
  const std::size_t wo = swap ? h : w;
  for (std::size_t y = 0; y < ho; ++y) {
    for (std::size_t x = 0; x < wo; ++x) {
      std::size_t sy = y, sx = x;
      switch (kind) {
        case Augmentation::kIdentity:
          break;
        case Augmentation::kHFlip:
          sx = w - 1 - x;
          break;
        case Augmentation::kVFlip:
          sy = h - 1 - y;
          break;
        case Augmentation::kRot90:  // clockwise
          sy = h - 1 - x;
          sx = y;
          break;
        case Augmentation::kRot180:
          sy = h - 1 - y;
          sx = w - 1 - x;
          break;
        case Augmentation::kRot270:
          sy = x;
          sx = w - 1 - y;
          break;
      }
      emit(y * wo + x, sy * w + sx);
    }
  }
}

}  // namespace

LabelMap apply_augmentation(const LabelMap& mask, Augmentation kind) {
  const bool swap = kind == Augmentation::kRot90 || kind == Augmentation::kRot270;
  LabelMap out(swap ? mask.width : mask.height, swap ? mask.height : mask.width);
  remap(mask.height, mask.width, kind, [&](std::size_t dst, std::size_t src) { out.labels[dst] = mask.labels[src]; });
  return out;
}

Sample apply_augmentation(const Sample& sample, Augmentation kind) {
  const auto& shape = sample.image.shape();
  if (shape.size() != 3 || shape[1] != sample.mask.height || shape[2] != sample.mask.width) {
    throw DimensionError("augment: image " + shape_str(shape) + " does not match mask " +
                         std::to_string(sample.mask.height) + "x" + std::to_string(sample.mask.width));
  }
  const std::size_t c = shape[0], h = shape[1], w = shape[2];
  const bool swap = kind == Augmentation::kRot90 || kind == Augmentation::kRot270;
  Sample out;
  out.mask = apply_augmentation(sample.mask, kind);
  std::vector<double> pixels(c * h * w);
  const auto src = sample.image.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    remap(h, w, kind, [&](std::size_t d, std::size_t s) { pixels[ch * h * w + d] = src[ch * h * w + s]; });
  }
  out.image = Tensor::from({c, swap ? w : h, swap ? h : w}, std::move(pixels));
  return out;
}

Sample augment(const Sample& sample, CounterRng& rng) {
  return apply_augmentation(sample, static_cast<Augmentation>(rng.below(kAugmentationCount)));
}

std::vector<std::size_t> class_pixel_counts(const Dataset& data) {
  std::vector<std::size_t> counts(data.spec.num_classes, 0);
  for (const auto& s : data.samples) {
    for (auto l : s.mask.labels) {
      if (l >= 0 && static_cast<std::size_t>(l) < counts.size()) ++counts[static_cast<std::size_t>(l)];
    }
  }
  return counts;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& data) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "samples");
  Json files = Json::array();
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const auto& s = data.samples[i];
    const std::string stem = "samples/" + sample_stem(i);
    save_tensor(dir / (stem + ".img"), s.image);
    std::vector<double> labels(s.mask.labels.begin(), s.mask.labels.end());
    save_tensor(dir / (stem + ".msk"), Tensor::from({s.mask.height, s.mask.width}, std::move(labels)));
    files.push_back(Json{{"image", stem + ".img"}, {"mask", stem + ".msk"}});
  }
  Json manifest{{"format", "synergy-dataset"},
                {"version", 1},
                {"spec", to_json(data.spec)},
                {"count", data.samples.size()},
                {"samples", files}};
  write_json_file(dir / "manifest.json", manifest);
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  Json manifest;
  try {
    manifest = read_json_file(manifest_path);
  } catch (const ConfigError& e) {
    throw IntegrityError(e.what());
  }
  auto fail = [&](const std::filesystem::path& file, const std::string& what) -> IntegrityError {
    return IntegrityError(file.string() + ": " + what);
  };
  if (!manifest.is_object() || manifest.value("format", "") != "synergy-dataset" || !manifest.contains("spec") ||
      !manifest.contains("samples") || !manifest["samples"].is_array() || !manifest.contains("count") ||
      !manifest["count"].is_number_unsigned()) {
    throw fail(manifest_path, "not a dataset manifest");
  }
  Dataset data;
  try {
    data.spec = synth_spec_from_json(manifest["spec"]);
  } catch (const ConfigError& e) {
    throw fail(manifest_path, e.what());
  }
  const auto& files = manifest["samples"];
  if (manifest["count"].get<std::size_t>() != files.size()) {
    throw fail(manifest_path, "count does not match the sample list");
  }
  const std::size_t n = data.spec.image_size;
  for (const auto& entry : files) {
    if (!entry.is_object() || !entry.contains("image") || !entry.contains("mask") || !entry["image"].is_string() ||
        !entry["mask"].is_string()) {
      throw fail(manifest_path, "malformed sample entry");
    }
    const auto img_path = dir / entry["image"].get<std::string>();
    const auto msk_path = dir / entry["mask"].get<std::string>();
    Sample s;
    s.image = load_tensor(img_path);
    if (s.image.shape() != Shape{1, n, n}) {
      throw fail(img_path, "shape " + shape_str(s.image.shape()) + " differs from manifest [1x" + std::to_string(n) +
                               "x" + std::to_string(n) + "]");
    }
    for (double v : s.image.data()) {
      if (!(v >= 0.0 && v <= 1.0)) throw fail(img_path, "pixel value outside [0, 1]");
    }
    const Tensor m = load_tensor(msk_path);
    if (m.shape() != Shape{n, n}) throw fail(msk_path, "shape " + shape_str(m.shape()) + " differs from manifest");
    s.mask = LabelMap(n, n);
    for (std::size_t i = 0; i < n * n; ++i) {
      const double v = m.data()[i];
      if (v != std::floor(v) || v < 0.0 || v >= static_cast<double>(data.spec.num_classes)) {
        throw fail(msk_path, "label " + std::to_string(v) + " is not a class id");
      }
      s.mask.labels[i] = static_cast<std::int32_t>(v);
    }
    data.samples.push_back(std::move(s));
  }
  return data;
}

}  // namespace synergy
