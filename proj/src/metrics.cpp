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

#include "synergy/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "synergy/errors.hpp"
#include "synergy/ops.hpp"

namespace synergy {

Tensor seg_loss(const Tensor& probs, const Tensor& truth_onehot) {
  if (probs.shape() != truth_onehot.shape() || probs.rank() < 2) {
    throw DimensionError("seg_loss: probs " + shape_str(probs.shape()) + " vs truth " +
                         shape_str(truth_onehot.shape()));
  }
  for (double p : probs.data()) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("seg_loss: probability " + std::to_string(p) + " outside (0, 1)");
  }
  const Tensor& t = truth_onehot;
  Tensor one_minus_t = add_scalar(neg(t), 1.0);
  Tensor log_p = log(probs);
  Tensor log_q = log(add_scalar(neg(probs), 1.0));
  Tensor bce = neg(mean(add(mul(t, log_p), mul(one_minus_t, log_q))));

  const std::size_t classes = probs.dim(1);
  Tensor dice_sum;
  for (std::size_t c = 0; c < classes; ++c) {
    Tensor pc = slice(probs, 1, c, 1);
    Tensor tc = slice(t, 1, c, 1);
    Tensor num = add_scalar(scale(sum(mul(pc, tc)), 2.0), kDiceSmoothing);
    Tensor den = add_scalar(add(sum(pc), sum(tc)), kDiceSmoothing);
    Tensor dc = div(num, den);
    dice_sum = dice_sum.defined() ? add(dice_sum, dc) : dc;
  }
  Tensor dice_mean = scale(dice_sum, 1.0 / static_cast<double>(classes));
  return add(bce, add_scalar(neg(dice_mean), 1.0));
}

void MaskPair::validate() const {
  if (pred.height != truth.height || pred.width != truth.width || pred.labels.size() != truth.labels.size() ||
      truth.labels.size() != truth.height * truth.width) {
    throw DimensionError("mask pair shapes differ");
  }
  for (const auto* m : {&pred, &truth}) {
    for (auto l : m->labels) {
      if (l < 0 || static_cast<std::size_t>(l) >= num_classes) {
        throw DomainError("label " + std::to_string(l) + " outside [0, " + std::to_string(num_classes) + ")");
      }
    }
  }
}

std::vector<double> one_hot(const LabelMap& labels, std::size_t num_classes) {
  const std::size_t n = labels.labels.size();
  std::vector<double> out(num_classes * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto l = labels.labels[i];
    if (l < 0 || static_cast<std::size_t>(l) >= num_classes) {
      throw DomainError("label " + std::to_string(l) + " outside [0, " + std::to_string(num_classes) + ")");
    }
    out[static_cast<std::size_t>(l) * n + i] = 1.0;
  }
  return out;
}

DiceResult dice_score(const MaskPair& pair, std::int32_t class_id) {
  pair.validate();
  std::size_t inter = 0, p = 0, t = 0;
  for (std::size_t i = 0; i < pair.truth.labels.size(); ++i) {
    const bool in_p = pair.pred.labels[i] == class_id;
    const bool in_t = pair.truth.labels[i] == class_id;
    inter += in_p && in_t;
    p += in_p;
    t += in_t;
  }
  if (p + t == 0) return {1.0, true};
  return {2.0 * static_cast<double>(inter) / static_cast<double>(p + t), false};
}

std::vector<std::size_t> boundary_pixels(const LabelMap& map, std::int32_t class_id) {
  std::vector<std::size_t> out;
  const auto h = map.height;
  const auto w = map.width;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (map.at(y, x) != class_id) continue;
      const bool edge = y == 0 || x == 0 || y + 1 == h || x + 1 == w || map.at(y - 1, x) != class_id ||
                        map.at(y + 1, x) != class_id || map.at(y, x - 1) != class_id ||
                        map.at(y, x + 1) != class_id;
      if (edge) out.push_back(y * w + x);
    }
  }
  return out;
}

namespace {

constexpr double kFar = 1e20;

// Exact squared distance transform of a 1-D sampled function (lower envelope
// of parabolas). Integer inputs give integer outputs.
void distance_1d(const double* f, std::size_t n, std::size_t stride, double* out, std::vector<std::size_t>& v,
                 std::vector<double>& z) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  v.assign(n, 0);
  z.assign(n + 1, 0.0);
  auto fv = [&](std::size_t q) { return f[q * stride]; };
  auto intersect = [&](std::size_t q, std::size_t p) {
    const double a = static_cast<double>(q);
    const double b = static_cast<double>(p);
    return ((fv(q) + a * a) - (fv(p) + b * b)) / (2.0 * a - 2.0 * b);
  };
  std::size_t k = 0;
  z[0] = -inf;
  z[1] = inf;
  for (std::size_t q = 1; q < n; ++q) {
    double s = intersect(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = intersect(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  k = 0;
  for (std::size_t q = 0; q < n; ++q) {
    while (z[k + 1] < static_cast<double>(q)) ++k;
    const double d = static_cast<double>(q) - static_cast<double>(v[k]);
    out[q * stride] = d * d + fv(v[k]);
  }
}

// Squared Euclidean distance from every pixel to the nearest pixel in `seeds`.
std::vector<double> squared_distance_map(std::size_t h, std::size_t w, const std::vector<std::size_t>& seeds) {
  std::vector<double> grid(h * w, kFar);
  for (auto s : seeds) grid[s] = 0.0;
  std::vector<double> tmp(h * w);
  std::vector<std::size_t> v;
  std::vector<double> z;
  for (std::size_t x = 0; x < w; ++x) distance_1d(grid.data() + x, h, w, tmp.data() + x, v, z);
  for (std::size_t y = 0; y < h; ++y) distance_1d(tmp.data() + y * w, w, 1, grid.data() + y * w, v, z);
  return grid;
}

double nearest_rank(std::vector<double> values, double percentile) {
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(percentile * n / 100.0));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

double directed_percentile(const std::vector<std::size_t>& from, const std::vector<double>& to_map,
                           double percentile) {
  std::vector<double> d;
  d.reserve(from.size());
  for (auto p : from) d.push_back(std::sqrt(to_map[p]));
  return nearest_rank(std::move(d), percentile);
}

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

std::optional<double> hausdorff_percentile(const MaskPair& pair, std::int32_t class_id, double percentile) {
  pair.validate();
  const auto a = boundary_pixels(pair.pred, class_id);
  const auto b = boundary_pixels(pair.truth, class_id);
  if (a.empty() || b.empty()) return std::nullopt;
  const auto h = pair.truth.height;
  const auto w = pair.truth.width;
  const double ab = directed_percentile(a, squared_distance_map(h, w, b), percentile);
  const double ba = directed_percentile(b, squared_distance_map(h, w, a), percentile);
  return std::max(ab, ba);
}

std::optional<double> hausdorff95(const MaskPair& pair, std::int32_t class_id) {
  return hausdorff_percentile(pair, class_id, 95.0);
}

ConfusionMetrics confusion_metrics(const MaskPair& pair, std::int32_t class_id) {
  pair.validate();
  ConfusionMetrics m;
  auto& c = m.counts;
  for (std::size_t i = 0; i < pair.truth.labels.size(); ++i) {
    const bool p = pair.pred.labels[i] == class_id;
    const bool t = pair.truth.labels[i] == class_id;
    if (p && t) ++c.tp;
    else if (p) ++c.fp;
    else if (t) ++c.fn;
    else ++c.tn;
  }
  m.iou = ratio(c.tp, c.tp + c.fp + c.fn);
  m.se = ratio(c.tp, c.tp + c.fn);
  m.sp = ratio(c.tn, c.tn + c.fp);
  m.acc = ratio(c.tp + c.tn, c.tp + c.tn + c.fp + c.fn);
  return m;
}

MetricSummary summarize_metrics(const std::vector<MaskPair>& pairs) {
  MetricSummary s;
  if (pairs.empty()) return s;
  s.num_classes = pairs.front().num_classes;
  const std::size_t nc = s.num_classes;

  struct Acc {
    double sum = 0.0;
    std::size_t n = 0;
    void add(const std::optional<double>& v) {
      if (v) {
        sum += *v;
        ++n;
      }
    }
    std::optional<double> mean() const { return n ? std::optional<double>(sum / static_cast<double>(n)) : std::nullopt; }
  };
  std::vector<Acc> dice(nc), hd(nc), iou(nc), se(nc), sp(nc), acc(nc);

  for (const auto& pair : pairs) {
    if (pair.num_classes != nc) throw DimensionError("summarize_metrics: mixed class counts");
    CaseMetrics cm;
    for (std::size_t c = 0; c < nc; ++c) {
      const auto id = static_cast<std::int32_t>(c);
      ClassMetrics row;
      row.class_id = id;
      row.present_in_truth = std::find(pair.truth.labels.begin(), pair.truth.labels.end(), id) != pair.truth.labels.end();
      row.dice = dice_score(pair, id);
      row.hd95 = hausdorff95(pair, id);
      row.confusion = confusion_metrics(pair, id);
      if (c > 0) {
        if (!row.present_in_truth) {
          ++s.excluded_absent;
        } else {
          dice[c].add(row.dice.value);
          if (row.hd95) hd[c].add(row.hd95);
          else ++s.hd95_missing;
          iou[c].add(row.confusion.iou);
          se[c].add(row.confusion.se);
          sp[c].add(row.confusion.sp);
          acc[c].add(row.confusion.acc);
        }
      }
      cm.classes.push_back(row);
    }
    s.cases.push_back(std::move(cm));
  }

  auto class_mean = [&](const std::vector<Acc>& per_class, std::vector<std::optional<double>>* out) {
    Acc overall;
    for (std::size_t c = 1; c < nc; ++c) {
      const auto m = per_class[c].mean();
      if (out) (*out)[c] = m;
      overall.add(m);
    }
    return overall.mean();
  };
  s.class_dice.assign(nc, std::nullopt);
  s.class_hd95.assign(nc, std::nullopt);
  s.mean_dice = class_mean(dice, &s.class_dice);
  s.mean_hd95 = class_mean(hd, &s.class_hd95);
  s.mean_iou = class_mean(iou, nullptr);
  s.mean_se = class_mean(se, nullptr);
  s.mean_sp = class_mean(sp, nullptr);
  s.mean_acc = class_mean(acc, nullptr);
  return s;
}

}  // namespace synergy
