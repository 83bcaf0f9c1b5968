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

#include "synergy/train.hpp"

#include <algorithm>
#include <numeric>

#include "synergy/config.hpp"
#include "synergy/errors.hpp"
#include "synergy/ops.hpp"
#include "synergy/quantizer.hpp"
#include "synergy/serialize.hpp"

namespace synergy {

void sgd_momentum_update(std::span<double> param, std::span<const double> grad, std::span<double> velocity,
                         const SgdOptions& o) {
  if (velocity.size() != param.size() || (!grad.empty() && grad.size() != param.size())) {
    throw DimensionError("sgd_momentum_update: param/grad/velocity sizes differ");
  }
  if (o.lr < 0.0) throw ConfigError("learning rate must be >= 0");
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad.empty() ? 0.0 : grad[i];
    velocity[i] = o.momentum * velocity[i] + g + o.weight_decay * param[i];
    param[i] -= o.lr * velocity[i];
  }
}

SgdMomentum::SgdMomentum(std::vector<Tensor> params, SgdOptions options)
    : params_(std::move(params)), options_(options) {
  if (options_.lr < 0.0) throw ConfigError("learning rate must be >= 0");
  for (const auto& p : params_) velocity_.emplace_back(p.numel(), 0.0);
}

void SgdMomentum::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    sgd_momentum_update(p.mutable_data(), p.has_grad() ? p.grad() : std::span<const double>{}, velocity_[i],
                        options_);
  }
}

void SgdMomentum::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void SgdMomentum::set_velocity(std::vector<std::vector<double>> velocity) {
  if (velocity.size() != velocity_.size()) throw DimensionError("set_velocity: parameter count differs");
  for (std::size_t i = 0; i < velocity.size(); ++i) {
    if (velocity[i].size() != velocity_[i].size()) throw DimensionError("set_velocity: buffer size differs");
  }
  velocity_ = std::move(velocity);
}

Batch make_batch(const std::vector<Sample>& samples) {
  if (samples.empty()) throw DimensionError("make_batch: empty batch");
  const Shape s = samples.front().image.shape();
  if (s.size() != 3) throw DimensionError("make_batch: expected C x H x W images, got " + shape_str(s));
  std::vector<double> pixels;
  pixels.reserve(samples.size() * shape_numel(s));
  Batch batch;
  for (const auto& sample : samples) {
    if (sample.image.shape() != s) {
      throw DimensionError("make_batch: mixed image shapes " + shape_str(s) + " and " +
                           shape_str(sample.image.shape()));
    }
    pixels.insert(pixels.end(), sample.image.data().begin(), sample.image.data().end());
    batch.masks.push_back(sample.mask);
  }
  batch.images = Tensor::from({samples.size(), s[0], s[1], s[2]}, std::move(pixels));
  return batch;
}

Tensor one_hot_targets(const std::vector<LabelMap>& masks, std::size_t num_classes) {
  if (masks.empty()) throw DimensionError("one_hot_targets: no masks");
  const std::size_t h = masks.front().height, w = masks.front().width;
  std::vector<double> values;
  values.reserve(masks.size() * num_classes * h * w);
  for (const auto& m : masks) {
    if (m.height != h || m.width != w) throw DimensionError("one_hot_targets: mixed mask shapes");
    auto oh = one_hot(m, num_classes);
    values.insert(values.end(), oh.begin(), oh.end());
  }
  return Tensor::from({masks.size(), num_classes, h, w}, std::move(values));
}

namespace {

void require_finite(const Tensor& t, const std::string& name) {
  const long at = first_non_finite(t);
  if (at >= 0) {
    throw NumericError("non-finite value in " + name + " at flat index " + std::to_string(at) + " (value " +
                       std::to_string(t.data()[static_cast<std::size_t>(at)]) + ")");
  }
}

}  // namespace

LossTerms compute_loss(const SegModel& model, const Batch& batch) {
  LossTerms terms;
  terms.forward = forward(model, batch.images);
  require_finite(terms.forward.logits, "logits");
  require_finite(terms.forward.quant_loss, "quant_loss");
  const Tensor target = one_hot_targets(batch.masks, model.config.num_classes);
  if (target.shape() != terms.forward.logits.shape()) {
    throw DimensionError("masks " + shape_str(target.shape()) + " do not match logits " +
                         shape_str(terms.forward.logits.shape()));
  }
  terms.seg = seg_loss(class_probabilities(terms.forward.logits), target);
  require_finite(terms.seg, "seg_loss");
  terms.total = add(terms.seg, scale(terms.forward.quant_loss, model.config.quant_weight));
  require_finite(terms.total, "total_loss");
  return terms;
}

LossReport train_step(SegModel& model, const Batch& batch, SgdMomentum& optimizer) {
  optimizer.zero_grad();
  LossTerms terms = compute_loss(model, batch);
  terms.total.backward();
  for (const auto& [name, p] : model.named_parameters()) {
    if (p.has_grad()) {
      const long at = first_non_finite(Tensor::from(p.shape(), {p.grad().begin(), p.grad().end()}));
      if (at >= 0) throw NumericError("non-finite gradient of " + name + " at flat index " + std::to_string(at));
    }
  }
  optimizer.step();
  LossReport r;
  r.total = terms.total.item();
  r.seg = terms.seg.item();
  r.quant = terms.forward.quant_loss.item();
  r.code_indices = std::move(terms.forward.indices);
  return r;
}

namespace {

namespace fs = std::filesystem;

Json shape_json(const Shape& s) {
  Json j = Json::array();
  for (auto e : s) j.push_back(e);
  return j;
}

}  // namespace

void save_checkpoint(const fs::path& dir, const Checkpoint& ck) {
  const auto named = ck.model.named_parameters();
  if (ck.velocity.size() != named.size()) throw DimensionError("save_checkpoint: momentum buffer count differs");
  fs::path target = dir;
  if (target.filename().empty()) target = target.parent_path();
  const fs::path tmp = target.string() + ".partial";
  fs::remove_all(tmp);
  fs::create_directories(tmp / "params");
  fs::create_directories(tmp / "momentum");
  Json params = Json::array();
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto& [name, t] = named[i];
    save_tensor(tmp / "params" / (name + ".syt"), t);
    save_tensor(tmp / "momentum" / (name + ".syt"), Tensor::from(t.shape(), ck.velocity[i]));
    params.push_back(Json{{"name", name}, {"shape", shape_json(t.shape())}});
  }
  Json manifest{{"format", "synergy-checkpoint"},
                {"version", 1},
                {"config", to_json(ck.model.config)},
                {"optimizer", {{"lr", ck.optimizer.lr}, {"momentum", ck.optimizer.momentum},
                               {"weight_decay", ck.optimizer.weight_decay}}},
                {"step", ck.step},
                {"epoch", ck.epoch},
                {"rng_state", {{"seed", ck.rng_state.seed}, {"counter", ck.rng_state.counter}}},
                {"parameters", params}};
  write_json_file(tmp / "manifest.json", manifest);
  fs::remove_all(target);
  fs::rename(tmp, target);
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  Json m;
  try {
    m = read_json_file(manifest_path);
  } catch (const ConfigError& e) {
    throw IntegrityError(e.what());
  }
  auto fail = [&](const std::string& what) { return IntegrityError(manifest_path.string() + ": " + what); };
  if (!m.is_object() || m.value("format", "") != "synergy-checkpoint") throw fail("not a checkpoint manifest");
  for (const char* key : {"config", "optimizer", "step", "epoch", "rng_state", "parameters"}) {
    if (!m.contains(key)) throw fail(std::string("missing \"") + key + "\"");
  }
  Checkpoint ck;
  ck.model = SegModel::init(model_config_from_json(m["config"]));
  try {
    const auto& o = m["optimizer"];
    ck.optimizer = SgdOptions{o.at("lr").get<double>(), o.at("momentum").get<double>(),
                              o.at("weight_decay").get<double>()};
    ck.step = m["step"].get<std::size_t>();
    ck.epoch = m["epoch"].get<std::size_t>();
    ck.rng_state.seed = m["rng_state"].at("seed").get<std::uint64_t>();
    ck.rng_state.counter = m["rng_state"].at("counter").get<std::uint64_t>();
  } catch (const Json::exception& e) {
    throw fail(e.what());
  }
  const auto named = ck.model.named_parameters();
  const auto& listed = m["parameters"];
  if (!listed.is_array() || listed.size() != named.size()) throw fail("parameter list does not match the config");
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto& [name, t] = named[i];
    if (!listed[i].is_object() || listed[i].value("name", "") != name) {
      throw fail("parameter " + std::to_string(i) + " should be " + name);
    }
    const fs::path pfile = dir / "params" / (name + ".syt");
    const fs::path vfile = dir / "momentum" / (name + ".syt");
    const Tensor values = load_tensor(pfile);
    if (values.shape() != t.shape()) {
      throw IntegrityError(pfile.string() + ": shape " + shape_str(values.shape()) + ", expected " +
                           shape_str(t.shape()));
    }
    const Tensor velocity = load_tensor(vfile);
    if (velocity.shape() != t.shape()) {
      throw IntegrityError(vfile.string() + ": shape " + shape_str(velocity.shape()) + ", expected " +
                           shape_str(t.shape()));
    }
    Tensor param = t;
    std::copy(values.data().begin(), values.data().end(), param.mutable_data().begin());
    ck.velocity.emplace_back(velocity.data().begin(), velocity.data().end());
  }
  return ck;
}

std::vector<LabelMap> predict(const SegModel& model, const std::vector<Sample>& samples, std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  NoGradGuard no_grad;
  std::vector<LabelMap> out;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::size_t end = std::min(samples.size(), start + batch_size);
    const Batch batch = make_batch({samples.begin() + static_cast<long>(start), samples.begin() + static_cast<long>(end)});
    for (auto& m : predict_labels(forward(model, batch.images).logits)) out.push_back(std::move(m));
  }
  return out;
}

MetricSummary evaluate(const SegModel& model, const std::vector<Sample>& samples, std::size_t batch_size) {
  const auto preds = predict(model, samples, batch_size);
  std::vector<MaskPair> pairs;
  pairs.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    pairs.push_back(MaskPair{preds[i], samples[i].mask, model.config.num_classes});
  }
  return summarize_metrics(pairs);
}

std::vector<EpochReport> fit(SegModel& model, const std::vector<Sample>& train, const std::vector<Sample>& val,
                             const TrainOptions& options,
                             const std::function<void(const EpochReport&, const Checkpoint&)>& on_epoch) {
  if (train.empty()) throw ConfigError("training set is empty");
  if (options.batch_size == 0) throw ConfigError("batch_size must be positive");
  CounterRng rng(options.seed);
  SgdMomentum optimizer(model.parameters(), options.sgd);
  std::vector<std::size_t> order(train.size());
  std::vector<EpochReport> history;
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    EpochReport report;
    report.epoch = epoch;
    std::vector<std::size_t> codes;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      std::vector<Sample> chunk;
      for (std::size_t i = start; i < end; ++i) {
        chunk.push_back(options.augment ? augment(train[order[i]], rng) : train[order[i]]);
      }
      auto loss = train_step(model, make_batch(chunk), optimizer);
      report.total += loss.total;
      report.seg += loss.seg;
      report.quant += loss.quant;
      codes.insert(codes.end(), loss.code_indices.begin(), loss.code_indices.end());
      ++batches;
      ++step;
    }
    report.total /= static_cast<double>(batches);
    report.seg /= static_cast<double>(batches);
    report.quant /= static_cast<double>(batches);
    const auto stats = codebook_stats(codes, model.config.codebook_size);
    report.codebook_perplexity = stats.perplexity;
    report.codebook_utilization = stats.utilization;
    if (!val.empty()) report.val_dsc = evaluate(model, val, options.batch_size).mean_dice;
    history.push_back(report);
    if (on_epoch) {
      Checkpoint ck{model, optimizer.velocity(), options.sgd, step, epoch, rng.state()};
      on_epoch(report, ck);
    }
  }
  return history;
}

}  // namespace synergy
