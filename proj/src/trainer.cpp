// Copyright (c) 2026 The MFCon Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mfcon/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

#include "mfcon/errors.hpp"
#include "mfcon/random.hpp"

namespace mfcon {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(lr >= 0)) throw ConfigError("train.lr must be >= 0");
  if (lr_halve_every < 1) throw ConfigError("train.lr_halve_every must be >= 1");
  if (epochs < 0) throw ConfigError("train.epochs must be >= 0");
  if (!(crop_seconds > 0)) throw ConfigError("train.crop_seconds must be > 0");
  if (eval_every < 0) throw ConfigError("train.eval_every must be >= 0");
  if (!(augment.p_noise >= 0 && augment.p_noise <= 1) ||
      augment.snr_min > augment.snr_max) {
    throw ConfigError("invalid augmentation options");
  }
  loss.validate();
}

double lr_schedule(int epoch, const TrainConfig& cfg) {
  return cfg.lr * std::pow(0.5, epoch / cfg.lr_halve_every);
}

Dataset make_dataset(std::vector<Waveform> utterances) {
  if (utterances.empty()) throw DataError("dataset is empty");
  Dataset d;
  std::set<std::string> ids;
  for (const auto& w : utterances) ids.insert(w.speaker_id);
  d.speakers.assign(ids.begin(), ids.end());
  std::map<std::string, int> index;
  for (size_t i = 0; i < d.speakers.size(); ++i) {
    index[d.speakers[i]] = static_cast<int>(i);
  }
  for (const auto& w : utterances) d.labels.push_back(index.at(w.speaker_id));
  d.utterances = std::move(utterances);
  return d;
}

Batch build_batch(const Dataset& data, std::span<const size_t> indices,
                  const Model& model, const Augmenter& augmenter,
                  const TrainConfig& cfg, uint64_t rng_seed) {
  if (data.size() == 0 || indices.empty()) {
    throw DataError("cannot build a batch from an empty dataset");
  }
  const size_t b = indices.size();
  std::vector<FeatureMatrix> feats(2 * b);
  Batch batch;
  batch.layout.labels.resize(2 * b);
  batch.layout.pair_index.resize(2 * b);
  batch.is_augmented.resize(2 * b);
  for (size_t i = 0; i < b; ++i) {
    const size_t idx = indices[i];
    if (idx >= data.size()) throw DataError("batch index out of range");
    const Waveform crop = random_crop(data.utterances[idx], cfg.crop_seconds,
                                      mix_seed(rng_seed, i, 0));
    Waveform aug;
    try {
      aug = augment(crop, augmenter.sample(crop.samples.size(),
                                           mix_seed(rng_seed, i, 1)));
    } catch (const DegenerateInputError&) {
      // Silent crop: SNR and peak normalization are undefined.
      aug = crop;
    }
    feats[i] = model.features(crop);
    feats[b + i] = model.features(aug);
    const int label = data.labels[idx];
    batch.layout.labels[i] = batch.layout.labels[b + i] = label;
    batch.layout.pair_index[i] = static_cast<int>(b + i);
    batch.layout.pair_index[b + i] = static_cast<int>(i);
    batch.is_augmented[i] = false;
    batch.is_augmented[b + i] = true;
  }
  batch.seg_len = feats[0].num_frames();
  const int f = feats[0].num_bins();
  batch.features.resize(static_cast<Eigen::Index>(2 * b) * batch.seg_len, f);
  for (size_t i = 0; i < 2 * b; ++i) {
    batch.features.middleRows(static_cast<Eigen::Index>(i) * batch.seg_len,
                              batch.seg_len) = feats[i].values;
  }
  return batch;
}

namespace {

std::string describe(const LossBreakdown& br) {
  std::ostringstream os;
  os << "total=" << br.total << " ams=" << br.ams
     << " speaker_supcon=" << br.speaker_supcon << " lambda1=" << br.lambda1
     << " lambda2=" << br.lambda2 << " contrastive=[";
  for (size_t i = 0; i < br.contrastive.size(); ++i) {
    os << (i ? "," : "") << br.contrastive[i];
  }
  os << "]";
  return os.str();
}

}  // namespace

LossBreakdown compute_gradients(Model& model, const Batch& batch,
                                const TrainConfig& cfg, uint64_t step_seed) {
  const auto [lambda1, lambda2] = objective_lambdas(cfg.objective, cfg.loss);
  ParameterStore& params = model.params();
  params.zero_grad();
  ag::Tape tape;
  ForwardContext ctx(tape, params, Mode::kTrain, step_seed);
  const bool with_taps = lambda1 != 0.0;
  Model::Outputs out = model.forward(ctx, batch.features, batch.seg_len,
                                     with_taps);
  std::vector<Matrix> taps;
  taps.reserve(out.tap_embeddings.size());
  for (const ag::Var& v : out.tap_embeddings) taps.push_back(v.value());
  ag::Param& classifier = params.at("classifier.weight");
  CompositeResult res =
      composite_loss(taps, out.speaker.value(), batch.layout,
                     classifier.value, cfg.loss, lambda1, lambda2);
  if (!std::isfinite(res.breakdown.total)) {
    throw NumericalError("non-finite loss: " + describe(res.breakdown));
  }
  std::vector<std::pair<ag::Var, Matrix>> seeds;
  seeds.emplace_back(out.speaker, std::move(res.grad_speaker));
  for (size_t i = 0; i < taps.size(); ++i) {
    seeds.emplace_back(out.tap_embeddings[i], std::move(res.grad_taps[i]));
  }
  tape.backward(seeds);
  classifier.grad += res.grad_classifier;
  return res.breakdown;
}

LossBreakdown train_step(Model& model, Adam& opt, const Batch& batch,
                         const TrainConfig& cfg, double lr,
                         uint64_t step_seed) {
  LossBreakdown br = compute_gradients(model, batch, cfg, step_seed);
  for (const auto& [name, p] : model.params()) {
    if (p.trainable && !p.grad.allFinite()) {
      throw NumericalError("non-finite gradient in " + name + ": " +
                           describe(br));
    }
  }
  opt.step(model.params(), lr);
  return br;
}

UtteranceStore make_store(std::span<const Waveform> utterances) {
  UtteranceStore store;
  for (const auto& w : utterances) {
    if (!store.emplace(w.utterance_id, w).second) {
      throw DataError("duplicate utterance id " + w.utterance_id);
    }
  }
  return store;
}

EvalResult evaluate(const Model& model, std::span<const Trial> trials,
                    const UtteranceStore& store) {
  std::vector<std::string> missing;
  std::vector<std::string> order;
  std::set<std::string> seen;
  for (const Trial& t : trials) {
    for (const std::string* id : {&t.enroll_utt, &t.test_utt}) {
      if (!seen.insert(*id).second) continue;
      if (store.count(*id) == 0) {
        missing.push_back(*id);
      } else {
        order.push_back(*id);
      }
    }
  }
  if (!missing.empty()) {
    std::string msg = "utterances missing from the store:";
    for (const auto& id : missing) msg += " " + id;
    throw LookupError(msg);
  }
  std::unordered_map<std::string, Vector> embeddings;
  for (const auto& id : order) embeddings[id] = model.embed(store.at(id));
  EvalResult r;
  r.scores = score_trials(trials, embeddings);
  const OperatingPoint eer = compute_eer(r.scores);
  const OperatingPoint dcf = compute_mindcf(r.scores, 0.01);
  r.eer = eer.value;
  r.eer_threshold = eer.threshold;
  r.mindcf = dcf.value;
  r.mindcf_threshold = dcf.threshold;
  return r;
}

TrainResult train(Model& model, const Dataset& data, const TrainConfig& cfg,
                  const Augmenter& augmenter, const TrainHooks& hooks) {
  cfg.validate();
  if (data.size() == 0) throw DataError("dataset is empty");
  if (static_cast<int>(data.speakers.size()) > model.config().num_classes) {
    throw ConfigError("dataset has more speakers than classifier rows");
  }
  const bool can_eval = hooks.store != nullptr && !hooks.trials.empty();
  Adam opt;
  TrainResult result;
  std::vector<size_t> order(data.size());
  int64_t step = 0;
  auto run_eval = [&]() {
    EvalResult e = evaluate(model, hooks.trials, *hooks.store);
    if (hooks.on_eval) hooks.on_eval(step, e);
    return e;
  };
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(cfg.seed, 0xE90C, static_cast<uint64_t>(epoch)));
    for (size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[uniform_index(rng, i)]);
    }
    const double lr = lr_schedule(epoch, cfg);
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::span<const size_t> idx(order.data() + start, end - start);
      const Batch batch =
          build_batch(data, idx, model, augmenter, cfg,
                      mix_seed(cfg.seed, 0xBA7C, static_cast<uint64_t>(step)));
      StepRecord rec;
      rec.step = step;
      rec.epoch = epoch;
      rec.lr = lr;
      rec.loss = train_step(model, opt, batch, cfg, lr,
                            mix_seed(cfg.seed, 0xD80, static_cast<uint64_t>(step)));
      ++step;
      if (hooks.on_step) hooks.on_step(rec);
      result.history.push_back(std::move(rec));
      if (can_eval && cfg.eval_every > 0 && step % cfg.eval_every == 0) {
        run_eval();
      }
    }
  }
  if (can_eval) result.final_eval = run_eval();
  return result;
}

std::string step_record_json(const StepRecord& r) {
  nlohmann::json j;
  j["step"] = r.step;
  j["epoch"] = r.epoch;
  j["lr"] = r.lr;
  j["total"] = r.loss.total;
  j["ams"] = r.loss.ams;
  j["contrastive"] = r.loss.contrastive;
  j["speaker_supcon"] = r.loss.speaker_supcon;
  j["lambda1"] = r.loss.lambda1;
  j["lambda2"] = r.loss.lambda2;
  j["dropped_anchors"] = r.loss.dropped_anchors;
  return j.dump();
}

}  // namespace mfcon
