#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <vector>

#include "eegdl/dsp.hpp"
#include "eegdl/error.hpp"
#include "eegdl/nn.hpp"
#include "eegdl/rng.hpp"
#include "eegdl/tape.hpp"

namespace eegdl::train {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  long t = 0;
  AdamHyper hyper;

  static AdamState init(const nn::ModelParams<T>& params, AdamHyper hyper = {}) {
    AdamState s;
    s.hyper = hyper;
    for (const auto& [name, tensor] : params.tensors) {
      s.m.emplace_back(tensor.shape());
      s.v.emplace_back(tensor.shape());
    }
    return s;
  }
};

/// Bias-corrected Adam update over the ordered parameter list.
template <typename T>
void adam_step(nn::ModelParams<T>& params, const std::vector<Tensor<T>>& grads,
               AdamState<T>& state) {
  if (grads.size() != params.tensors.size())
    throw runtime_error("ShapeMismatch", "gradient list does not match parameter list");
  state.t += 1;
  const AdamHyper& h = state.hyper;
  double bc1 = 1.0 - std::pow(h.beta1, state.t);
  double bc2 = 1.0 - std::pow(h.beta2, state.t);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    Tensor<T>& theta = params.tensors[i].second;
    const Tensor<T>& g = grads[i];
    if (!theta.same_shape(g))
      throw runtime_error("ShapeMismatch", "gradient shape mismatch for " +
                                               params.tensors[i].first);
    Tensor<T>& m = state.m[i];
    Tensor<T>& v = state.v[i];
    for (std::size_t j = 0; j < g.size(); ++j) {
      double gj = static_cast<double>(g.at(j));
      double mj = h.beta1 * m.at(j) + (1.0 - h.beta1) * gj;
      double vj = h.beta2 * v.at(j) + (1.0 - h.beta2) * gj * gj;
      m.at(j) = static_cast<T>(mj);
      v.at(j) = static_cast<T>(vj);
      double mhat = mj / bc1;
      double vhat = vj / bc2;
      theta.at(j) = static_cast<T>(theta.at(j) - h.lr * mhat / (std::sqrt(vhat) + h.eps));
    }
  }
}

struct TrainConfig {
  int max_epochs = 100;
  std::size_t batch_size = 64;
  int k_folds = 5;
  int patience = 10;
  double min_delta = 0.0;  // any strictly larger improvement resets patience
  AdamHyper adam;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  double train_acc = 0;
  double val_loss = 0;
  double val_acc = 0;
  std::size_t n_batches = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int stopped_epoch = 0;
  int best_epoch = 0;

  std::string to_csv() const {
    std::ostringstream os;
    os << "epoch,train_loss,train_acc,val_loss,val_acc\n";
    char buf[160];
    for (const auto& e : epochs) {
      std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g\n", e.epoch, e.train_loss,
                    e.train_acc, e.val_loss, e.val_acc);
      os << buf;
    }
    return os.str();
  }
};

struct TrainSeeds {
  std::uint64_t init = 0;
  std::uint64_t shuffle = 0;
  std::uint64_t dropout = 0;
  std::uint64_t folds = 0;
};

/// Pack selected window samples into a B x T x F batch plus label indices.
template <typename T>
std::pair<Tensor<T>, std::vector<int>> make_batch(
    const std::vector<dsp::WindowSample>& samples, const std::vector<std::size_t>& idx) {
  std::size_t rows = samples[idx[0]].data.dim(0);
  std::size_t cols = samples[idx[0]].data.dim(1);
  Tensor<T> batch({idx.size(), rows, cols});
  std::vector<int> labels(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto& w = samples[idx[i]];
    for (std::size_t j = 0; j < rows * cols; ++j)
      batch.data()[i * rows * cols + j] = static_cast<T>(w.data.data()[j]);
    labels[i] = dataio::label_index(w.label);
  }
  return {std::move(batch), std::move(labels)};
}

template <typename T>
std::size_t argmax_row(const Tensor<T>& probs, std::size_t row) {
  // exact ties resolve to the lower index (truth)
  std::size_t best = 0;
  for (std::size_t c = 1; c < probs.dim(1); ++c)
    if (probs(row, c) > probs(row, best)) best = c;
  return best;
}

struct SplitMetrics {
  double loss = 0;
  double accuracy = 0;
};

/// Inference-mode loss and accuracy over a sample list, per-sample averaged.
template <typename T>
SplitMetrics evaluate_split(const nn::ModelParams<T>& params,
                            const std::vector<dsp::WindowSample>& samples,
                            std::size_t batch_size) {
  if (samples.empty()) throw data_error("EmptyInput", "cannot evaluate an empty split");
  double loss_sum = 0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    std::size_t end = std::min(start + batch_size, samples.size());
    std::vector<std::size_t> idx(end - start);
    std::iota(idx.begin(), idx.end(), start);
    auto [batch, labels] = make_batch<T>(samples, idx);
    Tape<T> tape;
    nn::BoundModel<T> bound = nn::bind_params(tape, params);
    Var logits = nn::model_logits(tape, bound, batch, /*training=*/false, 0);
    Tensor<T> probs = Tape<T>::softmax_value(tape.value(logits));
    Var loss = tape.softmax_cross_entropy(logits, nn::one_hot<T>(labels));
    loss_sum += static_cast<double>(tape.value(loss).at(0)) * static_cast<double>(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i)
      if (argmax_row(probs, i) == static_cast<std::size_t>(labels[i])) ++correct;
  }
  return {loss_sum / samples.size(),
          static_cast<double>(correct) / static_cast<double>(samples.size())};
}

struct EpochMetrics {
  double loss = 0;
  double accuracy = 0;
  std::size_t n_batches = 0;
};

/// One pass over the training split: seeded shuffle, forward/backward/Adam
/// per batch, final partial batch kept. Loss and accuracy are averaged per
/// sample so the partial batch does not bias the mean.
template <typename T>
EpochMetrics train_epoch(nn::ModelParams<T>& params,
                         const std::vector<dsp::WindowSample>& samples,
                         AdamState<T>& state, const TrainConfig& config,
                         std::uint64_t shuffle_seed, std::uint64_t dropout_seed) {
  if (samples.empty()) throw data_error("EmptyInput", "cannot train on an empty split");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(shuffle_seed);
  std::shuffle(order.begin(), order.end(), shuffle_rng);

  EpochMetrics metrics;
  double loss_sum = 0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
    std::size_t end = std::min(start + config.batch_size, order.size());
    std::vector<std::size_t> idx(order.begin() + start, order.begin() + end);
    auto [batch, labels] = make_batch<T>(samples, idx);
    Tape<T> tape;
    nn::BoundModel<T> bound = nn::bind_params(tape, params);
    std::uint64_t batch_dropout = mix_seed(dropout_seed, metrics.n_batches);
    Var logits = nn::model_logits(tape, bound, batch, /*training=*/true, batch_dropout);
    Tensor<T> probs = Tape<T>::softmax_value(tape.value(logits));
    Var loss = tape.softmax_cross_entropy(logits, nn::one_hot<T>(labels));
    loss_sum += static_cast<double>(tape.value(loss).at(0)) * static_cast<double>(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i)
      if (argmax_row(probs, i) == static_cast<std::size_t>(labels[i])) ++correct;

    std::vector<Tensor<T>> all = tape.backward(loss);
    std::vector<Tensor<T>> grads;
    grads.reserve(bound.vars.size());
    for (Var v : bound.vars) grads.push_back(std::move(all[v]));
    adam_step(params, grads, state);
    ++metrics.n_batches;
  }
  metrics.loss = loss_sum / samples.size();
  metrics.accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
  return metrics;
}

enum class StopDecision { continue_training, stop };

/// Stop once `patience` epochs have passed without a strict improvement
/// (beyond min_delta) of the best validation loss.
inline StopDecision early_stopping_check(const TrainHistory& history, int patience,
                                         double min_delta = 0.0) {
  if (history.epochs.empty())
    throw runtime_error("EmptyHistory", "early stopping needs at least one epoch");
  double best = history.epochs.front().val_loss;
  int best_epoch = history.epochs.front().epoch;
  for (const auto& e : history.epochs)
    if (e.val_loss < best - min_delta) {
      best = e.val_loss;
      best_epoch = e.epoch;
    }
  int last = history.epochs.back().epoch;
  return last - best_epoch >= patience ? StopDecision::stop : StopDecision::continue_training;
}

/// Train with per-epoch validation and early stopping; on return `params`
/// holds the best-validation-loss weights seen.
template <typename T>
TrainHistory fit(nn::ModelParams<T>& params, const std::vector<dsp::WindowSample>& train_set,
                 const std::vector<dsp::WindowSample>& val_set, const TrainConfig& config,
                 const TrainSeeds& seeds,
                 std::ostream* log = nullptr) {
  AdamState<T> state = AdamState<T>::init(params, config.adam);
  TrainHistory history;
  nn::ModelParams<T> best_params = params;
  double best_val = std::numeric_limits<double>::infinity();
  history.best_epoch = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    EpochMetrics tm = train_epoch(params, train_set, state, config,
                                  mix_seed(seeds.shuffle, static_cast<std::uint64_t>(epoch)),
                                  mix_seed(seeds.dropout, static_cast<std::uint64_t>(epoch)));
    SplitMetrics vm = evaluate_split(params, val_set, config.batch_size);
    history.epochs.push_back(
        {epoch, tm.loss, tm.accuracy, vm.loss, vm.accuracy, tm.n_batches});
    if (log)
      *log << "epoch " << epoch << ": " << tm.n_batches << " batches"
           << " train_loss=" << tm.loss << " train_acc=" << tm.accuracy
           << " val_loss=" << vm.loss << " val_acc=" << vm.accuracy << "\n";
    if (vm.loss < best_val - config.min_delta) {
      best_val = vm.loss;
      history.best_epoch = epoch;
      best_params = params;
    }
    history.stopped_epoch = epoch;
    if (early_stopping_check(history, config.patience, config.min_delta) ==
        StopDecision::stop) {
      if (log) *log << "early stopping at epoch " << epoch
                    << ", restoring epoch " << history.best_epoch << "\n";
      break;
    }
  }
  params = std::move(best_params);
  return history;
}

/// Seeded stratified partition into k near-equal folds; returns fold index
/// per sample.
inline std::vector<int> assign_folds(const std::vector<dsp::WindowSample>& samples,
                                     int k, std::uint64_t seed) {
  std::vector<std::size_t> truth_idx, lie_idx;
  for (std::size_t i = 0; i < samples.size(); ++i)
    (samples[i].label == dataio::ClassLabel::truth ? truth_idx : lie_idx).push_back(i);
  if (truth_idx.size() < static_cast<std::size_t>(k) ||
      lie_idx.size() < static_cast<std::size_t>(k))
    throw data_error("TooFewSamples", "need at least k samples per class for k-fold CV");
  Rng rng(seed);
  std::vector<int> fold(samples.size(), -1);
  int next = 0;
  for (auto* idx : {&truth_idx, &lie_idx}) {
    std::shuffle(idx->begin(), idx->end(), rng);
    for (std::size_t i : *idx) fold[i] = next++ % k;
  }
  return fold;
}

template <typename T>
struct FoldResult {
  TrainHistory history;
  nn::ModelParams<T> params;
  double best_val_loss = 0;
};

template <typename T>
std::vector<FoldResult<T>> kfold_cv(const std::vector<dsp::WindowSample>& samples,
                                    const nn::ArchConfig& arch, const TrainConfig& config,
                                    const TrainSeeds& seeds, std::ostream* log = nullptr) {
  std::vector<int> fold = assign_folds(samples, config.k_folds, seeds.folds);
  std::vector<FoldResult<T>> results;
  for (int f = 0; f < config.k_folds; ++f) {
    std::vector<dsp::WindowSample> tr, va;
    for (std::size_t i = 0; i < samples.size(); ++i)
      (fold[i] == f ? va : tr).push_back(samples[i]);
    if (log) *log << "fold " << (f + 1) << "/" << config.k_folds << ": " << tr.size()
                  << " train / " << va.size() << " validation\n";
    FoldResult<T> res;
    res.params = nn::build_model<T>(arch, mix_seed(seeds.init, static_cast<std::uint64_t>(f)));
    TrainSeeds fold_seeds = seeds;
    fold_seeds.shuffle = mix_seed(seeds.shuffle, 1000 + static_cast<std::uint64_t>(f));
    fold_seeds.dropout = mix_seed(seeds.dropout, 1000 + static_cast<std::uint64_t>(f));
    res.history = fit(res.params, tr, va, config, fold_seeds, log);
    res.best_val_loss =
        res.history.epochs[static_cast<std::size_t>(res.history.best_epoch) - 1].val_loss;
    results.push_back(std::move(res));
  }
  return results;
}

enum class FinalModelPolicy { retrain_full, best_fold };

/// After CV, either retrain on the whole train split (early stopping driven
/// by a 10% stratified holdout) or take the fold with the lowest best
/// validation loss.
template <typename T>
nn::ModelParams<T> select_final_model(const std::vector<dsp::WindowSample>& samples,
                                      const std::vector<FoldResult<T>>& folds,
                                      const nn::ArchConfig& arch, const TrainConfig& config,
                                      const TrainSeeds& seeds, FinalModelPolicy policy,
                                      TrainHistory* final_history = nullptr,
                                      std::ostream* log = nullptr) {
  if (policy == FinalModelPolicy::best_fold) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < folds.size(); ++i)
      if (folds[i].best_val_loss < folds[best].best_val_loss) best = i;
    if (final_history) *final_history = folds[best].history;
    return folds[best].params;
  }
  dsp::SplitDataset holdout = dsp::split_train_test(samples, 0.1,
                                                    mix_seed(seeds.folds, 777), true);
  nn::ModelParams<T> params = nn::build_model<T>(arch, mix_seed(seeds.init, 999));
  TrainSeeds final_seeds = seeds;
  final_seeds.shuffle = mix_seed(seeds.shuffle, 2000);
  final_seeds.dropout = mix_seed(seeds.dropout, 2000);
  if (log) *log << "final retrain: " << holdout.train.size() << " train / "
                << holdout.test.size() << " holdout\n";
  TrainHistory history = fit(params, holdout.train, holdout.test, config, final_seeds, log);
  if (final_history) *final_history = std::move(history);
  return params;
}

}  // namespace eegdl::train
