// Microbenchmarks for the hot paths: filtering, segmentation, the model
// forward pass, and one optimizer step.
#include <benchmark/benchmark.h>

#include <random>

#include "eegdl/dataio.hpp"
#include "eegdl/dsp.hpp"
#include "eegdl/nn.hpp"
#include "eegdl/tape.hpp"
#include "eegdl/train.hpp"

namespace {

using eegdl::Tensor;
using eegdl::Var;

eegdl::dataio::EegRecording make_recording(std::size_t n_samples) {
  eegdl::dataio::EegRecording rec;
  rec.subject_id = "S001";
  rec.run_id = "R1";
  rec.sample_rate_hz = 128.0;
  rec.channel_names = eegdl::dataio::default_channels();
  rec.samples = Tensor<double>({n_samples, rec.channel_names.size()});
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.0);
  for (auto& v : rec.samples.data()) v = g(rng);
  return rec;
}

void BM_BandpassFilter(benchmark::State& state) {
  auto rec = make_recording(static_cast<std::size_t>(state.range(0)));
  eegdl::dsp::FilterSpec spec;
  for (auto _ : state) {
    auto out = eegdl::dsp::bandpass_filter(rec, spec);
    benchmark::DoNotOptimize(out.samples.data().data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BandpassFilter)->Arg(512)->Arg(4096);

void BM_WindowSegments(benchmark::State& state) {
  auto rec = make_recording(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    auto windows = eegdl::dsp::window_segments(rec, 64, 32);
    benchmark::DoNotOptimize(windows.data());
  }
}
BENCHMARK(BM_WindowSegments)->Arg(4096);

Tensor<float> random_batch(std::size_t batch) {
  Tensor<float> t({batch, 64, 13});
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  for (auto& v : t.data()) v = static_cast<float>(g(rng));
  return t;
}

void BM_ModelForward(benchmark::State& state) {
  eegdl::nn::ArchConfig arch;  // default widths: Bi-GRU 128/64/32, dense 64/32
  arch.dropout_rate = 0.0;
  auto params = eegdl::nn::build_model<float>(arch, 3);
  auto batch = random_batch(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    eegdl::Tape<float> tape;
    auto bound = eegdl::nn::bind_params(tape, params);
    Var probs = eegdl::nn::model_forward(tape, bound, batch, false, 0);
    benchmark::DoNotOptimize(tape.value(probs).data().data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ModelForward)->Arg(8)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  eegdl::nn::ArchConfig arch;
  arch.dropout_rate = 0.0;
  auto params = eegdl::nn::build_model<float>(arch, 4);
  auto state_adam = eegdl::train::AdamState<float>::init(params);
  auto batch = random_batch(static_cast<std::size_t>(state.range(0)));
  Tensor<float> labels({batch.dim(0), 2});
  for (std::size_t i = 0; i < batch.dim(0); ++i) labels(i, i % 2) = 1.0f;
  for (auto _ : state) {
    eegdl::Tape<float> tape;
    auto bound = eegdl::nn::bind_params(tape, params);
    Var logits = eegdl::nn::model_logits(tape, bound, batch, true, 0);
    Var loss = tape.softmax_cross_entropy(logits, labels);
    auto all = tape.backward(loss);
    std::vector<Tensor<float>> grads;
    for (Var v : bound.vars) grads.push_back(std::move(all[v]));
    eegdl::train::adam_step(params, grads, state_adam);
    benchmark::DoNotOptimize(params.tensors.front().second.data().data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainStep)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
