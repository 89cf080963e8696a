#include <doctest.h>

#include <cmath>
#include <random>

#include "eegdl/nn.hpp"
#include "support.hpp"

using namespace eegdl::nn;
using eegdl::Error;
using eegdl::Rng;
using eegdl::Tape;
using eegdl::Tensor;
using eegdl::Var;
using test_support::gradcheck;
using test_support::random_tensor;

namespace {

template <typename T>
GruCellVars<T> zero_cell(Tape<T>& tape, std::size_t f_in, std::size_t h) {
  auto m = [&](std::size_t r, std::size_t c) { return tape.leaf(Tensor<T>({r, c})); };
  auto v = [&](std::size_t n) { return tape.leaf(Tensor<T>({n})); };
  return {m(f_in, h), m(f_in, h), m(f_in, h), m(h, h), m(h, h), m(h, h), v(h), v(h), v(h)};
}

template <typename T>
ModelParams<T> zeroed(ModelParams<T> p) {
  for (auto& [name, t] : p.tensors) std::fill(t.data().begin(), t.data().end(), T(0));
  return p;
}

}  // namespace

TEST_CASE("gru cell with zero parameters halves the previous state") {
  Tape<double> tape;
  GruCellVars<double> cell = zero_cell(tape, 2, 3);
  Var x = tape.leaf(Tensor<double>({1, 2}, {0.3, -0.7}));
  Var h = tape.leaf(Tensor<double>({1, 3}, {2.0, -4.0, 6.0}));
  Tensor<double> out = tape.value(gru_cell_step(tape, x, h, cell));
  CHECK(out.at(0) == doctest::Approx(1.0));
  CHECK(out.at(1) == doctest::Approx(-2.0));
  CHECK(out.at(2) == doctest::Approx(3.0));

  Var h0 = tape.leaf(Tensor<double>({1, 3}));
  Tensor<double> out0 = tape.value(gru_cell_step(tape, x, h0, cell));
  for (std::size_t i = 0; i < 3; ++i) CHECK(out0.at(i) == 0.0);
}

TEST_CASE("gru cell gradients for all nine parameter blocks") {
  std::mt19937_64 rng(21);
  const std::size_t F = 2, H = 3;
  std::vector<Tensor<double>> leaves = {
      random_tensor({1, F}, rng), random_tensor({1, H}, rng),
      random_tensor({F, H}, rng), random_tensor({F, H}, rng), random_tensor({F, H}, rng),
      random_tensor({H, H}, rng), random_tensor({H, H}, rng), random_tensor({H, H}, rng),
      random_tensor({H}, rng),    random_tensor({H}, rng),    random_tensor({H}, rng)};
  auto res = gradcheck(leaves, [](Tape<double>& t, const std::vector<Var>& v) {
    GruCellVars<double> cell{v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10]};
    return t.sum_all(gru_cell_step(t, v[0], v[1], cell));
  });
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("single-step layer makes direction irrelevant") {
  std::mt19937_64 src(22);
  Tape<double> tape;
  GruCellVars<double> cell = zero_cell(tape, 2, 3);
  // randomize the cell in place via fresh leaves
  cell = {tape.leaf(random_tensor({2, 3}, src)), tape.leaf(random_tensor({2, 3}, src)),
          tape.leaf(random_tensor({2, 3}, src)), tape.leaf(random_tensor({3, 3}, src)),
          tape.leaf(random_tensor({3, 3}, src)), tape.leaf(random_tensor({3, 3}, src)),
          tape.leaf(random_tensor({3}, src)),    tape.leaf(random_tensor({3}, src)),
          tape.leaf(random_tensor({3}, src))};
  std::vector<Var> steps = {tape.leaf(random_tensor({2, 2}, src))};
  auto f = gru_layer_forward(tape, steps, cell, Direction::fwd);
  auto b = gru_layer_forward(tape, steps, cell, Direction::bwd);
  CHECK(tape.value(f[0]).data() == tape.value(b[0]).data());
}

TEST_CASE("backward layer equals forward layer on the reversed sequence") {
  std::mt19937_64 src(23);
  Tape<double> tape;
  GruCellVars<double> cell = {
      tape.leaf(random_tensor({2, 3}, src)), tape.leaf(random_tensor({2, 3}, src)),
      tape.leaf(random_tensor({2, 3}, src)), tape.leaf(random_tensor({3, 3}, src)),
      tape.leaf(random_tensor({3, 3}, src)), tape.leaf(random_tensor({3, 3}, src)),
      tape.leaf(random_tensor({3}, src)),    tape.leaf(random_tensor({3}, src)),
      tape.leaf(random_tensor({3}, src))};
  std::vector<Var> steps;
  for (int t = 0; t < 4; ++t) steps.push_back(tape.leaf(random_tensor({2, 2}, src)));
  std::vector<Var> reversed(steps.rbegin(), steps.rend());

  auto bwd = gru_layer_forward(tape, steps, cell, Direction::bwd);
  auto fwd_rev = gru_layer_forward(tape, reversed, cell, Direction::fwd);
  for (int t = 0; t < 4; ++t)
    CHECK(tape.value(bwd[t]).data() == tape.value(fwd_rev[3 - t]).data());
}

TEST_CASE("zero-parameter layer outputs zeros") {
  Tape<double> tape;
  GruCellVars<double> cell = zero_cell(tape, 2, 3);
  std::mt19937_64 src(24);
  std::vector<Var> steps;
  for (int t = 0; t < 3; ++t) steps.push_back(tape.leaf(random_tensor({2, 2}, src)));
  for (Var h : gru_layer_forward(tape, steps, cell, Direction::fwd))
    for (double v : tape.value(h).data()) CHECK(v == 0.0);
}

TEST_CASE("bidirectional layer output shapes match the architecture") {
  ArchConfig arch;  // 13 -> 128/64/32 with dense 64/32/2
  ModelParams<float> params = build_model<float>(arch, 5);
  Tape<float> tape;
  BoundModel<float> bound = bind_params(tape, params);
  std::mt19937_64 src(25);
  Tensor<float> batch = random_tensor({64, 64, 13}, src).cast<float>();
  std::vector<Var> steps = input_steps(tape, batch);
  Rng drop(0);

  BiGruResult first = bigru_layer(tape, steps, gru_cell_vars(bound, "gru1.fwd"),
                                  gru_cell_vars(bound, "gru1.bwd"), OutputMode::sequence,
                                  0.0, false, drop);
  REQUIRE(first.sequence.size() == 64);
  CHECK(tape.value(first.sequence[0]).shape() == std::vector<std::size_t>{64, 256});

  BiGruResult second = bigru_layer(tape, first.sequence, gru_cell_vars(bound, "gru2.fwd"),
                                   gru_cell_vars(bound, "gru2.bwd"), OutputMode::sequence,
                                   0.0, false, drop);
  CHECK(tape.value(second.sequence[0]).shape() == std::vector<std::size_t>{64, 128});

  BiGruResult last = bigru_layer(tape, second.sequence, gru_cell_vars(bound, "gru3.fwd"),
                                 gru_cell_vars(bound, "gru3.bwd"), OutputMode::last_concat,
                                 0.0, false, drop);
  CHECK(tape.value(last.last).shape() == std::vector<std::size_t>{64, 64});
}

TEST_CASE("palindrome input with shared directions ties the sequence ends") {
  std::mt19937_64 src(26);
  Tape<double> tape;
  GruCellVars<double> cell = {
      tape.leaf(random_tensor({2, 2}, src)), tape.leaf(random_tensor({2, 2}, src)),
      tape.leaf(random_tensor({2, 2}, src)), tape.leaf(random_tensor({2, 2}, src)),
      tape.leaf(random_tensor({2, 2}, src)), tape.leaf(random_tensor({2, 2}, src)),
      tape.leaf(random_tensor({2}, src)),    tape.leaf(random_tensor({2}, src)),
      tape.leaf(random_tensor({2}, src))};
  Var s0 = tape.leaf(random_tensor({1, 2}, src));
  Var s1 = tape.leaf(random_tensor({1, 2}, src));
  std::vector<Var> steps = {s0, s1, s0};  // time-symmetric
  auto fwd = gru_layer_forward(tape, steps, cell, Direction::fwd);
  auto bwd = gru_layer_forward(tape, steps, cell, Direction::bwd);
  // forward state after the last step equals backward state after reaching t=0
  CHECK(tape.value(fwd.back()).data() == tape.value(bwd.front()).data());
}

TEST_CASE("dense layer basics") {
  Tape<double> tape;
  Var x = tape.leaf(Tensor<double>({2, 3}, {1, -2, 3, 4, 5, -6}));
  Var w = tape.leaf(Tensor<double>::identity(3));
  Var b = tape.leaf(Tensor<double>({3}));
  Var ident = dense_forward(tape, x, w, b, Activation::none);
  CHECK(tape.value(ident).data() == tape.value(x).data());

  Var neg_b = tape.leaf(Tensor<double>({3}, {-100, -100, -100}));
  Tensor<double> r = tape.value(dense_forward(tape, x, w, neg_b, Activation::relu));
  for (double v : r.data()) CHECK(v == 0.0);

  Var w2 = tape.leaf(Tensor<double>({3, 2}, {1, 0, 0, 1, 1, 1}));
  Var b2 = tape.leaf(Tensor<double>({2}));
  Tensor<double> p = tape.value(dense_forward(tape, x, w2, b2, Activation::softmax));
  for (std::size_t row = 0; row < 2; ++row)
    CHECK(p(row, 0) + p(row, 1) == doctest::Approx(1.0));
}

TEST_CASE("default architecture has 269538 trainable parameters") {
  ArchConfig arch;
  CHECK(param_count(arch) == 269538);
  ModelParams<float> params = build_model<float>(arch, 1);
  CHECK(params.scalar_count() == 269538);
}

TEST_CASE("parameter layout and count agree for other widths") {
  ArchConfig arch;
  arch.input_channels = 3;
  arch.gru_hidden = {4, 3, 2};
  arch.dense_hidden = {4, 3};
  arch.head_input_width = 4;
  std::size_t by_layout = 0;
  for (const auto& spec : param_layout(arch)) {
    std::size_t n = 1;
    for (std::size_t d : spec.shape) n *= d;
    by_layout += n;
  }
  CHECK(by_layout == param_count(arch));
}

TEST_CASE("build_model deterministic per seed") {
  ArchConfig arch;
  arch.gru_hidden = {4};
  arch.dense_hidden = {3};
  arch.head_input_width = 8;
  ModelParams<float> a = build_model<float>(arch, 42);
  ModelParams<float> b = build_model<float>(arch, 42);
  ModelParams<float> c = build_model<float>(arch, 43);
  REQUIRE(a.tensors.size() == b.tensors.size());
  for (std::size_t i = 0; i < a.tensors.size(); ++i) {
    CHECK(a.tensors[i].first == b.tensors[i].first);
    CHECK(a.tensors[i].second.data() == b.tensors[i].second.data());
  }
  CHECK(a.tensors[0].second.data() != c.tensors[0].second.data());
}

TEST_CASE("architecture validation rejects a mismatched dense head") {
  ArchConfig arch;
  arch.head_input_width = 128;  // final Bi-GRU concat width is 64
  CHECK_THROWS_WITH_AS(build_model<float>(arch, 1), doctest::Contains("BadArch"), Error);
  arch = ArchConfig{};
  arch.gru_hidden = {};
  CHECK_THROWS_AS(validate_arch(arch), Error);
}

TEST_CASE("recurrent matrices are orthogonal") {
  ArchConfig arch;
  arch.input_channels = 5;
  arch.gru_hidden = {16, 8};
  arch.dense_hidden = {4};
  arch.head_input_width = 16;
  ModelParams<double> params = build_model<double>(arch, 9);
  for (const auto& [name, t] : params.tensors) {
    if (name.find(".U_") == std::string::npos) continue;
    Tensor<double> gram = eegdl::matmul_tn(t, t);
    for (std::size_t r = 0; r < gram.dim(0); ++r)
      for (std::size_t c = 0; c < gram.dim(1); ++c)
        CHECK(std::abs(gram(r, c) - (r == c ? 1.0 : 0.0)) < 1e-5);
  }
}

TEST_CASE("model forward shapes, probability rows, and row independence") {
  ArchConfig arch;
  arch.input_channels = 3;
  arch.gru_hidden = {4, 3, 2};
  arch.dense_hidden = {4, 3};
  arch.head_input_width = 4;
  ModelParams<float> params = build_model<float>(arch, 7);
  std::mt19937_64 src(27);
  Tensor<float> batch = random_tensor({3, 5, 3}, src).cast<float>();
  // duplicate row 0 into row 2
  for (std::size_t j = 0; j < 15; ++j) batch.data()[2 * 15 + j] = batch.data()[j];

  Tape<float> tape;
  BoundModel<float> bound = bind_params(tape, params);
  Tensor<float> p = tape.value(model_forward(tape, bound, batch, false, 0));
  CHECK(p.shape() == std::vector<std::size_t>{3, 2});
  for (std::size_t r = 0; r < 3; ++r)
    CHECK(p(r, 0) + p(r, 1) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(p(2, 0) == p(0, 0));
  CHECK(p(2, 1) == p(0, 1));

  // permuting batch rows permutes outputs identically
  Tensor<float> swapped = batch;
  for (std::size_t j = 0; j < 15; ++j) {
    std::swap(swapped.data()[j], swapped.data()[15 + j]);
  }
  Tape<float> tape2;
  BoundModel<float> bound2 = bind_params(tape2, params);
  Tensor<float> q = tape2.value(model_forward(tape2, bound2, swapped, false, 0));
  CHECK(q(0, 0) == p(1, 0));
  CHECK(q(1, 0) == p(0, 0));

  // minimal batch
  Tensor<float> one({1, 5, 3});
  for (std::size_t j = 0; j < 15; ++j) one.at(j) = batch.at(j);
  Tape<float> tape3;
  BoundModel<float> bound3 = bind_params(tape3, params);
  Tensor<float> r1 = tape3.value(model_forward(tape3, bound3, one, false, 0));
  CHECK(r1.shape() == std::vector<std::size_t>{1, 2});
  CHECK(r1(0, 0) + r1(0, 1) == doctest::Approx(1.0));
}

TEST_CASE("zero-parameter model answers 0.5/0.5 for any input") {
  ArchConfig arch;
  arch.input_channels = 3;
  arch.gru_hidden = {4, 2};
  arch.dense_hidden = {3};
  arch.head_input_width = 4;
  ModelParams<float> params = zeroed(build_model<float>(arch, 3));
  std::mt19937_64 src(28);
  Tensor<float> batch = random_tensor({2, 4, 3}, src).cast<float>();
  Tape<float> tape;
  BoundModel<float> bound = bind_params(tape, params);
  Tensor<float> p = tape.value(model_forward(tape, bound, batch, false, 0));
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(p.at(i) == doctest::Approx(0.5));
}

TEST_CASE("model rejects mismatched input feature width") {
  ArchConfig arch;
  arch.input_channels = 3;
  arch.gru_hidden = {4};
  arch.dense_hidden = {3};
  arch.head_input_width = 8;
  ModelParams<float> params = build_model<float>(arch, 3);
  Tape<float> tape;
  BoundModel<float> bound = bind_params(tape, params);
  Tensor<float> bad({1, 4, 5});
  CHECK_THROWS_WITH_AS(model_forward(tape, bound, bad, false, 0),
                       doctest::Contains("ShapeMismatch"), Error);
}
