#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "eegdl/error.hpp"
#include "eegdl/rng.hpp"
#include "eegdl/tape.hpp"
#include "eegdl/tensor.hpp"

namespace eegdl::nn {

/// Layer widths of the classifier. The default is three bidirectional GRU
/// layers (128/64/32 units per direction) feeding dense layers 64/32/2.
struct ArchConfig {
  std::size_t input_channels = 13;
  std::size_t window_len = 64;
  std::vector<std::size_t> gru_hidden = {128, 64, 32};
  std::vector<std::size_t> dense_hidden = {64, 32};
  std::size_t n_classes = 2;
  std::size_t head_input_width = 64;  // must equal 2 * gru_hidden.back()
  double dropout_rate = 0.5;
};

inline void validate_arch(const ArchConfig& arch) {
  if (arch.input_channels == 0 || arch.window_len == 0 || arch.n_classes < 2 ||
      arch.gru_hidden.empty())
    throw config_error("BadArch", "widths must be positive and at least one GRU layer");
  for (std::size_t h : arch.gru_hidden)
    if (h == 0) throw config_error("BadArch", "zero-width GRU layer");
  for (std::size_t h : arch.dense_hidden)
    if (h == 0) throw config_error("BadArch", "zero-width dense layer");
  if (arch.head_input_width != 2 * arch.gru_hidden.back())
    throw config_error("BadArch",
                       "first dense input width " + std::to_string(arch.head_input_width) +
                           " must equal final Bi-GRU concat width " +
                           std::to_string(2 * arch.gru_hidden.back()));
  if (arch.dropout_rate < 0 || arch.dropout_rate >= 1)
    throw config_error("BadArch", "dropout rate must be in [0,1)");
}

/// Total trainable parameters: 2*3*(F*H + H^2 + H) per Bi-GRU layer plus
/// F_in*F_out + F_out per dense layer (single bias per gate).
inline std::size_t param_count(const ArchConfig& arch) {
  std::size_t total = 0;
  std::size_t fin = arch.input_channels;
  for (std::size_t h : arch.gru_hidden) {
    total += 2 * 3 * (fin * h + h * h + h);
    fin = 2 * h;
  }
  std::vector<std::size_t> dense = arch.dense_hidden;
  dense.push_back(arch.n_classes);
  fin = arch.head_input_width;
  for (std::size_t out : dense) {
    total += fin * out + out;
    fin = out;
  }
  return total;
}

template <typename T>
struct ModelParams {
  ArchConfig arch;
  std::vector<std::pair<std::string, Tensor<T>>> tensors;  // fixed order

  Tensor<T>& find(const std::string& name) {
    for (auto& [n, t] : tensors)
      if (n == name) return t;
    throw runtime_error("UnknownParam", "no parameter named " + name);
  }
  const Tensor<T>& find(const std::string& name) const {
    return const_cast<ModelParams*>(this)->find(name);
  }
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : tensors) n += t.size();
    return n;
  }
};

namespace detail {

template <typename T>
Tensor<T> glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  Tensor<T> t({fan_in, fan_out});
  for (auto& v : t.data()) v = static_cast<T>(u(rng));
  return t;
}

template <typename T>
Tensor<T> orthogonal(std::size_t n, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(n, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) m(r, c) = g(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  Eigen::MatrixXd q = qr.householderQ();
  Eigen::MatrixXd rmat = qr.matrixQR().triangularView<Eigen::Upper>();
  for (std::size_t c = 0; c < n; ++c)
    if (rmat(c, c) < 0) q.col(c) = -q.col(c);  // fix sign for determinism
  Tensor<T> t({n, n});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) t(r, c) = static_cast<T>(q(r, c));
  return t;
}

}  // namespace detail

enum class ParamKind { input_matrix, recurrent_matrix, bias };

struct ParamSpec {
  std::string name;
  std::vector<std::size_t> shape;
  ParamKind kind;
};

/// Canonical parameter order: GRU layers (fwd then bwd, gates z/r/h), then
/// the dense head. Checkpoint validation and initialization both follow it.
inline std::vector<ParamSpec> param_layout(const ArchConfig& arch) {
  std::vector<ParamSpec> layout;
  std::size_t fin = arch.input_channels;
  for (std::size_t layer = 0; layer < arch.gru_hidden.size(); ++layer) {
    std::size_t h = arch.gru_hidden[layer];
    for (const char* dir : {"fwd", "bwd"}) {
      std::string prefix = "gru" + std::to_string(layer + 1) + "." + dir + ".";
      for (const char* gate : {"z", "r", "h"}) {
        layout.push_back({prefix + "W_" + gate, {fin, h}, ParamKind::input_matrix});
        layout.push_back({prefix + "U_" + gate, {h, h}, ParamKind::recurrent_matrix});
        layout.push_back({prefix + "b_" + gate, {h}, ParamKind::bias});
      }
    }
    fin = 2 * h;
  }
  std::vector<std::size_t> dense = arch.dense_hidden;
  dense.push_back(arch.n_classes);
  fin = arch.head_input_width;
  for (std::size_t i = 0; i < dense.size(); ++i) {
    std::string prefix = "dense" + std::to_string(i + 1) + ".";
    layout.push_back({prefix + "W", {fin, dense[i]}, ParamKind::input_matrix});
    layout.push_back({prefix + "b", {dense[i]}, ParamKind::bias});
    fin = dense[i];
  }
  return layout;
}

/// Glorot-uniform input matrices, orthogonal recurrent matrices, zero biases.
template <typename T>
ModelParams<T> build_model(const ArchConfig& arch, std::uint64_t init_seed) {
  validate_arch(arch);
  ModelParams<T> p;
  p.arch = arch;
  Rng rng(init_seed);
  for (const ParamSpec& spec : param_layout(arch)) {
    switch (spec.kind) {
      case ParamKind::input_matrix:
        p.tensors.emplace_back(spec.name,
                               detail::glorot_uniform<T>(spec.shape[0], spec.shape[1], rng));
        break;
      case ParamKind::recurrent_matrix:
        p.tensors.emplace_back(spec.name, detail::orthogonal<T>(spec.shape[0], rng));
        break;
      case ParamKind::bias:
        p.tensors.emplace_back(spec.name, Tensor<T>(spec.shape));
        break;
    }
  }
  return p;
}

/// Parameters registered as gradient-carrying leaves on one tape.
template <typename T>
struct BoundModel {
  const ModelParams<T>* params = nullptr;
  std::vector<Var> vars;  // aligned with params->tensors
  std::map<std::string, Var> by_name;

  Var at(const std::string& name) const {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw runtime_error("UnknownParam", "no parameter " + name);
    return it->second;
  }
};

template <typename T>
BoundModel<T> bind_params(Tape<T>& tape, const ModelParams<T>& params) {
  BoundModel<T> bound;
  bound.params = &params;
  for (const auto& [name, t] : params.tensors) {
    Var v = tape.leaf(t, /*needs_grad=*/true);
    bound.vars.push_back(v);
    bound.by_name.emplace(name, v);
  }
  return bound;
}

template <typename T>
struct GruCellVars {
  Var W_z, W_r, W_h, U_z, U_r, U_h, b_z, b_r, b_h;
};

template <typename T>
GruCellVars<T> gru_cell_vars(const BoundModel<T>& bound, const std::string& prefix) {
  return {bound.at(prefix + ".W_z"), bound.at(prefix + ".W_r"), bound.at(prefix + ".W_h"),
          bound.at(prefix + ".U_z"), bound.at(prefix + ".U_r"), bound.at(prefix + ".U_h"),
          bound.at(prefix + ".b_z"), bound.at(prefix + ".b_r"), bound.at(prefix + ".b_h")};
}

/// One GRU step:
///   z = sigmoid(x Wz + h Uz + bz)
///   r = sigmoid(x Wr + h Ur + br)
///   hc = tanh(x Wh + (r . h) Uh + bh)
///   h' = (1 - z) . h + z . hc
template <typename T>
Var gru_cell_step(Tape<T>& tape, Var x_t, Var h_prev, const GruCellVars<T>& c) {
  Var z = tape.sigmoid(tape.add_rowvec(
      tape.add(tape.matmul(x_t, c.W_z), tape.matmul(h_prev, c.U_z)), c.b_z));
  Var r = tape.sigmoid(tape.add_rowvec(
      tape.add(tape.matmul(x_t, c.W_r), tape.matmul(h_prev, c.U_r)), c.b_r));
  Var hc = tape.tanh(tape.add_rowvec(
      tape.add(tape.matmul(x_t, c.W_h), tape.matmul(tape.mul(r, h_prev), c.U_h)), c.b_h));
  return tape.add(tape.sub(h_prev, tape.mul(z, h_prev)), tape.mul(z, hc));
}

enum class Direction { fwd, bwd };

/// Run a directional GRU over time steps (each B x F_in). The output list is
/// aligned with the input time axis; for bwd, position t holds the hidden
/// state computed when the reversed scan reached t. h0 = 0.
template <typename T>
std::vector<Var> gru_layer_forward(Tape<T>& tape, const std::vector<Var>& steps,
                                   const GruCellVars<T>& cell, Direction dir) {
  if (steps.empty()) throw runtime_error("ShapeMismatch", "empty sequence");
  std::size_t batch = tape.value(steps[0]).dim(0);
  std::size_t hidden = tape.value(cell.U_z).dim(0);
  Var h = tape.leaf(Tensor<T>({batch, hidden}));
  std::vector<Var> out(steps.size());
  if (dir == Direction::fwd) {
    for (std::size_t t = 0; t < steps.size(); ++t) {
      h = gru_cell_step(tape, steps[t], h, cell);
      out[t] = h;
    }
  } else {
    for (std::size_t i = steps.size(); i-- > 0;) {
      h = gru_cell_step(tape, steps[i], h, cell);
      out[i] = h;
    }
  }
  return out;
}

enum class OutputMode { sequence, last_concat };

struct BiGruResult {
  std::vector<Var> sequence;  // per-step B x 2H (sequence mode)
  Var last = -1;              // B x 2H (last_concat mode)
};

template <typename T>
BiGruResult bigru_layer(Tape<T>& tape, const std::vector<Var>& steps,
                        const GruCellVars<T>& fwd, const GruCellVars<T>& bwd,
                        OutputMode mode, double dropout_rate, bool training, Rng& rng) {
  std::vector<Var> f = gru_layer_forward(tape, steps, fwd, Direction::fwd);
  std::vector<Var> b = gru_layer_forward(tape, steps, bwd, Direction::bwd);
  BiGruResult res;
  if (mode == OutputMode::sequence) {
    res.sequence.resize(steps.size());
    for (std::size_t t = 0; t < steps.size(); ++t)
      res.sequence[t] = tape.dropout(tape.concat(f[t], b[t], 1), dropout_rate, training, rng);
  } else {
    // forward state after the last step, backward state after scanning to t=0
    res.last = tape.dropout(tape.concat(f.back(), b.front(), 1), dropout_rate, training, rng);
  }
  return res;
}

enum class Activation { none, relu, softmax };

template <typename T>
Var dense_forward(Tape<T>& tape, Var x, Var w, Var b, Activation act) {
  Var y = tape.add_rowvec(tape.matmul(x, w), b);
  switch (act) {
    case Activation::relu: return tape.relu(y);
    case Activation::softmax: return tape.softmax(y);
    case Activation::none: return y;
  }
  return y;
}

/// Split a B x T x F batch into per-step input leaves.
template <typename T>
std::vector<Var> input_steps(Tape<T>& tape, const Tensor<T>& batch) {
  if (batch.rank() != 3)
    throw runtime_error("ShapeMismatch", "model input must be B x T x F, got " + batch.shape_str());
  std::size_t bsz = batch.dim(0), steps = batch.dim(1), feats = batch.dim(2);
  std::vector<Var> out(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    Tensor<T> slice({bsz, feats});
    for (std::size_t i = 0; i < bsz; ++i)
      for (std::size_t f = 0; f < feats; ++f)
        slice(i, f) = batch.data()[(i * steps + t) * feats + f];
    out[t] = tape.leaf(std::move(slice));
  }
  return out;
}

/// Pre-softmax class scores for a batch.
template <typename T>
Var model_logits(Tape<T>& tape, const BoundModel<T>& bound, const Tensor<T>& batch,
                 bool training, std::uint64_t dropout_seed) {
  const ArchConfig& arch = bound.params->arch;
  if (batch.rank() != 3 || batch.dim(2) != arch.input_channels)
    throw runtime_error("ShapeMismatch", "expected B x T x " +
                                             std::to_string(arch.input_channels) +
                                             " input, got " + batch.shape_str());
  Rng rng(dropout_seed);
  std::vector<Var> steps = input_steps(tape, batch);

  for (std::size_t layer = 0; layer < arch.gru_hidden.size(); ++layer) {
    std::string name = "gru" + std::to_string(layer + 1);
    bool last = layer + 1 == arch.gru_hidden.size();
    BiGruResult res = bigru_layer(tape, steps, gru_cell_vars(bound, name + ".fwd"),
                                  gru_cell_vars(bound, name + ".bwd"),
                                  last ? OutputMode::last_concat : OutputMode::sequence,
                                  arch.dropout_rate, training, rng);
    if (last) {
      Var x = res.last;
      std::size_t n_dense = arch.dense_hidden.size() + 1;
      for (std::size_t i = 0; i < n_dense; ++i) {
        std::string dn = "dense" + std::to_string(i + 1);
        bool out_layer = i + 1 == n_dense;
        x = dense_forward(tape, x, bound.at(dn + ".W"), bound.at(dn + ".b"),
                          out_layer ? Activation::none : Activation::relu);
        if (!out_layer) x = tape.dropout(x, arch.dropout_rate, training, rng);
      }
      return x;
    }
    steps = std::move(res.sequence);
  }
  throw runtime_error("BadArch", "unreachable: no GRU layers");
}

/// Class probabilities (rows sum to 1).
template <typename T>
Var model_forward(Tape<T>& tape, const BoundModel<T>& bound, const Tensor<T>& batch,
                  bool training, std::uint64_t dropout_seed) {
  return tape.softmax(model_logits(tape, bound, batch, training, dropout_seed));
}

/// One-hot encode labels in [truth, lie] order.
template <typename T>
Tensor<T> one_hot(const std::vector<int>& labels, std::size_t n_classes = 2) {
  Tensor<T> t({labels.size(), n_classes});
  for (std::size_t i = 0; i < labels.size(); ++i) t(i, static_cast<std::size_t>(labels[i])) = T(1);
  return t;
}

}  // namespace eegdl::nn
