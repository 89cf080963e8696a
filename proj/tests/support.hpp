// Shared test utilities: finite-difference gradient oracle, random tensors,
// temp directories.
#pragma once

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <vector>

#include "eegdl/tape.hpp"
#include "eegdl/tensor.hpp"

namespace test_support {

using eegdl::Tape;
using eegdl::Tensor;
using eegdl::Var;

inline Tensor<double> random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng,
                                    double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data()) v = u(rng);
  return t;
}

// Builds the loss from leaves registered on a fresh tape; used both for the
// analytic gradients and for every finite-difference evaluation, so the
// oracle stays independent of the backward implementation.
using LossBuilder =
    std::function<Var(Tape<double>&, const std::vector<Var>&)>;

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t n_checked = 0;
};

inline double rel_err(double a, double b) {
  double denom = std::max(std::abs(a) + std::abs(b), 1e-6);
  return std::abs(a - b) / denom;
}

/// Central finite differences (f64) against tape backward for every scalar
/// of every leaf.
inline GradCheckResult gradcheck(std::vector<Tensor<double>> leaves,
                                 const LossBuilder& build, double eps = 1e-5) {
  auto eval = [&](const std::vector<Tensor<double>>& values) {
    Tape<double> tape;
    std::vector<Var> vars;
    for (const auto& t : values) vars.push_back(tape.leaf(t, true));
    Var loss = build(tape, vars);
    return tape.value(loss).at(0);
  };

  Tape<double> tape;
  std::vector<Var> vars;
  for (const auto& t : leaves) vars.push_back(tape.leaf(t, true));
  Var loss = build(tape, vars);
  std::vector<Tensor<double>> grads = tape.backward(loss);

  GradCheckResult result;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    for (std::size_t i = 0; i < leaves[li].size(); ++i) {
      std::vector<Tensor<double>> plus = leaves, minus = leaves;
      plus[li].at(i) += eps;
      minus[li].at(i) -= eps;
      double fd = (eval(plus) - eval(minus)) / (2 * eps);
      double an = grads[vars[li]].at(i);
      result.max_rel_err = std::max(result.max_rel_err, rel_err(an, fd));
      ++result.n_checked;
    }
  }
  return result;
}

/// Fresh unique temp directory, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    dir_ = std::filesystem::temp_directory_path() /
           ("eegdl_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  const std::filesystem::path& path() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

}  // namespace test_support
