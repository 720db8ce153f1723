// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "relrule/env.hpp"
#include "relrule/vocab.hpp"

namespace relrule {

/// flatten -> dense(hidden1) -> ReLU -> dense(hidden2) -> ReLU -> {policy, tanh value}
struct NetArch {
  int dim = 0;  // m + n (+1 with the dummy relation)
  int channels = kBaseChannels;
  int hidden1 = 128;
  int hidden2 = 128;

  std::size_t input_size() const noexcept {
    return static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim) * static_cast<std::size_t>(channels);
  }
  std::size_t action_count() const noexcept { return static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim); }
  std::size_t parameter_count() const noexcept;

  friend bool operator==(const NetArch&, const NetArch&) = default;
};

struct NetOutput {
  /// Probability over all dim^2 actions; zero outside the mask.
  std::vector<double> policy;
  double value = 0.0;
};

/// Priors for an explicit action list (same order) plus the value.
struct Evaluation {
  std::vector<double> priors;
  double value = 0.0;
};

/// One replay tuple: state, the searched actions, their visit distribution,
/// and the episode reward.
struct TrainingExample {
  StateTensor state;
  std::vector<Body> actions;
  std::vector<double> pi;
  double z = 0.0;
};

/// Flat gradient with the same layout as the parameters.
struct Gradient {
  std::vector<double> values;
  std::vector<int> touched_inputs;
  std::vector<int> touched_actions;
};

class PolicyValueNet {
 public:
  PolicyValueNet() = default;
  /// All-zero parameters.
  explicit PolicyValueNet(NetArch arch);
  /// He-style random initialization; small policy and value heads.
  PolicyValueNet(NetArch arch, Rng& rng);

  const NetArch& arch() const noexcept { return arch_; }
  std::span<const double> parameters() const noexcept { return params_; }
  std::span<double> parameters() noexcept { return params_; }

  /// Masked softmax over `actions`; invalid actions never receive mass.
  /// Throws ShapeError when the state does not match the architecture.
  Evaluation evaluate(const StateTensor& state, std::span<const Body> actions) const;
  NetOutput forward(const StateTensor& state, std::span<const Body> mask) const;

  double l2_squared() const;

  /// Mean over `batch` of (z - v)^2 - pi . log(rho), plus l2 * |theta|^2.
  double batch_loss(std::span<const TrainingExample> batch, double l2) const;
  /// Gradient of batch_loss; the result is dense.
  std::vector<double> gradient(std::span<const TrainingExample> batch, double l2) const;

  /// One SGD step on the mean batch loss with gradient-norm clipping.
  /// Returns the loss before the step. Throws NumericError on a non-finite
  /// loss or gradient.
  double train_step(std::span<const TrainingExample> batch, double lr, double l2, double clip_norm = 5.0);

  void save(const std::filesystem::path& path) const;
  static PolicyValueNet load(const std::filesystem::path& path);

  friend bool operator==(const PolicyValueNet& a, const PolicyValueNet& b) {
    return a.arch_ == b.arch_ && a.params_ == b.params_;
  }

 private:
  struct Layout;
  struct Activations;
  Layout layout() const noexcept;
  void check_shape(const StateTensor& state) const;
  void encode(const StateTensor& state, std::vector<std::pair<int, double>>& inputs) const;
  void run(const StateTensor& state, std::span<const Body> actions, Activations& act) const;
  double accumulate(const TrainingExample& ex, double weight, Gradient& grad) const;

  NetArch arch_;
  std::vector<double> params_;
  Gradient scratch_;
};

/// l = (z - v)^2 - pi . log(rho) + l2 * |theta|^2, with log(rho) taken on
/// pi's support only. Throws ContractViolation when pi puts mass outside
/// the policy's support.
double loss(const NetOutput& out, std::span<const double> pi, double z, const PolicyValueNet& net, double l2);

}  // namespace relrule
