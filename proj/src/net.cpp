// SPDX-License-Identifier: Apache-2.0
#include "relrule/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

#include "relrule/errors.hpp"
#include "relrule/simd/kernels.hpp"

namespace relrule {

namespace {
constexpr double kCountCap = 32.0;
constexpr double kScoreCap = 10.0;
constexpr char kMagic[8] = {'R', 'L', 'R', 'N', 'E', 'T', '0', '1'};
constexpr std::uint32_t kFormatVersion = 1;
}  // namespace

// Flat parameter layout. The small dense block comes first so the sparse
// tensors (input weights, policy rows) can be updated row by row.
struct PolicyValueNet::Layout {
  std::size_t b1, w2, b2, wv, bv, dense_end;
  std::size_t w1, wp, bp, total;
};

struct PolicyValueNet::Activations {
  std::vector<std::pair<int, double>> inputs;
  std::vector<double> h1;
  std::vector<double> h2;
  std::vector<int> action_rows;
  std::vector<double> priors;
  double value = 0.0;
};

std::size_t NetArch::parameter_count() const noexcept {
  const auto h1 = static_cast<std::size_t>(hidden1), h2 = static_cast<std::size_t>(hidden2);
  return h1 + h2 * h1 + h2 + h2 + 1 + input_size() * h1 + action_count() * h2 + action_count();
}

PolicyValueNet::Layout PolicyValueNet::layout() const noexcept {
  const auto h1 = static_cast<std::size_t>(arch_.hidden1), h2 = static_cast<std::size_t>(arch_.hidden2);
  Layout l{};
  l.b1 = 0;
  l.w2 = l.b1 + h1;
  l.b2 = l.w2 + h2 * h1;
  l.wv = l.b2 + h2;
  l.bv = l.wv + h2;
  l.dense_end = l.bv + 1;
  l.w1 = l.dense_end;
  l.wp = l.w1 + arch_.input_size() * h1;
  l.bp = l.wp + arch_.action_count() * h2;
  l.total = l.bp + arch_.action_count();
  return l;
}

PolicyValueNet::PolicyValueNet(NetArch arch) : arch_(arch) {
  if (arch_.dim <= 0 || arch_.channels <= 0 || arch_.hidden1 <= 0 || arch_.hidden2 <= 0)
    throw ShapeError("network dimensions must be positive");
  params_.assign(arch_.parameter_count(), 0.0);
}

PolicyValueNet::PolicyValueNet(NetArch arch, Rng& rng) : PolicyValueNet(arch) {
  const Layout l = layout();
  // Inputs are sparse: roughly a handful of active pairs per state.
  std::normal_distribution<double> w1(0.0, std::sqrt(2.0 / (8.0 * arch_.channels)));
  std::normal_distribution<double> w2(0.0, std::sqrt(2.0 / arch_.hidden1));
  std::normal_distribution<double> head(0.0, 0.01);
  for (std::size_t i = l.w1; i < l.wp; ++i) params_[i] = w1(rng);
  for (std::size_t i = l.w2; i < l.b2; ++i) params_[i] = w2(rng);
  for (std::size_t i = l.wp; i < l.bp; ++i) params_[i] = head(rng);
  for (std::size_t i = l.wv; i < l.bv; ++i) params_[i] = head(rng);
}

void PolicyValueNet::check_shape(const StateTensor& state) const {
  if (state.dim() != arch_.dim || state.channels() != arch_.channels)
    throw ShapeError("state tensor is " + std::to_string(state.dim()) + "x" + std::to_string(state.dim()) + "x" +
                     std::to_string(state.channels()) + ", network expects " + std::to_string(arch_.dim) + "x" +
                     std::to_string(arch_.dim) + "x" + std::to_string(arch_.channels));
}

void PolicyValueNet::encode(const StateTensor& state, std::vector<std::pair<int, double>>& inputs) const {
  inputs.clear();
  const int k = state.channels();
  for (std::size_t i = 0; i < state.pairs().size(); ++i) {
    const auto cell = state.cell(i);
    for (int c = 0; c < k; ++c) {
      double x = cell[static_cast<std::size_t>(c)];
      if (x == 0.0) continue;
      switch (c) {
        case kOccurrences:
        case kTopPosition:
        case kTopPositionCount:
        case kMaxPerPath:
        case kMinPerPath:
          x /= kCountCap;
          break;
        case kScore:
          x /= kScoreCap;
          break;
        default:
          break;
      }
      inputs.emplace_back(state.pairs()[i] * k + c, x);
    }
  }
}

void PolicyValueNet::run(const StateTensor& state, std::span<const Body> actions, Activations& act) const {
  check_shape(state);
  const Layout l = layout();
  const auto h1n = static_cast<std::size_t>(arch_.hidden1), h2n = static_cast<std::size_t>(arch_.hidden2);
  const auto& kern = simd::active();
  const double* p = params_.data();

  encode(state, act.inputs);
  act.h1.assign(p + l.b1, p + l.b1 + h1n);
  for (const auto& [j, x] : act.inputs) kern.axpy(x, p + l.w1 + static_cast<std::size_t>(j) * h1n, act.h1.data(), h1n);
  kern.relu(act.h1.data(), h1n);

  act.h2.resize(h2n);
  for (std::size_t i = 0; i < h2n; ++i) act.h2[i] = p[l.b2 + i] + kern.dot(p + l.w2 + i * h1n, act.h1.data(), h1n);
  kern.relu(act.h2.data(), h2n);

  act.action_rows.clear();
  act.priors.resize(actions.size());
  double best = -std::numeric_limits<double>::infinity();
  const int dim = arch_.dim;
  for (std::size_t a = 0; a < actions.size(); ++a) {
    const Body& b = actions[a];
    if (b.first < 0 || b.first >= dim || b.second < 0 || b.second >= dim) throw ShapeError("action outside network");
    const int row = b.first * dim + b.second;
    act.action_rows.push_back(row);
    act.priors[a] = p[l.bp + static_cast<std::size_t>(row)] +
                    kern.dot(p + l.wp + static_cast<std::size_t>(row) * h2n, act.h2.data(), h2n);
    best = std::max(best, act.priors[a]);
  }
  double total = 0.0;
  for (double& z : act.priors) {
    z = std::exp(z - best);
    total += z;
  }
  for (double& z : act.priors) z /= total;

  act.value = std::tanh(p[l.bv] + kern.dot(p + l.wv, act.h2.data(), h2n));
}

Evaluation PolicyValueNet::evaluate(const StateTensor& state, std::span<const Body> actions) const {
  Activations act;
  run(state, actions, act);
  return {std::move(act.priors), act.value};
}

NetOutput PolicyValueNet::forward(const StateTensor& state, std::span<const Body> mask) const {
  Activations act;
  run(state, mask, act);
  NetOutput out;
  out.policy.assign(arch_.action_count(), 0.0);
  for (std::size_t a = 0; a < mask.size(); ++a) out.policy[static_cast<std::size_t>(act.action_rows[a])] += act.priors[a];
  out.value = act.value;
  return out;
}

double PolicyValueNet::l2_squared() const { return simd::sum_squares(params_); }

double loss(const NetOutput& out, std::span<const double> pi, double z, const PolicyValueNet& net, double l2) {
  if (pi.size() != out.policy.size()) throw ShapeError("search distribution size does not match the policy");
  double cross = 0.0;
  for (std::size_t i = 0; i < pi.size(); ++i) {
    if (pi[i] == 0.0) continue;
    if (out.policy[i] <= 0.0) throw ContractViolation("search distribution has mass outside the action mask");
    cross -= pi[i] * std::log(out.policy[i]);
  }
  const double err = z - out.value;
  return err * err + cross + (l2 != 0.0 ? l2 * net.l2_squared() : 0.0);
}

// Adds weight * d(loss)/d(theta) for one example to `grad`; returns the
// example's data loss (without the L2 term).
double PolicyValueNet::accumulate(const TrainingExample& ex, double weight, Gradient& grad) const {
  if (ex.actions.size() != ex.pi.size()) throw ShapeError("example actions and distribution differ in length");
  Activations act;
  run(ex.state, ex.actions, act);
  const Layout l = layout();
  const auto h1n = static_cast<std::size_t>(arch_.hidden1), h2n = static_cast<std::size_t>(arch_.hidden2);
  const auto& kern = simd::active();
  const double* p = params_.data();
  double* g = grad.values.data();

  double pi_mass = 0.0, cross = 0.0;
  for (std::size_t a = 0; a < ex.pi.size(); ++a) {
    pi_mass += ex.pi[a];
    if (ex.pi[a] != 0.0) cross -= ex.pi[a] * std::log(act.priors[a]);
  }
  const double err = ex.z - act.value;

  std::vector<double> dh2(h2n, 0.0);
  const double gv = weight * (-2.0 * err) * (1.0 - act.value * act.value);
  kern.axpy(gv, act.h2.data(), g + l.wv, h2n);
  g[l.bv] += gv;
  kern.axpy(gv, p + l.wv, dh2.data(), h2n);

  for (std::size_t a = 0; a < ex.actions.size(); ++a) {
    const double ga = weight * (act.priors[a] * pi_mass - ex.pi[a]);
    const auto row = static_cast<std::size_t>(act.action_rows[a]);
    kern.axpy(ga, act.h2.data(), g + l.wp + row * h2n, h2n);
    g[l.bp + row] += ga;
    kern.axpy(ga, p + l.wp + row * h2n, dh2.data(), h2n);
    grad.touched_actions.push_back(act.action_rows[a]);
  }

  std::vector<double> dh1(h1n, 0.0);
  for (std::size_t i = 0; i < h2n; ++i) {
    if (act.h2[i] <= 0.0 || dh2[i] == 0.0) continue;
    kern.axpy(dh2[i], act.h1.data(), g + l.w2 + i * h1n, h1n);
    g[l.b2 + i] += dh2[i];
    kern.axpy(dh2[i], p + l.w2 + i * h1n, dh1.data(), h1n);
  }
  for (std::size_t i = 0; i < h1n; ++i)
    if (act.h1[i] <= 0.0) dh1[i] = 0.0;
  kern.axpy(1.0, dh1.data(), g + l.b1, h1n);
  for (const auto& [j, x] : act.inputs) {
    kern.axpy(x, dh1.data(), g + l.w1 + static_cast<std::size_t>(j) * h1n, h1n);
    grad.touched_inputs.push_back(j);
  }
  return err * err + cross;
}

double PolicyValueNet::batch_loss(std::span<const TrainingExample> batch, double l2) const {
  if (batch.empty()) throw ContractViolation("empty batch");
  double total = 0.0;
  for (const auto& ex : batch) {
    Activations act;
    run(ex.state, ex.actions, act);
    double cross = 0.0;
    for (std::size_t a = 0; a < ex.pi.size(); ++a)
      if (ex.pi[a] != 0.0) cross -= ex.pi[a] * std::log(act.priors[a]);
    const double err = ex.z - act.value;
    total += err * err + cross;
  }
  return total / static_cast<double>(batch.size()) + (l2 != 0.0 ? l2 * l2_squared() : 0.0);
}

std::vector<double> PolicyValueNet::gradient(std::span<const TrainingExample> batch, double l2) const {
  if (batch.empty()) throw ContractViolation("empty batch");
  Gradient grad;
  grad.values.assign(params_.size(), 0.0);
  const double w = 1.0 / static_cast<double>(batch.size());
  for (const auto& ex : batch) accumulate(ex, w, grad);
  if (l2 != 0.0) simd::axpy(2.0 * l2, params_, grad.values);
  return std::move(grad.values);
}

namespace {

void dedupe(std::vector<int>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

double PolicyValueNet::train_step(std::span<const TrainingExample> batch, double lr, double l2, double clip_norm) {
  if (batch.empty()) throw ContractViolation("empty batch");
  const Layout l = layout();
  const auto h1n = static_cast<std::size_t>(arch_.hidden1), h2n = static_cast<std::size_t>(arch_.hidden2);
  const auto& kern = simd::active();

  Gradient& grad = scratch_;
  if (grad.values.size() != params_.size()) grad.values.assign(params_.size(), 0.0);
  grad.touched_inputs.clear();
  grad.touched_actions.clear();

  const double w = 1.0 / static_cast<double>(batch.size());
  double data_loss = 0.0;
  for (const auto& ex : batch) data_loss += w * accumulate(ex, w, grad);
  dedupe(grad.touched_inputs);
  dedupe(grad.touched_actions);

  const double theta_sq = l2 != 0.0 ? l2_squared() : 0.0;
  const double total_loss = data_loss + l2 * theta_sq;

  // |g_data + 2 a theta|^2 over the touched support plus the dense block.
  double gg = 0.0, gt = 0.0;
  auto visit = [&](std::size_t off, std::size_t n) {
    gg += kern.sum_squares(grad.values.data() + off, n);
    gt += kern.dot(grad.values.data() + off, params_.data() + off, n);
  };
  visit(0, l.dense_end);
  for (int j : grad.touched_inputs) visit(l.w1 + static_cast<std::size_t>(j) * h1n, h1n);
  for (int a : grad.touched_actions) {
    visit(l.wp + static_cast<std::size_t>(a) * h2n, h2n);
    visit(l.bp + static_cast<std::size_t>(a), 1);
  }
  const double norm_sq = gg + 4.0 * l2 * gt + 4.0 * l2 * l2 * theta_sq;
  if (!std::isfinite(total_loss) || !std::isfinite(norm_sq))
    throw NumericError("non-finite training step: loss=" + std::to_string(total_loss) +
                       " grad_norm^2=" + std::to_string(norm_sq) + " batch=" + std::to_string(batch.size()));

  const double norm = std::sqrt(norm_sq);
  const double clip = (clip_norm > 0.0 && norm > clip_norm) ? clip_norm / norm : 1.0;
  const double step = lr * clip;
  if (step != 0.0) {
    if (l2 != 0.0) simd::scale(1.0 - 2.0 * step * l2, params_);
    auto apply = [&](std::size_t off, std::size_t n) {
      kern.axpy(-step, grad.values.data() + off, params_.data() + off, n);
    };
    apply(0, l.dense_end);
    for (int j : grad.touched_inputs) apply(l.w1 + static_cast<std::size_t>(j) * h1n, h1n);
    for (int a : grad.touched_actions) {
      apply(l.wp + static_cast<std::size_t>(a) * h2n, h2n);
      apply(l.bp + static_cast<std::size_t>(a), 1);
    }
  }

  // Leave the scratch gradient zeroed for the next step.
  std::fill(grad.values.begin(), grad.values.begin() + static_cast<std::ptrdiff_t>(l.dense_end), 0.0);
  for (int j : grad.touched_inputs)
    std::fill_n(grad.values.begin() + static_cast<std::ptrdiff_t>(l.w1 + static_cast<std::size_t>(j) * h1n), h1n, 0.0);
  for (int a : grad.touched_actions) {
    std::fill_n(grad.values.begin() + static_cast<std::ptrdiff_t>(l.wp + static_cast<std::size_t>(a) * h2n), h2n, 0.0);
    grad.values[l.bp + static_cast<std::size_t>(a)] = 0.0;
  }
  return total_loss;
}

void PolicyValueNet::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  const std::uint32_t header[5] = {kFormatVersion, static_cast<std::uint32_t>(arch_.dim),
                                   static_cast<std::uint32_t>(arch_.channels), static_cast<std::uint32_t>(arch_.hidden1),
                                   static_cast<std::uint32_t>(arch_.hidden2)};
  out.write(reinterpret_cast<const char*>(header), sizeof header);
  const std::uint64_t count = params_.size();
  out.write(reinterpret_cast<const char*>(&count), sizeof count);
  out.write(reinterpret_cast<const char*>(params_.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (!out) throw ConfigError("failed writing " + path.string());
}

PolicyValueNet PolicyValueNet::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  char magic[sizeof kMagic];
  std::uint32_t header[5];
  std::uint64_t count = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(header), sizeof header);
  in.read(reinterpret_cast<char*>(&count), sizeof count);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw ParseError(1, "not a network checkpoint");
  if (header[0] != kFormatVersion) throw ParseError(1, "unsupported checkpoint format_version");
  NetArch arch{static_cast<int>(header[1]), static_cast<int>(header[2]), static_cast<int>(header[3]),
               static_cast<int>(header[4])};
  PolicyValueNet net(arch);
  if (count != net.params_.size()) throw ShapeError("checkpoint parameter count does not match its architecture");
  in.read(reinterpret_cast<char*>(net.params_.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw ParseError(1, "truncated checkpoint");
  return net;
}

}  // namespace relrule
