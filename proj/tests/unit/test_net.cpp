// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <numeric>

#include "oracles.hpp"
#include "relrule/env.hpp"
#include "relrule/errors.hpp"
#include "relrule/net.hpp"
#include "relrule/simd/kernels.hpp"

using namespace relrule;

namespace {

using Paths = std::vector<std::vector<RelationId>>;

RelationVocab vocab() { return RelationVocab({"a", "b", "c"}, 1, false); }

StateTensor state_of(const Paths& p, const RuleMemory& m) { return featurize(reset(p, std::nullopt, m.vocab()), m); }

TrainingExample example(const Paths& p, const RuleMemory& m, std::vector<double> pi, double z) {
  TrainingExample ex;
  const auto s = reset(p, std::nullopt, m.vocab());
  ex.state = featurize(s, m);
  ex.actions = valid_actions(s);
  ex.pi = std::move(pi);
  ex.z = z;
  return ex;
}

double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(na) + std::sqrt(nb), 1e-12);
}

}  // namespace

TEST_CASE("masked softmax: single action is one-hot") {
  RuleMemory m(vocab(), ScoreParams{});
  Rng rng(4);
  PolicyValueNet net({4, kBaseChannels, 8, 8}, rng);
  const std::vector<Body> one{{0, 1}};
  const auto ev = net.evaluate(state_of({{0, 1}}, m), one);
  CHECK(ev.priors == std::vector<double>{1.0});
  const auto out = net.forward(state_of({{0, 1}}, m), one);
  CHECK(out.policy[1] == 1.0);
  CHECK(std::accumulate(out.policy.begin(), out.policy.end(), 0.0) == 1.0);
}

TEST_CASE("zero weights are symmetric") {
  RuleMemory m(vocab(), ScoreParams{});
  PolicyValueNet net(NetArch{4, kBaseChannels, 8, 8});
  const std::vector<Body> two{{0, 1}, {1, 2}};
  const auto ev = net.evaluate(state_of({{0, 1, 2}}, m), two);
  CHECK(ev.priors == std::vector<double>{0.5, 0.5});
  CHECK(ev.value == 0.0);
}

TEST_CASE("random nets give distributions and bounded values") {
  RuleMemory m(vocab(), ScoreParams{});
  const auto st = state_of({{0, 1, 2, 3}, {2, 1}}, m);
  const auto acts = valid_actions(reset(Paths{{0, 1, 2, 3}, {2, 1}}, std::nullopt, m.vocab()));
  for (unsigned seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    PolicyValueNet net({4, kBaseChannels, 16, 16}, rng);
    const auto out = net.forward(st, acts);
    double sum = 0;
    for (double p : out.policy) {
      CHECK(p >= 0.0);
      sum += p;
    }
    CHECK(std::abs(sum - 1.0) < 1e-6);
    CHECK(std::abs(out.value) <= 1.0);
  }
}

TEST_CASE("shape errors") {
  RuleMemory m(vocab(), ScoreParams{});
  PolicyValueNet net(NetArch{5, kBaseChannels, 4, 4});
  CHECK_THROWS_AS(net.evaluate(state_of({{0, 1}}, m), std::vector<Body>{{0, 1}}), ShapeError);
  PolicyValueNet wide(NetArch{4, kBaseChannels + kExtraChannels, 4, 4});
  CHECK_THROWS_AS(wide.evaluate(state_of({{0, 1}}, m), std::vector<Body>{{0, 1}}), ShapeError);
}

TEST_CASE("loss formula") {
  RuleMemory m(vocab(), ScoreParams{});
  Rng rng(9);
  PolicyValueNet net({4, kBaseChannels, 8, 8}, rng);
  const std::vector<Body> acts{{0, 1}, {1, 2}};
  const auto out = net.forward(state_of({{0, 1, 2}}, m), acts);

  std::vector<double> pi = out.policy;
  double entropy = 0;
  for (double p : pi)
    if (p > 0) entropy -= p * std::log(p);
  CHECK(loss(out, pi, out.value, net, 0.0) == doctest::Approx(entropy).epsilon(1e-12));
  CHECK(loss(out, pi, out.value, net, 0.01) ==
        doctest::Approx(entropy + 0.01 * net.l2_squared()).epsilon(1e-12));

  NetOutput fixed;
  fixed.policy.assign(16, 0.0);
  fixed.policy[1] = 1.0;
  fixed.value = 0.0;
  std::vector<double> one_hot(16, 0.0);
  one_hot[1] = 1.0;
  CHECK(loss(fixed, one_hot, 1.0, net, 0.0) == 1.0);

  std::vector<double> outside(16, 0.0);
  outside[5] = 1.0;
  CHECK_THROWS_AS(loss(fixed, outside, 1.0, net, 0.0), ContractViolation);

  for (unsigned seed = 0; seed < 20; ++seed) {
    Rng r(seed);
    PolicyValueNet n({4, kBaseChannels, 8, 8}, r);
    const auto o = n.forward(state_of({{0, 1, 2}}, m), acts);
    std::uniform_real_distribution<double> u(0, 1);
    const double w = u(r);
    std::vector<double> p(16, 0.0);
    p[1] = w;
    p[6] = 1 - w;
    CHECK(loss(o, p, 1.0, n, 1e-3) >= 0.0);
  }
}

TEST_CASE("analytic gradient matches finite differences") {
  RuleMemory m(vocab(), ScoreParams{});
  m.insert({2, {0, 1}}, 1.5);
  Rng rng(12);
  PolicyValueNet net({4, kBaseChannels, 6, 5}, rng);
  // Spread the input weights so the hidden units sit away from the ReLU kink.
  for (double& p : net.parameters()) p += 0.05 * std::normal_distribution<double>(0, 1)(rng);
  std::vector<TrainingExample> batch{example({{0, 1, 2}}, m, {0.25, 0.75}, 1.0),
                                     example({{0, 1}, {2, 3, 1}}, m, {0.5, 0.0, 0.5}, -1.0)};
  const auto analytic = net.gradient(batch, 1e-3);
  const auto numeric = oracle::numeric_gradient(net, batch, 1e-3);
  CHECK(relative_error(analytic, numeric) < 1e-4);
  std::size_t bad = 0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-6});
    if (std::abs(analytic[i] - numeric[i]) / denom > 1e-4) ++bad;
  }
  CHECK(bad == 0);
}

TEST_CASE("train_step") {
  RuleMemory m(vocab(), ScoreParams{});
  Rng rng(14);
  PolicyValueNet net({4, kBaseChannels, 8, 8}, rng);
  std::vector<TrainingExample> batch{example({{0, 1, 2}}, m, {0.9, 0.1}, 1.0)};

  SUBCASE("lr = 0 leaves parameters unchanged") {
    const auto before = net;
    net.train_step(batch, 0.0, 1e-4);
    CHECK(net == before);
  }
  SUBCASE("sparse step equals a dense SGD step") {
    auto dense = net;
    const auto g = dense.gradient(batch, 1e-4);
    double norm = 0;
    for (double x : g) norm += x * x;
    const double scale = std::sqrt(norm) > 5.0 ? 5.0 / std::sqrt(norm) : 1.0;
    auto p = dense.parameters();
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= 0.05 * scale * g[i];
    net.train_step(batch, 0.05, 1e-4);
    auto q = net.parameters();
    double worst = 0;
    for (std::size_t i = 0; i < p.size(); ++i) worst = std::max(worst, std::abs(p[i] - q[i]));
    CHECK(worst < 1e-12);
  }
  SUBCASE("fixed batch loss does not increase") {
    double prev = net.batch_loss(batch, 1e-4);
    for (int i = 0; i < 50; ++i) {
      net.train_step(batch, 0.01, 1e-4);
      const double now = net.batch_loss(batch, 1e-4);
      CHECK(now <= prev + 1e-12);
      prev = now;
    }
  }
  SUBCASE("non-finite loss is reported") {
    batch[0].z = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(net.train_step(batch, 0.01, 1e-4), NumericError);
  }
  SUBCASE("empty batch is a contract violation") {
    CHECK_THROWS_AS(net.train_step({}, 0.01, 1e-4), ContractViolation);
  }
}

TEST_CASE("checkpoint round trip is bit exact") {
  RuleMemory m(vocab(), ScoreParams{});
  Rng rng(15);
  PolicyValueNet net({4, kBaseChannels, 8, 8}, rng);
  const auto path = std::filesystem::temp_directory_path() / "relrule_net_test.bin";
  net.save(path);
  const auto back = PolicyValueNet::load(path);
  CHECK(back == net);
  const std::vector<Body> acts{{0, 1}, {1, 2}};
  const auto st = state_of({{0, 1, 2}}, m);
  CHECK(back.evaluate(st, acts).priors == net.evaluate(st, acts).priors);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(PolicyValueNet::load(path), ConfigError);
}

TEST_CASE("SIMD kernels agree with the scalar reference") {
  const auto& ref = simd::scalar_kernels();
  const simd::KernelTable* fast = simd::avx2_kernels();
  if (fast == nullptr) {
    MESSAGE("AVX2 kernels unavailable; only the scalar table is exercised");
    fast = &ref;
  }
  Rng rng(16);
  std::normal_distribution<double> d(0, 3);
  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 15u, 16u, 33u, 128u, 1001u}) {
    std::vector<double> a(n), b(n);
    for (auto& x : a) x = d(rng);
    for (auto& x : b) x = d(rng);
    const double tol = 1e-12 * (1.0 + static_cast<double>(n));
    CHECK(std::abs(ref.dot(a.data(), b.data(), n) - fast->dot(a.data(), b.data(), n)) < tol * 10);
    CHECK(std::abs(ref.sum_squares(a.data(), n) - fast->sum_squares(a.data(), n)) < tol * 10 * (1 + n));
    auto y1 = b, y2 = b;
    ref.axpy(0.7, a.data(), y1.data(), n);
    fast->axpy(0.7, a.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y1[i] - y2[i]) < 1e-12);
    auto s1 = a, s2 = a;
    ref.scale(-1.3, s1.data(), n);
    fast->scale(-1.3, s2.data(), n);
    CHECK(s1 == s2);
    ref.relu(s1.data(), n);
    fast->relu(s2.data(), n);
    CHECK(s1 == s2);
  }
  CHECK(std::string(simd::active().name).size() > 0);
}
