// Copyright 2026 The fishcast Authors. All Rights Reserved.
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

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>
#include <vector>

#include "fishcast/errors.hpp"
#include "fishcast/forecaster.hpp"
#include "test_util.hpp"

using namespace fishcast;
using ad::Graph;
using ad::Shape;

namespace {

template <typename T>
ad::Tensor<T> random_tensor(Shape s, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<T> v(s.numel());
  for (auto& x : v) x = static_cast<T>(u(rng));
  return ad::Tensor<T>::from_values(s, std::move(v));
}

template <typename T>
void zero_all(std::vector<ad::Tensor<T>> params) {
  for (auto& p : params)
    for (auto& v : p.values()) v = T(0);
}

NetworkConfig small_config(std::size_t h = 3, std::size_t p = 2) {
  NetworkConfig c;
  c.layer_channels = {3, 3};
  c.ghu_channels = 3;
  c.kernel = 3;
  c.history = h;
  c.horizon = p;
  return c;
}

SynthConfig small_synth(std::size_t days) {
  SynthConfig c;
  c.days = days;
  c.rows = 8;
  c.cols = 8;
  return c;
}

}  // namespace

TEST_CASE("causal LSTM with zero weights") {
  std::mt19937_64 rng(1);
  auto params = CausalLstmParams<double>::init(2, 3, 3, 3, rng);
  zero_all(params.parameters());
  Graph<double> g(ad::GradMode::kDisabled);
  const auto x = random_tensor<double>(Shape{{2, 2, 4, 4}}, rng);
  const auto h = random_tensor<double>(Shape{{2, 3, 4, 4}}, rng);
  const auto c = random_tensor<double>(Shape{{2, 3, 4, 4}}, rng);
  const auto m = random_tensor<double>(Shape{{2, 3, 4, 4}}, rng);
  const auto out = causal_lstm_step(g, x, h, c, m, params);
  CHECK(out.hidden.shape() == Shape{{2, 3, 4, 4}});
  CHECK(out.cell.shape() == Shape{{2, 3, 4, 4}});
  CHECK(out.memory.shape() == Shape{{2, 3, 4, 4}});
  for (std::size_t i = 0; i < c.numel(); ++i) {
    CHECK(out.hidden.values()[i] == 0.0);
    CHECK(out.cell.values()[i] == doctest::Approx(0.5 * c.values()[i]).epsilon(1e-15));
    CHECK(out.memory.values()[i] == 0.0);
  }
}

TEST_CASE("causal LSTM accepts a memory with a different channel count") {
  std::mt19937_64 rng(2);
  const auto params = CausalLstmParams<double>::init(4, 3, 5, 3, rng);
  Graph<double> g(ad::GradMode::kDisabled);
  const Shape s{{1, 3, 4, 4}};
  const auto out = causal_lstm_step(g, random_tensor<double>(Shape{{1, 4, 4, 4}}, rng), random_tensor<double>(s, rng),
                                    random_tensor<double>(s, rng), random_tensor<double>(Shape{{1, 5, 4, 4}}, rng),
                                    params);
  CHECK(out.memory.shape() == s);
  CHECK_THROWS_AS(causal_lstm_step(g, random_tensor<double>(Shape{{1, 2, 4, 4}}, rng), random_tensor<double>(s, rng),
                                   random_tensor<double>(s, rng), random_tensor<double>(Shape{{1, 5, 4, 4}}, rng),
                                   params),
                  ShapeError);
}

TEST_CASE("causal LSTM gradient check") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    std::mt19937_64 rng(seed);
    const auto params = CausalLstmParams<double>::init(2, 2, 2, 3, rng);
    const Shape s{{1, 2, 4, 4}};
    std::vector<ad::Tensor<double>> inputs = {random_tensor<double>(s, rng), random_tensor<double>(s, rng),
                                              random_tensor<double>(s, rng), random_tensor<double>(s, rng)};
    for (const auto& p : params.parameters()) inputs.push_back(p);
    const auto rh = random_tensor<double>(s, rng), rc = random_tensor<double>(s, rng),
               rm = random_tensor<double>(s, rng);
    const auto rep = ad::gradient_check(
        [&](Graph<double>& g, std::span<const ad::Tensor<double>> t) {
          // Parameters are shared handles: the tensors in `t` beyond the
          // first four are the ones inside `params`.
          const auto out = causal_lstm_step(g, t[0], t[1], t[2], t[3], params);
          auto l = ad::sum(g, ad::hadamard(g, out.hidden, rh));
          l = ad::add(g, l, ad::sum(g, ad::hadamard(g, out.cell, rc)));
          return ad::add(g, l, ad::sum(g, ad::hadamard(g, out.memory, rm)));
        },
        inputs, 1e-5, 1e-4);
    INFO("seed " << seed << " worst " << rep.worst);
    CHECK(rep.passed);
  }
}

TEST_CASE("GHU") {
  std::mt19937_64 rng(3);
  SUBCASE("zero weights give half the previous state") {
    auto params = GhuParams<double>::init(2, 3, 3, rng);
    zero_all(params.parameters());
    Graph<double> g(ad::GradMode::kDisabled);
    const auto z = random_tensor<double>(Shape{{1, 3, 4, 4}}, rng);
    const auto out = ghu_step(g, random_tensor<double>(Shape{{1, 2, 4, 4}}, rng), z, params);
    for (std::size_t i = 0; i < z.numel(); ++i) CHECK(out.values()[i] == doctest::Approx(0.5 * z.values()[i]));
  }
  SUBCASE("gradient check") {
    for (std::uint64_t seed : {4u, 5u, 6u}) {
      std::mt19937_64 r(seed);
      const auto params = GhuParams<double>::init(2, 3, 3, r);
      std::vector<ad::Tensor<double>> inputs = {random_tensor<double>(Shape{{2, 2, 4, 4}}, r),
                                                random_tensor<double>(Shape{{2, 3, 4, 4}}, r)};
      for (const auto& p : params.parameters()) inputs.push_back(p);
      const auto w = random_tensor<double>(Shape{{2, 3, 4, 4}}, r);
      const auto rep = ad::gradient_check(
          [&](Graph<double>& g, std::span<const ad::Tensor<double>> t) {
            return ad::sum(g, ad::hadamard(g, ghu_step(g, t[0], t[1], params), w));
          },
          inputs, 1e-5, 1e-4);
      INFO("seed " << seed << " worst " << rep.worst);
      CHECK(rep.passed);
    }
  }
}

TEST_CASE("network forward") {
  const auto cfg = small_config(3, 2);
  const auto net = NetworkParams<double>::init(cfg, 9);
  std::mt19937_64 rng(9);
  std::vector<ad::Tensor<double>> frames;
  for (int i = 0; i < 5; ++i) frames.push_back(random_tensor<double>(Shape{{2, 1, 6, 6}}, rng));
  Graph<double> g1(ad::GradMode::kDisabled), g2(ad::GradMode::kDisabled);
  const auto a = network_forward<double>(g1, net, frames);
  const auto b = network_forward<double>(g2, net, std::span<const ad::Tensor<double>>(frames).first(3));
  REQUIRE(a.size() == 2);
  REQUIRE(b.size() == 2);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(a[k].shape() == Shape{{2, 1, 6, 6}});
    // Target frames beyond the history never reach the output.
    for (std::size_t i = 0; i < a[k].numel(); ++i) CHECK(a[k].values()[i] == b[k].values()[i]);
  }
  // Same seed, same parameters.
  const auto again = NetworkParams<double>::init(cfg, 9).parameters();
  const auto orig = net.parameters();
  REQUIRE(again.size() == orig.size());
  for (std::size_t i = 0; i < orig.size(); ++i)
    CHECK(std::vector<double>(again[i].values().begin(), again[i].values().end()) ==
          std::vector<double>(orig[i].values().begin(), orig[i].values().end()));
  CHECK_THROWS(network_forward<double>(g1, net, std::span<const ad::Tensor<double>>(frames).first(2)));
}

TEST_CASE("network gradient check through the unrolled sequence") {
  auto cfg = small_config(2, 2);
  cfg.layer_channels = {2, 2, 2};
  cfg.ghu_channels = 2;
  for (bool residual : {false, true}) {
    cfg.residual = residual;
    const auto net = NetworkParams<double>::init(cfg, 21);
    std::mt19937_64 rng(21);
    std::vector<ad::Tensor<double>> inputs;
    for (const auto& p : net.parameters()) inputs.push_back(p);
    std::vector<ad::Tensor<double>> frames, targets;
    for (int i = 0; i < 2; ++i) frames.push_back(random_tensor<double>(Shape{{1, 1, 4, 4}}, rng));
    for (int i = 0; i < 2; ++i) targets.push_back(random_tensor<double>(Shape{{1, 1, 4, 4}}, rng));
    const auto rep = ad::gradient_check(
        [&](Graph<double>& g, std::span<const ad::Tensor<double>>) {
          const auto pred = network_forward<double>(g, net, frames);
          // l2 only: the L1 kink makes finite differences unreliable near zero.
          // The wider step keeps round-off down on near-zero weight gradients.
          auto l = ad::l2_loss(g, pred[0], targets[0]);
          return ad::add(g, l, ad::l2_loss(g, pred[1], targets[1]));
        },
        inputs, 1e-3, 1e-4);
    INFO("residual " << residual << " worst " << rep.worst);
    CHECK(rep.passed);
  }
}

TEST_CASE("L1+L2 loss values") {
  Graph<double> g(ad::GradMode::kDisabled);
  const Shape s{{1, 1, 2, 2}};
  const auto zero = ad::Tensor<double>::zeros(s);
  const auto ones = ad::Tensor<double>::filled(s, 1.0);
  const auto half = ad::Tensor<double>::filled(s, 0.5);
  const std::vector<ad::Tensor<double>> z{zero, zero}, o{ones, ones}, hf{half, zero};
  CHECK(loss_l1l2<double>(g, z, z).item() == 0.0);
  CHECK(loss_l1l2<double>(g, o, z).item() == doctest::Approx(2.0));
  // d = 0.5 on half the cells: 0.25 + 0.125
  CHECK(loss_l1l2<double>(g, hf, z).item() == doctest::Approx(0.375));
  const std::vector<ad::Tensor<double>> hh{half, half};
  CHECK(loss_l1l2<double>(g, hh, z).item() == doctest::Approx(0.75));
}

TEST_CASE("Adam") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    std::vector<ad::Tensor<double>> p{ad::Tensor<double>::from_values(Shape{{1, 1, 1, 3}}, {1.0, -2.0, 3.0}, true)};
    p[0].zero_grad();
    AdamState<double> adam;
    adam.update(p);
    CHECK(p[0].values()[0] == 1.0);
    CHECK(p[0].values()[1] == -2.0);
    CHECK(p[0].values()[2] == 3.0);
    CHECK(adam.step() == 1);
  }
  SUBCASE("first step moves by about lr against the gradient sign") {
    std::vector<ad::Tensor<double>> p{ad::Tensor<double>::from_values(Shape{{1, 1, 1, 3}}, {0.0, 0.0, 0.0}, true)};
    p[0].mutable_grad()[0] = 5.0;
    p[0].mutable_grad()[1] = -0.01;
    p[0].mutable_grad()[2] = 1e3;
    AdamState<double> adam(AdamConfig{0.01, 0.9, 0.999, 1e-8});
    adam.update(p);
    CHECK(p[0].values()[0] == doctest::Approx(-0.01).epsilon(1e-6));
    CHECK(p[0].values()[1] == doctest::Approx(0.01).epsilon(1e-5));
    CHECK(p[0].values()[2] == doctest::Approx(-0.01).epsilon(1e-6));
  }
  SUBCASE("two steps against a hand computation") {
    const AdamConfig c{0.05, 0.8, 0.99, 1e-8};
    std::vector<ad::Tensor<double>> p{ad::Tensor<double>::from_values(Shape{{1, 1, 1, 2}}, {0.3, -0.7})};
    const std::vector<double> g1{0.2, -1.5}, g2{-0.4, 0.5};
    AdamState<double> adam(c);
    const std::span<const double> s1[] = {g1};
    const std::span<const double> s2[] = {g2};
    adam.update(p, s1);
    adam.update(p, s2);
    for (std::size_t i = 0; i < 2; ++i) {
      double x = i == 0 ? 0.3 : -0.7, m = 0, v = 0;
      for (int t = 1; t <= 2; ++t) {
        const double gr = t == 1 ? g1[i] : g2[i];
        m = c.beta1 * m + (1 - c.beta1) * gr;
        v = c.beta2 * v + (1 - c.beta2) * gr * gr;
        const double mh = m / (1 - std::pow(c.beta1, t)), vh = v / (1 - std::pow(c.beta2, t));
        x -= c.learning_rate * mh / (std::sqrt(vh) + c.epsilon);
      }
      CHECK(std::abs(p[0].values()[i] - x) < 1e-12);
    }
  }
}

TEST_CASE("overfitting a single sequence") {
  const auto cfg = small_config(3, 2);
  auto net = NetworkParams<float>::init(cfg, 5);
  std::mt19937_64 rng(5);
  std::vector<ad::Tensor<float>> frames, targets;
  for (int i = 0; i < 3; ++i) frames.push_back(random_tensor<float>(Shape{{1, 1, 6, 6}}, rng));
  for (int i = 0; i < 2; ++i) targets.push_back(random_tensor<float>(Shape{{1, 1, 6, 6}}, rng));
  auto params = net.parameters();
  for (auto& p : params) p.set_requires_grad(true);
  AdamState<float> adam(AdamConfig{1e-2});
  double first = 0.0, last = 0.0;
  for (int step = 0; step < 50; ++step) {
    Graph<float> g;
    const auto pred = network_forward<float>(g, net, frames);
    const auto loss = loss_l1l2<float>(g, pred, targets);
    for (auto& p : params) p.zero_grad();
    g.backward(loss);
    adam.update(params);
    if (step == 0) first = loss.item();
    last = loss.item();
  }
  INFO("first " << first << " last " << last);
  CHECK(last < 0.5 * first);
}

TEST_CASE("training, checkpoint and inference") {
  const auto series = synth_series(small_synth(160), 3);
  const auto split = chronological_split(series, 0.7, 0.85);
  const auto norm = compute_norm_stats(series, split);
  const auto stack = normalize(series, norm);
  const auto train = build_sequences(stack, 3, 2, split.train);
  const auto val = build_sequences(stack, 3, 2, split.val);

  TrainConfig tc;
  tc.network = small_config(3, 2);
  tc.network.residual = true;
  tc.adam.learning_rate = 5e-3;
  tc.epochs = 4;
  tc.patience = 10;
  tc.batch_size = 8;
  tc.seed = 1;
  std::size_t callbacks = 0;
  tc.on_epoch = [&](const EpochRecord&) { ++callbacks; };
  const auto result = train_forecaster(train, val, norm, tc);

  REQUIRE(result.history.size() == 5);
  CHECK(callbacks == 5);
  CHECK(result.history[0].epoch == 0);
  double best = result.history[0].val_loss;
  for (const auto& r : result.history) best = std::min(best, r.val_loss);
  CHECK(result.best_val_loss == best);
  INFO("initial val " << result.history[0].val_loss << " best " << best);
  CHECK(best <= 0.7 * result.history[0].val_loss);
  CHECK(evaluate_loss(result.model, val) == doctest::Approx(result.best_val_loss).epsilon(1e-6));

  SUBCASE("training is deterministic") {
    auto tc2 = tc;
    tc2.on_epoch = nullptr;
    tc2.epochs = 1;
    auto tc3 = tc2;
    const auto a = train_forecaster(train, val, norm, tc2);
    const auto b = train_forecaster(train, val, norm, tc3);
    CHECK(a.history.back().train_loss == b.history.back().train_loss);
    CHECK(a.history.back().val_loss == b.history.back().val_loss);
  }

  SUBCASE("checkpoint round trip is bit-exact") {
    test::TempDir dir("ckpt");
    save_checkpoint(result.model, dir / "m.fck");
    const auto loaded = load_checkpoint(dir / "m.fck");
    CHECK(loaded.norm == result.model.norm);
    CHECK(loaded.grid == result.model.grid);
    CHECK(loaded.network.config == result.model.network.config);
    std::vector<std::vector<double>> hist;
    for (std::size_t t = 100; t < 103; ++t) hist.emplace_back(series.frame(t).begin(), series.frame(t).end());
    const auto a = forecast(result.model, hist);
    const auto b = forecast(loaded, hist);
    REQUIRE(a.size() == 2);
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t i = 0; i < a[k].size(); ++i) {
        if (std::isnan(a[k][i])) {
          CHECK(std::isnan(b[k][i]));
        } else {
          CHECK(a[k][i] == b[k][i]);
        }
      }
  }

  SUBCASE("land cells come back as non-values") {
    std::vector<std::vector<double>> hist;
    for (std::size_t t = 50; t < 53; ++t) hist.emplace_back(series.frame(t).begin(), series.frame(t).end());
    const auto out = forecast(result.model, hist);
    const auto& mask = series.land_mask();
    REQUIRE(mask.sea_count() < series.shape().cells());
    for (const auto& frame : out)
      for (std::size_t i = 0; i < frame.size(); ++i) CHECK(std::isnan(frame[i]) == mask.is_land(i));
    CHECK_THROWS_AS(forecast(result.model, std::span(hist).first(2)), ShapeError);
  }

  SUBCASE("batch and single forecasts agree") {
    std::vector<std::vector<double>> histories;
    for (std::size_t start : {10u, 40u, 70u}) {
      std::vector<double> flat;
      for (std::size_t t = start; t < start + 3; ++t) flat.insert(flat.end(), series.frame(t).begin(), series.frame(t).end());
      histories.push_back(std::move(flat));
    }
    const auto batch = forecast_batch(result.model, histories, 2);
    for (std::size_t j = 0; j < histories.size(); ++j) {
      std::vector<std::vector<double>> hist;
      const std::size_t cells = series.shape().cells();
      for (std::size_t t = 0; t < 3; ++t)
        hist.emplace_back(histories[j].begin() + static_cast<long>(t * cells),
                          histories[j].begin() + static_cast<long>((t + 1) * cells));
      const auto single = forecast(result.model, hist);
      for (std::size_t k = 0; k < 2; ++k)
        for (std::size_t i = 0; i < cells; ++i) {
          const double x = batch[j][k * cells + i], y = single[k][i];
          if (std::isnan(x)) {
            CHECK(std::isnan(y));
          } else {
            CHECK(x == doctest::Approx(y).epsilon(1e-6));
          }
        }
    }
  }
}

TEST_CASE("corrupt checkpoint") {
  test::TempDir dir("ckpt_bad");
  const auto path = dir / "bad.fck";
  {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    std::fputs("not a checkpoint", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.fck"), IoError);
}
