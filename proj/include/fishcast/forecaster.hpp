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

#pragma once

// Stacked Causal-LSTM network with a Gradient Highway Unit between the first
// and second layer, trained on L1+L2 loss with Adam.
//
// Per timestep, for layer k (X is the lifted frame for k = 0, the GHU output
// for k = 1 and the hidden state of layer k-1 above that):
//
//   (g, i, f)    = (tanh, σ, σ)(W1 * [X, H, C])
//   C'           = f ⊙ C + i ⊙ g
//   (g', i', f') = (tanh, σ, σ)(W2 * [X, C', M])
//   M'           = f' ⊙ tanh(W3 * M) + i' ⊙ g'
//   o            = tanh(W4 * [X, C', M'])
//   H'           = o ⊙ tanh(W5 * [C', M'])
//
// The spatial memory M climbs the stack within a timestep and wraps from the
// top layer back to the bottom one at the next timestep.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "fishcast/grid_data.hpp"
#include "fishcast/tensor.hpp"

namespace fishcast {

template <typename T>
struct ConvParams {
  ad::Tensor<T> weight;  // [Cout, Cin, k, k]
  ad::Tensor<T> bias;    // [Cout, 1, 1, 1]

  ad::Tensor<T> apply(ad::Graph<T>& g, const ad::Tensor<T>& x) const { return ad::conv2d(g, x, weight, bias); }
};

// Uniform in ±1/sqrt(Cin·k·k) for both weight and bias.
template <typename T>
ConvParams<T> init_conv(std::size_t out_channels, std::size_t in_channels, std::size_t kernel, std::mt19937_64& rng);

template <typename T>
struct CausalLstmParams {
  std::size_t input_channels = 0;
  std::size_t hidden_channels = 0;
  std::size_t memory_channels = 0;  // channels of the incoming M
  std::size_t kernel = 5;
  ConvParams<T> w1;  // [X, H, C]  -> 3·hidden (g, i, f)
  ConvParams<T> w2;  // [X, C, M]  -> 3·hidden (g', i', f')
  ConvParams<T> w3;  // 1x1, M     -> hidden
  ConvParams<T> w4;  // [X, C, M'] -> hidden (o)
  ConvParams<T> w5;  // 1x1, [C, M'] -> hidden

  static CausalLstmParams init(std::size_t input_channels, std::size_t hidden_channels,
                               std::size_t memory_channels, std::size_t kernel, std::mt19937_64& rng);
  std::vector<ad::Tensor<T>> parameters() const;
};

template <typename T>
struct CellOutput {
  ad::Tensor<T> hidden;
  ad::Tensor<T> cell;
  ad::Tensor<T> memory;
};

template <typename T>
CellOutput<T> causal_lstm_step(ad::Graph<T>& g, const ad::Tensor<T>& x, const ad::Tensor<T>& hidden_prev,
                               const ad::Tensor<T>& cell_prev, const ad::Tensor<T>& memory_in,
                               const CausalLstmParams<T>& params);

template <typename T>
struct GhuParams {
  std::size_t input_channels = 0;
  std::size_t channels = 0;
  std::size_t kernel = 5;
  ConvParams<T> candidate;  // [X, Z] -> channels, tanh path P
  ConvParams<T> gate;       // [X, Z] -> channels, switch S

  static GhuParams init(std::size_t input_channels, std::size_t channels, std::size_t kernel, std::mt19937_64& rng);
  std::vector<ad::Tensor<T>> parameters() const;
};

// Z = S ⊙ P + (1 - S) ⊙ Z_prev
template <typename T>
ad::Tensor<T> ghu_step(ad::Graph<T>& g, const ad::Tensor<T>& x, const ad::Tensor<T>& z_prev,
                       const GhuParams<T>& params);

struct NetworkConfig {
  std::vector<std::size_t> layer_channels{128, 64, 64, 64};
  std::size_t ghu_channels = 128;
  std::size_t kernel = 5;
  std::size_t history = 4;  // h
  std::size_t horizon = 4;  // p
  // Adds each step's input frame to the projected output, so the network
  // predicts day-to-day increments.
  bool residual = false;

  bool operator==(const NetworkConfig&) const = default;
};

template <typename T>
struct NetworkParams {
  NetworkConfig config;
  ConvParams<T> input_proj;   // 1x1, 1 -> layer_channels[0]
  std::vector<CausalLstmParams<T>> layers;
  GhuParams<T> ghu;
  ConvParams<T> output_proj;  // 1x1, layer_channels.back() -> 1

  static NetworkParams init(const NetworkConfig& config, std::uint64_t seed);
  // Fixed order, used by the optimizer and the checkpoint format.
  std::vector<ad::Tensor<T>> parameters() const;
};

// Runs h conditioning steps on true frames and then feeds predictions back,
// l - 1 steps in total. `frames` holds h..l tensors of shape [B,1,H,W]; frames
// after the first h are ignored. Returns p predictions.
template <typename T>
std::vector<ad::Tensor<T>> network_forward(ad::Graph<T>& g, const NetworkParams<T>& net,
                                           std::span<const ad::Tensor<T>> frames);

// mean|d| + mean(d²) over every cell of every frame.
template <typename T>
ad::Tensor<T> loss_l1l2(ad::Graph<T>& g, std::span<const ad::Tensor<T>> pred, std::span<const ad::Tensor<T>> target);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(AdamConfig config) : config_(config) {}

  const AdamConfig& config() const { return config_; }
  std::uint64_t step() const { return step_; }

  // One bias-corrected update of every tensor from its current grad buffer.
  void update(std::span<ad::Tensor<T>> params);
  // Same update from explicit gradients (one span per parameter).
  void update(std::span<ad::Tensor<T>> params, std::span<const std::span<const T>> grads);

 private:
  AdamConfig config_;
  std::uint64_t step_ = 0;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
};

struct ForecastModel {
  NetworkParams<float> network;
  NormStats norm;
  GridShape grid;

  std::size_t history() const { return network.config.history; }
  std::size_t horizon() const { return network.config.horizon; }
};

void save_checkpoint(const ForecastModel& model, const std::filesystem::path& path);
ForecastModel load_checkpoint(const std::filesystem::path& path);

struct EpochRecord {
  std::size_t epoch = 0;  // 0 = before training
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainConfig {
  NetworkConfig network;
  AdamConfig adam;
  std::size_t batch_size = 8;
  std::size_t epochs = 50;
  std::size_t patience = 10;
  std::size_t max_batches_per_epoch = 0;  // 0 = full pass
  std::size_t max_val_sequences = 0;      // 0 = all
  std::uint64_t seed = 42;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  ForecastModel model;  // parameters of the best validation epoch
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
};

// Sequences must already be normalized with `norm`.
TrainResult train_forecaster(std::span<const GridSequence> train, std::span<const GridSequence> val,
                             const NormStats& norm, const TrainConfig& config);

// Mean L1+L2 loss of the model over `sequences`.
double evaluate_loss(const ForecastModel& model, std::span<const GridSequence> sequences, std::size_t batch_size = 8);

// Batched inference on normalized histories (h × cells each); returns
// p × cells normalized values per history.
std::vector<std::vector<double>> forecast_normalized(const ForecastModel& model,
                                                     std::span<const std::vector<double>> histories,
                                                     std::size_t batch_size = 16);

// °C in, °C out. Land (non-value) cells of the input come back as non-values.
std::vector<std::vector<double>> forecast(const ForecastModel& model, std::span<const std::vector<double>> history);
// Several histories at once: each entry holds h frames × cells in °C, each
// result p frames × cells in °C.
std::vector<std::vector<double>> forecast_batch(const ForecastModel& model,
                                                std::span<const std::vector<double>> histories,
                                                std::size_t batch_size = 16);

}  // namespace fishcast
