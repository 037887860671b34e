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

#include "fishcast/forecaster.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>

#include "fishcast/errors.hpp"

namespace fishcast {

using ad::Graph;
using ad::Shape;
using ad::Tensor;

// ---------------------------------------------------------------------------
// Parameters

template <typename T>
ConvParams<T> init_conv(std::size_t out_channels, std::size_t in_channels, std::size_t kernel, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels * kernel * kernel));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<T> w(out_channels * in_channels * kernel * kernel);
  for (auto& v : w) v = static_cast<T>(dist(rng));
  std::vector<T> b(out_channels);
  for (auto& v : b) v = static_cast<T>(dist(rng));
  return ConvParams<T>{Tensor<T>::from_values(Shape{{out_channels, in_channels, kernel, kernel}}, std::move(w), true),
                       Tensor<T>::from_values(Shape{{out_channels, 1, 1, 1}}, std::move(b), true)};
}

template <typename T>
CausalLstmParams<T> CausalLstmParams<T>::init(std::size_t input_channels, std::size_t hidden_channels,
                                              std::size_t memory_channels, std::size_t kernel, std::mt19937_64& rng) {
  CausalLstmParams p;
  p.input_channels = input_channels;
  p.hidden_channels = hidden_channels;
  p.memory_channels = memory_channels;
  p.kernel = kernel;
  const std::size_t x = input_channels, c = hidden_channels, m = memory_channels;
  p.w1 = init_conv<T>(3 * c, x + 2 * c, kernel, rng);
  p.w2 = init_conv<T>(3 * c, x + c + m, kernel, rng);
  p.w3 = init_conv<T>(c, m, 1, rng);
  p.w4 = init_conv<T>(c, x + 2 * c, kernel, rng);
  p.w5 = init_conv<T>(c, 2 * c, 1, rng);
  return p;
}

template <typename T>
std::vector<Tensor<T>> CausalLstmParams<T>::parameters() const {
  return {w1.weight, w1.bias, w2.weight, w2.bias, w3.weight, w3.bias, w4.weight, w4.bias, w5.weight, w5.bias};
}

template <typename T>
GhuParams<T> GhuParams<T>::init(std::size_t input_channels, std::size_t channels, std::size_t kernel,
                                std::mt19937_64& rng) {
  GhuParams p;
  p.input_channels = input_channels;
  p.channels = channels;
  p.kernel = kernel;
  p.candidate = init_conv<T>(channels, input_channels + channels, kernel, rng);
  p.gate = init_conv<T>(channels, input_channels + channels, kernel, rng);
  return p;
}

template <typename T>
std::vector<Tensor<T>> GhuParams<T>::parameters() const {
  return {candidate.weight, candidate.bias, gate.weight, gate.bias};
}

namespace {

void validate(const NetworkConfig& config) {
  if (config.layer_channels.size() < 2) throw std::invalid_argument("network needs at least two Causal LSTM layers");
  if (std::any_of(config.layer_channels.begin(), config.layer_channels.end(), [](std::size_t c) { return c == 0; }) ||
      config.ghu_channels == 0) {
    throw std::invalid_argument("channel counts must be positive");
  }
  if (config.kernel % 2 == 0) throw std::invalid_argument("kernel size must be odd");
  if (config.history == 0 || config.horizon == 0) throw std::invalid_argument("history and horizon must be >= 1");
}

}  // namespace

template <typename T>
NetworkParams<T> NetworkParams<T>::init(const NetworkConfig& config, std::uint64_t seed) {
  validate(config);
  std::mt19937_64 rng(seed);
  NetworkParams net;
  net.config = config;
  const auto& ch = config.layer_channels;
  net.input_proj = init_conv<T>(ch.front(), 1, 1, rng);
  for (std::size_t k = 0; k < ch.size(); ++k) {
    const std::size_t input = k == 0 ? ch[0] : (k == 1 ? config.ghu_channels : ch[k - 1]);
    const std::size_t memory = k == 0 ? ch.back() : ch[k - 1];
    net.layers.push_back(CausalLstmParams<T>::init(input, ch[k], memory, config.kernel, rng));
  }
  net.ghu = GhuParams<T>::init(ch.front(), config.ghu_channels, config.kernel, rng);
  net.output_proj = init_conv<T>(1, ch.back(), 1, rng);
  return net;
}

template <typename T>
std::vector<Tensor<T>> NetworkParams<T>::parameters() const {
  std::vector<Tensor<T>> out{input_proj.weight, input_proj.bias};
  for (const auto& layer : layers) {
    auto p = layer.parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  auto g = ghu.parameters();
  out.insert(out.end(), g.begin(), g.end());
  out.push_back(output_proj.weight);
  out.push_back(output_proj.bias);
  return out;
}

// ---------------------------------------------------------------------------
// Recurrent units

template <typename T>
CellOutput<T> causal_lstm_step(Graph<T>& g, const Tensor<T>& x, const Tensor<T>& hidden_prev,
                               const Tensor<T>& cell_prev, const Tensor<T>& memory_in,
                               const CausalLstmParams<T>& params) {
  const std::size_t c = params.hidden_channels;
  if (x.shape().channels() != params.input_channels || hidden_prev.shape().channels() != c ||
      cell_prev.shape().channels() != c || memory_in.shape().channels() != params.memory_channels) {
    throw ShapeError("causal_lstm_step: state channels do not match layer parameters");
  }
  const std::array<std::size_t, 3> gate_split{c, c, c};

  // Temporal memory.
  auto gates = split_channels(g, params.w1.apply(g, concat_channels(g, {x, hidden_prev, cell_prev})), gate_split);
  auto g_t = ad::tanh(g, gates[0]);
  auto i_t = ad::sigmoid(g, gates[1]);
  auto f_t = ad::sigmoid(g, gates[2]);
  auto cell = add(g, hadamard(g, f_t, cell_prev), hadamard(g, i_t, g_t));

  // Spatial memory.
  auto gates2 = split_channels(g, params.w2.apply(g, concat_channels(g, {x, cell, memory_in})), gate_split);
  auto g_s = ad::tanh(g, gates2[0]);
  auto i_s = ad::sigmoid(g, gates2[1]);
  auto f_s = ad::sigmoid(g, gates2[2]);
  auto memory = add(g, hadamard(g, f_s, ad::tanh(g, params.w3.apply(g, memory_in))), hadamard(g, i_s, g_s));

  auto o = ad::tanh(g, params.w4.apply(g, concat_channels(g, {x, cell, memory})));
  auto hidden = hadamard(g, o, ad::tanh(g, params.w5.apply(g, concat_channels(g, {cell, memory}))));
  return {hidden, cell, memory};
}

template <typename T>
Tensor<T> ghu_step(Graph<T>& g, const Tensor<T>& x, const Tensor<T>& z_prev, const GhuParams<T>& params) {
  if (x.shape().channels() != params.input_channels || z_prev.shape().channels() != params.channels) {
    throw ShapeError("ghu_step: channels do not match parameters");
  }
  auto xz = concat_channels(g, {x, z_prev});
  auto p = ad::tanh(g, params.candidate.apply(g, xz));
  auto s = ad::sigmoid(g, params.gate.apply(g, xz));
  // S⊙P + (1−S)⊙Z  ==  Z + S⊙(P − Z)
  return add(g, z_prev, hadamard(g, s, sub(g, p, z_prev)));
}

// ---------------------------------------------------------------------------
// Network

template <typename T>
std::vector<Tensor<T>> network_forward(Graph<T>& g, const NetworkParams<T>& net, std::span<const Tensor<T>> frames) {
  const NetworkConfig& cfg = net.config;
  const std::size_t h = cfg.history, p = cfg.horizon;
  if (frames.size() < h || frames.size() > h + p) {
    throw ShapeError("network_forward: expected between " + std::to_string(h) + " and " + std::to_string(h + p) +
                     " frames, got " + std::to_string(frames.size()));
  }
  const Shape& fs = frames.front().shape();
  if (fs.channels() != 1) throw ShapeError("network_forward: frames must have one channel");
  for (const auto& f : frames.first(h)) {
    if (!(f.shape() == fs)) throw ShapeError("network_forward: frames differ in shape");
  }
  const std::size_t B = fs.batch(), H = fs.height(), W = fs.width();
  const auto state = [&](std::size_t channels) { return Tensor<T>::zeros(Shape{{B, channels, H, W}}); };

  const auto& ch = cfg.layer_channels;
  std::vector<Tensor<T>> hidden, cell;
  for (std::size_t c : ch) {
    hidden.push_back(state(c));
    cell.push_back(state(c));
  }
  Tensor<T> memory = state(ch.back());
  Tensor<T> highway = state(cfg.ghu_channels);

  std::vector<Tensor<T>> predictions;
  Tensor<T> input = frames[0];
  for (std::size_t t = 0; t + 1 < h + p; ++t) {
    if (t < h) input = frames[t];
    const Tensor<T> lifted = net.input_proj.apply(g, input);
    for (std::size_t k = 0; k < ch.size(); ++k) {
      const Tensor<T>& x = k == 0 ? lifted : (k == 1 ? highway : hidden[k - 1]);
      auto out = causal_lstm_step(g, x, hidden[k], cell[k], memory, net.layers[k]);
      hidden[k] = out.hidden;
      cell[k] = out.cell;
      memory = out.memory;
      if (k == 0) highway = ghu_step(g, hidden[0], highway, net.ghu);
    }
    Tensor<T> frame = net.output_proj.apply(g, hidden.back());
    if (cfg.residual) frame = add(g, frame, input);
    if (t + 1 >= h) predictions.push_back(frame);
    input = frame;
  }
  return predictions;
}

template <typename T>
Tensor<T> loss_l1l2(Graph<T>& g, std::span<const Tensor<T>> pred, std::span<const Tensor<T>> target) {
  if (pred.size() != target.size() || pred.empty()) throw ShapeError("loss_l1l2: frame counts differ");
  auto p = concat_channels(g, pred);
  auto t = concat_channels(g, target);
  return add(g, ad::l1_loss(g, p, t), ad::l2_loss(g, p, t));
}

// ---------------------------------------------------------------------------
// Adam

template <typename T>
void AdamState<T>::update(std::span<Tensor<T>> params, std::span<const std::span<const T>> grads) {
  if (params.size() != grads.size()) throw ShapeError("adam: parameter and gradient counts differ");
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.numel(), T(0));
      v_.emplace_back(p.numel(), T(0));
    }
  }
  if (m_.size() != params.size()) throw ShapeError("adam: parameter list changed between steps");
  ++step_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto values = params[k].values();
    const auto grad = grads[k];
    if (grad.size() != values.size() || m_[k].size() != values.size()) throw ShapeError("adam: gradient shape mismatch");
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double gi = grad[i];
      const double mi = b1 * m[i] + (1.0 - b1) * gi;
      const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double m_hat = mi / c1;
      const double v_hat = vi / c2;
      values[i] = static_cast<T>(values[i] - config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon));
    }
  }
}

template <typename T>
void AdamState<T>::update(std::span<Tensor<T>> params) {
  std::vector<std::vector<T>> zeros;
  std::vector<std::span<const T>> grads;
  zeros.reserve(params.size());
  for (const auto& p : params) {
    if (p.grad().size() == p.numel()) {
      grads.push_back(p.grad());
    } else {
      zeros.emplace_back(p.numel(), T(0));
      grads.emplace_back(zeros.back());
    }
  }
  update(params, grads);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr std::array<char, 4> kCheckpointMagic = {'F', 'C', 'K', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename V>
void put(std::ostream& out, V v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V get(std::istream& in) {
  V v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(V))) throw FormatError("truncated checkpoint");
  return v;
}

}  // namespace

void save_checkpoint(const ForecastModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const NetworkConfig& cfg = model.network.config;
  out.write(kCheckpointMagic.data(), 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.history));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.horizon));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.kernel));
  put<std::uint32_t>(out, cfg.residual ? 1u : 0u);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.layer_channels.size()));
  for (std::size_t c : cfg.layer_channels) put<std::uint32_t>(out, static_cast<std::uint32_t>(c));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.ghu_channels));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.grid.rows));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.grid.cols));
  put<double>(out, model.norm.mean);
  put<double>(out, model.norm.std);
  put<double>(out, model.norm.land_fill);
  const auto params = model.network.parameters();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& t : params) {
    for (std::size_t d : t.shape().dims) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    out.write(reinterpret_cast<const char*>(t.values().data()),
              static_cast<std::streamsize>(t.numel() * sizeof(float)));
  }
  if (!out) throw IoError("write failed for " + path.string());
}

ForecastModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), 4) || magic != kCheckpointMagic) throw FormatError("bad checkpoint magic");
  if (get<std::uint32_t>(in) != kCheckpointVersion) throw FormatError("unsupported checkpoint version");
  NetworkConfig cfg;
  cfg.history = get<std::uint32_t>(in);
  cfg.horizon = get<std::uint32_t>(in);
  cfg.kernel = get<std::uint32_t>(in);
  cfg.residual = get<std::uint32_t>(in) != 0;
  const auto layers = get<std::uint32_t>(in);
  if (layers < 2 || layers > 64) throw FormatError("implausible layer count in checkpoint");
  cfg.layer_channels.clear();
  for (std::uint32_t k = 0; k < layers; ++k) cfg.layer_channels.push_back(get<std::uint32_t>(in));
  cfg.ghu_channels = get<std::uint32_t>(in);

  ForecastModel model;
  model.grid.rows = get<std::uint32_t>(in);
  model.grid.cols = get<std::uint32_t>(in);
  model.norm.mean = get<double>(in);
  model.norm.std = get<double>(in);
  model.norm.land_fill = get<double>(in);
  try {
    model.network = NetworkParams<float>::init(cfg, 0);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("bad network config in checkpoint: ") + e.what());
  }
  auto params = model.network.parameters();
  if (get<std::uint32_t>(in) != params.size()) throw FormatError("checkpoint tensor count mismatch");
  for (auto& t : params) {
    for (std::size_t d : t.shape().dims) {
      if (get<std::uint32_t>(in) != d) throw FormatError("checkpoint tensor shape mismatch");
    }
    if (!in.read(reinterpret_cast<char*>(t.values().data()), static_cast<std::streamsize>(t.numel() * sizeof(float)))) {
      throw FormatError("truncated checkpoint tensor");
    }
  }
  return model;
}

// ---------------------------------------------------------------------------
// Training and inference

namespace {

// Frame k of each selected sequence stacked into [B,1,H,W] tensors.
std::vector<Tensor<float>> batch_frames(std::span<const GridSequence> seqs, std::span<const std::size_t> idx,
                                        bool target) {
  const GridSequence& first = seqs[idx.front()];
  const std::size_t cells = first.shape.cells();
  const std::size_t count = target ? first.p : first.h;
  const std::size_t B = idx.size();
  std::vector<Tensor<float>> out;
  for (std::size_t k = 0; k < count; ++k) {
    std::vector<float> v(B * cells);
    for (std::size_t b = 0; b < B; ++b) {
      const auto src = target ? seqs[idx[b]].target_frame(k) : seqs[idx[b]].history_frame(k);
      std::transform(src.begin(), src.end(), v.begin() + static_cast<std::ptrdiff_t>(b * cells),
                     [](double x) { return static_cast<float>(x); });
    }
    out.push_back(Tensor<float>::from_values(Shape{{B, 1, first.shape.rows, first.shape.cols}}, std::move(v)));
  }
  return out;
}

void check_sequences(std::span<const GridSequence> seqs, const NetworkConfig& cfg, GridShape grid) {
  for (const auto& s : seqs) {
    if (s.h != cfg.history || s.p != cfg.horizon) throw ShapeError("sequence lengths do not match network config");
    if (!(s.shape == grid)) throw ShapeError("sequence grid does not match");
  }
}

std::vector<std::vector<float>> snapshot(const NetworkParams<float>& net) {
  std::vector<std::vector<float>> out;
  for (const auto& t : net.parameters()) out.emplace_back(t.values().begin(), t.values().end());
  return out;
}

void restore(NetworkParams<float>& net, const std::vector<std::vector<float>>& saved) {
  auto params = net.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) std::copy(saved[k].begin(), saved[k].end(), params[k].values().begin());
}

double batch_loss(const NetworkParams<float>& net, std::span<const GridSequence> seqs, std::span<const std::size_t> idx) {
  Graph<float> g(ad::GradMode::kDisabled);
  const auto history = batch_frames(seqs, idx, false);
  const auto target = batch_frames(seqs, idx, true);
  const auto pred = network_forward<float>(g, net, history);
  return loss_l1l2<float>(g, pred, target).item();
}

double mean_loss(const NetworkParams<float>& net, std::span<const GridSequence> seqs, std::span<const std::size_t> idx,
                 std::size_t batch_size) {
  double total = 0.0;
  for (std::size_t i = 0; i < idx.size(); i += batch_size) {
    const auto chunk = idx.subspan(i, std::min(batch_size, idx.size() - i));
    total += batch_loss(net, seqs, chunk) * static_cast<double>(chunk.size());
  }
  return total / static_cast<double>(idx.size());
}

}  // namespace

double evaluate_loss(const ForecastModel& model, std::span<const GridSequence> sequences, std::size_t batch_size) {
  if (sequences.empty()) throw InsufficientDataError("no sequences to evaluate");
  check_sequences(sequences, model.network.config, model.grid);
  std::vector<std::size_t> idx(sequences.size());
  std::iota(idx.begin(), idx.end(), 0);
  return mean_loss(model.network, sequences, idx, std::max<std::size_t>(1, batch_size));
}

TrainResult train_forecaster(std::span<const GridSequence> train, std::span<const GridSequence> val,
                             const NormStats& norm, const TrainConfig& config) {
  if (train.empty()) throw InsufficientDataError("empty training set");
  if (config.batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
  const GridShape grid = train.front().shape;
  check_sequences(train, config.network, grid);
  check_sequences(val, config.network, grid);

  TrainResult result;
  result.model.network = NetworkParams<float>::init(config.network, config.seed);
  result.model.norm = norm;
  result.model.grid = grid;
  NetworkParams<float>& net = result.model.network;
  auto params = net.parameters();
  AdamState<float> adam(config.adam);
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  // Validation subset is fixed for the whole run.
  const bool has_val = !val.empty();
  std::span<const GridSequence> monitor = has_val ? val : train;
  std::vector<std::size_t> monitor_idx(monitor.size());
  std::iota(monitor_idx.begin(), monitor_idx.end(), 0);
  if (config.max_val_sequences != 0 && monitor_idx.size() > config.max_val_sequences) {
    // Evenly spaced so the subset spans the whole validation period.
    std::vector<std::size_t> picked;
    for (std::size_t k = 0; k < config.max_val_sequences; ++k) {
      picked.push_back(k * monitor_idx.size() / config.max_val_sequences);
    }
    monitor_idx = std::move(picked);
  }

  const auto validation_loss = [&]() { return mean_loss(net, monitor, monitor_idx, config.batch_size); };

  EpochRecord initial{0, std::numeric_limits<double>::quiet_NaN(), validation_loss()};
  result.history.push_back(initial);
  if (config.on_epoch) config.on_epoch(initial);
  result.best_val_loss = initial.val_loss;
  result.best_epoch = 0;
  auto best = snapshot(net);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t batches = (order.size() + config.batch_size - 1) / config.batch_size;
    if (config.max_batches_per_epoch != 0) batches = std::min(batches, config.max_batches_per_epoch);

    double total = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t begin = b * config.batch_size;
      const auto idx = std::span<const std::size_t>(order).subspan(begin, std::min(config.batch_size, order.size() - begin));
      Graph<float> g;
      const auto history = batch_frames(train, idx, false);
      const auto target = batch_frames(train, idx, true);
      const auto pred = network_forward<float>(g, net, history);
      const auto loss = loss_l1l2<float>(g, pred, target);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw DivergenceError("training loss became non-finite at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(b));
      }
      g.backward(loss);
      adam.update(params);
      total += value;
    }

    EpochRecord rec{epoch, total / static_cast<double>(batches), validation_loss()};
    if (!std::isfinite(rec.val_loss)) throw DivergenceError("validation loss became non-finite at epoch " + std::to_string(epoch));
    result.history.push_back(rec);
    if (config.on_epoch) config.on_epoch(rec);

    if (rec.val_loss < result.best_val_loss) {
      result.best_val_loss = rec.val_loss;
      result.best_epoch = epoch;
      best = snapshot(net);
      since_best = 0;
    } else if (++since_best >= config.patience && config.patience != 0) {
      break;
    }
  }
  restore(net, best);
  return result;
}

std::vector<std::vector<double>> forecast_normalized(const ForecastModel& model,
                                                     std::span<const std::vector<double>> histories,
                                                     std::size_t batch_size) {
  const std::size_t h = model.history(), p = model.horizon(), cells = model.grid.cells();
  for (const auto& hist : histories) {
    if (hist.size() != h * cells) throw ShapeError("history does not hold h frames of the model grid");
  }
  batch_size = std::max<std::size_t>(1, batch_size);
  std::vector<std::vector<double>> out;
  out.reserve(histories.size());
  for (std::size_t i = 0; i < histories.size(); i += batch_size) {
    const std::size_t B = std::min(batch_size, histories.size() - i);
    std::vector<Tensor<float>> frames;
    for (std::size_t k = 0; k < h; ++k) {
      std::vector<float> v(B * cells);
      for (std::size_t b = 0; b < B; ++b) {
        const auto& hist = histories[i + b];
        for (std::size_t c = 0; c < cells; ++c) v[b * cells + c] = static_cast<float>(hist[k * cells + c]);
      }
      frames.push_back(Tensor<float>::from_values(Shape{{B, 1, model.grid.rows, model.grid.cols}}, std::move(v)));
    }
    Graph<float> g(ad::GradMode::kDisabled);
    const auto pred = network_forward<float>(g, model.network, frames);
    for (std::size_t b = 0; b < B; ++b) {
      std::vector<double> seq(p * cells);
      for (std::size_t k = 0; k < p; ++k) {
        const auto vals = pred[k].values();
        for (std::size_t c = 0; c < cells; ++c) seq[k * cells + c] = vals[b * cells + c];
      }
      out.push_back(std::move(seq));
    }
  }
  return out;
}

std::vector<std::vector<double>> forecast_batch(const ForecastModel& model, std::span<const std::vector<double>> histories,
                                                std::size_t batch_size) {
  const std::size_t h = model.history(), cells = model.grid.cells();
  std::vector<std::vector<double>> normalized;
  std::vector<LandMask> masks;
  normalized.reserve(histories.size());
  for (const auto& hist : histories) {
    if (hist.size() != h * cells) throw ShapeError("history does not hold h frames of the model grid");
    std::vector<std::uint8_t> land(cells);
    for (std::size_t c = 0; c < cells; ++c) land[c] = is_non_value(hist[c]) ? 1 : 0;
    std::vector<double> norm(hist.size());
    for (std::size_t i = 0; i < hist.size(); ++i) {
      const std::size_t c = i % cells;
      if (land[c] != 0) {
        if (!is_non_value(hist[i])) throw InconsistentMaskError("history land mask changes between frames");
        norm[i] = model.norm.land_fill;
      } else {
        if (is_non_value(hist[i])) throw InconsistentMaskError("history land mask changes between frames");
        norm[i] = (hist[i] - model.norm.mean) / model.norm.std;
      }
    }
    normalized.push_back(std::move(norm));
    masks.emplace_back(model.grid, std::move(land));
  }
  auto pred = forecast_normalized(model, normalized, batch_size);
  for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = denormalize(pred[i], model.norm, masks[i]);
  return pred;
}

std::vector<std::vector<double>> forecast(const ForecastModel& model, std::span<const std::vector<double>> history) {
  const std::size_t h = model.history(), cells = model.grid.cells();
  if (history.size() != h) {
    throw ShapeError("forecast expects " + std::to_string(h) + " history frames, got " + std::to_string(history.size()));
  }
  std::vector<double> flat;
  flat.reserve(h * cells);
  for (const auto& frame : history) {
    if (frame.size() != cells) throw ShapeError("history frame does not match model grid");
    flat.insert(flat.end(), frame.begin(), frame.end());
  }
  const std::vector<std::vector<double>> batch{std::move(flat)};
  const auto pred = forecast_batch(model, batch, 1);
  std::vector<std::vector<double>> frames;
  for (std::size_t k = 0; k < model.horizon(); ++k) {
    frames.emplace_back(pred[0].begin() + static_cast<std::ptrdiff_t>(k * cells),
                        pred[0].begin() + static_cast<std::ptrdiff_t>((k + 1) * cells));
  }
  return frames;
}

// ---------------------------------------------------------------------------
// Instantiations

#define FISHCAST_INSTANTIATE(T)                                                                                    \
  template ConvParams<T> init_conv<T>(std::size_t, std::size_t, std::size_t, std::mt19937_64&);                    \
  template struct CausalLstmParams<T>;                                                                             \
  template struct GhuParams<T>;                                                                                    \
  template struct NetworkParams<T>;                                                                                \
  template class AdamState<T>;                                                                                     \
  template CellOutput<T> causal_lstm_step(Graph<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,          \
                                          const Tensor<T>&, const CausalLstmParams<T>&);                           \
  template Tensor<T> ghu_step(Graph<T>&, const Tensor<T>&, const Tensor<T>&, const GhuParams<T>&);                 \
  template std::vector<Tensor<T>> network_forward(Graph<T>&, const NetworkParams<T>&, std::span<const Tensor<T>>); \
  template Tensor<T> loss_l1l2(Graph<T>&, std::span<const Tensor<T>>, std::span<const Tensor<T>>);

FISHCAST_INSTANTIATE(float)
FISHCAST_INSTANTIATE(double)

#undef FISHCAST_INSTANTIATE

}  // namespace fishcast
