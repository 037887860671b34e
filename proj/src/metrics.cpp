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

#include "fishcast/metrics.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "fishcast/errors.hpp"
#include "fishcast/report_format.hpp"

namespace fishcast {

std::vector<double> last_day_estimator(std::span<const double> history, std::size_t cells, std::size_t p) {
  if (cells == 0 || history.size() < cells || history.size() % cells != 0) {
    throw InsufficientDataError("last_day_estimator needs at least one full history frame");
  }
  const auto last = history.subspan(history.size() - cells);
  std::vector<double> out;
  out.reserve(p * cells);
  for (std::size_t k = 0; k < p; ++k) out.insert(out.end(), last.begin(), last.end());
  return out;
}

namespace {

void check_frame(std::span<const double> pred, std::span<const double> truth, const LandMask& mask) {
  if (pred.size() != truth.size() || pred.size() != mask.shape().cells()) {
    throw ShapeError("metric inputs do not match the mask shape");
  }
  if (mask.sea_count() == 0) throw DegenerateDataError("mask has no sea cell");
}

}  // namespace

double masked_mae(std::span<const double> pred, std::span<const double> truth, const LandMask& mask) {
  check_frame(pred, truth, mask);
  double sum = 0.0;
  for (std::size_t c = 0; c < pred.size(); ++c) {
    if (!mask.is_land(c)) sum += std::abs(pred[c] - truth[c]);
  }
  return sum / static_cast<double>(mask.sea_count());
}

double masked_rmse(std::span<const double> pred, std::span<const double> truth, const LandMask& mask) {
  check_frame(pred, truth, mask);
  double sum = 0.0;
  for (std::size_t c = 0; c < pred.size(); ++c) {
    if (!mask.is_land(c)) sum += (pred[c] - truth[c]) * (pred[c] - truth[c]);
  }
  return std::sqrt(sum / static_cast<double>(mask.sea_count()));
}

HorizonErrorAccumulator::HorizonErrorAccumulator(std::size_t horizon, const LandMask& mask)
    : mask_(mask), abs_sum_(horizon, 0.0), sq_sum_(horizon, 0.0) {
  if (mask_.sea_count() == 0) throw DegenerateDataError("mask has no sea cell");
}

void HorizonErrorAccumulator::add(std::span<const double> pred, std::span<const double> truth) {
  const std::size_t cells = mask_.shape().cells();
  if (pred.size() != horizon() * cells || truth.size() != pred.size()) {
    throw ShapeError("accumulator expects horizon × cells values");
  }
  for (std::size_t k = 0; k < horizon(); ++k) {
    for (std::size_t c = 0; c < cells; ++c) {
      if (mask_.is_land(c)) continue;
      const double d = pred[k * cells + c] - truth[k * cells + c];
      abs_sum_[k] += std::abs(d);
      sq_sum_[k] += d * d;
    }
  }
  ++samples_;
}

double HorizonErrorAccumulator::mae(std::size_t k) const {
  if (samples_ == 0) throw InsufficientDataError("no samples accumulated");
  return abs_sum_.at(k) / static_cast<double>(samples_ * mask_.sea_count());
}

double HorizonErrorAccumulator::rmse(std::size_t k) const {
  if (samples_ == 0) throw InsufficientDataError("no samples accumulated");
  return std::sqrt(sq_sum_.at(k) / static_cast<double>(samples_ * mask_.sea_count()));
}

ErrorReport ErrorReport::from(const HorizonErrorAccumulator& acc) {
  ErrorReport r;
  for (std::size_t k = 0; k < acc.horizon(); ++k) {
    r.mae.push_back(acc.mae(k));
    r.rmse.push_back(acc.rmse(k));
  }
  return r;
}

PerCellErrorAccumulator::PerCellErrorAccumulator(const LandMask& mask)
    : mask_(mask), sq_sum_(mask.shape().cells(), 0.0) {}

void PerCellErrorAccumulator::add(std::span<const double> pred_frame, std::span<const double> truth_frame) {
  if (pred_frame.size() != sq_sum_.size() || truth_frame.size() != sq_sum_.size()) {
    throw ShapeError("per-cell accumulator frame size mismatch");
  }
  for (std::size_t c = 0; c < sq_sum_.size(); ++c) {
    if (mask_.is_land(c)) continue;
    const double d = pred_frame[c] - truth_frame[c];
    sq_sum_[c] += d * d;
  }
  ++frames_;
}

std::vector<double> PerCellErrorAccumulator::rmse() const {
  if (frames_ == 0) throw InsufficientDataError("no frames accumulated");
  std::vector<double> out(sq_sum_.size());
  for (std::size_t c = 0; c < out.size(); ++c) {
    out[c] = mask_.is_land(c) ? kNonValue : std::sqrt(sq_sum_[c] / static_cast<double>(frames_));
  }
  return out;
}

std::vector<double> per_cell_rmse(std::span<const double> pred, std::span<const double> truth, std::size_t frames,
                                  const LandMask& mask) {
  const std::size_t cells = mask.shape().cells();
  if (frames == 0 || pred.size() != frames * cells || truth.size() != frames * cells) {
    throw ShapeError("per_cell_rmse: series lengths do not match");
  }
  PerCellErrorAccumulator acc(mask);
  for (std::size_t t = 0; t < frames; ++t) acc.add(pred.subspan(t * cells, cells), truth.subspan(t * cells, cells));
  return acc.rmse();
}

ConfusionCounts confusion(std::span<const double> probs, std::span<const std::uint8_t> labels, double threshold) {
  if (probs.empty()) throw InsufficientDataError("no predictions to score");
  if (probs.size() != labels.size()) throw ShapeError("prediction and label counts differ");
  ConfusionCounts c;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const bool predicted = probs[i] >= threshold;
    const bool actual = labels[i] != 0;
    if (predicted && actual) ++c.tp;
    else if (predicted) ++c.fp;
    else if (actual) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double f1_from_counts(const ConfusionCounts& c) {
  // 2PR/(P+R) == 2TP/(2TP+FP+FN)
  const double denom = 2.0 * static_cast<double>(c.tp) + static_cast<double>(c.fp + c.fn);
  if (c.tp == 0 || denom == 0.0) return 0.0;
  return 2.0 * static_cast<double>(c.tp) / denom;
}

double f1_score(std::span<const double> probs, std::span<const std::uint8_t> labels, double threshold) {
  return f1_from_counts(confusion(probs, labels, threshold));
}

std::string error_report_csv(const ErrorReport& report) {
  std::string out = "horizon,mae,rmse\n";
  for (std::size_t k = 0; k < report.mae.size(); ++k) {
    out += std::to_string(k + 1) + "," + format_real(report.mae[k]) + "," + format_real(report.rmse[k]) + "\n";
  }
  return out;
}

void write_error_report_csv(const ErrorReport& report, const std::filesystem::path& path) {
  write_text_file(path, error_report_csv(report));
}

}  // namespace fishcast
