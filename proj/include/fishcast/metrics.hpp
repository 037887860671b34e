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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fishcast/grid_data.hpp"

namespace fishcast {

// p copies of the last history frame. `history` holds h frames × cells.
std::vector<double> last_day_estimator(std::span<const double> history, std::size_t cells, std::size_t p);

// Error statistics over sea cells only; values stored in land cells are never
// read. Throws DegenerateDataError when the mask has no sea cell.
double masked_mae(std::span<const double> pred, std::span<const double> truth, const LandMask& mask);
double masked_rmse(std::span<const double> pred, std::span<const double> truth, const LandMask& mask);

// Accumulates per-horizon masked errors over many sequences.
class HorizonErrorAccumulator {
 public:
  HorizonErrorAccumulator(std::size_t horizon, const LandMask& mask);

  // pred/truth hold `horizon` frames each.
  void add(std::span<const double> pred, std::span<const double> truth);

  std::size_t horizon() const { return abs_sum_.size(); }
  std::size_t samples() const { return samples_; }
  double mae(std::size_t k) const;   // k is 0-based
  double rmse(std::size_t k) const;

 private:
  LandMask mask_;
  std::vector<double> abs_sum_;
  std::vector<double> sq_sum_;
  std::size_t samples_ = 0;
};

struct ErrorReport {
  std::vector<double> mae;   // per horizon 1..p
  std::vector<double> rmse;

  static ErrorReport from(const HorizonErrorAccumulator& acc);
};

// Per-cell RMSE over `frames` aligned frames. Land cells are non-values.
std::vector<double> per_cell_rmse(std::span<const double> pred, std::span<const double> truth, std::size_t frames,
                                  const LandMask& mask);

// Streaming form of per_cell_rmse.
class PerCellErrorAccumulator {
 public:
  explicit PerCellErrorAccumulator(const LandMask& mask);
  void add(std::span<const double> pred_frame, std::span<const double> truth_frame);
  std::vector<double> rmse() const;
  std::size_t frames() const { return frames_; }

 private:
  LandMask mask_;
  std::vector<double> sq_sum_;
  std::size_t frames_ = 0;
};

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

ConfusionCounts confusion(std::span<const double> probs, std::span<const std::uint8_t> labels, double threshold = 0.5);
// 0 when precision + recall = 0.
double f1_from_counts(const ConfusionCounts& c);
double f1_score(std::span<const double> probs, std::span<const std::uint8_t> labels, double threshold = 0.5);

// CSV with header `horizon,mae,rmse`.
void write_error_report_csv(const ErrorReport& report, const std::filesystem::path& path);
std::string error_report_csv(const ErrorReport& report);

}  // namespace fishcast
