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

#include "fishcast/gbm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "fishcast/errors.hpp"
#include "fishcast/report_format.hpp"

namespace fishcast {

std::string species_code(Species s) { return s == Species::kSole ? "SOL" : "PLE"; }

Species parse_species(std::string_view code) {
  if (code == "SOL") return Species::kSole;
  if (code == "PLE") return Species::kPlaice;
  throw std::invalid_argument("unknown species code '" + std::string(code) + "' (expected SOL or PLE)");
}

// ---------------------------------------------------------------------------
// Features

std::size_t feature_count(FeatureSet set) { return set == FeatureSet::kWithTemperature ? 7 : 6; }

FeatureVector encode_features(const FishingRecord& record, double temperature, GridShape grid) {
  if (record.cell_row >= grid.rows || record.cell_col >= grid.cols) {
    throw std::out_of_range("record cell outside the grid");
  }
  if (!std::isfinite(temperature)) throw DegenerateDataError("record lies on a land cell (no temperature)");
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double day_phase = two_pi * static_cast<double>(day_of_year(record.date)) / 365.25;
  const double month_phase = two_pi * static_cast<double>(month_of(record.date) - 1) / 12.0;
  return FeatureVector{static_cast<double>(record.cell_col),
                       static_cast<double>(record.cell_row),
                       temperature,
                       std::sin(day_phase),
                       std::cos(day_phase),
                       std::sin(month_phase),
                       std::cos(month_phase)};
}

void append_features(const FeatureVector& f, FeatureSet set, std::vector<double>& out) {
  out.push_back(f.lon_index);
  out.push_back(f.lat_index);
  if (set == FeatureSet::kWithTemperature) out.push_back(f.temperature);
  out.push_back(f.day_sin);
  out.push_back(f.day_cos);
  out.push_back(f.month_sin);
  out.push_back(f.month_cos);
}

std::vector<double> lookup_temperatures(std::span<const FishingRecord> records, const TemperatureGridSeries& series) {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (r.cell_row >= series.shape().rows || r.cell_col >= series.shape().cols) {
      throw std::out_of_range("record cell outside the grid");
    }
    out.push_back(series.at(series.index_of(r.date), r.cell_row, r.cell_col));
  }
  return out;
}

FeatureMatrix build_feature_matrix(std::span<const FishingRecord> records, std::span<const double> temperatures,
                                   GridShape grid, FeatureSet set) {
  const bool with_temp = set == FeatureSet::kWithTemperature;
  if (with_temp && temperatures.size() != records.size()) throw ShapeError("one temperature per record required");
  FeatureMatrix m{records.size(), feature_count(set), {}};
  m.values.reserve(m.rows * m.cols);
  for (std::size_t i = 0; i < records.size(); ++i) {
    // Without the temperature column the value is never read; 0 keeps encode_features happy.
    append_features(encode_features(records[i], with_temp ? temperatures[i] : 0.0, grid), set, m.values);
  }
  return m;
}

std::vector<std::uint8_t> labels_of(std::span<const FishingRecord> records) {
  std::vector<std::uint8_t> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.present ? 1 : 0);
  return out;
}

// ---------------------------------------------------------------------------
// Binning

std::size_t FeatureBins::bin_of(double value) const {
  if (std::isnan(value)) return 0;
  const auto it = std::lower_bound(upper_bounds.begin(), upper_bounds.end(), value);
  return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - upper_bounds.begin(),
                                                           static_cast<std::ptrdiff_t>(upper_bounds.size()) - 1));
}

FeatureBins make_bins(std::span<const double> column, std::size_t max_bins) {
  if (max_bins < 2 || max_bins > 255) throw std::invalid_argument("max_bins must lie in [2, 255]");
  std::vector<double> sorted;
  sorted.reserve(column.size());
  for (double v : column)
    if (!std::isnan(v)) sorted.push_back(v);
  std::sort(sorted.begin(), sorted.end());

  std::vector<double> distinct;
  std::vector<std::size_t> counts;
  for (double v : sorted) {
    if (distinct.empty() || v != distinct.back()) {
      distinct.push_back(v);
      counts.push_back(1);
    } else {
      ++counts.back();
    }
  }

  FeatureBins bins;
  const double inf = std::numeric_limits<double>::infinity();
  if (distinct.size() <= max_bins) {
    for (std::size_t i = 0; i + 1 < distinct.size(); ++i) {
      bins.upper_bounds.push_back(distinct[i] + (distinct[i + 1] - distinct[i]) / 2.0);
    }
  } else {
    // Equal-frequency cuts, placed between distinct values.
    const double per_bin = static_cast<double>(sorted.size()) / static_cast<double>(max_bins);
    std::size_t seen = 0;
    for (std::size_t i = 0; i + 1 < distinct.size() && bins.upper_bounds.size() + 1 < max_bins; ++i) {
      seen += counts[i];
      if (static_cast<double>(seen) >= per_bin * static_cast<double>(bins.upper_bounds.size() + 1)) {
        bins.upper_bounds.push_back(distinct[i] + (distinct[i + 1] - distinct[i]) / 2.0);
      }
    }
  }
  bins.upper_bounds.push_back(inf);
  return bins;
}

// ---------------------------------------------------------------------------
// Tree growth

namespace {

struct BinnedData {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<FeatureBins> edges;
  std::vector<std::size_t> offsets;  // start of each feature in a histogram
  std::size_t total_bins = 0;
  std::vector<std::uint8_t> bins;    // column-major: feature j, row i at j*rows + i

  std::uint8_t bin(std::size_t row, std::size_t feature) const { return bins[feature * rows + row]; }
};

BinnedData bin_features(const FeatureMatrix& features, std::size_t max_bins) {
  BinnedData d;
  d.rows = features.rows;
  d.cols = features.cols;
  d.bins.resize(d.rows * d.cols);
  std::vector<double> column(d.rows);
  for (std::size_t j = 0; j < d.cols; ++j) {
    for (std::size_t i = 0; i < d.rows; ++i) column[i] = features.at(i, j);
    d.edges.push_back(make_bins(column, max_bins));
    d.offsets.push_back(d.total_bins);
    d.total_bins += d.edges.back().size();
    for (std::size_t i = 0; i < d.rows; ++i) d.bins[j * d.rows + i] = static_cast<std::uint8_t>(d.edges[j].bin_of(column[i]));
  }
  return d;
}

struct HistBin {
  double g = 0.0;
  double h = 0.0;
  std::size_t count = 0;
};

// Gains closer than this (relative to the size of the terms they are
// computed from) count as ties, so the earlier candidate keeps winning no
// matter how summation order rounded the two.
constexpr double kTieTolerance = 1e-10;

struct SplitCandidate {
  double gain = -std::numeric_limits<double>::infinity();
  int feature = -1;
  std::size_t bin = 0;
  double scale = 0.0;  // G_L²/H_L + G_R²/H_R

  bool valid() const { return feature >= 0 && gain > kMinSplitGain; }
  bool beaten_by(double other_gain, double other_scale) const {
    return other_gain > gain + kTieTolerance * std::max(scale, other_scale);
  }
};

struct Leaf {
  std::vector<std::uint32_t> rows;
  double g = 0.0;
  double h = 0.0;
  std::vector<HistBin> hist;
  SplitCandidate best;
  std::size_t node = 0;
  std::size_t depth = 0;
};

void build_histogram(const BinnedData& d, std::span<const std::uint32_t> rows, std::span<const double> grad,
                     std::span<const double> hess, std::vector<HistBin>& hist) {
  hist.assign(d.total_bins, HistBin{});
  for (std::size_t j = 0; j < d.cols; ++j) {
    HistBin* base = hist.data() + d.offsets[j];
    const std::uint8_t* col = d.bins.data() + j * d.rows;
    for (std::uint32_t r : rows) {
      HistBin& b = base[col[r]];
      b.g += grad[r];
      b.h += hess[r];
      ++b.count;
    }
  }
}

SplitCandidate find_best_split(const BinnedData& d, const Leaf& leaf, const GbmConfig& cfg) {
  SplitCandidate best;
  if (cfg.max_depth != 0 && leaf.depth >= cfg.max_depth) return best;
  if (leaf.rows.size() < 2 * cfg.min_leaf_count) return best;
  const double parent = leaf.g * leaf.g / leaf.h;
  const std::size_t n = leaf.rows.size();
  for (std::size_t j = 0; j < d.cols; ++j) {
    const HistBin* base = leaf.hist.data() + d.offsets[j];
    const std::size_t nb = d.edges[j].size();
    double gl = 0.0, hl = 0.0;
    std::size_t cl = 0;
    for (std::size_t b = 0; b + 1 < nb; ++b) {
      gl += base[b].g;
      hl += base[b].h;
      cl += base[b].count;
      if (cl < cfg.min_leaf_count) continue;
      if (n - cl < cfg.min_leaf_count) break;
      const double gr = leaf.g - gl, hr = leaf.h - hl;
      if (hl < cfg.min_leaf_hessian || hr < cfg.min_leaf_hessian) continue;
      const double scale = gl * gl / hl + gr * gr / hr;
      const double gain = scale - parent;
      if (best.beaten_by(gain, scale)) best = SplitCandidate{gain, static_cast<int>(j), b, scale};
    }
  }
  return best;
}

// Grows one tree; fills leaf_of_row with the leaf node index of every row.
Tree grow_binned(const BinnedData& d, std::span<const double> grad, std::span<const double> hess, const GbmConfig& cfg,
                 std::vector<std::uint32_t>& leaf_of_row) {
  if (cfg.num_leaves < 1) throw std::invalid_argument("num_leaves must be >= 1");
  Tree tree;
  tree.nodes.emplace_back();

  std::vector<Leaf> leaves(1);
  Leaf& root = leaves[0];
  root.rows.resize(d.rows);
  std::iota(root.rows.begin(), root.rows.end(), 0u);
  for (std::size_t i = 0; i < d.rows; ++i) {
    root.g += grad[i];
    root.h += hess[i];
  }
  build_histogram(d, root.rows, grad, hess, root.hist);
  root.best = find_best_split(d, root, cfg);

  while (leaves.size() < cfg.num_leaves) {
    // Best-first: highest gain, earliest leaf on ties.
    std::size_t pick = leaves.size();
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      if (!leaves[i].best.valid()) continue;
      if (pick == leaves.size() || leaves[pick].best.beaten_by(leaves[i].best.gain, leaves[i].best.scale)) pick = i;
    }
    if (pick == leaves.size()) break;

    Leaf parent = std::move(leaves[pick]);
    const SplitCandidate split = parent.best;
    const auto f = static_cast<std::size_t>(split.feature);
    Leaf left, right;
    for (std::uint32_t r : parent.rows) {
      if (d.bin(r, f) <= split.bin) {
        left.rows.push_back(r);
        left.g += grad[r];
        left.h += hess[r];
      } else {
        right.rows.push_back(r);
        right.g += grad[r];
        right.h += hess[r];
      }
    }
    // Histogram subtraction: scan the smaller child, derive the larger one.
    Leaf& small = left.rows.size() <= right.rows.size() ? left : right;
    Leaf& large = &small == &left ? right : left;
    build_histogram(d, small.rows, grad, hess, small.hist);
    large.hist = std::move(parent.hist);
    for (std::size_t b = 0; b < d.total_bins; ++b) {
      large.hist[b].g -= small.hist[b].g;
      large.hist[b].h -= small.hist[b].h;
      large.hist[b].count -= small.hist[b].count;
    }

    TreeNode& node = tree.nodes[parent.node];
    node.feature = split.feature;
    node.threshold = d.edges[f].upper_bounds[split.bin];
    node.gain = split.gain;
    node.left = static_cast<int>(tree.nodes.size());
    node.right = static_cast<int>(tree.nodes.size() + 1);
    left.node = tree.nodes.size();
    right.node = tree.nodes.size() + 1;
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    left.depth = right.depth = parent.depth + 1;
    left.best = find_best_split(d, left, cfg);
    right.best = find_best_split(d, right, cfg);

    leaves[pick] = std::move(left);
    leaves.push_back(std::move(right));
  }

  leaf_of_row.assign(d.rows, 0);
  for (const Leaf& leaf : leaves) {
    tree.nodes[leaf.node].leaf_value = leaf.h > 0.0 ? -leaf.g / leaf.h : 0.0;
    for (std::uint32_t r : leaf.rows) leaf_of_row[r] = static_cast<std::uint32_t>(leaf.node);
  }
  return tree;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::size_t Tree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

std::size_t Tree::depth() const {
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  std::size_t deepest = 0;
  while (!stack.empty()) {
    const auto [node, depth] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, depth);
    if (!nodes[node].is_leaf()) {
      stack.emplace_back(static_cast<std::size_t>(nodes[node].left), depth + 1);
      stack.emplace_back(static_cast<std::size_t>(nodes[node].right), depth + 1);
    }
  }
  return deepest;
}

std::size_t Tree::leaf_index(std::span<const double> row) const {
  std::size_t node = 0;
  while (!nodes[node].is_leaf()) {
    const TreeNode& n = nodes[node];
    const double v = row[static_cast<std::size_t>(n.feature)];
    node = static_cast<std::size_t>(std::isnan(v) || v <= n.threshold ? n.left : n.right);
  }
  return node;
}

Tree grow_tree(const FeatureMatrix& features, std::span<const double> gradients, std::span<const double> hessians,
               const GbmConfig& config) {
  if (gradients.size() != features.rows || hessians.size() != features.rows) {
    throw ShapeError("one gradient and hessian per row required");
  }
  const BinnedData d = bin_features(features, config.max_bins);
  std::vector<std::uint32_t> leaf_of_row;
  return grow_binned(d, gradients, hessians, config, leaf_of_row);
}

double mean_log_loss(std::span<const double> probs, std::span<const std::uint8_t> labels) {
  if (probs.size() != labels.size() || probs.empty()) throw ShapeError("log-loss needs matching, non-empty inputs");
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], 1e-15, 1.0 - 1e-15);
    total -= labels[i] ? std::log(p) : std::log(1.0 - p);
  }
  return total / static_cast<double>(probs.size());
}

GbmEnsemble train_gbm(const FeatureMatrix& features, std::span<const std::uint8_t> labels, const GbmConfig& config,
                      GbmTrainLog* log) {
  if (labels.size() != features.rows) throw ShapeError("one label per feature row required");
  if (features.rows == 0) throw InsufficientDataError("no training rows");
  if (!(config.learning_rate > 0.0 && config.learning_rate <= 1.0)) {
    throw std::invalid_argument("learning rate must lie in (0, 1]");
  }
  const std::size_t positives = static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](auto y) { return y != 0; }));
  if (positives == 0 || positives == labels.size()) throw DegenerateDataError("training labels contain a single class");

  const double rate = static_cast<double>(positives) / static_cast<double>(labels.size());
  GbmEnsemble model;
  model.base_score = std::log(rate / (1.0 - rate));
  model.learning_rate = config.learning_rate;
  model.num_leaves = config.num_leaves;
  model.num_features = features.cols;

  const BinnedData d = bin_features(features, config.max_bins);
  const std::size_t n = features.rows;
  std::vector<double> score(n, model.base_score), prob(n), grad(n), hess(n);
  std::vector<std::uint32_t> leaf_of_row;

  const auto refresh = [&]() {
    for (std::size_t i = 0; i < n; ++i) prob[i] = sigmoid(score[i]);
  };
  refresh();
  if (log) log->log_loss.assign(1, mean_log_loss(prob, labels));

  for (std::size_t round = 0; round < config.n_trees; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      grad[i] = prob[i] - static_cast<double>(labels[i]);
      hess[i] = prob[i] * (1.0 - prob[i]);
    }
    Tree tree = grow_binned(d, grad, hess, config, leaf_of_row);
    for (std::size_t i = 0; i < n; ++i) score[i] += config.learning_rate * tree.nodes[leaf_of_row[i]].leaf_value;
    model.trees.push_back(std::move(tree));
    refresh();
    if (log) log->log_loss.push_back(mean_log_loss(prob, labels));
  }
  return model;
}

// ---------------------------------------------------------------------------
// Prediction

double GbmEnsemble::margin(std::span<const double> row) const {
  if (row.size() != num_features) throw ShapeError("feature row width does not match the model");
  double m = base_score;
  for (const Tree& t : trees) m += learning_rate * t.value(row);
  return m;
}

double GbmEnsemble::predict_proba(std::span<const double> row) const { return sigmoid(margin(row)); }

std::vector<double> GbmEnsemble::predict_proba(const FeatureMatrix& features) const {
  std::vector<double> out(features.rows);
  for (std::size_t i = 0; i < features.rows; ++i) out[i] = predict_proba(features.row(i));
  return out;
}

FeatureSet GbmEnsemble::feature_set() const {
  if (num_features == 7) return FeatureSet::kWithTemperature;
  if (num_features == 6) return FeatureSet::kWithoutTemperature;
  throw FormatError("model has " + std::to_string(num_features) + " features; expected 6 or 7");
}

std::vector<double> predict_map(const GbmEnsemble& model, Date date, std::span<const double> temperature,
                                const LandMask& mask) {
  const GridShape grid = mask.shape();
  if (temperature.size() != grid.cells()) throw ShapeError("temperature grid does not match mask");
  const FeatureSet set = model.feature_set();
  std::vector<double> out(grid.cells(), kNonValue);
  std::vector<double> row;
  for (std::size_t r = 0; r < grid.rows; ++r) {
    for (std::size_t c = 0; c < grid.cols; ++c) {
      const std::size_t cell = r * grid.cols + c;
      if (mask.is_land(cell)) continue;
      row.clear();
      const FishingRecord where{date, r, c, Species::kSole, false};
      append_features(encode_features(where, temperature[cell], grid), set, row);
      out[cell] = model.predict_proba(row);
    }
  }
  return out;
}

std::vector<double> default_offsets() {
  std::vector<double> out;
  for (int d = -2; d <= 7; ++d) out.push_back(static_cast<double>(d));
  return out;
}

std::vector<std::pair<double, double>> sensitivity_sweep(const GbmEnsemble& model, Date date,
                                                         std::span<const double> temperature, const LandMask& mask,
                                                         std::span<const double> offsets) {
  if (mask.sea_count() == 0) throw DegenerateDataError("mask has no sea cell");
  std::vector<std::pair<double, double>> out;
  std::vector<double> shifted(temperature.size());
  for (double offset : offsets) {
    if (!std::isfinite(offset)) throw std::invalid_argument("offsets must be finite");
    for (std::size_t i = 0; i < temperature.size(); ++i) shifted[i] = temperature[i] + offset;
    const auto probs = predict_map(model, date, shifted, mask);
    double sum = 0.0;
    for (std::size_t c = 0; c < probs.size(); ++c)
      if (!mask.is_land(c)) sum += probs[c];
    out.emplace_back(offset, sum / static_cast<double>(mask.sea_count()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model file

namespace {
constexpr std::string_view kModelHeader = "fishcast-gbm 1";
}

std::string serialize_ensemble(const GbmEnsemble& model) {
  std::string out(kModelHeader);
  out += "\nnum_features " + std::to_string(model.num_features);
  out += "\nnum_leaves " + std::to_string(model.num_leaves);
  out += "\nlearning_rate " + format_real(model.learning_rate);
  out += "\nbase_score " + format_real(model.base_score);
  out += "\ntrees " + std::to_string(model.trees.size()) + "\n";
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    const Tree& tree = model.trees[t];
    out += "tree " + std::to_string(t) + " nodes " + std::to_string(tree.nodes.size()) + "\n";
    out += "id feature threshold left right leaf_value gain\n";
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      const TreeNode& n = tree.nodes[i];
      out += std::to_string(i) + " " + std::to_string(n.feature) + " " + format_real(n.threshold) + " " +
             std::to_string(n.left) + " " + std::to_string(n.right) + " " + format_real(n.leaf_value) + " " +
             format_real(n.gain) + "\n";
    }
  }
  out += "end\n";
  return out;
}

GbmEnsemble parse_ensemble(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  const auto next_line = [&](const char* what) {
    if (!std::getline(in, line)) throw FormatError(std::string("model file truncated before ") + what);
    return line;
  };
  const auto keyed = [&](const std::string& key) -> std::string {
    next_line(key.c_str());
    if (line.rfind(key + " ", 0) != 0) throw FormatError("expected '" + key + "' in model file, got '" + line + "'");
    return line.substr(key.size() + 1);
  };
  const auto to_size = [](const std::string& s) -> std::size_t {
    try {
      std::size_t pos = 0;
      const unsigned long long v = std::stoull(s, &pos);
      if (pos != s.size()) throw FormatError("bad integer '" + s + "'");
      return static_cast<std::size_t>(v);
    } catch (const std::logic_error&) {
      throw FormatError("bad integer '" + s + "'");
    }
  };

  if (next_line("header") != kModelHeader) throw FormatError("not a fishcast-gbm v1 model");
  GbmEnsemble model;
  model.num_features = to_size(keyed("num_features"));
  model.num_leaves = to_size(keyed("num_leaves"));
  model.learning_rate = parse_real(keyed("learning_rate"));
  model.base_score = parse_real(keyed("base_score"));
  const std::size_t trees = to_size(keyed("trees"));
  for (std::size_t t = 0; t < trees; ++t) {
    std::istringstream head(next_line("tree header"));
    std::string word_tree, word_nodes;
    std::size_t id = 0, count = 0;
    if (!(head >> word_tree >> id >> word_nodes >> count) || word_tree != "tree" || word_nodes != "nodes" || id != t) {
      throw FormatError("bad tree header '" + line + "'");
    }
    next_line("node table header");
    Tree tree;
    for (std::size_t i = 0; i < count; ++i) {
      std::istringstream row(next_line("node row"));
      std::size_t node_id = 0;
      std::string threshold, leaf, gain;
      TreeNode n;
      if (!(row >> node_id >> n.feature >> threshold >> n.left >> n.right >> leaf >> gain) || node_id != i) {
        throw FormatError("bad node row '" + line + "'");
      }
      n.threshold = parse_real(threshold);
      n.leaf_value = parse_real(leaf);
      n.gain = parse_real(gain);
      const auto valid_child = [&](int c) { return c > static_cast<int>(i) && c < static_cast<int>(count); };
      if (!n.is_leaf() && (n.feature >= static_cast<int>(model.num_features) || !valid_child(n.left) ||
                           !valid_child(n.right))) {
        throw FormatError("node " + std::to_string(i) + " references an invalid feature or child");
      }
      tree.nodes.push_back(n);
    }
    if (tree.nodes.empty()) throw FormatError("tree without nodes");
    model.trees.push_back(std::move(tree));
  }
  if (next_line("end") != "end") throw FormatError("missing end marker");
  return model;
}

void save_ensemble(const GbmEnsemble& model, const std::filesystem::path& path) {
  write_text_file(path, serialize_ensemble(model));
}

GbmEnsemble load_ensemble(const std::filesystem::path& path) { return parse_ensemble(read_text_file(path)); }

// ---------------------------------------------------------------------------
// Synthetic fisheries

SpeciesResponse SpeciesResponse::sole() { return SpeciesResponse{}; }

SpeciesResponse SpeciesResponse::plaice() {
  SpeciesResponse r;
  r.species = Species::kPlaice;
  r.temperature_slope = 0.3;
  r.spatial_amplitude = 0.8;
  return r;
}

std::vector<FishingRecord> synth_fisheries(const TemperatureGridSeries& series, const SpeciesResponse& response,
                                           std::uint64_t seed) {
  const LandMask& mask = series.land_mask();
  if (mask.sea_count() == 0) throw DegenerateDataError("series has no sea cell");
  const IndexRange days = response.days.empty() ? IndexRange{0, series.days()} : response.days;
  if (days.end > series.days()) throw std::invalid_argument("record day range exceeds the series");

  std::vector<std::size_t> sea;
  for (std::size_t c = 0; c < mask.shape().cells(); ++c)
    if (!mask.is_land(c)) sea.push_back(c);

  double reference = response.reference_temperature;
  if (std::isnan(reference)) {
    double sum = 0.0;
    std::size_t n = 0;
    for (double v : series.values())
      if (!is_non_value(v)) {
        sum += v;
        ++n;
      }
    reference = sum / static_cast<double>(n);
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_day(days.begin, days.end - 1);
  std::uniform_int_distribution<std::size_t> pick_cell(0, sea.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t cols = mask.shape().cols;

  std::vector<FishingRecord> out;
  out.reserve(response.records);
  for (std::size_t i = 0; i < response.records; ++i) {
    const std::size_t t = pick_day(rng);
    const std::size_t cell = sea[pick_cell(rng)];
    const std::size_t row = cell / cols, col = cell % cols;
    const Date date = series.date_at(t);
    const double temp = series.at(t, row, col);
    const double season = std::cos(2.0 * std::numbers::pi * static_cast<double>(day_of_year(date)) / 365.25);
    const double across = cols > 1 ? 2.0 * static_cast<double>(col) / static_cast<double>(cols - 1) - 1.0 : 0.0;
    const double logit = response.intercept + response.temperature_slope * (temp - reference) +
                         response.seasonal_amplitude * season + response.spatial_amplitude * across;
    const bool present = unit(rng) < sigmoid(logit);
    out.push_back(FishingRecord{date, row, col, response.species, present});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fisheries CSV

namespace {
constexpr std::string_view kFisheriesHeader = "date,cell_row,cell_col,species,present";
}

std::string fisheries_csv(std::span<const FishingRecord> records) {
  std::string out(kFisheriesHeader);
  out += '\n';
  for (const auto& r : records) {
    out += format_iso_date(r.date) + "," + std::to_string(r.cell_row) + "," + std::to_string(r.cell_col) + "," +
           species_code(r.species) + "," + (r.present ? "1" : "0") + "\n";
  }
  return out;
}

std::vector<FishingRecord> parse_fisheries_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kFisheriesHeader) {
    throw FormatError("fisheries CSV must start with '" + std::string(kFisheriesHeader) + "'");
  }
  std::vector<FishingRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t begin = 0;
    while (true) {
      const std::size_t end = line.find(',', begin);
      fields.push_back(line.substr(begin, end - begin));
      if (end == std::string::npos) break;
      begin = end + 1;
    }
    try {
      if (fields.size() != 5) throw std::invalid_argument("expected 5 fields");
      if (fields[4] != "0" && fields[4] != "1") throw std::invalid_argument("present must be 0 or 1");
      std::size_t pos_r = 0, pos_c = 0;
      const auto row = std::stoul(fields[1], &pos_r);
      const auto col = std::stoul(fields[2], &pos_c);
      if (pos_r != fields[1].size() || pos_c != fields[2].size()) throw std::invalid_argument("bad cell index");
      out.push_back(FishingRecord{parse_iso_date(fields[0]), row, col, parse_species(fields[3]), fields[4] == "1"});
    } catch (const std::logic_error& e) {
      throw FormatError("fisheries CSV line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_fisheries_csv(std::span<const FishingRecord> records, const std::filesystem::path& path) {
  write_text_file(path, fisheries_csv(records));
}

std::vector<FishingRecord> read_fisheries_csv(const std::filesystem::path& path) {
  return parse_fisheries_csv(read_text_file(path));
}

}  // namespace fishcast
