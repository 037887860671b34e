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

// Brute-force reference for one leaf-wise tree: every midpoint between
// distinct values of every feature is tried on every leaf, and the leaf with
// the largest gain splits next. Ties go to the lowest feature, then the lowest
// threshold, then the earliest leaf.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <span>
#include <vector>

#include "fishcast/gbm.hpp"

namespace fishcast::test {

struct OracleSplit {
  double gain = -1.0;
  double scale = 0.0;
  std::size_t feature = 0;
  double threshold = 0.0;

  bool valid() const { return gain > kMinSplitGain; }
  bool beaten_by(const OracleSplit& o) const {
    if (gain < 0) return o.gain > 0;
    return o.gain > gain + 1e-10 * std::max(scale, o.scale);
  }
};

using RowSet = std::vector<std::size_t>;

struct OracleTree {
  std::vector<RowSet> leaves;
  std::map<RowSet, OracleSplit> splits;  // parent rows -> split taken
};

inline OracleSplit oracle_best_split(const FeatureMatrix& x, std::span<const double> g, std::span<const double> h,
                                     const RowSet& rows, const GbmConfig& cfg, std::size_t depth) {
  OracleSplit best;
  if (cfg.max_depth != 0 && depth >= cfg.max_depth) return best;
  double G = 0, H = 0;
  for (auto r : rows) {
    G += g[r];
    H += h[r];
  }
  for (std::size_t f = 0; f < x.cols; ++f) {
    std::set<double> distinct;
    for (auto r : rows) distinct.insert(x.at(r, f));
    const std::vector<double> vals(distinct.begin(), distinct.end());
    for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
      const double thr = 0.5 * (vals[i] + vals[i + 1]);
      double GL = 0, HL = 0;
      std::size_t nl = 0;
      for (auto r : rows) {
        if (x.at(r, f) <= thr) {
          GL += g[r];
          HL += h[r];
          ++nl;
        }
      }
      const double GR = G - GL, HR = H - HL;
      const std::size_t nr = rows.size() - nl;
      if (nl < cfg.min_leaf_count || nr < cfg.min_leaf_count) continue;
      if (HL < cfg.min_leaf_hessian || HR < cfg.min_leaf_hessian) continue;
      OracleSplit cand;
      cand.scale = GL * GL / HL + GR * GR / HR;
      cand.gain = cand.scale - G * G / H;
      cand.feature = f;
      cand.threshold = thr;
      if (best.beaten_by(cand)) best = cand;
    }
  }
  return best;
}

inline OracleTree oracle_tree(const FeatureMatrix& x, std::span<const double> g, std::span<const double> h,
                              const GbmConfig& cfg) {
  OracleTree t;
  RowSet all(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) all[i] = i;
  t.leaves.push_back(all);
  std::vector<std::size_t> depth{0};
  std::vector<OracleSplit> best{oracle_best_split(x, g, h, all, cfg, 0)};
  while (t.leaves.size() < cfg.num_leaves) {
    std::size_t pick = t.leaves.size();
    for (std::size_t l = 0; l < t.leaves.size(); ++l) {
      if (!best[l].valid()) continue;
      if (pick == t.leaves.size() || best[pick].beaten_by(best[l])) pick = l;
    }
    if (pick == t.leaves.size()) break;
    const OracleSplit s = best[pick];
    RowSet left, right;
    for (auto r : t.leaves[pick]) (x.at(r, s.feature) <= s.threshold ? left : right).push_back(r);
    t.splits[t.leaves[pick]] = s;
    const std::size_t d = depth[pick] + 1;
    t.leaves[pick] = left;
    depth[pick] = d;
    best[pick] = oracle_best_split(x, g, h, left, cfg, d);
    t.leaves.push_back(right);
    depth.push_back(d);
    best.push_back(oracle_best_split(x, g, h, right, cfg, d));
  }
  return t;
}

struct TreeComparison {
  bool same_structure = true;     // every split matches in feature and row partition
  double max_leaf_error = 0.0;    // |leaf value - (-G/H)| over all leaves
  std::size_t splits_checked = 0;
};

// Routes every row through `tree` and checks each internal node against the
// oracle split of the same row set.
inline TreeComparison compare_tree(const Tree& tree, const OracleTree& oracle, const FeatureMatrix& x,
                                   std::span<const double> g, std::span<const double> h) {
  TreeComparison out;
  std::vector<RowSet> rows_at(tree.nodes.size());
  for (std::size_t r = 0; r < x.rows; ++r) {
    std::size_t node = 0;
    rows_at[0].push_back(r);
    while (!tree.nodes[node].is_leaf()) {
      const auto& n = tree.nodes[node];
      const double v = x.at(r, static_cast<std::size_t>(n.feature));
      node = static_cast<std::size_t>(!(v > n.threshold) ? n.left : n.right);
      rows_at[node].push_back(r);
    }
  }
  std::size_t leaves = 0;
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& n = tree.nodes[i];
    if (n.is_leaf()) {
      ++leaves;
      double G = 0, H = 0;
      for (auto r : rows_at[i]) {
        G += g[r];
        H += h[r];
      }
      out.max_leaf_error = std::max(out.max_leaf_error, std::abs(n.leaf_value + G / H));
      if (oracle.splits.count(rows_at[i])) out.same_structure = false;  // oracle split this set further
      continue;
    }
    const auto it = oracle.splits.find(rows_at[i]);
    ++out.splits_checked;
    if (it == oracle.splits.end() || it->second.feature != static_cast<std::size_t>(n.feature)) {
      out.same_structure = false;
      continue;
    }
    // Bin bounds are global midpoints and the oracle's are local to the
    // leaf; both must cut the leaf's rows at the same place.
    for (auto r : rows_at[i]) {
      const double v = x.at(r, it->second.feature);
      if ((v <= it->second.threshold) != (v <= n.threshold)) out.same_structure = false;
    }
  }
  if (leaves != oracle.leaves.size()) out.same_structure = false;
  return out;
}

}  // namespace fishcast::test
