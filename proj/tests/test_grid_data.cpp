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
#include <cstring>
#include <fstream>
#include <iterator>
#include <queue>
#include <random>

#include "fishcast/calendar.hpp"
#include "fishcast/errors.hpp"
#include "fishcast/grid_data.hpp"
#include "test_util.hpp"

using namespace fishcast;

namespace {

const Date kStart = Date{std::chrono::year{2006} / 1 / 1};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

TemperatureGridSeries random_series(std::size_t days, std::size_t rows, std::size_t cols, std::uint64_t seed,
                                    std::vector<std::size_t> land = {}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-2.0f, 25.0f);
  std::vector<double> v(days * rows * cols);
  for (auto& x : v) x = u(rng);
  for (std::size_t t = 0; t < days; ++t)
    for (std::size_t c : land) v[t * rows * cols + c] = kNonValue;
  return TemperatureGridSeries(days, GridShape{rows, cols}, std::move(v), kStart);
}

NormalizedStack flat_stack(std::size_t days) {
  NormalizedStack s;
  s.days = days;
  s.shape = GridShape{1, 1};
  s.start_date = kStart;
  s.values.resize(days);
  for (std::size_t t = 0; t < days; ++t) s.values[t] = static_cast<double>(t);
  return s;
}

}  // namespace

TEST_CASE("calendar helpers") {
  CHECK(format_iso_date(parse_iso_date("2019-03-01")) == "2019-03-01");
  CHECK(day_of_year(parse_iso_date("2021-01-01")) == 1);
  CHECK(day_of_year(parse_iso_date("2020-12-31")) == 366);
  CHECK(month_of(parse_iso_date("2020-12-31")) == 12);
  CHECK(epoch_day(parse_iso_date("1970-01-02")) == 1);
  CHECK(date_from_epoch_day(epoch_day(kStart)) == kStart);
  CHECK_THROWS_AS(parse_iso_date("2020-13-01"), std::invalid_argument);
  CHECK_THROWS_AS(parse_iso_date("2020-2-01"), std::invalid_argument);
  CHECK_THROWS_AS(parse_iso_date("2021-02-29"), std::invalid_argument);
}

TEST_CASE("BTG1 round trip is bit exact") {
  test::TempDir dir("btg");
  const auto series = random_series(5, 3, 4, 1, {0, 7});
  write_grid_series(series, dir / "a.btg");
  const auto back = read_grid_series(dir / "a.btg");
  CHECK(back == series);
  CHECK(back.land_mask() == series.land_mask());
  CHECK(back.start_date() == kStart);
  CHECK(back.bounds() == series.bounds());
}

TEST_CASE("BTG1 payload layout") {
  test::TempDir dir("btg");
  SUBCASE("single sea cell stores one little-endian float32") {
    const TemperatureGridSeries s(1, GridShape{1, 1}, {10.0}, kStart);
    write_grid_series(s, dir / "one.btg");
    const auto bytes = slurp(dir / "one.btg");
    REQUIRE(bytes.size() == 4 + 4 * 4 + 4 * 8 + 4);
    CHECK(bytes.substr(0, 4) == "BTG1");
    const unsigned char expect[4] = {0x00, 0x00, 0x20, 0x41};  // 10.0f
    CHECK(std::memcmp(bytes.data() + bytes.size() - 4, expect, 4) == 0);
  }
  SUBCASE("all-land series stores NaN everywhere") {
    const TemperatureGridSeries s(2, GridShape{2, 2}, std::vector<double>(8, kNonValue), kStart);
    CHECK(s.land_mask().sea_count() == 0);
    write_grid_series(s, dir / "land.btg");
    const auto bytes = slurp(dir / "land.btg");
    for (std::size_t i = 0; i < 8; ++i) {
      float f = 0.0f;
      std::memcpy(&f, bytes.data() + 52 + 4 * i, 4);
      CHECK(std::isnan(f));
    }
  }
}

TEST_CASE("BTG1 malformed files") {
  test::TempDir dir("btg");
  const auto series = random_series(2, 2, 2, 3);
  write_grid_series(series, dir / "ok.btg");
  const auto good = slurp(dir / "ok.btg");

  SUBCASE("T = 0") {
    std::string bad = good.substr(0, 52);
    std::memset(bad.data() + 4, 0, 4);
    spit(dir / "t0.btg", bad);
    CHECK_THROWS_AS(read_grid_series(dir / "t0.btg"), FormatError);
  }
  SUBCASE("bad magic") {
    std::string bad = good;
    bad[3] = '2';
    spit(dir / "magic.btg", bad);
    CHECK_THROWS_AS(read_grid_series(dir / "magic.btg"), FormatError);
  }
  SUBCASE("truncated payload") {
    spit(dir / "short.btg", good.substr(0, good.size() - 1));
    CHECK_THROWS_AS(read_grid_series(dir / "short.btg"), FormatError);
  }
  SUBCASE("trailing bytes") {
    spit(dir / "long.btg", good + "x");
    CHECK_THROWS_AS(read_grid_series(dir / "long.btg"), FormatError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(read_grid_series(dir / "nope.btg"), IoError); }
}

TEST_CASE("land mask from frame 0") {
  const auto s = random_series(2, 2, 2, 5, {3});
  CHECK(s.land_mask().is_land(1, 1));
  CHECK(s.land_mask().sea_count() == 3);
  std::vector<double> v(s.values().begin(), s.values().end());
  v[4 + 2] = kNonValue;  // land only in frame 1
  CHECK_THROWS_AS(TemperatureGridSeries(2, GridShape{2, 2}, v, kStart), InconsistentMaskError);
}

TEST_CASE("norm stats") {
  SUBCASE("two-point statistics") {
    const TemperatureGridSeries s(2, GridShape{1, 2}, {1.0, kNonValue, 3.0, kNonValue}, kStart);
    const auto stats = compute_norm_stats(s, SplitIndex{{0, 2}, {2, 2}, {2, 2}});
    CHECK(stats.mean == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(stats.std == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(stats.land_fill == -5.0);
  }
  SUBCASE("constant field is degenerate") {
    const TemperatureGridSeries s(3, GridShape{2, 2}, std::vector<double>(12, 4.0), kStart);
    CHECK_THROWS_AS(compute_norm_stats(s, SplitIndex{{0, 2}, {2, 3}, {3, 3}}), DegenerateDataError);
  }
  SUBCASE("matches a streaming Welford recomputation") {
    SynthConfig cfg;
    cfg.days = 200;
    const auto s = synth_series(cfg, 9);
    const auto split = chronological_split(s, 0.6, 0.8);
    const auto stats = compute_norm_stats(s, split);
    double mean = 0.0, m2 = 0.0;
    std::size_t n = 0;
    for (std::size_t t = split.train.begin; t < split.train.end; ++t) {
      for (double x : s.frame(t)) {
        if (std::isnan(x)) continue;
        ++n;
        const double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
      }
    }
    CHECK(std::abs(stats.mean - mean) < 1e-10);
    CHECK(std::abs(stats.std - std::sqrt(m2 / static_cast<double>(n))) < 1e-10);
  }
  SUBCASE("ignores values outside the training range") {
    auto s = random_series(10, 3, 3, 4, {0});
    const SplitIndex split{{0, 6}, {6, 8}, {8, 10}};
    const auto before = compute_norm_stats(s, split);
    std::vector<double> v(s.values().begin(), s.values().end());
    for (std::size_t i = 6 * 9; i < v.size(); ++i)
      if (!std::isnan(v[i])) v[i] += 100.0;
    const TemperatureGridSeries perturbed(10, GridShape{3, 3}, v, kStart);
    CHECK(compute_norm_stats(perturbed, split) == before);
  }
}

TEST_CASE("normalize and denormalize") {
  const TemperatureGridSeries s(1, GridShape{1, 3}, {2.0, kNonValue, 5.0}, kStart);
  const NormStats stats{2.0, 1.5, kLandFill};
  const auto stack = normalize(s, stats);
  CHECK(stack.values[0] == 0.0);
  CHECK(stack.values[1] == -5.0);
  CHECK(stack.values[2] == doctest::Approx(2.0));
  const auto back = denormalize(stack.values, stats, s.land_mask());
  CHECK(back[0] == 2.0);
  CHECK(std::isnan(back[1]));
  CHECK(std::abs(back[2] - 5.0) < 1e-9);

  const auto big = random_series(4, 5, 5, 8, {0, 1, 5});
  const auto st = compute_norm_stats(big, SplitIndex{{0, 4}, {4, 4}, {4, 4}});
  const auto round = denormalize(normalize(big, st).values, st, big.land_mask());
  for (std::size_t i = 0; i < round.size(); ++i) {
    if (std::isnan(big.values()[i])) CHECK(std::isnan(round[i]));
    else CHECK(std::abs(round[i] - big.values()[i]) < 1e-9);
  }
}

TEST_CASE("sequence windows") {
  CHECK(build_sequences(flat_stack(5295), 4, 4).size() == 5287);

  const auto seqs = build_sequences(flat_stack(10), 4, 4);
  REQUIRE(seqs.size() == 2);
  CHECK(seqs[0].history == std::vector<double>{0, 1, 2, 3});
  CHECK(seqs[0].target == std::vector<double>{4, 5, 6, 7});
  CHECK(seqs[1].history.front() == 1.0);

  CHECK_THROWS_AS(build_sequences(flat_stack(8), 4, 4), InsufficientDataError);

  // count = nb_R - (h + p), windows contiguous
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t h = 1 + rng() % 5, p = 1 + rng() % 5, n = h + p + 1 + rng() % 40;
    const auto all = build_sequences(flat_stack(n), h, p);
    REQUIRE(all.size() == n - (h + p));
    for (std::size_t i = 0; i < all.size(); ++i) {
      for (std::size_t j = 0; j < h; ++j) CHECK(all[i].history[j] == static_cast<double>(i + j));
      for (std::size_t j = 0; j < p; ++j) CHECK(all[i].target[j] == static_cast<double>(i + h + j));
      CHECK(all[i].first_date == kStart + std::chrono::days{i});
    }
  }
}

TEST_CASE("chronological split") {
  const Date start{std::chrono::year{2006} / 1 / 1};
  const std::size_t days = static_cast<std::size_t>((Date{std::chrono::year{2021} / 1 / 1} - start).count());
  const TemperatureGridSeries s(days, GridShape{1, 1}, std::vector<double>(days, 1.0), start);

  const auto split = chronological_split(s, Date{std::chrono::year{2019} / 1 / 1}, Date{std::chrono::year{2020} / 1 / 1});
  CHECK(split.train.begin == 0);
  CHECK(s.date_at(split.train.end - 1) == Date{std::chrono::year{2018} / 12 / 31});
  CHECK(s.date_at(split.val.begin) == Date{std::chrono::year{2019} / 1 / 1});
  CHECK(split.val.end == split.test.begin);
  CHECK(split.test.end == days);

  CHECK_THROWS(chronological_split(s, Date{std::chrono::year{2019} / 1 / 1}, Date{std::chrono::year{2022} / 1 / 1}));
  CHECK_THROWS_AS(chronological_split(s, 0.0, 0.5), InsufficientDataError);

  // windows straddling a boundary belong to no set
  const auto stack = flat_stack(30);
  const SplitIndex sp{{0, 12}, {12, 21}, {21, 30}};
  std::size_t assigned = 0;
  for (const IndexRange r : {sp.train, sp.val, sp.test}) {
    for (const auto& seq : build_sequences(stack, 2, 2, r)) {
      CHECK(r.contains(static_cast<std::size_t>(seq.history.front())));
      CHECK(r.contains(static_cast<std::size_t>(seq.target.back())));
      ++assigned;
    }
  }
  CHECK(assigned == (12 - 4) + (9 - 4) + (9 - 4));
}

TEST_CASE("synthetic series") {
  SynthConfig cfg;
  cfg.days = 120;
  const auto a = synth_series(cfg, 5);
  const auto b = synth_series(cfg, 5);
  CHECK(a == b);
  CHECK_FALSE(a == synth_series(cfg, 6));

  // constructor already enforces a static mask; check the blob shape
  const auto& mask = a.land_mask();
  const GridShape g = mask.shape();
  REQUIRE(mask.sea_count() > 0);
  REQUIRE(mask.sea_count() < g.cells());
  bool touches = false;
  std::size_t first = g.cells(), land = 0;
  for (std::size_t r = 0; r < g.rows; ++r)
    for (std::size_t c = 0; c < g.cols; ++c)
      if (mask.is_land(r, c)) {
        ++land;
        if (first == g.cells()) first = r * g.cols + c;
        if (r == 0 || c == 0 || r + 1 == g.rows || c + 1 == g.cols) touches = true;
      }
  CHECK(touches);
  // 4-connected flood fill reaches every land cell
  std::vector<char> seen(g.cells(), 0);
  std::queue<std::size_t> q;
  q.push(first);
  seen[first] = 1;
  std::size_t reached = 0;
  while (!q.empty()) {
    const std::size_t cell = q.front();
    q.pop();
    ++reached;
    const std::size_t r = cell / g.cols, c = cell % g.cols;
    const std::pair<long, long> nbrs[] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
    for (auto [dr, dc] : nbrs) {
      const long nr = static_cast<long>(r) + dr, nc = static_cast<long>(c) + dc;
      if (nr < 0 || nc < 0 || nr >= static_cast<long>(g.rows) || nc >= static_cast<long>(g.cols)) continue;
      const std::size_t n = static_cast<std::size_t>(nr) * g.cols + static_cast<std::size_t>(nc);
      if (mask.is_land(n) && !seen[n]) {
        seen[n] = 1;
        q.push(n);
      }
    }
  }
  CHECK(reached == land);

  SynthConfig tiny;
  tiny.days = 20;
  CHECK_THROWS_AS(synth_series(tiny, 1), std::invalid_argument);
}

TEST_CASE("synthetic series has annual memory") {
  SynthConfig cfg;
  cfg.days = 1500;
  cfg.rows = cfg.cols = 8;
  const auto s = synth_series(cfg, 21);
  const std::size_t lag = 365, cells = s.shape().cells();
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t c = 0; c < cells; ++c) {
    if (s.land_mask().is_land(c)) continue;
    const std::size_t n = s.days() - lag;
    double ma = 0.0, mb = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      ma += s.values()[t * cells + c];
      mb += s.values()[(t + lag) * cells + c];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double a = s.values()[t * cells + c] - ma, b = s.values()[(t + lag) * cells + c] - mb;
      sab += a * b;
      saa += a * a;
      sbb += b * b;
    }
    total += sab / std::sqrt(saa * sbb);
    ++counted;
  }
  CHECK(total / static_cast<double>(counted) > 0.5);
}
