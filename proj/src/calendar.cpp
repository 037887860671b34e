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

#include "fishcast/calendar.hpp"

#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace fishcast {

using namespace std::chrono;

std::int64_t epoch_day(Date d) { return d.time_since_epoch().count(); }

Date date_from_epoch_day(std::int64_t day) { return Date{days{day}}; }

namespace {

int parse_field(std::string_view text, std::size_t pos, std::size_t len) {
  int value = 0;
  const char* first = text.data() + pos;
  const char* last = first + len;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw std::invalid_argument("bad date: " + std::string(text));
  }
  return value;
}

}  // namespace

Date parse_iso_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw std::invalid_argument("bad date: " + std::string(text));
  }
  const year_month_day ymd{year{parse_field(text, 0, 4)},
                           month{static_cast<unsigned>(parse_field(text, 5, 2))},
                           day{static_cast<unsigned>(parse_field(text, 8, 2))}};
  if (!ymd.ok()) throw std::invalid_argument("bad date: " + std::string(text));
  return Date{ymd};
}

std::string format_iso_date(Date d) {
  const year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

int day_of_year(Date d) {
  const year_month_day ymd{d};
  const Date jan1{ymd.year() / January / 1};
  return static_cast<int>((d - jan1).count()) + 1;
}

int month_of(Date d) { return static_cast<int>(static_cast<unsigned>(year_month_day{d}.month())); }

}  // namespace fishcast
