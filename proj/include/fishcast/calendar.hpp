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

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

namespace fishcast {

using Date = std::chrono::sys_days;

std::int64_t epoch_day(Date d);
Date date_from_epoch_day(std::int64_t day);

// Strict YYYY-MM-DD. Throws std::invalid_argument.
Date parse_iso_date(std::string_view text);
std::string format_iso_date(Date d);

// 1 for January 1st.
int day_of_year(Date d);
// 1..12
int month_of(Date d);

}  // namespace fishcast
