// Copyright 2026, The radfed Authors
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

#include <string>
#include <string_view>
#include <vector>

namespace radfed {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// Inverse of format_double; also accepts "nan", "inf", "-inf".
double parse_double(std::string_view text);

/// Splits on commas. Fields never contain commas or quotes in our files.
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace radfed
