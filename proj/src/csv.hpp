// Copyright 2026 The wvalab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <charconv>
#include <string>

#include "wvalab/error.hpp"

namespace wvalab::detail {

/// Shortest round-trip decimal form, independent of the global locale.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string &s) {
    double v = 0.0;
    const char *first = s.data();
    while (first != s.data() + s.size() && (*first == ' ' || *first == '+')) {
        ++first;
    }
    const char *last = s.data() + s.size();
    while (last != first && (last[-1] == ' ' || last[-1] == '\r')) {
        --last;
    }
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last || first == last) {
        fail(ErrorCode::ConfigError, "not a number: '" + s + "'");
    }
    return v;
}

}  // namespace wvalab::detail
