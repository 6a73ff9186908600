// Copyright 2026 The doublemeas Authors
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

#include <functional>
#include <iostream>
#include <string>

namespace doublemeas {

// Non-fatal numerical diagnostics (clamped variances, backend fallbacks).
// The default sink writes to stderr; tests and batch drivers may silence it.
inline std::function<void(const std::string&)>& warning_sink() {
  static std::function<void(const std::string&)> sink = [](const std::string& m) {
    std::cerr << "warning: " << m << '\n';
  };
  return sink;
}

inline std::size_t& warning_count() {
  static std::size_t n = 0;
  return n;
}

inline void warn(const std::string& message) {
  ++warning_count();
  if (warning_sink()) warning_sink()(message);
}

}  // namespace doublemeas
