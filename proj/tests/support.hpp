// Copyright 2026 The portscope Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Fixture loading shared by the test binaries.

#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "portscope/portscope.hpp"

namespace portscope::testing {

inline std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing fixture " + path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

inline std::string kernel_path(const std::string& name) {
  return std::string(PORTSCOPE_KERNEL_DIR) + "/" + name + ".s";
}

inline std::string data_path(const std::string& name) {
  return std::string(PORTSCOPE_DATA_DIR) + "/" + name;
}

inline const ModelDatabase& shipped(const std::string& arch) {
  static const ModelDatabase skl = load_model(std::string(PORTSCOPE_MODEL_DIR) + "/skl.model");
  static const ModelDatabase zen = load_model(std::string(PORTSCOPE_MODEL_DIR) + "/zen.model");
  return arch == "zen" ? zen : skl;
}

inline MarkedKernel fixture_kernel(const std::string& name) {
  auto path = kernel_path(name);
  return extract_marked_kernel(slurp(path), path);
}

inline Rational R(std::int64_t n, std::int64_t d = 1) { return Rational(n, d); }

// Parses "1.25,0,2" style lists of decimals into rationals.
inline std::vector<Rational> vec(const std::string& text) {
  std::vector<Rational> out;
  std::stringstream s(text);
  for (std::string item; std::getline(s, item, ',');) out.push_back(*parse_rational(item));
  return out;
}

}  // namespace portscope::testing
