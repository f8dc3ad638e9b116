// Copyright 2026 The drsim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <iostream>
#include <string>
#include <vector>

#include "drsim/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  drsim::Invocation inv;
  try {
    inv = drsim::parse_config(args);
  } catch (const drsim::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n' << drsim::usage();
    return 1;
  }
  if (inv.help) {
    std::cout << drsim::usage();
    return 0;
  }
  try {
    return drsim::run(inv);
  } catch (const drsim::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n' << drsim::usage();
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
