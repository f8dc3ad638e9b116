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

#pragma once

// Shared vocabulary: error types, covariate/method tags and the small
// numeric helpers every module uses.

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

namespace drsim {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class RankDeficient : public Error {
 public:
  using Error::Error;
};

class DegenerateReplicate : public Error {
 public:
  using Error::Error;
};

enum class CovariateSet { kZ, kX };
enum class PsMethod { kNone, kLogistic, kRobit1, kGbm };
enum class Scheme { kNone, kPop, kNr };

inline std::string_view to_string(CovariateSet c) {
  return c == CovariateSet::kZ ? "z" : "x";
}

inline std::string_view to_string(PsMethod m) {
  switch (m) {
    case PsMethod::kLogistic: return "logistic";
    case PsMethod::kRobit1: return "robit";
    case PsMethod::kGbm: return "gbm";
    case PsMethod::kNone: break;
  }
  return "none";
}

inline std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::kPop: return "pop";
    case Scheme::kNr: return "nr";
    case Scheme::kNone: break;
  }
  return "none";
}

// Logistic function, evaluated without overflow for large |eta|.
inline double expit(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

// Probabilities produced by link functions are kept inside this band.
inline constexpr double kProbFloor = 1e-12;

inline double clamp_probability(double p) {
  if (p < kProbFloor) return kProbFloor;
  if (p > 1.0 - kProbFloor) return 1.0 - kProbFloor;
  return p;
}

}  // namespace drsim
