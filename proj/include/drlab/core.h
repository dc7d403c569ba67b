// Copyright 2026 The drlab Authors.
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

#include <compare>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace drlab {

// Errors. The CLI maps ConfigError to exit code 2, DataError to 3 and
// everything else to 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

/// Index into a Vocabulary. Id 0 is the blank; labels are 1..V.
struct Symbol {
  int id = 0;

  static constexpr Symbol blank() { return Symbol{0}; }
  constexpr bool is_blank() const { return id == 0; }

  friend constexpr auto operator<=>(Symbol, Symbol) = default;
};

using LabelSeq = std::vector<Symbol>;
using Frames = std::vector<int>;  // discrete observation ids, x_1..x_T

/// Closed label inventory of V non-blank labels plus one blank.
class Vocabulary {
 public:
  explicit Vocabulary(int num_labels);

  int num_labels() const { return num_labels_; }
  int size() const { return num_labels_ + 1; }  // blank included
  bool contains(Symbol s) const { return s.id >= 0 && s.id <= num_labels_; }
  bool is_label(Symbol s) const { return s.id >= 1 && s.id <= num_labels_; }

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;

 private:
  int num_labels_;
};

// Log-domain probabilities. Probability zero is -infinity, never NaN.
using LogProb = double;
inline constexpr LogProb kLogZero = -std::numeric_limits<double>::infinity();
inline constexpr LogProb kLogOne = 0.0;

inline bool is_log_zero(LogProb x) { return x == kLogZero; }

/// log(exp(a) + exp(b)) with the max factored out.
LogProb log_add(LogProb a, LogProb b);

/// Stable log-sum-exp over a range; empty range gives kLogZero.
LogProb log_sum(std::span<const LogProb> xs);

/// Product in the log domain; -inf is absorbing even against +inf.
inline LogProb log_mul(LogProb a, LogProb b) {
  if (is_log_zero(a) || is_log_zero(b)) return kLogZero;
  return a + b;
}

enum class Domain { kSource, kTarget };

std::string_view domain_name(Domain d);
Domain parse_domain(std::string_view name);

/// Expanded RNN-T path: symbols with the 1-based frame each one is attached
/// to. A blank is attached to the frame it consumes; a label is attached to
/// the next frame to be consumed. Consequently times[i+1] == times[i] + 1
/// exactly when symbols[i] is blank, and the path ends on the blank that
/// consumes frame T.
struct Alignment {
  std::vector<Symbol> symbols;
  std::vector<int> times;

  int num_frames() const;
  LabelSeq labels() const;
};

/// Throws std::invalid_argument naming the violated invariant.
void validate_alignment(const Alignment& a, int num_frames);

struct Utterance {
  Frames frames;
  LabelSeq transcript;
  Domain domain = Domain::kSource;
};

/// Number of interleavings of T blanks and U labels ending in a blank,
/// i.e. binomial(T+U-1, U).
boost::multiprecision::cpp_int count_alignments(int num_frames,
                                                int num_labels);

// Text helpers for space-separated id sequences.
LabelSeq parse_labels(std::string_view text);
std::vector<int> parse_ints(std::string_view text);
std::string format_labels(std::span<const Symbol> labels);
std::string format_ints(std::span<const int> ids);

/// Convenience for tests and literals: to_labels({1, 2, 3}).
LabelSeq to_labels(std::initializer_list<int> ids);

// Deterministic randomness. Every experiment derives its streams from a
// single 64-bit seed; derive_seed(seed, purpose, index) mixes the three with
// splitmix64 so that streams for different purposes never share state.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose,
                          std::uint64_t index);

/// Portable pseudo-random stream (splitmix64 sequence). Unlike the
/// std::*_distribution family its outputs are identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Index drawn from unnormalized non-negative weights.
  int categorical(std::span<const double> weights);

 private:
  std::uint64_t state_;
};

}  // namespace drlab
