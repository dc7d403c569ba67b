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

#include "drlab/core.h"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace drlab {

Vocabulary::Vocabulary(int num_labels) : num_labels_(num_labels) {
  if (num_labels < 1) {
    throw std::invalid_argument("vocabulary needs at least one label");
  }
}

LogProb log_add(LogProb a, LogProb b) {
  if (is_log_zero(a)) return b;
  if (is_log_zero(b)) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

LogProb log_sum(std::span<const LogProb> xs) {
  LogProb mx = kLogZero;
  for (LogProb x : xs) mx = std::max(mx, x);
  if (is_log_zero(mx)) return kLogZero;
  if (std::isinf(mx)) return mx;
  double acc = 0.0;
  for (LogProb x : xs) acc += std::exp(x - mx);
  return mx + std::log(acc);
}

std::string_view domain_name(Domain d) {
  return d == Domain::kSource ? "source" : "target";
}

Domain parse_domain(std::string_view name) {
  if (name == "source" || name == "psi") return Domain::kSource;
  if (name == "target" || name == "tau") return Domain::kTarget;
  throw ConfigError("unknown domain '" + std::string(name) + "'");
}

int Alignment::num_frames() const {
  return static_cast<int>(
      std::count_if(symbols.begin(), symbols.end(),
                    [](Symbol s) { return s.is_blank(); }));
}

LabelSeq Alignment::labels() const {
  LabelSeq out;
  for (Symbol s : symbols) {
    if (!s.is_blank()) out.push_back(s);
  }
  return out;
}

void validate_alignment(const Alignment& a, int num_frames) {
  if (a.symbols.size() != a.times.size()) {
    throw std::invalid_argument("alignment: symbols/times length mismatch");
  }
  if (a.symbols.empty() || !a.symbols.back().is_blank()) {
    throw std::invalid_argument("alignment: must end with a blank");
  }
  if (a.num_frames() != num_frames) {
    throw std::invalid_argument("alignment: blank count must equal T");
  }
  int expected = 1;
  for (std::size_t i = 0; i < a.symbols.size(); ++i) {
    if (a.times[i] != expected) {
      throw std::invalid_argument("alignment: time index out of sequence");
    }
    if (a.times[i] < 1 || a.times[i] > num_frames) {
      throw std::invalid_argument("alignment: time outside [1, T]");
    }
    if (a.symbols[i].is_blank()) ++expected;
  }
}

boost::multiprecision::cpp_int count_alignments(int num_frames,
                                                int num_labels) {
  if (num_frames < 1 || num_labels < 0) {
    throw std::invalid_argument("count_alignments: need T >= 1, U >= 0");
  }
  // C(T+U-1, U), built incrementally so every partial product is exact.
  boost::multiprecision::cpp_int c = 1;
  for (int i = 1; i <= num_labels; ++i) {
    c *= (num_frames - 1 + i);
    c /= i;
  }
  return c;
}

std::vector<int> parse_ints(std::string_view text) {
  std::vector<int> out;
  std::istringstream in{std::string(text)};
  std::string tok;
  while (in >> tok) {
    std::size_t pos = 0;
    int v = 0;
    try {
      v = std::stoi(tok, &pos);
    } catch (const std::exception&) {
      throw DataError("not an integer id: '" + tok + "'");
    }
    if (pos != tok.size()) throw DataError("not an integer id: '" + tok + "'");
    out.push_back(v);
  }
  return out;
}

LabelSeq parse_labels(std::string_view text) {
  LabelSeq out;
  for (int v : parse_ints(text)) out.push_back(Symbol{v});
  return out;
}

std::string format_ints(std::span<const int> ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(ids[i]);
  }
  return out;
}

std::string format_labels(std::span<const Symbol> labels) {
  std::string out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(labels[i].id);
  }
  return out;
}

LabelSeq to_labels(std::initializer_list<int> ids) {
  LabelSeq out;
  for (int v : ids) out.push_back(Symbol{v});
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose,
                          std::uint64_t index) {
  // FNV-1a over the purpose tag.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : purpose) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(seed ^ h) + index);
}

std::uint64_t Rng::next_u64() {
  state_ += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

int Rng::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) {
    throw std::invalid_argument("categorical: weights sum to zero");
  }
  double u = uniform() * total;
  int last_positive = -1;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last_positive = static_cast<int>(i);
    if (u < weights[i]) return last_positive;
    u -= weights[i];
  }
  return last_positive;  // rounding tail
}

}  // namespace drlab
