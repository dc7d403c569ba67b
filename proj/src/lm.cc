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

#include "drlab/lm.h"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace drlab {

namespace {

void check_label(const Vocabulary& vocab, Symbol s) {
  if (s.is_blank()) {
    throw std::invalid_argument("LM has no blank in support");
  }
  if (!vocab.is_label(s)) {
    throw std::invalid_argument("label id " + std::to_string(s.id) +
                                " outside vocabulary");
  }
}

void check_history(const Vocabulary& vocab, std::span<const Symbol> history) {
  for (Symbol s : history) check_label(vocab, s);
}

}  // namespace

LogProb LanguageModel::sequence_log_prob(
    std::span<const Symbol> labels) const {
  LogProb total = kLogOne;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    total = log_mul(total, log_prob(labels[i], labels.subspan(0, i)));
  }
  return log_mul(total, eos_log_prob(labels));
}

// NGramLM ---------------------------------------------------------------

NGramLM::NGramLM(int order, Vocabulary vocab, double add_k)
    : order_(order), vocab_(vocab), add_k_(add_k) {
  if (order < 1) throw std::invalid_argument("n-gram order must be >= 1");
  if (!(add_k >= 0.0) || !std::isfinite(add_k)) {
    throw std::invalid_argument("add_k must be a finite value >= 0");
  }
}

std::vector<int> NGramLM::history_key(std::span<const Symbol> history) const {
  const std::size_t n = static_cast<std::size_t>(order_ - 1);
  std::vector<int> key(n, kBoundaryId);
  const std::size_t take = std::min(n, history.size());
  for (std::size_t i = 0; i < take; ++i) {
    key[n - take + i] = history[history.size() - take + i].id;
  }
  return key;
}

int NGramLM::event_index(int event) const {
  if (event == kEosId) return vocab_.num_labels();
  if (event >= 1 && event <= vocab_.num_labels()) return event - 1;
  throw std::invalid_argument("bad n-gram event id " + std::to_string(event));
}

void NGramLM::add_transcript(std::span<const Symbol> transcript) {
  check_history(vocab_, transcript);
  const std::size_t events = static_cast<std::size_t>(vocab_.size());
  for (std::size_t i = 0; i <= transcript.size(); ++i) {
    auto& row = counts_[history_key(transcript.subspan(0, i))];
    if (row.empty()) row.assign(events, 0);
    const int idx = i < transcript.size() ? transcript[i].id - 1
                                          : vocab_.num_labels();
    ++row[static_cast<std::size_t>(idx)];
  }
}

std::uint64_t NGramLM::count(const std::vector<int>& history_key,
                             int event) const {
  auto it = counts_.find(history_key);
  if (it == counts_.end()) return 0;
  return it->second[static_cast<std::size_t>(event_index(event))];
}

LogProb NGramLM::conditional(std::span<const Symbol> history,
                             int event_index) const {
  const double num_events = vocab_.size();
  double c = 0.0;
  double total = 0.0;
  if (auto it = counts_.find(history_key(history)); it != counts_.end()) {
    c = static_cast<double>(it->second[static_cast<std::size_t>(event_index)]);
    for (std::uint64_t v : it->second) total += static_cast<double>(v);
  }
  const double denom = total + add_k_ * num_events;
  if (denom == 0.0) return -std::log(num_events);
  const double num = c + add_k_;
  if (num == 0.0) return kLogZero;
  return std::log(num / denom);
}

LogProb NGramLM::log_prob(Symbol next, std::span<const Symbol> history) const {
  check_label(vocab_, next);
  check_history(vocab_, history);
  return conditional(history, next.id - 1);
}

LogProb NGramLM::eos_log_prob(std::span<const Symbol> history) const {
  check_history(vocab_, history);
  return conditional(history, vocab_.num_labels());
}

void NGramLM::save(std::ostream& out) const {
  out << "ngram " << order_ << ' ' << vocab_.num_labels() << ' '
      << std::setprecision(17) << add_k_ << '\n';
  for (const auto& [key, row] : counts_) {
    for (std::size_t e = 0; e < row.size(); ++e) {
      if (row[e] == 0) continue;
      for (int h : key) out << h << ' ';
      const int event = e + 1 == row.size() ? kEosId : static_cast<int>(e) + 1;
      out << event << ' ' << row[e] << '\n';
    }
  }
}

NGramLM NGramLM::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty n-gram file");
  std::istringstream header(line);
  std::string tag;
  int order = 0;
  int num_labels = 0;
  std::string add_k_text;
  if (!(header >> tag >> order >> num_labels >> add_k_text) ||
      tag != "ngram" || order < 1 || num_labels < 1) {
    throw DataError("corrupted n-gram header: '" + line + "'");
  }
  double add_k = 0.0;
  try {
    add_k = std::stod(add_k_text);
  } catch (const std::exception&) {
    throw DataError("corrupted n-gram header: '" + line + "'");
  }
  NGramLM lm(order, Vocabulary(num_labels), add_k);
  const std::size_t events = static_cast<std::size_t>(num_labels + 1);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<int> ids;
    std::istringstream fields(line);
    long long v = 0;
    while (fields >> v) ids.push_back(static_cast<int>(v));
    if (!fields.eof() || ids.size() != static_cast<std::size_t>(order + 1) ||
        ids.back() < 0) {
      throw DataError("malformed n-gram line " + std::to_string(lineno));
    }
    std::vector<int> key(ids.begin(), ids.begin() + (order - 1));
    for (int h : key) {
      if (h != kBoundaryId && (h < 1 || h > num_labels)) {
        throw DataError("bad history id on line " + std::to_string(lineno));
      }
    }
    int idx = 0;
    try {
      idx = lm.event_index(ids[static_cast<std::size_t>(order - 1)]);
    } catch (const std::invalid_argument&) {
      throw DataError("bad event id on line " + std::to_string(lineno));
    }
    auto& row = lm.counts_[key];
    if (row.empty()) row.assign(events, 0);
    row[static_cast<std::size_t>(idx)] =
        static_cast<std::uint64_t>(ids.back());
  }
  return lm;
}

bool operator==(const NGramLM& a, const NGramLM& b) {
  return a.order_ == b.order_ && a.vocab_ == b.vocab_ &&
         a.add_k_ == b.add_k_ && a.counts_ == b.counts_;
}

NGramLM train_ngram(std::span<const LabelSeq> corpus, int order, double add_k,
                    const Vocabulary& vocab) {
  if (corpus.empty()) throw DataError("empty training corpus");
  NGramLM lm(order, vocab, add_k);
  for (const LabelSeq& w : corpus) lm.add_transcript(w);
  return lm;
}

NGramLM load_ngram_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open LM file " + path);
  return NGramLM::load(in);
}

void save_ngram_file(const NGramLM& lm, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write LM file " + path);
  lm.save(out);
  if (!out) throw ConfigError("write failed for " + path);
}

// TableLM ---------------------------------------------------------------

TableLM::TableLM(Vocabulary vocab, std::map<LabelSeq, double> table)
    : vocab_(vocab), table_(std::move(table)) {
  double total = 0.0;
  for (const auto& [w, p] : table_) {
    check_history(vocab_, w);
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw std::invalid_argument("table LM probability must be >= 0");
    }
    total += p;
    max_length_ = std::max(max_length_, static_cast<int>(w.size()));
    for (std::size_t i = 0; i <= w.size(); ++i) {
      prefix_mass_[LabelSeq(w.begin(), w.begin() + i)] += p;
    }
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument("table LM probabilities sum to " +
                                std::to_string(total));
  }
}

double TableLM::prefix_mass(std::span<const Symbol> prefix) const {
  auto it = prefix_mass_.find(LabelSeq(prefix.begin(), prefix.end()));
  return it == prefix_mass_.end() ? 0.0 : it->second;
}

double TableLM::probability(const LabelSeq& w) const {
  auto it = table_.find(w);
  return it == table_.end() ? 0.0 : it->second;
}

LogProb TableLM::log_prob(Symbol next, std::span<const Symbol> history) const {
  check_label(vocab_, next);
  check_history(vocab_, history);
  const double denom = prefix_mass(history);
  if (denom == 0.0) return -std::log(static_cast<double>(vocab_.size()));
  LabelSeq extended(history.begin(), history.end());
  extended.push_back(next);
  const double num = prefix_mass(extended);
  return num == 0.0 ? kLogZero : std::log(num / denom);
}

LogProb TableLM::eos_log_prob(std::span<const Symbol> history) const {
  check_history(vocab_, history);
  const double denom = prefix_mass(history);
  if (denom == 0.0) return -std::log(static_cast<double>(vocab_.size()));
  const double num = probability(LabelSeq(history.begin(), history.end()));
  return num == 0.0 ? kLogZero : std::log(num / denom);
}

LogProb TableLM::sequence_log_prob(std::span<const Symbol> labels) const {
  check_history(vocab_, labels);
  const double p = probability(LabelSeq(labels.begin(), labels.end()));
  return p == 0.0 ? kLogZero : std::log(p);
}

// Perplexity ------------------------------------------------------------

PerplexityResult perplexity(const LanguageModel& lm,
                            std::span<const LabelSeq> corpus) {
  if (corpus.empty()) throw DataError("empty evaluation corpus");
  PerplexityResult r;
  for (std::size_t u = 0; u < corpus.size(); ++u) {
    const LabelSeq& w = corpus[u];
    for (std::size_t i = 0; i <= w.size(); ++i) {
      const auto history = std::span<const Symbol>(w).subspan(0, i);
      const LogProb lp = i < w.size() ? lm.log_prob(w[i], history)
                                      : lm.eos_log_prob(history);
      ++r.num_tokens;
      if (is_log_zero(lp)) {
        if (!r.diagnostic) {
          r.diagnostic = "zero probability at utterance " + std::to_string(u) +
                         ", position " + std::to_string(i) + ": event " +
                         (i < w.size() ? std::to_string(w[i].id)
                                       : std::string("EOS")) +
                         " after history [" + format_labels(history) + "]";
        }
        r.total_log_prob = kLogZero;
      } else if (!r.diagnostic) {
        r.total_log_prob += lp;
      }
    }
  }
  r.perplexity = r.diagnostic
                     ? std::numeric_limits<double>::infinity()
                     : std::exp(-r.total_log_prob /
                                static_cast<double>(r.num_tokens));
  return r;
}

}  // namespace drlab
