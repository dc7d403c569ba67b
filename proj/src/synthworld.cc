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

#include "drlab/synthworld.h"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace drlab {

using nlohmann::json;

// AcousticChannel ----------------------------------------------------------

double AcousticChannel::frame_prob(int row, int obs) const {
  if (obs < 0 || obs >= obs_alphabet) return 0.0;
  return (1.0 - noise_floor) *
             emission[static_cast<std::size_t>(row)]
                     [static_cast<std::size_t>(obs)] +
         noise_floor / obs_alphabet;
}

void AcousticChannel::validate(int num_labels) const {
  const std::size_t rows = static_cast<std::size_t>(num_labels + 1);
  if (obs_alphabet < 1) throw ConfigError("obs_alphabet must be >= 1");
  if (max_duration < 1) throw ConfigError("d_max must be >= 1");
  if (!(noise_floor >= 0.0 && noise_floor <= 1.0)) {
    throw ConfigError("noise_floor must lie in [0, 1]");
  }
  if (emission.size() != rows || duration.size() != rows) {
    throw ConfigError("channel needs V+1 rows (silence first)");
  }
  auto check_row = [](const std::vector<double>& row, std::size_t width,
                      const char* what) {
    if (row.size() != width) {
      throw ConfigError(std::string(what) + " row has wrong width");
    }
    double total = 0.0;
    for (double p : row) {
      if (!(p >= 0.0)) throw ConfigError(std::string(what) + " negative");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw ConfigError(std::string(what) + " row does not sum to one");
    }
  };
  for (const auto& row : emission) {
    check_row(row, static_cast<std::size_t>(obs_alphabet), "emission");
  }
  for (const auto& row : duration) {
    check_row(row, static_cast<std::size_t>(max_duration), "duration");
  }
}

// SynthWorld ---------------------------------------------------------------

SynthWorld::SynthWorld(Vocabulary vocab, int l_max, AcousticChannel channel,
                       TableLM source_prior, TableLM target_prior,
                       std::uint64_t seed)
    : vocab_(vocab),
      l_max_(l_max),
      channel_(std::move(channel)),
      source_prior_(std::move(source_prior)),
      target_prior_(std::move(target_prior)),
      seed_(seed) {
  if (l_max < 0) throw ConfigError("l_max must be >= 0");
  channel_.validate(vocab.num_labels());
  for (const TableLM* prior : {&source_prior_, &target_prior_}) {
    if (!(prior->vocabulary() == vocab_)) {
      throw ConfigError("prior vocabulary differs from world vocabulary");
    }
    if (prior->max_length() > l_max) {
      throw ConfigError("prior has sequences longer than l_max");
    }
  }
}

int SynthWorld::max_frames() const {
  return std::max(1, l_max_) * channel_.max_duration;
}

std::vector<LabelSeq> all_label_sequences(int num_labels, int l_max) {
  std::vector<LabelSeq> out{LabelSeq{}};
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (static_cast<int>(out[i].size()) == l_max) continue;
    for (int s = 1; s <= num_labels; ++s) {
      LabelSeq w = out[i];
      w.push_back(Symbol{s});
      out.push_back(std::move(w));
    }
  }
  return out;
}

// Sampling -----------------------------------------------------------------

namespace {

void emit_segment(const AcousticChannel& ch, int row, Rng& rng, Frames& out) {
  const auto& dur = ch.duration[static_cast<std::size_t>(row)];
  const int d = rng.categorical(dur) + 1;
  const auto& emit = ch.emission[static_cast<std::size_t>(row)];
  for (int i = 0; i < d; ++i) {
    if (rng.uniform() < ch.noise_floor) {
      out.push_back(static_cast<int>(rng.uniform() * ch.obs_alphabet));
    } else {
      out.push_back(rng.categorical(emit));
    }
  }
}

}  // namespace

Utterance sample_utterance(const SynthWorld& world, Domain domain, Rng& rng) {
  const auto& table = world.prior(domain).table();
  std::vector<double> weights;
  std::vector<const LabelSeq*> keys;
  weights.reserve(table.size());
  for (const auto& [w, p] : table) {
    keys.push_back(&w);
    weights.push_back(p);
  }
  Utterance u;
  u.domain = domain;
  u.transcript = *keys[static_cast<std::size_t>(rng.categorical(weights))];
  if (u.transcript.empty()) {
    emit_segment(world.channel(), 0, rng, u.frames);
  } else {
    for (Symbol s : u.transcript) {
      emit_segment(world.channel(), s.id, rng, u.frames);
    }
  }
  return u;
}

std::vector<Utterance> sample_corpus(const SynthWorld& world, Domain domain,
                                     std::size_t n, std::uint64_t seed,
                                     std::string_view purpose) {
  std::vector<Utterance> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, purpose, i));
    out.push_back(sample_utterance(world, domain, rng));
  }
  return out;
}

// Exact computations ---------------------------------------------------------

LogProb true_likelihood(const SynthWorld& world, std::span<const int> frames,
                        std::span<const Symbol> labels) {
  const AcousticChannel& ch = world.channel();
  const int num_frames = static_cast<int>(frames.size());
  for (Symbol s : labels) {
    if (!world.vocabulary().is_label(s)) {
      throw std::invalid_argument("transcript contains a non-label id");
    }
  }
  // Rows: silence for the empty transcript, otherwise one per label.
  std::vector<int> rows;
  if (labels.empty()) {
    rows.push_back(0);
  } else {
    for (Symbol s : labels) rows.push_back(s.id);
  }
  // seg[j][t]: probability that the first j segments cover frames 1..t.
  const std::size_t n = rows.size();
  std::vector<std::vector<double>> seg(
      n + 1, std::vector<double>(static_cast<std::size_t>(num_frames) + 1, 0));
  seg[0][0] = 1.0;
  for (std::size_t j = 1; j <= n; ++j) {
    const int row = rows[j - 1];
    const auto& dur = ch.duration[static_cast<std::size_t>(row)];
    for (int t = 1; t <= num_frames; ++t) {
      double acc = 0.0;
      double emit = 1.0;
      for (int d = 1; d <= ch.max_duration && d <= t; ++d) {
        emit *= ch.frame_prob(row, frames[static_cast<std::size_t>(t - d)]);
        if (emit == 0.0) break;
        acc += seg[j - 1][static_cast<std::size_t>(t - d)] *
               dur[static_cast<std::size_t>(d - 1)] * emit;
      }
      seg[j][static_cast<std::size_t>(t)] = acc;
    }
  }
  const double p = seg[n][static_cast<std::size_t>(num_frames)];
  return p > 0.0 ? std::log(p) : kLogZero;
}

TruePosterior true_posterior(const SynthWorld& world, Domain domain,
                             std::span<const int> frames) {
  if (world.vocabulary().num_labels() > kMaxPosteriorLabels ||
      world.l_max() > kMaxPosteriorLength) {
    throw std::length_error("enumeration bound exceeded");
  }
  const TableLM& prior = world.prior(domain);
  std::vector<LabelSeq> all =
      all_label_sequences(world.vocabulary().num_labels(), world.l_max());
  std::vector<LogProb> joint;
  joint.reserve(all.size());
  for (const LabelSeq& w : all) {
    joint.push_back(
        log_mul(prior.sequence_log_prob(w), true_likelihood(world, frames, w)));
  }
  TruePosterior out;
  out.log_evidence = log_sum(joint);
  for (std::size_t i = 0; i < all.size(); ++i) {
    out.posterior[all[i]] =
        is_log_zero(joint[i]) ? 0.0 : std::exp(joint[i] - out.log_evidence);
  }
  return out;
}

ScaledLikelihoodCheck scaled_likelihood_identity(
    const SynthWorld& world, Domain domain, std::span<const int> frames,
    std::span<const Symbol> labels) {
  ScaledLikelihoodCheck check;
  const LogProb log_prior = world.prior(domain).sequence_log_prob(labels);
  check.rhs = true_likelihood(world, frames, labels);
  if (is_log_zero(log_prior)) {
    check.skipped = "prior mass of [" + format_labels(labels) + "] is zero in " +
                    std::string(domain_name(domain)) + " domain";
    return check;
  }
  const TruePosterior tp = true_posterior(world, domain, frames);
  const double post =
      tp.posterior.at(LabelSeq(labels.begin(), labels.end()));
  check.lhs = post > 0.0 ? tp.log_evidence + std::log(post) - log_prior
                         : kLogZero;
  return check;
}

LogProb log_marginal_ratio(const SynthWorld& world,
                           std::span<const int> frames) {
  return true_posterior(world, Domain::kSource, frames).log_evidence -
         true_posterior(world, Domain::kTarget, frames).log_evidence;
}

SynthWorld mixture_world(const SynthWorld& world, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("mixture weight must lie in [0, 1]");
  }
  const TableLM& src = world.prior(Domain::kSource);
  const TableLM& tgt = world.prior(Domain::kTarget);
  std::map<LabelSeq, double> mixed;
  for (const auto& [w, p] : src.table()) mixed[w] = 0.0;
  for (const auto& [w, p] : tgt.table()) mixed[w] = 0.0;
  for (auto& [w, p] : mixed) {
    p = (1.0 - alpha) * src.probability(w) + alpha * tgt.probability(w);
  }
  return SynthWorld(world.vocabulary(), world.l_max(), world.channel(),
                    TableLM(world.vocabulary(), std::move(mixed)), tgt,
                    world.seed());
}

// World files ----------------------------------------------------------------

namespace {

TableLM prior_from_table_block(const json& block, const Vocabulary& vocab) {
  std::map<LabelSeq, double> table;
  for (const auto& e : block.at("entries")) {
    LabelSeq w;
    for (int id : e.at("labels").get<std::vector<int>>()) w.push_back({id});
    table[w] += e.at("prob").get<double>();
  }
  return TableLM(vocab, std::move(table));
}

TableLM prior_from_block(const json& block, const Vocabulary& vocab,
                         int l_max) {
  const std::string type = block.at("type").get<std::string>();
  if (type == "table") return prior_from_table_block(block, vocab);
  if (type == "ngram") return prior_from_ngram_block(block, vocab, l_max);
  throw ConfigError("unknown prior type '" + type + "'");
}

json prior_to_json(const TableLM& prior) {
  json entries = json::array();
  for (const auto& [w, p] : prior.table()) {
    std::vector<int> ids;
    for (Symbol s : w) ids.push_back(s.id);
    entries.push_back({{"labels", ids}, {"prob", p}});
  }
  return {{"type", "table"}, {"entries", entries}};
}

}  // namespace

TableLM prior_from_ngram_block(const json& block, const Vocabulary& vocab,
                               int l_max) {
  const int order = block.at("order").get<int>();
  if (order < 1) throw ConfigError("n-gram prior order must be >= 1");
  const std::size_t width = static_cast<std::size_t>(vocab.num_labels() + 1);
  std::map<std::vector<int>, std::vector<double>> cond;
  for (const auto& c : block.at("conditionals")) {
    auto h = c.at("history").get<std::vector<int>>();
    auto probs = c.at("probs").get<std::vector<double>>();
    if (h.size() != static_cast<std::size_t>(order - 1) ||
        probs.size() != width) {
      throw ConfigError("n-gram prior conditional has wrong shape");
    }
    double total = 0.0;
    for (double p : probs) {
      if (!(p >= 0.0)) throw ConfigError("negative n-gram prior probability");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw ConfigError("n-gram prior conditional does not sum to one");
    }
    cond[h] = std::move(probs);
  }
  auto lookup = [&](std::span<const Symbol> history) -> const auto& {
    std::vector<int> key(static_cast<std::size_t>(order - 1), kBoundaryId);
    const std::size_t take = std::min(key.size(), history.size());
    for (std::size_t i = 0; i < take; ++i) {
      key[key.size() - take + i] = history[history.size() - take + i].id;
    }
    auto it = cond.find(key);
    if (it == cond.end()) {
      throw ConfigError("n-gram prior lacks history [" + format_ints(key) +
                        "]");
    }
    return it->second;
  };
  std::map<LabelSeq, double> table;
  for (const LabelSeq& w : all_label_sequences(vocab.num_labels(), l_max)) {
    double p = 1.0;
    for (std::size_t i = 0; i < w.size() && p > 0.0; ++i) {
      p *= lookup(std::span<const Symbol>(w).subspan(0, i))
          [static_cast<std::size_t>(w[i].id - 1)];
    }
    if (static_cast<int>(w.size()) < l_max && p > 0.0) {
      p *= lookup(w)[width - 1];
    }
    if (p > 0.0) table[w] = p;
  }
  return TableLM(vocab, std::move(table));
}

SynthWorld world_from_json(const json& j) {
  try {
    if (j.value("schema", 0) != kWorldSchemaVersion) {
      throw ConfigError("unsupported world schema (expected 1)");
    }
    const Vocabulary vocab(j.at("vocab_size").get<int>());
    const int l_max = j.at("l_max").get<int>();
    const int obs = j.at("obs_alphabet").get<int>();
    const int d_max = j.at("d_max").get<int>();
    const double noise = j.at("noise_floor").get<double>();
    const auto seed = j.at("seed").get<std::uint64_t>();
    AcousticChannel ch;
    if (j.contains("channel")) {
      ch.obs_alphabet = obs;
      ch.max_duration = d_max;
      ch.noise_floor = noise;
      ch.emission =
          j.at("channel").at("emission").get<std::vector<std::vector<double>>>();
      ch.duration =
          j.at("channel").at("duration").get<std::vector<std::vector<double>>>();
    } else {
      ch = random_channel(vocab.num_labels(), obs, d_max, noise,
                          derive_seed(seed, "channel", 0));
    }
    return SynthWorld(vocab, l_max, std::move(ch),
                      prior_from_block(j.at("source_prior"), vocab, l_max),
                      prior_from_block(j.at("target_prior"), vocab, l_max),
                      seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid world file: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid world file: ") + e.what());
  }
}

json world_to_json(const SynthWorld& world) {
  const AcousticChannel& ch = world.channel();
  return {{"schema", kWorldSchemaVersion},
          {"vocab_size", world.vocabulary().num_labels()},
          {"obs_alphabet", ch.obs_alphabet},
          {"l_max", world.l_max()},
          {"d_max", ch.max_duration},
          {"noise_floor", ch.noise_floor},
          {"seed", world.seed()},
          {"source_prior", prior_to_json(world.prior(Domain::kSource))},
          {"target_prior", prior_to_json(world.prior(Domain::kTarget))},
          {"channel", {{"emission", ch.emission}, {"duration", ch.duration}}}};
}

SynthWorld load_world_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open world file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("world file " + path + " is not valid JSON: " + e.what());
  }
  return world_from_json(j);
}

AcousticChannel random_channel(int num_labels, int obs_alphabet,
                               int max_duration, double noise_floor,
                               std::uint64_t seed) {
  Rng rng(seed);
  AcousticChannel ch;
  ch.obs_alphabet = obs_alphabet;
  ch.max_duration = max_duration;
  ch.noise_floor = noise_floor;
  const int peaks = std::max(1, obs_alphabet - 1);
  auto random_row = [&rng](std::size_t width, int peak, double peak_mass) {
    std::vector<double> row(width);
    double total = 0.0;
    for (double& x : row) {
      x = 1.0 - rng.uniform();
      total += x;
    }
    for (double& x : row) x *= (1.0 - peak_mass) / total;
    if (peak >= 0) row[static_cast<std::size_t>(peak)] += peak_mass;
    return row;
  };
  for (int r = 0; r <= num_labels; ++r) {
    const int peak = r == 0 ? obs_alphabet - 1 : (r - 1) % peaks;
    ch.emission.push_back(
        random_row(static_cast<std::size_t>(obs_alphabet), peak, 0.6));
    ch.duration.push_back(
        random_row(static_cast<std::size_t>(max_duration), -1, 0.0));
  }
  return ch;
}

json default_world_json() {
  // Rows: silence, then labels 1..4. Labels 1/3 and 2/4 are acoustically
  // confusable pairs, so the prior decides close calls.
  const json emission = {
      {0.02, 0.02, 0.02, 0.02, 0.02, 0.90},
      {0.50, 0.04, 0.34, 0.04, 0.04, 0.04},
      {0.04, 0.50, 0.04, 0.34, 0.04, 0.04},
      {0.34, 0.04, 0.50, 0.04, 0.04, 0.04},
      {0.04, 0.34, 0.04, 0.50, 0.04, 0.04},
  };
  const json duration = {
      {0.5, 0.5}, {0.6, 0.4}, {0.6, 0.4}, {0.6, 0.4}, {0.6, 0.4}};
  auto bigram = [](const std::vector<std::vector<double>>& rows) {
    json conds = json::array();
    for (std::size_t h = 0; h < rows.size(); ++h) {
      const int id = h == 0 ? kBoundaryId : static_cast<int>(h);
      conds.push_back({{"history", {id}}, {"probs", rows[h]}});
    }
    return json{{"type", "ngram"}, {"order", 2}, {"conditionals", conds}};
  };
  // probs: p_1..p_4, p_eos
  const json source = bigram({{0.40, 0.40, 0.07, 0.07, 0.06},
                              {0.15, 0.55, 0.05, 0.05, 0.20},
                              {0.55, 0.15, 0.05, 0.05, 0.20},
                              {0.35, 0.35, 0.05, 0.05, 0.20},
                              {0.35, 0.35, 0.05, 0.05, 0.20}});
  const json target = bigram({{0.07, 0.07, 0.40, 0.40, 0.06},
                              {0.05, 0.05, 0.35, 0.35, 0.20},
                              {0.05, 0.05, 0.35, 0.35, 0.20},
                              {0.05, 0.05, 0.50, 0.20, 0.20},
                              {0.05, 0.05, 0.20, 0.50, 0.20}});
  return {{"schema", kWorldSchemaVersion},
          {"vocab_size", 4},
          {"obs_alphabet", 6},
          {"l_max", 3},
          {"d_max", 2},
          {"noise_floor", 0.1},
          {"seed", 20191001},
          {"source_prior", source},
          {"target_prior", target},
          {"channel", {{"emission", emission}, {"duration", duration}}}};
}

SynthWorld default_world() { return world_from_json(default_world_json()); }

SynthWorld deterministic_world(int num_labels, int l_max,
                               std::uint64_t seed) {
  const int obs = num_labels + 1;
  AcousticChannel ch;
  ch.obs_alphabet = obs;
  ch.max_duration = 1;
  ch.noise_floor = 0.0;
  for (int r = 0; r <= num_labels; ++r) {
    std::vector<double> row(static_cast<std::size_t>(obs), 0.0);
    row[static_cast<std::size_t>(r == 0 ? num_labels : r - 1)] = 1.0;
    ch.emission.push_back(std::move(row));
    ch.duration.push_back({1.0});
  }
  const Vocabulary vocab(num_labels);
  std::vector<double> uniform(static_cast<std::size_t>(num_labels + 1),
                              1.0 / (num_labels + 1));
  const json block = {{"type", "ngram"},
                      {"order", 1},
                      {"conditionals", {{{"history", json::array()},
                                         {"probs", uniform}}}}};
  TableLM prior = prior_from_ngram_block(block, vocab, l_max);
  return SynthWorld(vocab, l_max, std::move(ch), prior, prior, seed);
}

}  // namespace drlab
