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

#include "drlab/cli.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "drlab/oracle_transducer.h"

namespace drlab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "drlab 1.0.0";
constexpr const char* kDatasetManifest = "manifest.json";

std::ifstream open_input(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw ConfigError(std::string("cannot open ") + what + " " + path);
  return in;
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) {
      throw ConfigError("cannot create directory " +
                        path.parent_path().string() + ": " + ec.message());
    }
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fmt6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

json input_record(const std::string& path) {
  std::error_code ec;
  const auto size = fs::file_size(path, ec);
  return {{"path", path}, {"bytes", ec ? -1 : static_cast<long long>(size)}};
}

/// manifest_<command>.json: enough to re-run the command.
void write_manifest(const fs::path& dir, const std::string& command,
                    const json& args, const std::vector<std::string>& inputs,
                    std::optional<std::uint64_t> seed, double wall_seconds) {
  json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["args"] = args;
  m["inputs"] = json::array();
  for (const auto& p : inputs) m["inputs"].push_back(input_record(p));
  if (seed) m["seed"] = *seed;
  m["wall_time_seconds"] = wall_seconds;
  auto out = open_output(dir / ("manifest_" + command + ".json"));
  out << m.dump(2) << '\n';
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

json fusion_to_json(const FusionConfig& f) {
  return {{"mode", fusion_mode_name(f.mode)},
          {"lambda_tau", f.lambda_tau},
          {"lambda_psi", f.lambda_psi},
          {"beta", f.beta},
          {"eos_final", f.include_eos_at_finalization}};
}

FusionConfig fusion_from_json(const json& j, FusionConfig f) {
  if (j.contains("mode")) f.mode = parse_fusion_mode(j.at("mode").get<std::string>());
  f.lambda_tau = j.value("lambda_tau", f.lambda_tau);
  f.lambda_psi = j.value("lambda_psi", f.lambda_psi);
  f.beta = j.value("beta", f.beta);
  f.include_eos_at_finalization = j.value("eos_final", f.include_eos_at_finalization);
  return f;
}

json beam_to_json(const BeamConfig& b) {
  return {{"beam_size", b.beam_size},
          {"max_expansions", b.max_expansions_per_frame},
          {"nbest", b.nbest}};
}

std::vector<double> parse_grid(const std::string& text) {
  if (text.find(':') != std::string::npos) {
    double lo = 0, hi = 0, step = 0;
    char c1 = 0, c2 = 0;
    std::istringstream in(text);
    if (!(in >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':') {
      throw ConfigError("grid must be 'lo:hi:step' or a comma list: " + text);
    }
    return linear_grid(lo, hi, step);
  }
  std::vector<double> out;
  std::stringstream in(text);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ConfigError("bad grid value '" + tok + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty grid");
  return out;
}

std::unique_ptr<NGramLM> load_optional_lm(const std::string& path) {
  if (path.empty()) return nullptr;
  return std::make_unique<NGramLM>(load_ngram_file(path));
}

void check_dataset_against(const std::vector<Utterance>& data,
                           const Vocabulary& vocab, const std::string& path) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (Symbol s : data[i].transcript) {
      if (!vocab.is_label(s)) {
        throw ConfigError("vocabulary mismatch: " + path + " line " +
                          std::to_string(i + 1) + " has label " +
                          std::to_string(s.id) + " but the scorer has V=" +
                          std::to_string(vocab.num_labels()));
      }
    }
  }
}

void check_lm_vocab(const LanguageModel* lm, const Vocabulary& vocab,
                    const char* which) {
  if (lm && !(lm->vocabulary() == vocab)) {
    throw ConfigError(std::string("vocabulary mismatch: ") + which +
                      " LM has V=" +
                      std::to_string(lm->vocabulary().num_labels()) +
                      " but the scorer has V=" +
                      std::to_string(vocab.num_labels()));
  }
}

}  // namespace

// Datasets ---------------------------------------------------------------------

std::vector<Utterance> read_paired_dataset(const std::string& path) {
  auto in = open_input(path, "dataset");
  std::vector<Utterance> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": expected frames<TAB>transcript");
    }
    Utterance u;
    try {
      u.frames = parse_ints(std::string_view(line).substr(0, tab));
      u.transcript = parse_labels(std::string_view(line).substr(tab + 1));
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (u.frames.empty()) {
      throw DataError(path + ":" + std::to_string(lineno) + ": no frames");
    }
    for (Symbol s : u.transcript) {
      if (s.id < 1) {
        throw DataError(path + ":" + std::to_string(lineno) +
                        ": transcript ids must be labels (>= 1)");
      }
    }
    u.domain = Domain::kTarget;
    out.push_back(std::move(u));
  }
  return out;
}

std::vector<LabelSeq> read_transcripts(const std::string& path) {
  auto in = open_input(path, "corpus");
  std::vector<LabelSeq> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tab = line.find('\t');
    const auto text = tab == std::string::npos
                          ? std::string_view(line)
                          : std::string_view(line).substr(tab + 1);
    try {
      out.push_back(parse_labels(text));
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    for (Symbol s : out.back()) {
      if (s.id < 1) {
        throw DataError(path + ":" + std::to_string(lineno) +
                        ": transcript ids must be labels (>= 1)");
      }
    }
  }
  return out;
}

void write_paired_dataset(const std::string& path,
                          std::span<const Utterance> utterances) {
  auto out = open_output(path);
  for (const Utterance& u : utterances) {
    out << format_ints(u.frames) << '\t' << format_labels(u.transcript) << '\n';
  }
}

void write_text_corpus(const std::string& path,
                       std::span<const Utterance> utterances) {
  auto out = open_output(path);
  for (const Utterance& u : utterances) {
    out << format_labels(u.transcript) << '\n';
  }
}

std::string dataset_role(const std::string& path) {
  const fs::path p(path);
  const fs::path manifest = p.parent_path() / kDatasetManifest;
  std::ifstream in(manifest);
  if (!in) return "";
  try {
    json m;
    in >> m;
    const auto& roles = m.at("roles");
    const std::string name = p.filename().string();
    return roles.contains(name) ? roles.at(name).get<std::string>() : "";
  } catch (const json::exception&) {
    return "";
  }
}

// Config -------------------------------------------------------------------------

std::vector<double> linear_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || hi < lo) throw ConfigError("bad grid range");
  const long n = std::lround((hi - lo) / step);
  std::vector<double> out;
  // Scaled integers keep decimal grids such as -0.4:0.6:0.1 exact at 0.
  const double scale = std::round(1.0 / step) == 1.0 / step ? 1.0 / step : 0.0;
  for (long i = 0; i <= n; ++i) {
    double v = scale > 0.0 ? (std::round(lo * scale) + i) / scale
                           : lo + static_cast<double>(i) * step;
    if (v == 0.0) v = 0.0;  // no negative zero
    out.push_back(v);
  }
  return out;
}

void ExperimentConfig::validate() const {
  if (world_path.empty()) throw ConfigError("config: world file not set");
  if (!fs::exists(world_path)) {
    throw ConfigError("config: world file " + world_path + " does not exist");
  }
  if (source_train < 1 || target_text < 1 || dev < 1 || eval < 1) {
    throw ConfigError("config: dataset sizes must be >= 1");
  }
  if (lm_order < 1) throw ConfigError("config: lm order must be >= 1");
  if (!(add_k >= 0.0)) throw ConfigError("config: add_k must be >= 0");
  fusion.validate();
  beam.validate();
}

ExperimentConfig load_experiment_config(const std::string& path) {
  auto in = open_input(path, "config");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&base](const std::string& p) {
    if (p.empty() || fs::path(p).is_absolute()) return p;
    return (base / p).string();
  };
  ExperimentConfig c;
  try {
    c.world_path = resolve(j.at("world").get<std::string>());
    if (j.contains("sizes")) {
      const auto& s = j.at("sizes");
      c.source_train = s.value("source_train", c.source_train);
      c.target_text = s.value("target_text", c.target_text);
      c.dev = s.value("dev", c.dev);
      c.eval = s.value("eval", c.eval);
    }
    if (j.contains("lm")) {
      c.lm_order = j.at("lm").value("order", c.lm_order);
      c.add_k = j.at("lm").value("add_k", c.add_k);
    }
    c.scorer = j.value("scorer", c.scorer);
    if (c.scorer.rfind("table:", 0) == 0) {
      c.scorer = "table:" + resolve(c.scorer.substr(6));
    }
    if (j.contains("fusion")) c.fusion = fusion_from_json(j.at("fusion"), c.fusion);
    if (j.contains("beam")) {
      const auto& b = j.at("beam");
      c.beam.beam_size = b.value("beam_size", c.beam.beam_size);
      c.beam.max_expansions_per_frame =
          b.value("max_expansions", c.beam.max_expansions_per_frame);
      c.beam.nbest = b.value("nbest", c.beam.nbest);
    }
    if (j.contains("sweep")) {
      const auto& s = j.at("sweep");
      c.grids.lambda = s.value("lambda", c.grids.lambda);
      c.grids.beta = s.value("beta", c.grids.beta);
      c.grids.lambda_psi = s.value("lambda_psi", c.grids.lambda_psi);
      c.grids.lambda_tau = s.value("lambda_tau", c.grids.lambda_tau);
      c.grids.pair_beta = s.value("pair_beta", c.grids.pair_beta);
    }
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    c.out_dir = resolve(j.value("out", c.out_dir));
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return c;
}

// Commands -----------------------------------------------------------------------

std::unique_ptr<StepScorer> make_scorer(const std::string& spec,
                                        const std::string& world_path) {
  if (spec.rfind("table:", 0) == 0) {
    auto in = open_input(spec.substr(6), "table scorer");
    return std::make_unique<TableScorer>(TableScorer::load(in));
  }
  if (spec.rfind("oracle:", 0) != 0) {
    throw ConfigError("unknown scorer spec '" + spec + "'");
  }
  if (world_path.empty()) throw ConfigError("oracle scorer needs a world file");
  auto world = std::make_shared<const SynthWorld>(load_world_file(world_path));
  const std::string rest = spec.substr(7);
  if (rest.rfind("mixture:", 0) == 0) {
    double alpha = 0.0;
    try {
      alpha = std::stod(rest.substr(8));
    } catch (const std::exception&) {
      throw ConfigError("bad mixture weight in '" + spec + "'");
    }
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
      throw ConfigError("mixture weight must lie in [0, 1]");
    }
    auto mixed = std::make_shared<const SynthWorld>(mixture_world(*world, alpha));
    return std::make_unique<OracleTransducer>(mixed, Domain::kSource);
  }
  return std::make_unique<OracleTransducer>(world, parse_domain(rest));
}

void cmd_generate(const ExperimentConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  cfg.validate();
  const SynthWorld world = load_world_file(cfg.world_path);
  const std::uint64_t seed = cfg.seed.value_or(world.seed());
  const fs::path dir(cfg.out_dir);

  const auto source_train = sample_corpus(world, Domain::kSource,
                                          cfg.source_train, seed,
                                          "generate/source_train");
  const auto target_text = sample_corpus(world, Domain::kTarget,
                                         cfg.target_text, seed,
                                         "generate/target_text");
  const auto dev = sample_corpus(world, Domain::kTarget, cfg.dev, seed,
                                 "generate/target_dev");
  const auto eval = sample_corpus(world, Domain::kTarget, cfg.eval, seed,
                                  "generate/target_eval");

  write_paired_dataset((dir / "source_train.tsv").string(), source_train);
  write_text_corpus((dir / "target_text.txt").string(), target_text);
  write_paired_dataset((dir / "target_dev.tsv").string(), dev);
  write_paired_dataset((dir / "target_eval.tsv").string(), eval);
  {
    auto out = open_output(dir / "world.json");
    out << world_to_json(world).dump(2) << '\n';
  }
  {
    json m;
    m["seed"] = seed;
    m["roles"] = {{"source_train.tsv", "train"},
                  {"target_text.txt", "text"},
                  {"target_dev.tsv", "dev"},
                  {"target_eval.tsv", "eval"}};
    m["sizes"] = {{"source_train.tsv", cfg.source_train},
                  {"target_text.txt", cfg.target_text},
                  {"target_dev.tsv", cfg.dev},
                  {"target_eval.tsv", cfg.eval}};
    auto out = open_output(dir / kDatasetManifest);
    out << m.dump(2) << '\n';
  }
  write_manifest(dir, "generate",
                 {{"world", cfg.world_path},
                  {"sizes",
                   {cfg.source_train, cfg.target_text, cfg.dev, cfg.eval}}},
                 {cfg.world_path}, seed, seconds_since(start));
}

NGramLM cmd_train_lm(const TrainLmOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  if (opts.vocab_size < 1) throw ConfigError("train-lm needs --vocab-size");
  if (opts.out.empty()) throw ConfigError("train-lm needs --out");
  const auto corpus = read_transcripts(opts.corpus);
  const Vocabulary vocab(opts.vocab_size);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    for (Symbol s : corpus[i]) {
      if (!vocab.is_label(s)) {
        throw DataError(opts.corpus + ":" + std::to_string(i + 1) +
                        ": label outside vocabulary");
      }
    }
  }
  NGramLM lm = train_ngram(corpus, opts.order, opts.add_k, vocab);
  {
    auto out = open_output(opts.out);
    lm.save(out);
  }
  const fs::path out_path(opts.out);
  write_manifest(out_path.has_parent_path() ? out_path.parent_path() : ".",
                 "train-lm_" + out_path.stem().string(),
                 {{"corpus", opts.corpus},
                  {"order", opts.order},
                  {"add_k", opts.add_k},
                  {"vocab_size", opts.vocab_size},
                  {"out", opts.out}},
                 {opts.corpus}, std::nullopt, seconds_since(start));
  return lm;
}

PerplexityResult cmd_ppl(const std::string& lm_path,
                         const std::string& corpus_path) {
  const NGramLM lm = load_ngram_file(lm_path);
  const auto corpus = read_transcripts(corpus_path);
  return perplexity(lm, corpus);
}

WerBreakdown cmd_decode(const DecodeOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  if (opts.out_dir.empty()) throw ConfigError("decode needs --out");
  FusionConfig fusion = opts.fusion;
  if (!opts.operating_point.empty()) {
    auto in = open_input(opts.operating_point, "operating point");
    json op;
    try {
      in >> op;
      fusion = fusion_from_json(op, fusion);
    } catch (const json::exception& e) {
      throw ConfigError("bad operating point file: " + std::string(e.what()));
    }
  }
  const auto scorer = make_scorer(opts.scorer, opts.world_path);
  const auto lm_target = load_optional_lm(opts.lm_target);
  const auto lm_source = load_optional_lm(opts.lm_source);
  const Vocabulary& vocab = scorer->vocabulary();
  check_lm_vocab(lm_target.get(), vocab, "target");
  check_lm_vocab(lm_source.get(), vocab, "source");
  const FusionLms lms{lm_target.get(), lm_source.get()};
  validate_fusion_setup(fusion, lms, vocab);
  opts.beam.validate();

  const auto data = read_paired_dataset(opts.dataset);
  if (data.empty()) throw DataError("dataset " + opts.dataset + " is empty");
  check_dataset_against(data, vocab, opts.dataset);

  std::vector<Hypothesis> best(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    auto nbest = beam_search(*scorer, lms, fusion, opts.beam, data[i].frames);
    if (!nbest.empty()) {
      best[i] = std::move(nbest.front());
    } else {
      best[i].score = kLogZero;
    }
  });

  std::vector<RefHyp> pairs;
  pairs.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    pairs.emplace_back(data[i].transcript, best[i].labels);
  }
  const WerBreakdown summary = corpus_wer(pairs);

  const fs::path dir(opts.out_dir);
  {
    auto out = open_output(dir / "hyps.tsv");
    for (std::size_t i = 0; i < data.size(); ++i) {
      out << format_labels(data[i].transcript) << '\t'
          << format_labels(best[i].labels) << '\t' << fmt17(best[i].score)
          << '\n';
    }
    out << "# summary wer=" << fmt6(summary.wer)
        << " del=" << fmt6(summary.del_rate)
        << " ins=" << fmt6(summary.ins_rate)
        << " sub=" << fmt6(summary.sub_rate)
        << " errors=" << summary.errors()
        << " n_ref_tokens=" << summary.num_ref_tokens << '\n';
    out << "# fusion " << fusion_to_json(fusion).dump() << '\n';
  }
  {
    auto out = open_output(dir / "summary.csv");
    out << "run,mode,lambda_psi,lambda_tau,beta,wer,del,ins,sub,n_ref_tokens\n";
    out << opts.run_name << ',' << sweep_csv_row({fusion, summary}) << '\n';
  }
  write_manifest(dir, "decode",
                 {{"dataset", opts.dataset},
                  {"world", opts.world_path},
                  {"scorer", opts.scorer},
                  {"lm_target", opts.lm_target},
                  {"lm_source", opts.lm_source},
                  {"operating_point", opts.operating_point},
                  {"fusion", fusion_to_json(fusion)},
                  {"beam", beam_to_json(opts.beam)},
                  {"name", opts.run_name}},
                 {opts.dataset, opts.world_path, opts.lm_target,
                  opts.lm_source},
                 std::nullopt, seconds_since(start));
  return summary;
}

SweepResult cmd_sweep(const SweepOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  if (opts.out_dir.empty()) throw ConfigError("sweep needs --out");
  const std::string role = dataset_role(opts.dataset);
  if (!role.empty() && role != "dev") {
    throw ConfigError("sweeps tune on the dev set; " + opts.dataset +
                      " has role '" + role + "'");
  }
  const auto scorer = make_scorer(opts.scorer, opts.world_path);
  const auto lm_target = load_optional_lm(opts.lm_target);
  const auto lm_source = load_optional_lm(opts.lm_source);
  const Vocabulary& vocab = scorer->vocabulary();
  check_lm_vocab(lm_target.get(), vocab, "target");
  check_lm_vocab(lm_source.get(), vocab, "source");
  const FusionLms lms{lm_target.get(), lm_source.get()};
  opts.beam.validate();

  const auto data = read_paired_dataset(opts.dataset);
  if (data.empty()) throw DataError("dataset " + opts.dataset + " is empty");
  check_dataset_against(data, vocab, opts.dataset);

  SweepResult r;
  std::string name = opts.name;
  if (opts.kind == SweepKind::kLambdaBeta) {
    if (opts.grids.lambda.empty() || opts.grids.beta.empty()) {
      throw ConfigError("lambda-beta sweep needs --lambdas and --betas");
    }
    r = sweep_lambda_beta(*scorer, lms, opts.mode, opts.grids.lambda,
                          opts.grids.beta, opts.beam, data,
                          opts.include_eos_at_finalization);
    if (name.empty()) name = std::string(fusion_mode_name(opts.mode));
  } else {
    if (opts.grids.lambda_psi.empty() || opts.grids.lambda_tau.empty()) {
      throw ConfigError("lambda-pair sweep needs --lambda-psis and --lambda-taus");
    }
    r = sweep_lambda_pair(*scorer, lms, opts.grids.pair_beta,
                          opts.grids.lambda_psi, opts.grids.lambda_tau,
                          opts.beam, data, opts.include_eos_at_finalization);
    if (name.empty()) name = "pair";
  }

  const fs::path dir(opts.out_dir);
  {
    auto out = open_output(dir / ("sweep_" + name + ".csv"));
    write_sweep_csv(r, out);
  }
  {
    json op = fusion_to_json(r.best().config);
    op["wer"] = r.best().wer.wer;
    op["role"] = "dev";
    op["sweep"] = "sweep_" + name + ".csv";
    auto out = open_output(dir / ("operating_point_" + name + ".json"));
    out << op.dump(2) << '\n';
  }
  write_manifest(dir, "sweep_" + name,
                 {{"dataset", opts.dataset},
                  {"world", opts.world_path},
                  {"scorer", opts.scorer},
                  {"lm_target", opts.lm_target},
                  {"lm_source", opts.lm_source},
                  {"kind", opts.kind == SweepKind::kLambdaBeta ? "lambda-beta"
                                                                : "lambda-pair"},
                  {"mode", fusion_mode_name(opts.mode)},
                  {"lambda", opts.grids.lambda},
                  {"beta", opts.grids.beta},
                  {"lambda_psi", opts.grids.lambda_psi},
                  {"lambda_tau", opts.grids.lambda_tau},
                  {"pair_beta", opts.grids.pair_beta},
                  {"beam", beam_to_json(opts.beam)}},
                 {opts.dataset, opts.world_path, opts.lm_target,
                  opts.lm_source},
                 std::nullopt, seconds_since(start));
  return r;
}

// Report ----------------------------------------------------------------------------

namespace {

struct ReportRow {
  int method_rank = 0;
  std::string method;
  std::string run;
  std::vector<std::string> fields;  // summary.csv fields after `run`
};

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream in(line);
  std::string tok;
  while (std::getline(in, tok, ',')) out.push_back(tok);
  return out;
}

ReportRow read_summary(const fs::path& file) {
  std::ifstream in(file);
  std::string header;
  std::string line;
  if (!std::getline(in, header) || !std::getline(in, line)) {
    throw DataError("truncated run summary " + file.string());
  }
  auto fields = split_csv(line);
  if (fields.size() != 10) {
    throw DataError("malformed run summary " + file.string());
  }
  ReportRow row;
  row.run = fields[0];
  row.fields.assign(fields.begin() + 1, fields.end());
  const std::string& mode = row.fields[0];
  if (mode == "none") {
    row.method_rank = 0;
    row.method = "baseline";
  } else if (mode == "shallow") {
    row.method_rank = 1;
    row.method = "shallow fusion";
  } else if (row.fields[1] == row.fields[2]) {
    row.method_rank = 2;
    row.method = "density ratio, lambda_psi=lambda_tau";
  } else {
    row.method_rank = 3;
    row.method = "density ratio, lambda_psi, lambda_tau";
  }
  return row;
}

}  // namespace

std::string cmd_report(const std::string& run_dir,
                       const std::vector<std::string>& runs) {
  const fs::path dir(run_dir);
  if (!fs::is_directory(dir)) {
    throw ConfigError("run directory " + run_dir + " does not exist");
  }
  std::vector<ReportRow> rows;
  if (runs.empty()) {
    std::vector<fs::path> found;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_directory() && fs::exists(entry.path() / "summary.csv")) {
        found.push_back(entry.path());
      }
    }
    std::sort(found.begin(), found.end());
    for (const auto& p : found) rows.push_back(read_summary(p / "summary.csv"));
  } else {
    std::vector<std::string> missing;
    for (const auto& name : runs) {
      const fs::path file = dir / name / "summary.csv";
      if (!fs::exists(file)) {
        missing.push_back(name);
        continue;
      }
      rows.push_back(read_summary(file));
    }
    if (!missing.empty()) {
      std::string list;
      for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
      throw DataError("missing runs: " + list);
    }
  }
  if (rows.empty()) throw DataError("no completed runs under " + run_dir);
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ReportRow& a, const ReportRow& b) {
                     if (a.method_rank != b.method_rank) {
                       return a.method_rank < b.method_rank;
                     }
                     return a.run < b.run;
                   });

  std::ostringstream text;
  char buf[512];
  std::snprintf(buf, sizeof buf, "%-40s %-16s %10s %10s %10s %10s %10s %10s %10s\n",
                "method", "run", "WER", "del", "ins", "sub", "lambda_psi",
                "lambda_tau", "beta");
  text << buf;
  for (const auto& r : rows) {
    // fields: mode, lambda_psi, lambda_tau, beta, wer, del, ins, sub, n_ref
    std::snprintf(buf, sizeof buf,
                  "%-40s %-16s %10s %10s %10s %10s %10s %10s %10s\n",
                  r.method.c_str(), r.run.c_str(), r.fields[4].c_str(),
                  r.fields[5].c_str(), r.fields[6].c_str(), r.fields[7].c_str(),
                  r.fields[0] == "density_ratio" ? r.fields[1].c_str() : "-",
                  r.fields[0] == "none" ? "-" : r.fields[2].c_str(),
                  r.fields[3].c_str());
    text << buf;
  }
  {
    auto out = open_output(dir / "report.txt");
    out << text.str();
  }
  {
    auto out = open_output(dir / "report.csv");
    out << "method,run,mode,lambda_psi,lambda_tau,beta,wer,del,ins,sub,"
           "n_ref_tokens\n";
    for (const auto& r : rows) {
      out << '"' << r.method << "\"," << r.run;
      for (const auto& f : r.fields) out << ',' << f;
      out << '\n';
    }
  }
  return text.str();
}

// Entry point ---------------------------------------------------------------------

namespace {

void report_error(std::ostream& err, int code, const std::string& msg) {
  err << json{{"error", msg}, {"exit_code", code}}.dump() << '\n';
}

struct FusionFlags {
  std::string mode;
  double lambda_tau = 0.0;
  double lambda_psi = 0.0;
  double beta = 0.0;
  bool eos_final = false;
  CLI::Option* mode_opt = nullptr;
  CLI::Option* lt_opt = nullptr;
  CLI::Option* lp_opt = nullptr;
  CLI::Option* beta_opt = nullptr;
  CLI::Option* eos_opt = nullptr;

  void add(CLI::App* app) {
    mode_opt = app->add_option("--fusion", mode, "none|shallow|density_ratio");
    lt_opt = app->add_option("--lambda-tau", lambda_tau, "target LM scale");
    lp_opt = app->add_option("--lambda-psi", lambda_psi, "source LM scale");
    beta_opt = app->add_option("--beta", beta, "non-blank reward");
    eos_opt = app->add_option("--eos-final", eos_final,
                              "add the LM EOS terms at finalization");
  }
  FusionConfig apply(FusionConfig f) const {
    if (mode_opt->count()) f.mode = parse_fusion_mode(mode);
    if (lt_opt->count()) f.lambda_tau = lambda_tau;
    if (lp_opt->count()) f.lambda_psi = lambda_psi;
    if (beta_opt->count()) f.beta = beta;
    if (eos_opt->count()) f.include_eos_at_finalization = eos_final;
    return f;
  }
};

struct BeamFlags {
  int beam_size = 0;
  int max_expansions = 0;
  int nbest = 0;
  CLI::Option* b = nullptr;
  CLI::Option* m = nullptr;
  CLI::Option* n = nullptr;

  void add(CLI::App* app) {
    b = app->add_option("--beam", beam_size, "beam size");
    m = app->add_option("--max-expansions", max_expansions,
                        "label emissions per frame");
    n = app->add_option("--nbest", nbest, "hypotheses to keep");
  }
  BeamConfig apply(BeamConfig c) const {
    if (b->count()) c.beam_size = beam_size;
    if (m->count()) c.max_expansions_per_frame = max_expansions;
    if (n->count()) c.nbest = nbest;
    return c;
  }
};

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Density-ratio LM fusion laboratory for transducer decoding"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string world_path;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config (JSON)");
    sub->add_option("--seed", seed, "master seed");
    sub->add_option("--out", out_dir, "output directory");
  };

  // generate
  auto* gen = app.add_subcommand("generate", "sample source/target datasets");
  add_common(gen);
  gen->add_option("--world", world_path, "world file (overrides config)");

  // train-lm
  auto* tlm = app.add_subcommand("train-lm", "train an add-k n-gram LM");
  add_common(tlm);
  TrainLmOptions tl;
  auto* corpus_opt = tlm->add_option("--corpus", tl.corpus, "transcripts")->required();
  auto* order_opt = tlm->add_option("--order", tl.order, "n-gram order");
  auto* addk_opt = tlm->add_option("--add-k", tl.add_k, "smoothing constant");
  tlm->add_option("--vocab-size", tl.vocab_size, "number of labels V");
  tlm->add_option("--world", world_path, "take V from this world file");
  (void)corpus_opt;

  // ppl
  auto* ppl = app.add_subcommand("ppl", "perplexity of an LM on a corpus");
  add_common(ppl);
  std::string ppl_lm;
  std::string ppl_corpus;
  ppl->add_option("--lm", ppl_lm, "LM file")->required();
  ppl->add_option("--corpus", ppl_corpus, "transcripts")->required();

  // decode
  auto* dec = app.add_subcommand("decode", "beam-search decode a dataset");
  add_common(dec);
  DecodeOptions dopt;
  FusionFlags dfus;
  BeamFlags dbeam;
  std::string dec_scorer;
  dec->add_option("--dataset", dopt.dataset, "paired dataset")->required();
  dec->add_option("--world", world_path, "world file (overrides config)");
  dec->add_option("--scorer", dec_scorer, "scorer spec");
  dec->add_option("--lm-target", dopt.lm_target, "target-domain LM");
  dec->add_option("--lm-source", dopt.lm_source, "source-domain LM");
  dec->add_option("--operating-point", dopt.operating_point,
                  "scales chosen by a dev sweep");
  dec->add_option("--name", dopt.run_name, "run name");
  dfus.add(dec);
  dbeam.add(dec);

  // sweep
  auto* swp = app.add_subcommand("sweep", "grid-search LM scales on dev");
  add_common(swp);
  SweepOptions sopt;
  BeamFlags sbeam;
  std::string sw_scorer;
  std::string kind = "lambda-beta";
  std::string sw_mode = "density_ratio";
  std::string lambdas;
  std::string betas;
  std::string lpsis;
  std::string ltaus;
  double pair_beta = -0.1;
  bool sw_eos = false;
  swp->add_option("--dataset", sopt.dataset, "dev dataset")->required();
  swp->add_option("--world", world_path, "world file (overrides config)");
  swp->add_option("--scorer", sw_scorer, "scorer spec");
  swp->add_option("--lm-target", sopt.lm_target, "target-domain LM");
  swp->add_option("--lm-source", sopt.lm_source, "source-domain LM");
  swp->add_option("--kind", kind, "lambda-beta|lambda-pair");
  swp->add_option("--mode", sw_mode, "fusion mode for lambda-beta");
  auto* lam_opt = swp->add_option("--lambdas", lambdas, "lo:hi:step or list");
  auto* bet_opt = swp->add_option("--betas", betas, "lo:hi:step or list");
  auto* lp_opt = swp->add_option("--lambda-psis", lpsis, "lo:hi:step or list");
  auto* lt_opt = swp->add_option("--lambda-taus", ltaus, "lo:hi:step or list");
  auto* pb_opt = swp->add_option("--beta", pair_beta, "fixed beta for lambda-pair");
  swp->add_option("--eos-final", sw_eos, "add the LM EOS terms at finalization");
  swp->add_option("--name", sopt.name, "output name");
  sbeam.add(swp);

  // world
  auto* wld = app.add_subcommand("world", "write the default world file");
  add_common(wld);

  // report
  auto* rep = app.add_subcommand("report", "summary table over decode runs");
  add_common(rep);
  std::vector<std::string> runs;
  rep->add_option("--runs", runs, "run names (default: all)")->delimiter(',');

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
      return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
      report_error(err, kExitConfig, e.what());
      return kExitConfig;
    }

    std::optional<ExperimentConfig> cfg;
    if (!config_path.empty()) cfg = load_experiment_config(config_path);
    auto active = [&]() -> CLI::App* { return app.get_subcommands().front(); };
    CLI::App* sub = active();
    const bool seed_set = sub->get_option("--seed")->count() > 0;
    const bool out_set = sub->get_option("--out")->count() > 0;
    auto world_of = [&]() {
      if (!world_path.empty()) return world_path;
      return cfg ? cfg->world_path : std::string();
    };
    auto out_of = [&]() {
      if (out_set) return out_dir;
      return cfg ? cfg->out_dir : std::string(".");
    };

    if (sub == gen) {
      if (!cfg && world_path.empty()) {
        throw ConfigError("generate needs --config or --world");
      }
      ExperimentConfig c = cfg.value_or(ExperimentConfig{});
      if (!world_path.empty()) c.world_path = world_path;
      if (seed_set) c.seed = seed;
      c.out_dir = out_of();
      cmd_generate(c);
      out << "wrote datasets to " << c.out_dir << '\n';
    } else if (sub == tlm) {
      if (cfg) {
        if (!order_opt->count()) tl.order = cfg->lm_order;
        if (!addk_opt->count()) tl.add_k = cfg->add_k;
      }
      if (tl.vocab_size == 0 && !world_of().empty()) {
        tl.vocab_size = load_world_file(world_of()).vocabulary().num_labels();
      }
      if (!out_set) throw ConfigError("train-lm needs --out FILE");
      tl.out = out_dir;
      const NGramLM lm = cmd_train_lm(tl);
      out << "trained order-" << lm.order() << " LM -> " << tl.out << '\n';
    } else if (sub == ppl) {
      const PerplexityResult r = cmd_ppl(ppl_lm, ppl_corpus);
      if (r.diagnostic) err << json{{"warning", *r.diagnostic}}.dump() << '\n';
      out << "ppl " << fmt6(r.perplexity) << " tokens " << r.num_tokens << '\n';
    } else if (sub == dec) {
      dopt.world_path = world_of();
      dopt.scorer = !dec_scorer.empty() ? dec_scorer
                                        : (cfg ? cfg->scorer : dopt.scorer);
      dopt.fusion = dfus.apply(cfg ? cfg->fusion : FusionConfig{});
      dopt.beam = dbeam.apply(cfg ? cfg->beam : BeamConfig{});
      dopt.out_dir = out_of();
      const WerBreakdown w = cmd_decode(dopt);
      out << "WER " << fmt6(w.wer) << " del " << fmt6(w.del_rate) << " ins "
          << fmt6(w.ins_rate) << " sub " << fmt6(w.sub_rate) << " n_ref "
          << w.num_ref_tokens << '\n';
    } else if (sub == swp) {
      sopt.world_path = world_of();
      sopt.scorer = !sw_scorer.empty() ? sw_scorer
                                       : (cfg ? cfg->scorer : sopt.scorer);
      if (kind == "lambda-beta") {
        sopt.kind = SweepKind::kLambdaBeta;
      } else if (kind == "lambda-pair") {
        sopt.kind = SweepKind::kLambdaPair;
      } else {
        throw ConfigError("unknown sweep kind '" + kind + "'");
      }
      sopt.mode = parse_fusion_mode(sw_mode);
      if (cfg) sopt.grids = cfg->grids;
      if (lam_opt->count()) sopt.grids.lambda = parse_grid(lambdas);
      if (bet_opt->count()) sopt.grids.beta = parse_grid(betas);
      if (lp_opt->count()) sopt.grids.lambda_psi = parse_grid(lpsis);
      if (lt_opt->count()) sopt.grids.lambda_tau = parse_grid(ltaus);
      if (pb_opt->count()) sopt.grids.pair_beta = pair_beta;
      sopt.include_eos_at_finalization = sw_eos;
      sopt.beam = sbeam.apply(cfg ? cfg->beam : BeamConfig{});
      sopt.out_dir = out_of();
      const SweepResult r = cmd_sweep(sopt);
      out << "argmin " << sweep_csv_row(r.best()) << '\n';
    } else if (sub == wld) {
      if (!out_set) throw ConfigError("world needs --out FILE");
      auto o = open_output(out_dir);
      o << default_world_json().dump(2) << '\n';
      out << "wrote default world to " << out_dir << '\n';
    } else if (sub == rep) {
      out << cmd_report(out_of(), runs);
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    report_error(err, kExitConfig, e.what());
    return kExitConfig;
  } catch (const DataError& e) {
    report_error(err, kExitData, e.what());
    return kExitData;
  } catch (const std::exception& e) {
    report_error(err, kExitInternal, e.what());
    return kExitInternal;
  }
}

}  // namespace drlab
