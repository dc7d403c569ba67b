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

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "drlab/core.h"
#include "drlab/decoder.h"
#include "drlab/eval.h"
#include "drlab/fusion.h"
#include "drlab/lm.h"
#include "drlab/synthworld.h"
#include "drlab/transducer.h"

namespace drlab {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitInternal = 4;

// Datasets ------------------------------------------------------------------
//
// One utterance per line, `frames<TAB>transcript`, both sides
// space-separated integer ids (frames are observation ids, in frame order
// 1..T). Text-only corpora drop the frames column and the TAB.

std::vector<Utterance> read_paired_dataset(const std::string& path);
/// Transcripts from either a paired or a text-only file.
std::vector<LabelSeq> read_transcripts(const std::string& path);
void write_paired_dataset(const std::string& path,
                          std::span<const Utterance> utterances);
void write_text_corpus(const std::string& path,
                       std::span<const Utterance> utterances);

/// Role of a generated dataset ("train", "text", "dev", "eval"), read from
/// the manifest written next to it by `generate`; empty when unknown.
std::string dataset_role(const std::string& path);

// Experiment configuration ----------------------------------------------------

struct SweepGrids {
  std::vector<double> lambda;
  std::vector<double> beta;
  std::vector<double> lambda_psi;
  std::vector<double> lambda_tau;
  double pair_beta = -0.1;
};

struct ExperimentConfig {
  std::string world_path;
  std::size_t source_train = 10000;
  std::size_t target_text = 10000;
  std::size_t dev = 1000;
  std::size_t eval = 1000;
  int lm_order = 2;
  double add_k = 0.1;
  /// "oracle:source", "oracle:target", "oracle:mixture:<alpha>" or
  /// "table:<path>".
  std::string scorer = "oracle:source";
  FusionConfig fusion;
  BeamConfig beam;
  SweepGrids grids;
  std::optional<std::uint64_t> seed;  // defaults to the world seed
  std::string out_dir = ".";

  /// Throws ConfigError when a referenced file is missing or a size is 0.
  void validate() const;
};

/// Reads a JSON experiment config. Relative paths inside it resolve against
/// the config file's directory.
ExperimentConfig load_experiment_config(const std::string& path);

/// Grid values lo, lo+step, ..., hi computed from integer steps so that
/// values such as 0 come out exact.
std::vector<double> linear_grid(double lo, double hi, double step);

// Commands --------------------------------------------------------------------

void cmd_generate(const ExperimentConfig& cfg);

struct TrainLmOptions {
  std::string corpus;
  int order = 2;
  double add_k = 0.1;
  int vocab_size = 0;
  std::string out;
};
NGramLM cmd_train_lm(const TrainLmOptions& opts);

PerplexityResult cmd_ppl(const std::string& lm_path,
                         const std::string& corpus_path);

struct DecodeOptions {
  std::string dataset;
  std::string world_path;
  std::string scorer = "oracle:source";
  std::string lm_target;
  std::string lm_source;
  FusionConfig fusion;
  BeamConfig beam;
  std::string operating_point;  // optional file written by `sweep`
  std::string out_dir;
  std::string run_name = "decode";
};
WerBreakdown cmd_decode(const DecodeOptions& opts);

enum class SweepKind { kLambdaBeta, kLambdaPair };

struct SweepOptions {
  std::string dataset;
  std::string world_path;
  std::string scorer = "oracle:source";
  std::string lm_target;
  std::string lm_source;
  SweepKind kind = SweepKind::kLambdaBeta;
  FusionMode mode = FusionMode::kDensityRatio;
  SweepGrids grids;
  BeamConfig beam;
  bool include_eos_at_finalization = false;
  std::string out_dir;
  std::string name;  // defaults to the mode (or "pair")
};
SweepResult cmd_sweep(const SweepOptions& opts);

/// Table over the decode runs found under `run_dir` (or the named subset).
/// Writes report.txt and report.csv there and returns the text table.
std::string cmd_report(const std::string& run_dir,
                       const std::vector<std::string>& runs = {});

/// Builds the scorer named by a scorer spec.
std::unique_ptr<StepScorer> make_scorer(const std::string& spec,
                                        const std::string& world_path);

/// Full command-line entry point; returns the process exit code. Errors go
/// to `err` as one JSON object per line.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace drlab
