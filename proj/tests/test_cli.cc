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

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "drlab/cli.h"
#include "drlab/synthworld.h"
#include "oracles.h"

using namespace drlab;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "drlab");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out;
  std::ostringstream err;
  Result r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("drlab_cli_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_json(const fs::path& p, const nlohmann::json& j) {
  std::ofstream out(p);
  out << j.dump(2);
}

// Small experiment config next to a copy of the default world.
fs::path small_config(const fs::path& dir, int text = 2000, int dev = 150, int eval = 150) {
  write_json(dir / "world.json", default_world_json());
  write_json(dir / "config.json",
             {{"world", "world.json"},
              {"sizes", {{"source_train", 2000}, {"target_text", text}, {"dev", dev}, {"eval", eval}}},
              {"lm", {{"order", 2}, {"add_k", 0.1}}},
              {"seed", 7}});
  return dir / "config.json";
}

void check_json_error(const Result& r, int code) {
  CHECK(r.code == code);
  const auto j = nlohmann::json::parse(r.err.substr(0, r.err.find('\n')));
  CHECK(j.at("exit_code").get<int>() == code);
  CHECK_FALSE(j.at("error").get<std::string>().empty());
}

}  // namespace

TEST_CASE("generate is deterministic and honours the sizes") {
  const fs::path dir = scratch("generate");
  const auto cfg = small_config(dir, 10000).string();
  REQUIRE(run({"generate", "--config", cfg, "--out", (dir / "a").string()}).code == 0);
  REQUIRE(run({"generate", "--config", cfg, "--out", (dir / "b").string()}).code == 0);
  for (const char* f : {"source_train.tsv", "target_text.txt", "target_dev.tsv", "target_eval.tsv", "world.json", "manifest.json"}) {
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  CHECK(lines_of(dir / "a" / "source_train.tsv").size() == 2000);
  CHECK(lines_of(dir / "a" / "target_text.txt").size() == 10000);
  CHECK(lines_of(dir / "a" / "target_dev.tsv").size() == 150);
  CHECK(lines_of(dir / "a" / "target_eval.tsv").size() == 150);
  CHECK(slurp(dir / "a" / "target_text.txt").find('\t') == std::string::npos);
  CHECK(dataset_role((dir / "a" / "target_dev.tsv").string()) == "dev");
  CHECK(dataset_role((dir / "a" / "target_eval.tsv").string()) == "eval");
  const auto manifest = nlohmann::json::parse(slurp(dir / "a" / "manifest_generate.json"));
  CHECK(manifest.at("seed").get<std::uint64_t>() == 7);
  CHECK(manifest.contains("wall_time_seconds"));
  CHECK(manifest.at("inputs").size() == 1);

  // A different seed changes the data.
  REQUIRE(run({"generate", "--config", cfg, "--seed", "8", "--out", (dir / "c").string()}).code == 0);
  CHECK(slurp(dir / "a" / "target_dev.tsv") != slurp(dir / "c" / "target_dev.tsv"));

  // Target text label distribution against the analytic prior marginals.
  const SynthWorld world = default_world();
  const auto corpus = read_transcripts((dir / "a" / "target_text.txt").string());
  const double n = static_cast<double>(corpus.size());
  for (int s = 1; s <= 4; ++s) {
    double mean = 0.0;
    double second = 0.0;
    for (const auto& [w, p] : world.prior(Domain::kTarget).table()) {
      double c = 0.0;
      for (Symbol x : w) c += x.id == s ? 1.0 : 0.0;
      mean += p * c;
      second += p * c * c;
    }
    double observed = 0.0;
    for (const auto& w : corpus) {
      for (Symbol x : w) observed += x.id == s ? 1.0 : 0.0;
    }
    CHECK(std::abs(observed / n - mean) <= 3.0 * std::sqrt((second - mean * mean) / n));
  }
}

TEST_CASE("train-lm round trip and error codes") {
  const fs::path dir = scratch("train");
  const auto cfg = small_config(dir).string();
  REQUIRE(run({"generate", "--config", cfg, "--out", (dir / "data").string()}).code == 0);
  const fs::path lm_path = dir / "lm" / "target.lm";
  const auto r = run({"train-lm", "--config", cfg, "--corpus", (dir / "data" / "target_text.txt").string(), "--out", lm_path.string()});
  REQUIRE(r.code == 0);
  const NGramLM loaded = load_ngram_file(lm_path.string());
  const NGramLM direct = train_ngram(read_transcripts((dir / "data" / "target_text.txt").string()), 2, 0.1, Vocabulary(4));
  CHECK(loaded == direct);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const LabelSeq h = testing::random_labels(rng, 4, 3);
    const Symbol s{1 + static_cast<int>(rng.uniform() * 4)};
    CHECK(loaded.log_prob(s, h) == direct.log_prob(s, h));
  }
  CHECK(fs::exists(dir / "lm" / "manifest_train-lm_target.json"));

  const auto missing = run({"train-lm", "--corpus", (dir / "nope.txt").string(), "--vocab-size", "4", "--out", (dir / "x.lm").string()});
  check_json_error(missing, kExitConfig);
  CHECK(missing.err.find("nope.txt") != std::string::npos);

  {
    std::ofstream bad(dir / "bad.lm");
    bad << "ngram two 4 0.1\n";
  }
  const auto corrupted = run({"ppl", "--lm", (dir / "bad.lm").string(), "--corpus", (dir / "data" / "target_text.txt").string()});
  check_json_error(corrupted, kExitData);
  CHECK(corrupted.code != missing.code);

  const auto ppl = run({"ppl", "--lm", lm_path.string(), "--corpus", (dir / "data" / "target_eval.tsv").string()});
  CHECK(ppl.code == 0);
  CHECK(ppl.out.rfind("ppl ", 0) == 0);

  check_json_error(run({"train-lm", "--bogus"}), kExitConfig);
  check_json_error(run({}), kExitConfig);
}

TEST_CASE("decode on a deterministic world is error free") {
  const fs::path dir = scratch("decode_det");
  write_json(dir / "world.json", world_to_json(deterministic_world(4, 3, 3)));
  write_json(dir / "config.json", {{"world", "world.json"}, {"sizes", {{"source_train", 10}, {"target_text", 10}, {"dev", 10}, {"eval", 80}}}});
  REQUIRE(run({"generate", "--config", (dir / "config.json").string(), "--out", (dir / "data").string()}).code == 0);
  const auto r = run({"decode", "--config", (dir / "config.json").string(), "--dataset", (dir / "data" / "target_eval.tsv").string(),
                      "--fusion", "none", "--out", (dir / "run").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("WER 0.000000", 0) == 0);
}

TEST_CASE("decode outputs are self-consistent") {
  const fs::path dir = scratch("decode");
  const auto cfg = small_config(dir).string();
  const std::string data = (dir / "data").string();
  REQUIRE(run({"generate", "--config", cfg, "--out", data}).code == 0);
  REQUIRE(run({"train-lm", "--config", cfg, "--corpus", data + "/target_text.txt", "--out", (dir / "target.lm").string()}).code == 0);
  REQUIRE(run({"train-lm", "--config", cfg, "--corpus", data + "/source_train.tsv", "--out", (dir / "source.lm").string()}).code == 0);
  const std::string eval = data + "/target_eval.tsv";
  const std::string lms_t = (dir / "target.lm").string();
  const std::string lms_s = (dir / "source.lm").string();

  REQUIRE(run({"decode", "--config", cfg, "--dataset", eval, "--fusion", "none", "--out", (dir / "none").string(), "--name", "none"}).code == 0);
  REQUIRE(run({"decode", "--config", cfg, "--dataset", eval, "--fusion", "density_ratio", "--lambda-psi", "0", "--lambda-tau", "0",
               "--lm-target", lms_t, "--lm-source", lms_s, "--out", (dir / "zero").string()}).code == 0);
  auto hyp_columns = [](const fs::path& p) {
    std::vector<std::string> out;
    for (const auto& line : lines_of(p)) {
      if (line.rfind("#", 0) == 0) continue;
      out.push_back(line);
    }
    return out;
  };
  const auto none = hyp_columns(dir / "none" / "hyps.tsv");
  CHECK(none == hyp_columns(dir / "zero" / "hyps.tsv"));
  CHECK(none.size() == 150);

  // Recompute corpus WER from the hypotheses file.
  std::vector<RefHyp> pairs;
  for (const auto& line : none) {
    const auto t1 = line.find('\t');
    const auto t2 = line.find('\t', t1 + 1);
    pairs.emplace_back(parse_labels(line.substr(0, t1)), parse_labels(line.substr(t1 + 1, t2 - t1 - 1)));
  }
  const auto recomputed = corpus_wer(pairs);
  const auto summary = lines_of(dir / "none" / "summary.csv");
  REQUIRE(summary.size() == 2);
  CHECK(summary[0] == "run,mode,lambda_psi,lambda_tau,beta,wer,del,ins,sub,n_ref_tokens");
  char expected[64];
  std::snprintf(expected, sizeof expected, ",%.6f,", recomputed.wer);
  CHECK(summary[1].find(expected) != std::string::npos);
  CHECK(slurp(dir / "none" / "hyps.tsv").find("# summary wer=") != std::string::npos);
  CHECK(fs::exists(dir / "none" / "manifest_decode.json"));

  // Vocabulary mismatch is caught before any decoding.
  {
    std::ofstream c(dir / "v3.txt");
    c << "1 2\n3\n";
  }
  REQUIRE(run({"train-lm", "--corpus", (dir / "v3.txt").string(), "--vocab-size", "3", "--out", (dir / "v3.lm").string()}).code == 0);
  const auto mismatch = run({"decode", "--config", cfg, "--dataset", eval, "--fusion", "shallow", "--lambda-tau", "0.5",
                             "--lm-target", (dir / "v3.lm").string(), "--out", (dir / "mismatch").string()});
  check_json_error(mismatch, kExitConfig);
  CHECK(mismatch.err.find("vocabulary mismatch") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "mismatch" / "hyps.tsv"));

  // Missing LM for the requested fusion mode.
  check_json_error(run({"decode", "--config", cfg, "--dataset", eval, "--fusion", "density_ratio", "--lm-target", lms_t,
                        "--out", (dir / "nolm").string()}),
                   kExitConfig);
  // Malformed dataset line.
  {
    std::ofstream bad(dir / "bad.tsv");
    bad << "1 2\t3\n1 x\t2\n";
  }
  const auto bad = run({"decode", "--config", cfg, "--dataset", (dir / "bad.tsv").string(), "--out", (dir / "bad").string()});
  check_json_error(bad, kExitData);
  CHECK(bad.err.find(":2:") != std::string::npos);
}

TEST_CASE("sweep, operating point, and report") {
  const fs::path dir = scratch("sweep");
  const auto cfg = small_config(dir).string();
  const std::string data = (dir / "data").string();
  REQUIRE(run({"generate", "--config", cfg, "--out", data}).code == 0);
  const std::string lt = (dir / "target.lm").string();
  const std::string ls = (dir / "source.lm").string();
  REQUIRE(run({"train-lm", "--config", cfg, "--corpus", data + "/target_text.txt", "--out", lt}).code == 0);
  REQUIRE(run({"train-lm", "--config", cfg, "--corpus", data + "/source_train.tsv", "--out", ls}).code == 0);
  const std::string dev = data + "/target_dev.tsv";
  const std::string sweeps = (dir / "sweeps").string();

  REQUIRE(run({"sweep", "--config", cfg, "--dataset", dev, "--mode", "shallow", "--lambdas", "0.3", "--betas", "0.6",
               "--lm-target", lt, "--out", sweeps, "--name", "single"}).code == 0);
  CHECK(lines_of(dir / "sweeps" / "sweep_single.csv").size() == 3);

  const std::vector<std::string> sweep_args{"sweep", "--config", cfg, "--dataset", dev, "--mode", "density_ratio",
                                            "--lambdas", "0:0.8:0.4", "--betas", "-0.2,0,0.2", "--lm-target", lt,
                                            "--lm-source", ls, "--out", sweeps};
  REQUIRE(run(sweep_args).code == 0);
  const std::string first = slurp(dir / "sweeps" / "sweep_density_ratio.csv");
  REQUIRE(run(sweep_args).code == 0);
  CHECK(slurp(dir / "sweeps" / "sweep_density_ratio.csv") == first);
  const auto rows = lines_of(dir / "sweeps" / "sweep_density_ratio.csv");
  REQUIRE(rows.size() == 11);
  double best = 1e9;
  std::string best_row;
  for (std::size_t i = 1; i + 1 < rows.size(); ++i) {
    const double w = std::stod(rows[i].substr(rows[i].find(',', rows[i].find(',', rows[i].find(',', rows[i].find(',') + 1) + 1) + 1) + 1));
    if (w < best) {
      best = w;
      best_row = rows[i];
    }
  }
  CHECK(rows.back() == "# argmin," + best_row);

  const auto pair = run({"sweep", "--config", cfg, "--dataset", dev, "--kind", "lambda-pair", "--lambda-psis", "0,0.5",
                         "--lambda-taus", "0.5,1", "--lm-target", lt, "--lm-source", ls, "--out", sweeps});
  REQUIRE(pair.code == 0);
  CHECK(lines_of(dir / "sweeps" / "sweep_pair.csv").size() == 6);
  CHECK(slurp(dir / "sweeps" / "sweep_pair.csv").find(",-0.100000,") != std::string::npos);

  // Sweeps refuse the eval split.
  const auto on_eval = run({"sweep", "--config", cfg, "--dataset", data + "/target_eval.tsv", "--mode", "shallow",
                            "--lambdas", "0.3", "--betas", "0", "--lm-target", lt, "--out", sweeps});
  check_json_error(on_eval, kExitConfig);

  // Eval decodes consume the chosen operating points.
  const std::string eval = data + "/target_eval.tsv";
  const std::string runs = (dir / "runs").string();
  REQUIRE(run({"decode", "--config", cfg, "--dataset", eval, "--fusion", "none", "--out", runs + "/base", "--name", "base"}).code == 0);
  REQUIRE(run({"decode", "--config", cfg, "--dataset", eval, "--operating-point", sweeps + "/operating_point_pair.json",
               "--lm-target", lt, "--lm-source", ls, "--out", runs + "/dr_pair", "--name", "dr_pair"}).code == 0);
  REQUIRE(run({"decode", "--config", cfg, "--dataset", eval, "--operating-point", sweeps + "/operating_point_density_ratio.json",
               "--lm-target", lt, "--lm-source", ls, "--out", runs + "/dr", "--name", "dr"}).code == 0);
  REQUIRE(run({"decode", "--config", cfg, "--dataset", eval, "--operating-point", sweeps + "/operating_point_single.json",
               "--lm-target", lt, "--out", runs + "/sf", "--name", "sf"}).code == 0);
  const auto op = nlohmann::json::parse(slurp(dir / "sweeps" / "operating_point_single.json"));
  CHECK(op.at("mode") == "shallow");
  CHECK(op.at("lambda_tau").get<double>() == 0.3);
  CHECK(lines_of(dir / "runs" / "sf" / "summary.csv")[1].rfind("sf,shallow,0.000000,0.300000,0.600000,", 0) == 0);

  const auto single = run({"report", "--out", runs, "--runs", "sf"});
  REQUIRE(single.code == 0);
  CHECK(lines_of(dir / "runs" / "report.csv").size() == 2);

  const auto all = run({"report", "--out", runs});
  REQUIRE(all.code == 0);
  const auto report = lines_of(dir / "runs" / "report.csv");
  REQUIRE(report.size() == 5);
  const std::vector<std::string> order{"base", "sf", "dr", "dr_pair"};
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto summary = lines_of(dir / "runs" / order[i] / "summary.csv")[1];
    // The report row ends with the run's summary row verbatim.
    CHECK(report[i + 1].size() >= summary.size());
    CHECK(report[i + 1].substr(report[i + 1].size() - summary.size()) == summary);
  }
  CHECK(slurp(dir / "runs" / "report.txt") == all.out);

  const auto missing = run({"report", "--out", runs, "--runs", "base,ghost,phantom"});
  check_json_error(missing, kExitData);
  CHECK(missing.err.find("ghost, phantom") != std::string::npos);
}

TEST_CASE("full pipeline is reproducible") {
  auto pipeline = [](const fs::path& dir) {
    const auto cfg = small_config(dir, 1000, 100, 100).string();
    const std::string data = (dir / "data").string();
    REQUIRE(run({"generate", "--config", cfg, "--out", data}).code == 0);
    const std::string lt = (dir / "t.lm").string();
    const std::string ls = (dir / "s.lm").string();
    REQUIRE(run({"train-lm", "--config", cfg, "--corpus", data + "/target_text.txt", "--out", lt}).code == 0);
    REQUIRE(run({"train-lm", "--config", cfg, "--corpus", data + "/source_train.tsv", "--out", ls}).code == 0);
    REQUIRE(run({"sweep", "--config", cfg, "--dataset", data + "/target_dev.tsv", "--lambdas", "0:1:0.5", "--betas", "-0.2,0.2",
                 "--lm-target", lt, "--lm-source", ls, "--out", (dir / "sw").string()}).code == 0);
    REQUIRE(run({"decode", "--config", cfg, "--dataset", data + "/target_eval.tsv", "--operating-point",
                 (dir / "sw" / "operating_point_density_ratio.json").string(), "--lm-target", lt, "--lm-source", ls,
                 "--out", (dir / "runs" / "dr").string(), "--name", "dr"}).code == 0);
    REQUIRE(run({"report", "--out", (dir / "runs").string()}).code == 0);
    return slurp(dir / "sw" / "sweep_density_ratio.csv") + slurp(dir / "runs" / "dr" / "hyps.tsv") +
           slurp(dir / "runs" / "report.csv");
  };
  CHECK(pipeline(scratch("repro_a")) == pipeline(scratch("repro_b")));
}

TEST_CASE("the installed binary reports exit codes") {
  const fs::path dir = scratch("binary");
  const std::string cmd = std::string(DRLAB_CLI_PATH) + " train-lm --corpus " + (dir / "none.txt").string() +
                          " --vocab-size 4 --out " + (dir / "x.lm").string() + " 2> " + (dir / "err.txt").string();
  const int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) == kExitConfig);
  CHECK(slurp(dir / "err.txt").find("\"exit_code\":2") != std::string::npos);
}
