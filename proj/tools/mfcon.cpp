// Copyright (c) 2026 The MFCon Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// mfcon: train, evaluate, sweep and export the synthetic benchmark.
//
//   mfcon train --synthetic --loss mfcon --lambda 0.01 --out runs/a
//   mfcon train --data corpus/ --loss combined --lambda1 0.03 --lambda2 0.03
//   mfcon eval --checkpoint runs/a/model.ckpt --trials t.txt --manifest m.txt
//   mfcon sweep --axis lambda --values 0.01,0.03,0.1,0.3 --out runs/sweep
//   mfcon synth --out corpus/
//
// Exit codes: 0 ok, 2 usage/config, 3 data, 4 numerical failure.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mfcon/checkpoint.hpp"
#include "mfcon/config.hpp"
#include "mfcon/errors.hpp"
#include "mfcon/pipeline.hpp"

#ifndef MFCON_VERSION
#define MFCON_VERSION "0.0.0"
#endif
#ifndef MFCON_GIT
#define MFCON_GIT "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 2;
constexpr int kData = 3;
constexpr int kNumerical = 4;

std::string utc_now() {
  const std::time_t t =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_atomic(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw mfcon::DataError("cannot write " + tmp.string());
    os << text;
    if (!os) throw mfcon::DataError("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

struct RunOptions {
  std::string config;
  bool synthetic = false;
  std::string data;
  std::string loss;
  std::optional<double> lambda, lambda1, lambda2;
  std::optional<uint64_t> seed;
  std::optional<int> epochs;
  std::string contrastive;
  std::string out = "run";
};

void add_run_flags(CLI::App* app, RunOptions& o) {
  app->add_option("--config", o.config,
                  "JSON config file (or a run manifest.json to replay)");
  app->add_flag("--synthetic", o.synthetic,
                "Use the synthetic benchmark (the default without --data)");
  app->add_option("--data", o.data,
                  "Directory written by `mfcon synth` (or any with "
                  "train/manifest.txt and optionally eval/manifest.txt + "
                  "eval/trials.txt)");
  app->add_option("--loss", o.loss,
                  "am_softmax | am_supcon | mfcon | combined | supcon | "
                  "ntxent | triplet | npair");
  app->add_option("--lambda", o.lambda, "Contrastive coefficient");
  app->add_option("--lambda1", o.lambda1, "Per-block coefficient (combined)");
  app->add_option("--lambda2", o.lambda2,
                  "Speaker-level SupCon coefficient (combined)");
  app->add_option("--contrastive", o.contrastive,
                  "Per-block loss: supcon | ntxent | triplet | npair");
  app->add_option("--seed", o.seed, "Run seed");
  app->add_option("--epochs", o.epochs, "Training epochs");
  app->add_option("--out", o.out, "Output directory");
}

mfcon::RunConfig base_config(const std::string& path) {
  if (path.empty()) return mfcon::RunConfig::desk_scale();
  std::ifstream is(path);
  if (!is) throw mfcon::ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  // A run manifest carries the full configuration under "config".
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw mfcon::ConfigError("config is not valid JSON: " +
                             std::string(e.what()));
  }
  if (j.is_object() && j.contains("run_manifest") && j.contains("config")) {
    return mfcon::run_config_from_json(j["config"].dump());
  }
  return mfcon::run_config_from_json(ss.str());
}

// The standalone contrastive losses are the per-block term of the MFCon
// objective with a fixed coefficient of 0.1.
bool is_standalone_contrastive(const std::string& s) {
  return s == "supcon" || s == "ntxent" || s == "triplet" || s == "npair";
}

mfcon::RunConfig resolve_config(const RunOptions& o) {
  mfcon::RunConfig cfg = base_config(o.config);
  if (!o.data.empty()) {
    if (o.synthetic) throw mfcon::ConfigError("--synthetic and --data clash");
    const fs::path dir = fs::absolute(o.data);
    if (!fs::is_directory(dir)) {
      throw mfcon::ConfigError("data directory does not exist: " +
                               dir.string());
    }
    cfg.data.train_manifest = (dir / "train" / "manifest.txt").string();
    if (!fs::exists(cfg.data.train_manifest)) {
      throw mfcon::ConfigError("missing " + cfg.data.train_manifest);
    }
    const fs::path em = dir / "eval" / "manifest.txt";
    const fs::path tr = dir / "eval" / "trials.txt";
    if (fs::exists(em) && fs::exists(tr)) {
      cfg.data.eval_manifest = em.string();
      cfg.data.trials = tr.string();
    }
  } else if (o.synthetic) {
    cfg.data = {};
  }
  if (!o.loss.empty()) {
    if (is_standalone_contrastive(o.loss)) {
      cfg.train.objective = mfcon::Objective::kMFCon;
      cfg.train.loss.contrastive_kind =
          mfcon::parse_contrastive_kind(o.loss);
      cfg.train.loss.lambda = 0.1;
    } else {
      cfg.train.objective = mfcon::parse_objective(o.loss);
    }
  }
  if (!o.contrastive.empty()) {
    cfg.train.loss.contrastive_kind =
        mfcon::parse_contrastive_kind(o.contrastive);
  }
  if (o.lambda) cfg.train.loss.lambda = *o.lambda;
  if (o.lambda1) cfg.train.loss.lambda1 = *o.lambda1;
  if (o.lambda2) cfg.train.loss.lambda2 = *o.lambda2;
  if (o.seed) cfg.train.seed = *o.seed;
  if (o.epochs) cfg.train.epochs = *o.epochs;
  cfg.validate();
  return cfg;
}

json eval_json(const mfcon::EvalResult& e) {
  return {{"eer", e.eer},
          {"eer_threshold", e.eer_threshold},
          {"mindcf", e.mindcf},
          {"mindcf_threshold", e.mindcf_threshold},
          {"num_trials", e.scores.size()}};
}

void print_metrics(const mfcon::EvalResult& e) {
  std::printf("EER %.2f%%  minDCF(p=0.01) %.4f\n", 100.0 * e.eer, e.mindcf);
}

// Trains one configuration into `out`. Data must already be loaded so a bad
// data set never leaves a half-written run directory behind.
mfcon::EvalResult train_into(const mfcon::RunConfig& cfg,
                             const mfcon::RunData& data, const fs::path& out) {
  fs::create_directories(out);
  const fs::path manifest_path = out / "manifest.json";
  json manifest = {{"run_manifest", 1},
                   {"version", MFCON_VERSION},
                   {"git", MFCON_GIT},
                   {"seed", cfg.train.seed},
                   {"config", json::parse(mfcon::to_json(cfg))},
                   {"outputs",
                    {{"log", "log.jsonl"},
                     {"checkpoint", "model.ckpt"},
                     {"scores", data.trials.empty() ? "" : "scores.txt"},
                     {"metrics", data.trials.empty() ? "" : "metrics.json"}}},
                   {"start_time", utc_now()},
                   {"end_time", nullptr},
                   {"status", "running"}};
  write_atomic(manifest_path, manifest.dump(2) + "\n");
  write_atomic(out / "config.json", mfcon::to_json(cfg) + "\n");

  std::ofstream log(out / "log.jsonl", std::ios::trunc);
  mfcon::TrainHooks hooks;
  hooks.on_step = [&](const mfcon::StepRecord& r) {
    log << mfcon::step_record_json(r) << '\n';
  };
  hooks.on_eval = [&](int64_t step, const mfcon::EvalResult& e) {
    json j = eval_json(e);
    j["event"] = "eval";
    j["step"] = step;
    log << j.dump() << '\n';
  };
  mfcon::RunOutcome run;
  try {
    run = mfcon::run_training(cfg, data, hooks);
  } catch (const mfcon::NumericalError&) {
    log.flush();
    manifest["end_time"] = utc_now();
    manifest["status"] = "numerical_failure";
    write_atomic(manifest_path, manifest.dump(2) + "\n");
    throw;
  }
  log.flush();
  mfcon::save_checkpoint(out / "model.ckpt", run.model);
  mfcon::EvalResult result;
  if (run.result.final_eval) {
    result = *run.result.final_eval;
    mfcon::write_scores(out / "scores.txt", result.scores);
    write_atomic(out / "metrics.json", eval_json(result).dump(2) + "\n");
    manifest["metrics"] = eval_json(result);
  }
  manifest["end_time"] = utc_now();
  manifest["status"] = "completed";
  manifest["steps"] = run.result.history.size();
  write_atomic(manifest_path, manifest.dump(2) + "\n");
  return result;
}

int cmd_train(const RunOptions& o) {
  const mfcon::RunConfig cfg = resolve_config(o);
  const mfcon::RunData data = mfcon::load_run_data(cfg);
  const mfcon::EvalResult r = train_into(cfg, data, o.out);
  if (!data.trials.empty()) print_metrics(r);
  std::printf("wrote %s\n", (fs::path(o.out) / "model.ckpt").c_str());
  return kOk;
}

struct EvalOptions {
  std::string checkpoint;
  std::string trials;
  std::string manifest;
  std::string scores;
};

int cmd_eval(const EvalOptions& o) {
  if (!fs::exists(o.checkpoint)) {
    throw mfcon::ConfigError("checkpoint does not exist: " + o.checkpoint);
  }
  const mfcon::Model model = mfcon::load_checkpoint(o.checkpoint);
  const auto trials = mfcon::read_trial_list(o.trials);
  const auto audio = mfcon::load_manifest_audio(mfcon::read_manifest(o.manifest));
  const mfcon::UtteranceStore store = mfcon::make_store(audio);
  const mfcon::EvalResult r = mfcon::evaluate(model, trials, store);
  const fs::path scores =
      o.scores.empty() ? fs::path(o.checkpoint).parent_path() / "scores.txt"
                       : fs::path(o.scores);
  mfcon::write_scores(scores, r.scores);
  print_metrics(r);
  return kOk;
}

struct SweepOptions {
  RunOptions run;
  std::string axis;
  std::vector<std::string> values;
};

const std::vector<std::string>& default_values(const std::string& axis) {
  static const std::map<std::string, std::vector<std::string>> d = {
      {"lambda", {"0.01", "0.03", "0.1", "0.3"}},
      {"lambda12", {"0.01:0.01", "0.03:0.03", "0.1:0.1", "0.3:0.3"}},
      {"contrastive_kind", {"triplet", "npair", "ntxent", "supcon"}},
      {"sharing", {"none", "pool", "proj", "both"}}};
  auto it = d.find(axis);
  if (it == d.end()) throw mfcon::ConfigError("unknown sweep axis: " + axis);
  return it->second;
}

double parse_double(const std::string& s) {
  size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size()) {
    throw mfcon::ConfigError("not a number: " + s);
  }
  return v;
}

mfcon::RunConfig apply_axis(mfcon::RunConfig cfg, const std::string& axis,
                            const std::string& value) {
  if (axis == "lambda") {
    cfg.train.objective = mfcon::Objective::kMFCon;
    cfg.train.loss.lambda = parse_double(value);
  } else if (axis == "lambda12") {
    const auto colon = value.find(':');
    if (colon == std::string::npos) {
      throw mfcon::ConfigError("lambda12 values look like 0.03:0.03");
    }
    cfg.train.objective = mfcon::Objective::kCombined;
    cfg.train.loss.lambda1 = parse_double(value.substr(0, colon));
    cfg.train.loss.lambda2 = parse_double(value.substr(colon + 1));
  } else if (axis == "contrastive_kind") {
    cfg.train.objective = mfcon::Objective::kMFCon;
    cfg.train.loss.contrastive_kind = mfcon::parse_contrastive_kind(value);
    cfg.train.loss.lambda = 0.1;
  } else if (axis == "sharing") {
    auto& h = cfg.model.head;
    if (value == "none") {
      h.share_pooling = h.share_projection = false;
    } else if (value == "pool") {
      h.share_pooling = true;
      h.share_projection = false;
    } else if (value == "proj") {
      h.share_pooling = false;
      h.share_projection = true;
    } else if (value == "both") {
      h.share_pooling = h.share_projection = true;
    } else {
      throw mfcon::ConfigError("sharing values: none, pool, proj, both");
    }
    cfg.train.objective = mfcon::Objective::kMFCon;
  } else {
    throw mfcon::ConfigError("unknown sweep axis: " + axis);
  }
  cfg.validate();
  return cfg;
}

int cmd_sweep(const SweepOptions& o) {
  if (!o.run.data.empty()) {
    throw mfcon::ConfigError("sweep runs on the synthetic benchmark only");
  }
  const std::vector<std::string> values =
      o.values.empty() ? default_values(o.axis) : o.values;
  mfcon::RunConfig base = resolve_config(o.run);
  std::vector<mfcon::RunConfig> rows;
  for (const auto& v : values) rows.push_back(apply_axis(base, o.axis, v));
  const mfcon::RunData data = mfcon::load_run_data(base);
  if (data.trials.empty()) {
    throw mfcon::ConfigError("sweep needs evaluation trials");
  }
  const fs::path out(o.run.out);
  fs::create_directories(out);
  std::ostringstream table;
  table << o.axis << "\teer\tmindcf\n";
  for (size_t i = 0; i < rows.size(); ++i) {
    std::string dir = o.axis + "=" + values[i];
    for (char& c : dir) {
      if (c == ':' || c == '/') c = '_';
    }
    std::printf("[%zu/%zu] %s\n", i + 1, rows.size(), dir.c_str());
    std::fflush(stdout);
    const mfcon::EvalResult r = train_into(rows[i], data, out / dir);
    char line[256];
    std::snprintf(line, sizeof(line), "%s\t%.6f\t%.6f\n", values[i].c_str(),
                  r.eer, r.mindcf);
    table << line;
    std::fputs(line, stdout);
    // Rewritten after every row so an interrupted sweep keeps what it has.
    write_atomic(out / "results.tsv", table.str());
  }
  return kOk;
}

int cmd_synth(const RunOptions& o) {
  mfcon::RunConfig cfg = base_config(o.config);
  if (o.seed) cfg.synth.seed = *o.seed;
  cfg.validate();
  const mfcon::RunData data = mfcon::synthetic_run_data(cfg);
  const fs::path out(o.out);
  mfcon::export_corpus(out / "train", data.train, {});
  mfcon::export_corpus(out / "eval", data.eval, data.trials);
  std::printf("wrote %zu training and %zu evaluation utterances, %zu trials "
              "to %s\n",
              data.train.size(), data.eval.size(), data.trials.size(),
              out.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-scale feature contrastive training for speaker "
               "verification"};
  app.set_version_flag("--version", MFCON_VERSION);
  app.require_subcommand(1);

  RunOptions train_opts;
  auto* train = app.add_subcommand("train", "Train a model");
  add_run_flags(train, train_opts);

  EvalOptions eval_opts;
  auto* eval = app.add_subcommand("eval", "Score a trial list");
  eval->add_option("--checkpoint", eval_opts.checkpoint, "Model checkpoint")
      ->required();
  eval->add_option("--trials", eval_opts.trials,
                   "Trial list: <0|1> <enroll> <test> per line")
      ->required();
  eval->add_option("--manifest", eval_opts.manifest,
                   "Audio manifest: <utt_id> <speaker_id> <path> per line")
      ->required();
  eval->add_option("--scores", eval_opts.scores,
                   "Score output (default: next to the checkpoint)");

  SweepOptions sweep_opts;
  auto* sweep = app.add_subcommand("sweep", "Train one model per axis value");
  add_run_flags(sweep, sweep_opts.run);
  sweep->add_option("--axis", sweep_opts.axis,
                    "lambda | lambda12 | contrastive_kind | sharing")
      ->required();
  sweep->add_option("--values", sweep_opts.values,
                    "Comma-separated values (default: the standard grid for the axis)")
      ->delimiter(',');

  RunOptions synth_opts;
  auto* synth = app.add_subcommand("synth", "Export the synthetic benchmark");
  synth->add_option("--config", synth_opts.config, "JSON config file");
  synth->add_option("--seed", synth_opts.seed, "Corpus seed");
  synth->add_option("--out", synth_opts.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*train) return cmd_train(train_opts);
    if (*eval) return cmd_eval(eval_opts);
    if (*sweep) return cmd_sweep(sweep_opts);
    if (*synth) return cmd_synth(synth_opts);
  } catch (const mfcon::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kUsage;
  } catch (const mfcon::NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumerical;
  } catch (const mfcon::Error& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kData;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kData;
  }
  return kUsage;
}
