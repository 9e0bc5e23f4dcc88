#pragma once

// Drives the command-line tool in-process through a small end-to-end run.

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "layerscope/cli.hpp"
#include "layerscope/io.hpp"

namespace layerscope::testing {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

inline CliResult run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv = {"layerscope"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliResult r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

// Every file under `root`, keyed by relative path.
inline std::map<std::string, std::string> snapshot(const std::filesystem::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream bytes;
    bytes << in.rdbuf();
    files[std::filesystem::relative(entry.path(), root).string()] = bytes.str();
  }
  return files;
}

// Fixture -> id -> encoding -> trajectory table, plus the lens, RFF,
// probe and preprocessing commands. Returns the first failing command, or "".
inline std::string run_pipeline(const std::filesystem::path& dir, const std::string& threads) {
  const std::string d = dir.string();
  std::vector<std::vector<std::string>> steps;
  steps.push_back({"synth", "fixture", "--layers", "6", "--words", "600", "--channels", "4", "--seed", "3",
                   "--out-dir", d + "/fx"});
  std::vector<std::string> id = {"id", "estimate", "--max-exp", "5", "--bootstraps", "2", "--seed", "5", "--out",
                                 d + "/id.csv"};
  std::vector<std::string> table = {"stats", "table", "--id", d + "/id.csv", "--model", "fixture", "--permutations",
                                    "500", "--seed", "2", "--out", d + "/table.csv", "--profile-out",
                                    d + "/profile.csv", "--per-channel-out", d + "/channels.csv", "--encoding"};
  for (int l = 0; l < 6; ++l) {
    const std::string layer = d + "/fx/layer_0" + std::to_string(l) + ".lam";
    id.push_back("--input");
    id.push_back(layer);
    const std::string enc = d + "/enc_" + std::to_string(l) + ".csv";
    steps.push_back({"encode", "fmri", "--features", layer, "--timeline", d + "/fx/timeline.tsv", "--response",
                     d + "/fx/response.lam", "--out", enc});
    table.push_back(enc);
  }
  steps.push_back(id);
  steps.push_back({"id", "linear", "--input", d + "/fx/layer_02.lam", "--out", d + "/linear.csv"});
  steps.push_back(table);
  steps.push_back({"rff", "gen", "--d-out", "128", "--timeline", d + "/fx/timeline.tsv", "--seed", "4", "--out",
                   d + "/rff.lam"});
  steps.push_back({"lens", "fit", "--layer-acts", d + "/fx/layer_03.lam", "--final-acts", d + "/fx/layer_05.lam",
                   "--method", "gradient", "--lr", "1e-3", "--epochs", "3", "--seed", "8", "--out", d + "/lens.lam"});
  steps.push_back({"preprocess", "ecog", "--input", d + "/fx/response.lam", "--rate", "100", "--band", "5,20",
                   "--notch", "0", "--car", "--out", d + "/pre.lam"});
  steps.push_back({"synth", "encoding-case", "--times", "200", "--features", "4", "--channels", "3", "--seed", "6",
                   "--out-dir", d + "/case"});
  steps.push_back({"stats", "correlate", "--x", d + "/profile.csv:id", "--y", d + "/profile.csv:enc_r_mean",
                   "--permutations", "300", "--seed", "1", "--out", d + "/corr.csv"});

  for (auto& step : steps) {
    std::vector<std::string> args = {"--threads", threads};
    args.insert(args.end(), step.begin(), step.end());
    const CliResult r = run_cli(args);
    if (r.code != 0) return step[0] + " " + step[1] + ": " + r.err;
  }
  return "";
}

}  // namespace layerscope::testing
