#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "layerscope/csv.hpp"
#include "layerscope/io.hpp"

namespace layerscope::cli {

namespace fs = std::filesystem;

// Registration state shared by all subcommands. A subcommand's callback
// stores the work in `action`; run() executes it after parsing succeeds.
struct Runner {
  std::ostream& out;
  std::ostream& err;
  std::function<void()> action;
  std::vector<std::shared_ptr<void>> storage;

  template <typename T>
  T& make() {
    auto p = std::make_shared<T>();
    storage.push_back(p);
    return *p;
  }
};

void add_id_commands(CLI::App& root, Runner& runner);
void add_encode_commands(CLI::App& root, Runner& runner);
void add_preprocess_commands(CLI::App& root, Runner& runner);
void add_lens_commands(CLI::App& root, Runner& runner);
void add_rff_commands(CLI::App& root, Runner& runner);
void add_probe_commands(CLI::App& root, Runner& runner);
void add_stats_commands(CLI::App& root, Runner& runner);
void add_synth_commands(CLI::App& root, Runner& runner);

[[noreturn]] void usage_error(const std::string& message);

// Record of one invocation, written into every output's manifest.
Json run_record(const std::string& command, Json params);

void write_table(const fs::path& path, const CsvTable& table, const Json& run);
// Adds {"run": run} to the sidecar written by write_lam / write_matrix.
void stamp_manifest(const fs::path& path, const Json& run);
void ensure_parent(const fs::path& path);

std::vector<double> parse_doubles(const std::string& text);
std::vector<std::size_t> parse_sizes(const std::string& text);
// Comma list, or empty for the default grid.
std::vector<double> parse_alphas(const std::string& text);
std::pair<double, double> parse_range(const std::string& text);
// "<a>:<b>" split at the last colon.
std::pair<std::string, std::string> split_pair(const std::string& text);

// Label TSV with header `index<TAB>label`; rows may come in any order but
// must cover 0..n-1 exactly once.
std::vector<std::size_t> read_labels(const fs::path& path);

std::string num(double v);
std::string num(std::size_t v);

}  // namespace layerscope::cli
