#include "common.hpp"

#include <charconv>
#include <limits>
#include <fstream>

#include "layerscope/encoding.hpp"
#include "layerscope/error.hpp"

namespace layerscope::cli {

void usage_error(const std::string& message) { throw Error("cli", "usage", message); }

Json run_record(const std::string& command, Json params) {
  Json j;
  j["tool"] = "layerscope";
  j["version"] = "0.1.0";
  j["command"] = command;
  j["params"] = std::move(params);
  return j;
}

void ensure_parent(const fs::path& path) {
  const fs::path parent = path.parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec) throw Error("core-io", "io", "cannot create directory " + parent.string());
}

void write_table(const fs::path& path, const CsvTable& table, const Json& run) {
  ensure_parent(path);
  write_csv(path, table);
  write_manifest(path, run);
}

void stamp_manifest(const fs::path& path, const Json& run) {
  Json j = read_manifest(path).value_or(Json::object());
  j["run"] = run;
  write_manifest(path, j);
}

std::vector<double> parse_doubles(const std::string& text) {
  std::vector<double> out;
  for (const std::string& field : split(text, ',')) {
    if (field == "inf") {
      out.push_back(std::numeric_limits<double>::infinity());
      continue;
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size())
      usage_error("'" + text + "' is not a comma-separated list of numbers");
    out.push_back(v);
  }
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> out;
  for (const std::string& field : split(text, ',')) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size())
      usage_error("'" + text + "' is not a comma-separated list of non-negative integers");
    out.push_back(v);
  }
  return out;
}

std::vector<double> parse_alphas(const std::string& text) {
  if (text.empty() || text == "default") return default_alpha_grid();
  return parse_doubles(text);
}

std::pair<double, double> parse_range(const std::string& text) {
  const auto v = parse_doubles(text);
  if (v.size() != 2) usage_error("'" + text + "' must be two comma-separated numbers");
  return {v[0], v[1]};
}

std::pair<std::string, std::string> split_pair(const std::string& text) {
  const auto pos = text.rfind(':');
  if (pos == std::string::npos || pos == 0 || pos + 1 == text.size())
    usage_error("'" + text + "' must have the form <a>:<b>");
  return {text.substr(0, pos), text.substr(pos + 1)};
}

std::vector<std::size_t> read_labels(const fs::path& path) {
  std::ifstream in(path);
  if (!fs::exists(path) || !in) throw Error("core-io", "not-found", path.string() + ": no such file");
  std::string line;
  if (!std::getline(in, line) || line != "index\tlabel")
    throw Error("core-io", "malformed-row", path.string() + ":1: header must be 'index<TAB>label'");
  std::vector<std::pair<std::size_t, std::size_t>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split(line, '\t');
    std::size_t idx = 0, label = 0;
    bool ok = fields.size() == 2;
    if (ok) {
      auto r1 = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), idx);
      auto r2 = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), label);
      ok = r1.ec == std::errc() && r1.ptr == fields[0].data() + fields[0].size() && r2.ec == std::errc() &&
           r2.ptr == fields[1].data() + fields[1].size();
    }
    if (!ok) throw Error("core-io", "malformed-row", path.string() + ":" + std::to_string(line_no) + ": expected index<TAB>label");
    rows.emplace_back(idx, label);
  }
  std::vector<std::size_t> labels(rows.size());
  std::vector<bool> seen(rows.size(), false);
  for (auto [idx, label] : rows) {
    if (idx >= rows.size() || seen[idx])
      throw Error("core-io", "malformed-row", path.string() + ": indices must cover 0.." + std::to_string(rows.size() - 1) + " once");
    seen[idx] = true;
    labels[idx] = label;
  }
  return labels;
}

std::string num(double v) { return format_number(v); }
std::string num(std::size_t v) { return std::to_string(v); }

}  // namespace layerscope::cli
