#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>

#include "common.hpp"
#include "layerscope/error.hpp"
#include "layerscope/intrinsic_dim.hpp"
#include "layerscope/random.hpp"
#include "layerscope/stats.hpp"

namespace layerscope::cli {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct CorrelateArgs {
  std::string x, y, out;
  std::string method = "spearman";
  std::size_t permutations = kDefaultPermutations;
  std::uint64_t seed = 0;
};

struct TableArgs {
  std::vector<std::string> profiles;
  std::string id;
  std::vector<std::string> encoding;
  std::vector<std::string> surprisal;
  std::string model;
  std::string method = "spearman";
  std::size_t permutations = kDefaultPermutations;
  std::uint64_t seed = 0;
  std::string out, profile_out, per_channel_out;
  double threshold = -1.0;
  double alpha = 0.05;
};

std::vector<double> column_from(const std::string& spec) {
  const auto [path, col] = split_pair(spec);
  return read_csv(path).numeric_column(col);
}

std::string report_line(const std::string& label, const CorrelationReport& c) {
  return label + ": " + to_string(c.method) + " rho = " + num(c.rho) + ", p = " + num(c.p_value) + " (n = " +
         std::to_string(c.n) + ", " + std::to_string(c.n_permutations) + " permutations)";
}

void correlate(const CorrelateArgs& a, Runner& r) {
  const CorrelationReport c =
      permutation_test(column_from(a.x), column_from(a.y), parse_corr_method(a.method), a.permutations, a.seed);
  r.out << report_line("correlation", c) << '\n';
  if (a.out.empty()) return;
  CsvTable t{{"method", "rho", "p_value", "n", "n_permutations", "seed"},
             {{to_string(c.method), num(c.rho), num(c.p_value), num(c.n), num(c.n_permutations), std::to_string(c.seed)}}};
  write_table(a.out, t,
              run_record("stats correlate", {{"x", a.x},
                                             {"y", a.y},
                                             {"method", a.method},
                                             {"permutations", a.permutations},
                                             {"seed", a.seed},
                                             {"sidedness", "two-sided, add-one"},
                                             {"permuted", "y order"}}));
}

std::vector<LayerSeries> read_profile(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const auto layer = t.numeric_column("layer");
  const auto id = t.numeric_column("id");
  const auto ep = t.numeric_column("enc_r_mean");
  auto optional_column = [&](const char* name) {
    for (const auto& h : t.header)
      if (h == name) return t.numeric_column(name);
    return std::vector<double>(layer.size(), kNaN);
  };
  const auto norm_id = optional_column("norm_id");
  const auto s = optional_column("surprisal");
  const auto ns = optional_column("norm_surprisal");
  std::vector<LayerSeries> rows;
  for (std::size_t i = 0; i < layer.size(); ++i)
    rows.push_back({static_cast<int>(layer[i]), id[i], norm_id[i], s[i], ns[i], ep[i]});
  return rows;
}

struct Assembled {
  std::vector<LayerSeries> rows;
  std::vector<std::string> channels;
  std::map<int, std::vector<double>> channel_r;  // layer -> R per channel
  std::string modality;
};

int manifest_layer(const fs::path& path) {
  // CSV sidecars hold the run record itself; LAM1 sidecars nest it under "run".
  const auto m = read_manifest(path);
  if (m) {
    const Json& run = m->contains("run") ? (*m)["run"] : *m;
    if (run.contains("params") && run["params"].contains("layer")) return run["params"]["layer"].get<int>();
  }
  throw Error("cli", "missing-layer", path.string() + ": manifest does not record a layer");
}

// Builds the per-layer profile from `id estimate`, `encode` and `lens eval`
// outputs of one model.
Assembled assemble(const TableArgs& a) {
  Assembled out;
  // One row per layer: the chosen scale; the bootstrap mean when available.
  const CsvTable id = read_csv(a.id);
  const auto all_layers = id.numeric_column("layer");
  const auto chosen = id.numeric_column("chosen");
  const auto estimates = id.numeric_column("id");
  const auto boot = id.numeric_column("bootstrap_mean");
  const auto ambient = id.numeric_column("ambient_dim");
  std::vector<double> id_layers, ids, norm;
  for (std::size_t i = 0; i < all_layers.size(); ++i) {
    if (chosen[i] != 1.0) continue;
    id_layers.push_back(all_layers[i]);
    ids.push_back(std::isfinite(boot[i]) ? boot[i] : estimates[i]);
    norm.push_back(normalize_id(ids.back(), static_cast<std::size_t>(ambient[i])));
  }
  std::map<int, double> ep;
  for (const std::string& path : a.encoding) {
    const CsvTable t = read_csv(path);
    const int layer = manifest_layer(path);
    const auto r = t.numeric_column("r");
    if (out.channels.empty()) out.channels = [&] {
      std::vector<std::string> ids_;
      const std::size_t c = t.column("channel");
      for (const auto& row : t.rows) ids_.push_back(row[c]);
      return ids_;
    }();
    if (r.size() != out.channels.size()) throw Error("cli", "size-mismatch", path + ": channel count differs");
    if (ep.count(layer)) throw Error("stats", "duplicate-layer", path + ": layer " + std::to_string(layer) + " given twice");
    ep[layer] = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
    out.channel_r[layer] = r;
    const auto m = read_manifest(path);
    out.modality = m && m->value("command", std::string()) == "encode ecog" ? "ecog" : "fmri";
  }
  std::map<int, std::pair<double, double>> surprisal;
  for (const std::string& path : a.surprisal) {
    const CsvTable t = read_csv(path);
    const auto layers = t.numeric_column("layer");
    const auto s = t.numeric_column("mean_surprisal");
    const auto ns = t.numeric_column("normalized");
    for (std::size_t i = 0; i < layers.size(); ++i) surprisal[static_cast<int>(layers[i])] = {s[i], ns[i]};
  }
  for (std::size_t i = 0; i < id_layers.size(); ++i) {
    const int layer = static_cast<int>(id_layers[i]);
    if (!ep.count(layer)) throw Error("stats", "missing-series", "no encoding result for layer " + std::to_string(layer));
    LayerSeries row{layer, ids[i], norm[i], kNaN, kNaN, ep[layer]};
    if (surprisal.count(layer)) std::tie(row.surprisal, row.norm_surprisal) = surprisal[layer];
    out.rows.push_back(row);
  }
  return out;
}

void table(const TableArgs& a, Runner& r) {
  if (a.profiles.empty() == a.id.empty())
    usage_error("give either --profiles or --id with --encoding");
  if (!a.id.empty() && a.encoding.empty()) usage_error("--id needs --encoding files");
  const CorrMethod method = parse_corr_method(a.method);

  std::vector<std::pair<std::string, std::vector<LayerSeries>>> models;
  std::optional<Assembled> assembled;
  if (!a.id.empty()) {
    assembled = assemble(a);
    models.emplace_back(a.model.empty() ? fs::path(a.id).stem().string() : a.model, assembled->rows);
  } else {
    for (const std::string& p : a.profiles) models.emplace_back(fs::path(p).stem().string(), read_profile(p));
  }

  CsvTable out{{"model", "series", "rho", "p_value", "significant", "n_layers", "n_permutations"}, {}};
  CsvTable profile{{"layer", "id", "norm_id", "surprisal", "norm_surprisal", "enc_r_mean"}, {}};
  for (std::size_t m = 0; m < models.size(); ++m) {
    const TrajectoryTable t = trajectory_table(models[m].second, method, a.permutations, derive_seed(a.seed, m));
    auto add = [&](const std::string& series, const CorrelationReport& c) {
      out.rows.push_back({models[m].first, series, num(c.rho), num(c.p_value), c.p_value < a.alpha ? "*" : "",
                          num(t.rows.size()), num(c.n_permutations)});
      r.out << report_line(models[m].first + " " + series + " vs EP", c) << '\n';
    };
    if (t.surprisal_vs_ep) add("surprisal", *t.surprisal_vs_ep);
    add("id", t.id_vs_ep);
    if (m == 0)
      for (const LayerSeries& s : t.rows)
        profile.rows.push_back({std::to_string(s.layer), num(s.id), num(s.norm_id), num(s.surprisal),
                                num(s.norm_surprisal), num(s.enc_r_mean)});
  }

  const Json run = run_record("stats table", {{"profiles", a.profiles},
                                              {"id", a.id},
                                              {"encoding", a.encoding},
                                              {"surprisal", a.surprisal},
                                              {"method", a.method},
                                              {"permutations", a.permutations},
                                              {"seed", a.seed},
                                              {"significance_level", a.alpha},
                                              {"permuted", "layer order of the second series"}});
  write_table(a.out, out, run);
  if (!a.profile_out.empty()) write_table(a.profile_out, profile, run);

  if (!a.per_channel_out.empty()) {
    if (!assembled) usage_error("--per-channel-out needs --id and --encoding");
    const double threshold =
        a.threshold >= 0.0 ? a.threshold : (assembled->modality == "ecog" ? kEcogChannelThreshold : kFmriChannelThreshold);
    std::vector<double> ids;
    Matrix enc(static_cast<Index>(assembled->rows.size()), static_cast<Index>(assembled->channels.size()));
    for (std::size_t l = 0; l < assembled->rows.size(); ++l) {
      ids.push_back(assembled->rows[l].id);
      const auto& rr = assembled->channel_r[assembled->rows[l].layer];
      for (std::size_t c = 0; c < rr.size(); ++c) enc(static_cast<Index>(l), static_cast<Index>(c)) = rr[c];
    }
    const ChannelCorrelations cc = channel_correlations(ids, enc, threshold, method);
    CsvTable pc{{"channel", "rho", "max_r", "selected"}, {}};
    for (std::size_t c = 0; c < cc.rho.size(); ++c)
      pc.rows.push_back({assembled->channels[c], num(cc.rho[c]), num(cc.max_r[c]), cc.selected[c] ? "1" : "0"});
    Json pc_run = run;
    pc_run["params"]["threshold"] = threshold;
    write_table(a.per_channel_out, pc, pc_run);
  }
}

}  // namespace

void add_stats_commands(CLI::App& root, Runner& runner) {
  CLI::App* stats = root.add_subcommand("stats", "Correlations, permutation tests, trajectory tables");
  stats->require_subcommand(1);

  auto& c = runner.make<CorrelateArgs>();
  CLI::App* co = stats->add_subcommand("correlate", "Correlation of two CSV columns with a permutation p-value");
  co->add_option("--x", c.x, "<file.csv>:<column>")->required();
  co->add_option("--y", c.y, "<file.csv>:<column>")->required();
  co->add_option("--method", c.method, "pearson | spearman")->check(CLI::IsMember({"pearson", "spearman"}))->capture_default_str();
  co->add_option("--permutations", c.permutations, "Number of permutations")->capture_default_str();
  co->add_option("--seed", c.seed, "Permutation seed")->capture_default_str();
  co->add_option("--out", c.out, "Optional CSV report");
  co->callback([&runner, &c] { runner.action = [&runner, &c] { correlate(c, runner); }; });

  auto& t = runner.make<TableArgs>();
  CLI::App* tb = stats->add_subcommand("table", "Layerwise trajectory correlations (surprisal and I_d vs encoding)");
  tb->add_option("--profiles", t.profiles,
                 "Per-model profile CSVs: layer,id,norm_id,surprisal,norm_surprisal,enc_r_mean");
  tb->add_option("--id", t.id, "Output of 'id estimate' (alternative to --profiles)");
  tb->add_option("--encoding", t.encoding, "Outputs of 'encode fmri|ecog', one per layer");
  tb->add_option("--surprisal", t.surprisal, "Outputs of 'lens eval'");
  tb->add_option("--model", t.model, "Model name for the assembled profile");
  tb->add_option("--method", t.method, "pearson | spearman")->check(CLI::IsMember({"pearson", "spearman"}))->capture_default_str();
  tb->add_option("--permutations", t.permutations, "Number of permutations")->capture_default_str();
  tb->add_option("--seed", t.seed, "Permutation seed")->capture_default_str();
  tb->add_option("--alpha", t.alpha, "Significance level for the marker column")->capture_default_str();
  tb->add_option("--out", t.out, "Output CSV: model,series,rho,p_value,significant,n_layers,n_permutations")->required();
  tb->add_option("--profile-out", t.profile_out, "Optional CSV with the assembled per-layer profile");
  tb->add_option("--per-channel-out", t.per_channel_out, "Optional CSV with rho(I_d, R) per channel");
  tb->add_option("--threshold", t.threshold, "Channel selection threshold on max R (default 0.2 fMRI, 0.1 ECoG)");
  tb->callback([&runner, &t] { runner.action = [&runner, &t] { table(t, runner); }; });
}

}  // namespace layerscope::cli
