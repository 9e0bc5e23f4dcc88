#include <optional>

#include "common.hpp"
#include "layerscope/error.hpp"
#include "layerscope/intrinsic_dim.hpp"
#include "layerscope/random.hpp"

namespace layerscope::cli {

namespace {

struct EstimateArgs {
  std::vector<std::string> inputs;
  std::size_t max_exp = 12;
  std::string k = "auto";
  std::string model;
  std::size_t bootstraps = 5;
  std::uint64_t seed = 0;
  std::string out;
};

struct LinearArgs {
  std::vector<std::string> inputs;
  double threshold = 0.99;
  std::string out;
};

// --k: "auto", an integer, "reference" (built-in table by model name), or a
// CSV with columns layer,k.
std::optional<std::size_t> resolve_k(const EstimateArgs& a, const ActivationMatrix& m, std::optional<CsvTable>& table) {
  if (a.k == "auto") return std::nullopt;
  if (!a.k.empty() && a.k.find_first_not_of("0123456789") == std::string::npos) return std::stoul(a.k);
  if (a.k == "reference") {
    const std::string model = a.model.empty() ? m.meta().model : a.model;
    auto k = reference_scale(model, m.meta().layer);
    if (!k) throw Error("cli", "unknown-model", "no reference scale for model '" + model + "'");
    return k;
  }
  if (!table) table = read_csv(a.k);
  const auto layers = table->numeric_column("layer");
  const auto ks = table->numeric_column("k");
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (static_cast<int>(layers[i]) == m.meta().layer) return static_cast<std::size_t>(ks[i]);
  throw Error("cli", "missing-scale", a.k + ": no k for layer " + std::to_string(m.meta().layer));
}

void estimate(const EstimateArgs& a, Runner& r) {
  CsvTable profile{{"layer", "k", "id", "stderr", "chosen", "bootstrap_mean", "bootstrap_sd", "norm_id", "n_points",
                    "n_removed", "ambient_dim"},
                   {}};
  std::optional<CsvTable> k_table;
  Json per_input = Json::array();
  for (std::size_t i = 0; i < a.inputs.size(); ++i) {
    const ActivationMatrix m = read_activation(a.inputs[i]);
    ProfileOptions po;
    po.max_exp = a.max_exp;
    po.k = resolve_k(a, m, k_table);
    po.bootstraps = a.bootstraps;
    po.seed = derive_seed(a.seed, i);
    const ScaleProfile p = gride_scale_profile(m, po);
    const std::string layer = std::to_string(m.meta().layer);
    for (std::size_t s = 0; s < p.scales.size(); ++s) {
      const bool chosen = p.scales[s] == p.chosen_k;
      const std::string none = "nan";
      profile.rows.push_back({layer, num(p.scales[s]), num(p.estimates[s]), num(p.std_errors[s]), chosen ? "1" : "0",
                              chosen ? num(p.bootstrap_mean) : none, chosen ? num(p.bootstrap_sd) : none,
                              num(normalize_id(p.estimates[s], p.ambient_dim)), num(p.n_points), num(p.n_removed),
                              num(p.ambient_dim)});
    }
    per_input.push_back({{"input", a.inputs[i]}, {"layer", m.meta().layer}, {"model", m.meta().model},
                         {"seed", po.seed}, {"k", po.k ? Json(*po.k) : Json("auto")}});
    r.out << "layer " << layer << ": I_d = " << num(p.chosen_id) << " at k = " << p.chosen_k << ", bootstrap "
          << num(p.bootstrap_mean) << " +- " << num(p.bootstrap_sd) << '\n';
  }
  write_table(a.out, profile,
              run_record("id estimate", {{"inputs", per_input},
                                         {"max_exp", a.max_exp},
                                         {"k", a.k},
                                         {"bootstraps", a.bootstraps},
                                         {"bootstrap_scheme", "size-N resampling with replacement, duplicates dropped"},
                                         {"seed", a.seed},
                                         {"plateau_rule", "median-of-3 smoothing, argmin |dln I_d / dln k|"},
                                         {"max_removed_fraction", 0.2}}));
}

void linear(const LinearArgs& a, Runner&) {
  CsvTable table{{"layer", "pca_d", "pr_d", "ambient_dim"}, {}};
  for (const std::string& input : a.inputs) {
    const ActivationMatrix m = read_activation(input);
    const LinearDims dims = linear_dims(m, a.threshold);
    table.rows.push_back({std::to_string(m.meta().layer), num(dims.pca_d), num(dims.pr_d),
                          num(static_cast<std::size_t>(m.n_dims()))});
  }
  write_table(a.out, table, run_record("id linear", {{"inputs", a.inputs}, {"variance_threshold", a.threshold}}));
}

}  // namespace

void add_id_commands(CLI::App& root, Runner& runner) {
  CLI::App* id = root.add_subcommand("id", "Intrinsic and linear dimension estimates");
  id->require_subcommand(1);

  auto& e = runner.make<EstimateArgs>();
  CLI::App* est = id->add_subcommand("estimate", "GRIDE scale analysis on LAM1 activation matrices");
  est->add_option("--input", e.inputs, "Activation LAM1 file (repeat for several layers)")->required();
  est->add_option("--max-exp", e.max_exp, "Largest scale exponent: k = 2^0 .. 2^max-exp")->capture_default_str();
  est->add_option("--k", e.k, "auto | <int> | reference | <csv with layer,k>")->capture_default_str();
  est->add_option("--model", e.model, "Model name for --k reference (default: from manifest)");
  est->add_option("--bootstraps", e.bootstraps, "Bootstrap resamples at the chosen scale")->capture_default_str();
  est->add_option("--seed", e.seed, "Master seed")->capture_default_str();
  est->add_option("--out", e.out, "Profile CSV: layer,k,id,stderr,chosen,bootstrap_mean,bootstrap_sd,...")->required();
  est->callback([&runner, &e] { runner.action = [&runner, &e] { estimate(e, runner); }; });

  auto& l = runner.make<LinearArgs>();
  CLI::App* lin = id->add_subcommand("linear", "PCA and participation-ratio dimensions");
  lin->add_option("--input", l.inputs, "Activation LAM1 file (repeat for several layers)")->required();
  lin->add_option("--threshold", l.threshold, "Explained-variance fraction for pca_d")->capture_default_str();
  lin->add_option("--out", l.out, "Output CSV")->required();
  lin->callback([&runner, &l] { runner.action = [&runner, &l] { linear(l, runner); }; });
}

}  // namespace layerscope::cli
