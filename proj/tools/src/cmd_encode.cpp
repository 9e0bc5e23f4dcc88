#include <cmath>
#include <numeric>
#include <optional>

#include "common.hpp"
#include "layerscope/encoding.hpp"
#include "layerscope/error.hpp"
#include "layerscope/signal.hpp"

namespace layerscope::cli {

namespace {

struct FmriArgs {
  std::string features, timeline, response, out;
  double tr = 0.0;
  std::string delays = "1,2,3,4";
  std::string alphas = "default";
  double test_frac = 0.2;
  std::size_t chunks = 5;
  std::size_t lobes = 3;
  bool normalize = false;
  std::uint64_t seed = 0;
};

struct EcogArgs {
  std::string features, timeline, response, out, per_lag_out;
  double rate = 0.0;
  std::size_t lags = 128;
  std::string lag_range = "-2,2";
  std::string alphas = "default";
  double test_frac = 0.2;
  std::size_t chunks = 5;
  std::uint64_t seed = 0;
};

struct PreprocessArgs {
  std::string input, out;
  double rate = 0.0;
  double notch = 60.0;
  std::size_t harmonics = 3;
  double q = 30.0;
  std::string band = "70,200";
  std::size_t order = 4;
  bool car = false;
  std::size_t envelope = 0;
};

IrregularFeatureSeries load_features(const std::string& features, const std::string& timeline, Manifest& meta) {
  const ActivationMatrix acts = read_activation(features);
  const Timeline words = read_timeline(timeline);
  if (static_cast<std::size_t>(acts.n_samples()) != words.size())
    throw Error("cli", "size-mismatch", features + " has " + std::to_string(acts.n_samples()) + " rows but " + timeline +
                                            " has " + std::to_string(words.size()) + " events");
  meta = acts.meta();
  return IrregularFeatureSeries(words.onsets(), acts.values());
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

Json result_params(const Manifest& meta, const EncodingResult& res) {
  return {{"layer", meta.layer},
          {"model", meta.model},
          {"mean_r", mean(res.r)},
          {"n_train", res.n_train},
          {"n_test", res.n_test},
          {"cv_scheme", {{"kind", "contiguous-chunks"}}},
          {"standardization", "features and responses z-scored with training statistics"}};
}

CsvTable result_table(const EncodingResult& res) {
  CsvTable t{{"channel", "r", "best_lag", "alpha"}, {}};
  for (std::size_t c = 0; c < res.r.size(); ++c)
    t.rows.push_back({res.channel_ids[c], num(res.r[c]),
                      res.best_lag ? num((*res.best_lag)[c]) : "nan", num(res.alpha[c])});
  return t;
}

void fmri(const FmriArgs& a, Runner& r) {
  Manifest meta;
  const IrregularFeatureSeries features = load_features(a.features, a.timeline, meta);
  const ResponseSeries response =
      read_response(a.response, a.tr > 0.0 ? std::optional(Sampling::from_period(a.tr)) : std::nullopt);
  FmriOptions opt;
  opt.delays = parse_sizes(a.delays);
  opt.alphas = parse_alphas(a.alphas);
  opt.test_frac = a.test_frac;
  opt.n_chunks = a.chunks;
  opt.lanczos.lobes = a.lobes;
  opt.lanczos.normalize = a.normalize;
  const EncodingResult res = encode_fmri(features, response, opt);

  Json params = result_params(meta, res);
  params.update({{"features", a.features},
                 {"timeline", a.timeline},
                 {"response", a.response},
                 {"tr", response.sampling().period()},
                 {"delays", opt.delays},
                 {"alphas", opt.alphas},
                 {"alpha_grid_default", a.alphas == "default" || a.alphas.empty()},
                 {"test_frac", a.test_frac},
                 {"n_chunks", a.chunks},
                 {"lanczos_lobes", a.lobes},
                 {"lanczos_normalize", a.normalize},
                 {"seed", a.seed}});
  params["cv_scheme"]["n_chunks"] = a.chunks;
  write_table(a.out, result_table(res), run_record("encode fmri", params));
  r.out << "layer " << meta.layer << ": mean R = " << num(mean(res.r)) << " over " << res.r.size() << " channels\n";
}

void ecog(const EcogArgs& a, Runner& r) {
  Manifest meta;
  const IrregularFeatureSeries features = load_features(a.features, a.timeline, meta);
  const ResponseSeries response =
      read_response(a.response, a.rate > 0.0 ? std::optional(Sampling::from_rate(a.rate)) : std::nullopt);
  EcogOptions opt;
  opt.n_lags = a.lags;
  std::tie(opt.lag_lo, opt.lag_hi) = parse_range(a.lag_range);
  opt.alphas = parse_alphas(a.alphas);
  opt.test_frac = a.test_frac;
  opt.n_chunks = a.chunks;
  const EncodingResult res = encode_ecog(features, response, opt);

  Json params = result_params(meta, res);
  params.update({{"features", a.features},
                 {"timeline", a.timeline},
                 {"response", a.response},
                 {"rate", response.sampling().rate()},
                 {"n_lags", a.lags},
                 {"lag_range", {opt.lag_lo, opt.lag_hi}},
                 {"alphas", opt.alphas},
                 {"alpha_grid_default", a.alphas == "default" || a.alphas.empty()},
                 {"test_frac", a.test_frac},
                 {"test_split", "contiguous final block of events"},
                 {"n_chunks", a.chunks},
                 {"seed", a.seed}});
  params["cv_scheme"]["n_chunks"] = a.chunks;
  const Json run = run_record("encode ecog", params);
  write_table(a.out, result_table(res), run);
  if (!a.per_lag_out.empty()) {
    ensure_parent(a.per_lag_out);
    write_lam(a.per_lag_out, *res.per_lag_r, DType::f64, Json{{"lags", res.lags}, {"channel_ids", res.channel_ids}});
    stamp_manifest(a.per_lag_out, run);
  }
  r.out << "layer " << meta.layer << ": mean best-lag R = " << num(mean(res.r)) << " over " << res.r.size()
        << " channels\n";
}

void preprocess(const PreprocessArgs& a, Runner&) {
  const ResponseSeries in =
      read_response(a.input, a.rate > 0.0 ? std::optional(Sampling::from_rate(a.rate)) : std::nullopt);
  const double rate = in.sampling().rate();
  Matrix x = in.values();
  if (a.car) x = common_average_reference(x);
  if (a.notch > 0.0) x = notch_filter(x, rate, a.notch, a.harmonics, a.q);
  std::optional<std::pair<double, double>> band;
  if (!a.band.empty() && a.band != "none") {
    band = parse_range(a.band);
    x = butterworth_bandpass(x, rate, band->first, band->second, a.order);
  }
  if (a.envelope > 0) x = moving_rms(x, a.envelope);
  Manifest meta = in.meta();
  meta.modality = Modality::ecog;
  ResponseSeries out(std::move(x), Sampling::from_rate(rate), in.channel_ids(), meta);
  ensure_parent(a.out);
  write_matrix(out, a.out);
  stamp_manifest(a.out, run_record("preprocess ecog", {{"input", a.input},
                                                       {"rate", rate},
                                                       {"car", a.car},
                                                       {"notch", a.notch},
                                                       {"harmonics", a.harmonics},
                                                       {"notch_q", a.q},
                                                       {"band", band ? Json{band->first, band->second} : Json()},
                                                       {"order", a.order},
                                                       {"envelope", a.envelope},
                                                       {"steps", "car -> notch -> band-pass -> envelope"}}));
}

}  // namespace

void add_encode_commands(CLI::App& root, Runner& runner) {
  CLI::App* enc = root.add_subcommand("encode", "Ridge encoding models");
  enc->require_subcommand(1);

  auto& f = runner.make<FmriArgs>();
  CLI::App* fm = enc->add_subcommand("fmri", "Lanczos downsampling, FIR delays, ridge, held-out Pearson R");
  fm->add_option("--features", f.features, "Per-word activation LAM1")->required();
  fm->add_option("--timeline", f.timeline, "Word timeline TSV (one event per feature row)")->required();
  fm->add_option("--response", f.response, "Response LAM1 (TRs x voxels)")->required();
  fm->add_option("--tr", f.tr, "TR in seconds (overrides the response manifest)");
  fm->add_option("--delays", f.delays, "FIR delays in TRs")->capture_default_str();
  fm->add_option("--alphas", f.alphas, "Comma-separated ridge penalties, or 'default'")->capture_default_str();
  fm->add_option("--test-frac", f.test_frac, "Held-out final fraction of TRs")->capture_default_str();
  fm->add_option("--chunks", f.chunks, "Contiguous CV chunks")->capture_default_str();
  fm->add_option("--lobes", f.lobes, "Lanczos window lobes")->capture_default_str();
  fm->add_flag("--normalize-lanczos", f.normalize, "Divide each TR by its kernel-weight sum");
  fm->add_option("--seed", f.seed, "Recorded in the manifest (the pipeline is deterministic)")->capture_default_str();
  fm->add_option("--out", f.out, "Output CSV: channel,r,best_lag,alpha")->required();
  fm->callback([&runner, &f] { runner.action = [&runner, &f] { fmri(f, runner); }; });

  auto& e = runner.make<EcogArgs>();
  CLI::App* ec = enc->add_subcommand("ecog", "Per-lag ridge models from word onsets; best lag per electrode");
  ec->add_option("--features", e.features, "Per-word activation LAM1")->required();
  ec->add_option("--timeline", e.timeline, "Word timeline TSV (one event per feature row)")->required();
  ec->add_option("--response", e.response, "Response LAM1 (samples x electrodes)")->required();
  ec->add_option("--rate", e.rate, "Sampling rate in Hz (overrides the response manifest)");
  ec->add_option("--lags", e.lags, "Number of evenly spaced lags")->capture_default_str();
  ec->add_option("--lag-range", e.lag_range, "lo,hi in seconds relative to word onset")->capture_default_str();
  ec->add_option("--alphas", e.alphas, "Comma-separated ridge penalties, or 'default'")->capture_default_str();
  ec->add_option("--test-frac", e.test_frac, "Held-out final fraction of events")->capture_default_str();
  ec->add_option("--chunks", e.chunks, "Contiguous CV chunks")->capture_default_str();
  ec->add_option("--seed", e.seed, "Recorded in the manifest (the pipeline is deterministic)")->capture_default_str();
  ec->add_option("--out", e.out, "Output CSV: channel,r,best_lag,alpha")->required();
  ec->add_option("--per-lag-out", e.per_lag_out, "Optional LAM1 with R per electrode x lag");
  ec->callback([&runner, &e] { runner.action = [&runner, &e] { ecog(e, runner); }; });
}

void add_preprocess_commands(CLI::App& root, Runner& runner) {
  CLI::App* pre = root.add_subcommand("preprocess", "Signal conditioning");
  pre->require_subcommand(1);
  auto& p = runner.make<PreprocessArgs>();
  CLI::App* ec = pre->add_subcommand("ecog", "CAR, line-noise notches, band-pass, optional envelope");
  ec->add_option("--input", p.input, "Raw response LAM1 (samples x electrodes)")->required();
  ec->add_option("--rate", p.rate, "Sampling rate in Hz (overrides the manifest)");
  ec->add_option("--notch", p.notch, "Line frequency in Hz (0 disables)")->capture_default_str();
  ec->add_option("--harmonics", p.harmonics, "Number of notched harmonics")->capture_default_str();
  ec->add_option("--notch-q", p.q, "Notch quality factor")->capture_default_str();
  ec->add_option("--band", p.band, "Band-pass lo,hi in Hz, or 'none'")->capture_default_str();
  ec->add_option("--order", p.order, "Butterworth order")->capture_default_str();
  ec->add_flag("--car", p.car, "Common average reference");
  ec->add_option("--envelope", p.envelope, "Moving-RMS window in samples (0 disables)")->capture_default_str();
  ec->add_option("--out", p.out, "Output LAM1")->required();
  ec->callback([&runner, &p] { runner.action = [&runner, &p] { preprocess(p, runner); }; });
}

}  // namespace layerscope::cli
