#include <cmath>
#include <cstdio>

#include "common.hpp"
#include "layerscope/synth.hpp"

namespace layerscope::cli {

namespace {

struct CubeArgs {
  std::size_t n = 10000, d = 2, ambient = 50;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::string out;
};

struct RollArgs {
  std::size_t n = 10000, ambient = 3;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::string out;
};

struct CaseArgs {
  std::size_t times = 4000, features = 16, channels = 64;
  std::string snr = "1";
  double period = 2.0;
  double word_rate = 2.5;
  std::uint64_t seed = 0;
  std::string out_dir;
};

struct FixtureArgs {
  std::size_t layers = 12, words = 4000, ambient = 32, channels = 16;
  double snr = 1.0;
  std::uint64_t seed = 0;
  std::string out_dir;
};

void write_activation(const ActivationMatrix& m, const fs::path& path, const Json& run) {
  ensure_parent(path);
  write_matrix(m, path);
  stamp_manifest(path, run);
}

void cube(const CubeArgs& a, Runner&) {
  write_activation(hypercube(a.n, a.d, a.ambient, a.noise, a.seed), a.out,
                   run_record("synth hypercube",
                              {{"n", a.n}, {"d", a.d}, {"ambient", a.ambient}, {"noise_sd", a.noise}, {"seed", a.seed}}));
}

void roll(const RollArgs& a, Runner&) {
  write_activation(swiss_roll(a.n, a.ambient, a.seed, a.noise), a.out,
                   run_record("synth swiss-roll", {{"n", a.n}, {"ambient", a.ambient}, {"noise_sd", a.noise}, {"seed", a.seed}}));
}

void encoding(const CaseArgs& a, Runner& r) {
  const std::vector<double> snr = parse_doubles(a.snr);
  EncodingCaseOptions opt;
  opt.period = a.period;
  opt.words_per_second = a.word_rate;
  const EncodingCase c = encoding_case(a.times, a.features, a.channels, snr, a.seed, opt);
  Json snr_json = Json::array();
  for (double s : snr) snr_json.push_back(std::isinf(s) ? Json("inf") : Json(s));
  const Json run = run_record("synth encoding-case", {{"times", a.times},
                                                      {"features", a.features},
                                                      {"channels", a.channels},
                                                      {"snr", snr_json},
                                                      {"period", a.period},
                                                      {"words_per_second", a.word_rate},
                                                      {"delays", opt.delays},
                                                      {"seed", a.seed}});
  const fs::path dir = a.out_dir;
  fs::create_directories(dir);
  Manifest meta;
  meta.model = "encoding-case";
  write_activation(ActivationMatrix(c.features.features, meta), dir / "features.lam", run);
  write_timeline(c.timeline, dir / "timeline.tsv");
  write_manifest(dir / "timeline.tsv", run);
  write_matrix(c.response, dir / "response.lam");
  stamp_manifest(dir / "response.lam", run);
  CsvTable ceiling{{"channel", "snr", "ceiling"}, {}};
  for (std::size_t ch = 0; ch < c.ceiling.size(); ++ch)
    ceiling.rows.push_back({c.response.channel_ids()[ch], num(snr.size() == 1 ? snr[0] : snr[ch]), num(c.ceiling[ch])});
  write_table(dir / "ceiling.csv", ceiling, run);
  r.out << "wrote encoding case to " << dir.string() << '\n';
}

void fixture(const FixtureArgs& a, Runner& r) {
  FixtureOptions opt;
  opt.n_words = a.words;
  opt.ambient = a.ambient;
  opt.channels = a.channels;
  opt.snr = a.snr;
  const LayeredFixture fx = layered_model_fixture(a.layers, a.seed, opt);
  const Json run = run_record("synth fixture", {{"layers", a.layers},
                                                {"words", a.words},
                                                {"ambient", a.ambient},
                                                {"latent", opt.latent},
                                                {"channels", a.channels},
                                                {"snr", a.snr},
                                                {"period", opt.period},
                                                {"word_gap", opt.word_gap},
                                                {"seed", a.seed}});
  const fs::path dir = a.out_dir;
  fs::create_directories(dir);
  CsvTable truth{{"layer", "dim", "peak"}, {}};
  for (std::size_t l = 0; l < fx.layers.size(); ++l) {
    char name[32];
    std::snprintf(name, sizeof name, "layer_%02zu.lam", l);
    write_activation(fx.layers[l], dir / name, run);
    truth.rows.push_back({std::to_string(l), num(fx.layer_dims[l]), l == fx.peak_layer ? "1" : "0"});
  }
  write_timeline(fx.timeline, dir / "timeline.tsv");
  write_manifest(dir / "timeline.tsv", run);
  write_matrix(fx.response, dir / "response.lam");
  stamp_manifest(dir / "response.lam", run);
  write_table(dir / "truth.csv", truth, run);
  r.out << "wrote " << fx.layers.size() << "-layer fixture (peak layer " << fx.peak_layer << ") to " << dir.string()
        << '\n';
}

}  // namespace

void add_synth_commands(CLI::App& root, Runner& runner) {
  CLI::App* synth = root.add_subcommand("synth", "Seeded ground-truth generators");
  synth->require_subcommand(1);

  auto& c = runner.make<CubeArgs>();
  CLI::App* hc = synth->add_subcommand("hypercube", "Uniform d-cube, orthonormally embedded in D dims");
  hc->add_option("--n", c.n, "Points")->capture_default_str();
  hc->add_option("--d", c.d, "Intrinsic dimension")->capture_default_str();
  hc->add_option("--ambient", c.ambient, "Ambient dimension D")->capture_default_str();
  hc->add_option("--noise", c.noise, "Isotropic Gaussian noise sd")->capture_default_str();
  hc->add_option("--seed", c.seed, "Seed")->capture_default_str();
  hc->add_option("--out", c.out, "Output LAM1")->required();
  hc->callback([&runner, &c] { runner.action = [&runner, &c] { cube(c, runner); }; });

  auto& s = runner.make<RollArgs>();
  CLI::App* sr = synth->add_subcommand("swiss-roll", "Swiss roll rotated into D dims");
  sr->add_option("--n", s.n, "Points")->capture_default_str();
  sr->add_option("--ambient", s.ambient, "Ambient dimension D (>= 3)")->capture_default_str();
  sr->add_option("--noise", s.noise, "Isotropic Gaussian noise sd")->capture_default_str();
  sr->add_option("--seed", s.seed, "Seed")->capture_default_str();
  sr->add_option("--out", s.out, "Output LAM1")->required();
  sr->callback([&runner, &s] { runner.action = [&runner, &s] { roll(s, runner); }; });

  auto& e = runner.make<CaseArgs>();
  CLI::App* ec = synth->add_subcommand("encoding-case", "Word features and responses with a known noise ceiling");
  ec->add_option("--times", e.times, "TRs")->capture_default_str();
  ec->add_option("--features", e.features, "Feature dimension")->capture_default_str();
  ec->add_option("--channels", e.channels, "Response channels")->capture_default_str();
  ec->add_option("--snr", e.snr, "One SNR, or one per channel (comma-separated; 'inf' allowed)")->capture_default_str();
  ec->add_option("--period", e.period, "TR in seconds")->capture_default_str();
  ec->add_option("--word-rate", e.word_rate, "Mean words per second")->capture_default_str();
  ec->add_option("--seed", e.seed, "Seed")->capture_default_str();
  ec->add_option("--out-dir", e.out_dir, "Directory for features.lam, timeline.tsv, response.lam, ceiling.csv")
      ->required();
  ec->callback([&runner, &e] { runner.action = [&runner, &e] { encoding(e, runner); }; });

  auto& f = runner.make<FixtureArgs>();
  CLI::App* fx = synth->add_subcommand("fixture", "Layered model whose I_d and encoding profiles peak together");
  fx->add_option("--layers", f.layers, "Number of layers (>= 6)")->capture_default_str();
  fx->add_option("--words", f.words, "Words (points per layer)")->capture_default_str();
  fx->add_option("--ambient", f.ambient, "Hidden dimension")->capture_default_str();
  fx->add_option("--channels", f.channels, "Response channels")->capture_default_str();
  fx->add_option("--snr", f.snr, "Response SNR")->capture_default_str();
  fx->add_option("--seed", f.seed, "Seed")->capture_default_str();
  fx->add_option("--out-dir", f.out_dir, "Directory for layer_XX.lam, timeline.tsv, response.lam, truth.csv")
      ->required();
  fx->callback([&runner, &f] { runner.action = [&runner, &f] { fixture(f, runner); }; });
}

}  // namespace layerscope::cli
