#include <optional>

#include "common.hpp"
#include "layerscope/error.hpp"
#include "layerscope/lens.hpp"
#include "layerscope/probes.hpp"
#include "layerscope/rff.hpp"

namespace layerscope::cli {

namespace {

struct LensFitArgs {
  std::string layer_acts, final_acts, out;
  std::string method = "direct";
  double lr = 1e-4;
  std::size_t epochs = 10;
  std::size_t batch = 256;
  std::uint64_t seed = 0;
  int layer = -1;
};

struct LensEvalArgs {
  std::string lens, unembed, unembed_bias, acts, targets, out;
};

struct RffArgs {
  std::size_t d_in = 64;
  std::size_t d_out = 512;
  double sigma = 1.0;
  std::string timeline, out;
  std::uint64_t seed = 0;
};

struct ClassifyArgs {
  std::string train, val, test, out;
  std::size_t classes = 0;
  double lr = 5e-3;
  std::size_t epochs = 15;
  std::size_t batch = 128;
  std::uint64_t seed = 0;
  std::string task = "classify";
  int layer = -1;
};

struct RegressArgs {
  std::string train, test, out;
  std::string alphas = "default";
  std::size_t chunks = 5;
  std::string task = "regress";
  int layer = -1;
};

void lens_fit(const LensFitArgs& a, Runner& r) {
  const ActivationMatrix h = read_activation(a.layer_acts);
  const ActivationMatrix target = read_activation(a.final_acts);
  const int layer = a.layer >= 0 ? a.layer : h.meta().layer;
  const LensMethod method = parse_lens_method(a.method);
  Json params{{"layer_acts", a.layer_acts}, {"final_acts", a.final_acts}, {"method", a.method}, {"layer", layer}};
  AffineLens lens;
  if (method == LensMethod::direct) {
    lens = fit_lens_direct(h.values(), target.values(), layer);
  } else {
    GradientOptions opt;
    opt.lr = a.lr;
    opt.epochs = a.epochs;
    opt.batch_size = a.batch;
    opt.seed = a.seed;
    const GradientFit fit = fit_lens_gradient(h.values(), target.values(), opt, layer);
    lens = fit.lens;
    params.update({{"lr", a.lr},
                   {"epochs", a.epochs},
                   {"batch_size", a.batch},
                   {"val_frac", opt.val_frac},
                   {"seed", a.seed},
                   {"init", "A = I, b = 0"},
                   {"best_epoch", fit.best_epoch},
                   {"val_loss", fit.val_loss}});
  }
  const double residual = lens_residual(lens, h.values(), target.values());
  params["residual"] = residual;
  ensure_parent(a.out);
  save_lens(lens, a.out);
  const Json run = run_record("lens fit", params);
  stamp_manifest(a.out, run);
  stamp_manifest(lens_bias_path(a.out), run);
  r.out << "layer " << layer << ": residual " << num(residual) << '\n';
}

void lens_eval(const LensEvalArgs& a, Runner& r) {
  const AffineLens lens = load_lens(a.lens);
  const LamFile u = read_lam(a.unembed);
  std::optional<Vector> bias;
  if (!a.unembed_bias.empty()) {
    const LamFile b = read_lam(a.unembed_bias);
    if (b.values.rows() != 1 && b.values.cols() != 1)
      throw Error("cli", "size-mismatch", a.unembed_bias + " must be a single row or column");
    bias = b.values.reshaped();
  }
  const Unembedding unembed(u.values, bias);
  const ActivationMatrix acts = read_activation(a.acts);
  const std::vector<std::size_t> targets = read_labels(a.targets);
  const double s = mean_surprisal(lens, unembed, acts.values(), targets);
  const auto vocab = static_cast<std::size_t>(unembed.vocab_size());
  const double normalized = normalize_surprisal(s, vocab);
  CsvTable t{{"layer", "mean_surprisal", "normalized"}, {{std::to_string(lens.layer), num(s), num(normalized)}}};
  write_table(a.out, t,
              run_record("lens eval", {{"lens", a.lens},
                                       {"unembed", a.unembed},
                                       {"unembed_bias", a.unembed_bias},
                                       {"acts", a.acts},
                                       {"targets", a.targets},
                                       {"layer", lens.layer},
                                       {"vocab", vocab},
                                       {"n", targets.size()}}));
  r.out << "layer " << lens.layer << ": surprisal " << num(s) << " (" << num(normalized) << " of ln V)\n";
}

void rff_gen(const RffArgs& a, Runner&) {
  const Timeline words = read_timeline(a.timeline);
  const RffMap map = rff_new(a.d_in, a.d_out, a.sigma, a.seed);
  const IrregularFeatureSeries features = rff_word_features(words, map, a.seed);
  Manifest meta;
  meta.model = "rff-" + std::to_string(a.d_out);
  ensure_parent(a.out);
  write_matrix(ActivationMatrix(features.features, meta), a.out);
  stamp_manifest(a.out, run_record("rff gen", {{"timeline", a.timeline},
                                               {"d_in", a.d_in},
                                               {"d_out", a.d_out},
                                               {"sigma", a.sigma},
                                               {"seed", a.seed},
                                               {"d_in_default", a.d_in == 64},
                                               {"sigma_default", a.sigma == 1.0}}));
}

ProbeData load_probe(const std::string& spec) {
  const auto [features, labels] = split_pair(spec);
  ProbeData d{read_activation(features).values(), read_labels(labels)};
  return d;
}

void write_probe(const ProbeResult& res, int layer, const std::string& out, const Json& run, Runner& r) {
  CsvTable t{{"layer", "task", "metric", "value"}, {{std::to_string(layer), res.task, res.metric, num(res.value)}}};
  write_table(out, t, run);
  r.out << res.task << " layer " << layer << ": " << res.metric << " " << num(res.value) << '\n';
}

int layer_of(int flag, const std::string& spec) {
  if (flag >= 0) return flag;
  return read_activation(split_pair(spec).first).meta().layer;
}

void classify(const ClassifyArgs& a, Runner& r) {
  ClassifierOptions opt;
  opt.classes = a.classes;
  opt.lr = a.lr;
  opt.epochs = a.epochs;
  opt.batch_size = a.batch;
  opt.seed = a.seed;
  opt.task = a.task;
  const ProbeResult res = train_classifier_probe(load_probe(a.train), load_probe(a.val), load_probe(a.test), opt);
  const int layer = layer_of(a.layer, a.train);
  write_probe(res, layer, a.out,
              run_record("probe classify", {{"train", a.train},
                                            {"val", a.val},
                                            {"test", a.test},
                                            {"classes", a.classes},
                                            {"lr", a.lr},
                                            {"epochs", a.epochs},
                                            {"batch_size", a.batch},
                                            {"init", "zero"},
                                            {"input_standardization", "train statistics"},
                                            {"seed", a.seed},
                                            {"layer", layer},
                                            {"best_epoch", res.best_epoch},
                                            {"val_accuracy", res.val_value}}),
              r);
}

void regress(const RegressArgs& a, Runner& r) {
  const auto [xtr, ytr] = split_pair(a.train);
  const auto [xte, yte] = split_pair(a.test);
  const std::vector<double> alphas = parse_alphas(a.alphas);
  const ProbeResult res = train_regression_probe(read_activation(xtr).values(), read_lam(ytr).values,
                                                 read_activation(xte).values(), read_lam(yte).values, alphas, a.chunks,
                                                 a.task);
  const int layer = layer_of(a.layer, a.train);
  write_probe(res, layer, a.out,
              run_record("probe regress", {{"train", a.train},
                                           {"test", a.test},
                                           {"alphas", alphas},
                                           {"n_chunks", a.chunks},
                                           {"layer", layer}}),
              r);
}

}  // namespace

void add_lens_commands(CLI::App& root, Runner& runner) {
  CLI::App* lens = root.add_subcommand("lens", "Affine surprisal lens");
  lens->require_subcommand(1);

  auto& f = runner.make<LensFitArgs>();
  CLI::App* fit = lens->add_subcommand("fit", "Fit an affine map from a layer to the final layer");
  fit->add_option("--layer-acts", f.layer_acts, "Layer activations LAM1 (N x d)")->required();
  fit->add_option("--final-acts", f.final_acts, "Final-layer activations LAM1 (N x d)")->required();
  fit->add_option("--method", f.method, "direct | gradient")->check(CLI::IsMember({"direct", "gradient"}))->capture_default_str();
  fit->add_option("--lr", f.lr, "Adam learning rate (gradient)")->capture_default_str();
  fit->add_option("--epochs", f.epochs, "Epochs (gradient)")->capture_default_str();
  fit->add_option("--batch", f.batch, "Minibatch size (gradient)")->capture_default_str();
  fit->add_option("--seed", f.seed, "Seed for the split and minibatch order (gradient)")->capture_default_str();
  fit->add_option("--layer", f.layer, "Layer index (default: from manifest)");
  fit->add_option("--out", f.out, "Lens path (A; b goes to <out>.bias)")->required();
  fit->callback([&runner, &f] { runner.action = [&runner, &f] { lens_fit(f, runner); }; });

  auto& e = runner.make<LensEvalArgs>();
  CLI::App* ev = lens->add_subcommand("eval", "Mean next-token surprisal through a lens");
  ev->add_option("--lens", e.lens, "Lens path written by 'lens fit'")->required();
  ev->add_option("--unembed", e.unembed, "Unembedding LAM1 (V x d)")->required();
  ev->add_option("--unembed-bias", e.unembed_bias, "Optional unembedding bias LAM1 (1 x V)");
  ev->add_option("--acts", e.acts, "Layer activations LAM1 (N x d)")->required();
  ev->add_option("--targets", e.targets, "Next-token ids TSV: index<TAB>label")->required();
  ev->add_option("--out", e.out, "Output CSV: layer,mean_surprisal,normalized")->required();
  ev->callback([&runner, &e] { runner.action = [&runner, &e] { lens_eval(e, runner); }; });
}

void add_rff_commands(CLI::App& root, Runner& runner) {
  CLI::App* rff = root.add_subcommand("rff", "Random Fourier feature control spaces");
  rff->require_subcommand(1);
  auto& g = runner.make<RffArgs>();
  CLI::App* gen = rff->add_subcommand("gen", "Per-word RFF features for a timeline");
  gen->add_option("--d-in", g.d_in, "Random input vector dimension")->capture_default_str();
  gen->add_option("--d-out", g.d_out, "Feature dimension (128, 256, 512, 1024, 2048 in the reference ladder)")
      ->capture_default_str();
  gen->add_option("--sigma", g.sigma, "RBF bandwidth")->capture_default_str();
  gen->add_option("--timeline", g.timeline, "Word timeline TSV")->required();
  gen->add_option("--seed", g.seed, "Seed for the map and the word vectors")->capture_default_str();
  gen->add_option("--out", g.out, "Output LAM1 (one row per event)")->required();
  gen->callback([&runner, &g] { runner.action = [&runner, &g] { rff_gen(g, runner); }; });
}

void add_probe_commands(CLI::App& root, Runner& runner) {
  CLI::App* probe = root.add_subcommand("probe", "Linear probes");
  probe->require_subcommand(1);

  auto& c = runner.make<ClassifyArgs>();
  CLI::App* cl = probe->add_subcommand("classify", "Softmax-regression probe, best epoch by validation accuracy");
  cl->add_option("--train", c.train, "<features.lam>:<labels.tsv>")->required();
  cl->add_option("--val", c.val, "<features.lam>:<labels.tsv>")->required();
  cl->add_option("--test", c.test, "<features.lam>:<labels.tsv>")->required();
  cl->add_option("--classes", c.classes, "Number of classes (0: from training labels)")->capture_default_str();
  cl->add_option("--lr", c.lr, "Adam learning rate")->capture_default_str();
  cl->add_option("--epochs", c.epochs, "Epochs")->capture_default_str();
  cl->add_option("--batch", c.batch, "Minibatch size")->capture_default_str();
  cl->add_option("--seed", c.seed, "Minibatch order seed")->capture_default_str();
  cl->add_option("--task", c.task, "Task name written to the output")->capture_default_str();
  cl->add_option("--layer", c.layer, "Layer index (default: from manifest)");
  cl->add_option("--out", c.out, "Output CSV: layer,task,metric,value")->required();
  cl->callback([&runner, &c] { runner.action = [&runner, &c] { classify(c, runner); }; });

  auto& g = runner.make<RegressArgs>();
  CLI::App* rg = probe->add_subcommand("regress", "Ridge probe scored by test R^2");
  rg->add_option("--train", g.train, "<features.lam>:<targets.lam>")->required();
  rg->add_option("--test", g.test, "<features.lam>:<targets.lam>")->required();
  rg->add_option("--alphas", g.alphas, "Comma-separated ridge penalties, or 'default'")->capture_default_str();
  rg->add_option("--chunks", g.chunks, "Contiguous CV chunks")->capture_default_str();
  rg->add_option("--task", g.task, "Task name written to the output")->capture_default_str();
  rg->add_option("--layer", g.layer, "Layer index (default: from manifest)");
  rg->add_option("--out", g.out, "Output CSV: layer,task,metric,value")->required();
  rg->callback([&runner, &g] { runner.action = [&runner, &g] { regress(g, runner); }; });
}

}  // namespace layerscope::cli
