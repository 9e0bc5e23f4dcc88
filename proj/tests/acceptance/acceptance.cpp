// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

#include "../support/pipeline.hpp"
#include "layerscope/encoding.hpp"
#include "layerscope/intrinsic_dim.hpp"
#include "layerscope/lens.hpp"
#include "layerscope/parallel.hpp"
#include "layerscope/rff.hpp"
#include "layerscope/stats.hpp"
#include "layerscope/synth.hpp"

namespace ls = layerscope;
using ls::Index;
using ls::Matrix;
using ls::Vector;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Matrix gaussian(Index r, Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix x(r, c);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  return x;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome gride_hypercubes() {
  Outcome o{true, ""};
  for (std::size_t d : {2u, 5u, 10u}) {
    const auto t0 = Clock::now();
    const ls::ScaleProfile p = ls::gride_scale_profile(ls::hypercube(10000, d, 50, 0.0, 100 + d));
    const double secs = seconds_since(t0);
    const double dd = static_cast<double>(d);
    const bool ok = std::abs(p.chosen_id - dd) <= 0.1 * dd && secs < 60.0;
    o.pass = o.pass && ok;
    o.detail += "d=" + std::to_string(d) + ": " + fmt("%.3f", p.chosen_id) + " at k=" + std::to_string(p.chosen_k) +
                " (" + fmt("%.1f", secs) + " s)" + (ok ? "" : " out of band") + "; ";
  }
  return o;
}

Outcome gride_closed_form() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(1.001, 10.0);
  double worst_rel = 0.0;
  for (int s = 0; s < 100; ++s) {
    ls::RatioSample sample{1, {}};
    for (int i = 0; i < 20 + s; ++i) sample.ratios.push_back(unif(rng));
    double sum = 0.0;
    for (double mu : sample.ratios) sum += std::log(mu);
    const double closed = static_cast<double>(sample.ratios.size()) / sum;
    worst_rel = std::max(worst_rel, std::abs(ls::gride_mle(sample).id - closed) / closed);
  }
  double worst_int = 0.0;
  boost::math::quadrature::tanh_sinh<double> near;
  boost::math::quadrature::exp_sinh<double> far;
  for (std::size_t k = 1; k <= 8; ++k)
    for (int d = 1; d <= 10; ++d) {
      auto f = [&](double mu) { return mu > 1.0 ? std::exp(ls::gride_log_density(mu, k, d)) : 0.0; };
      const double total = near.integrate(f, 1.0, 2.0) + far.integrate(f, 2.0, std::numeric_limits<double>::infinity());
      worst_int = std::max(worst_int, std::abs(total - 1.0));
    }
  return {worst_rel < 1e-9 && worst_int < 1e-8,
          "max relative error vs N/sum(ln mu) " + fmt("%.2e", worst_rel) + "; max |integral - 1| " +
              fmt("%.2e", worst_int)};
}

Outcome linear_dims() {
  const double pr31 = ls::participation_ratio(std::vector<double>{3, 1});
  Matrix iso = Matrix::Zero(200, 100);
  for (Index i = 0; i < 100; ++i) {
    iso(2 * i, i) = 1.0;
    iso(2 * i + 1, i) = -1.0;
  }
  const ls::LinearDims li = ls::linear_dims(ls::ActivationMatrix(iso));
  ls::Rng rng(3);
  const Matrix basis = ls::random_orthonormal(10, 3, rng);
  const ls::LinearDims l3 = ls::linear_dims(ls::ActivationMatrix(Matrix(gaussian(500, 3, 4) * basis.transpose())));
  const bool ok = pr31 == 1.6 && std::abs(li.pr_d - 100.0) < 1e-9 && li.pca_d == 99 && l3.pca_d == 3;
  return {ok, "pr(3,1)=" + fmt("%.17g", pr31) + "; isotropic pr=" + fmt("%.12g", li.pr_d) +
                  " pca=" + std::to_string(li.pca_d) + "; rank-3 pca=" + std::to_string(l3.pca_d)};
}

Outcome encoding_oracle() {
  const std::vector<double> snr1 = {1.0};
  const ls::EncodingCase c = ls::encoding_case(4000, 16, 64, snr1, 11);
  const double med = median(ls::encode_fmri(c.features, c.response).r);

  const std::vector<double> inf = {std::numeric_limits<double>::infinity()};
  const ls::EncodingCase clean = ls::encoding_case(4000, 16, 64, inf, 12);
  const auto r_clean = ls::encode_fmri(clean.features, clean.response).r;
  const double min_clean = *std::min_element(r_clean.begin(), r_clean.end());

  const Matrix& y = c.response.values();
  Matrix shifted(y.rows(), y.cols());
  for (Index t = 0; t < y.rows(); ++t) shifted.row((t + 1500) % y.rows()) = y.row(t);
  const ls::ResponseSeries null(shifted, c.response.sampling(), c.response.channel_ids());
  std::vector<double> abs_null;
  for (double r : ls::encode_fmri(c.features, null).r) abs_null.push_back(std::abs(r));
  const double med_null = median(abs_null);

  const bool ok = std::abs(med - std::sqrt(0.5)) <= 0.05 && min_clean > 0.99 && med_null < 0.05;
  return {ok, "SNR=1 median R " + fmt("%.4f", med) + " (ceiling 0.7071); noiseless min R " + fmt("%.4f", min_clean) +
                  "; shifted median |R| " + fmt("%.4f", med_null)};
}

Outcome ecog_lag() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> gap(0.3, 0.5);
  std::vector<double> times;
  double t = 3.0;
  for (int i = 0; i < 2000; ++i) {
    times.push_back(t);
    t += gap(rng);
  }
  const Matrix feat = gaussian(2000, 8, 6);
  const double rate = 100.0;
  const auto n = static_cast<Index>((t + 3.0) * rate);
  // Feature 0 reproduced 0.5 s after each onset as a narrow bump.
  Matrix y = Matrix::Zero(n, 2);
  for (std::size_t e = 0; e < times.size(); ++e) {
    const double centre = times[e] + 0.5;
    for (Index s = static_cast<Index>((centre - 0.2) * rate); s <= static_cast<Index>((centre + 0.2) * rate); ++s) {
      const double dt = static_cast<double>(s) / rate - centre;
      y(s, 0) += feat(static_cast<Index>(e), 0) * std::exp(-dt * dt / (2 * 0.03 * 0.03));
    }
  }
  y.col(1) = y.col(0) + 0.5 * gaussian(n, 1, 7);
  const ls::EncodingResult r =
      ls::encode_ecog(ls::IrregularFeatureSeries(times, feat), ls::ResponseSeries(y, ls::Sampling::from_rate(rate)));
  const double step = 4.0 / 127.0;
  const double e0 = std::abs((*r.best_lag)[0] - 0.5), e1 = std::abs((*r.best_lag)[1] - 0.5);
  return {e0 <= step && e1 <= step, "best lags " + fmt("%.4f", (*r.best_lag)[0]) + " s, " +
                                        fmt("%.4f", (*r.best_lag)[1]) + " s (step " + fmt("%.4f", step) + " s)"};
}

Outcome lens_optimality() {
  bool ok = true;
  std::string detail;
  for (double noise : {0.0, 0.5}) {
    const Matrix h = gaussian(6000, 16, 20);
    const Matrix m = Matrix::Identity(16, 16) + 0.05 * gaussian(16, 16, 21);
    Matrix target = (h * m).rowwise() + 0.2 * gaussian(1, 16, 22).row(0);
    if (noise > 0.0) target += noise * gaussian(6000, 16, 23);
    const double direct = ls::lens_residual(ls::fit_lens_direct(h, target), h, target);
    ls::GradientOptions opt;
    opt.lr = 1e-3;
    opt.seed = 4;
    const double grad = ls::lens_residual(ls::fit_lens_gradient(h, target, opt).lens, h, target);
    ok = ok && direct <= grad + 1e-3;
    detail += "noise " + fmt("%.1f", noise) + ": direct " + fmt("%.3e", direct) + " vs gradient " + fmt("%.3e", grad) + "; ";
  }
  const std::size_t vocab = 50257;
  const double s = ls::surprisal_from_logits(Vector::Constant(static_cast<Index>(vocab), -2.5), 123);
  const double norm = ls::normalize_surprisal(s, vocab);
  ok = ok && s == std::log(static_cast<double>(vocab)) && norm == 1.0;
  detail += "uniform surprisal " + fmt("%.17g", s) + ", normalized " + fmt("%.17g", norm);
  return {ok, detail};
}

Outcome rff_kernel() {
  const std::size_t ladder[] = {128, 256, 512, 1024, 2048};
  Vector x(64), y(64);
  const Matrix xy = gaussian(2, 64, 30) * 0.15;
  x = xy.row(0).transpose();
  y = xy.row(1).transpose();
  const double kernel = std::exp(-(x - y).squaredNorm() / 2.0);
  bool ok = true;
  std::string detail;
  for (std::size_t d_out : ladder) {
    double err = 0.0;
    for (std::uint64_t s = 0; s < 200; ++s) {
      const ls::RffMap map = ls::rff_new(64, d_out, 1.0, 1000 + s);
      err += std::abs(ls::rff_apply(map, x).dot(ls::rff_apply(map, y)) - kernel);
    }
    err /= 200.0;
    ok = ok && err < 3.0 / std::sqrt(static_cast<double>(d_out));
    detail += std::to_string(d_out) + ":" + fmt("%.4f", err) + " ";
  }

  std::vector<ls::Event> events;
  for (int i = 0; i < 2000; ++i) events.push_back({"w" + std::to_string(i), 0.3 * i, 0.3 * i + 0.2});
  const ls::Timeline tl(events);
  ls::ProfileOptions opt;
  opt.bootstraps = 0;
  opt.k = 16;
  double prev = 0.0;
  detail += "| I_d";
  for (std::size_t d_out : ladder) {
    const ls::IrregularFeatureSeries f = ls::rff_word_features(tl, ls::rff_new(64, d_out, 4.0, 3), 9);
    const double id = ls::gride_scale_profile(ls::ActivationMatrix(f.features), opt).chosen_id;
    ok = ok && id >= prev;
    prev = id;
    detail += " " + fmt("%.2f", id);
  }
  return {ok, "mean kernel error " + detail};
}

Outcome stats_calibration() {
  std::vector<double> p(500);
  for (std::size_t t = 0; t < 500; ++t) {
    const Matrix xy = gaussian(2, 20, 40 + t);
    const Vector a = xy.row(0).transpose(), b = xy.row(1).transpose();
    p[t] = ls::permutation_test(std::span<const double>(a.data(), 20), std::span<const double>(b.data(), 20),
                                ls::CorrMethod::spearman, 999, t)
               .p_value;
  }
  std::sort(p.begin(), p.end());
  double ks = 0.0;
  for (std::size_t i = 0; i < 500; ++i)
    ks = std::max({ks, static_cast<double>(i + 1) / 500.0 - p[i], p[i] - static_cast<double>(i) / 500.0});

  double worst = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Matrix xy = gaussian(2, 5, 900 + s);
    std::vector<double> x, y;
    for (Index i = 0; i < 5; ++i) {
      x.push_back(xy(0, i));
      y.push_back(xy(1, i) + 0.7 * xy(0, i));
    }
    const double observed = std::abs(ls::spearman(x, y));
    std::vector<double> perm = y;
    std::sort(perm.begin(), perm.end());
    int hits = 0, total = 0;
    do {
      ++total;
      if (std::abs(ls::spearman(x, perm)) >= observed - 1e-12) ++hits;
    } while (std::next_permutation(perm.begin(), perm.end()));
    const double exact = static_cast<double>(hits) / total;
    worst = std::max(worst, std::abs(ls::permutation_test(x, y, ls::CorrMethod::spearman, 10000, s).p_value - exact));
  }
  return {ks < 0.08 && worst <= 0.02,
          "KS distance " + fmt("%.4f", ks) + "; max |sampled - exact| at length 5 " + fmt("%.4f", worst)};
}

Outcome integration_fixture() {
  const auto t0 = Clock::now();
  const ls::LayeredFixture fx = ls::layered_model_fixture(12, 2024);
  ls::IrregularFeatureSeries words;
  std::vector<ls::LayerSeries> rows;
  std::size_t id_arg = 0, ep_arg = 0;
  for (std::size_t l = 0; l < fx.layers.size(); ++l) {
    ls::ProfileOptions po;
    po.seed = ls::derive_seed(7, l);
    const ls::ScaleProfile p = ls::gride_scale_profile(fx.layers[l], po);
    const ls::IrregularFeatureSeries f(fx.timeline.onsets(), fx.layers[l].values());
    const auto r = ls::encode_fmri(f, fx.response).r;
    ls::LayerSeries row;
    row.layer = static_cast<int>(l);
    row.id = p.bootstrap_mean;
    row.norm_id = ls::normalize_id(p.bootstrap_mean, 32);
    row.surprisal = std::nan("");
    row.enc_r_mean = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
    rows.push_back(row);
    if (row.id > rows[id_arg].id) id_arg = l;
    if (row.enc_r_mean > rows[ep_arg].enc_r_mean) ep_arg = l;
  }
  const ls::TrajectoryTable table = ls::trajectory_table(rows, ls::CorrMethod::spearman, 10000, 1);
  const double secs = seconds_since(t0);
  const std::size_t gap = id_arg > ep_arg ? id_arg - ep_arg : ep_arg - id_arg;
  const bool ok = gap <= 1 && table.id_vs_ep.rho > 0.9 && table.id_vs_ep.p_value < 0.01 && secs < 300.0;
  return {ok, "argmax I_d layer " + std::to_string(id_arg) + ", argmax R layer " + std::to_string(ep_arg) +
                  ", rho " + fmt("%.3f", table.id_vs_ep.rho) + ", p " + fmt("%.4g", table.id_vs_ep.p_value) + " (" +
                  fmt("%.1f", secs) + " s)"};
}

Outcome cli_determinism() {
  namespace fs = std::filesystem;
  const fs::path base = fs::temp_directory_path() / ("layerscope-acceptance-" + std::to_string(::getpid()));
  std::map<std::string, std::map<std::string, std::string>> runs;
  std::string failure;
  for (const std::string threads : {"1", "2", "4"}) {
    const fs::path dir = base / ("threads" + threads);
    fs::create_directories(dir);
    const std::string err = ls::testing::run_pipeline(dir, threads);
    if (!err.empty()) failure = err;
    auto files = ls::testing::snapshot(dir);
    // Manifests name their own output paths; compare them with the run directory masked.
    for (auto& [name, bytes] : files) {
      for (std::size_t p = bytes.find(dir.string()); p != std::string::npos; p = bytes.find(dir.string()))
        bytes.replace(p, dir.string().size(), "@");
    }
    runs[threads] = std::move(files);
  }
  ls::reset_max_threads();
  std::error_code ec;
  fs::remove_all(base, ec);
  if (!failure.empty()) return {false, "pipeline failed: " + failure};
  std::size_t differing = 0;
  for (const auto& [threads, files] : runs)
    if (files != runs["1"]) ++differing;
  return {differing == 0, std::to_string(runs["1"].size()) + " files compared across --threads 1, 2, 4; " +
                              std::to_string(differing) + " runs differ"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gride-hypercube", gride_hypercubes},
      {"gride-closed-form", gride_closed_form},
      {"linear-dims", linear_dims},
      {"encoding-oracle", encoding_oracle},
      {"ecog-lag-recovery", ecog_lag},
      {"lens-optimality", lens_optimality},
      {"rff-kernel", rff_kernel},
      {"stats-calibration", stats_calibration},
      {"integration-fixture", integration_fixture},
      {"cli-determinism", cli_determinism},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
