#include "layerscope/cli.hpp"

#include <exception>

#include "common.hpp"
#include "layerscope/error.hpp"
#include "layerscope/parallel.hpp"

namespace layerscope::cli {

namespace {

std::string parse_error_code(const CLI::ParseError& e) {
  if (dynamic_cast<const CLI::ExtrasError*>(&e)) return "unknown-flag";
  if (dynamic_cast<const CLI::RequiredError*>(&e)) return "missing-argument";
  if (dynamic_cast<const CLI::ArgumentMismatch*>(&e)) return "missing-argument";
  if (dynamic_cast<const CLI::ConversionError*>(&e)) return "invalid-value";
  if (dynamic_cast<const CLI::ValidationError*>(&e)) return "invalid-value";
  return "usage";
}

int exit_code_for(const Error& e) { return e.module() == "cli" || e.module() == "core-io" ? 2 : 1; }

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Layerwise intrinsic dimension, encoding models, lenses and probes", "layerscope"};
  app.set_version_flag("--version", "layerscope 0.1.0");
  app.require_subcommand(1);
  app.fallthrough();

  std::size_t threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: LAYERSCOPE_THREADS, else all cores)")
      ->check(CLI::PositiveNumber);

  Runner runner{out, err, {}, {}};
  add_id_commands(app, runner);
  add_encode_commands(app, runner);
  add_preprocess_commands(app, runner);
  add_lens_commands(app, runner);
  add_rff_commands(app, runner);
  add_probe_commands(app, runner);
  add_stats_commands(app, runner);
  add_synth_commands(app, runner);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) return app.exit(e, out, err);
    err << "E:cli:" << parse_error_code(e) << ": " << e.what() << '\n';
    return 2;
  }

  if (threads > 0)
    set_max_threads(threads);
  else
    reset_max_threads();

  try {
    if (!runner.action) usage_error("no command given");
    runner.action();
  } catch (const Error& e) {
    err << e.formatted() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "E:cli:internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace layerscope::cli
