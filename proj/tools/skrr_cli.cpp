// Command-line driver for the sketched KRR experiments.
//
// Exit codes: 0 success, 1 configuration error, 2 runtime failure.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "skrr/skrr.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::string preset;
  std::string out_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> replicates;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  auto* config = cmd->add_option("--config", opts.config_path,
                                 "JSON experiment configuration file");
  auto* preset =
      cmd->add_option("--preset", opts.preset,
                      "built-in configuration: m-sweep, toy, tradeoff, "
                      "diagnose-block, bench, smoke");
  config->excludes(preset);
  cmd->add_option("--out", opts.out_path, "output CSV path");
  cmd->add_option("--seed", opts.seed, "override master_seed");
  cmd->add_option("--replicates", opts.replicates, "override replicate count");
  cmd->add_option("--threads", opts.threads, "worker threads for replicates");
}

skrr::ExperimentConfig resolve_config(const CommonOptions& opts,
                                      skrr::ExperimentKind expected) {
  skrr::ExperimentConfig cfg;
  if (!opts.config_path.empty())
    cfg = skrr::load_config_file(opts.config_path);
  else if (!opts.preset.empty())
    cfg = skrr::preset_config(opts.preset);
  else
    throw skrr::ConfigError("either --config or --preset is required");
  if (cfg.experiment != expected)
    throw skrr::ConfigError(
        std::string("configuration is for experiment '") +
        skrr::experiment_name(cfg.experiment) + "', but the '" +
        skrr::experiment_name(expected) + "' subcommand was invoked");
  if (opts.seed) cfg.master_seed = *opts.seed;
  if (opts.replicates) {
    if (*opts.replicates < 1)
      throw skrr::ConfigError("--replicates must be >= 1");
    cfg.replicates = *opts.replicates;
  }
  if (opts.threads) {
    if (*opts.threads < 1) throw skrr::ConfigError("--threads must be >= 1");
    cfg.threads = *opts.threads;
  }
  return cfg;
}

std::string default_out(const skrr::ExperimentConfig& cfg) {
  return std::string(skrr::experiment_name(cfg.experiment)) + ".csv";
}

template <typename Records, typename Emit>
void write_output(const Records& records, const std::string& path, Emit emit) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  emit(records, out);
  if (!out) throw std::runtime_error("write failed for " + path);
  std::cerr << "wrote " << records.size() << " rows to " << path << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sketched kernel ridge regression experiment harness"};
  app.require_subcommand(1);

  CommonOptions approx_opts, tradeoff_opts, diagnose_opts, bench_opts;
  auto* approx = app.add_subcommand(
      "approx-error", "in-sample approximation error vs the exact KRR fit");
  add_common(approx, approx_opts);
  auto* tradeoff = app.add_subcommand(
      "tradeoff", "test error and runtime on a CSV dataset or the synthetic fallback");
  add_common(tradeoff, tradeoff_opts);
  auto* diagnose = app.add_subcommand(
      "diagnose", "spectral diagnostics and K-satisfiability pass rates");
  add_common(diagnose, diagnose_opts);
  auto* bench = app.add_subcommand(
      "bench-products", "structured vs dense sketch product timings");
  add_common(bench, bench_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (approx->parsed()) {
      const auto cfg =
          resolve_config(approx_opts, skrr::ExperimentKind::approx_error);
      const auto records = skrr::run_approx_error(cfg);
      const std::string path =
          approx_opts.out_path.empty() ? default_out(cfg) : approx_opts.out_path;
      write_output(records, path, [](const auto& r, std::ostream& o) {
        skrr::emit_csv(r, o);
      });
    } else if (tradeoff->parsed()) {
      const auto cfg =
          resolve_config(tradeoff_opts, skrr::ExperimentKind::tradeoff);
      const auto records = skrr::run_tradeoff(cfg);
      const std::string path = tradeoff_opts.out_path.empty()
                                   ? default_out(cfg)
                                   : tradeoff_opts.out_path;
      write_output(records, path, [](const auto& r, std::ostream& o) {
        skrr::emit_csv(r, o);
      });
    } else if (diagnose->parsed()) {
      const auto cfg =
          resolve_config(diagnose_opts, skrr::ExperimentKind::diagnose);
      const auto records = skrr::run_diagnose(cfg);
      const std::string path = diagnose_opts.out_path.empty()
                                   ? default_out(cfg)
                                   : diagnose_opts.out_path;
      write_output(records, path, [](const auto& r, std::ostream& o) {
        skrr::emit_diagnose_csv(r, o);
      });
    } else if (bench->parsed()) {
      const auto cfg =
          resolve_config(bench_opts, skrr::ExperimentKind::bench_products);
      const auto records = skrr::bench_products(cfg);
      const std::string path =
          bench_opts.out_path.empty() ? default_out(cfg) : bench_opts.out_path;
      write_output(records, path, [](const auto& r, std::ostream& o) {
        skrr::emit_bench_csv(r, o);
      });
    }
  } catch (const skrr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
