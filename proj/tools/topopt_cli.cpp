#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "topopt/config.hpp"
#include "topopt/driver.hpp"
#include "topopt/kernels.hpp"
#include "topopt/output.hpp"

namespace {

constexpr int kUsageError = 1;
constexpr int kIoError = 4;

std::vector<int> parse_factors(const std::string& text) {
  std::vector<int> factors;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    const int f = std::stoi(item, &used);
    if (used != item.size() || f < 1) {
      throw std::invalid_argument("--factors: '" + item + "' is not a positive integer");
    }
    factors.push_back(f);
  }
  if (factors.empty()) {
    throw std::invalid_argument("--factors: empty list");
  }
  return factors;
}

void select_backend(const std::string& backend) {
  using topopt::kernels::Backend;
  if (backend == "auto") {
    topopt::kernels::select(topopt::kernels::detect_best());
  } else if (backend == "scalar") {
    topopt::kernels::select(Backend::scalar);
  } else if (backend == "avx2") {
    if (!topopt::kernels::available(Backend::avx2)) {
      throw std::invalid_argument("--kernels: avx2 kernels are not available on this machine");
    }
    topopt::kernels::select(Backend::avx2);
  }
}

void print_summary(const topopt::RunResult& r) {
  const topopt::RunSummary& s = r.summary;
  std::printf("status %s after %d iterations (%d backtracks)\n", topopt::to_string(s.status).c_str(),
              s.iterations, s.total_backtracks);
  std::printf("l(u) %.6g  R %.6g  V %.4f  Jtilde %.6g  E1 %.3g  E2 %.3g  M %.2f%%\n", s.structural,
              s.R, s.V, s.Jtilde, s.E1, s.E2, s.discreteness);
  if (!s.failure.empty()) {
    std::fprintf(stderr, "failure: %s\n", s.failure.c_str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Density-based topology optimization (compliance and compliant mechanisms)"};
  app.require_subcommand(1);
  std::string backend = "auto";
  app.add_option("--kernels", backend, "Kernel backend")
      ->check(CLI::IsMember({"auto", "scalar", "avx2"}));

  std::string config_path;
  std::vector<std::string> overrides;
  bool print_config = false;

  auto* run = app.add_subcommand("run", "Optimize one configured case");
  run->add_option("config", config_path, "JSON configuration file")->required();
  run->add_option("--override", overrides, "Set a key, e.g. optimizer.tau0=2 (repeatable)");
  run->add_flag("--print-config", print_config, "Print the resolved configuration");

  std::string factors_text = "1,2,4";
  auto* refine = app.add_subcommand("refine", "Solve one case on successively refined meshes");
  refine->add_option("config", config_path, "JSON configuration file")->required();
  refine->add_option("--factors", factors_text, "Comma-separated refinement factors");
  refine->add_option("--override", overrides, "Set a key, e.g. regularization.beta=0.01");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    select_backend(backend);
    const topopt::RunConfig config = topopt::load_config(config_path, overrides);

    if (run->parsed()) {
      if (print_config) {
        std::cout << topopt::serialize_config(config);
      }
      const topopt::CaseOutcome outcome = topopt::run_case(config);
      print_summary(outcome.result);
      std::printf("outputs written to %s\n", config.output_directory.c_str());
      return outcome.exit_code;
    }

    const std::vector<int> factors = parse_factors(factors_text);
    const topopt::RefineReport report = topopt::refine_sweep(config, factors);
    std::filesystem::create_directories(config.output_directory);
    const std::string report_path =
        (std::filesystem::path(config.output_directory) / "refine.json").string();
    topopt::write_text(report_path, report.to_json());

    int code = 0;
    std::printf("%-7s %-9s %-14s %5s %8s %12s %8s %8s\n", "factor", "grid", "status", "it", "V",
                "Jtilde", "overlap", "corr");
    for (const topopt::RefineLevel& l : report.levels) {
      const std::string grid = std::to_string(l.nx) + "x" + std::to_string(l.ny);
      if (!l.ok) {
        std::printf("%-7d %-9s %-14s (missing: %s)\n", l.factor, grid.c_str(), "failed",
                    l.error.c_str());
        code = 3;
        continue;
      }
      if (l.status != topopt::RunStatus::converged && code == 0) {
        code = 2;
      }
      if (l.compared) {
        std::printf("%-7d %-9s %-14s %5d %8.4f %12.6g %8.4f %8.4f\n", l.factor, grid.c_str(),
                    topopt::to_string(l.status).c_str(), l.iterations, l.V, l.Jtilde, l.overlap,
                    l.correlation);
      } else {
        std::printf("%-7d %-9s %-14s %5d %8.4f %12.6g %8s %8s\n", l.factor, grid.c_str(),
                    topopt::to_string(l.status).c_str(), l.iterations, l.V, l.Jtilde, "-", "-");
      }
    }
    std::printf("report written to %s\n", report_path.c_str());
    return code;
  } catch (const topopt::ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kUsageError;
  } catch (const topopt::IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kIoError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kIoError;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsageError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  }
}
