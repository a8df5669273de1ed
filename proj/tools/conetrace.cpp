// conetrace: batch front end.
//
//   conetrace run <config.json> [--workers N] [--output DIR]
//   conetrace verify-sal <symbol-config.json> [--output FILE]
//   conetrace dump-special <table-config.json> [--output FILE]
//
// Exit status: 0 pass, 1 verification failure, 2 config error.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "conetrace/experiment.hpp"

namespace ct = conetrace;

namespace {

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kConfig = 2;

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ct::ConfigError(path, "cannot open");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ct::ConfigError(path, std::string("invalid JSON: ") + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!(out << text)) throw ct::Error("cannot write " + path);
}

int cmd_run(const std::string& path, int workers, const std::string& output) {
  auto j = read_json(path);
  if (workers > 0) j["workers"] = workers;
  if (!output.empty()) j["output_dir"] = output;
  const auto config = ct::parse_experiment_config(j);
  const auto res = ct::run_experiment(config, &std::cerr);
  const auto& v = res.report["verdicts"];
  if (v.contains("weyl")) {
    std::cerr << "weyl: fitted " << v["weyl"]["fitted"] << " expected " << v["weyl"]["expected"] << "\n";
  }
  if (v.contains("oracle")) std::cerr << "oracle: max rel diff " << v["oracle"]["max_rel_diff"] << "\n";
  if (config.output_dir.empty()) std::cout << res.files.at("report.json");
  std::cerr << (res.pass ? "PASS" : "FAIL") << "\n";
  return res.pass ? kPass : kFail;
}

int cmd_verify_sal(const std::string& path, const std::string& output) {
  const auto c = ct::parse_sal_run_config(read_json(path));
  const auto d = ct::verify_sal(c.symbol, c.orders, c.z_grid, c.tolerance);
  write_text(output, ct::to_json(d).dump(2) + "\n");
  if (!d.hypotheses.ok) std::cerr << "hypothesis (" << d.hypotheses.violated << ") violated: " << d.hypotheses.detail << "\n";
  std::cerr << (d.pass ? "PASS" : "FAIL") << "\n";
  return d.pass ? kPass : kFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Resolvent traces on model cones and edges"};
  app.require_subcommand(1);

  std::string run_config, run_output;
  int run_workers = 0;
  auto* run = app.add_subcommand("run", "Run an experiment from a JSON config");
  run->add_option("config", run_config, "experiment config")->required();
  run->add_option("--workers", run_workers, "override the worker count");
  run->add_option("--output", run_output, "override the output directory");

  std::string sal_config, sal_output;
  auto* sal = app.add_subcommand("verify-sal", "Check a SAL expansion against direct quadrature");
  sal->add_option("config", sal_config, "symbol config")->required();
  sal->add_option("--output", sal_output, "report file (default stdout)");

  std::string dump_config, dump_output;
  auto* dump = app.add_subcommand("dump-special", "Tabulate Bessel functions as CSV");
  dump->add_option("config", dump_config, "table config")->required();
  dump->add_option("--output", dump_output, "CSV file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kConfig;
  }

  try {
    if (*run) return cmd_run(run_config, run_workers, run_output);
    if (*sal) return cmd_verify_sal(sal_config, sal_output);
    if (*dump) {
      write_text(dump_output, ct::dump_special_table(read_json(dump_config)));
      return kPass;
    }
  } catch (const ct::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const ct::TraceClassError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFail;
  }
  return kConfig;
}
