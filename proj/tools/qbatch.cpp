// qbatch: train, baseline, scenario and compare runs from a JSON config.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qbatch/config.hpp"
#include "qbatch/run.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "run configuration (JSON)")->required();
  sub->add_option("--seed", c.seed, "override the config seed");
  sub->add_option("--out", c.out, "override the output directory");
}

qbatch::RunConfig load(const Common& c) {
  auto cfg = qbatch::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.out) cfg.output_dir = *c.out;
  return cfg;
}

void report(const qbatch::RunArtifacts& art) {
  std::cout << "run directory: " << art.dir.string() << "\n";
  std::cout << "config hash:   " << art.config_hash << "\n";
  for (const auto& [k, v] : art.metrics) std::cout << "  " << k << " = " << qbatch::format_number(v) << "\n";
  for (const auto& f : art.files)
    if (f.find("summary") != std::string::npos) {
      std::cout << "\n" << f << ":\n" << qbatch::read_text_file(art.dir / f);
    }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fitted Q-iteration for batch reactor control"};
  app.require_subcommand(1);

  Common train_opts, base_opts, scen_opts, cmp_opts;
  std::string method, scenario;

  auto* train = app.add_subcommand("train", "sample, run fitted Q-iteration, extract and roll out the policy");
  add_common(train, train_opts);

  auto* baseline = app.add_subcommand("baseline", "open-loop baseline optimization");
  add_common(baseline, base_opts);
  baseline->add_option("--method", method, "idp or cvp")->required()->check(CLI::IsMember({"idp", "cvp"}));

  auto* scen = app.add_subcommand("scenario", "disturbance scenario under all three intervention modes");
  add_common(scen, scen_opts);
  scen->add_option("--scenario", scenario, "scenario name from the config")->required();

  auto* compare = app.add_subcommand("compare", "policy vs idp vs cvp, plus every configured scenario");
  add_common(compare, cmp_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    qbatch::RunArtifacts art;
    if (*train) {
      art = qbatch::run_command(load(train_opts), qbatch::Command::train);
    } else if (*baseline) {
      art = qbatch::run_command(load(base_opts), qbatch::Command::baseline, {method, ""});
    } else if (*scen) {
      art = qbatch::run_command(load(scen_opts), qbatch::Command::scenario, {"", scenario});
    } else {
      art = qbatch::run_command(load(cmp_opts), qbatch::Command::compare);
    }
    report(art);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (char& ch : msg)
      if (ch == '\n') ch = ' ';
    std::fprintf(stderr, "qbatch: error: %s\n", msg.c_str());
    return 1;
  }
  return 0;
}
