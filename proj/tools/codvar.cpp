// codvar: verify / solve / noether on a problem file.
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "codvar/cli.hpp"

int main(int argc, char** argv) {
  using namespace codvar::cli;
  CLI::App app{"Codifferential checks and descent for nonsmooth variational problems"};
  app.require_subcommand(1);

  Request req;
  double tol = 0.0;
  int max_iter = 0;
  std::uint64_t seed = 0;
  bool no_refine = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", req.config, "problem file (TOML)")->required();
    sub->add_option("--tol", tol, "LP feasibility tolerance");
    sub->add_option("--cells", req.overrides.cells, "cells per axis (one value for all axes)")->expected(1, 2);
    sub->add_option("--out", req.out_dir, "directory for certificates and CSV files");
  };
  CLI::App* verify = app.add_subcommand("verify", "check the discrete optimality conditions");
  add_common(verify);
  verify->add_flag("--no-refine", no_refine, "skip the re-run at doubled resolution");
  CLI::App* solve = app.add_subcommand("solve", "run codifferential descent");
  add_common(solve);
  solve->add_option("--max-iter", max_iter, "iteration cap");
  solve->add_option("--seed", seed, "random seed");
  CLI::App* noether = app.add_subcommand("noether", "check the inner-variation inclusion");
  add_common(noether);
  noether->add_flag("--energy", req.overrides.energy, "also check conservation of energy");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kInputError;
  }
  CLI::App* sub = app.get_subcommands().front();
  req.command = sub->get_name();
  if (sub->count("--tol")) req.overrides.tol = tol;
  if (req.command == "solve") {
    if (sub->count("--max-iter")) req.overrides.max_iter = max_iter;
    if (sub->count("--seed")) req.overrides.seed = seed;
  }
  if (no_refine) req.overrides.refine = false;
  return run(req, std::cout, std::cerr);
}
