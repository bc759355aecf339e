#include "cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using namespace cpcheck::cli;
  CLI::App app{"Completely positive cone membership by moment relaxations"};
  app.require_subcommand(0, 1);

  RunConfig cfg;
  app.add_option("matrix", cfg.input, "Matrix file: plain text (n, then n*n entries) or JSON {\"n\", \"rows\"}");
  app.add_option("--mode", cfg.mode, "interior or dickinson")->check(CLI::IsMember({"interior", "dickinson"}));
  app.add_option("--max-order", cfg.max_order, "Largest relaxation order")->check(CLI::PositiveNumber);
  app.add_option("--boundary-tol", cfg.boundary_tol, "|lambda| below this is a boundary point")->check(CLI::PositiveNumber);
  app.add_option("--rank-tol", cfg.rank_tol, "Relative singular value threshold for moment ranks")->check(CLI::PositiveNumber);
  app.add_option("--sdp-gap-tol", cfg.sdp_gap_tol, "SDP relative duality gap tolerance")->check(CLI::PositiveNumber);
  app.add_option("--sdp-feas-tol", cfg.sdp_feas_tol, "SDP feasibility tolerance")->check(CLI::PositiveNumber);
  app.add_option("--seed", cfg.seed, "Seed for extraction and generic-point objectives");
  app.add_flag("--verify", cfg.verify, "Recompute the decomposition residual independently");
  app.add_flag("--timings", cfg.timings, "Include wall-clock times (makes output non-reproducible)");
  app.add_option("--format", cfg.format, "text or json")->check(CLI::IsMember({"text", "json"}));
  app.add_option("--matrix-C", cfg.matrix_c, "Interior reference matrix C (default I + E)");
  app.add_option("--b1", cfg.b1, "Positive vector b1 for dickinson mode (default all ones)");

  bool reproduce_timings = false;
  CLI::App* reproduce = app.add_subcommand("reproduce-examples", "Run the reference instances and print a summary table");
  reproduce->add_flag("--timings", reproduce_timings, "Add a runtime column");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kInputError;
  }
  if (*reproduce) {
    reproduce_examples(std::cout, reproduce_timings);
    return 0;
  }
  if (cfg.input.empty()) {
    std::cerr << "error: a matrix file is required\n" << app.help();
    return kInputError;
  }
  return run(cfg, std::cout, std::cerr);
}
