#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "msop/app.hpp"

int main(int argc, char** argv) {
  CLI::App cli{"Weighted symbol analysis for operators generated by Morse-Smale surface diffeomorphisms"};
  cli.require_subcommand(1);

  std::string config;
  msop::app::Overrides ov;
  std::string out, s, x, xi, n_range, N, convention, coeffs;
  std::uint64_t seed = 0;

  const std::pair<const char*, const char*> commands[] = {
      {"validate", "Fixed points, the Morse-Smale conditions and a periodic-point scan"},
      {"fixed-points", "Fixed points with eigen-data and source/sink/saddle labels"},
      {"weights", "Weight series W(n) along one orbit with fitted and predicted rates"},
      {"annulus", "Radii r_s, R_s of the annulus from fixed-point data"},
      {"const-coef", "Roots and invertible s-set of a constant-coefficient operator"},
      {"probe", "Finite-section ellipticity probe over an s grid"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = cli.add_subcommand(name, help);
    sub->add_option("--config", config, "JSON config file")->required();
    sub->add_option("--out", out, "output directory (default: current directory)");
    sub->add_option("--seed", seed, "random seed (default 0)");
    sub->add_option("--s", s, "s values: list '0,1,2' or range 'start:stop:step'");
    sub->add_option("--x", x, "base point 'x1,x2' or 'chart:x1,x2'");
    sub->add_option("--xi", xi, "covector 'xi1,xi2'");
    sub->add_option("--n-range", n_range, "orbit window 'n_min:n_max'");
    sub->add_option("--N", N, "section half-sizes, comma separated");
    sub->add_option("--convention", convention, "T1_PINNED, FUNC_PULLBACK or DENSITY_FORWARD");
    sub->add_option("--coeffs", coeffs, "constant coefficients 'k:re[,im],...'");
  }

  try {
    cli.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return cli.exit(e);
  } catch (const CLI::ParseError& e) {
    cli.exit(e);
    return msop::app::kConfigFailure;
  }

  const CLI::App* chosen = cli.get_subcommands().front();
  auto given = [chosen](const char* flag) { return chosen->count(flag) > 0; };
  if (given("--out")) ov.out = out;
  if (given("--seed")) ov.seed = seed;
  if (given("--s")) ov.s = s;
  if (given("--x")) ov.x = x;
  if (given("--xi")) ov.xi = xi;
  if (given("--n-range")) ov.n_range = n_range;
  if (given("--N")) ov.N = N;
  if (given("--convention")) ov.convention = convention;
  if (given("--coeffs")) ov.coeffs = coeffs;
  return msop::app::run(chosen->get_name(), config, ov);
}
