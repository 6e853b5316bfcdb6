// radlab command-line driver.
// exit: 0 all checks pass, 1 a check failed, 2 usage / config error

#include <iostream>

#include "CLI11.hpp"
#include "radlab/experiments.hpp"

int main(int argc, char** argv) {
  using namespace radlab;
  CLI::App app{"radlab: radiation-field and decay experiments"};
  app.set_version_flag("--version", RADLAB_VERSION);
  std::string experiment, config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> n;
  std::optional<double> delta, eps;
  std::string names = detail::join(experiment_names(), ", ");
  app.add_option("experiment", experiment, "one of: " + names)->required();
  app.add_option("--config", config, "key = value file; flags override its keys");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--out", out, "output directory for reports and field files");
  app.add_option("--n", n, "spatial dimension");
  app.add_option("--delta", delta, "decay parameter delta");
  app.add_option("--eps", eps, "data amplitude (single value)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (!known_experiment(experiment)) fail(Errc::Usage, "unknown experiment '" + experiment + "' (expected one of " + names + ")");
    ExperimentConfig c = default_config(experiment);
    if (!config.empty()) apply_settings(c, read_config_file(config));
    if (seed) c.seed = *seed;
    if (out) c.out = *out;
    if (n) c.n = *n;
    if (delta) c.delta = *delta;
    if (eps) c.eps = {*eps};
    if (c.out.empty()) c.out = "radlab_out/" + experiment;

    const RunReport rep = run_experiment(c);
    write_reports(rep, c);
    write_report_txt(std::cout, rep, c);
    return rep.all_pass() ? 0 : 1;
  } catch (const Error& e) {
    std::cerr << "radlab: " << e.what() << "\n";
    if (e.code() == Errc::Usage || e.code() == Errc::Config) return 2;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "radlab: " << e.what() << "\n";
    return 1;
  }
}
