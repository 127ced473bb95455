#include "dytb/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

namespace {

// Flags are optional so that only the ones given override the config file
// and the environment.
struct Flags {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<int> depth, dimension, N, k, r, level;
  std::optional<double> gamma, eta;
  std::optional<std::size_t> trials, functions, samples;
  std::optional<std::string> out, kernel, system, measure, forest, sequence;
  std::vector<double> x;
};

void add_flags(CLI::App& app, Flags& f) {
  app.add_option("--config", f.config, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--seed", f.seed, "base seed");
  app.add_option("--depth", f.depth, "finest level of the grids");
  app.add_option("--dimension", f.dimension, "ambient dimension");
  app.add_option("--out", f.out, "output directory");
  app.add_option("--N", f.N, "counterexample size");
  app.add_option("--k", f.k, "truncation level or badness scale gap");
  app.add_option("--r", f.r, "goodness parameter r");
  app.add_option("--gamma", f.gamma, "goodness exponent");
  app.add_option("--eta", f.eta, "boundary layer width");
  app.add_option("--level", f.level, "cube level for boundary sampling");
  app.add_option("--trials", f.trials, "Monte Carlo trials");
  app.add_option("--functions", f.functions, "number of random test functions");
  app.add_option("--samples", f.samples, "kernel sample pairs");
  app.add_option("--kernel", f.kernel, "kernel spec");
  app.add_option("--system", f.system, "accretive system");
  app.add_option("--measure", f.measure, "measure name or CSV path");
  app.add_option("--forest", f.forest, "stopping rule");
  app.add_option("--sequence", f.sequence, "Carleson sequence");
  app.add_option("--x", f.x, "point for boundary sampling");
}

template <typename T>
void take(const std::optional<T>& flag, T& field) {
  if (flag) field = *flag;
}

dytb::ExperimentConfig resolve(const Flags& f) {
  dytb::ExperimentConfig c = f.config ? dytb::load_config(*f.config) : dytb::ExperimentConfig{};
  dytb::apply_environment(c, [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    return v ? std::optional<std::string>(v) : std::nullopt;
  });
  take(f.seed, c.seed);
  take(f.depth, c.depth);
  take(f.dimension, c.dimension);
  take(f.out, c.out);
  take(f.N, c.N);
  take(f.k, c.k);
  take(f.r, c.r);
  take(f.gamma, c.gamma);
  take(f.eta, c.eta);
  take(f.level, c.level);
  take(f.trials, c.trials);
  take(f.functions, c.functions);
  take(f.samples, c.samples);
  take(f.kernel, c.kernel);
  take(f.system, c.system);
  take(f.measure, c.measure);
  take(f.forest, c.forest);
  take(f.sequence, c.sequence);
  if (!f.x.empty()) c.x = f.x;
  return dytb::config_from_json(dytb::to_json(c));
}

void print_error(const std::string& command, const std::string& message) {
  std::cout << dytb::Json{{"error", message}, {"command", command}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dyadic two-weight T(b) experiments"};
  app.require_subcommand(1);
  Flags flags;
  for (const std::string& name : dytb::command_names()) {
    CLI::App* sub = app.add_subcommand(name);
    add_flags(*sub, flags);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("", e.what());
    return 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const dytb::RunResult res = dytb::run_command(command, resolve(flags));
    std::cout << command << ": " << (res.pass ? "pass" : "FAIL") << ", " << res.summary << '\n';
    for (const auto& file : res.files) std::cout << "  wrote " << file << '\n';
    return res.pass ? 0 : 1;
  } catch (const std::exception& e) {
    print_error(command, e.what());
    return 2;
  }
}
