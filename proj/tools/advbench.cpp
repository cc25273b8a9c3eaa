// advbench <train|attack|defend|bench|eval|report|run> --config <path> [--seed N] [--out DIR]
//
// Exit codes: 0 ok, 1 internal error, 2 invalid input or config, 3 numeric failure, 4 I/O failure.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "advbench/harness/experiment.hpp"

namespace {

enum ExitCode { kOk = 0, kInternal = 1, kValidation = 2, kNumeric = 3, kIo = 4 };

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool quiet = false;
};

advbench::harness::ExperimentConfig load(const Options& o) {
  auto j = advbench::harness::read_experiment_json(o.config);
  if (!j.is_object()) throw advbench::ValidationError("config '" + o.config + "' is not a JSON object");
  if (o.seed) j["seed"] = *o.seed;
  if (o.out) j["output"] = *o.out;
  return advbench::harness::experiment_config_from_json(j);
}

int execute(const std::string& command, const Options& o) {
  using namespace advbench::harness;
  Experiment exp(load(o), o.quiet ? nullptr : &std::cerr);
  const RunRecord r = command == "run" ? exp.run() : exp.run_phase(parse_phase(command));
  if (!o.quiet) {
    std::cerr << "config hash " << r.config_hash << ", seed " << r.seed << ", output " << exp.output().string() << '\n';
    for (const auto& [key, value] : r.summary) std::cout << key << '\t' << value << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial robustness toolkit: train, attack, defend, benchmark, evaluate, report"};
  app.require_subcommand(1);
  Options opts;
  std::string command;
  for (const char* name : {"train", "attack", "defend", "bench", "eval", "report", "run"}) {
    auto* sub = app.add_subcommand(name, std::string(name) == "run" ? "run every phase listed in the config"
                                                                     : std::string("run the ") + name + " phase");
    sub->add_option("--config", opts.config, "experiment config (JSON)")->required();
    sub->add_option("--seed", opts.seed, "override the config seed");
    sub->add_option("--out", opts.out, "override the output directory");
    sub->add_flag("--quiet", opts.quiet, "no progress output");
    sub->callback([&command, name] { command = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? kOk : kValidation;
  }

  try {
    return execute(command, opts);
  } catch (const advbench::ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kValidation;
  } catch (const advbench::TaskMismatchError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kValidation;
  } catch (const advbench::CapabilityError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kValidation;
  } catch (const advbench::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const advbench::IoError& e) {
    std::cerr << "i/o failure: " << e.what() << '\n';
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o failure: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
}
