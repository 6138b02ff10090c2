#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "negbias/experiment.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<int> threads;
  std::optional<std::string> out_dir;
};

negbias::ExperimentSpec resolve(const Overrides& o) {
  negbias::ExperimentSpec spec = negbias::load_spec(o.config);
  if (o.seed) spec.master_seed = *o.seed;
  if (o.trials) spec.n_trials = *o.trials;
  if (o.threads) spec.threads = *o.threads;
  if (o.out_dir) spec.out_dir = *o.out_dir;
  spec.validate();
  return spec;
}

bool is_validation(negbias::ErrorCode code) {
  using negbias::ErrorCode;
  return code == ErrorCode::InvalidConfig || code == ErrorCode::NonpositiveLogArgument ||
         code == ErrorCode::StateSpaceTooLarge;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bias of adaptively collected sample means and its correction"};
  app.require_subcommand(1);

  Overrides o;
  using Command = negbias::CommandResult (*)(const negbias::ExperimentSpec&);
  Command command = nullptr;

  const std::pair<const char*, Command> commands[] = {
      {"bias-curves", negbias::cmd_bias_curves},   {"joint-bias", negbias::cmd_joint_bias},
      {"debias", negbias::cmd_debias},             {"analytic-check", negbias::cmd_analytic_check},
      {"scatter", negbias::cmd_scatter},
  };
  const char* help[] = {
      "Per-round bias of the sample means",
      "Fraction of trials with m arms negatively biased",
      "Compare naive, held-out, propensity and cMLE estimates",
      "Exact Bernoulli bias over a grid of arm means",
      "Snapshot bias against future draws of arm 1",
  };
  for (std::size_t i = 0; i < std::size(commands); ++i) {
    auto* sub = app.add_subcommand(commands[i].first, help[i]);
    sub->add_option("--config", o.config, "JSON experiment spec")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Master seed override");
    sub->add_option("--trials", o.trials, "Trial count override");
    sub->add_option("--threads", o.threads, "Worker threads");
    sub->add_option("--out-dir", o.out_dir, "Output directory");
    sub->callback([&command, c = commands[i].second] { command = c; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const auto spec = resolve(o);
    const auto result = command(spec);
    std::cout << result.text;
    for (const auto& f : result.files) std::cout << "wrote " << f.string() << '\n';
    return 0;
  } catch (const negbias::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return is_validation(e.code()) ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
