#include <exception>
#include <ostream>

#include <CLI11.hpp>

#include "ucvme/cli/commands.hpp"

namespace ucvme::cli {

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semi-supervised regression with co-trained dropout MLPs", "ucvme"};
  app.require_subcommand(1);

  CommandOptions opts;
  std::uint64_t seed = 0;
  std::string out_dir;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "Experiment config file")->required();
    sub->add_option("--seed", seed, "Overrides the config seed (and the ablation seed list)");
    sub->add_option("--out", out_dir, "Output directory (overrides output_dir)");
  };
  CLI::App* train = app.add_subcommand("train", "Train one model pair and write metrics, history, bins, checkpoints");
  CLI::App* ablate = app.add_subcommand("ablate", "Run all four variants over the seed list");
  CLI::App* variance = app.add_subcommand("variance-demo", "Train, then compare T-draw ensembles with single draws");
  CLI::App* evaluate = app.add_subcommand("evaluate", "Score checkpoints written by train on the test split");
  for (auto* sub : {train, ablate, variance, evaluate}) add_common(sub);
  evaluate->add_option("--from", opts.from_dir, "Directory written by train")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? exit_ok : exit_usage;
  }

  for (auto* sub : {train, ablate, variance, evaluate}) {
    if (sub->count("--seed")) opts.seed = seed;
    if (sub->count("--out")) opts.out_dir = out_dir;
  }

  try {
    if (*train) return cmd_train(opts, out);
    if (*ablate) return cmd_ablate(opts, out);
    if (*variance) return cmd_variance_demo(opts, out);
    return cmd_evaluate(opts, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_failure;
  }
}

}  // namespace ucvme::cli
