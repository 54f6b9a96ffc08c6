#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "analogion/errors.hpp"
#include "analogion/pipeline.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string folds = "all";
  int jobs = 1;
  bool force = false;
};

void add_common(CLI::App* sub, Options& opt, bool fold_options) {
  sub->add_option("--config", opt.config, "experiment config (JSON)")->required();
  sub->add_option("--seed", opt.seed, "override the config seed");
  if (fold_options) {
    sub->add_option("--folds", opt.folds, "folds to process, e.g. 0..3, 1,4 or all");
    sub->add_option("--jobs", opt.jobs, "parallel fold workers")->check(CLI::PositiveNumber);
    sub->add_flag("--force", opt.force, "rerun folds that already have complete artifacts");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Train and evaluate embedding models on proportional analogies"};
  app.set_version_flag("--version", analogion::kToolVersion);
  app.require_subcommand(1);
  Options opt;

  auto* prepare = app.add_subcommand("prepare-data", "build the balanced corpus and fold split");
  auto* train = app.add_subcommand("train", "fine-tune one model per held-out fold");
  auto* evaluate = app.add_subcommand("evaluate", "score held-out folds and auxiliary protocols");
  auto* distractor = app.add_subcommand("distractor-eval", "distractor multiple-choice evaluation");
  auto* wordsim = app.add_subcommand("wordsim-eval", "word-similarity correlation");
  auto* freq = app.add_subcommand("freq-analysis", "frequency and OOV breakdowns");
  auto* report = app.add_subcommand("report", "regenerate result tables from stored reports");
  add_common(prepare, opt, false);
  add_common(train, opt, true);
  add_common(evaluate, opt, true);
  add_common(distractor, opt, true);
  add_common(wordsim, opt, true);
  add_common(freq, opt, false);
  add_common(report, opt, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const auto config = analogion::PipelineConfig::load(opt.config, opt.seed);
    analogion::RunOptions run;
    run.folds = analogion::parse_fold_spec(opt.folds, config.k);
    run.jobs = opt.jobs;
    run.force = opt.force;
    auto& log = std::cout;
    if (*prepare) analogion::cmd_prepare_data(config, log);
    else if (*train) analogion::cmd_train(config, run, log);
    else if (*evaluate) analogion::cmd_evaluate(config, run, log);
    else if (*distractor) analogion::cmd_distractor_eval(config, run, log);
    else if (*wordsim) analogion::cmd_wordsim_eval(config, run, log);
    else if (*freq) analogion::cmd_freq_analysis(config, log);
    else if (*report) analogion::cmd_report(config, log);
    return 0;
  } catch (const analogion::UserError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
}
