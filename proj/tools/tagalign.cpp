#include <CLI11.hpp>

#include "tagalign/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Tag-based registration of SLAM and SfM point clouds"};
  app.require_subcommand(1);

  tagalign::PipelineOptions opts;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", opts.config_path, "TOML configuration file")
        ->required();
    cmd->add_option("--out", opts.out_dir, "output directory override");
  };

  CLI::App* localize = app.add_subcommand(
      "localize", "locate the tags in both point clouds and write JSON reports");
  add_common(localize);

  CLI::App* align = app.add_subcommand(
      "align", "estimate the inter-cloud transform and write the merged PLY");
  add_common(align);
  align->add_option("--method", opts.method, "dlt | similarity")
      ->check(CLI::IsMember({"dlt", "similarity"}));
  align->add_option("--direction", opts.direction, "slam-to-sfm | sfm-to-slam")
      ->check(CLI::IsMember({"slam-to-sfm", "sfm-to-slam"}));

  CLI::App* synth = app.add_subcommand(
      "synth", "generate a synthetic two-cloud fixture with known ground truth");
  add_common(synth);
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = synth->add_option("--seed", seed, "scene seed override");

  CLI::App* eval = app.add_subcommand(
      "eval", "compare an alignment report against a truth manifest");
  add_common(eval);

  CLI11_PARSE(app, argc, argv);

  if (seed_opt->count() > 0) opts.seed = seed;

  if (localize->parsed()) return tagalign::cmd_localize(opts);
  if (align->parsed()) return tagalign::cmd_align(opts);
  if (synth->parsed()) return tagalign::cmd_synth(opts);
  if (eval->parsed()) return tagalign::cmd_eval(opts);
  return 1;
}
