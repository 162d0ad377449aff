#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace tagalign {

// stable exit-code contract shared by all subcommands
inline constexpr int kExitOk = 0;
inline constexpr int kExitIoOrParse = 1;
inline constexpr int kExitInsufficientTags = 2;
inline constexpr int kExitDegenerate = 3;
inline constexpr int kExitEvalGate = 4;

struct PipelineOptions {
  std::string config_path;
  std::string out_dir;    // overrides the config's output directory
  std::string method;     // "dlt" | "similarity"; overrides the config
  std::string direction;  // "slam-to-sfm" | "sfm-to-slam"; overrides the config
  std::optional<std::uint64_t> seed;  // synth only
};

int cmd_localize(const PipelineOptions& opts);
int cmd_align(const PipelineOptions& opts);
int cmd_synth(const PipelineOptions& opts);
int cmd_eval(const PipelineOptions& opts);

}  // namespace tagalign
