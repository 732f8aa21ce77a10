// End-to-end orchestration: loader -> pyramid -> tracker -> loop closer ->
// pose graph, with file outputs and a run summary.
#pragma once

#include "md/config.h"
#include "md/pose_graph.h"
#include "md/trajectory.h"

#include <functional>
#include <map>

namespace md {

struct PipelineError : std::runtime_error {
  explicit PipelineError(const std::string& what) : std::runtime_error(what) {}
};

struct RunSummary {
  std::size_t frames    = 0;
  std::size_t keyframes = 0;
  std::size_t frames_skipped = 0;  // dropped by the loader
  std::size_t frames_lost    = 0;  // tracker could not register
  std::size_t closures_accepted = 0;
  std::map<std::string, std::size_t> closures_rejected;  // reason -> count
  double final_chi2  = 0;
  double tracking_hz = 0;
  std::map<std::string, std::string> outputs;  // label -> path
};

using ProgressFn = std::function<void(const std::string&)>;

// Processes the sequence under config.sensor, writing trajectory.txt,
// keyframes.txt, graph.txt and map.ply into output_dir. Deterministic for a
// fixed seed in single-thread mode; otherwise the loop-closure lane runs
// asynchronously. Data failures abort with the offending frame id.
RunSummary runSlam(const RunConfig& config, const std::string& input_dir,
                   const std::string& output_dir, const ProgressFn& progress = {});

struct SynthSummary {
  std::size_t frames = 0;
  std::map<std::string, std::string> outputs;
};

// Renders the scene along the ground-truth trajectory into a sequence
// loadable by the matching loader, plus groundtruth.txt.
SynthSummary runSynth(const RunConfig& config, const std::string& scene_path,
                      const std::string& trajectory_path,
                      const std::string& out_dir);

}  // namespace md
