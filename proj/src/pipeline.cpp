#include "md/pipeline.h"

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <opencv2/imgcodecs.hpp>
#include <thread>

#include "md/ply.h"
#include "md/synth.h"

namespace md {

namespace {

namespace fs = std::filesystem;

CuePyramid buildFramePyramid(const FrameRecord& record, const RunConfig& config) {
  if (record.isCloud()) {
    auto [intensity, range] = cloudToImage(record.cloud, config.model);
    return buildPyramid(intensity, range, config.model, config.pyramid,
                        record.timestamp);
  }
  if (record.intensity.rows() != config.model.rows() ||
      record.intensity.cols() != config.model.cols()) {
    throw PipelineError("frame dimensions do not match the configured camera");
  }
  return buildPyramid(record.intensity, record.depth, config.model, config.pyramid,
                      record.timestamp);
}

std::string poseLine(const Isometry3& pose) {
  const Eigen::Vector3d t = pose.translation();
  char buffer[96];
  std::snprintf(buffer, sizeof(buffer), "[%.3f %.3f %.3f]", t.x(), t.y(), t.z());
  return buffer;
}

// Shared between the tracking lane and the loop-closure lane. All graph and
// keyframe-pose mutation happens under the mutex.
struct SharedState {
  std::mutex mutex;
  PoseGraph graph;
  Tracker tracker;
  LoopCloser closer;
  RunSummary summary;
  ProgressFn progress;
  SolverConfig graph_solver;
  bool any_closure = false;

  explicit SharedState(const RunConfig& config)
      : tracker(config.tracker), closer(config.loop_closer),
        graph_solver(config.graph_solver) {}

  void log(const std::string& line) {
    if (progress) {
      progress(line);
    }
  }

  // Caller holds the mutex.
  void processClosures(const Keyframe& keyframe) {
    const auto accepted =
        closer.detectAndValidate(keyframe, graph, tracker.keyframes());
    for (auto it = closer.history().rbegin();
         it != closer.history().rend() && it->query_id == keyframe.id; ++it) {
      if (it->stage == LoopStage::Rejected) {
        ++summary.closures_rejected[it->rejection.substr(0, it->rejection.find(':'))];
        log("closure " + std::to_string(it->query_id) + " -> " +
            std::to_string(it->matched_id) + " rejected: " + it->rejection);
      }
    }
    if (accepted.empty()) {
      return;
    }
    for (const LoopCandidate& c : accepted) {
      // c.z is matched <- query, which is exactly the from <- to convention.
      graph.addEdge({c.matched_id, c.query_id, c.z, c.information,
                     EdgeKind::Closure});
      ++summary.closures_accepted;
      log("closure " + std::to_string(c.query_id) + " -> " +
          std::to_string(c.matched_id) + " accepted, " +
          std::to_string(c.votes) + " votes");
    }
    any_closure = true;
    const GraphDelta delta = graph.optimize(graph_solver);
    for (const auto& [id, pose] : delta.poses) {
      tracker.setKeyframePose(id, pose);
    }
    log("graph optimized: chi2 " + std::to_string(delta.chi2_before) + " -> " +
        std::to_string(delta.chi2_after));
  }
};

// Asynchronous loop-closure lane: keyframes queue in, closures are applied
// to the shared graph as they are validated.
class ClosureLane {
 public:
  explicit ClosureLane(SharedState& state) : state_(state) {
    worker_ = std::thread([this] { run(); });
  }

  void enqueue(std::shared_ptr<const Keyframe> keyframe) {
    {
      std::lock_guard lock(queue_mutex_);
      queue_.push_back(std::move(keyframe));
    }
    wake_.notify_one();
  }

  void finish() {
    {
      std::lock_guard lock(queue_mutex_);
      done_ = true;
    }
    wake_.notify_one();
    worker_.join();
  }

 private:
  void run() {
    for (;;) {
      std::shared_ptr<const Keyframe> keyframe;
      {
        std::unique_lock lock(queue_mutex_);
        wake_.wait(lock, [this] { return done_ || !queue_.empty(); });
        if (queue_.empty()) {
          return;
        }
        keyframe = std::move(queue_.front());
        queue_.erase(queue_.begin());
      }
      std::lock_guard lock(state_.mutex);
      state_.processClosures(*keyframe);
    }
  }

  SharedState& state_;
  std::thread worker_;
  std::mutex queue_mutex_;
  std::condition_variable wake_;
  std::vector<std::shared_ptr<const Keyframe>> queue_;
  bool done_ = false;
};

}  // namespace

RunSummary runSlam(const RunConfig& config, const std::string& input_dir,
                   const std::string& output_dir, const ProgressFn& progress) {
  config.validate();
  fs::create_directories(output_dir);

  RunConfig effective = config;
  // Derived seeds keep every stochastic component tied to the run seed.
  effective.loop_closer.ransac.seed = config.seed * 2 + 1;

  auto stream = config.sensor == "rgbd"
                    ? loadRgbdSequence(input_dir, config.rgbd)
                    : loadLidarSequence(input_dir);

  SharedState state(effective);
  state.progress = progress;
  state.summary.frames_skipped = stream->skipped();
  std::unique_ptr<ClosureLane> lane;
  if (!config.single_thread && config.loop_closure_enabled) {
    lane = std::make_unique<ClosureLane>(state);
  }

  FrameRecord record;
  std::chrono::duration<double> tracked_time{0};
  std::size_t frame_id = 0;
  while (stream->next(record)) {
    TrackerEvent event;
    try {
      CuePyramid pyramid = buildFramePyramid(record, effective);
      const auto start   = std::chrono::steady_clock::now();
      std::lock_guard lock(state.mutex);
      event = state.tracker.track(std::move(pyramid));
      tracked_time += std::chrono::steady_clock::now() - start;
    } catch (const std::runtime_error& e) {
      if (lane) {
        lane->finish();
      }
      throw PipelineError("frame " + std::to_string(frame_id) + ": " + e.what());
    }
    ++frame_id;
    ++state.summary.frames;
    if (event.status == TrackerStatus::Lost) {
      ++state.summary.frames_lost;
    } else if (event.status == TrackerStatus::KeyframeSpawned) {
      std::unique_lock lock(state.mutex);
      ++state.summary.keyframes;
      state.graph.addNode(event.keyframe->id, event.keyframe->pose);
      if (event.edge) {
        state.graph.addEdge({event.edge->from, event.edge->to, event.edge->z,
                             event.edge->information, EdgeKind::Odometry});
      }
      const double hz = state.summary.frames / std::max(tracked_time.count(), 1e-9);
      state.log("keyframe " + std::to_string(event.keyframe->id) + " " +
                poseLine(event.keyframe->pose) + " " + std::to_string(hz) + " Hz");
      if (config.loop_closure_enabled) {
        if (lane) {
          lock.unlock();
          lane->enqueue(event.keyframe);
        } else {
          state.processClosures(*event.keyframe);
        }
      }
    }
  }
  if (lane) {
    lane->finish();
  }

  RunSummary& summary = state.summary;
  summary.tracking_hz =
      summary.frames > 0 ? summary.frames / std::max(tracked_time.count(), 1e-9) : 0;

  Trajectory trajectory;
  for (const auto& [ts, pose] : state.tracker.trajectory()) {
    trajectory.push(ts, pose);
  }
  const std::string trajectory_path = (fs::path(output_dir) / "trajectory.txt").string();
  writeTrajectory(trajectory, trajectory_path);
  summary.outputs["trajectory"] = trajectory_path;
  if (summary.keyframes == 0) {
    return summary;
  }

  Trajectory keyframe_trajectory;
  for (const auto& kf : state.tracker.keyframes()) {
    keyframe_trajectory.push(kf->timestamp, kf->pose);
  }
  const std::string keyframes_path = (fs::path(output_dir) / "keyframes.txt").string();
  writeTrajectory(keyframe_trajectory, keyframes_path);
  summary.outputs["keyframes"] = keyframes_path;

  const std::string graph_path = (fs::path(output_dir) / "graph.txt").string();
  {
    std::ofstream out(graph_path);
    writeGraph(out, state.graph);
  }
  summary.outputs["graph"] = graph_path;
  summary.final_chi2       = state.graph.chi2().first;

  const std::string map_path = (fs::path(output_dir) / "map.ply").string();
  exportPly(state.tracker.keyframes(), map_path, {config.ply_voxel});
  summary.outputs["map"] = map_path;
  return summary;
}

SynthSummary runSynth(const RunConfig& config, const std::string& scene_path,
                      const std::string& trajectory_path,
                      const std::string& out_dir) {
  config.validate();
  const Scene scene          = loadScene(scene_path);
  const Trajectory trajectory = readTrajectory(trajectory_path);
  if (trajectory.empty()) {
    throw PipelineError("empty trajectory spec: " + trajectory_path);
  }
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  SynthSummary summary;
  if (config.sensor == "rgbd") {
    fs::create_directories(dir / "rgb");
    fs::create_directories(dir / "depth");
    std::ofstream rgb_index(dir / "rgb.txt");
    std::ofstream depth_index(dir / "depth.txt");
    for (const StampedPose& sp : trajectory.poses) {
      const RenderedFrame frame =
          renderScene(scene, sp.pose, config.model,
                      {config.synth_noise_sigma, config.seed + summary.frames});
      cv::Mat intensity(config.model.rows(), config.model.cols(), CV_16UC1,
                        cv::Scalar(0));
      cv::Mat depth = intensity.clone();
      for (int r = 0; r < frame.intensity.rows(); ++r) {
        for (int c = 0; c < frame.intensity.cols(); ++c) {
          if (frame.intensity.isValid(r, c)) {
            intensity.at<std::uint16_t>(r, c) = static_cast<std::uint16_t>(
                std::lround(frame.intensity.data(r, c) * 65535.0));
          }
          if (frame.range.isValid(r, c)) {
            depth.at<std::uint16_t>(r, c) = static_cast<std::uint16_t>(
                std::lround(frame.range.data(r, c) * config.rgbd.depth_scale));
          }
        }
      }
      char name[64];
      std::snprintf(name, sizeof(name), "%.6f.png", sp.timestamp);
      if (!cv::imwrite((dir / "rgb" / name).string(), intensity) ||
          !cv::imwrite((dir / "depth" / name).string(), depth)) {
        throw PipelineError("cannot write frame image " + std::string(name));
      }
      char ts[32];
      std::snprintf(ts, sizeof(ts), "%.6f", sp.timestamp);
      rgb_index << ts << " rgb/" << name << "\n";
      depth_index << ts << " depth/" << name << "\n";
      ++summary.frames;
    }
    summary.outputs["rgb_index"]   = (dir / "rgb.txt").string();
    summary.outputs["depth_index"] = (dir / "depth.txt").string();
  } else {
    for (const StampedPose& sp : trajectory.poses) {
      const RenderedFrame frame =
          renderScene(scene, sp.pose, config.model,
                      {config.synth_noise_sigma, config.seed + summary.frames});
      std::vector<LidarPoint> cloud;
      for (int r = 0; r < frame.range.rows(); ++r) {
        for (int c = 0; c < frame.range.cols(); ++c) {
          if (!frame.range.isValid(r, c)) {
            continue;
          }
          cloud.push_back({config.model.unproject({double(c), double(r)},
                                                  frame.range.data(r, c)),
                           frame.intensity.data(r, c)});
        }
      }
      char name[64];
      std::snprintf(name, sizeof(name), "%.6f.bin", sp.timestamp);
      writeLidarCloud(cloud, (dir / name).string());
      ++summary.frames;
    }
  }
  const std::string gt_path = (dir / "groundtruth.txt").string();
  writeTrajectory(trajectory, gt_path);
  summary.outputs["groundtruth"] = gt_path;
  return summary;
}

}  // namespace md
