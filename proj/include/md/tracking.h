// Open-loop odometry: every incoming pyramid is registered against the
// current keyframe; a new keyframe is spawned when the relative motion grows
// past the thresholds or the overlap drops. Keyframe payloads are immutable
// once spawned.
#pragma once

#include "md/registration.h"

#include <memory>
#include <optional>
#include <vector>

namespace md {

struct Keyframe {
  std::size_t id = 0;
  Isometry3 pose = Isometry3::Identity();  // world <- keyframe
  CuePyramid pyramid;
  double timestamp = 0;
};

struct TrackerConfig {
  double translation_threshold = 0.25;            // meters
  double rotation_threshold    = 15.0 * M_PI / 180.0;
  double min_overlap           = 0.6;
  RegistrationConfig registration;
};

struct TrackerEdge {
  std::size_t from = 0, to = 0;  // keyframe ids
  Isometry3 z = Isometry3::Identity();  // from <- to
  Matrix6d information = Matrix6d::Zero();
};

enum class TrackerStatus { Tracked, KeyframeSpawned, Lost };

struct TrackerEvent {
  TrackerStatus status = TrackerStatus::Tracked;
  Isometry3 pose       = Isometry3::Identity();  // world <- sensor
  std::shared_ptr<const Keyframe> keyframe;      // set when spawned
  std::optional<TrackerEdge> edge;               // absent for the first keyframe
};

class Tracker {
 public:
  explicit Tracker(TrackerConfig config = {}) : config_(std::move(config)) {}

  TrackerEvent track(CuePyramid pyramid);

  const std::vector<std::shared_ptr<const Keyframe>>& keyframes() const {
    return keyframes_;
  }
  // Per-frame global poses, recomputed from the current keyframe poses so a
  // later graph optimization propagates to the whole trajectory.
  std::vector<std::pair<double, Isometry3>> trajectory() const;

  // Applied after pose-graph optimization; the tracker continues from the
  // updated pose of its current keyframe.
  void setKeyframePose(std::size_t id, const Isometry3& pose);

  bool lost() const { return lost_; }

 private:
  struct FrameRecord {
    double timestamp;
    std::size_t keyframe_id;
    Isometry3 z;  // keyframe <- frame
  };

  TrackerEvent spawnKeyframe(CuePyramid&& pyramid, const Isometry3& z,
                             const Matrix6d& information);

  TrackerConfig config_;
  std::vector<std::shared_ptr<const Keyframe>> keyframes_;
  std::vector<FrameRecord> frames_;
  Isometry3 last_z_     = Isometry3::Identity();  // current keyframe <- last frame
  Isometry3 last_delta_ = Isometry3::Identity();  // inter-frame motion in the chart
  bool lost_            = false;
};

}  // namespace md
