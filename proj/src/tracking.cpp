#include "md/tracking.h"

namespace md {

TrackerEvent Tracker::spawnKeyframe(CuePyramid&& pyramid, const Isometry3& z,
                                    const Matrix6d& information) {
  auto kf       = std::make_shared<Keyframe>();
  kf->id        = keyframes_.size();
  kf->timestamp = pyramid.timestamp;
  kf->pyramid   = std::move(pyramid);

  TrackerEvent event;
  event.status = TrackerStatus::KeyframeSpawned;
  if (keyframes_.empty()) {
    kf->pose = Isometry3::Identity();
  } else {
    const Keyframe& prev = *keyframes_.back();
    kf->pose             = prev.pose * z;
    TrackerEdge edge;
    edge.from        = prev.id;
    edge.to          = kf->id;
    edge.z           = z;
    edge.information = information;
    event.edge       = edge;
  }
  keyframes_.push_back(kf);
  frames_.push_back({kf->timestamp, kf->id, Isometry3::Identity()});
  // The spawned keyframe is the current frame; the inter-frame velocity
  // survives the switch.
  last_z_ = Isometry3::Identity();
  event.pose     = kf->pose;
  event.keyframe = kf;
  return event;
}

TrackerEvent Tracker::track(CuePyramid pyramid) {
  if (keyframes_.empty()) {
    return spawnKeyframe(std::move(pyramid), Isometry3::Identity(), Matrix6d::Zero());
  }
  const Keyframe& kf = *keyframes_.back();

  // Constant-velocity seed in the chart: last estimate advanced by the last
  // inter-frame motion.
  const Isometry3 guess = last_z_ * last_delta_;
  RegistrationResult result;
  bool failed = false;
  try {
    result = registerPyramids(kf.pyramid, pyramid, guess, config_.registration);
  } catch (const InsufficientOverlap&) {
    failed = true;
  } catch (const Divergence&) {
    failed = true;
  }
  if (failed) {
    lost_ = true;
    TrackerEvent event;
    event.status = TrackerStatus::Lost;
    event.pose   = kf.pose * last_z_;  // held
    frames_.push_back({pyramid.timestamp, kf.id, last_z_});
    return event;
  }
  lost_ = false;

  const Isometry3 z = result.transform;  // keyframe <- frame
  last_delta_       = last_z_.inverse() * z;
  last_z_           = z;

  const bool spawn =
      translationNorm(z) > config_.translation_threshold ||
      rotationAngle(z) > config_.rotation_threshold ||
      overlap(kf.pyramid.finest(), pyramid.finest(), z,
              config_.registration.overlap_range_gate) < config_.min_overlap;
  if (spawn) {
    return spawnKeyframe(std::move(pyramid), z, result.information);
  }

  TrackerEvent event;
  event.status = TrackerStatus::Tracked;
  event.pose   = kf.pose * z;
  frames_.push_back({pyramid.timestamp, kf.id, z});
  return event;
}

std::vector<std::pair<double, Isometry3>> Tracker::trajectory() const {
  std::vector<std::pair<double, Isometry3>> out;
  out.reserve(frames_.size());
  for (const FrameRecord& f : frames_) {
    out.emplace_back(f.timestamp, keyframes_[f.keyframe_id]->pose * f.z);
  }
  return out;
}

void Tracker::setKeyframePose(std::size_t id, const Isometry3& pose) {
  if (id >= keyframes_.size()) {
    throw std::out_of_range("Tracker::setKeyframePose: unknown keyframe");
  }
  // Keyframes are shared immutably with readers of the payload; the pose is
  // the one mutable field and is owned by the tracking thread.
  const_cast<Keyframe&>(*keyframes_[id]).pose = pose;
}

}  // namespace md
