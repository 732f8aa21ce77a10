// Appearance-based loop closing: binary features on keyframe intensity
// images, retrieval through the descriptor tree, RANSAC 3D alignment on
// unprojected matches, direct refinement, and a topological consistency
// check against the would-be graph neighborhood.
#pragma once

#include "md/hbst.h"
#include "md/pose_graph.h"
#include "md/ransac.h"
#include "md/tracking.h"

namespace md {

enum class LoopStage { Retrieved, RansacOk, Refined, TopologicallyValid, Rejected };

struct LoopCandidate {
  std::size_t query_id   = 0;
  std::size_t matched_id = 0;
  int votes              = 0;
  std::vector<Correspondence> correspondences;  // (p_matched, p_query)
  Isometry3 z = Isometry3::Identity();          // matched <- query
  Matrix6d information = Matrix6d::Zero();
  LoopStage stage = LoopStage::Retrieved;
  std::string rejection;  // set when stage == Rejected
};

struct LoopCloserConfig {
  int temporal_exclusion = 10;  // most recent keyframes excluded from retrieval
  int min_votes          = 15;
  int match_threshold    = 40;  // hamming, cross-view matching
  FeatureConfig features;
  RansacConfig ransac;  // gate 0.2 m RGB-D; callers set 0.5 m for LiDAR
  RegistrationConfig registration;
  double topo_translation_gate = 0.3;  // meters
  double topo_rotation_gate    = 5.0 * M_PI / 180.0;
  double topo_mean_chi2_gate   = 0.05;  // per-residual chi2 of topo registrations
};

class LoopCloser {
 public:
  explicit LoopCloser(LoopCloserConfig config = {}) : config_(std::move(config)) {}

  // Processes a freshly spawned keyframe: queries the tree over earlier
  // keyframes, runs the validation pipeline, then inserts the keyframe's own
  // descriptors. Accepted candidates are returned for edge insertion; every
  // examined candidate (accepted or rejected, with its stage and reason) is
  // appended to history().
  std::vector<LoopCandidate> detectAndValidate(
      const Keyframe& query, const PoseGraph& graph,
      const std::vector<std::shared_ptr<const Keyframe>>& keyframes);

  const std::vector<LoopCandidate>& history() const { return history_; }
  const std::vector<BinaryDescriptor>* descriptorsOf(std::size_t keyframe_id) const;

 private:
  LoopCloserConfig config_;
  DescriptorTree tree_{100};
  std::map<std::size_t, std::vector<BinaryDescriptor>> descriptors_;
  std::vector<LoopCandidate> history_;
};

}  // namespace md
