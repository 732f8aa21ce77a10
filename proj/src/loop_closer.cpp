#include "md/loop_closer.h"

#include <algorithm>

namespace md {

namespace {

// 3D point of a keypoint in the keyframe's sensor frame, from the finest
// range image; invalid keypoints yield nothing.
bool unprojectKeypoint(const PyramidLevel& level, const PixelCoord& uv,
                       Eigen::Vector3d& out) {
  const int r = static_cast<int>(std::lround(uv.v));
  const int c = static_cast<int>(std::lround(uv.u));
  if (r < 0 || c < 0 || r >= level.rows() || c >= level.cols() ||
      !level.range.isValid(r, c)) {
    return false;
  }
  out = level.model.unproject({double(c), double(r)}, level.range.data(r, c));
  return true;
}

}  // namespace

const std::vector<BinaryDescriptor>* LoopCloser::descriptorsOf(
    std::size_t keyframe_id) const {
  const auto it = descriptors_.find(keyframe_id);
  return it == descriptors_.end() ? nullptr : &it->second;
}

std::vector<LoopCandidate> LoopCloser::detectAndValidate(
    const Keyframe& query, const PoseGraph& graph,
    const std::vector<std::shared_ptr<const Keyframe>>& keyframes) {
  std::vector<BinaryDescriptor> query_descriptors =
      extractFeatures(query.pyramid.finest().intensity, config_.features);

  std::vector<LoopCandidate> accepted;
  const auto matches = tree_.query(query_descriptors, config_.match_threshold);

  // Vote tally with the temporal exclusion window.
  std::map<std::size_t, std::vector<const DescriptorMatch*>> per_keyframe;
  for (const DescriptorMatch& m : matches) {
    if (m.keyframe_id + config_.temporal_exclusion >= query.id) {
      continue;
    }
    per_keyframe[m.keyframe_id].push_back(&m);
  }

  std::map<std::size_t, const Keyframe*> by_id;
  for (const auto& kf : keyframes) {
    by_id.emplace(kf->id, kf.get());
  }

  for (const auto& [matched_id, kf_matches] : per_keyframe) {
    if (static_cast<int>(kf_matches.size()) < config_.min_votes) {
      continue;
    }
    LoopCandidate candidate;
    candidate.query_id   = query.id;
    candidate.matched_id = matched_id;
    candidate.votes      = static_cast<int>(kf_matches.size());
    candidate.stage      = LoopStage::Retrieved;

    const Keyframe* matched = by_id.at(matched_id);
    const auto& stored      = descriptors_.at(matched_id);

    // 3D-3D correspondences via the stored range images.
    for (const DescriptorMatch* m : kf_matches) {
      Eigen::Vector3d p_matched, p_query;
      if (unprojectKeypoint(matched->pyramid.finest(),
                            stored[m->stored_index].keypoint.uv, p_matched) &&
          unprojectKeypoint(query.pyramid.finest(),
                            query_descriptors[m->query_index].keypoint.uv, p_query)) {
        candidate.correspondences.emplace_back(p_matched, p_query);
      }
    }
    if (candidate.correspondences.size() < 3) {
      candidate.stage     = LoopStage::Rejected;
      candidate.rejection = "too few 3d correspondences";
      history_.push_back(std::move(candidate));
      continue;
    }

    const RansacResult ransac = ransacAlign(candidate.correspondences, config_.ransac);
    if (!ransac.success) {
      candidate.stage     = LoopStage::Rejected;
      candidate.rejection = "ransac: " + ransac.failure;
      history_.push_back(std::move(candidate));
      continue;
    }
    candidate.stage = LoopStage::RansacOk;

    // Direct refinement seeded with the RANSAC transform; yields Z and the
    // information on the same scale as tracker edges.
    RegistrationResult refined;
    try {
      refined = registerPyramids(matched->pyramid, query.pyramid, ransac.transform,
                                 config_.registration);
    } catch (const std::runtime_error& e) {
      candidate.stage     = LoopStage::Rejected;
      candidate.rejection = std::string("refinement: ") + e.what();
      history_.push_back(std::move(candidate));
      continue;
    }
    if (!refined.converged) {
      candidate.stage     = LoopStage::Rejected;
      candidate.rejection = "refinement did not converge";
      history_.push_back(std::move(candidate));
      continue;
    }
    candidate.stage       = LoopStage::Refined;
    candidate.z           = refined.transform;
    candidate.information = refined.information;

    // Topological check: register every pair that would become graph
    // neighbors after acceptance and compare against the closure-implied
    // prediction. The closure carries the query's neighborhood rigidly.
    const Isometry3& x_i = graph.pose(matched_id);
    const Isometry3& x_j = graph.pose(query.id);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (fixed, moving=query side)
    std::vector<Isometry3> predictions;
    for (const GraphEdge& edge : graph.edges()) {
      const auto consider = [&](std::size_t nb, bool neighbor_of_matched) {
        if (neighbor_of_matched) {
          if (nb == query.id || !by_id.count(nb)) {
            return;
          }
          pairs.emplace_back(nb, query.id);
          predictions.push_back(graph.pose(nb).inverse() * x_i * candidate.z);
        } else {
          if (nb == matched_id || !by_id.count(nb)) {
            return;
          }
          pairs.emplace_back(matched_id, nb);
          predictions.push_back(candidate.z * x_j.inverse() * graph.pose(nb));
        }
      };
      if (edge.from == matched_id) {
        consider(edge.to, true);
      } else if (edge.to == matched_id) {
        consider(edge.from, true);
      }
      if (edge.from == query.id) {
        consider(edge.to, false);
      } else if (edge.to == query.id) {
        consider(edge.from, false);
      }
    }
    bool topo_ok = true;
    std::string topo_reason;
    for (std::size_t k = 0; k < pairs.size() && topo_ok; ++k) {
      const Keyframe* fixed  = by_id.at(pairs[k].first);
      const Keyframe* moving = by_id.at(pairs[k].second);
      RegistrationResult check;
      try {
        check = registerPyramids(fixed->pyramid, moving->pyramid, predictions[k],
                                 config_.registration);
      } catch (const std::runtime_error& e) {
        topo_ok     = false;
        topo_reason = std::string("neighbor registration failed: ") + e.what();
        break;
      }
      if (!check.converged || check.mean_chi2 > config_.topo_mean_chi2_gate) {
        topo_ok     = false;
        topo_reason = "neighbor registration above chi2 gate";
        break;
      }
      const Isometry3 deviation = predictions[k].inverse() * check.transform;
      if (translationNorm(deviation) > config_.topo_translation_gate ||
          rotationAngle(deviation) > config_.topo_rotation_gate) {
        topo_ok     = false;
        topo_reason = "neighbor registration deviates from prediction";
      }
    }
    if (!topo_ok) {
      candidate.stage     = LoopStage::Rejected;
      candidate.rejection = "topological check: " + topo_reason;
      history_.push_back(std::move(candidate));
      continue;
    }
    candidate.stage = LoopStage::TopologicallyValid;
    history_.push_back(candidate);
    accepted.push_back(std::move(candidate));
  }

  tree_.insert(query_descriptors, query.id);
  descriptors_.emplace(query.id, std::move(query_descriptors));
  return accepted;
}

}  // namespace md
