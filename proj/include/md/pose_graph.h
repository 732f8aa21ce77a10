// Pose graph over keyframe poses: relative-pose edges with information
// matrices, Gauss-Newton optimization on the stacked chart perturbation with
// the gauge node removed from the state.
#pragma once

#include "md/geometry.h"
#include "md/ils.h"

#include <iosfwd>
#include <map>
#include <vector>

namespace md {

struct ConnectivityError : std::runtime_error {
  explicit ConnectivityError(const std::string& what) : std::runtime_error(what) {}
};
struct GaugeError : std::runtime_error {
  explicit GaugeError(const std::string& what) : std::runtime_error(what) {}
};

enum class EdgeKind { Odometry, Closure };

struct GraphEdge {
  std::size_t from = 0, to = 0;
  Isometry3 z = Isometry3::Identity();  // from <- to
  Matrix6d information = Matrix6d::Identity();
  EdgeKind kind = EdgeKind::Odometry;
};

struct GraphDelta {
  double chi2_before = 0, chi2_after = 0;
  int iterations = 0;
  std::map<std::size_t, Isometry3> poses;  // state after optimization
};

// e = (X_i^-1 X_j) boxminus Z, in the manifold chart.
Vector6d edgeError(const Isometry3& xi, const Isometry3& xj, const Isometry3& z);

// Analytic jacobians of edgeError w.r.t. right perturbations of X_i and X_j.
void edgeJacobians(const Isometry3& xi, const Isometry3& xj, const Isometry3& z,
                   Matrix6d& j_i, Matrix6d& j_j);

class PoseGraph {
 public:
  void addNode(std::size_t id, const Isometry3& pose);
  void addEdge(const GraphEdge& edge);  // endpoints must exist
  void setPose(std::size_t id, const Isometry3& pose);
  void setGauge(std::size_t id);

  const std::map<std::size_t, Isometry3>& nodes() const { return nodes_; }
  const std::vector<GraphEdge>& edges() const { return edges_; }
  std::size_t gauge() const { return gauge_; }
  const Isometry3& pose(std::size_t id) const;

  // Total and per-edge chi2 at the current estimate.
  std::pair<double, std::vector<double>> chi2() const;

  // Gauss-Newton; gauge node bitwise untouched. use_finite_differences
  // replaces the analytic jacobians with a central-difference fallback.
  GraphDelta optimize(const SolverConfig& config = {},
                      bool use_finite_differences = false);

 private:
  std::map<std::size_t, Isometry3> nodes_;
  std::vector<GraphEdge> edges_;
  std::size_t gauge_ = 0;
};

// Line-oriented text format: `NODE id tx ty tz qx qy qz qw` and
// `EDGE i j tx ty tz qx qy qz qw` followed by the 21 upper-triangular
// entries of the information matrix, row-major.
void writeGraph(std::ostream& out, const PoseGraph& graph);
PoseGraph readGraph(std::istream& in);

}  // namespace md
