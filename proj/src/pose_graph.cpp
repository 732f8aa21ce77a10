#include "md/pose_graph.h"

#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace md {

namespace {

// Quaternion multiplication matrices in (w, x, y, z) layout:
// L(q) p = q * p, R(q) p = p * q.
Eigen::Matrix4d quatL(const Eigen::Quaterniond& q) {
  Eigen::Matrix4d m;
  m << q.w(), -q.x(), -q.y(), -q.z(),
       q.x(),  q.w(), -q.z(),  q.y(),
       q.y(),  q.z(),  q.w(), -q.x(),
       q.z(), -q.y(),  q.x(),  q.w();
  return m;
}

Eigen::Matrix4d quatR(const Eigen::Quaterniond& q) {
  Eigen::Matrix4d m;
  m << q.w(), -q.x(), -q.y(), -q.z(),
       q.x(),  q.w(),  q.z(), -q.y(),
       q.y(), -q.z(),  q.w(),  q.x(),
       q.z(),  q.y(), -q.x(),  q.w();
  return m;
}

}  // namespace

Vector6d edgeError(const Isometry3& xi, const Isometry3& xj, const Isometry3& z) {
  return boxminus(xi.inverse() * xj, z);
}

void edgeJacobians(const Isometry3& xi, const Isometry3& xj, const Isometry3& z,
                   Matrix6d& j_i, Matrix6d& j_j) {
  const Isometry3 b    = xi.inverse() * xj;
  const Isometry3 zinv = z.inverse();
  const Isometry3 e    = zinv * b;

  Eigen::Quaterniond qe(e.linear());
  Eigen::Quaterniond qzinv(zinv.linear());
  // t2v fixes the sign so the real part is >= 0; fold the same sign into the
  // left factor so qzinv * qb == qe holds for the values we differentiate.
  if (qe.w() < 0) {
    qe.coeffs() *= -1;
    qzinv.coeffs() *= -1;
  }
  const Eigen::Quaterniond qb(b.linear());
  const Eigen::Matrix3d r_e    = e.linear();
  const Eigen::Matrix3d r_zinv = zinv.linear();

  // Right perturbation of X_j: E(d) = E * v2t(d).
  j_j.setZero();
  j_j.topLeftCorner<3, 3>() = r_e;
  j_j.bottomRightCorner<3, 3>() =
      qe.w() * Eigen::Matrix3d::Identity() + skew(qe.vec());

  // Right perturbation of X_i: E(d) = Z^-1 * v2t(d)^-1 * B.
  j_i.setZero();
  j_i.topLeftCorner<3, 3>()  = -r_zinv;
  j_i.topRightCorner<3, 3>() = 2.0 * r_zinv * skew(b.translation());
  j_i.bottomRightCorner<3, 3>() =
      -(quatL(qzinv) * quatR(qb)).block<3, 3>(1, 1);
}

void PoseGraph::addNode(std::size_t id, const Isometry3& pose) {
  if (nodes_.count(id)) {
    throw std::invalid_argument("PoseGraph::addNode: duplicate id " + std::to_string(id));
  }
  if (nodes_.empty()) {
    gauge_ = id;
  }
  nodes_.emplace(id, pose);
}

void PoseGraph::addEdge(const GraphEdge& edge) {
  if (!nodes_.count(edge.from) || !nodes_.count(edge.to)) {
    throw std::invalid_argument("PoseGraph::addEdge: unknown endpoint");
  }
  edges_.push_back(edge);
}

void PoseGraph::setPose(std::size_t id, const Isometry3& pose) {
  nodes_.at(id) = pose;
}

void PoseGraph::setGauge(std::size_t id) {
  if (!nodes_.count(id)) {
    throw GaugeError("PoseGraph::setGauge: unknown node " + std::to_string(id));
  }
  gauge_ = id;
}

const Isometry3& PoseGraph::pose(std::size_t id) const { return nodes_.at(id); }

std::pair<double, std::vector<double>> PoseGraph::chi2() const {
  KahanAccumulator total;
  std::vector<double> per_edge;
  per_edge.reserve(edges_.size());
  for (const GraphEdge& edge : edges_) {
    const Vector6d e = edgeError(nodes_.at(edge.from), nodes_.at(edge.to), edge.z);
    const double c   = e.dot(edge.information * e);
    per_edge.push_back(c);
    total.add(c);
  }
  return {total.value(), per_edge};
}

GraphDelta PoseGraph::optimize(const SolverConfig& config, bool use_finite_differences) {
  if (nodes_.empty()) {
    throw GaugeError("PoseGraph::optimize: empty graph");
  }
  if (!nodes_.count(gauge_)) {
    throw GaugeError("PoseGraph::optimize: gauge node missing");
  }

  // Connectivity over all edges (union-find on the node index).
  std::map<std::size_t, std::size_t> index;
  for (const auto& [id, pose] : nodes_) {
    index.emplace(id, index.size());
  }
  std::vector<std::size_t> parent(index.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) {
      x = parent[x] = parent[parent[x]];
    }
    return x;
  };
  for (const GraphEdge& edge : edges_) {
    parent[find(index.at(edge.from))] = find(index.at(edge.to));
  }
  const std::size_t root = find(0);
  for (std::size_t i = 1; i < parent.size(); ++i) {
    if (find(i) != root) {
      throw ConnectivityError("PoseGraph::optimize: graph is disconnected");
    }
  }

  // State layout: 6 entries per node, gauge excluded.
  std::map<std::size_t, int> offset;
  int dim = 0;
  for (const auto& [id, pose] : nodes_) {
    if (id == gauge_) {
      continue;
    }
    offset.emplace(id, dim);
    dim += 6;
  }

  GraphDelta delta;
  delta.chi2_before = chi2().first;

  auto evaluate = [&](const std::map<std::size_t, Isometry3>& poses) {
    NormalEquations<Eigen::Dynamic> acc(dim);
    for (const GraphEdge& edge : edges_) {
      const Isometry3& xi = poses.at(edge.from);
      const Isometry3& xj = poses.at(edge.to);
      const Vector6d e    = edgeError(xi, xj, edge.z);
      Matrix6d j_i, j_j;
      if (use_finite_differences) {
        const double h = 1e-7;
        for (int k = 0; k < 6; ++k) {
          Vector6d d = Vector6d::Zero();
          d(k)       = h;
          const Vector6d ep_i = edgeError(boxplus(xi, d), xj, edge.z);
          const Vector6d ep_j = edgeError(xi, boxplus(xj, d), edge.z);
          d(k)                = -h;
          const Vector6d em_i = edgeError(boxplus(xi, d), xj, edge.z);
          const Vector6d em_j = edgeError(xi, boxplus(xj, d), edge.z);
          j_i.col(k)          = (ep_i - em_i) / (2 * h);
          j_j.col(k)          = (ep_j - em_j) / (2 * h);
        }
      } else {
        edgeJacobians(xi, xj, edge.z, j_i, j_j);
      }
      std::vector<std::pair<int, Eigen::MatrixXd>> blocks;
      if (edge.from != gauge_) {
        blocks.emplace_back(offset.at(edge.from), j_i);
      }
      if (edge.to != gauge_) {
        blocks.emplace_back(offset.at(edge.to), j_j);
      }
      acc.addBlocks(e, edge.information, blocks);
    }
    return acc.form();
  };

  std::map<std::size_t, Isometry3> current = nodes_;
  double current_chi2 = delta.chi2_before;
  QuadraticForm q     = evaluate(current);
  double damping      = config.damping;
  for (int iter = 0; iter < config.max_iterations; ++iter) {
    Eigen::VectorXd dx;
    try {
      dx = solveStep(q, damping);
    } catch (const RankDeficient& e) {
      throw GaugeError(std::string("PoseGraph::optimize: singular reduced system (") +
                       e.what() + ")");
    }
    if (dx.norm() < config.termination_dx) {
      break;
    }
    std::map<std::size_t, Isometry3> candidate = current;
    for (const auto& [id, off] : offset) {
      candidate[id] = orthonormalized(boxplus(current.at(id), dx.segment<6>(off)));
    }
    KahanAccumulator cand_chi2;
    for (const GraphEdge& edge : edges_) {
      const Vector6d e = edgeError(candidate.at(edge.from), candidate.at(edge.to), edge.z);
      cand_chi2.add(e.dot(edge.information * e));
    }
    if (cand_chi2.value() <= current_chi2 * (1.0 + 1e-12)) {
      current      = std::move(candidate);
      current_chi2 = cand_chi2.value();
      q            = evaluate(current);
      ++delta.iterations;
      if (damping > config.damping) {
        damping = std::max(config.damping, damping * 0.5);
      }
    } else {
      damping = damping > 0 ? damping * 10 : 1e-3;
      if (damping > config.max_damping) {
        break;
      }
      --iter;
    }
  }

  nodes_           = current;
  delta.chi2_after = current_chi2;
  delta.poses      = nodes_;
  return delta;
}

void writeGraph(std::ostream& out, const PoseGraph& graph) {
  out << std::setprecision(17);
  auto pose_fields = [&](const Isometry3& x) {
    const Eigen::Quaterniond q(x.linear());
    out << x.translation().x() << ' ' << x.translation().y() << ' '
        << x.translation().z() << ' ' << q.x() << ' ' << q.y() << ' ' << q.z()
        << ' ' << q.w();
  };
  for (const auto& [id, pose] : graph.nodes()) {
    out << "NODE " << id << ' ';
    pose_fields(pose);
    out << '\n';
  }
  for (const GraphEdge& edge : graph.edges()) {
    out << "EDGE " << edge.from << ' ' << edge.to << ' ';
    pose_fields(edge.z);
    for (int r = 0; r < 6; ++r) {
      for (int c = r; c < 6; ++c) {
        out << ' ' << edge.information(r, c);
      }
    }
    out << '\n';
  }
}

PoseGraph readGraph(std::istream& in) {
  PoseGraph graph;
  std::string line;
  auto read_pose = [](std::istringstream& ss) {
    double tx, ty, tz, qx, qy, qz, qw;
    if (!(ss >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) {
      throw std::runtime_error("readGraph: truncated pose");
    }
    Isometry3 x = Isometry3::Identity();
    x.linear()  = Eigen::Quaterniond(qw, qx, qy, qz).normalized().toRotationMatrix();
    x.translation() = Eigen::Vector3d(tx, ty, tz);
    return x;
  };
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') {
      continue;
    }
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "NODE") {
      std::size_t id;
      if (!(ss >> id)) {
        throw std::runtime_error("readGraph: bad NODE line: " + line);
      }
      graph.addNode(id, read_pose(ss));
    } else if (tag == "EDGE") {
      GraphEdge edge;
      if (!(ss >> edge.from >> edge.to)) {
        throw std::runtime_error("readGraph: bad EDGE line: " + line);
      }
      edge.z = read_pose(ss);
      for (int r = 0; r < 6; ++r) {
        for (int c = r; c < 6; ++c) {
          double v;
          if (!(ss >> v)) {
            throw std::runtime_error("readGraph: truncated information: " + line);
          }
          edge.information(r, c) = v;
          edge.information(c, r) = v;
        }
      }
      graph.addEdge(edge);
    } else {
      throw std::runtime_error("readGraph: unknown record: " + line);
    }
  }
  return graph;
}

}  // namespace md
