#include "md/synth.h"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace md {

namespace {

struct Hit {
  bool valid = false;
  double t   = std::numeric_limits<double>::infinity();
  const ScenePrimitive* primitive = nullptr;
};

bool intersectPlane(const ScenePrimitive& prim, const Eigen::Vector3d& o,
                    const Eigen::Vector3d& d, double& t) {
  const double denom = prim.normal.dot(d);
  if (std::abs(denom) < 1e-12) {
    return false;
  }
  t = (prim.offset - prim.normal.dot(o)) / denom;
  return t > 1e-6;
}

// Shell intersection: entry face from outside, exit face from inside.
bool intersectBox(const ScenePrimitive& prim, const Eigen::Vector3d& o,
                  const Eigen::Vector3d& d, double& t) {
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far  = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 3; ++axis) {
    if (std::abs(d(axis)) < 1e-12) {
      if (o(axis) < prim.lo(axis) || o(axis) > prim.hi(axis)) {
        return false;
      }
      continue;
    }
    double t0 = (prim.lo(axis) - o(axis)) / d(axis);
    double t1 = (prim.hi(axis) - o(axis)) / d(axis);
    if (t0 > t1) {
      std::swap(t0, t1);
    }
    t_near = std::max(t_near, t0);
    t_far  = std::min(t_far, t1);
    if (t_near > t_far) {
      return false;
    }
  }
  if (t_near > 1e-6) {
    t = t_near;
    return true;
  }
  if (t_far > 1e-6) {
    t = t_far;
    return true;
  }
  return false;
}

bool intersectSphere(const ScenePrimitive& prim, const Eigen::Vector3d& o,
                     const Eigen::Vector3d& d, double& t) {
  const Eigen::Vector3d oc = o - prim.center;
  const double a = d.squaredNorm();
  const double b = 2.0 * oc.dot(d);
  const double c = oc.squaredNorm() - prim.radius * prim.radius;
  const double disc = b * b - 4 * a * c;
  if (disc < 0) {
    return false;
  }
  const double sq = std::sqrt(disc);
  const double t0 = (-b - sq) / (2 * a);
  const double t1 = (-b + sq) / (2 * a);
  if (t0 > 1e-6) {
    t = t0;
    return true;
  }
  if (t1 > 1e-6) {
    t = t1;
    return true;
  }
  return false;
}

Eigen::Vector3d rayDirection(const ProjectionModel& model, double u, double v) {
  if (model.kind() == ProjectionKind::Pinhole) {
    return {(u - model.k().cx) / model.k().fx, (v - model.k().cy) / model.k().fy, 1.0};
  }
  const double azimuth   = (u - model.k().cx) / model.k().fx;
  const double elevation = (v - model.k().cy) / model.k().fy;
  const double ce        = std::cos(elevation);
  return {ce * std::cos(azimuth), ce * std::sin(azimuth), std::sin(elevation)};
}

}  // namespace

double patternIntensity(PatternId id, double scale, const Eigen::Vector3d& p) {
  const Eigen::Vector3d q = p / scale;
  switch (id) {
    case PatternId::Sines: {
      const double s = 0.5 + 0.18 * std::sin(2.1 * q.x() + 0.7) +
                       0.16 * std::sin(1.7 * q.y() + 2.3) +
                       0.16 * std::sin(2.9 * q.z() + 4.1) +
                       0.10 * std::sin(1.3 * (q.x() + q.y()) + 1.1) +
                       0.08 * std::sin(3.7 * (q.y() + q.z()));
      return std::clamp(s, 0.0, 1.0);
    }
    case PatternId::Checker: {
      const long parity = static_cast<long>(std::floor(q.x())) +
                          static_cast<long>(std::floor(q.y())) +
                          static_cast<long>(std::floor(q.z()));
      return (parity & 1) ? 0.8 : 0.2;
    }
    case PatternId::Mixed: {
      const double a = patternIntensity(PatternId::Sines, 1.0, q);
      const double b = patternIntensity(PatternId::Checker, 1.0, q);
      return std::clamp(0.6 * a + 0.4 * b, 0.0, 1.0);
    }
  }
  return 0.5;
}

Scene parseScene(std::istream& in) {
  Scene scene;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string kind;
    if (!(ss >> kind) || kind[0] == '#') {
      continue;
    }
    ScenePrimitive prim;
    int pattern = 0;
    if (kind == "plane") {
      prim.type = ScenePrimitive::Type::Plane;
      if (!(ss >> prim.normal.x() >> prim.normal.y() >> prim.normal.z() >>
            prim.offset >> pattern >> prim.pattern_scale)) {
        throw RenderError("scene line " + std::to_string(line_no) + ": bad plane");
      }
      prim.normal.normalize();
    } else if (kind == "box") {
      prim.type = ScenePrimitive::Type::Box;
      if (!(ss >> prim.lo.x() >> prim.lo.y() >> prim.lo.z() >> prim.hi.x() >>
            prim.hi.y() >> prim.hi.z() >> pattern >> prim.pattern_scale)) {
        throw RenderError("scene line " + std::to_string(line_no) + ": bad box");
      }
    } else if (kind == "sphere") {
      prim.type = ScenePrimitive::Type::Sphere;
      if (!(ss >> prim.center.x() >> prim.center.y() >> prim.center.z() >>
            prim.radius >> pattern >> prim.pattern_scale)) {
        throw RenderError("scene line " + std::to_string(line_no) + ": bad sphere");
      }
    } else {
      throw RenderError("scene line " + std::to_string(line_no) +
                        ": unknown primitive '" + kind + "'");
    }
    ss >> prim.pattern_shift.x() >> prim.pattern_shift.y() >> prim.pattern_shift.z();
    prim.pattern = static_cast<PatternId>(pattern);
    scene.primitives.push_back(prim);
  }
  if (scene.primitives.empty()) {
    throw RenderError("scene: no primitives");
  }
  return scene;
}

Scene loadScene(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw RenderError("scene: cannot open " + path);
  }
  return parseScene(in);
}

RenderedFrame renderScene(const Scene& scene, const Isometry3& pose,
                          const ProjectionModel& model, const RenderOptions& options) {
  const Eigen::Vector3d origin = pose.translation();
  for (const auto& prim : scene.primitives) {
    if (prim.type == ScenePrimitive::Type::Sphere &&
        (origin - prim.center).norm() < prim.radius) {
      throw RenderError("renderScene: sensor inside sphere");
    }
  }
  RenderedFrame frame;
  frame.intensity = ScalarImage(model.rows(), model.cols());
  frame.range     = ScalarImage(model.rows(), model.cols());
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int r = 0; r < model.rows(); ++r) {
    for (int c = 0; c < model.cols(); ++c) {
      const Eigen::Vector3d dir_sensor = rayDirection(model, c, r);
      const Eigen::Vector3d dir        = pose.linear() * dir_sensor;
      Hit best;
      for (const auto& prim : scene.primitives) {
        double t = 0;
        bool hit = false;
        switch (prim.type) {
          case ScenePrimitive::Type::Plane: hit = intersectPlane(prim, origin, dir, t); break;
          case ScenePrimitive::Type::Box: hit = intersectBox(prim, origin, dir, t); break;
          case ScenePrimitive::Type::Sphere: hit = intersectSphere(prim, origin, dir, t); break;
        }
        if (hit && t < best.t) {
          best.valid     = true;
          best.t         = t;
          best.primitive = &prim;
        }
      }
      if (!best.valid) {
        continue;
      }
      const Eigen::Vector3d hit_world  = origin + best.t * dir;
      const Eigen::Vector3d hit_sensor = pose.inverse() * hit_world;
      const double range = model.rangeOf(hit_sensor);
      if (range < model.minRange() || range > model.maxRange()) {
        continue;
      }
      double value = patternIntensity(best.primitive->pattern,
                                      best.primitive->pattern_scale,
                                      hit_world + best.primitive->pattern_shift);
      if (options.noise_sigma > 0) {
        value = std::clamp(value + options.noise_sigma * noise(rng), 0.0, 1.0);
      }
      frame.range.set(r, c, range);
      frame.intensity.set(r, c, value);
    }
  }
  return frame;
}

}  // namespace md
