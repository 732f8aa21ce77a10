#include "md/registration.h"

#include <cmath>

namespace md {

double remapRange(const ProjectionModel& moving_model, const Isometry3& x,
                  const Eigen::Vector3d& p_fixed) {
  return moving_model.rangeOf(x * p_fixed);
}

Eigen::Vector3d remapNormal(const Isometry3& x, const Eigen::Vector3d& n_fixed) {
  return x.linear() * n_fixed;
}

PixelResidual residualAt(const PyramidLevel& fixed, const PyramidLevel& moving,
                         const Isometry3& moving_from_fixed, int row, int col,
                         const RegistrationConfig& config) {
  PixelResidual res;
  if (!fixed.range.isValid(row, col)) {
    return res;
  }
  const double rho        = fixed.range.data(row, col);
  const Eigen::Vector3d p = fixed.model.unproject({double(col), double(row)}, rho);
  const Eigen::Vector3d pm = moving_from_fixed * p;
  const ProjectionResult prj = moving.model.project(pm);
  if (!prj.valid) {
    return res;
  }

  // Reject samples straddling a depth discontinuity in the moving image:
  // bilinear blending across an occlusion boundary fabricates ranges that
  // exist on no surface and bias the optimum.
  {
    const int c0 = static_cast<int>(std::floor(prj.uv.u));
    const int r0 = static_cast<int>(std::floor(prj.uv.v));
    if (c0 < 0 || r0 < 0 || c0 + 1 >= moving.cols() || r0 + 1 >= moving.rows()) {
      return res;
    }
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int dr = 0; dr < 2; ++dr) {
      for (int dc = 0; dc < 2; ++dc) {
        if (!moving.range.isValid(r0 + dr, c0 + dc)) {
          return res;
        }
        const double v = moving.range.data(r0 + dr, c0 + dc);
        lo             = std::min(lo, v);
        hi             = std::max(hi, v);
      }
    }
    if (hi - lo > config.gates.range) {
      return res;
    }
  }

  const Eigen::Matrix3d& rot = moving_from_fixed.linear();
  Eigen::Matrix<double, 3, 6> j_point;
  j_point.leftCols<3>()  = rot;
  j_point.rightCols<3>() = -2.0 * rot * skew(p);
  Eigen::Matrix<double, 2, 6> j_pixel;
  try {
    j_pixel = moving.model.projectionJacobian(pm) * j_point;
  } catch (const ProjectionSingularity&) {
    return res;
  }

  // Intensity cue.
  if (fixed.intensity.isValid(row, col)) {
    const ScalarSample s = sampleBilinear(moving.intensity, prj.uv.u, prj.uv.v);
    if (s.valid) {
      const double e = fixed.intensity.data(row, col) - s.value;
      if (std::abs(e) > config.gates.intensity) {
        return res;
      }
      res.has_intensity = true;
      res.e_intensity   = e;
      res.j_intensity   = -s.deriv * j_pixel;
    }
  }

  // Range cue.
  {
    const ScalarSample s = sampleBilinear(moving.range, prj.uv.u, prj.uv.v);
    if (s.valid) {
      const double zeta = moving.model.rangeOf(pm);
      const double e    = zeta - s.value;
      if (std::abs(e) > config.gates.range) {
        return res;
      }
      Eigen::Matrix<double, 1, 3> d_zeta;
      if (moving.model.kind() == ProjectionKind::Pinhole) {
        d_zeta << 0, 0, 1;
      } else {
        d_zeta = pm.transpose() / pm.norm();
      }
      res.has_range = true;
      res.e_range   = e;
      res.j_range   = d_zeta * j_point - s.deriv * j_pixel;
    }
  }

  // Normal cue.
  if (fixed.normals.isValid(row, col)) {
    const VectorSample s = sampleBilinear(moving.normals, prj.uv.u, prj.uv.v);
    if (s.valid) {
      const Eigen::Vector3d n  = fixed.normals.data(row, col);
      const Eigen::Vector3d zn = rot * n;
      const double target_norm = s.value.norm();
      if (target_norm > 1e-9) {
        const double cos_angle =
            std::clamp(zn.dot(s.value) / target_norm, -1.0, 1.0);
        if (std::acos(cos_angle) > config.gates.normal_angle_deg * M_PI / 180.0) {
          return res;
        }
      }
      res.has_normal = true;
      res.e_normal   = zn - s.value;
      res.j_normal.leftCols<3>().setZero();
      res.j_normal.rightCols<3>() = -2.0 * rot * skew(n);
      res.j_normal -= s.deriv * j_pixel;
    }
  }

  res.valid = res.has_intensity || res.has_range || res.has_normal;
  return res;
}

double overlap(const PyramidLevel& fixed, const PyramidLevel& moving,
               const Isometry3& fixed_from_moving, double range_gate) {
  const Isometry3 warp = fixed_from_moving.inverse();
  std::size_t total = 0, compatible = 0;
  for (int r = 0; r < fixed.rows(); ++r) {
    for (int c = 0; c < fixed.cols(); ++c) {
      if (!fixed.range.isValid(r, c)) {
        continue;
      }
      ++total;
      const Eigen::Vector3d p =
          fixed.model.unproject({double(c), double(r)}, fixed.range.data(r, c));
      const Eigen::Vector3d pm   = warp * p;
      const ProjectionResult prj = moving.model.project(pm);
      if (!prj.valid) {
        continue;
      }
      const ScalarSample s = sampleBilinear(moving.range, prj.uv.u, prj.uv.v);
      if (s.valid && std::abs(moving.model.rangeOf(pm) - s.value) < range_gate) {
        ++compatible;
      }
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(compatible) / total;
}

namespace {

struct LevelEvaluation {
  QuadraticForm q;
  double chi2_intensity = 0, chi2_range = 0, chi2_normal = 0;
  double mean_chi2         = std::numeric_limits<double>::infinity();
  std::size_t valid_pixels = 0;
  std::size_t residuals    = 0;
};

LevelEvaluation evaluateLevel(const PyramidLevel& fixed, const PyramidLevel& moving,
                              const Isometry3& warp, const RegistrationConfig& cfg) {
  NormalEquations<6> acc(6);
  KahanAccumulator chi_i, chi_r, chi_n;
  LevelEvaluation out;
  const Eigen::Matrix<double, 1, 1> w_i{cfg.weights.intensity};
  const Eigen::Matrix<double, 1, 1> w_r{cfg.weights.range};
  for (int r = 0; r < fixed.rows(); ++r) {
    for (int c = 0; c < fixed.cols(); ++c) {
      const PixelResidual res = residualAt(fixed, moving, warp, r, c, cfg);
      if (!res.valid) {
        continue;
      }
      ++out.valid_pixels;
      if (res.has_intensity && cfg.weights.intensity > 0) {
        const Eigen::Matrix<double, 1, 1> e{res.e_intensity};
        const double chi = std::sqrt(cfg.weights.intensity) * std::abs(res.e_intensity);
        const auto w     = w_i * huberScale(chi, cfg.huber.intensity);
        acc.add(e, w, res.j_intensity);
        chi_i.add(e.dot(w * e));
        ++out.residuals;
      }
      if (res.has_range && cfg.weights.range > 0) {
        const Eigen::Matrix<double, 1, 1> e{res.e_range};
        const double chi = std::sqrt(cfg.weights.range) * std::abs(res.e_range);
        const auto w     = w_r * huberScale(chi, cfg.huber.range);
        acc.add(e, w, res.j_range);
        chi_r.add(e.dot(w * e));
        ++out.residuals;
      }
      if (res.has_normal && cfg.weights.normal.norm() > 0) {
        const double chi = std::sqrt(res.e_normal.dot(cfg.weights.normal * res.e_normal));
        const Eigen::Matrix3d w = cfg.weights.normal * huberScale(chi, cfg.huber.normal);
        acc.add(res.e_normal, w, res.j_normal);
        chi_n.add(res.e_normal.dot(w * res.e_normal));
        ++out.residuals;
      }
    }
  }
  out.q              = acc.form();
  out.chi2_intensity = chi_i.value();
  out.chi2_range     = chi_r.value();
  out.chi2_normal    = chi_n.value();
  if (out.residuals > 0) {
    out.mean_chi2 = out.q.chi2 / static_cast<double>(out.residuals);
  }
  return out;
}

}  // namespace

RegistrationResult registerPyramids(const CuePyramid& fixed, const CuePyramid& moving,
                                    const Isometry3& guess,
                                    const RegistrationConfig& config) {
  if (fixed.levelCount() != moving.levelCount()) {
    throw DimensionError("registerPyramids: level counts differ");
  }
  if (fixed.levelCount() == 0) {
    throw DimensionError("registerPyramids: empty pyramids");
  }
  const double finest_area = static_cast<double>(fixed.finest().rows()) *
                             static_cast<double>(fixed.finest().cols());

  Isometry3 warp = guess.inverse();  // moving <- fixed
  RegistrationResult result;
  for (std::size_t li = 0; li < fixed.levelCount(); ++li) {
    const PyramidLevel& f = fixed.levels[li];
    const PyramidLevel& m = moving.levels[li];
    const double area     = static_cast<double>(f.rows()) * f.cols();
    const std::size_t min_pixels = static_cast<std::size_t>(
        std::max(8.0, config.min_valid_pixels_finest * area / finest_area));

    LevelEvaluation current = evaluateLevel(f, m, warp, config);
    if (current.valid_pixels < min_pixels) {
      throw InsufficientOverlap("registerPyramids: level " + std::to_string(li) + " has " +
                                std::to_string(current.valid_pixels) +
                                " valid pixels, need " + std::to_string(min_pixels));
    }

    // Steps are accepted unless the mean chi2 grows beyond the cap (the
    // valid-pixel set changes between iterates, so small increases are
    // legitimate); the best iterate seen is what the level ships.
    Isometry3 current_warp  = warp;
    LevelEvaluation best    = current;
    Isometry3 best_warp     = warp;
    double damping          = config.solver.damping;
    bool level_converged    = false;
    for (int iter = 0; iter < config.solver.max_iterations; ++iter) {
      Eigen::VectorXd dx;
      try {
        dx = solveStep(current.q, damping);
      } catch (const RankDeficient&) {
        damping = damping > 0 ? damping * 10 : 1e-3;
        if (damping > config.solver.max_damping) {
          throw Divergence("registerPyramids: rank-deficient system at level " +
                           std::to_string(li));
        }
        --iter;
        continue;
      }
      if (dx.norm() < config.solver.termination_dx) {
        level_converged = true;
        break;
      }
      Vector6d d = dx;
      if (d.tail<3>().norm() >= 1.0) {  // clamp absurd rotation steps
        d *= 0.99 / d.tail<3>().norm();
      }
      const Isometry3 candidate_warp = orthonormalized(boxplus(current_warp, d));
      LevelEvaluation candidate = evaluateLevel(f, m, candidate_warp, config);
      const bool acceptable =
          candidate.valid_pixels >= min_pixels &&
          candidate.mean_chi2 <= current.mean_chi2 * config.chi2_growth_cap;
      if (acceptable) {
        // Resampling keeps |dx| oscillating near the optimum, so a chi2
        // plateau over an accepted step also counts as convergence.
        const double rel_dchi2 = std::abs(current.mean_chi2 - candidate.mean_chi2) /
                                 std::max(current.mean_chi2, 1e-30);
        current_warp = candidate_warp;
        current      = candidate;
        if (candidate.mean_chi2 <= best.mean_chi2) {
          best      = candidate;
          best_warp = candidate_warp;
        }
        if (rel_dchi2 < config.solver.termination_dchi2) {
          level_converged = true;
          break;
        }
        if (damping > config.solver.damping) {
          damping = std::max(config.solver.damping, damping * 0.5);
        }
      } else {
        damping = damping > 0 ? damping * 10 : 1e-3;
        if (damping > config.solver.max_damping) {
          throw Divergence("registerPyramids: chi2 growth beyond cap with damping "
                           "exhausted at level " +
                           std::to_string(li));
        }
        --iter;  // retry the same linearization with more damping
      }
    }
    warp = best_warp;

    if (li + 1 == fixed.levelCount()) {
      result.transform      = warp.inverse();
      result.information    = best.q.H;
      result.chi2_intensity = best.chi2_intensity;
      result.chi2_range     = best.chi2_range;
      result.chi2_normal    = best.chi2_normal;
      result.mean_chi2      = best.mean_chi2;
      result.valid_pixels   = best.valid_pixels;
      result.converged      = level_converged;
    }
  }
  return result;
}

}  // namespace md
