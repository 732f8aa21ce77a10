// Python surface: SE(3) chart helpers, projection models, pyramid
// registration, pose-graph optimization and trajectory evaluation.
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "md/config.h"
#include "md/registration.h"
#include "md/trajectory.h"

namespace py = pybind11;
using namespace md;

namespace {

Eigen::Matrix4d toMatrix(const Isometry3& x) { return x.matrix(); }

Isometry3 fromMatrix(const Eigen::Matrix4d& m) {
  Isometry3 x = Isometry3::Identity();
  x.matrix()  = m;
  return orthonormalized(x);
}

ScalarImage toImage(const py::array_t<double, py::array::c_style>& array) {
  if (array.ndim() != 2) {
    throw py::value_error("expected a 2-d array");
  }
  ScalarImage image(static_cast<int>(array.shape(0)),
                    static_cast<int>(array.shape(1)));
  auto view = array.unchecked<2>();
  for (int r = 0; r < image.rows(); ++r) {
    for (int c = 0; c < image.cols(); ++c) {
      const double value = view(r, c);
      if (value > 0) {
        image.set(r, c, value);
      }
    }
  }
  return image;
}

Trajectory toTrajectory(const py::array_t<double, py::array::c_style>& rows) {
  if (rows.ndim() != 2 || rows.shape(1) != 8) {
    throw py::value_error("expected an Nx8 array of "
                          "(timestamp, tx, ty, tz, qx, qy, qz, qw) rows");
  }
  Trajectory trajectory;
  auto view = rows.unchecked<2>();
  for (py::ssize_t i = 0; i < rows.shape(0); ++i) {
    Isometry3 pose = Isometry3::Identity();
    pose.linear()  = Eigen::Quaterniond(view(i, 7), view(i, 4), view(i, 5),
                                        view(i, 6))
                        .normalized()
                        .toRotationMatrix();
    pose.translation() = Eigen::Vector3d(view(i, 1), view(i, 2), view(i, 3));
    trajectory.push(view(i, 0), pose);
  }
  return trajectory;
}

}  // namespace

PYBIND11_MODULE(mdslam, m) {
  m.doc() = "Direct multi-cue SLAM for RGB-D and 3D LiDAR";

  m.def("v2t", [](const Vector6d& v) { return toMatrix(v2t(v)); },
        "6-vector (t, quaternion imaginary part) to a 4x4 transform");
  m.def("t2v", [](const Eigen::Matrix4d& m) { return t2v(fromMatrix(m)); });
  m.def("boxplus", [](const Eigen::Matrix4d& x, const Vector6d& d) {
    return toMatrix(boxplus(fromMatrix(x), d));
  });
  m.def("boxminus", [](const Eigen::Matrix4d& x, const Eigen::Matrix4d& y) {
    return boxminus(fromMatrix(x), fromMatrix(y));
  });

  py::class_<ProjectionModel>(m, "ProjectionModel")
      .def(py::init([](const std::string& kind, const Eigen::Vector4d& params,
                       int rows, int cols, double min_range, double max_range) {
             if (kind != "pinhole" && kind != "spherical") {
               throw py::value_error("kind must be 'pinhole' or 'spherical'");
             }
             return ProjectionModel(kind == "pinhole" ? ProjectionKind::Pinhole
                                                      : ProjectionKind::Spherical,
                                    {params(0), params(1), params(2), params(3)},
                                    rows, cols, min_range, max_range);
           }),
           py::arg("kind"), py::arg("params"), py::arg("rows"), py::arg("cols"),
           py::arg("min_range"), py::arg("max_range"))
      .def_property_readonly("rows", &ProjectionModel::rows)
      .def_property_readonly("cols", &ProjectionModel::cols)
      .def("project",
           [](const ProjectionModel& model, const Eigen::Vector3d& p) {
             const ProjectionResult r = model.project(p);
             return py::make_tuple(r.valid, r.uv.u, r.uv.v, r.range);
           },
           "returns (valid, u, v, range)")
      .def("unproject",
           [](const ProjectionModel& model, double u, double v, double range) {
             return model.unproject({u, v}, range);
           });

  py::class_<CuePyramid>(m, "CuePyramid")
      .def_property_readonly("levels", &CuePyramid::levelCount);

  m.def("build_pyramid",
        [](const py::array_t<double, py::array::c_style>& intensity,
           const py::array_t<double, py::array::c_style>& range,
           const ProjectionModel& model, const std::vector<int>& scales) {
          PyramidConfig config;
          if (!scales.empty()) {
            config.scales = scales;
          }
          return buildPyramid(toImage(intensity), toImage(range), model, config);
        },
        py::arg("intensity"), py::arg("range"), py::arg("model"),
        py::arg("scales") = std::vector<int>{},
        "intensity in [0, 1], range in meters; non-positive pixels are invalid");

  m.def("register_pyramids",
        [](const CuePyramid& fixed, const CuePyramid& moving,
           const Eigen::Matrix4d& guess) {
          const RegistrationResult r =
              registerPyramids(fixed, moving, fromMatrix(guess));
          py::dict out;
          out["transform"]    = toMatrix(r.transform);
          out["information"]  = r.information;
          out["converged"]    = r.converged;
          out["mean_chi2"]    = r.mean_chi2;
          out["valid_pixels"] = r.valid_pixels;
          return out;
        },
        py::arg("fixed"), py::arg("moving"),
        py::arg("guess") = Eigen::Matrix4d::Identity().eval());

  py::class_<PoseGraph>(m, "PoseGraph")
      .def(py::init<>())
      .def("add_node",
           [](PoseGraph& graph, std::size_t id, const Eigen::Matrix4d& pose) {
             graph.addNode(id, fromMatrix(pose));
           })
      .def("add_edge",
           [](PoseGraph& graph, std::size_t from, std::size_t to,
              const Eigen::Matrix4d& z, const Matrix6d& information) {
             graph.addEdge({from, to, fromMatrix(z), information,
                            EdgeKind::Odometry});
           },
           py::arg("from_id"), py::arg("to_id"), py::arg("z"),
           py::arg("information") = Matrix6d::Identity().eval())
      .def("set_gauge", &PoseGraph::setGauge)
      .def("pose",
           [](const PoseGraph& graph, std::size_t id) {
             return toMatrix(graph.pose(id));
           })
      .def("optimize",
           [](PoseGraph& graph, int max_iterations) {
             SolverConfig config;
             config.max_iterations  = max_iterations;
             const GraphDelta delta = graph.optimize(config);
             return py::make_tuple(delta.chi2_before, delta.chi2_after);
           },
           py::arg("max_iterations") = 50, "returns (chi2_before, chi2_after)");

  m.def("ate_rmse",
        [](const py::array_t<double, py::array::c_style>& estimate,
           const py::array_t<double, py::array::c_style>& ground_truth,
           double association_dt) {
          return ateRmse(toTrajectory(estimate), toTrajectory(ground_truth),
                         association_dt)
              .rmse;
        },
        py::arg("estimate"), py::arg("ground_truth"),
        py::arg("association_dt") = 0.02,
        "absolute trajectory error after umeyama alignment, Nx8 TUM rows");

  m.def("default_config_json",
        [](const std::string& sensor) { return configToJson(defaultConfig(sensor)); },
        py::arg("sensor") = "rgbd");
}
