#include "md/config.h"

#include <fstream>
#include <json.hpp>
#include <set>

namespace md {

namespace {

using nlohmann::json;

void expectKeys(const json& j, const std::string& section,
                const std::set<std::string>& known) {
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) {
      throw ConfigError("unknown key '" + key + "' in " + section);
    }
  }
}

template <typename T>
void get(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    j.at(key).get_to(out);
  }
}

json modelToJson(const ProjectionModel& m) {
  return {{"kind", m.kind() == ProjectionKind::Pinhole ? "pinhole" : "spherical"},
          {"fx", m.k().fx},
          {"fy", m.k().fy},
          {"cx", m.k().cx},
          {"cy", m.k().cy},
          {"rows", m.rows()},
          {"cols", m.cols()},
          {"min_range", m.minRange()},
          {"max_range", m.maxRange()}};
}

ProjectionModel modelFromJson(const json& j, const ProjectionModel& base) {
  expectKeys(j, "camera", {"kind", "fx", "fy", "cx", "cy", "rows", "cols",
                           "min_range", "max_range"});
  std::string kind = base.kind() == ProjectionKind::Pinhole ? "pinhole" : "spherical";
  CameraMatrix k   = base.k();
  int rows = base.rows(), cols = base.cols();
  double min_range = base.minRange(), max_range = base.maxRange();
  get(j, "kind", kind);
  get(j, "fx", k.fx);
  get(j, "fy", k.fy);
  get(j, "cx", k.cx);
  get(j, "cy", k.cy);
  get(j, "rows", rows);
  get(j, "cols", cols);
  get(j, "min_range", min_range);
  get(j, "max_range", max_range);
  if (kind != "pinhole" && kind != "spherical") {
    throw ConfigError("camera.kind must be pinhole or spherical");
  }
  return {kind == "pinhole" ? ProjectionKind::Pinhole : ProjectionKind::Spherical,
          k, rows, cols, min_range, max_range};
}

json registrationToJson(const RegistrationConfig& r) {
  return {{"max_iterations", r.solver.max_iterations},
          {"termination_dx", r.solver.termination_dx},
          {"termination_dchi2", r.solver.termination_dchi2},
          {"damping", r.solver.damping},
          {"max_damping", r.solver.max_damping},
          {"chi2_growth_cap", r.chi2_growth_cap},
          {"min_valid_pixels", r.min_valid_pixels_finest},
          {"overlap_range_gate", r.overlap_range_gate},
          {"weights",
           {{"intensity", r.weights.intensity},
            {"range", r.weights.range},
            {"normal", r.weights.normal(0, 0)}}},
          {"gates",
           {{"intensity", r.gates.intensity},
            {"range", r.gates.range},
            {"normal_angle_deg", r.gates.normal_angle_deg}}},
          {"huber",
           {{"intensity", r.huber.intensity},
            {"range", r.huber.range},
            {"normal", r.huber.normal}}}};
}

void registrationFromJson(const json& j, RegistrationConfig& r) {
  expectKeys(j, "registration",
             {"max_iterations", "termination_dx", "termination_dchi2", "damping",
              "max_damping", "chi2_growth_cap", "min_valid_pixels",
              "overlap_range_gate", "weights", "gates", "huber"});
  get(j, "max_iterations", r.solver.max_iterations);
  get(j, "termination_dx", r.solver.termination_dx);
  get(j, "termination_dchi2", r.solver.termination_dchi2);
  get(j, "damping", r.solver.damping);
  get(j, "max_damping", r.solver.max_damping);
  get(j, "chi2_growth_cap", r.chi2_growth_cap);
  get(j, "min_valid_pixels", r.min_valid_pixels_finest);
  get(j, "overlap_range_gate", r.overlap_range_gate);
  if (j.contains("weights")) {
    const json& w = j.at("weights");
    expectKeys(w, "registration.weights", {"intensity", "range", "normal"});
    get(w, "intensity", r.weights.intensity);
    get(w, "range", r.weights.range);
    if (w.contains("normal")) {
      r.weights.normal = w.at("normal").get<double>() * Eigen::Matrix3d::Identity();
    }
  }
  if (j.contains("gates")) {
    const json& g = j.at("gates");
    expectKeys(g, "registration.gates", {"intensity", "range", "normal_angle_deg"});
    get(g, "intensity", r.gates.intensity);
    get(g, "range", r.gates.range);
    get(g, "normal_angle_deg", r.gates.normal_angle_deg);
  }
  if (j.contains("huber")) {
    const json& h = j.at("huber");
    expectKeys(h, "registration.huber", {"intensity", "range", "normal"});
    get(h, "intensity", r.huber.intensity);
    get(h, "range", r.huber.range);
    get(h, "normal", r.huber.normal);
  }
}

}  // namespace

void RunConfig::validate() const {
  if (sensor != "rgbd" && sensor != "lidar") {
    throw ConfigError("sensor must be rgbd or lidar");
  }
  if (pyramid.scales.empty()) {
    throw ConfigError("pyramid.scales must not be empty");
  }
  int previous = 0;
  for (int s : pyramid.scales) {
    if (s < 1 || (previous > 0 && (s <= previous || s % previous != 0))) {
      throw ConfigError("pyramid.scales must be strictly increasing integer "
                        "multiples (finest first)");
    }
    previous = s;
  }
  if (model.rows() <= 0 || model.cols() <= 0) {
    throw ConfigError("camera dimensions must be positive");
  }
  if (model.minRange() <= 0 || model.maxRange() <= model.minRange()) {
    throw ConfigError("camera range bounds must satisfy 0 < min < max");
  }
  if (tracker.min_overlap < 0 || tracker.min_overlap > 1) {
    throw ConfigError("tracker.min_overlap must be in [0, 1]");
  }
}

RunConfig defaultConfig(const std::string& sensor) {
  RunConfig config;
  config.sensor = sensor;
  config.graph_solver.max_iterations = 50;
  config.graph_solver.termination_dx = 1e-8;
  if (sensor == "rgbd") {
    config.model = {ProjectionKind::Pinhole, {525, 525, 319.5, 239.5},
                    480, 640, 0.3, 10.0};
    config.pyramid.scales = {2, 4, 8};
  } else if (sensor == "lidar") {
    config.model = {ProjectionKind::Spherical,
                    {512.0 / (2 * M_PI), -64.0 / (M_PI / 2), 256, 32},
                    64, 512, 0.3, 60.0};
    config.pyramid.scales = {1, 2, 4};
    config.tracker.translation_threshold = 1.0;
    config.tracker.registration.gates.range = 2.0;
    config.tracker.registration.weights.range = 1.0;
    config.loop_closer.ransac.inlier_gate = 0.5;
  } else {
    throw ConfigError("sensor must be rgbd or lidar");
  }
  config.loop_closer.registration = config.tracker.registration;
  return config;
}

std::string configToJson(const RunConfig& config) {
  json j;
  j["sensor"]  = config.sensor;
  j["camera"]  = modelToJson(config.model);
  j["rgbd"]    = {{"depth_scale", config.rgbd.depth_scale},
                  {"association_dt", config.rgbd.association_dt}};
  j["pyramid"] = {{"pre_downscale_rows", config.pyramid.pre_downscale_rows},
                  {"pre_downscale_cols", config.pyramid.pre_downscale_cols},
                  {"scales", config.pyramid.scales}};
  j["registration"] = registrationToJson(config.tracker.registration);
  j["tracker"]      = {
      {"translation_threshold", config.tracker.translation_threshold},
      {"rotation_threshold_deg", config.tracker.rotation_threshold * 180.0 / M_PI},
      {"min_overlap", config.tracker.min_overlap}};
  j["loop_closure"] = {
      {"enabled", config.loop_closure_enabled},
      {"temporal_exclusion", config.loop_closer.temporal_exclusion},
      {"min_votes", config.loop_closer.min_votes},
      {"match_threshold", config.loop_closer.match_threshold},
      {"max_features", config.loop_closer.features.max_features},
      {"ransac_inlier_gate", config.loop_closer.ransac.inlier_gate},
      {"ransac_min_inliers", config.loop_closer.ransac.min_inliers},
      {"topo_translation_gate", config.loop_closer.topo_translation_gate},
      {"topo_rotation_gate_deg",
       config.loop_closer.topo_rotation_gate * 180.0 / M_PI},
      {"topo_mean_chi2_gate", config.loop_closer.topo_mean_chi2_gate}};
  j["graph"] = {{"max_iterations", config.graph_solver.max_iterations},
                {"termination_dx", config.graph_solver.termination_dx},
                {"damping", config.graph_solver.damping}};
  j["output"]        = {{"ply_voxel", config.ply_voxel}};
  j["synth"]         = {{"noise_sigma", config.synth_noise_sigma}};
  j["seed"]          = config.seed;
  j["single_thread"] = config.single_thread;
  return j.dump(2) + "\n";
}

RunConfig configFromJson(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  expectKeys(j, "config", {"sensor", "camera", "rgbd", "pyramid", "registration",
                           "tracker", "loop_closure", "graph", "output", "synth",
                           "seed", "single_thread"});
  std::string sensor = "rgbd";
  get(j, "sensor", sensor);
  RunConfig config = defaultConfig(sensor);
  if (j.contains("camera")) {
    config.model = modelFromJson(j.at("camera"), config.model);
  }
  if (j.contains("rgbd")) {
    const json& r = j.at("rgbd");
    expectKeys(r, "rgbd", {"depth_scale", "association_dt"});
    get(r, "depth_scale", config.rgbd.depth_scale);
    get(r, "association_dt", config.rgbd.association_dt);
  }
  if (j.contains("pyramid")) {
    const json& p = j.at("pyramid");
    expectKeys(p, "pyramid", {"pre_downscale_rows", "pre_downscale_cols", "scales"});
    get(p, "pre_downscale_rows", config.pyramid.pre_downscale_rows);
    get(p, "pre_downscale_cols", config.pyramid.pre_downscale_cols);
    get(p, "scales", config.pyramid.scales);
  }
  if (j.contains("registration")) {
    registrationFromJson(j.at("registration"), config.tracker.registration);
    config.loop_closer.registration = config.tracker.registration;
  }
  if (j.contains("tracker")) {
    const json& t = j.at("tracker");
    expectKeys(t, "tracker",
               {"translation_threshold", "rotation_threshold_deg", "min_overlap"});
    get(t, "translation_threshold", config.tracker.translation_threshold);
    if (t.contains("rotation_threshold_deg")) {
      config.tracker.rotation_threshold =
          t.at("rotation_threshold_deg").get<double>() * M_PI / 180.0;
    }
    get(t, "min_overlap", config.tracker.min_overlap);
  }
  if (j.contains("loop_closure")) {
    const json& l = j.at("loop_closure");
    expectKeys(l, "loop_closure",
               {"enabled", "temporal_exclusion", "min_votes", "match_threshold",
                "max_features", "ransac_inlier_gate", "ransac_min_inliers",
                "topo_translation_gate", "topo_rotation_gate_deg",
                "topo_mean_chi2_gate"});
    get(l, "enabled", config.loop_closure_enabled);
    get(l, "temporal_exclusion", config.loop_closer.temporal_exclusion);
    get(l, "min_votes", config.loop_closer.min_votes);
    get(l, "match_threshold", config.loop_closer.match_threshold);
    get(l, "max_features", config.loop_closer.features.max_features);
    get(l, "ransac_inlier_gate", config.loop_closer.ransac.inlier_gate);
    get(l, "ransac_min_inliers", config.loop_closer.ransac.min_inliers);
    get(l, "topo_translation_gate", config.loop_closer.topo_translation_gate);
    if (l.contains("topo_rotation_gate_deg")) {
      config.loop_closer.topo_rotation_gate =
          l.at("topo_rotation_gate_deg").get<double>() * M_PI / 180.0;
    }
    get(l, "topo_mean_chi2_gate", config.loop_closer.topo_mean_chi2_gate);
  }
  if (j.contains("graph")) {
    const json& g = j.at("graph");
    expectKeys(g, "graph", {"max_iterations", "termination_dx", "damping"});
    get(g, "max_iterations", config.graph_solver.max_iterations);
    get(g, "termination_dx", config.graph_solver.termination_dx);
    get(g, "damping", config.graph_solver.damping);
  }
  if (j.contains("output")) {
    const json& o = j.at("output");
    expectKeys(o, "output", {"ply_voxel"});
    get(o, "ply_voxel", config.ply_voxel);
  }
  if (j.contains("synth")) {
    const json& s = j.at("synth");
    expectKeys(s, "synth", {"noise_sigma"});
    get(s, "noise_sigma", config.synth_noise_sigma);
  }
  get(j, "seed", config.seed);
  get(j, "single_thread", config.single_thread);
  config.validate();
  return config;
}

RunConfig loadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file: " + path);
  }
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return configFromJson(text);
}

}  // namespace md
