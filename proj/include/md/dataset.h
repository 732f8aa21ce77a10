// Sequence loaders: TUM-layout RGB-D directories and per-scan LiDAR cloud
// files. Nothing is skipped silently; every dropped frame is counted.
#pragma once

#include "md/cues.h"

#include <memory>
#include <string>

namespace md {

struct LoadError : std::runtime_error {
  explicit LoadError(const std::string& what) : std::runtime_error(what) {}
};

struct FrameRecord {
  double timestamp = 0;
  // RGB-D payload; empty for cloud records.
  ScalarImage intensity;
  ScalarImage depth;  // meters, invalid where the sensor reported zero
  // LiDAR payload, sensor frame.
  std::vector<LidarPoint> cloud;
  bool isCloud() const { return intensity.rows() == 0; }
};

class FrameStream {
 public:
  virtual ~FrameStream() = default;
  // Loads the next record; false at end of sequence. Throws LoadError on
  // unreadable or malformed files.
  virtual bool next(FrameRecord& out) = 0;
  virtual std::size_t size() const = 0;
  // Frames dropped during association (rgb entries without a depth partner).
  virtual std::size_t skipped() const = 0;
};

struct RgbdLoadConfig {
  double depth_scale    = 5000.0;  // counts per meter, TUM convention
  double association_dt = 0.02;    // seconds
};

// Directory with rgb.txt / depth.txt index files (`timestamp path` lines,
// `#` comments); pairs streams by nearest timestamp within association_dt.
std::unique_ptr<FrameStream> loadRgbdSequence(const std::string& dir,
                                              const RgbdLoadConfig& config = {});

// Directory of per-scan cloud files, filename (sans extension) encoding the
// timestamp. `.bin`: flat little-endian float32 (x y z intensity) records;
// anything else is parsed as ASCII `x y z intensity` lines.
std::unique_ptr<FrameStream> loadLidarSequence(const std::string& dir);

std::vector<LidarPoint> readLidarCloud(const std::string& path);
void writeLidarCloud(const std::vector<LidarPoint>& cloud, const std::string& path);

}  // namespace md
