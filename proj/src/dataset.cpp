#include "md/dataset.h"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <opencv2/imgcodecs.hpp>
#include <sstream>

namespace md {

namespace {

namespace fs = std::filesystem;

struct IndexEntry {
  double timestamp;
  std::string path;
};

std::vector<IndexEntry> readIndex(const fs::path& file) {
  std::ifstream in(file);
  if (!in) {
    throw LoadError("missing index file: " + file.string());
  }
  std::vector<IndexEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string first;
    if (!(ss >> first) || first[0] == '#') {
      continue;
    }
    IndexEntry entry;
    std::istringstream values(line);
    if (!(values >> entry.timestamp >> entry.path)) {
      throw LoadError(file.string() + ": bad index line " + std::to_string(line_no));
    }
    entries.push_back(std::move(entry));
  }
  std::sort(entries.begin(), entries.end(),
            [](const IndexEntry& a, const IndexEntry& b) {
              return a.timestamp < b.timestamp;
            });
  return entries;
}

ScalarImage loadIntensity(const fs::path& file) {
  const cv::Mat raw = cv::imread(file.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) {
    throw LoadError("unreadable image: " + file.string());
  }
  cv::Mat gray;
  if (raw.channels() == 3) {
    // Rec. 601 luminance; OpenCV loads BGR.
    cv::Mat channels[3];
    cv::split(raw, channels);
    cv::Mat f[3];
    for (int i = 0; i < 3; ++i) {
      channels[i].convertTo(f[i], CV_64F);
    }
    gray = 0.114 * f[0] + 0.587 * f[1] + 0.299 * f[2];
  } else {
    raw.convertTo(gray, CV_64F);
  }
  const double peak = raw.depth() == CV_16U ? 65535.0 : 255.0;
  ScalarImage image(gray.rows, gray.cols);
  for (int r = 0; r < gray.rows; ++r) {
    for (int c = 0; c < gray.cols; ++c) {
      image.set(r, c, gray.at<double>(r, c) / peak);
    }
  }
  return image;
}

ScalarImage loadDepth(const fs::path& file, double scale) {
  const cv::Mat raw = cv::imread(file.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty() || raw.depth() != CV_16U || raw.channels() != 1) {
    throw LoadError("unreadable 16-bit depth image: " + file.string());
  }
  ScalarImage depth(raw.rows, raw.cols);
  for (int r = 0; r < raw.rows; ++r) {
    for (int c = 0; c < raw.cols; ++c) {
      const std::uint16_t counts = raw.at<std::uint16_t>(r, c);
      if (counts > 0) {
        depth.set(r, c, counts / scale);
      }
    }
  }
  return depth;
}

class RgbdStream : public FrameStream {
 public:
  RgbdStream(fs::path dir, const RgbdLoadConfig& config)
      : dir_(std::move(dir)), config_(config) {
    const auto rgb   = readIndex(dir_ / "rgb.txt");
    const auto depth = readIndex(dir_ / "depth.txt");
    // Greedy in-order pairing within the association window.
    std::vector<bool> depth_used(depth.size(), false);
    for (const IndexEntry& r : rgb) {
      int best       = -1;
      double best_dt = config_.association_dt;
      for (std::size_t j = 0; j < depth.size(); ++j) {
        const double dt = std::abs(depth[j].timestamp - r.timestamp);
        if (!depth_used[j] && dt <= best_dt) {
          best_dt = dt;
          best    = static_cast<int>(j);
        }
      }
      if (best < 0) {
        ++skipped_;
        continue;
      }
      depth_used[best] = true;
      pairs_.push_back({r, depth[best]});
    }
  }

  bool next(FrameRecord& out) override {
    if (cursor_ >= pairs_.size()) {
      return false;
    }
    const auto& [rgb, depth] = pairs_[cursor_++];
    out           = {};
    out.timestamp = rgb.timestamp;
    out.intensity = loadIntensity(dir_ / rgb.path);
    out.depth     = loadDepth(dir_ / depth.path, config_.depth_scale);
    if (out.intensity.rows() != out.depth.rows() ||
        out.intensity.cols() != out.depth.cols()) {
      throw LoadError("rgb/depth dimension mismatch at " + rgb.path);
    }
    return true;
  }

  std::size_t size() const override { return pairs_.size(); }
  std::size_t skipped() const override { return skipped_; }

 private:
  fs::path dir_;
  RgbdLoadConfig config_;
  std::vector<std::pair<IndexEntry, IndexEntry>> pairs_;
  std::size_t cursor_ = 0, skipped_ = 0;
};

std::vector<LidarPoint> readBinaryCloud(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) {
    throw LoadError("unreadable cloud file: " + file.string());
  }
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  constexpr std::size_t record = 4 * sizeof(float);
  if (bytes.size() % record != 0) {
    throw LoadError(file.string() + ": truncated record at byte offset " +
                    std::to_string(bytes.size() - bytes.size() % record));
  }
  std::vector<LidarPoint> cloud(bytes.size() / record);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    float values[4];
    std::memcpy(values, bytes.data() + i * record, record);
    cloud[i].position  = {values[0], values[1], values[2]};
    cloud[i].intensity = values[3];
  }
  return cloud;
}

std::vector<LidarPoint> readAsciiCloud(const fs::path& file) {
  std::ifstream in(file);
  if (!in) {
    throw LoadError("unreadable cloud file: " + file.string());
  }
  std::vector<LidarPoint> cloud;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string first;
    if (!(ss >> first) || first[0] == '#') {
      continue;
    }
    LidarPoint p;
    std::istringstream values(line);
    if (!(values >> p.position.x() >> p.position.y() >> p.position.z() >>
          p.intensity)) {
      throw LoadError(file.string() + ": bad point at line " +
                      std::to_string(line_no));
    }
    cloud.push_back(p);
  }
  return cloud;
}

class LidarStream : public FrameStream {
 public:
  explicit LidarStream(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
      throw LoadError("not a directory: " + dir.string());
    }
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file()) {
        continue;
      }
      const fs::path& p = entry.path();
      double ts;
      try {
        ts = std::stod(p.stem().string());
      } catch (const std::exception&) {
        // Sidecar files (trajectories, configs) live next to the scans.
        ++skipped_;
        continue;
      }
      files_.push_back({ts, p.string()});
    }
    std::sort(files_.begin(), files_.end(),
              [](const IndexEntry& a, const IndexEntry& b) {
                return a.timestamp < b.timestamp;
              });
  }

  bool next(FrameRecord& out) override {
    if (cursor_ >= files_.size()) {
      return false;
    }
    const IndexEntry& entry = files_[cursor_++];
    out           = {};
    out.timestamp = entry.timestamp;
    out.cloud     = readLidarCloud(entry.path);
    return true;
  }

  std::size_t size() const override { return files_.size(); }
  std::size_t skipped() const override { return skipped_; }

 private:
  std::vector<IndexEntry> files_;
  std::size_t skipped_ = 0;
  std::size_t cursor_ = 0;
};

}  // namespace

std::unique_ptr<FrameStream> loadRgbdSequence(const std::string& dir,
                                              const RgbdLoadConfig& config) {
  return std::make_unique<RgbdStream>(dir, config);
}

std::unique_ptr<FrameStream> loadLidarSequence(const std::string& dir) {
  return std::make_unique<LidarStream>(dir);
}

std::vector<LidarPoint> readLidarCloud(const std::string& path) {
  return fs::path(path).extension() == ".bin" ? readBinaryCloud(path)
                                              : readAsciiCloud(path);
}

void writeLidarCloud(const std::vector<LidarPoint>& cloud, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw LoadError("cannot open cloud file for writing: " + path);
  }
  for (const LidarPoint& p : cloud) {
    const float values[4] = {static_cast<float>(p.position.x()),
                             static_cast<float>(p.position.y()),
                             static_cast<float>(p.position.z()),
                             static_cast<float>(p.intensity)};
    out.write(reinterpret_cast<const char*>(values), sizeof(values));
  }
}

}  // namespace md
