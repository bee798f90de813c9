#pragma once

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include "poic/geometry.hpp"
#include "poic/image.hpp"

namespace poic {

struct Annotation {
  std::string frame_id;
  std::string label;
  Rect rect;
};

struct DetectionBox {
  std::string label;
  double score = 0.0;
  RectF rect;
  int sub_frame = -1;  // -1 once mapped back to original coordinates
};

/// Provenance of the raster handed to a detector: the placements whose
/// content is visible in it. Composed sub-frames pass their placement list;
/// baselines pass a single whole-crop placement.
struct RasterContext {
  std::string frame_id;
  int sub_frame = -1;
  std::vector<Placement> placements;
};

class DetectorAdapter {
 public:
  virtual ~DetectorAdapter() = default;
  virtual std::vector<DetectionBox> detect(const Image& raster, const RasterContext& ctx) = 0;
};

/// Emits every ground-truth box that lies inside a placement's source region,
/// mapped through that placement, with score 1. Lets the full pipeline run
/// and be checked for exact coordinate round-trips without any real model.
class OracleDetector : public DetectorAdapter {
 public:
  explicit OracleDetector(const std::vector<Annotation>& annotations) {
    for (const Annotation& a : annotations) by_frame_[a.frame_id].push_back(a);
  }

  std::vector<DetectionBox> detect(const Image&, const RasterContext& ctx) override {
    std::vector<DetectionBox> out;
    auto it = by_frame_.find(ctx.frame_id);
    if (it == by_frame_.end()) return out;
    for (const Annotation& a : it->second) {
      for (const Placement& pl : ctx.placements) {
        if (!contains(pl.src, a.rect)) continue;
        out.push_back(DetectionBox{a.label, 1.0, forward_map_f(pl, to_rectf(a.rect)),
                                   ctx.sub_frame});
        break;
      }
    }
    return out;
  }

 private:
  std::map<std::string, std::vector<Annotation>> by_frame_;
};

/// Drives a child process over a line protocol: one `DETECT <raster-path>`
/// request, then `BOX label score x y w h` lines until `END`. The child is
/// spawned once and reused; any protocol violation or timeout kills it (the
/// next request respawns). Requests are serialized by a lock.
class ExternalDetector : public DetectorAdapter {
 public:
  explicit ExternalDetector(std::string command, double timeout_s = 10.0)
      : command_(std::move(command)), timeout_s_(timeout_s) {}

  ExternalDetector(const ExternalDetector&) = delete;
  ExternalDetector& operator=(const ExternalDetector&) = delete;

  ~ExternalDetector() override { shutdown(); }

  std::vector<DetectionBox> detect(const Image& raster, const RasterContext& ctx) override {
    std::lock_guard<std::mutex> lock(mu_);
    if (pid_ < 0) spawn();
    std::string path = write_temp(raster);
    std::vector<DetectionBox> out;
    try {
      std::string req = "DETECT " + path + "\n";
      if (::write(to_child_, req.data(), req.size()) != static_cast<ssize_t>(req.size())) {
        kill_child();
        throw DetectorError("failed to write detector request");
      }
      auto deadline = std::chrono::steady_clock::now() +
                      std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                          std::chrono::duration<double>(timeout_s_));
      for (;;) {
        std::string line = read_line(deadline);
        if (line == "END") break;
        out.push_back(parse_box(line, ctx.sub_frame));
      }
    } catch (...) {
      ::unlink(path.c_str());
      throw;
    }
    ::unlink(path.c_str());
    return out;
  }

 private:
  void spawn() {
    int in_pipe[2], out_pipe[2];
    if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0) throw DetectorError("pipe failed");
    pid_t pid = fork();
    if (pid < 0) throw DetectorError("fork failed");
    if (pid == 0) {
      dup2(in_pipe[0], STDIN_FILENO);
      dup2(out_pipe[1], STDOUT_FILENO);
      close(in_pipe[0]);
      close(in_pipe[1]);
      close(out_pipe[0]);
      close(out_pipe[1]);
      execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
      _exit(127);
    }
    close(in_pipe[0]);
    close(out_pipe[1]);
    pid_ = pid;
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    buffer_.clear();
  }

  void kill_child() {
    if (pid_ < 0) return;
    ::kill(pid_, SIGKILL);
    int status = 0;
    waitpid(pid_, &status, 0);
    close(to_child_);
    close(from_child_);
    pid_ = -1;
  }

  void shutdown() {
    std::lock_guard<std::mutex> lock(mu_);
    kill_child();
  }

  std::string read_line(std::chrono::steady_clock::time_point deadline) {
    for (;;) {
      size_t nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (remaining.count() <= 0) {
        kill_child();
        throw DetectorError("detector timeout");
      }
      struct pollfd pfd {from_child_, POLLIN, 0};
      int pr = poll(&pfd, 1, static_cast<int>(remaining.count()));
      if (pr <= 0) {
        kill_child();
        throw DetectorError("detector timeout");
      }
      char chunk[4096];
      ssize_t got = ::read(from_child_, chunk, sizeof(chunk));
      if (got <= 0) {
        kill_child();
        throw DetectorError("detector exited before END");
      }
      buffer_.append(chunk, static_cast<size_t>(got));
    }
  }

  DetectionBox parse_box(const std::string& line, int sub_frame) {
    std::istringstream ss(line);
    std::string tag, label, extra;
    double score, x, y, w, h;
    if (!(ss >> tag >> label >> score >> x >> y >> w >> h) || tag != "BOX" || ss >> extra) {
      kill_child();
      throw DetectorError("malformed detector line: " + line);
    }
    return DetectionBox{label, std::clamp(score, 0.0, 1.0), RectF{x, y, w, h}, sub_frame};
  }

  std::string write_temp(const Image& raster) {
    const char* dir = std::getenv("TMPDIR");
    std::string templ = std::string(dir && *dir ? dir : "/tmp") + "/poic_raster_XXXXXX" +
                        (raster.channels == 1 ? ".pgm" : ".ppm");
    std::vector<char> buf(templ.begin(), templ.end());
    buf.push_back('\0');
    int fd = mkstemps(buf.data(), 4);
    if (fd < 0) throw DetectorError("cannot create temp raster file");
    close(fd);
    std::string path(buf.data());
    write_pnm(raster, path);
    return path;
  }

  std::string command_;
  double timeout_s_;
  std::mutex mu_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

}  // namespace poic
