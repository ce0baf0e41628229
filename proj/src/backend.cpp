#include "srpose/backend.hpp"

#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>

#include "srpose/error.hpp"
#include "srpose/resample.hpp"

extern char** environ;

namespace srpose {

RasterImage BicubicUpscaler::upscale(const RasterImage& image, int ratio, std::int64_t) {
  return resample(image, {static_cast<double>(ratio), -0.5});
}

int run_process(const std::vector<std::string>& argv, const std::filesystem::path& log_path) {
  if (argv.empty()) throw std::invalid_argument("run_process: empty argv");
  std::vector<char*> cargs;
  cargs.reserve(argv.size() + 1);
  for (const auto& a : argv) cargs.push_back(const_cast<char*>(a.c_str()));
  cargs.push_back(nullptr);

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, log_path.c_str(),
                                   O_WRONLY | O_CREAT | O_TRUNC, 0644);
  posix_spawn_file_actions_adddup2(&actions, STDOUT_FILENO, STDERR_FILENO);
  posix_spawn_file_actions_addopen(&actions, STDIN_FILENO, "/dev/null", O_RDONLY, 0);

  pid_t pid = 0;
  const int rc = posix_spawnp(&pid, cargs[0], &actions, nullptr, cargs.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) {
    throw BackendError("cannot start " + argv[0] + ": " + std::strerror(rc));
  }
  int status = 0;
  while (waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) throw BackendError("waitpid failed for " + argv[0]);
  }
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
}

SubprocessBackend::SubprocessBackend(std::filesystem::path executable,
                                     std::filesystem::path scratch_root)
    : executable_(std::move(executable)), scratch_root_(std::move(scratch_root)) {
  if (scratch_root_.empty()) {
    scratch_root_ = std::filesystem::temp_directory_path() /
                    ("srpose-" + std::to_string(::getpid()));
  }
}

namespace {

// Inputs are named after the image id so a backend can key scripted
// behaviour on it.
std::string input_name(std::int64_t image_id) { return std::to_string(image_id) + ".png"; }

}  // namespace

std::string SubprocessBackend::id() const { return executable_.filename().string(); }

std::filesystem::path SubprocessBackend::make_workdir(std::int64_t image_id) {
  static std::atomic<std::uint64_t> counter{0};
  auto dir = scratch_root_ / (std::to_string(image_id) + "-" + std::to_string(counter++));
  std::filesystem::create_directories(dir);
  return dir;
}

void SubprocessBackend::invoke(const std::vector<std::string>& args,
                               const std::filesystem::path& workdir) {
  std::vector<std::string> argv{executable_.string()};
  argv.insert(argv.end(), args.begin(), args.end());
  const auto log = workdir / "backend.log";
  const int status = run_process(argv, log);
  if (status != 0) {
    std::string message;
    try {
      message = read_text_file(log);
    } catch (const std::exception&) {
    }
    while (!message.empty() && (message.back() == '\n' || message.back() == '\r')) {
      message.pop_back();
    }
    throw BackendError(id() + " " + args.at(1) + " exited with status " +
                       std::to_string(status) + (message.empty() ? "" : ": " + message));
  }
}

RasterImage SubprocessBackend::upscale(const RasterImage& image, int ratio,
                                       std::int64_t image_id) {
  const auto dir = make_workdir(image_id);
  const auto in = dir / input_name(image_id);
  const auto out = dir / "output.png";
  write_png(image, in);
  invoke({"--task", "upscale", "--input", in.string(), "--output", out.string(), "--scale",
          std::to_string(ratio)},
         dir);
  RasterImage result = read_image(out);
  std::filesystem::remove_all(dir);
  return result;
}

std::vector<DetectionRecord> SubprocessBackend::detect(const RasterImage& image,
                                                       std::int64_t image_id) {
  const auto dir = make_workdir(image_id);
  const auto in = dir / input_name(image_id);
  const auto out = dir / "detections.json";
  write_png(image, in);
  invoke({"--task", "detect", "--input", in.string(), "--output", out.string()}, dir);
  ResultSet results = parse_results(out);
  std::filesystem::remove_all(dir);
  if (!results.keypoints.empty()) {
    throw BackendError(id() + " detect returned keypoint records");
  }
  // The backend only sees a file; stamp the caller's id.
  for (auto& d : results.detections) d.image_id = image_id;
  return results.detections;
}

std::vector<KeypointRecord> SubprocessBackend::estimate(const RasterImage& image,
                                                        std::int64_t image_id,
                                                        std::span<const BBox> boxes) {
  const auto dir = make_workdir(image_id);
  const auto in = dir / input_name(image_id);
  const auto box_file = dir / "boxes.json";
  const auto out = dir / "keypoints.json";
  write_png(image, in);
  std::vector<DetectionRecord> box_records;
  for (const BBox& b : boxes) box_records.push_back({image_id, b, 1.0, std::nullopt});
  write_results(box_records, box_file);
  invoke({"--task", "keypoints", "--input", in.string(), "--output", out.string(), "--boxes",
          box_file.string()},
         dir);
  ResultSet results = parse_results(out);
  std::filesystem::remove_all(dir);
  if (results.keypoints.size() != boxes.size()) {
    throw BackendError(id() + " keypoints returned " + std::to_string(results.keypoints.size()) +
                       " records for " + std::to_string(boxes.size()) + " boxes");
  }
  for (auto& r : results.keypoints) r.image_id = image_id;
  return results.keypoints;
}

void SubprocessBackend::upscale_directory(const std::filesystem::path& input,
                                          const std::filesystem::path& output, int ratio) {
  std::filesystem::create_directories(output);
  const auto dir = make_workdir(-1);
  invoke({"--task", "upscale", "--input", input.string(), "--output", output.string(),
          "--scale", std::to_string(ratio)},
         dir);
  std::filesystem::remove_all(dir);
}

}  // namespace srpose
