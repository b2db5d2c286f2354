#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "avfuse/error.hpp"
#include "avfuse/io.hpp"
#include "avfuse/pipeline.hpp"

using namespace avfuse;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("avfuse_pipe_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

RunConfig quick(const fs::path& out, int videos) {
  RunConfig cfg;
  cfg.out = out;
  cfg.synth.num_videos = videos;
  cfg.train.total_steps = 300;
  return cfg;
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) {
    if (line.starts_with("#")) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("synth writes 6 stream records per video") {
  TempDir dir;
  std::ostringstream log;
  cmd_synth(quick(dir.path, 100), log);
  CHECK(count_lines(dir.path / files::kGroundTruth) == 100);
  CHECK(count_lines(dir.path / files::kStreams) == 600);
  CHECK(fs::exists(dir.path / files::kSynthConfig));
}

TEST_CASE("synth with zero videos writes empty valid files") {
  TempDir dir;
  std::ostringstream log;
  cmd_synth(quick(dir.path, 0), log);
  CHECK(io::read_ground_truth(dir.path / files::kGroundTruth).empty());
  CHECK(io::read_streams(dir.path / files::kStreams).empty());
}

TEST_CASE("align keep-set controls the frame width") {
  TempDir dir;
  std::ostringstream log;
  auto cfg = quick(dir.path, 5);
  cmd_synth(cfg, log);
  cfg.gt = dir.path / files::kGroundTruth;
  cfg.streams = dir.path / files::kStreams;

  cfg.out = dir.path / "a8.ndjson";
  cmd_align(cfg, log);
  for (const auto& a : io::read_aligned(cfg.out)) CHECK(a.frames.dim() == 8);

  cfg.keep_res = {320};
  cfg.out = dir.path / "a4.ndjson";
  cmd_align(cfg, log);
  for (const auto& a : io::read_aligned(cfg.out)) {
    CHECK(a.frames.dim() == 4);
    CHECK(a.layout == StreamLayout{"visual", "audio320"});
  }

  cfg.keep_res = {30};
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("align reports a missing audio stream by video and resolution") {
  TempDir dir;
  std::ostringstream log;
  auto cfg = quick(dir.path, 3);
  cmd_synth(cfg, log);
  auto streams = io::read_streams(dir.path / files::kStreams);
  std::erase_if(streams, [](const ScoreStream& s) {
    return s.video_id == "vid_000001" && s.branch == Branch::kAudio && s.resolution_ms == 160;
  });
  io::write_streams(dir.path / "partial.ndjson", streams);
  cfg.gt = dir.path / files::kGroundTruth;
  cfg.streams = dir.path / "partial.ndjson";
  cfg.out = dir.path / "aligned.ndjson";
  std::ostringstream diag;
  cmd_align(cfg, diag);
  CHECK(diag.str().find("vid_000001") != std::string::npos);
  CHECK(diag.str().find("160") != std::string::npos);
  CHECK(io::read_aligned(cfg.out).size() == 2);

  // Every video failing is an error.
  std::erase_if(streams, [](const ScoreStream& s) { return s.branch == Branch::kAudio && s.resolution_ms == 160; });
  io::write_streams(dir.path / "none.ndjson", streams);
  cfg.streams = dir.path / "none.ndjson";
  CHECK_THROWS_AS(cmd_align(cfg, diag), ValidationError);
}

TEST_CASE("end-to-end run produces finite metrics and consistent artifacts") {
  TempDir dir;
  std::ostringstream log;
  const auto cfg = quick(dir.path, 40);
  const auto report = cmd_run(cfg, log);
  for (double v : {report.auc_video, report.auc_segment, report.eer}) CHECK(std::isfinite(v));
  for (const auto& [k, v] : report.ap) CHECK(std::isfinite(v));
  for (const auto& [k, v] : report.ar) CHECK(std::isfinite(v));
  CHECK(report.ap.size() == 4);
  CHECK(report.ar.size() == 5);

  const auto scores = io::read_token_scores(dir.path / files::kTokenScores);
  const auto det = io::read_detections(dir.path / files::kDetections);
  REQUIRE(scores.size() == det.size());
  for (std::size_t i = 0; i < det.size(); ++i) {
    CHECK(det[i].video_id == scores[i].video_id);
    CHECK(det[i].score == *std::max_element(scores[i].scores.begin(), scores[i].scores.end()));
  }
  const auto stored = io::read_report(dir.path / files::kReport);
  CHECK(stored.auc_segment == report.auc_segment);
  CHECK(log.str().find("AUC") != std::string::npos);
}

TEST_CASE("trace on a noiseless RVFA video follows the audio stream") {
  TempDir dir;
  std::ostringstream log;
  auto cfg = quick(dir.path, 40);
  cfg.synth.noise_sigma = 0.0;
  cfg.synth.miss_prob = 0.0;
  cfg.synth.scenario_mix = {1, 1, 2, 1};
  cmd_run(cfg, log);

  const auto gts = io::read_ground_truth(dir.path / files::kGroundTruth);
  auto it = std::find_if(gts.begin(), gts.end(),
                         [](const GroundTruth& g) { return scenario_of(g) == Scenario::kRVFA; });
  REQUIRE(it != gts.end());
  cfg.gt = dir.path / files::kGroundTruth;
  cfg.streams = dir.path / files::kStreams;
  cfg.model = dir.path / files::kModel;
  cfg.video = it->video_id;
  cfg.out = dir.path / "trace.csv";
  cmd_trace(cfg, log);

  const auto rows = read_csv(cfg.out);
  REQUIRE(rows.size() > 1);
  const auto& head = rows[0];
  auto col = [&](const std::string& name) {
    return static_cast<std::size_t>(std::find(head.begin(), head.end(), name) - head.begin());
  };
  REQUIRE(col("fused") < head.size());
  REQUIRE(col("audio160") < head.size());
  std::size_t fake_tokens = 0;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const double fused = std::stod(rows[r][col("fused")]);
    CHECK(std::stod(rows[r][col("visual")]) < 0.5);
    if (std::stod(rows[r][col("audio160")]) > 0.5) CHECK(fused > 0.5);
    if (rows[r][col("gt_audio")] == "1") {
      ++fake_tokens;
      CHECK(fused > 0.5);
    }
  }
  CHECK(fake_tokens > 0);
}

TEST_CASE("repeated runs produce byte-identical artifacts") {
  TempDir a, b;
  std::ostringstream log;
  cmd_run(quick(a.path, 20), log);
  auto cfg = quick(b.path, 20);
  cfg.threads = 3;
  cmd_run(cfg, log);
  for (const char* name : {files::kGroundTruth, files::kStreams, files::kAligned, files::kModel,
                           files::kTokenScores, files::kDetections, files::kProposals, files::kReport}) {
    INFO(name);
    CHECK(io::read_text(a.path / name) == io::read_text(b.path / name));
  }
}

TEST_CASE("render_report_table shows percentages") {
  MetricsReport r;
  r.auc_video = 0.9966;
  r.ap = {{0.5, 0.4217}};
  r.ar = {{50, 0.25}};
  const auto table = render_report_table(r);
  CHECK(table.find("99.66") != std::string::npos);
  CHECK(table.find("42.17") != std::string::npos);
}
