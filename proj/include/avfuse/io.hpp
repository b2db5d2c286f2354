#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "avfuse/align.hpp"
#include "avfuse/fusion.hpp"
#include "avfuse/localize.hpp"
#include "avfuse/metrics.hpp"
#include "avfuse/synthgen.hpp"
#include "avfuse/timeline.hpp"

// File formats. Collections are NDJSON (one JSON object per LF-terminated
// line, UTF-8); models, reports and config echoes are single JSON documents.
// Parse errors are reported as ValidationError("<path>:<line>: ...");
// unreadable or unwritable files raise IoError.
namespace avfuse::io {

using Path = std::filesystem::path;

// {"video_id", "fps", "duration_ms", "fake_segments": [{"start_ms", "end_ms", "modality"}]}
std::vector<GroundTruth> read_ground_truth(const Path& path);
void write_ground_truth(const Path& path, std::span<const GroundTruth> records);

// {"video_id", "branch", "resolution_ms"? | "window_len_frames"? | "sparse_stride_frames"?,
//  "scores": [[real, fake], ...]}
std::vector<ScoreStream> read_streams(const Path& path);
void write_streams(const Path& path, std::span<const ScoreStream> records);

// {"video_id", "duration_ms", "token_ms", "layout": [...], "frames": [[...], ...]}
struct AlignedVideo {
  std::string video_id;
  std::int64_t duration_ms = 0;
  std::int64_t token_ms = kDefaultTokenMs;
  StreamLayout layout;
  FusedFrames frames;
};
std::vector<AlignedVideo> read_aligned(const Path& path);
void write_aligned(const Path& path, std::span<const AlignedVideo> records);

// {"input_dim", "weights": [[...], [...]], "bias": [..], "stream_layout": [...],
//  "seed", "schedule": {...}}
FusionModel read_model(const Path& path);
void write_model(const Path& path, const FusionModel& model);

// {"video_id", "duration_ms", "token_ms", "scores": [p_fake, ...]}
struct TokenScores {
  std::string video_id;
  std::int64_t duration_ms = 0;
  std::int64_t token_ms = kDefaultTokenMs;
  std::vector<double> scores;
};
std::vector<TokenScores> read_token_scores(const Path& path);
void write_token_scores(const Path& path, std::span<const TokenScores> records);

// {"video_id", "score"}
struct Detection {
  std::string video_id;
  double score = 0.0;
};
std::vector<Detection> read_detections(const Path& path);
void write_detections(const Path& path, std::span<const Detection> records);

// {"video_id", "proposals": [{"start_ms", "end_ms", "confidence"}]}
struct VideoProposals {
  std::string video_id;
  std::vector<Proposal> proposals;
};
std::vector<VideoProposals> read_proposals(const Path& path);
void write_proposals(const Path& path, std::span<const VideoProposals> records);

void write_scenario_config(const Path& path, const ScenarioConfig& cfg);
ScenarioConfig read_scenario_config(const Path& path);

// Metrics plus an echo of the evaluation configuration.
void write_report(const Path& path, const MetricsReport& report, const MetricsConfig& cfg);
MetricsReport read_report(const Path& path);

// Whole-file read/write helpers shared by the writers above.
std::string read_text(const Path& path);
void write_text(const Path& path, const std::string& content);

}  // namespace avfuse::io
