#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>

#include "avfuse/align.hpp"
#include "avfuse/fusion.hpp"
#include "avfuse/localize.hpp"
#include "avfuse/metrics.hpp"
#include "avfuse/synthgen.hpp"

namespace avfuse {

// Everything a command may need. Commands read only the fields they use.
struct RunConfig {
  std::filesystem::path gt;
  std::filesystem::path streams;
  std::filesystem::path aligned;
  std::filesystem::path model;
  std::filesystem::path scores;
  std::filesystem::path proposals;
  std::filesystem::path out;
  std::string video;

  std::int64_t token_ms = kDefaultTokenMs;
  std::set<int> keep_res{160, 320, 640};
  // Overrides the visual + audio<keep_res> layout when set.
  std::optional<StreamLayout> layout;

  TrainConfig train;
  ProposalConfig proposal{default_thresholds(), 0, 100, RunConfidence::kMean};
  MetricsConfig metrics;
  ScenarioConfig synth;
  int threads = 1;

  StreamLayout effective_layout() const;
  void validate() const;
};

// Standard file names used inside output directories.
namespace files {
inline constexpr const char* kGroundTruth = "ground_truth.ndjson";
inline constexpr const char* kStreams = "streams.ndjson";
inline constexpr const char* kSynthConfig = "synth_config.json";
inline constexpr const char* kAligned = "aligned.ndjson";
inline constexpr const char* kModel = "model.json";
inline constexpr const char* kTokenScores = "token_scores.ndjson";
inline constexpr const char* kDetections = "detections.ndjson";
inline constexpr const char* kProposals = "proposals.ndjson";
inline constexpr const char* kReport = "report.json";
}  // namespace files

// Each command is a pure function of its input files and config; messages go
// to `log`. Errors surface as ValidationError / IoError.

// Writes ground truth, streams and a config echo into cfg.out (a directory).
void cmd_synth(const RunConfig& cfg, std::ostream& log);
// Writes fused frames for every video to cfg.out. Videos that fail alignment
// are reported and skipped; if all fail, throws.
void cmd_align(const RunConfig& cfg, std::ostream& log);
// Trains the fusion head on cfg.aligned + cfg.gt and writes cfg.out.
void cmd_train(const RunConfig& cfg, std::ostream& log);
// Writes token_scores.ndjson and detections.ndjson into cfg.out.
void cmd_predict(const RunConfig& cfg, std::ostream& log);
// Turns cfg.scores into proposals at cfg.out.
void cmd_localize(const RunConfig& cfg, std::ostream& log);
// Scores cfg.scores + cfg.proposals against cfg.gt, writes a JSON report to
// cfg.out and prints a table.
MetricsReport cmd_evaluate(const RunConfig& cfg, std::ostream& log);
// Per-token CSV of branch and fused fake probabilities for cfg.video.
void cmd_trace(const RunConfig& cfg, std::ostream& log);
// synth (unless cfg.gt and cfg.streams are given), align, train, predict,
// localize and evaluate, all inside cfg.out.
MetricsReport cmd_run(const RunConfig& cfg, std::ostream& log);

std::string render_report_table(const MetricsReport& report);

}  // namespace avfuse
