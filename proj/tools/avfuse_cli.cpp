// avfuse command-line tool: synth / align / train / predict / localize /
// evaluate / trace / run. Exit codes: 0 success, 1 validation failure,
// 2 I/O failure.

#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "avfuse/error.hpp"
#include "avfuse/pipeline.hpp"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

}  // namespace

int main(int argc, char** argv) {
  avfuse::RunConfig cfg;
  CLI::App app{"Multi-branch score fusion, temporal forgery localization and evaluation"};
  app.set_config("--config", "", "Config file (TOML/INI, keys are long option names)");
  app.require_subcommand(1);
  app.fallthrough();

  std::string gt, streams, aligned, model, scores, proposals, out;
  app.add_option("--gt", gt, "Ground-truth NDJSON");
  app.add_option("--streams", streams, "Score-stream NDJSON");
  app.add_option("--aligned", aligned, "Aligned fused-frame NDJSON");
  app.add_option("--model", model, "Fusion model JSON");
  app.add_option("--scores", scores, "Token-score NDJSON");
  app.add_option("--proposals", proposals, "Proposal NDJSON");
  app.add_option("--out", out, "Output file or directory (per command)");
  app.add_option("--video", cfg.video, "Video id (trace)");

  std::uint64_t seed = 7;
  app.add_option("--seed", seed, "Seed for synthesis and training")->capture_default_str();
  app.add_option("--threads", cfg.threads, "Worker threads")->capture_default_str();

  std::vector<int> keep_res(cfg.keep_res.begin(), cfg.keep_res.end());
  app.add_option("--keep-res", keep_res, "Audio resolutions (ms) to fuse")->delimiter(',')->capture_default_str();
  std::vector<std::string> layout;
  app.add_option("--layout", layout, "Explicit stream layout, e.g. visual,audio160")->delimiter(',');
  app.add_option("--token-ms", cfg.token_ms, "Token duration in ms")->capture_default_str();

  auto& syn = cfg.synth;
  app.add_option("--videos", syn.num_videos, "Number of synthetic videos")->capture_default_str();
  app.add_option("--window-frames", syn.window_len_frames, "Visual sliding-window length (frames)")->capture_default_str();
  app.add_option("--sparse-stride", syn.sparse_stride_frames, "LMM sampling stride (frames)")->capture_default_str();
  app.add_option("--sigma", syn.noise_sigma, "Synthetic logit noise sigma")->capture_default_str();
  app.add_option("--miss", syn.miss_prob, "Per-stream miss probability")->capture_default_str();
  std::vector<double> mix(syn.scenario_mix.begin(), syn.scenario_mix.end());
  app.add_option("--mix", mix, "Scenario weights RVRA,FVRA,RVFA,FVFA")->delimiter(',')->expected(4)->capture_default_str();
  app.add_option("--duration-min", syn.duration_min_ms, "Shortest synthetic clip (ms)")->capture_default_str();
  app.add_option("--duration-max", syn.duration_max_ms, "Longest synthetic clip (ms)")->capture_default_str();
  app.add_option("--fake-mean", syn.fake_duration_mean_ms, "Mean fake segment duration (ms)")->capture_default_str();
  std::vector<int> audio_res = syn.audio_resolutions;
  app.add_option("--audio-res", audio_res, "Audio resolutions emitted by synth (ms)")->delimiter(',')->capture_default_str();

  auto& tr = cfg.train;
  app.add_option("--max-lr", tr.max_lr, "Peak learning rate")->capture_default_str();
  app.add_option("--steps", tr.total_steps, "Optimizer steps")->capture_default_str();
  app.add_option("--pct-start", tr.pct_start, "Warm-up fraction of the one-cycle schedule")->capture_default_str();
  std::string policy = "one_cycle";
  app.add_option("--lr-policy", policy, "one_cycle or constant")->capture_default_str();
  app.add_option("--batch-videos", tr.batch_videos, "Videos per optimizer step")->capture_default_str();
  app.add_option("--momentum", tr.momentum, "SGD momentum")->capture_default_str();
  app.add_option("--pos-weight", tr.positive_class_weight, "Loss weight of fake tokens")->capture_default_str();

  app.add_option("--thresholds", cfg.proposal.thresholds, "Proposal threshold grid")->delimiter(',');
  app.add_option("--top-k", cfg.proposal.top_k, "Proposals kept per video")->capture_default_str();
  app.add_option("--max-gap", cfg.proposal.max_gap_tokens, "Sub-threshold tokens bridged inside a run")->capture_default_str();
  std::string confidence = "mean";
  app.add_option("--confidence", confidence, "Run confidence: mean or max")->capture_default_str();

  app.add_option("--iou", cfg.metrics.ap_iou_thresholds, "AP IoU thresholds")->delimiter(',')->capture_default_str();
  app.add_option("--budgets", cfg.metrics.ar_budgets, "AR proposal budgets")->delimiter(',')->capture_default_str();

  auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic ground truth and score streams");
  auto* align_cmd = app.add_subcommand("align", "Align score streams onto the token grid");
  auto* train_cmd = app.add_subcommand("train", "Train the linear fusion head");
  auto* predict_cmd = app.add_subcommand("predict", "Token and video scores from a trained model");
  auto* localize_cmd = app.add_subcommand("localize", "Threshold-sweep segment proposals");
  auto* evaluate_cmd = app.add_subcommand("evaluate", "AUC / EER / AP / AR report");
  auto* trace_cmd = app.add_subcommand("trace", "Per-token branch and fused scores for one video (CSV)");
  auto* run_cmd = app.add_subcommand("run", "synth -> align -> train -> predict -> localize -> evaluate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    cfg.gt = gt;
    cfg.streams = streams;
    cfg.aligned = aligned;
    cfg.model = model;
    cfg.scores = scores;
    cfg.proposals = proposals;
    cfg.out = out;
    cfg.synth.seed = seed;
    cfg.train.seed = seed;
    cfg.keep_res = std::set<int>(keep_res.begin(), keep_res.end());
    if (!layout.empty()) cfg.layout = layout;
    std::copy(mix.begin(), mix.end(), cfg.synth.scenario_mix.begin());
    cfg.synth.audio_resolutions = audio_res;
    cfg.train.policy = avfuse::lr_policy_from_string(policy);
    cfg.train.threads = cfg.threads;
    if (confidence == "mean") {
      cfg.proposal.confidence = avfuse::RunConfidence::kMean;
    } else if (confidence == "max") {
      cfg.proposal.confidence = avfuse::RunConfidence::kMax;
    } else {
      throw avfuse::ValidationError("--confidence must be 'mean' or 'max'");
    }
    cfg.validate();

    if (*synth_cmd) avfuse::cmd_synth(cfg, std::cout);
    if (*align_cmd) avfuse::cmd_align(cfg, std::cerr);
    if (*train_cmd) avfuse::cmd_train(cfg, std::cout);
    if (*predict_cmd) avfuse::cmd_predict(cfg, std::cout);
    if (*localize_cmd) avfuse::cmd_localize(cfg, std::cout);
    if (*evaluate_cmd) avfuse::cmd_evaluate(cfg, std::cout);
    if (*trace_cmd) avfuse::cmd_trace(cfg, std::cout);
    if (*run_cmd) avfuse::cmd_run(cfg, std::cout);
  } catch (const avfuse::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return 0;
}
