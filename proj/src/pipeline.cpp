#include "avfuse/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "avfuse/error.hpp"
#include "avfuse/io.hpp"

namespace avfuse {

StreamLayout RunConfig::effective_layout() const {
  return layout ? *layout : layout_for_resolutions(keep_res);
}

void RunConfig::validate() const {
  static const std::set<int> kKnown{20, 40, 80, 160, 320, 640};
  for (int r : keep_res) {
    if (!kKnown.contains(r)) {
      throw ValidationError("--keep-res: " + std::to_string(r) +
                            " ms is not one of 20, 40, 80, 160, 320, 640");
    }
  }
  if (token_ms <= 0) throw ValidationError("--token-ms must be positive");
  if (threads < 1) throw ValidationError("--threads must be >= 1");
  if (effective_layout().empty()) throw ValidationError("empty stream layout");
}

namespace {

void require_path(const std::filesystem::path& p, const char* flag) {
  if (p.empty()) throw ValidationError(std::string("missing required option ") + flag);
}

// Runs fn(i) for i in [0, n) on `threads` workers; exceptions are rethrown
// in index order after all workers finish.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(1, threads)), std::max<std::size_t>(n, 1));
  std::vector<std::exception_ptr> errors(n);
  auto body = [&](std::size_t w) {
    for (std::size_t i = w; i < n; i += workers) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    body(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body, w);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

template <typename T>
std::map<std::string, const T*> index_by_video(const std::vector<T>& records, const char* what) {
  std::map<std::string, const T*> out;
  for (const auto& r : records) {
    if (!out.emplace(r.video_id, &r).second) {
      throw ValidationError(std::string("duplicate ") + what + " record for video '" + r.video_id + "'");
    }
  }
  return out;
}

std::vector<GroundTruth> sorted_ground_truth(const std::filesystem::path& path) {
  auto gts = io::read_ground_truth(path);
  std::ranges::sort(gts, {}, &GroundTruth::video_id);
  index_by_video(gts, "ground truth");
  return gts;
}

std::string format_fraction(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string format_percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * v);
  return buf;
}

}  // namespace

void cmd_synth(const RunConfig& cfg, std::ostream& log) {
  require_path(cfg.out, "--out");
  const SyntheticData data = generate(cfg.synth, cfg.threads);
  io::write_ground_truth(cfg.out / files::kGroundTruth, data.ground_truth);
  io::write_streams(cfg.out / files::kStreams, data.streams);
  io::write_scenario_config(cfg.out / files::kSynthConfig, cfg.synth);

  std::array<std::size_t, 4> counts{};
  for (const auto& gt : data.ground_truth) ++counts[static_cast<std::size_t>(scenario_of(gt))];
  log << "synth: " << data.ground_truth.size() << " ground-truth records, " << data.streams.size()
      << " stream records (RVRA " << counts[0] << ", FVRA " << counts[1] << ", RVFA " << counts[2]
      << ", FVFA " << counts[3] << ") -> " << cfg.out.string() << "\n";
}

void cmd_align(const RunConfig& cfg, std::ostream& log) {
  require_path(cfg.gt, "--gt");
  require_path(cfg.streams, "--streams");
  require_path(cfg.out, "--out");
  cfg.validate();
  const auto gts = sorted_ground_truth(cfg.gt);
  const auto streams = io::read_streams(cfg.streams);
  std::map<std::string, std::vector<ScoreStream>> by_video;
  for (const auto& s : streams) by_video[s.video_id].push_back(s);
  for (const auto& [vid, _] : by_video) {
    if (!std::ranges::any_of(gts, [&](const GroundTruth& g) { return g.video_id == vid; })) {
      log << "align: warning: streams for unknown video '" << vid << "' ignored\n";
    }
  }

  const StreamLayout layout = cfg.effective_layout();
  std::vector<std::optional<io::AlignedVideo>> results(gts.size());
  std::vector<std::string> failures(gts.size());
  parallel_for(gts.size(), cfg.threads, [&](std::size_t i) {
    const auto& gt = gts[i];
    try {
      auto it = by_video.find(gt.video_id);
      if (it == by_video.end()) throw ValidationError(gt.video_id + ": no score streams");
      VideoAlignment a = align_video(gt, it->second, layout, cfg.token_ms);
      results[i] = io::AlignedVideo{gt.video_id, gt.clip_duration_ms, cfg.token_ms, layout,
                                    std::move(a.fused)};
    } catch (const ValidationError& e) {
      failures[i] = e.what();
    }
  });

  std::vector<io::AlignedVideo> ok;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    if (results[i]) {
      ok.push_back(std::move(*results[i]));
    } else {
      log << "align: error: " << failures[i] << "\n";
    }
  }
  if (ok.empty() && !gts.empty()) {
    throw ValidationError("align: every video failed to align");
  }
  io::write_aligned(cfg.out, ok);
  log << "align: " << ok.size() << "/" << gts.size() << " videos, " << 2 * layout.size()
      << "-dim frames -> " << cfg.out.string() << "\n";
}

namespace {

std::vector<TrainingExample> load_training_set(const std::vector<io::AlignedVideo>& aligned,
                                               const std::vector<GroundTruth>& gts) {
  const auto gt_index = index_by_video(gts, "ground truth");
  std::vector<TrainingExample> out;
  out.reserve(aligned.size());
  for (const auto& a : aligned) {
    auto it = gt_index.find(a.video_id);
    if (it == gt_index.end()) throw ValidationError("no ground truth for video '" + a.video_id + "'");
    const TokenGrid grid(a.duration_ms, a.token_ms);
    out.push_back({a.frames, rasterize_labels(*it->second, grid)});
  }
  return out;
}

}  // namespace

void cmd_train(const RunConfig& cfg, std::ostream& log) {
  require_path(cfg.aligned, "--aligned");
  require_path(cfg.gt, "--gt");
  require_path(cfg.out, "--out");
  auto aligned = io::read_aligned(cfg.aligned);
  if (aligned.empty()) throw ValidationError("train: no aligned videos in " + cfg.aligned.string());
  std::ranges::sort(aligned, {}, &io::AlignedVideo::video_id);
  for (const auto& a : aligned) {
    if (a.layout != aligned.front().layout) {
      throw ValidationError("train: aligned videos use different stream layouts");
    }
  }
  const auto dataset = load_training_set(aligned, sorted_ground_truth(cfg.gt));
  const TrainResult result = train_fusion(dataset, cfg.train, aligned.front().layout);
  io::write_model(cfg.out, result.model);
  log << "train: " << dataset.size() << " videos, " << cfg.train.total_steps << " steps ("
      << to_string(cfg.train.policy) << "), loss " << format_fraction(result.initial_loss) << " -> "
      << format_fraction(result.final_loss) << " -> " << cfg.out.string() << "\n";
}

void cmd_predict(const RunConfig& cfg, std::ostream& log) {
  require_path(cfg.aligned, "--aligned");
  require_path(cfg.model, "--model");
  require_path(cfg.out, "--out");
  auto aligned = io::read_aligned(cfg.aligned);
  std::ranges::sort(aligned, {}, &io::AlignedVideo::video_id);
  const FusionModel model = io::read_model(cfg.model);

  std::vector<io::TokenScores> scores(aligned.size());
  std::vector<io::Detection> detections(aligned.size());
  parallel_for(aligned.size(), cfg.threads, [&](std::size_t i) {
    const auto& a = aligned[i];
    if (!model.stream_layout.empty() && a.layout != model.stream_layout) {
      throw ValidationError(a.video_id + ": aligned layout does not match the model's stream layout");
    }
    const auto probs = fusion_forward(model, a.frames);
    scores[i] = {a.video_id, a.duration_ms, a.token_ms, fake_scores(probs)};
    detections[i] = {a.video_id, detect_video(scores[i].scores)};
  });
  io::write_token_scores(cfg.out / files::kTokenScores, scores);
  io::write_detections(cfg.out / files::kDetections, detections);
  log << "predict: " << aligned.size() << " videos -> " << cfg.out.string() << "\n";
}

void cmd_localize(const RunConfig& cfg, std::ostream& log) {
  require_path(cfg.scores, "--scores");
  require_path(cfg.out, "--out");
  auto scores = io::read_token_scores(cfg.scores);
  std::ranges::sort(scores, {}, &io::TokenScores::video_id);
  std::vector<io::VideoProposals> out(scores.size());
  parallel_for(scores.size(), cfg.threads, [&](std::size_t i) {
    const TokenGrid grid(scores[i].duration_ms, scores[i].token_ms);
    out[i] = {scores[i].video_id, propose_segments(scores[i].scores, grid, cfg.proposal)};
  });
  std::size_t total = 0;
  for (const auto& v : out) total += v.proposals.size();
  io::write_proposals(cfg.out, out);
  log << "localize: " << total << " proposals over " << out.size() << " videos -> "
      << cfg.out.string() << "\n";
}

std::string render_report_table(const MetricsReport& r) {
  std::ostringstream ss;
  ss << "Detection (%)\n";
  ss << "  AUC (Video) ↑  AUC (Seg) ↑  EER (Seg) ↓\n";
  char line[128];
  std::snprintf(line, sizeof(line), "  %13s  %11s  %11s\n", format_percent(r.auc_video).c_str(),
                format_percent(r.auc_segment).c_str(), format_percent(r.eer).c_str());
  ss << line;
  ss << "Localization (%)  [proposals ranked globally across videos]\n  AP ↑";
  for (const auto& [tau, _] : r.ap) {
    std::ostringstream key;
    key << "@" << tau;
    std::snprintf(line, sizeof(line), " %8s", key.str().c_str());
    ss << line;
  }
  ss << "  |  AR ↑";
  for (auto it = r.ar.rbegin(); it != r.ar.rend(); ++it) {
    std::snprintf(line, sizeof(line), " %7s", ("@" + std::to_string(it->first)).c_str());
    ss << line;
  }
  ss << "\n      ";
  for (const auto& [_, v] : r.ap) {
    std::snprintf(line, sizeof(line), " %8s", format_percent(v).c_str());
    ss << line;
  }
  ss << "  |      ";
  for (auto it = r.ar.rbegin(); it != r.ar.rend(); ++it) {
    std::snprintf(line, sizeof(line), " %7s", format_percent(it->second).c_str());
    ss << line;
  }
  ss << "\n";
  ss << "  videos " << r.num_videos << ", tokens " << r.num_tokens << ", gt segments "
     << r.num_gt_segments << ", EER (fraction) " << format_fraction(r.eer) << "\n";
  return ss.str();
}

MetricsReport cmd_evaluate(const RunConfig& cfg, std::ostream& log) {
  require_path(cfg.gt, "--gt");
  require_path(cfg.scores, "--scores");
  require_path(cfg.proposals, "--proposals");
  require_path(cfg.out, "--out");
  const auto gts = sorted_ground_truth(cfg.gt);
  const auto scores = io::read_token_scores(cfg.scores);
  const auto proposals = io::read_proposals(cfg.proposals);
  const auto score_index = index_by_video(scores, "token score");
  const auto proposal_index = index_by_video(proposals, "proposal");

  std::vector<VideoEvaluation> videos;
  videos.reserve(gts.size());
  for (const auto& gt : gts) {
    auto s = score_index.find(gt.video_id);
    if (s == score_index.end()) {
      log << "evaluate: warning: no scores for video '" << gt.video_id << "', skipped\n";
      continue;
    }
    const TokenGrid grid(s->second->duration_ms, s->second->token_ms);
    VideoEvaluation v;
    v.video_id = gt.video_id;
    v.label = gt.video_label();
    v.video_score = detect_video(s->second->scores);
    v.tokens = {s->second->scores, rasterize_labels(gt, grid)};
    v.localization.video_id = gt.video_id;
    if (auto p = proposal_index.find(gt.video_id); p != proposal_index.end()) {
      v.localization.proposals = p->second->proposals;
    }
    for (const auto& seg : gt.fake_segments) {
      v.localization.ground_truth.push_back({seg.start_ms, seg.end_ms});
    }
    videos.push_back(std::move(v));
  }
  const MetricsReport report = evaluate(videos, cfg.metrics);
  io::write_report(cfg.out, report, cfg.metrics);
  log << render_report_table(report);
  return report;
}

void cmd_trace(const RunConfig& cfg, std::ostream& log) {
  require_path(cfg.gt, "--gt");
  require_path(cfg.streams, "--streams");
  require_path(cfg.model, "--model");
  require_path(cfg.out, "--out");
  if (cfg.video.empty()) throw ValidationError("missing required option --video");
  const auto gts = io::read_ground_truth(cfg.gt);
  auto gt_it = std::ranges::find(gts, cfg.video, &GroundTruth::video_id);
  if (gt_it == gts.end()) throw ValidationError("trace: unknown video '" + cfg.video + "'");
  const GroundTruth& gt = *gt_it;
  std::vector<ScoreStream> streams;
  for (auto& s : io::read_streams(cfg.streams)) {
    if (s.video_id == cfg.video) streams.push_back(std::move(s));
  }
  const FusionModel model = io::read_model(cfg.model);
  const StreamLayout layout =
      model.stream_layout.empty() ? cfg.effective_layout() : model.stream_layout;
  const VideoAlignment a = align_video(gt, streams, layout, cfg.token_ms);
  const auto fused = fake_scores(fusion_forward(model, a.fused));

  // The LMM stream is informative for plots even when it is not fused.
  std::optional<AlignedStream> lmm;
  if (std::ranges::find(layout, std::string("lmm")) == layout.end() &&
      std::ranges::any_of(streams, [](const ScoreStream& s) { return s.branch == Branch::kLmmSparse; })) {
    lmm = align_branch(gt, streams, "lmm", a.grid);
  }

  const auto all = rasterize_labels(gt, a.grid);
  const auto visual = rasterize_labels(segments_affecting(gt, Modality::kVisual), a.grid);
  const auto audio = rasterize_labels(segments_affecting(gt, Modality::kAudio), a.grid);
  auto p_fake = [](const Logits& l) { return 1.0 / (1.0 + std::exp(l[0] - l[1])); };

  std::ostringstream csv;
  for (const auto& seg : gt.fake_segments) {
    csv << "# segment," << seg.start_ms << "," << seg.end_ms << "," << to_string(seg.modality) << "\n";
  }
  csv << "token,start_ms,end_ms,gt_fake,gt_visual,gt_audio";
  for (const auto& s : a.streams) csv << "," << s.name;
  if (lmm) csv << ",lmm";
  csv << ",fused\n";
  char buf[64];
  for (std::size_t t = 0; t < a.grid.num_tokens(); ++t) {
    csv << t << "," << a.grid.token_start_ms(t) << ","
        << std::min(a.grid.token_end_ms(t), a.grid.clip_duration_ms()) << "," << int(all[t]) << ","
        << int(visual[t]) << "," << int(audio[t]);
    for (const auto& s : a.streams) {
      std::snprintf(buf, sizeof(buf), ",%.6f", p_fake(s.values[t]));
      csv << buf;
    }
    if (lmm) {
      std::snprintf(buf, sizeof(buf), ",%.6f", p_fake(lmm->values[t]));
      csv << buf;
    }
    std::snprintf(buf, sizeof(buf), ",%.6f\n", fused[t]);
    csv << buf;
  }
  io::write_text(cfg.out, csv.str());
  log << "trace: " << gt.video_id << " (" << to_string(scenario_of(gt)) << "), "
      << a.grid.num_tokens() << " tokens -> " << cfg.out.string() << "\n";
}

MetricsReport cmd_run(const RunConfig& cfg, std::ostream& log) {
  require_path(cfg.out, "--out");
  RunConfig step = cfg;
  if (cfg.gt.empty() || cfg.streams.empty()) {
    cmd_synth(step, log);
    step.gt = cfg.out / files::kGroundTruth;
    step.streams = cfg.out / files::kStreams;
  }
  step.out = cfg.out / files::kAligned;
  cmd_align(step, log);

  step.aligned = cfg.out / files::kAligned;
  step.out = cfg.out / files::kModel;
  cmd_train(step, log);

  step.model = cfg.out / files::kModel;
  step.out = cfg.out;
  cmd_predict(step, log);

  step.scores = cfg.out / files::kTokenScores;
  step.out = cfg.out / files::kProposals;
  cmd_localize(step, log);

  step.proposals = cfg.out / files::kProposals;
  step.out = cfg.out / files::kReport;
  return cmd_evaluate(step, log);
}

}  // namespace avfuse
