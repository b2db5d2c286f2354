#include "avfuse/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "avfuse/error.hpp"

namespace avfuse::io {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string read_text(const Path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error while reading '" + path.string() + "'");
  return ss.str();
}

void write_text(const Path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("error while writing '" + path.string() + "'");
}

namespace {

// Wraps a per-record parse so schema errors carry file and line.
template <typename Fn>
void for_each_line(const Path& path, Fn&& fn) {
  const std::string text = read_text(path);
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

json parse_document(const Path& path) {
  const std::string text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

template <typename T>
void write_lines(const Path& path, std::span<const T> records, ojson (*encode)(const T&)) {
  std::string out;
  for (const auto& r : records) {
    out += encode(r).dump();
    out += '\n';
  }
  write_text(path, out);
}

const json& field(const json& j, const char* key) {
  if (!j.is_object()) throw ValidationError("record is not a JSON object");
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(std::string("missing field '") + key + "'");
  return *it;
}

double finite_number(const json& j, const char* what) {
  if (!j.is_number()) throw ValidationError(std::string(what) + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ValidationError(std::string(what) + " must be finite");
  return v;
}

std::int64_t integer(const json& j, const char* what) {
  if (!j.is_number_integer()) throw ValidationError(std::string(what) + " must be an integer");
  return j.get<std::int64_t>();
}

std::string string_field(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_string()) throw ValidationError(std::string("'") + key + "' must be a string");
  return v.get<std::string>();
}

ojson encode_gt(const GroundTruth& gt) {
  ojson segs = ojson::array();
  for (const auto& s : gt.fake_segments) {
    segs.push_back({{"start_ms", s.start_ms}, {"end_ms", s.end_ms},
                    {"modality", std::string(to_string(s.modality))}});
  }
  ojson j;
  j["video_id"] = gt.video_id;
  j["fps"] = gt.fps;
  j["duration_ms"] = gt.clip_duration_ms;
  j["fake_segments"] = std::move(segs);
  return j;
}

ojson encode_stream(const ScoreStream& s) {
  ojson j;
  j["video_id"] = s.video_id;
  j["branch"] = std::string(to_string(s.branch));
  switch (s.branch) {
    case Branch::kAudio:
      j["resolution_ms"] = s.resolution_ms;
      break;
    case Branch::kVisualWindow:
      j["window_len_frames"] = s.window_len_frames;
      break;
    case Branch::kLmmSparse:
      j["sparse_stride_frames"] = s.sparse_stride_frames;
      break;
  }
  ojson scores = ojson::array();
  for (const auto& v : s.scores) scores.push_back({v[0], v[1]});
  j["scores"] = std::move(scores);
  return j;
}

ojson encode_aligned(const AlignedVideo& a) {
  ojson j;
  j["video_id"] = a.video_id;
  j["duration_ms"] = a.duration_ms;
  j["token_ms"] = a.token_ms;
  j["layout"] = a.layout;
  ojson frames = ojson::array();
  for (std::size_t t = 0; t < a.frames.num_tokens(); ++t) {
    const auto row = a.frames.row(t);
    frames.push_back(std::vector<double>(row.begin(), row.end()));
  }
  j["frames"] = std::move(frames);
  return j;
}

ojson encode_token_scores(const TokenScores& t) {
  ojson j;
  j["video_id"] = t.video_id;
  j["duration_ms"] = t.duration_ms;
  j["token_ms"] = t.token_ms;
  j["scores"] = t.scores;
  return j;
}

ojson encode_detection(const Detection& d) {
  ojson j;
  j["video_id"] = d.video_id;
  j["score"] = d.score;
  return j;
}

ojson encode_proposals(const VideoProposals& v) {
  ojson props = ojson::array();
  for (const auto& p : v.proposals) {
    props.push_back({{"start_ms", p.start_ms}, {"end_ms", p.end_ms}, {"confidence", p.confidence}});
  }
  ojson j;
  j["video_id"] = v.video_id;
  j["proposals"] = std::move(props);
  return j;
}

}  // namespace

std::vector<GroundTruth> read_ground_truth(const Path& path) {
  std::vector<GroundTruth> out;
  for_each_line(path, [&](const json& j) {
    GroundTruth gt;
    gt.video_id = string_field(j, "video_id");
    gt.fps = j.contains("fps") ? finite_number(j["fps"], "fps") : kDefaultFps;
    gt.clip_duration_ms = integer(field(j, "duration_ms"), "duration_ms");
    const json& segs = field(j, "fake_segments");
    if (!segs.is_array()) throw ValidationError("'fake_segments' must be an array");
    for (const auto& s : segs) {
      gt.fake_segments.push_back({integer(field(s, "start_ms"), "start_ms"),
                                  integer(field(s, "end_ms"), "end_ms"),
                                  modality_from_string(string_field(s, "modality"))});
    }
    gt.validate();
    out.push_back(std::move(gt));
  });
  return out;
}

void write_ground_truth(const Path& path, std::span<const GroundTruth> records) {
  write_lines<GroundTruth>(path, records, &encode_gt);
}

std::vector<ScoreStream> read_streams(const Path& path) {
  std::vector<ScoreStream> out;
  for_each_line(path, [&](const json& j) {
    ScoreStream s;
    s.video_id = string_field(j, "video_id");
    s.branch = branch_from_string(string_field(j, "branch"));
    switch (s.branch) {
      case Branch::kAudio:
        s.resolution_ms = static_cast<int>(integer(field(j, "resolution_ms"), "resolution_ms"));
        break;
      case Branch::kVisualWindow:
        if (j.contains("window_len_frames")) {
          s.window_len_frames = static_cast<int>(integer(j["window_len_frames"], "window_len_frames"));
        }
        break;
      case Branch::kLmmSparse:
        if (j.contains("sparse_stride_frames")) {
          s.sparse_stride_frames =
              static_cast<int>(integer(j["sparse_stride_frames"], "sparse_stride_frames"));
        }
        break;
    }
    const json& scores = field(j, "scores");
    if (!scores.is_array()) throw ValidationError("'scores' must be an array");
    for (const auto& v : scores) {
      if (!v.is_array() || v.size() != 2) {
        throw ValidationError("every score entry must be a [real, fake] pair");
      }
      s.scores.push_back({finite_number(v[0], "score"), finite_number(v[1], "score")});
    }
    s.validate();
    out.push_back(std::move(s));
  });
  return out;
}

void write_streams(const Path& path, std::span<const ScoreStream> records) {
  write_lines<ScoreStream>(path, records, &encode_stream);
}

std::vector<AlignedVideo> read_aligned(const Path& path) {
  std::vector<AlignedVideo> out;
  for_each_line(path, [&](const json& j) {
    AlignedVideo a;
    a.video_id = string_field(j, "video_id");
    a.duration_ms = integer(field(j, "duration_ms"), "duration_ms");
    a.token_ms = integer(field(j, "token_ms"), "token_ms");
    a.layout = field(j, "layout").get<StreamLayout>();
    const json& frames = field(j, "frames");
    if (!frames.is_array() || frames.empty()) throw ValidationError("'frames' must be a non-empty array");
    const std::size_t dim = frames.front().size();
    if (dim != 2 * a.layout.size()) {
      throw ValidationError("frame dimension " + std::to_string(dim) + " does not match layout");
    }
    std::vector<double> data;
    data.reserve(frames.size() * dim);
    for (const auto& row : frames) {
      if (!row.is_array() || row.size() != dim) throw ValidationError("ragged fused frames");
      for (const auto& v : row) data.push_back(finite_number(v, "frame value"));
    }
    a.frames = FusedFrames(dim, std::move(data));
    if (a.frames.num_tokens() != TokenGrid(a.duration_ms, a.token_ms).num_tokens()) {
      throw ValidationError("frame count does not match duration_ms / token_ms");
    }
    out.push_back(std::move(a));
  });
  return out;
}

void write_aligned(const Path& path, std::span<const AlignedVideo> records) {
  write_lines<AlignedVideo>(path, records, &encode_aligned);
}

FusionModel read_model(const Path& path) {
  const json j = parse_document(path);
  try {
    FusionModel m;
    m.input_dim = static_cast<std::size_t>(integer(field(j, "input_dim"), "input_dim"));
    const json& w = field(j, "weights");
    if (!w.is_array() || w.size() != 2) throw ValidationError("'weights' must have two rows");
    for (const auto& row : w) {
      if (!row.is_array() || row.size() != m.input_dim) {
        throw ValidationError("weight row length must equal input_dim");
      }
      for (const auto& v : row) m.weights.push_back(finite_number(v, "weight"));
    }
    const json& b = field(j, "bias");
    if (!b.is_array() || b.size() != 2) throw ValidationError("'bias' must have two entries");
    m.bias = {finite_number(b[0], "bias"), finite_number(b[1], "bias")};
    if (j.contains("stream_layout")) m.stream_layout = j["stream_layout"].get<StreamLayout>();
    if (j.contains("seed")) m.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("schedule")) {
      const json& s = j["schedule"];
      TrainConfig& c = m.schedule;
      c.policy = lr_policy_from_string(s.value("policy", "one_cycle"));
      c.total_steps = s.value("total_steps", c.total_steps);
      c.max_lr = s.value("max_lr", c.max_lr);
      c.pct_start = s.value("pct_start", c.pct_start);
      c.div_factor = s.value("div_factor", c.div_factor);
      c.final_div_factor = s.value("final_div_factor", c.final_div_factor);
      c.anneal = anneal_from_string(s.value("anneal", "cosine"));
      c.momentum = s.value("momentum", c.momentum);
      c.weight_decay = s.value("weight_decay", c.weight_decay);
      c.positive_class_weight = s.value("positive_class_weight", c.positive_class_weight);
      c.batch_videos = s.value("batch_videos", c.batch_videos);
      c.seed = m.seed;
    }
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_model(const Path& path, const FusionModel& model) {
  model.validate();
  ojson j;
  j["input_dim"] = model.input_dim;
  ojson rows = ojson::array();
  for (std::size_t c = 0; c < 2; ++c) {
    rows.push_back(std::vector<double>(model.weights.begin() + static_cast<std::ptrdiff_t>(c * model.input_dim),
                                       model.weights.begin() + static_cast<std::ptrdiff_t>((c + 1) * model.input_dim)));
  }
  j["weights"] = std::move(rows);
  j["bias"] = {model.bias[0], model.bias[1]};
  j["stream_layout"] = model.stream_layout;
  j["seed"] = model.seed;
  const TrainConfig& c = model.schedule;
  ojson s;
  s["policy"] = std::string(to_string(c.policy));
  s["total_steps"] = c.total_steps;
  s["max_lr"] = c.max_lr;
  s["pct_start"] = c.pct_start;
  s["div_factor"] = c.div_factor;
  s["final_div_factor"] = c.final_div_factor;
  s["anneal"] = std::string(to_string(c.anneal));
  s["optimizer"] = "sgd_momentum";
  s["momentum"] = c.momentum;
  s["weight_decay"] = c.weight_decay;
  s["positive_class_weight"] = c.positive_class_weight;
  s["batch_videos"] = c.batch_videos;
  j["schedule"] = std::move(s);
  write_text(path, j.dump(2) + "\n");
}

std::vector<TokenScores> read_token_scores(const Path& path) {
  std::vector<TokenScores> out;
  for_each_line(path, [&](const json& j) {
    TokenScores t;
    t.video_id = string_field(j, "video_id");
    t.duration_ms = integer(field(j, "duration_ms"), "duration_ms");
    t.token_ms = integer(field(j, "token_ms"), "token_ms");
    const json& s = field(j, "scores");
    if (!s.is_array()) throw ValidationError("'scores' must be an array");
    for (const auto& v : s) t.scores.push_back(finite_number(v, "score"));
    if (t.scores.size() != TokenGrid(t.duration_ms, t.token_ms).num_tokens()) {
      throw ValidationError("score count does not match duration_ms / token_ms");
    }
    out.push_back(std::move(t));
  });
  return out;
}

void write_token_scores(const Path& path, std::span<const TokenScores> records) {
  write_lines<TokenScores>(path, records, &encode_token_scores);
}

std::vector<Detection> read_detections(const Path& path) {
  std::vector<Detection> out;
  for_each_line(path, [&](const json& j) {
    out.push_back({string_field(j, "video_id"), finite_number(field(j, "score"), "score")});
  });
  return out;
}

void write_detections(const Path& path, std::span<const Detection> records) {
  write_lines<Detection>(path, records, &encode_detection);
}

std::vector<VideoProposals> read_proposals(const Path& path) {
  std::vector<VideoProposals> out;
  for_each_line(path, [&](const json& j) {
    VideoProposals v;
    v.video_id = string_field(j, "video_id");
    const json& props = field(j, "proposals");
    if (!props.is_array()) throw ValidationError("'proposals' must be an array");
    for (const auto& p : props) {
      Proposal q{integer(field(p, "start_ms"), "start_ms"), integer(field(p, "end_ms"), "end_ms"),
                 finite_number(field(p, "confidence"), "confidence")};
      if (q.start_ms >= q.end_ms) throw ValidationError("proposal with start_ms >= end_ms");
      v.proposals.push_back(q);
    }
    out.push_back(std::move(v));
  });
  return out;
}

void write_proposals(const Path& path, std::span<const VideoProposals> records) {
  write_lines<VideoProposals>(path, records, &encode_proposals);
}

void write_scenario_config(const Path& path, const ScenarioConfig& cfg) {
  ojson j;
  j["num_videos"] = cfg.num_videos;
  j["duration_min_ms"] = cfg.duration_min_ms;
  j["duration_max_ms"] = cfg.duration_max_ms;
  j["fake_duration_mean_ms"] = cfg.fake_duration_mean_ms;
  j["fake_duration_log_sigma"] = cfg.fake_duration_log_sigma;
  j["fake_min_ms"] = cfg.fake_min_ms;
  j["fake_max_ms"] = cfg.fake_max_ms;
  j["fakes_min"] = cfg.fakes_min;
  j["fakes_max"] = cfg.fakes_max;
  j["min_gap_ms"] = cfg.min_gap_ms;
  j["scenario_mix"] = {{"RVRA", cfg.scenario_mix[0]},
                       {"FVRA", cfg.scenario_mix[1]},
                       {"RVFA", cfg.scenario_mix[2]},
                       {"FVFA", cfg.scenario_mix[3]}};
  j["noise_sigma"] = cfg.noise_sigma;
  j["miss_prob"] = cfg.miss_prob;
  j["logit_high"] = cfg.logit_high;
  j["logit_low"] = cfg.logit_low;
  j["fps"] = cfg.fps;
  j["window_len_frames"] = cfg.window_len_frames;
  j["sparse_stride_frames"] = cfg.sparse_stride_frames;
  j["audio_resolutions"] = cfg.audio_resolutions;
  j["seed"] = cfg.seed;
  write_text(path, j.dump(2) + "\n");
}

ScenarioConfig read_scenario_config(const Path& path) {
  const json j = parse_document(path);
  ScenarioConfig c;
  try {
    c.num_videos = j.value("num_videos", c.num_videos);
    c.duration_min_ms = j.value("duration_min_ms", c.duration_min_ms);
    c.duration_max_ms = j.value("duration_max_ms", c.duration_max_ms);
    c.fake_duration_mean_ms = j.value("fake_duration_mean_ms", c.fake_duration_mean_ms);
    c.fake_duration_log_sigma = j.value("fake_duration_log_sigma", c.fake_duration_log_sigma);
    c.fake_min_ms = j.value("fake_min_ms", c.fake_min_ms);
    c.fake_max_ms = j.value("fake_max_ms", c.fake_max_ms);
    c.fakes_min = j.value("fakes_min", c.fakes_min);
    c.fakes_max = j.value("fakes_max", c.fakes_max);
    c.min_gap_ms = j.value("min_gap_ms", c.min_gap_ms);
    if (j.contains("scenario_mix")) {
      const json& m = j["scenario_mix"];
      c.scenario_mix = {m.value("RVRA", 0.0), m.value("FVRA", 0.0), m.value("RVFA", 0.0),
                        m.value("FVFA", 0.0)};
    }
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    c.miss_prob = j.value("miss_prob", c.miss_prob);
    c.logit_high = j.value("logit_high", c.logit_high);
    c.logit_low = j.value("logit_low", c.logit_low);
    c.fps = j.value("fps", c.fps);
    c.window_len_frames = j.value("window_len_frames", c.window_len_frames);
    c.sparse_stride_frames = j.value("sparse_stride_frames", c.sparse_stride_frames);
    c.audio_resolutions = j.value("audio_resolutions", c.audio_resolutions);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  c.validate();
  return c;
}

namespace {

std::string threshold_key(double tau) {
  std::ostringstream ss;
  ss << tau;
  return ss.str();
}

}  // namespace

void write_report(const Path& path, const MetricsReport& report, const MetricsConfig& cfg) {
  ojson j;
  j["auc_video"] = report.auc_video;
  j["auc_segment"] = report.auc_segment;
  j["eer"] = report.eer;
  ojson ap = ojson::object();
  for (const auto& [tau, v] : report.ap) ap[threshold_key(tau)] = v;
  j["ap"] = std::move(ap);
  ojson ar = ojson::object();
  for (const auto& [n, v] : report.ar) ar[std::to_string(n)] = v;
  j["ar"] = std::move(ar);
  j["num_videos"] = report.num_videos;
  j["num_tokens"] = report.num_tokens;
  j["num_gt_segments"] = report.num_gt_segments;
  ojson config;
  config["ap_iou_thresholds"] = cfg.ap_iou_thresholds;
  config["ar_budgets"] = cfg.ar_budgets;
  config["ar_iou_grid"] = cfg.ar_iou_grid;
  config["proposal_ranking"] = "global";
  config["segment_auc"] = "pooled_tokens";
  config["eer"] = "segment_level_rocch";
  j["config"] = std::move(config);
  write_text(path, j.dump(2) + "\n");
}

MetricsReport read_report(const Path& path) {
  const json j = parse_document(path);
  MetricsReport r;
  try {
    r.auc_video = field(j, "auc_video").get<double>();
    r.auc_segment = field(j, "auc_segment").get<double>();
    r.eer = field(j, "eer").get<double>();
    for (const auto& [k, v] : field(j, "ap").items()) r.ap[std::stod(k)] = v.get<double>();
    for (const auto& [k, v] : field(j, "ar").items()) r.ar[std::stoi(k)] = v.get<double>();
    r.num_videos = j.value("num_videos", std::size_t{0});
    r.num_tokens = j.value("num_tokens", std::size_t{0});
    r.num_gt_segments = j.value("num_gt_segments", std::size_t{0});
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return r;
}

}  // namespace avfuse::io
