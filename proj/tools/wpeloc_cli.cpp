// Batch front-end for the wpeloc library: scene simulation, model training,
// diarization, DER evaluation, and window/shift sweeps. All commands are
// deterministic given their inputs and the config seed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wpeloc/wpeloc.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  in >> j;
  return j;
}

// configs must carry a seed so every run is pinned to a reproducible setup
std::uint64_t require_seed(const json& j, const std::string& what) {
  if (!j.contains("seed")) throw std::runtime_error(what + ": missing required field \"seed\"");
  return j.at("seed").get<std::uint64_t>();
}

wpeloc::WpeConfig parse_wpe_config(const json& j) {
  wpeloc::WpeConfig cfg;
  if (j.contains("taps")) cfg.taps = j.at("taps").get<int>();
  if (j.contains("delay")) cfg.delay = j.at("delay").get<int>();
  if (j.contains("iterations")) cfg.iterations = j.at("iterations").get<int>();
  if (j.contains("power_floor")) cfg.power_floor = j.at("power_floor").get<double>();
  cfg.validate();
  return cfg;
}

wpeloc::Window parse_window_kind(const std::string& name) {
  if (name == "rect") return wpeloc::Window::Rect;
  if (name == "hann") return wpeloc::Window::Hann;
  if (name == "sqrt_hann") return wpeloc::Window::SqrtHann;
  throw std::runtime_error("unknown stft window kind: " + name);
}

wpeloc::DiarizeConfig parse_diarize_config(const json& j) {
  wpeloc::DiarizeConfig cfg;
  if (j.contains("window")) cfg.window = j.at("window").get<double>();
  if (j.contains("shift")) cfg.shift = j.at("shift").get<double>();
  if (j.contains("chunk_len") && !j.at("chunk_len").is_null())
    cfg.chunk_len = j.at("chunk_len").get<double>();
  if (j.contains("n_fft")) cfg.n_fft = j.at("n_fft").get<int>();
  if (j.contains("hop")) cfg.hop = j.at("hop").get<int>();
  if (j.contains("window_kind")) cfg.window_kind = parse_window_kind(j.at("window_kind").get<std::string>());
  const std::string mode = j.value("mode", "threshold");
  if (mode == "threshold") {
    cfg.cluster = wpeloc::ClusterMode::with_threshold(j.value("threshold", 0.0));
  } else if (mode == "known_count") {
    cfg.cluster = wpeloc::ClusterMode::known_count(j.at("num_speakers").get<int>());
  } else {
    throw std::runtime_error("unknown cluster mode: " + mode);
  }
  cfg.validate();
  return cfg;
}

std::array<double, 3> parse_position(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw std::runtime_error(what + ": expected [x,y,z]");
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

wpeloc::RoomSpec parse_room(const json& j) {
  wpeloc::RoomSpec room;
  room.dims = parse_position(j.at("dims"), "room.dims");
  if (j.contains("rt60") && !j.at("rt60").is_null()) room.rt60 = j.at("rt60").get<double>();
  if (j.contains("reflection") && !j.at("reflection").is_null()) {
    const auto& r = j.at("reflection");
    if (!r.is_array() || r.size() != 6)
      throw std::runtime_error("room.reflection: expected 6 wall coefficients");
    std::array<double, 6> betas{};
    for (std::size_t i = 0; i < 6; ++i) betas[i] = r.at(i).get<double>();
    room.reflection = betas;
  }
  if (j.contains("speed_of_sound")) room.speed_of_sound = j.at("speed_of_sound").get<double>();
  if (j.contains("sample_rate")) room.sample_rate = j.at("sample_rate").get<double>();
  room.validate();
  return room;
}

// WAV segment loading shared by train; whole files are cached because pair
// manifests typically reference few files many times.
class WavCache {
 public:
  const wpeloc::WavData& get(const std::string& path) {
    auto it = cache_.find(path);
    if (it == cache_.end()) it = cache_.emplace(path, wpeloc::read_wav(path)).first;
    return it->second;
  }

 private:
  std::map<std::string, wpeloc::WavData> cache_;
};

std::vector<double> cut_segment(const wpeloc::WavData& wav, double begin, double end) {
  const auto lo = static_cast<std::size_t>(std::llround(begin * wav.sample_rate));
  const auto hi =
      std::min(wav.samples.size(), static_cast<std::size_t>(std::llround(end * wav.sample_rate)));
  if (hi <= lo) throw std::runtime_error("segment too short");
  return {wav.samples.begin() + lo, wav.samples.begin() + hi};
}

std::string resolve_relative(const std::string& base_file, const std::string& path) {
  const fs::path p(path);
  if (p.is_absolute()) return path;
  return (fs::path(base_file).parent_path() / p).string();
}

int run_simulate(const std::string& scene_path, const std::string& out_dir) {
  const json scene = read_json_file(scene_path);
  require_seed(scene, "scene");
  const std::string recording = scene.at("recording").get<std::string>();
  const wpeloc::RoomSpec room = parse_room(scene.at("room"));
  const auto mic = parse_position(scene.at("mic"), "mic");
  const std::string mode_name = scene.value("mode", "concat");
  wpeloc::RenderMode mode;
  if (mode_name == "concat")
    mode = wpeloc::RenderMode::Concat;
  else if (mode_name == "mix")
    mode = wpeloc::RenderMode::Mix;
  else
    throw std::runtime_error("unknown render mode: " + mode_name);
  const int max_order = scene.value("max_order", -1);

  std::vector<wpeloc::SceneSource> sources;
  for (const auto& s : scene.at("sources")) {
    wpeloc::SceneSource src;
    const wpeloc::WavData wav = wpeloc::read_wav(resolve_relative(scene_path, s.at("wav").get<std::string>()));
    if (wav.sample_rate != room.sample_rate)
      throw std::runtime_error("source sample rate does not match the room");
    src.signal = wav.samples;
    src.position = parse_position(s.at("position"), "source.position");
    src.label = s.at("label").get<std::string>();
    src.onset = s.value("onset", 0.0);
    sources.push_back(std::move(src));
  }

  const wpeloc::RenderResult result = wpeloc::render_scene(sources, room, mic, mode, max_order);
  fs::create_directories(out_dir);
  const fs::path wav_path = fs::path(out_dir) / (recording + ".wav");
  const fs::path rttm_path = fs::path(out_dir) / (recording + ".rttm");
  wpeloc::write_wav(wav_path.string(), result.signal, result.sample_rate, wpeloc::WavFormat::Float32);
  wpeloc::write_rttm(rttm_path.string(), recording, result.timeline);
  std::cout << "wrote " << wav_path.string() << " (" << result.signal.size() << " samples) and "
            << rttm_path.string() << " (" << result.timeline.size() << " segments)\n";
  return 0;
}

int run_train(const std::string& manifest_path, const std::string& out_model) {
  const json manifest = read_json_file(manifest_path);
  require_seed(manifest, "pairs manifest");
  const int delay_bins = manifest.value("delay_bins", 256);
  const int n_fft = manifest.contains("stft") ? manifest.at("stft").value("n_fft", 256) : 256;
  const int hop = manifest.contains("stft") ? manifest.at("stft").value("hop", 128) : 128;
  const wpeloc::WpeConfig wpe_cfg =
      manifest.contains("wpe") ? parse_wpe_config(manifest.at("wpe")) : wpeloc::WpeConfig{};
  const wpeloc::AlphaNorm norm = manifest.value("alpha_norm", "normalized") == std::string("verbatim")
                                     ? wpeloc::AlphaNorm::Verbatim
                                     : wpeloc::AlphaNorm::Normalized;

  WavCache cache;
  auto filter_of = [&](const json& side) {
    const wpeloc::WavData& wav = cache.get(resolve_relative(manifest_path, side.at("wav").get<std::string>()));
    const std::vector<double> cut =
        cut_segment(wav, side.at("begin").get<double>(), side.at("end").get<double>());
    const wpeloc::Spectrogram spec =
        wpeloc::stft(cut, n_fft, hop, wpeloc::Window::SqrtHann, wav.sample_rate);
    return wpeloc::estimate_wpe(spec, wpe_cfg).filter;
  };

  std::vector<std::pair<wpeloc::WpeFilter, wpeloc::WpeFilter>> same, diff;
  for (const auto& pair : manifest.at("pairs")) {
    const std::string label = pair.at("label").get<std::string>();
    auto filters = std::make_pair(filter_of(pair.at("a")), filter_of(pair.at("b")));
    if (label == "same")
      same.push_back(std::move(filters));
    else if (label == "diff")
      diff.push_back(std::move(filters));
    else
      throw std::runtime_error("pair label must be \"same\" or \"diff\", got: " + label);
  }

  const wpeloc::ScoreModel model = wpeloc::train_model(same, diff, delay_bins, norm);
  wpeloc::save_score_model(out_model, model);
  std::cout << "trained on " << same.size() << " same / " << diff.size() << " diff pairs; wrote "
            << out_model << "\n";
  return 0;
}

struct Experiment {
  std::string audio_dir;
  std::string rttm_dir;
  std::string model_path;
  std::string out_dir;
  wpeloc::DiarizeConfig diarize;
  wpeloc::WpeConfig wpe;
  std::uint64_t seed{0};
};

Experiment parse_experiment(const std::string& path) {
  const json j = read_json_file(path);
  Experiment exp;
  exp.seed = require_seed(j, "experiment config");
  exp.audio_dir = resolve_relative(path, j.at("audio_dir").get<std::string>());
  exp.rttm_dir = resolve_relative(path, j.at("rttm_dir").get<std::string>());
  exp.model_path = resolve_relative(path, j.at("model").get<std::string>());
  exp.out_dir = resolve_relative(path, j.value("out_dir", "hyp"));
  if (j.contains("diarize")) exp.diarize = parse_diarize_config(j.at("diarize"));
  if (j.contains("wpe")) exp.wpe = parse_wpe_config(j.at("wpe"));
  return exp;
}

std::vector<std::string> list_recordings(const std::string& audio_dir) {
  std::vector<std::string> ids;
  if (!fs::is_directory(audio_dir)) throw std::runtime_error("audio dir not found: " + audio_dir);
  for (const auto& entry : fs::directory_iterator(audio_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".wav")
      ids.push_back(entry.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  if (ids.empty()) throw std::runtime_error("no .wav recordings in " + audio_dir);
  return ids;
}

wpeloc::Timeline reference_for(const Experiment& exp, const std::string& id) {
  const fs::path rttm_path = fs::path(exp.rttm_dir) / (id + ".rttm");
  const auto by_rec = wpeloc::read_rttm(rttm_path.string());
  const auto it = by_rec.find(id);
  if (it == by_rec.end())
    throw std::runtime_error("reference rttm " + rttm_path.string() + " has no recording \"" + id + "\"");
  return it->second;
}

int run_diarize(const Experiment& exp) {
  const wpeloc::ScoreModel model = wpeloc::load_score_model(exp.model_path);
  fs::create_directories(exp.out_dir);
  for (const std::string& id : list_recordings(exp.audio_dir)) {
    const wpeloc::WavData wav = wpeloc::read_wav((fs::path(exp.audio_dir) / (id + ".wav")).string());
    const wpeloc::Timeline speech = reference_for(exp, id);
    wpeloc::DiarizeReport report;
    const wpeloc::Timeline hyp =
        wpeloc::diarize(wav.samples, speech, exp.diarize, exp.wpe, model, wav.sample_rate, &report);
    if (hyp.empty()) std::cerr << "warning: " << id << " produced no usable windows\n";
    wpeloc::write_rttm((fs::path(exp.out_dir) / (id + ".rttm")).string(), id, hyp);
    std::cout << id << ": " << report.windows << " windows, " << report.chunks << " chunk(s), "
              << report.score_failures << " scoring fallback(s)\n";
  }
  return 0;
}

int run_eval(const std::string& ref_path, const std::string& hyp_path, const std::string& out_csv) {
  const auto ref = wpeloc::read_rttm(ref_path);
  const auto hyp = wpeloc::read_rttm(hyp_path);
  if (ref.empty()) throw std::runtime_error("nothing to score");

  std::vector<wpeloc::DerRow> rows;
  wpeloc::DerBreakdown total;
  for (const auto& [id, ref_tl] : ref) {
    const auto it = hyp.find(id);
    const wpeloc::Timeline hyp_tl = it == hyp.end() ? wpeloc::Timeline{} : it->second;
    const wpeloc::DerBreakdown b = wpeloc::der(ref_tl, hyp_tl);
    rows.push_back({id, b});
    total.miss += b.miss;
    total.false_alarm += b.false_alarm;
    total.confusion += b.confusion;
    total.total_speech += b.total_speech;
  }

  char buf[200];
  std::printf("%-24s %10s %10s %10s %8s\n", "recording", "miss", "fa", "conf", "der");
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%-24s %10.3f %10.3f %10.3f %8.4f", row.recording.c_str(),
                  row.breakdown.miss, row.breakdown.false_alarm, row.breakdown.confusion,
                  row.breakdown.der());
    std::cout << buf << "\n";
  }
  std::snprintf(buf, sizeof(buf), "%-24s %10.3f %10.3f %10.3f %8.4f", "TOTAL", total.miss,
                total.false_alarm, total.confusion, total.der());
  std::cout << buf << "\n";

  if (!out_csv.empty()) {
    std::ofstream out(out_csv);
    if (!out) throw std::runtime_error("cannot write " + out_csv);
    wpeloc::write_der_csv(out, rows);
  }
  return 0;
}

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stod(tok));
  }
  if (out.empty()) throw std::runtime_error("empty value list: " + csv);
  return out;
}

// One full diarize+eval pass over all recordings; returns the aggregate DER.
double sweep_cell(const Experiment& exp, const wpeloc::ScoreModel& model) {
  wpeloc::DerBreakdown total;
  for (const std::string& id : list_recordings(exp.audio_dir)) {
    const wpeloc::WavData wav = wpeloc::read_wav((fs::path(exp.audio_dir) / (id + ".wav")).string());
    const wpeloc::Timeline speech = reference_for(exp, id);
    const wpeloc::Timeline hyp =
        wpeloc::diarize(wav.samples, speech, exp.diarize, exp.wpe, model, wav.sample_rate);
    const wpeloc::DerBreakdown b = wpeloc::der(speech, hyp);
    total.miss += b.miss;
    total.false_alarm += b.false_alarm;
    total.confusion += b.confusion;
    total.total_speech += b.total_speech;
  }
  return total.der();
}

int run_sweep(Experiment exp, const std::string& windows_csv, const std::string& shifts_csv,
              const std::string& out_csv) {
  const std::vector<double> windows = parse_double_list(windows_csv);
  const std::vector<double> shifts = parse_double_list(shifts_csv);
  const wpeloc::ScoreModel model = wpeloc::load_score_model(exp.model_path);

  std::ostringstream csv;
  csv << "window,shift,der\n";
  char buf[96];
  for (const double w : windows) {
    for (const double s : shifts) {
      std::string cell = "nan";
      if (s > 0.0 && s <= w) {
        exp.diarize.window = w;
        exp.diarize.shift = s;
        std::snprintf(buf, sizeof(buf), "%.6f", sweep_cell(exp, model));
        cell = buf;
      }
      std::snprintf(buf, sizeof(buf), "%.3f,%.3f,", w, s);
      csv << buf << cell << "\n";
    }
  }
  std::cout << csv.str();
  if (!out_csv.empty()) {
    std::ofstream out(out_csv);
    if (!out) throw std::runtime_error("cannot write " + out_csv);
    out << csv.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"WPE-filter spatial diarization pipeline"};
  app.require_subcommand(1);

  std::string scene_path, out_dir = "out";
  CLI::App* sim = app.add_subcommand("simulate", "Render a scene JSON to WAV + reference RTTM");
  sim->add_option("--scene", scene_path, "scene JSON")->required();
  sim->add_option("--out", out_dir, "output directory");

  std::string manifest_path, model_out = "model.json";
  CLI::App* train = app.add_subcommand("train", "Fit a score model from a labeled pairs manifest");
  train->add_option("--pairs", manifest_path, "pairs manifest JSON")->required();
  train->add_option("--out", model_out, "output model JSON");

  std::string config_path, diar_out;
  double chunk_len = -1.0, threshold = 0.0;
  int num_speakers = 0;
  std::uint64_t seed_override = 0;
  CLI::App* diar = app.add_subcommand("diarize", "Diarize every recording in the config's audio dir");
  diar->add_option("--config", config_path, "experiment config JSON")->required();
  diar->add_option("--chunk-len", chunk_len, "chunk length in seconds (0 disables chunking)");
  auto* thr_opt = diar->add_option("--threshold", threshold, "cluster by score threshold");
  auto* cnt_opt = diar->add_option("--num-speakers", num_speakers, "cluster to a known speaker count");
  thr_opt->excludes(cnt_opt);
  diar->add_option("--seed", seed_override, "seed override");
  diar->add_option("--out", diar_out, "hypothesis output directory override");

  std::string ref_path, hyp_path, eval_csv;
  CLI::App* eval = app.add_subcommand("eval", "Score hypothesis RTTM against reference RTTM");
  eval->add_option("--ref", ref_path, "reference RTTM")->required();
  eval->add_option("--hyp", hyp_path, "hypothesis RTTM")->required();
  eval->add_option("--out", eval_csv, "per-recording CSV output path");

  std::string sweep_config, windows_csv, shifts_csv, sweep_csv;
  CLI::App* sweep = app.add_subcommand("sweep", "DER grid over window/shift combinations");
  sweep->add_option("--config", sweep_config, "experiment config JSON")->required();
  sweep->add_option("--windows", windows_csv, "comma-separated window lengths")->required();
  sweep->add_option("--shifts", shifts_csv, "comma-separated shifts")->required();
  sweep->add_option("--out", sweep_csv, "CSV output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (sim->parsed()) return run_simulate(scene_path, out_dir);
    if (train->parsed()) return run_train(manifest_path, model_out);
    if (diar->parsed()) {
      Experiment exp = parse_experiment(config_path);
      if (chunk_len >= 0.0) exp.diarize.chunk_len = chunk_len;
      if (*thr_opt) exp.diarize.cluster = wpeloc::ClusterMode::with_threshold(threshold);
      if (*cnt_opt) exp.diarize.cluster = wpeloc::ClusterMode::known_count(num_speakers);
      if (diar->count("--seed") > 0) exp.seed = seed_override;
      if (!diar_out.empty()) exp.out_dir = diar_out;
      exp.diarize.validate();
      return run_diarize(exp);
    }
    if (eval->parsed()) return run_eval(ref_path, hyp_path, eval_csv);
    if (sweep->parsed()) return run_sweep(parse_experiment(sweep_config), windows_csv, shifts_csv, sweep_csv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
