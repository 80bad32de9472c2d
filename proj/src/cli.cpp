#include "e2f/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <locale>
#include <optional>
#include <sstream>

#include "e2f/bounds.hpp"
#include "e2f/error.hpp"
#include "e2f/eval.hpp"
#include "e2f/io.hpp"
#include "e2f/pipeline.hpp"

namespace e2f::cli {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------------------------
// Config

RunConfig::RunConfig() {
  values_ = {
      {"seed", "0"},
      {"frames", "12"},
      {"height", "16"},
      {"width", "16"},
      {"blobs", "2"},
      {"duration", "1"},
      {"contrast_threshold", "0.05"},
      {"schedule.sigma_min", "0.002"},
      {"schedule.sigma_max", "80"},
      {"schedule.steps", "30"},
      {"schedule.rho", "7"},
      {"sigma_data", "0.5"},
      {"guidance.mode", "linear"},
      {"guidance.s_max", "0.1"},
      {"guidance.window", "10"},
      {"guidance.space", "frame"},
      {"guidance.predictor", "model"},
      {"zeroshot.weight", "nonlinear"},
      {"zeroshot.sigma_scale", "1"},
      {"zeroshot.terminal_alpha", "none"},
      {"condition.zero_events", "false"},
      {"model.architecture", "mlp"},
      {"model.hidden", "32"},
      {"model.preconditioned", "true"},
      {"model.decoder", "identity"},
      {"train.iterations", "1500"},
      {"train.learning_rate", "0.002"},
      {"train.final_lr_ratio", "0.1"},
      {"train.batch_size", "8"},
      {"train.sigma_min", "0.002"},
      {"train.sigma_max", "80"},
      {"train.sigma_sampling", "lognormal"},
      {"train.log_every", "100"},
      {"train.check_gradient", "true"},
      {"bound.count", "200"},
      {"dump.every", "0"},
  };
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error("unknown config key '" + key + "'");
  it->second = value;
}

void RunConfig::assign(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw Error("expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::load_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      assign(line);
    } catch (const Error& e) {
      throw ParseError(n, e.what());
    }
  }
}

std::string RunConfig::dump() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

const std::string& RunConfig::str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error("unknown config key '" + key + "'");
  return it->second;
}

double RunConfig::num(const std::string& key) const {
  const std::string& s = str(key);
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) {
    throw Error("config " + key + " is not a number: '" + s + "'");
  }
  return v;
}

std::uint64_t RunConfig::u64(const std::string& key) const {
  const std::string& s = str(key);
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw Error("config " + key + " is not a non-negative integer: '" + s + "'");
  }
  return v;
}

std::size_t RunConfig::count(const std::string& key) const { return static_cast<std::size_t>(u64(key)); }

bool RunConfig::flag(const std::string& key) const {
  const std::string& s = str(key);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw Error("config " + key + " is not a boolean: '" + s + "'");
}

// ---------------------------------------------------------------------------------------------
// Helpers

namespace {

std::string num(double v) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::setprecision(12) << v;
  return os.str();
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  return out;
}

Tensor4 load_frames(const fs::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".pgm" || ext == ".ppm") return read_netpbm(path);
  return read_raw_f32(path);
}

ScheduleParams schedule_params(const RunConfig& c) {
  ScheduleParams p;
  p.sigma_min = c.num("schedule.sigma_min");
  p.sigma_max = c.num("schedule.sigma_max");
  p.steps = c.count("schedule.steps");
  p.rho = c.num("schedule.rho");
  p.sigma_data = c.num("sigma_data");
  return p;
}

SimConfig sim_config(const RunConfig& c) {
  SimConfig s;
  s.contrast_threshold = c.num("contrast_threshold");
  s.duration = c.num("duration");
  return s;
}

EventStream load_events(const fs::path& path, std::size_t width, std::size_t height, const RunConfig& c) {
  if (path.extension() != ".evt" && (width == 0 || height == 0)) {
    throw Error("text event files need --width and --height");
  }
  return load_event_stream(path, static_cast<std::uint16_t>(width), static_cast<std::uint16_t>(height),
                           c.num("duration"));
}

EventVolume stack_stream(const EventStream& stream, const RunConfig& c) {
  return volume_from_stream(stream, FrameTimeline::uniform(c.count("frames"), c.num("duration")));
}

// Sorted "<stem>.f32" files in `dir` that have a "<stem>.evt" partner.
std::vector<fs::path> dataset_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("dataset directory " + dir.string() + " does not exist");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".f32" && fs::exists(fs::path(e.path()).replace_extension(".evt"))) {
      out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw Error("no <name>.f32 + <name>.evt pairs in " + dir.string());
  return out;
}

void write_metrics(std::ostream& os, const Tensor4& pred, const Tensor4& truth) {
  const MetricSeries m = mse(pred, truth);
  std::optional<MetricSeries> s;
  const bool fits = pred.shape().height >= SsimParams{}.window && pred.shape().width >= SsimParams{}.window;
  if (fits) s = ssim(pred, truth);
  os << "frame_index,mse,ssim_channel_mean\n";
  for (std::size_t f = 0; f < m.per_frame.size(); ++f) {
    os << f << "," << num(m.per_frame[f]) << "," << (s ? num(s->per_frame[f]) : "nan") << "\n";
  }
  os << "mean," << num(m.mean) << "," << (s ? num(s->mean) : "nan") << "\n";
}

// ---------------------------------------------------------------------------------------------
// Commands

int cmd_generate(const RunConfig& c, const fs::path& dir, std::size_t n, std::ostream& out) {
  fs::create_directories(dir);
  ToySceneOptions scene;
  scene.frames = c.count("frames");
  scene.height = c.count("height");
  scene.width = c.count("width");
  scene.blobs = c.count("blobs");
  scene.duration = c.num("duration");
  const SimConfig sim = sim_config(c);
  out << "name,events\n";
  for (std::size_t i = 0; i < n; ++i) {
    std::ostringstream name;
    name << "seq_" << std::setw(3) << std::setfill('0') << i;
    const ToySample s = make_toy_sample(c.u64("seed") + i, scene, sim);
    write_raw_f32(dir / (name.str() + ".f32"), s.frames.data);
    save_event_stream(dir / (name.str() + ".evt"), s.events);
    out << name.str() << "," << s.events.events.size() << "\n";
  }
  return 0;
}

int cmd_simulate(const RunConfig& c, const fs::path& frames_path, const fs::path& out_path,
                 const std::string& volume_path, std::ostream& out) {
  const Tensor4 frames = load_frames(frames_path);
  const SimConfig sim = sim_config(c);
  FrameSequence seq{frames, FrameTimeline::uniform(frames.shape().frames, sim.duration)};
  const EventStream stream = simulate_events(seq, sim);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  save_event_stream(out_path, stream);

  const EventVolume vol = volume_from_stream(stream, seq.timeline);
  if (!volume_path.empty()) write_raw_f32(volume_path, vol.data);
  double worst = 0.0;
  if (frames.shape().frames > 1) {
    const ResidualField r = residual_from_events(vol, sim, 1);
    const ResidualField dv = frame_differences(luminance(frames));
    worst = max_abs_diff(r.data, dv.data);
  }
  out << "events,max_residual_error,threshold,within_threshold\n"
      << stream.events.size() << "," << num(worst) << "," << num(sim.contrast_threshold) << ","
      << (worst <= sim.contrast_threshold + 1e-12 ? "true" : "false") << "\n";
  return 0;
}

int cmd_stack(const RunConfig& c, const fs::path& events_path, const fs::path& out_path, std::size_t width,
              std::size_t height, std::ostream& out) {
  const EventStream stream = load_events(events_path, width, height, c);
  const EventVolume vol = stack_stream(stream, c);
  write_raw_f32(out_path, vol.data);
  out << "frames,events\n" << vol.frames() << "," << stream.events.size() << "\n";
  return 0;
}

int cmd_train(const RunConfig& c, const fs::path& data_dir, const fs::path& model_path, std::ostream& out) {
  const auto files = dataset_files(data_dir);
  std::vector<Tensor4> frames;
  std::vector<EventVolume> volumes;
  for (const auto& f : files) {
    frames.push_back(read_raw_f32(f));
    const EventStream s = read_event_stream_binary(fs::path(f).replace_extension(".evt"));
    volumes.push_back(volume_from_stream(s, FrameTimeline::uniform(frames.back().shape().frames, c.num("duration"))));
    if (frames.back().shape() != frames.front().shape()) throw Error("dataset sequences differ in shape");
  }
  const Shape4 fs0 = frames.front().shape();

  Decoder decoder = Decoder::identity();
  const std::string dec = c.str("model.decoder");
  if (dec == "linear") {
    decoder = make_mixing_decoder(FrameShape{fs0.channels, fs0.height, fs0.width}, c.u64("seed") ^ 0xdec0de);
  } else if (dec != "identity") {
    throw Error("model.decoder must be identity or linear");
  }

  ToyDenoiserSpec spec;
  const std::string arch = c.str("model.architecture");
  if (arch != "mlp" && arch != "affine") throw Error("model.architecture must be mlp or affine");
  spec.architecture = arch == "mlp" ? ToyArchitecture::mlp : ToyArchitecture::affine;
  spec.frames = fs0.frames;
  spec.channels = decoder.kind() == Decoder::Kind::identity ? fs0.channels : decoder.latent_frame().channels;
  spec.hidden = c.count("model.hidden");
  spec.sigma_data = c.num("sigma_data");
  spec.preconditioned = c.flag("model.preconditioned");
  spec.event_scale = c.num("contrast_threshold");

  ModelBundle model{ToyDenoiser(spec, c.u64("seed")), std::move(decoder), ResidualPredictor::fit(frames, volumes),
                    c.num("contrast_threshold")};

  std::vector<TrainingPair> pairs;
  for (std::size_t i = 0; i < frames.size(); ++i) pairs.push_back({model.decoder.encode(frames[i]), volumes[i]});

  TrainConfig tc;
  tc.iterations = c.count("train.iterations");
  tc.learning_rate = c.num("train.learning_rate");
  tc.final_lr_ratio = c.num("train.final_lr_ratio");
  tc.batch_size = c.count("train.batch_size");
  tc.sigma_min = c.num("train.sigma_min");
  tc.sigma_max = c.num("train.sigma_max");
  const std::string sampling = c.str("train.sigma_sampling");
  if (sampling != "lognormal" && sampling != "loguniform") throw Error("train.sigma_sampling must be lognormal or loguniform");
  tc.log_uniform = sampling == "loguniform";
  tc.log_every = c.count("train.log_every");
  tc.check_gradient = c.flag("train.check_gradient");
  tc.zero_events = c.flag("condition.zero_events");
  tc.seed = c.u64("seed");
  const TrainReport rep = train_denoiser(model.denoiser, pairs, tc, pairs);

  if (model_path.has_parent_path()) fs::create_directories(model_path.parent_path());
  write_model(model_path, model);
  auto report = open_out(fs::path(model_path.string() + ".report.csv"));
  report << "name,value\n"
         << "sequences," << pairs.size() << "\n"
         << "iterations," << tc.iterations << "\n"
         << "initial_eval_loss," << num(rep.initial_eval_loss) << "\n"
         << "final_eval_loss," << num(rep.final_eval_loss) << "\n"
         << "gradient_check_max_rel_error," << num(rep.gradient_check_max_rel_error) << "\n";
  for (std::size_t i = 0; i < rep.loss_history.size(); ++i) {
    report << "batch_loss_" << i << "," << num(rep.loss_history[i]) << "\n";
  }
  out << "sequences,initial_eval_loss,final_eval_loss\n"
      << pairs.size() << "," << num(rep.initial_eval_loss) << "," << num(rep.final_eval_loss) << "\n";
  return 0;
}

struct TaskArgs {
  fs::path events;
  fs::path model;
  fs::path out;
  std::vector<std::string> refs;
  std::string ref_sequence;
  std::string truth;
  std::string pgm_dir;
  std::string dump_dir;
  std::size_t width = 0;
  std::size_t height = 0;
};

int cmd_task(const RunConfig& c, Task task, const TaskArgs& a, std::ostream& out) {
  const ModelBundle model = read_model(a.model);
  const EventStream stream = load_events(a.events, a.width, a.height, c);
  const EventVolume volume = stack_stream(stream, c);
  const std::size_t F = volume.frames();

  RunOptions o;
  o.schedule = schedule_params(c);
  o.guidance.mode = parse_guidance_mode(c.str("guidance.mode"));
  o.guidance.s_max = c.num("guidance.s_max");
  o.guidance.window = c.count("guidance.window");
  const std::string space = c.str("guidance.space");
  if (space != "frame" && space != "latent") throw Error("guidance.space must be frame or latent");
  o.latent_guidance = space == "latent";
  o.modulation.weight = parse_weight_mode(c.str("zeroshot.weight"));
  o.modulation.sigma_scale = c.num("zeroshot.sigma_scale");
  if (c.str("zeroshot.terminal_alpha") != "none") o.modulation.terminal_alpha = c.num("zeroshot.terminal_alpha");
  o.zero_events = c.flag("condition.zero_events");
  o.channels = model.denoiser.spec().channels;
  o.seed = c.u64("seed");
  o.dump_every = c.count("dump.every");
  if (!a.dump_dir.empty() && o.dump_every > 0) {
    fs::create_directories(a.dump_dir);
    const fs::path dir = a.dump_dir;
    o.on_dump = [dir](std::size_t step, const Tensor4& x) {
      std::ostringstream name;
      name << "step_" << std::setw(3) << std::setfill('0') << step << ".f32";
      write_raw_f32(dir / name.str(), x);
    };
  }

  const std::size_t channels = model.decoder.kind() == Decoder::Kind::identity
                                   ? model.denoiser.spec().channels
                                   : model.decoder.output_frame().channels;
  std::optional<ResidualField> residual;
  if (F > 1) {
    const std::string pred = c.str("guidance.predictor");
    if (pred == "model") {
      residual = model.predictor.predict(volume);
    } else if (pred == "oracle") {
      residual = ResidualPredictor::oracle(model.threshold, channels).predict(volume);
    } else {
      throw Error("guidance.predictor must be model or oracle");
    }
    if (residual->data.shape().channels != channels) {
      residual = ResidualPredictor::oracle(model.threshold, channels).predict(volume);
    }
  } else if (o.guidance.mode != GuidanceMode::off) {
    o.guidance.mode = GuidanceMode::off;
  }

  std::optional<ReferenceSet> refs;
  if (task == Task::reconstruct) {
    if (!a.refs.empty() || !a.ref_sequence.empty()) throw Error("reconstruct takes no reference frames");
  } else {
    const ZeroShotTask zt = parse_zeroshot_task(to_string(task));
    const FrameLayout layout = vfi_layout(zt, F);
    std::vector<ReferenceFrame> frames;
    if (!a.ref_sequence.empty()) {
      const Tensor4 seq = load_frames(a.ref_sequence);
      if (seq.shape().frames != F) throw Error("reference sequence length does not match the event volume");
      for (std::size_t i : layout.references) frames.push_back({i, model.decoder.encode(seq.frame_tensor(i))});
    } else {
      if (a.refs.size() != layout.references.size()) {
        throw Error(to_string(task) + " needs " + std::to_string(layout.references.size()) + " --ref frames, got " +
                    std::to_string(a.refs.size()));
      }
      for (std::size_t j = 0; j < a.refs.size(); ++j) {
        Tensor4 r = load_frames(a.refs[j]);
        if (r.shape().frames != 1) throw Error("--ref " + a.refs[j] + " must hold one frame");
        frames.push_back({layout.references[j], model.decoder.encode(r)});
      }
    }
    refs = zt == ZeroShotTask::vfp ? ReferenceSet::prediction(std::move(frames.front().latent))
                                   : ReferenceSet::segmented(std::move(frames));
  }

  const Latent latent = run_task(task, model.denoiser, model.decoder, volume, residual, refs, o);
  const Tensor4 decoded = model.decoder.apply(latent.data);
  if (a.out.has_parent_path()) fs::create_directories(a.out.parent_path());
  write_raw_f32(a.out, decoded);
  if (!a.pgm_dir.empty()) {
    fs::create_directories(a.pgm_dir);
    const char* ext = decoded.shape().channels == 3 ? ".ppm" : ".pgm";
    for (std::size_t f = 0; f < decoded.shape().frames; ++f) {
      std::ostringstream name;
      name << "frame_" << std::setw(3) << std::setfill('0') << f << ext;
      write_netpbm(fs::path(a.pgm_dir) / name.str(), decoded, f);
    }
  }
  if (!a.truth.empty()) {
    write_metrics(out, decoded, load_frames(a.truth));
  } else {
    out << "task,frames\n" << to_string(task) << "," << decoded.shape().frames << "\n";
  }
  return 0;
}

int cmd_bound_check(const RunConfig& c, std::size_t n, const std::string& out_path, std::ostream& out) {
  const std::uint64_t seed = c.u64("seed");
  RandomInstanceOptions opts;
  opts.threshold = c.num("contrast_threshold");
  const auto reports = run_bound_batch(n, seed, opts);
  std::ofstream file;
  if (!out_path.empty()) file = open_out(out_path);
  std::ostream& os = out_path.empty() ? out : file;
  os << "seed,L,kappa,C,epsilon,loss,lhs,rhs,holds,sufficient,anchoring\n";
  bool all = true;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const BoundReport& r = reports[i];
    all = all && r.holds;
    os << seed + i << "," << num(r.lipschitz) << "," << num(r.kappa) << "," << num(r.threshold) << ","
       << num(r.epsilon) << "," << num(r.loss) << "," << num(r.lhs) << "," << num(r.rhs) << ","
       << (r.holds ? "true" : "false") << "," << (r.sufficient ? "true" : "false") << "," << kBoundAnchoring
       << "\n";
  }
  return all ? 0 : 3;
}

int cmd_eval(const fs::path& pred, const fs::path& truth, const std::string& out_path, std::ostream& out) {
  const Tensor4 a = load_frames(pred);
  const Tensor4 b = load_frames(truth);
  const MetricSeries m = mse(a, b);
  const MetricSeries s = ssim(a, b);
  std::ofstream file;
  if (!out_path.empty()) file = open_out(out_path);
  std::ostream& os = out_path.empty() ? out : file;
  os << "frame_index,mse,ssim_channel_mean\n";
  for (std::size_t f = 0; f < m.per_frame.size(); ++f) {
    os << f << "," << num(m.per_frame[f]) << "," << num(s.per_frame[f]) << "\n";
  }
  os << "mean," << num(m.mean) << "," << num(s.mean) << "\n";
  return 0;
}

}  // namespace

// ---------------------------------------------------------------------------------------------
// Entry point

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"event-guided frame reconstruction, interpolation and prediction"};
  app.require_subcommand(1);

  std::string config_path, dump_path, seed_flag;
  std::vector<std::string> sets;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key=value config file");
    sub->add_option("--set", sets, "override one key (key=value), repeatable");
    sub->add_option("--seed", seed_flag, "seed override");
    sub->add_option("--dump-config", dump_path, "write the effective config here");
  };

  std::string frames_path, out_path, events_path, data_dir, model_path, volume_path, pred_path, truth_path;
  std::size_t count = 0, width = 0, height = 0;

  auto* gen = app.add_subcommand("generate", "write toy sequences and their events");
  common(gen);
  gen->add_option("--out-dir", out_path)->required();
  gen->add_option("--count", count)->default_val(20);

  auto* simulate = app.add_subcommand("simulate", "frames -> event stream");
  common(simulate);
  simulate->add_option("--frames", frames_path)->required();
  simulate->add_option("--out", out_path, ".evt binary or text")->required();
  simulate->add_option("--volume", volume_path, "also write the stacked volume");

  auto* stack = app.add_subcommand("stack", "event stream -> F x 3 x H x W volume");
  common(stack);
  stack->add_option("--events", events_path)->required();
  stack->add_option("--out", out_path)->required();
  stack->add_option("--width", width);
  stack->add_option("--height", height);

  auto* train = app.add_subcommand("train", "fit the toy denoiser and residual predictor");
  common(train);
  train->add_option("--data", data_dir)->required();
  train->add_option("--out", out_path)->required();

  TaskArgs ta;
  std::map<CLI::App*, Task> task_cmds;
  for (Task t : {Task::reconstruct, Task::vfi4, Task::vfi11, Task::vfp}) {
    auto* sub = app.add_subcommand(to_string(t), "sample frames for the " + to_string(t) + " task");
    common(sub);
    sub->add_option("--events", ta.events)->required();
    sub->add_option("--model", ta.model)->required();
    sub->add_option("--out", ta.out)->required();
    sub->add_option("--width", ta.width);
    sub->add_option("--height", ta.height);
    sub->add_option("--truth", ta.truth, "ground truth frames; prints metrics");
    sub->add_option("--pgm-dir", ta.pgm_dir);
    sub->add_option("--dump-dir", ta.dump_dir, "latents every dump.every steps");
    if (t != Task::reconstruct) {
      sub->add_option("--ref", ta.refs, "reference frame files in layout order");
      sub->add_option("--ref-sequence", ta.ref_sequence, "take references from this full sequence");
    }
    task_cmds[sub] = t;
  }

  auto* bound = app.add_subcommand("bound-check", "random error-bound instances -> CSV");
  common(bound);
  std::optional<std::size_t> bound_count;
  bound->add_option("--count", bound_count);
  bound->add_option("--out", out_path);

  auto* eval = app.add_subcommand("eval", "per-frame MSE and SSIM -> CSV");
  common(eval);
  eval->add_option("--pred", pred_path)->required();
  eval->add_option("--truth", truth_path)->required();
  eval->add_option("--out", out_path);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    RunConfig config;
    if (!config_path.empty()) config.load_file(config_path);
    if (const char* env = std::getenv("E2F_SEED")) config.set("seed", env);
    for (const auto& s : sets) config.assign(s);
    if (!seed_flag.empty()) config.set("seed", seed_flag);
    config.u64("seed");
    if (!dump_path.empty()) open_out(dump_path) << config.dump();

    if (gen->parsed()) return cmd_generate(config, out_path, count, out);
    if (simulate->parsed()) return cmd_simulate(config, frames_path, out_path, volume_path, out);
    if (stack->parsed()) return cmd_stack(config, events_path, out_path, width, height, out);
    if (train->parsed()) return cmd_train(config, data_dir, out_path, out);
    for (const auto& [sub, t] : task_cmds) {
      if (sub->parsed()) return cmd_task(config, t, ta, out);
    }
    if (bound->parsed()) return cmd_bound_check(config, bound_count.value_or(config.count("bound.count")), out_path, out);
    if (eval->parsed()) return cmd_eval(pred_path, truth_path, out_path, out);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: " << msg << "\n";
    return 1;
  }
  return 1;
}

}  // namespace e2f::cli
