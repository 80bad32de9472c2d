#include "e2f/events.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <string>

#include "binary.hpp"
#include "e2f/error.hpp"

namespace e2f {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
bool parse_number(std::string_view field, T& out) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  const char* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, out);
  return ec == std::errc() && ptr == end && !field.empty();
}

void check_event(const Event& e, std::uint16_t width, std::uint16_t height, double duration) {
  if (e.x >= width || e.y >= height) {
    throw Error("event at (" + std::to_string(e.x) + ", " + std::to_string(e.y) +
                ") outside " + std::to_string(width) + "x" + std::to_string(height) + " sensor");
  }
  if (!(e.t >= 0.0 && e.t <= duration)) {
    throw Error("event time " + std::to_string(e.t) + " outside [0, " + std::to_string(duration) + "]");
  }
  if (e.polarity != 1 && e.polarity != -1) throw Error("polarity must be +1 or -1");
}

constexpr char kEventMagic[4] = {'E', 'V', 'T', '0'};

}  // namespace

void EventStream::validate() const {
  for (std::size_t i = 0; i < events.size(); ++i) {
    check_event(events[i], width, height, duration);
    if (i > 0 && events[i].t < events[i - 1].t) throw Error("event stream is not time-sorted");
  }
}

FrameTimeline::FrameTimeline(std::vector<double> timestamps) : stamps_(std::move(timestamps)) {
  if (stamps_.empty()) throw Error("timeline needs at least one frame");
  if (!(stamps_.front() > 0.0)) throw Error("first frame timestamp must be > 0");
  for (std::size_t i = 1; i < stamps_.size(); ++i) {
    if (!(stamps_[i] > stamps_[i - 1])) throw Error("frame timestamps must be strictly increasing");
  }
}

FrameTimeline FrameTimeline::uniform(std::size_t frames, double duration) {
  if (frames == 0 || !(duration > 0.0)) throw Error("uniform timeline needs frames >= 1 and duration > 0");
  std::vector<double> s(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    s[f] = static_cast<double>(f + 1) * duration / static_cast<double>(frames);
  }
  s.back() = duration;
  return FrameTimeline(std::move(s));
}

void FrameTimeline::check_against(double duration) const {
  if (stamps_.back() > duration) {
    throw Error("last frame timestamp " + std::to_string(stamps_.back()) + " exceeds stream duration " +
                std::to_string(duration));
  }
}

EventStream parse_event_stream(std::string_view text, std::uint16_t width, std::uint16_t height,
                               double duration) {
  EventStream stream;
  stream.width = width;
  stream.height = height;
  stream.duration = duration;

  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);

    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    std::string_view fields[4];
    std::size_t count = 0;
    while (true) {
      const auto comma = line.find(',');
      if (count == 4) {
        count = 5;
        break;
      }
      fields[count++] = line.substr(0, comma);
      if (comma == std::string_view::npos) break;
      line = line.substr(comma + 1);
    }
    if (count != 4) throw ParseError(line_no, "expected 4 fields t,x,y,p");

    Event e;
    long x = 0, y = 0, p = 0;
    if (!parse_number(fields[0], e.t) || !std::isfinite(e.t)) throw ParseError(line_no, "bad timestamp");
    if (!parse_number(fields[1], x)) throw ParseError(line_no, "bad x coordinate");
    if (!parse_number(fields[2], y)) throw ParseError(line_no, "bad y coordinate");
    if (!parse_number(fields[3], p)) throw ParseError(line_no, "bad polarity");
    if (x < 0 || y < 0 || x >= width || y >= height) {
      throw ParseError(line_no, "coordinate (" + std::to_string(x) + ", " + std::to_string(y) +
                                    ") outside sensor");
    }
    if (e.t < 0.0 || e.t > duration) throw ParseError(line_no, "timestamp outside [0, duration]");
    if (p == 0) p = -1;
    if (p != 1 && p != -1) throw ParseError(line_no, "polarity must be one of -1, 0, 1");
    e.x = static_cast<std::uint16_t>(x);
    e.y = static_cast<std::uint16_t>(y);
    e.polarity = static_cast<std::int8_t>(p);
    stream.events.push_back(e);
  }

  std::stable_sort(stream.events.begin(), stream.events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
  return stream;
}

std::vector<EventGroup> group_events(const EventStream& stream, const FrameTimeline& timeline) {
  timeline.check_against(stream.duration);
  const auto& s = timeline.timestamps();
  std::vector<EventGroup> groups(timeline.frames());
  for (std::size_t f = 0; f < groups.size(); ++f) {
    groups[f].frame = f;
    groups[f].t_begin = timeline.start(f);
    groups[f].t_end = timeline.end(f);
  }
  for (const Event& e : stream.events) {
    // First timestamp strictly greater than t: ties at s_f go to group f + 1.
    const auto it = std::upper_bound(s.begin(), s.end(), e.t);
    if (it == s.end()) continue;
    groups[static_cast<std::size_t>(it - s.begin())].events.push_back(e);
  }
  return groups;
}

namespace {

void stack_one(const EventGroup& group, std::size_t f, std::uint16_t width, std::uint16_t height,
               Tensor4& out) {
  for (const Event& e : group.events) {
    if (e.x >= width || e.y >= height) throw Error("event outside stacking sensor size");
    const double p = e.polarity;
    out(f, 0, e.y, e.x) += p;
    out(f, p > 0 ? 1 : 2, e.y, e.x) += p;
  }
}

}  // namespace

EventVolume stack_events(const std::vector<EventGroup>& groups, std::uint16_t width,
                         std::uint16_t height) {
  Tensor4 out(Shape4{groups.size(), 3, height, width});
  const auto frames = static_cast<std::ptrdiff_t>(groups.size());
  bool bad = false;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t f = 0; f < frames; ++f) {
    try {
      stack_one(groups[f], static_cast<std::size_t>(f), width, height, out);
    } catch (const Error&) {
#pragma omp atomic write
      bad = true;
    }
  }
  if (bad) throw Error("event outside stacking sensor size");
  return EventVolume{std::move(out)};
}

EventVolume stack_events_serial(const std::vector<EventGroup>& groups, std::uint16_t width,
                                std::uint16_t height) {
  Tensor4 out(Shape4{groups.size(), 3, height, width});
  for (std::size_t f = 0; f < groups.size(); ++f) stack_one(groups[f], f, width, height, out);
  return EventVolume{std::move(out)};
}

double volume_std(const EventVolume& volume) {
  const auto v = volume.data.values();
  if (v.empty()) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return std::sqrt(var / static_cast<double>(v.size()));
}

NoisyVolume inject_noise(const EventVolume& volume, const NoiseOptions& options) {
  NoisyVolume result{volume, 0.0, false};
  if (options.mode == NoiseMode::relative) {
    if (options.eta < 0.0) throw Error("noise level eta must be >= 0");
    if (options.eta == 0.0) return result;
    const double sd = volume_std(volume);
    if (sd == 0.0) {
      result.degenerate_variance = true;
      return result;
    }
    result.noise_std = options.eta * sd;
  } else {
    if (options.baseline_std < 0.0) throw Error("baseline noise std must be >= 0");
    if (options.baseline_std == 0.0) return result;
    result.noise_std = options.baseline_std;
  }
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, result.noise_std);
  for (double& v : result.volume.data.values()) v += normal(rng);
  return result;
}

std::vector<EventGroup> repartition_groups(const std::vector<EventGroup>& groups, std::size_t k) {
  if (k == 0) throw Error("repartition needs k >= 1");
  if (groups.empty()) throw Error("repartition needs at least one input group");
  for (std::size_t i = 1; i < groups.size(); ++i) {
    if (groups[i].t_begin != groups[i - 1].t_end) throw Error("input groups are not contiguous in time");
  }
  const double begin = groups.front().t_begin;
  const double end = groups.back().t_end;

  std::vector<double> bounds(k + 1);
  for (std::size_t j = 0; j <= k; ++j) {
    bounds[j] = begin + (end - begin) * static_cast<double>(j) / static_cast<double>(k);
  }
  bounds.front() = begin;
  bounds.back() = end;

  std::vector<EventGroup> out(k);
  for (std::size_t j = 0; j < k; ++j) {
    out[j].frame = groups.front().frame + j;
    out[j].t_begin = bounds[j];
    out[j].t_end = bounds[j + 1];
  }
  for (const EventGroup& g : groups) {
    for (const Event& e : g.events) {
      auto it = std::upper_bound(bounds.begin() + 1, bounds.end(), e.t);
      std::size_t j = static_cast<std::size_t>(it - bounds.begin()) - 1;
      out[std::min(j, k - 1)].events.push_back(e);
    }
  }
  return out;
}

void write_event_stream_binary(const std::filesystem::path& path, const EventStream& stream) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(kEventMagic, 4);
  detail::put_le<std::uint16_t>(out, stream.width);
  detail::put_le<std::uint16_t>(out, stream.height);
  detail::put_le<double>(out, stream.duration);
  for (const Event& e : stream.events) {
    detail::put_le<double>(out, e.t);
    detail::put_le<std::uint16_t>(out, e.x);
    detail::put_le<std::uint16_t>(out, e.y);
    detail::put_le<std::int8_t>(out, e.polarity);
  }
  if (!out) throw Error("write failed: " + path.string());
}

EventStream read_event_stream_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kEventMagic)) {
    throw Error(path.string() + ": not an EVT0 event file");
  }
  EventStream s;
  s.width = detail::get_le<std::uint16_t>(in, "width");
  s.height = detail::get_le<std::uint16_t>(in, "height");
  s.duration = detail::get_le<double>(in, "duration");
  double t;
  while (detail::try_get_le(in, t)) {
    Event e;
    e.t = t;
    e.x = detail::get_le<std::uint16_t>(in, "event x");
    e.y = detail::get_le<std::uint16_t>(in, "event y");
    e.polarity = detail::get_le<std::int8_t>(in, "event polarity");
    s.events.push_back(e);
  }
  s.validate();
  return s;
}

void write_event_stream_text(std::ostream& os, const EventStream& stream) {
  os << "# t,x,y,p  sensor " << stream.width << "x" << stream.height << " duration "
     << std::setprecision(17) << stream.duration << '\n';
  for (const Event& e : stream.events) {
    os << std::setprecision(17) << e.t << ',' << e.x << ',' << e.y << ',' << int{e.polarity} << '\n';
  }
}

void save_event_stream(const std::filesystem::path& path, const EventStream& stream) {
  if (path.extension() == ".evt") {
    write_event_stream_binary(path, stream);
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_event_stream_text(out, stream);
}

EventStream load_event_stream(const std::filesystem::path& path, std::uint16_t width,
                              std::uint16_t height, double duration) {
  if (path.extension() == ".evt") return read_event_stream_binary(path);
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_event_stream(ss.str(), width, height, duration);
}

}  // namespace e2f
