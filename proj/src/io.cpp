#include "e2f/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "binary.hpp"
#include "e2f/error.hpp"

namespace e2f {

std::filesystem::path shape_sidecar(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".shape");
}

void write_raw_f32(const std::filesystem::path& path, const Tensor4& tensor) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  for (double v : tensor.values()) detail::put_le(out, static_cast<float>(v));
  if (!out) throw Error("write failed: " + path.string());

  std::ofstream side(shape_sidecar(path));
  if (!side) throw Error("cannot write shape sidecar for " + path.string());
  const Shape4& s = tensor.shape();
  side << s.frames << ' ' << s.channels << ' ' << s.height << ' ' << s.width << '\n';
}

Tensor4 read_raw_f32(const std::filesystem::path& path) {
  std::ifstream side(shape_sidecar(path));
  if (!side) throw Error("missing shape sidecar " + shape_sidecar(path).string());
  Shape4 s;
  if (!(side >> s.frames >> s.channels >> s.height >> s.width)) {
    throw Error("malformed shape sidecar " + shape_sidecar(path).string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<double> values(s.size());
  for (double& v : values) v = detail::get_le<float>(in, "raw f32 payload");
  char extra;
  if (in.read(&extra, 1)) throw Error(path.string() + " is larger than its shape " + s.str());
  return Tensor4(s, std::move(values));
}

void write_netpbm(const std::filesystem::path& path, const Tensor4& frames, std::size_t f) {
  const Shape4& s = frames.shape();
  if (s.channels != 1 && s.channels != 3) throw Error("netpbm needs 1 or 3 channels, got " + s.str());
  if (f >= s.frames) throw Error("frame index out of range");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << (s.channels == 1 ? "P5" : "P6") << '\n' << s.width << ' ' << s.height << "\n255\n";
  for (std::size_t y = 0; y < s.height; ++y) {
    for (std::size_t x = 0; x < s.width; ++x) {
      for (std::size_t c = 0; c < s.channels; ++c) {
        double v = std::clamp(frames(f, c, y, x), 0.0, 1.0);
        out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
      }
    }
  }
}

Tensor4 read_netpbm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string magic;
  std::size_t width = 0, height = 0, maxval = 0;
  in >> magic;
  auto skip_comments = [&] {
    in >> std::ws;
    while (in.peek() == '#') {
      std::string line;
      std::getline(in, line);
      in >> std::ws;
    }
  };
  skip_comments();
  in >> width;
  skip_comments();
  in >> height;
  skip_comments();
  in >> maxval;
  in.get();
  if (!in || (magic != "P5" && magic != "P6") || maxval != 255) {
    throw Error(path.string() + ": only binary 8-bit PGM/PPM is supported");
  }
  const std::size_t channels = magic == "P5" ? 1 : 3;
  Tensor4 t(Shape4{1, channels, height, width});
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < channels; ++c) {
        int byte = in.get();
        if (byte == EOF) throw Error(path.string() + ": truncated pixel data");
        t(0, c, y, x) = byte / 255.0;
      }
    }
  }
  return t;
}

}  // namespace e2f
