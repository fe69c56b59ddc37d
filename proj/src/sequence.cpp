#include "cuskip/sequence.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <random>
#include <sstream>

#include "cuskip/error.hpp"

namespace cuskip {

namespace {

using Rng = std::mt19937_64;

// Engine output mapped to [lo, hi]; used instead of std distributions so the
// generated pixels do not depend on the standard library implementation.
int uniform_int(Rng& rng, int lo, int hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo + 1);
  return lo + static_cast<int>(rng() % span);
}

std::uint8_t clamp_pixel(int v) { return static_cast<std::uint8_t>(std::clamp(v, 0, 255)); }

int wrap(int v, int n) {
  const int m = v % n;
  return m < 0 ? m + n : m;
}

// Value noise: random lattice with bilinear interpolation plus per-pixel grain.
class Texture {
 public:
  // `cell` must divide `size`.
  Texture(Rng& rng, int size, int cell, int base, int contrast, int grain) : size_(size), data_(size * size) {
    const int lattice = size / cell;
    std::vector<int> nodes(static_cast<std::size_t>(lattice) * lattice);
    for (int& n : nodes) n = base + uniform_int(rng, -contrast, contrast);
    const int area = cell * cell;
    for (int y = 0; y < size; ++y) {
      const int cy = y / cell, fy = y % cell;
      for (int x = 0; x < size; ++x) {
        const int cx = x / cell, fx = x % cell;
        const int v00 = nodes[cy * lattice + cx];
        const int v10 = nodes[cy * lattice + (cx + 1) % lattice];
        const int v01 = nodes[((cy + 1) % lattice) * lattice + cx];
        const int v11 = nodes[((cy + 1) % lattice) * lattice + (cx + 1) % lattice];
        const int top = v00 * (cell - fx) + v10 * fx;
        const int bottom = v01 * (cell - fx) + v11 * fx;
        int v = (top * (cell - fy) + bottom * fy + area / 2) / area;
        if (grain > 0) v += uniform_int(rng, -grain, grain);
        data_[static_cast<std::size_t>(y) * size + x] = clamp_pixel(v);
      }
    }
  }

  std::uint8_t sample(int x, int y) const {
    return data_[static_cast<std::size_t>(wrap(y, size_)) * size_ + wrap(x, size_)];
  }

 private:
  int size_;
  std::vector<std::uint8_t> data_;
};

struct Rect {
  int x, y, w, h;
  bool contains(int px, int py) const { return px >= x && px < x + w && py >= y && py < y + h; }
};

struct MovingObject {
  Texture texture;
  int x0, y0, w, h, vx, vy;
};

Frame blank_frame(const SequenceSpec& spec, int index) {
  Frame frame;
  frame.width = spec.width;
  frame.height = spec.height;
  frame.frame_index = index;
  frame.qp_offset = qp_offset_for_frame(index);
  frame.luma.assign(static_cast<std::size_t>(spec.width) * spec.height, 0);
  return frame;
}

void add_sensor_noise(Frame& frame, Rng& rng, int amplitude) {
  for (auto& p : frame.luma) p = clamp_pixel(int{p} + uniform_int(rng, -amplitude, amplitude));
}

std::vector<Frame> make_flat(const SequenceSpec& spec, Rng& rng) {
  const auto value = static_cast<std::uint8_t>(uniform_int(rng, 16, 239));
  std::vector<Frame> frames;
  for (int i = 0; i < spec.frames; ++i) {
    Frame frame = blank_frame(spec, i);
    std::fill(frame.luma.begin(), frame.luma.end(), value);
    frames.push_back(std::move(frame));
  }
  return frames;
}

std::vector<Frame> make_noise(const SequenceSpec& spec, Rng& rng) {
  std::vector<Frame> frames;
  for (int i = 0; i < spec.frames; ++i) {
    Frame frame = blank_frame(spec, i);
    for (auto& p : frame.luma) p = static_cast<std::uint8_t>(uniform_int(rng, 80, 176));
    frames.push_back(std::move(frame));
  }
  return frames;
}

std::vector<Frame> make_moving_texture(const SequenceSpec& spec, Rng& rng) {
  const Texture texture(rng, 256, 8, 128, 70, 2);
  const int vx = uniform_int(rng, -2, 2);
  const int vy = uniform_int(rng, -2, 2);
  std::vector<Frame> frames;
  for (int i = 0; i < spec.frames; ++i) {
    Frame frame = blank_frame(spec, i);
    for (int y = 0; y < spec.height; ++y)
      for (int x = 0; x < spec.width; ++x) frame.at(x, y) = texture.sample(x - vx * i, y - vy * i);
    add_sensor_noise(frame, rng, 1);
    frames.push_back(std::move(frame));
  }
  return frames;
}

std::vector<Frame> make_mixed(const SequenceSpec& spec, Rng& rng) {
  static constexpr std::pair<int, int> kBackgroundMotion[] = {{0, 0}, {1, 0}, {0, 1}, {-1, 0}, {1, 1}};
  const Texture background(rng, 256, 32, uniform_int(rng, 70, 180), 40, 0);
  const auto [bvx, bvy] = kBackgroundMotion[uniform_int(rng, 0, 4)];

  const int area_units = std::max(1, spec.width * spec.height / (128 * 128));
  const Rect flat{uniform_int(rng, 0, spec.width / 2), uniform_int(rng, 0, spec.height / 2),
                  uniform_int(rng, 32, 96), uniform_int(rng, 32, 96)};
  const auto flat_value = static_cast<std::uint8_t>(uniform_int(rng, 20, 235));
  const Rect noisy{uniform_int(rng, 0, spec.width - 48), uniform_int(rng, 0, spec.height - 48),
                   uniform_int(rng, 16, 48), uniform_int(rng, 16, 48)};

  std::vector<MovingObject> objects;
  const int object_count = area_units + uniform_int(rng, 0, 1);
  for (int i = 0; i < object_count; ++i) {
    Texture texture(rng, 128, 1 << uniform_int(rng, 1, 3), uniform_int(rng, 40, 215), 60, 3);
    const int w = uniform_int(rng, 16, 72);
    const int h = uniform_int(rng, 16, 72);
    const int x0 = uniform_int(rng, 0, spec.width - 1);
    const int y0 = uniform_int(rng, 0, spec.height - 1);
    int vx = uniform_int(rng, -3, 3);
    int vy = uniform_int(rng, -3, 3);
    if (vx == bvx && vy == bvy) vx = -vx + (vx == 0 ? 2 : 0);
    objects.push_back({std::move(texture), x0, y0, w, h, vx, vy});
  }

  std::vector<Frame> frames;
  for (int i = 0; i < spec.frames; ++i) {
    Frame frame = blank_frame(spec, i);
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        std::uint8_t value = background.sample(x - bvx * i, y - bvy * i);
        if (flat.contains(x, y)) value = flat_value;
        for (const MovingObject& obj : objects) {
          const int dx = wrap(x - (obj.x0 + obj.vx * i), spec.width);
          const int dy = wrap(y - (obj.y0 + obj.vy * i), spec.height);
          if (dx < obj.w && dy < obj.h) value = obj.texture.sample(dx, dy);
        }
        frame.at(x, y) = value;
      }
    }
    for (int y = noisy.y; y < noisy.y + noisy.h; ++y)
      for (int x = noisy.x; x < noisy.x + noisy.w; ++x) frame.at(x, y) = clamp_pixel(uniform_int(rng, 60, 200));
    add_sensor_noise(frame, rng, 1);
    frames.push_back(std::move(frame));
  }
  return frames;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T parse_value(const std::string& text, const std::string& source, std::size_t line, const std::string& key) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw ParseError(source, line, "invalid value for '" + key + "': '" + text + "'");
  return value;
}

}  // namespace

std::string_view archetype_name(Archetype archetype) {
  switch (archetype) {
    case Archetype::Flat:
      return "flat";
    case Archetype::MovingTexture:
      return "moving-texture";
    case Archetype::Noise:
      return "noise";
    case Archetype::Mixed:
      return "mixed";
  }
  return "unknown";
}

Archetype parse_archetype(std::string_view name) {
  for (Archetype a : {Archetype::Flat, Archetype::MovingTexture, Archetype::Noise, Archetype::Mixed})
    if (archetype_name(a) == name) return a;
  throw DomainError("unknown archetype '" + std::string(name) + "' (expected flat, moving-texture, noise or mixed)");
}

std::string SequenceSpec::id() const {
  if (!name.empty()) return name;
  return std::string(archetype_name(archetype)) + "-" + std::to_string(width) + "x" + std::to_string(height) +
         "-f" + std::to_string(frames) + "-s" + std::to_string(seed);
}

void SequenceSpec::validate() const {
  if (width <= 0 || width % kCtuSize != 0)
    throw DomainError("width must be a positive multiple of 64, got " + std::to_string(width));
  if (height <= 0 || height % kCtuSize != 0)
    throw DomainError("height must be a positive multiple of 64, got " + std::to_string(height));
  if (frames <= 0) throw DomainError("frame count must be at least 1, got " + std::to_string(frames));
}

int qp_offset_for_frame(int index) { return index == 0 ? 1 : (index - 1) % 4 + 1; }

Sequence generate_sequence(const SequenceSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Sequence sequence;
  sequence.id = spec.id();
  switch (spec.archetype) {
    case Archetype::Flat:
      sequence.frames = make_flat(spec, rng);
      break;
    case Archetype::MovingTexture:
      sequence.frames = make_moving_texture(spec, rng);
      break;
    case Archetype::Noise:
      sequence.frames = make_noise(spec, rng);
      break;
    case Archetype::Mixed:
      sequence.frames = make_mixed(spec, rng);
      break;
  }
  return sequence;
}

std::vector<SequenceSpec> parse_sequence_specs(std::string_view text, const std::string& source) {
  std::vector<SequenceSpec> specs;
  std::vector<std::size_t> spec_lines;
  bool open = false;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(source, line_no, "unterminated section header");
      specs.emplace_back();
      spec_lines.push_back(line_no);
      specs.back().name = trim(std::string_view(line).substr(1, line.size() - 2));
      if (specs.back().name.empty()) throw ParseError(source, line_no, "empty section name");
      open = true;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(source, line_no, "expected 'key = value'");
    if (!open) {
      specs.emplace_back();
      spec_lines.push_back(line_no);
      open = true;
    }
    SequenceSpec& spec = specs.back();
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key == "archetype") {
      try {
        spec.archetype = parse_archetype(value);
      } catch (const DomainError& e) {
        throw ParseError(source, line_no, e.what());
      }
    } else if (key == "width") {
      spec.width = parse_value<int>(value, source, line_no, key);
      if (spec.width <= 0 || spec.width % kCtuSize)
        throw ParseError(source, line_no, "width must be a positive multiple of 64, got " + value);
    } else if (key == "height") {
      spec.height = parse_value<int>(value, source, line_no, key);
      if (spec.height <= 0 || spec.height % kCtuSize)
        throw ParseError(source, line_no, "height must be a positive multiple of 64, got " + value);
    } else if (key == "frames") {
      spec.frames = parse_value<int>(value, source, line_no, key);
      if (spec.frames <= 0) throw ParseError(source, line_no, "frames must be at least 1, got " + value);
    } else if (key == "seed") {
      spec.seed = parse_value<std::uint64_t>(value, source, line_no, key);
    } else if (key == "name") {
      spec.name = value;
    } else {
      throw ParseError(source, line_no, "unknown key '" + key + "'");
    }
  }
  if (specs.empty()) throw ParseError(source, line_no, "no sequence defined");
  for (std::size_t i = 0; i < specs.size(); ++i) {
    try {
      specs[i].validate();
    } catch (const DomainError& e) {
      throw ParseError(source, spec_lines[i], e.what());
    }
  }
  return specs;
}

std::vector<SequenceSpec> load_sequence_specs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open sequence spec " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_sequence_specs(text.str(), path);
}

std::string format_sequence_spec(const SequenceSpec& spec) {
  std::ostringstream out;
  out << "[" << spec.id() << "]\n"
      << "archetype = " << archetype_name(spec.archetype) << "\n"
      << "width = " << spec.width << "\n"
      << "height = " << spec.height << "\n"
      << "frames = " << spec.frames << "\n"
      << "seed = " << spec.seed << "\n";
  return out.str();
}

}  // namespace cuskip
