#include "cuskip/frame.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "cuskip/error.hpp"

namespace cuskip {

namespace {

int round_up_to_ctu(int v) { return (v + kCtuSize - 1) / kCtuSize * kCtuSize; }

template <typename T>
T parse_number(std::string_view text, const std::string& source, const std::string& key) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw ParseError(source, 1, "invalid value for '" + key + "': '" + std::string(text) + "'");
  return value;
}

}  // namespace

Frame Frame::from_samples(int width, int height, std::span<const std::uint8_t> samples, int frame_index,
                          int qp_offset) {
  if (width <= 0 || height <= 0) throw DomainError("frame dimensions must be positive");
  if (samples.size() != static_cast<std::size_t>(width) * height)
    throw DomainError("sample count does not match frame dimensions");
  Frame frame;
  frame.width = round_up_to_ctu(width);
  frame.height = round_up_to_ctu(height);
  frame.frame_index = frame_index;
  frame.qp_offset = qp_offset;
  frame.luma.resize(static_cast<std::size_t>(frame.width) * frame.height);
  for (int y = 0; y < frame.height; ++y) {
    const int sy = std::min(y, height - 1);
    for (int x = 0; x < frame.width; ++x) {
      const int sx = std::min(x, width - 1);
      frame.at(x, y) = samples[static_cast<std::size_t>(sy) * width + sx];
    }
  }
  frame.validate();
  return frame;
}

void Frame::validate() const {
  if (width <= 0 || height <= 0 || width % kCtuSize != 0 || height % kCtuSize != 0)
    throw DomainError("frame dimensions must be positive multiples of 64, got " + std::to_string(width) + "x" +
                      std::to_string(height));
  if (luma.size() != static_cast<std::size_t>(width) * height)
    throw DomainError("luma plane size does not match frame dimensions");
  if (qp_offset < 1 || qp_offset > 4)
    throw DomainError("qp_offset must lie in [1, 4], got " + std::to_string(qp_offset));
}

PaddedPlane::PaddedPlane(const Frame& frame, int margin)
    : width_(frame.width), height_(frame.height), margin_(margin), stride_(frame.width + 2 * margin) {
  data_.resize(static_cast<std::size_t>(stride_) * (height_ + 2 * margin_));
  for (int y = -margin_; y < height_ + margin_; ++y) {
    const int sy = std::clamp(y, 0, height_ - 1);
    std::uint8_t* dst = data_.data() + static_cast<std::ptrdiff_t>(y + margin_) * stride_;
    const std::uint8_t* src = frame.row(sy);
    std::fill(dst, dst + margin_, src[0]);
    std::copy(src, src + width_, dst + margin_);
    std::fill(dst + margin_ + width_, dst + stride_, src[width_ - 1]);
  }
}

std::filesystem::path raw_path(const std::filesystem::path& stem) {
  auto p = stem;
  p += ".y";
  return p;
}

std::filesystem::path header_path(const std::filesystem::path& stem) {
  auto p = stem;
  p += ".hdr";
  return p;
}

void write_sequence(const std::filesystem::path& stem, const Sequence& sequence) {
  if (sequence.frames.empty()) throw DomainError("cannot write an empty sequence");
  std::ofstream header(header_path(stem), std::ios::binary);
  if (!header) throw std::runtime_error("cannot open " + header_path(stem).string() + " for writing");
  header << "cuskip-raw v1 id=" << sequence.id << " width=" << sequence.width() << " height=" << sequence.height()
         << " frames=" << sequence.frames.size() << " qpo=";
  for (std::size_t i = 0; i < sequence.frames.size(); ++i) {
    if (i) header << ',';
    header << sequence.frames[i].qp_offset;
  }
  header << '\n';

  std::ofstream raw(raw_path(stem), std::ios::binary);
  if (!raw) throw std::runtime_error("cannot open " + raw_path(stem).string() + " for writing");
  for (const Frame& frame : sequence.frames) {
    raw.write(reinterpret_cast<const char*>(frame.luma.data()), static_cast<std::streamsize>(frame.luma.size()));
  }
}

Sequence read_sequence(const std::filesystem::path& stem) {
  const std::string source = header_path(stem).string();
  std::ifstream header(header_path(stem));
  if (!header) throw std::runtime_error("cannot open " + source);
  std::string line;
  std::getline(header, line);
  std::istringstream tokens(line);
  std::string magic, version;
  tokens >> magic >> version;
  if (magic != "cuskip-raw" || version != "v1") throw ParseError(source, 1, "not a cuskip raw sequence header");

  Sequence sequence;
  int width = 0, height = 0;
  std::size_t frames = 0;
  std::vector<int> offsets;
  std::string token;
  while (tokens >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw ParseError(source, 1, "expected key=value, got '" + token + "'");
    const std::string key = token.substr(0, eq);
    const std::string_view value = std::string_view(token).substr(eq + 1);
    if (key == "id") {
      sequence.id = std::string(value);
    } else if (key == "width") {
      width = parse_number<int>(value, source, key);
    } else if (key == "height") {
      height = parse_number<int>(value, source, key);
    } else if (key == "frames") {
      frames = parse_number<std::size_t>(value, source, key);
    } else if (key == "qpo") {
      std::string_view rest = value;
      while (!rest.empty()) {
        const auto comma = rest.find(',');
        offsets.push_back(parse_number<int>(rest.substr(0, comma), source, key));
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
      }
    } else {
      throw ParseError(source, 1, "unknown header key '" + key + "'");
    }
  }
  if (width <= 0 || height <= 0 || width % kCtuSize || height % kCtuSize)
    throw ParseError(source, 1, "width and height must be positive multiples of 64");
  if (frames == 0) throw ParseError(source, 1, "sequence has no frames");
  if (offsets.size() != frames) throw ParseError(source, 1, "qpo list length does not match frame count");

  std::ifstream raw(raw_path(stem), std::ios::binary);
  if (!raw) throw std::runtime_error("cannot open " + raw_path(stem).string());
  const std::size_t plane = static_cast<std::size_t>(width) * height;
  for (std::size_t i = 0; i < frames; ++i) {
    Frame frame;
    frame.width = width;
    frame.height = height;
    frame.frame_index = static_cast<int>(i);
    frame.qp_offset = offsets[i];
    frame.luma.resize(plane);
    raw.read(reinterpret_cast<char*>(frame.luma.data()), static_cast<std::streamsize>(plane));
    if (static_cast<std::size_t>(raw.gcount()) != plane)
      throw ParseError(raw_path(stem).string(), 1, "raw file is shorter than the header declares");
    frame.validate();
    sequence.frames.push_back(std::move(frame));
  }
  return sequence;
}

}  // namespace cuskip
