#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace cuskip {

inline constexpr int kCtuSize = 64;

// One 8-bit luma picture. Dimensions are always multiples of the CTU size;
// from_samples() pads by edge replication to get there.
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> luma;
  int frame_index = 0;
  int qp_offset = 1;

  static Frame from_samples(int width, int height, std::span<const std::uint8_t> samples, int frame_index,
                            int qp_offset);

  std::uint8_t at(int x, int y) const { return luma[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return luma[static_cast<std::size_t>(y) * width + x]; }
  const std::uint8_t* row(int y) const { return luma.data() + static_cast<std::size_t>(y) * width; }
  std::ptrdiff_t stride() const { return width; }

  // Throws DomainError when an invariant does not hold.
  void validate() const;

  friend bool operator==(const Frame&, const Frame&) = default;
};

// Edge-replicated copy of a reference picture so that motion-compensated
// reads up to `margin` pixels outside the frame stay in bounds.
class PaddedPlane {
 public:
  PaddedPlane(const Frame& frame, int margin);

  int width() const { return width_; }
  int height() const { return height_; }
  int margin() const { return margin_; }
  std::ptrdiff_t stride() const { return stride_; }

  // x, y may range over [-margin, width + margin).
  const std::uint8_t* at(int x, int y) const {
    return data_.data() + static_cast<std::ptrdiff_t>(y + margin_) * stride_ + (x + margin_);
  }

 private:
  int width_;
  int height_;
  int margin_;
  std::ptrdiff_t stride_;
  std::vector<std::uint8_t> data_;
};

struct Sequence {
  std::string id;
  std::vector<Frame> frames;

  int width() const { return frames.empty() ? 0 : frames.front().width; }
  int height() const { return frames.empty() ? 0 : frames.front().height; }
};

// Raw luma file: frames concatenated row-major, 8 bits per sample. The sidecar
// `<stem>.hdr` holds a single line:
//   cuskip-raw v1 id=<id> width=<w> height=<h> frames=<n> qpo=<o1>,<o2>,...
// Both paths derive from `stem` (e.g. out/mixed-a -> out/mixed-a.y, out/mixed-a.hdr).
void write_sequence(const std::filesystem::path& stem, const Sequence& sequence);
Sequence read_sequence(const std::filesystem::path& stem);

std::filesystem::path raw_path(const std::filesystem::path& stem);
std::filesystem::path header_path(const std::filesystem::path& stem);

}  // namespace cuskip
