#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cuskip/frame.hpp"

namespace cuskip {

// Content archetypes of the synthetic sequence generator.
//  flat            constant luma, identical frames
//  moving-texture  smooth texture under integer global motion
//  noise           independent noise every frame
//  mixed           moving background with independently moving textured
//                  objects, a static flat patch and a noisy patch
enum class Archetype { Flat, MovingTexture, Noise, Mixed };

std::string_view archetype_name(Archetype archetype);
Archetype parse_archetype(std::string_view name);

struct SequenceSpec {
  std::string name;  // optional; id() derives one when empty
  Archetype archetype = Archetype::Mixed;
  int width = 256;
  int height = 256;
  int frames = 8;
  std::uint64_t seed = 1;

  std::string id() const;
  void validate() const;

  friend bool operator==(const SequenceSpec&, const SequenceSpec&) = default;
};

// QP offset of frame `index`: the leading frame gets 1, the rest cycle 1..4.
int qp_offset_for_frame(int index);

// Deterministic for fixed spec (including seed).
Sequence generate_sequence(const SequenceSpec& spec);

// Text config, one `key = value` per line, '#' starts a comment. Several
// sequences may share a file, each introduced by a `[name]` header:
//
//   [train-a]
//   archetype = mixed
//   width = 256
//   height = 256
//   frames = 8
//   seed = 11
//
// Errors are ParseError with the offending line.
std::vector<SequenceSpec> parse_sequence_specs(std::string_view text, const std::string& source = "<spec>");
std::vector<SequenceSpec> load_sequence_specs(const std::string& path);
std::string format_sequence_spec(const SequenceSpec& spec);

}  // namespace cuskip
