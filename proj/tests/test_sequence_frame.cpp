#include <doctest.h>

#include <filesystem>
#include <vector>

#include "cuskip/error.hpp"
#include "cuskip/frame.hpp"
#include "cuskip/sequence.hpp"

using namespace cuskip;
namespace fs = std::filesystem;

TEST_CASE("generator is deterministic per seed") {
  for (Archetype a : {Archetype::Flat, Archetype::MovingTexture, Archetype::Noise, Archetype::Mixed}) {
    SequenceSpec spec;
    spec.archetype = a;
    spec.width = 128;
    spec.height = 64;
    spec.frames = 3;
    spec.seed = 5;
    const Sequence s1 = generate_sequence(spec), s2 = generate_sequence(spec);
    CHECK(s1.frames == s2.frames);
    REQUIRE(s1.frames.size() == 3);
    CHECK(s1.width() == 128);
    CHECK(s1.height() == 64);
    for (const auto& f : s1.frames) CHECK_NOTHROW(f.validate());
    if (a != Archetype::Flat) {
      spec.seed = 6;
      CHECK(generate_sequence(spec).frames != s1.frames);
    }
  }
}

TEST_CASE("flat archetype is constant and static") {
  SequenceSpec spec;
  spec.archetype = Archetype::Flat;
  spec.frames = 4;
  const Sequence s = generate_sequence(spec);
  const auto v = s.frames[0].luma[0];
  for (const auto& f : s.frames) {
    for (auto p : f.luma) REQUIRE(p == v);
  }
}

TEST_CASE("qp offset cycle") {
  CHECK(qp_offset_for_frame(0) == 1);
  const int expected[] = {1, 2, 3, 4, 1, 2, 3, 4};
  for (int k = 1; k <= 8; ++k) CHECK(qp_offset_for_frame(k) == expected[k - 1]);
  SequenceSpec spec;
  spec.frames = 6;
  spec.width = 64;
  spec.height = 64;
  const Sequence s = generate_sequence(spec);
  for (int k = 0; k < 6; ++k) CHECK(s.frames[k].qp_offset == qp_offset_for_frame(k));
}

TEST_CASE("sequence spec file parsing") {
  const auto specs = parse_sequence_specs(
      "# two sequences\n[a]\narchetype = noise\nwidth = 128\nseed = 3\n\n[b]\narchetype = flat\nframes = 2\n");
  REQUIRE(specs.size() == 2);
  CHECK(specs[0].id() == "a");
  CHECK(specs[0].archetype == Archetype::Noise);
  CHECK(specs[0].width == 128);
  CHECK(specs[0].seed == 3);
  CHECK(specs[1].archetype == Archetype::Flat);
  CHECK(specs[1].frames == 2);

  const auto round = parse_sequence_specs(format_sequence_spec(specs[0]));
  REQUIRE(round.size() == 1);
  CHECK(round[0].archetype == specs[0].archetype);
  CHECK(round[0].width == specs[0].width);
  CHECK(round[0].seed == specs[0].seed);

  auto line_of = [](const char* text) -> std::size_t {
    try {
      parse_sequence_specs(text, "t.spec");
    } catch (const ParseError& e) {
      CHECK(e.source() == "t.spec");
      return e.line();
    }
    return 0;
  };
  CHECK(line_of("[a]\nwidth = 100\n") == 2);
  CHECK(line_of("[a]\narchetype = mixed\nbogus = 1\n") == 3);
  CHECK(line_of("[a]\nframes = x\n") == 2);
  CHECK(line_of("[a]\narchetype = plasma\n") == 2);
  CHECK(line_of("[a\n") == 1);
  CHECK(line_of("width\n") == 1);
  CHECK(line_of("# nothing\n") == 1);
}

TEST_CASE("raw sequence round trip") {
  const fs::path dir = fs::temp_directory_path() / "cuskip_test_seq_io";
  fs::remove_all(dir);
  fs::create_directories(dir);
  SequenceSpec spec;
  spec.name = "io";
  spec.width = 128;
  spec.height = 64;
  spec.frames = 5;
  const Sequence s = generate_sequence(spec);
  write_sequence(dir / "io", s);
  CHECK(fs::exists(raw_path(dir / "io")));
  CHECK(fs::file_size(raw_path(dir / "io")) == 128u * 64u * 5u);
  const Sequence back = read_sequence(dir / "io");
  CHECK(back.id == s.id);
  CHECK(back.frames == s.frames);
  fs::remove_all(dir);
}

TEST_CASE("frame padding and validation") {
  std::vector<std::uint8_t> px(70 * 10);
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<std::uint8_t>(i % 251);
  const Frame f = Frame::from_samples(70, 10, px, 0, 1);
  CHECK(f.width == 128);
  CHECK(f.height == 64);
  CHECK(f.at(69, 9) == px[9 * 70 + 69]);
  CHECK(f.at(127, 63) == px[9 * 70 + 69]);
  CHECK(f.at(100, 3) == px[3 * 70 + 69]);
  CHECK_THROWS_AS(Frame::from_samples(70, 10, std::span(px).first(5), 0, 1), DomainError);

  Frame bad = f;
  bad.qp_offset = 5;
  CHECK_THROWS_AS(bad.validate(), DomainError);

  const PaddedPlane plane(f, 8);
  CHECK(*plane.at(-8, -8) == f.at(0, 0));
  CHECK(*plane.at(127 + 8, 63 + 8) == f.at(127, 63));
  CHECK(*plane.at(10, -3) == f.at(10, 0));
}
