#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cuskip/codec.hpp"
#include "cuskip/skip_runtime.hpp"

namespace cuskip {

struct RdPoint {
  double rate = 0.0;     // total bits
  double quality = 0.0;  // PSNR in dB
  int qp = 0;

  friend bool operator==(const RdPoint&, const RdPoint&) = default;
};

// Cubic through the four (quality, ln rate) points; coefficients of
// ln rate = c0 + c1 u + c2 u^2 + c3 u^3 with u = (quality - centre) / scale.
struct LogRateFit {
  std::array<double, 4> c{};
  double centre = 0.0;
  double scale = 1.0;

  double operator()(double quality) const;
  // Closed-form integral over [lo, hi] in quality units.
  double integral(double lo, double hi) const;
};

// Throws DomainError unless there are exactly four points with rate > 0,
// finite quality, and rate strictly increasing with quality.
LogRateFit fit_log_rate(std::span<const RdPoint> points, double centre, double scale);

// Average rate difference of `test` against `anchor` in percent over the
// common quality range; positive means the test spends more bits. Throws
// DomainError on invalid curves and UndefinedResult when the quality ranges
// do not overlap.
double bd_rate(std::span<const RdPoint> anchor, std::span<const RdPoint> test);

struct BenchConfig {
  std::vector<int> qps{22, 27, 32, 37};
  EncoderConfig encoder;  // base_qp is replaced by each entry of qps
  unsigned threads = 0;   // 0 = hardware concurrency
};

struct EncodeRun {
  int qp = 0;
  RdPoint point;
  FrameStats stats;
  double seconds = 0.0;  // wall time, informational only
};

struct SequenceBench {
  std::string sequence_id;
  std::vector<EncodeRun> anchor;
  std::vector<EncodeRun> test;
  std::optional<double> bd_rate;  // absent when undefined for this content
  std::string bd_rate_note;       // reason when absent
  RdoStats anchor_effort;
  RdoStats test_effort;
  double anchor_seconds = 0.0;
  double test_seconds = 0.0;
};

// Percent change from anchor to test; 0 when both are zero.
double delta_pct(double anchor, double test);

struct BenchReport {
  std::vector<SequenceBench> sequences;
  std::vector<int> qps;
  std::string criteria_run_id;        // empty for an anchor-only run
  std::vector<std::string> criteria;  // "depth N: conjunction"

  std::optional<double> mean_bd_rate() const;
  RdoStats anchor_effort() const;
  RdoStats test_effort() const;
  double mode_evaluation_delta_pct() const;
  double recursion_delta_pct() const;
  double wall_time_delta_pct() const;

  // Aligned text with the per-sequence rows and the reference values of the
  // original large-scale study. Contains wall time, so it is not reproducible.
  std::string to_text() const;
  // Per-sequence grid without wall-time fields.
  std::string to_csv() const;
  // Every RD point of both configurations.
  std::string points_csv() const;
  // Wall-time grid.
  std::string timing_csv() const;
};

// Encodes every sequence at every QP without criteria (anchor) and with
// `bundle` (test). Refuses, with ConfigError, sequences that appear in the
// bundle's training provenance.
BenchReport run_benchmark(const std::vector<Sequence>& sequences, const BenchConfig& config,
                          const CriteriaBundle* bundle);

}  // namespace cuskip
