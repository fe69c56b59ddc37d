#include "cuskip/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

#include "cuskip/error.hpp"
#include "cuskip/parallel.hpp"

namespace cuskip {

namespace {

// Gaussian elimination with partial pivoting on a 4x4 system.
std::array<double, 4> solve4(std::array<std::array<double, 5>, 4> m) {
  for (int col = 0; col < 4; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 4; ++r)
      if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
    if (m[pivot][col] == 0.0) throw DomainError("RD points do not determine a cubic (repeated quality)");
    std::swap(m[col], m[pivot]);
    for (int r = col + 1; r < 4; ++r) {
      const double f = m[r][col] / m[col][col];
      for (int c = col; c < 5; ++c) m[r][c] -= f * m[col][c];
    }
  }
  std::array<double, 4> x{};
  for (int r = 3; r >= 0; --r) {
    double s = m[r][4];
    for (int c = r + 1; c < 4; ++c) s -= m[r][c] * x[c];
    x[r] = s / m[r][r];
  }
  return x;
}

std::vector<RdPoint> checked_curve(std::span<const RdPoint> points, const char* which) {
  if (points.size() != 4)
    throw DomainError(std::string(which) + " curve needs exactly 4 RD points, got " + std::to_string(points.size()));
  std::vector<RdPoint> sorted(points.begin(), points.end());
  for (const RdPoint& p : sorted) {
    if (!(p.rate > 0.0) || !std::isfinite(p.rate)) throw DomainError(std::string(which) + " curve has a non-positive rate");
    if (!std::isfinite(p.quality)) throw DomainError(std::string(which) + " curve has a non-finite quality");
  }
  std::sort(sorted.begin(), sorted.end(), [](const RdPoint& a, const RdPoint& b) { return a.rate < b.rate; });
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (!(sorted[i].rate > sorted[i - 1].rate) || !(sorted[i].quality > sorted[i - 1].quality))
      throw DomainError(std::string(which) + " curve is not strictly monotone in rate and quality");
  return sorted;
}

}  // namespace

double LogRateFit::operator()(double quality) const {
  const double u = (quality - centre) / scale;
  return c[0] + u * (c[1] + u * (c[2] + u * c[3]));
}

double LogRateFit::integral(double lo, double hi) const {
  auto antiderivative = [&](double q) {
    const double u = (q - centre) / scale;
    return scale * u * (c[0] + u * (c[1] / 2 + u * (c[2] / 3 + u * c[3] / 4)));
  };
  return antiderivative(hi) - antiderivative(lo);
}

LogRateFit fit_log_rate(std::span<const RdPoint> points, double centre, double scale) {
  const auto sorted = checked_curve(points, "RD");
  if (!(scale > 0.0)) throw DomainError("fit scale must be positive");
  std::array<std::array<double, 5>, 4> m{};
  for (int r = 0; r < 4; ++r) {
    const double u = (sorted[r].quality - centre) / scale;
    m[r] = {1.0, u, u * u, u * u * u, std::log(sorted[r].rate)};
  }
  LogRateFit fit;
  fit.c = solve4(m);
  fit.centre = centre;
  fit.scale = scale;
  return fit;
}

double bd_rate(std::span<const RdPoint> anchor, std::span<const RdPoint> test) {
  const auto a = checked_curve(anchor, "anchor");
  const auto t = checked_curve(test, "test");
  const double lo = std::max(a.front().quality, t.front().quality);
  const double hi = std::min(a.back().quality, t.back().quality);
  if (!(hi > lo)) throw UndefinedResult("anchor and test curves have no overlapping quality range");
  const double centre = (lo + hi) / 2.0;
  const double scale = (hi - lo) / 2.0;
  const LogRateFit fa = fit_log_rate(a, centre, scale);
  const LogRateFit ft = fit_log_rate(t, centre, scale);
  const double mean_diff = (ft.integral(lo, hi) - fa.integral(lo, hi)) / (hi - lo);
  return std::expm1(mean_diff) * 100.0;
}

double delta_pct(double anchor, double test) {
  if (anchor == 0.0) return test == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return (test - anchor) / anchor * 100.0;
}

std::optional<double> BenchReport::mean_bd_rate() const {
  double sum = 0.0;
  int n = 0;
  for (const SequenceBench& s : sequences)
    if (s.bd_rate) {
      sum += *s.bd_rate;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return sum / n;
}

RdoStats BenchReport::anchor_effort() const {
  RdoStats total;
  for (const SequenceBench& s : sequences) total += s.anchor_effort;
  return total;
}

RdoStats BenchReport::test_effort() const {
  RdoStats total;
  for (const SequenceBench& s : sequences) total += s.test_effort;
  return total;
}

double BenchReport::mode_evaluation_delta_pct() const {
  return delta_pct(static_cast<double>(anchor_effort().mode_evaluations),
                   static_cast<double>(test_effort().mode_evaluations));
}

double BenchReport::recursion_delta_pct() const {
  return delta_pct(static_cast<double>(anchor_effort().recursions_entered),
                   static_cast<double>(test_effort().recursions_entered));
}

double BenchReport::wall_time_delta_pct() const {
  double a = 0.0, t = 0.0;
  for (const SequenceBench& s : sequences) {
    a += s.anchor_seconds;
    t += s.test_seconds;
  }
  return delta_pct(a, t);
}

namespace {

std::string signed_pct(double v, int precision = 2) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%+.*f%%", precision, v);
  return buf;
}

std::string bd_cell(const SequenceBench& s) { return s.bd_rate ? signed_pct(*s.bd_rate) : "n/a"; }

}  // namespace

std::string BenchReport::to_text() const {
  std::ostringstream out;
  out << "Skip-criteria benchmark: anchor = full RDO, test = criteria enabled\n";
  out << "QPs:";
  for (int qp : qps) out << ' ' << qp;
  out << '\n';
  if (criteria.empty()) {
    out << "Criteria: none (anchor only)\n";
  } else {
    out << "Criteria run: " << (criteria_run_id.empty() ? "-" : criteria_run_id) << '\n';
    for (const auto& c : criteria) out << "  " << c << '\n';
  }
  out << '\n';
  char line[256];
  std::snprintf(line, sizeof line, "%-28s %12s %12s %12s %12s\n", "Sequence", "Y BD-rate", "Mode evals",
                "Recursions", "Enc. time");
  out << line;
  for (const SequenceBench& s : sequences) {
    std::snprintf(line, sizeof line, "%-28s %12s %12s %12s %12s\n", s.sequence_id.c_str(), bd_cell(s).c_str(),
                  signed_pct(delta_pct(static_cast<double>(s.anchor_effort.mode_evaluations),
                                       static_cast<double>(s.test_effort.mode_evaluations)))
                      .c_str(),
                  signed_pct(delta_pct(static_cast<double>(s.anchor_effort.recursions_entered),
                                       static_cast<double>(s.test_effort.recursions_entered)))
                      .c_str(),
                  signed_pct(delta_pct(s.anchor_seconds, s.test_seconds)).c_str());
    out << line;
  }
  const auto mean = mean_bd_rate();
  std::snprintf(line, sizeof line, "%-28s %12s %12s %12s %12s\n", "Overall", mean ? signed_pct(*mean).c_str() : "n/a",
                signed_pct(mode_evaluation_delta_pct()).c_str(), signed_pct(recursion_delta_pct()).c_str(),
                signed_pct(wall_time_delta_pct()).c_str());
  out << line;
  for (const SequenceBench& s : sequences)
    if (!s.bd_rate) out << "note: " << s.sequence_id << ": BD-rate undefined (" << s.bd_rate_note << ")\n";
  out << '\n';
  out << "Reference, HEVC encoder on standard test sequences: encoding time -42.1%, Y BD-rate +0.7%\n";
  out << "Effort deltas count RD mode evaluations and split recursions; wall time is informational.\n";
  return out.str();
}

std::string BenchReport::to_csv() const {
  std::ostringstream out;
  out << "sequence,bd_rate_pct,anchor_mode_evaluations,test_mode_evaluations,mode_evaluation_delta_pct,"
         "anchor_recursions,test_recursions,recursion_delta_pct,anchor_cus,test_cus,skip_events\n";
  auto row = [&](const std::string& name, const std::optional<double>& bd, const RdoStats& a, const RdoStats& t) {
    out << name << ',' << (bd ? format_number(*bd) : "n/a") << ',' << a.mode_evaluations << ',' << t.mode_evaluations
        << ',' << format_number(delta_pct(static_cast<double>(a.mode_evaluations), static_cast<double>(t.mode_evaluations)))
        << ',' << a.recursions_entered << ',' << t.recursions_entered << ','
        << format_number(delta_pct(static_cast<double>(a.recursions_entered), static_cast<double>(t.recursions_entered)))
        << ',' << a.cus_evaluated << ',' << t.cus_evaluated << ',' << t.skip_events << '\n';
  };
  for (const SequenceBench& s : sequences) row(s.sequence_id, s.bd_rate, s.anchor_effort, s.test_effort);
  row("overall", mean_bd_rate(), anchor_effort(), test_effort());
  return out.str();
}

std::string BenchReport::points_csv() const {
  std::ostringstream out;
  out << "sequence,configuration,qp,bits,psnr,distortion,mode_evaluations,recursions\n";
  for (const SequenceBench& s : sequences)
    for (const auto* runs : {&s.anchor, &s.test})
      for (const EncodeRun& r : *runs)
        out << s.sequence_id << ',' << (runs == &s.anchor ? "anchor" : "test") << ',' << r.qp << ','
            << format_number(r.point.rate) << ',' << format_number(r.point.quality) << ','
            << r.stats.total_distortion << ',' << r.stats.rdo.mode_evaluations << ','
            << r.stats.rdo.recursions_entered << '\n';
  return out.str();
}

std::string BenchReport::timing_csv() const {
  std::ostringstream out;
  out << "sequence,configuration,qp,seconds\n";
  char buf[64];
  for (const SequenceBench& s : sequences)
    for (const auto* runs : {&s.anchor, &s.test})
      for (const EncodeRun& r : *runs) {
        std::snprintf(buf, sizeof buf, "%.6f", r.seconds);
        out << s.sequence_id << ',' << (runs == &s.anchor ? "anchor" : "test") << ',' << r.qp << ',' << buf << '\n';
      }
  return out.str();
}

BenchReport run_benchmark(const std::vector<Sequence>& sequences, const BenchConfig& config,
                          const CriteriaBundle* bundle) {
  if (sequences.empty()) throw DomainError("benchmark needs at least one sequence");
  if (config.qps.empty()) throw DomainError("benchmark needs at least one QP");
  if (bundle && !bundle->empty()) {
    const std::set<std::string> trained(bundle->provenance.training_sequences.begin(),
                                        bundle->provenance.training_sequences.end());
    for (const Sequence& s : sequences)
      if (trained.count(s.id))
        throw ConfigError("sequence '" + s.id + "' was used to train the criteria; benchmark needs held-out content");
  }
  const CriteriaBundle* active = bundle && !bundle->empty() ? bundle : nullptr;

  // Units: (sequence, qp, configuration), laid out so results land in fixed slots.
  const std::size_t nq = config.qps.size();
  const std::size_t units = sequences.size() * nq * 2;
  std::vector<EncodeRun> runs(units);
  parallel_for(units, config.threads, [&](std::size_t u) {
    const std::size_t seq = u / (nq * 2);
    const std::size_t q = (u / 2) % nq;
    const bool test = u % 2 == 1;
    EncoderConfig enc = config.encoder;
    enc.base_qp = config.qps[q];
    const auto start = std::chrono::steady_clock::now();
    const EncodedSequence e = encode_sequence(sequences[seq], enc, test ? active : nullptr);
    const auto stop = std::chrono::steady_clock::now();
    EncodeRun& r = runs[u];
    r.qp = enc.base_qp;
    r.stats = e.stats;
    r.point = {static_cast<double>(e.stats.total_bits), psnr(e.stats.total_distortion, e.pixels), enc.base_qp};
    r.seconds = std::chrono::duration<double>(stop - start).count();
  });

  BenchReport report;
  report.qps = config.qps;
  if (active) {
    report.criteria_run_id = active->provenance.run_id;
    for (int d = 0; d < 3; ++d)
      if (const SkipCriterion* c = active->for_depth(d))
        report.criteria.push_back("depth " + std::to_string(d) + ": " + c->conjunction());
  }
  for (std::size_t seq = 0; seq < sequences.size(); ++seq) {
    SequenceBench sb;
    sb.sequence_id = sequences[seq].id;
    std::vector<RdPoint> anchor_points, test_points;
    for (std::size_t q = 0; q < nq; ++q) {
      const EncodeRun& a = runs[(seq * nq + q) * 2];
      const EncodeRun& t = runs[(seq * nq + q) * 2 + 1];
      sb.anchor.push_back(a);
      sb.test.push_back(t);
      sb.anchor_effort += a.stats.rdo;
      sb.test_effort += t.stats.rdo;
      sb.anchor_seconds += a.seconds;
      sb.test_seconds += t.seconds;
      anchor_points.push_back(a.point);
      test_points.push_back(t.point);
    }
    try {
      sb.bd_rate = bd_rate(anchor_points, test_points);
    } catch (const DomainError& e) {
      sb.bd_rate_note = e.what();
    }
    report.sequences.push_back(std::move(sb));
  }
  return report;
}

}  // namespace cuskip
