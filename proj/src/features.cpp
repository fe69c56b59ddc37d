#include "cuskip/features.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "cuskip/error.hpp"
#include "cuskip/skip_runtime.hpp"

namespace cuskip {

namespace {

constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {"SF", "CBF",    "RDC", "Bits", "AND",
                                                                       "QP", "Lambda", "QPO", "PM"};

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_field(std::string_view text, const std::string& source, std::size_t line, std::string_view column) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
    throw ParseError(source, line, "invalid " + std::string(column) + " value '" + std::string(text) + "'");
  return value;
}

bool parse_flag(std::string_view text, const std::string& source, std::size_t line, std::string_view column) {
  if (text == "0") return false;
  if (text == "1") return true;
  throw ParseError(source, line, "invalid " + std::string(column) + " value '" + std::string(text) + "' (expected 0 or 1)");
}

}  // namespace

std::string_view feature_name(FeatureId id) { return kFeatureNames[static_cast<int>(id)]; }

std::optional<FeatureId> feature_from_name(std::string_view name) {
  if (name == "\xCE\xBB") return FeatureId::Lambda;  // λ
  if (iequals(name, "RCD")) return FeatureId::RDC;
  for (FeatureId id : kAllFeatures)
    if (iequals(name, feature_name(id))) return id;
  return std::nullopt;
}

std::optional<IntegerDomain> integer_domain(FeatureId id) {
  switch (id) {
    case FeatureId::SF:
    case FeatureId::CBF:
      return IntegerDomain{0, 1};
    case FeatureId::QPO:
      return IntegerDomain{1, 4};
    case FeatureId::PM:
      return IntegerDomain{0, 2};
    default:
      return std::nullopt;
  }
}

bool is_integer_valued(FeatureId id) { return integer_domain(id).has_value() || id == FeatureId::QP; }

double FeatureVector::value(FeatureId id) const {
  switch (id) {
    case FeatureId::SF:
      return sf ? 1.0 : 0.0;
    case FeatureId::CBF:
      return cbf ? 1.0 : 0.0;
    case FeatureId::RDC:
      return rdc;
    case FeatureId::Bits:
      return bits;
    case FeatureId::AND:
      return avg_neighbour_depth;
    case FeatureId::QP:
      return qp;
    case FeatureId::Lambda:
      return lambda;
    case FeatureId::QPO:
      return qpo;
    case FeatureId::PM:
      return pm;
  }
  return 0.0;
}

void FeatureVector::validate() const {
  if (sf && cbf) throw DomainError("skip flag set together with CBF");
  if (!(avg_neighbour_depth >= 0.0 && avg_neighbour_depth <= 3.0)) throw DomainError("AND outside [0, 3]");
  if (qpo < 1 || qpo > 4) throw DomainError("QPO outside [1, 4]");
  if (pm < 0 || pm > 2) throw DomainError("PM outside {0, 1, 2}");
  if (!(rdc >= 0.0) || !(bits >= 0.0)) throw DomainError("RDC and Bits must be non-negative");
}

std::vector<Sample> Dataset::at_depth(int depth) const {
  std::vector<Sample> out;
  std::copy_if(samples.begin(), samples.end(), std::back_inserter(out),
               [depth](const Sample& s) { return s.depth == depth; });
  return out;
}

std::array<std::size_t, 3> Dataset::depth_counts() const {
  std::array<std::size_t, 3> counts{};
  for (const Sample& s : samples)
    if (s.depth >= 0 && s.depth < 3) ++counts[s.depth];
  return counts;
}

Dataset Dataset::merge(std::vector<Dataset> parts) {
  Dataset out;
  for (Dataset& part : parts)
    out.samples.insert(out.samples.end(), std::make_move_iterator(part.samples.begin()),
                       std::make_move_iterator(part.samples.end()));
  std::stable_sort(out.samples.begin(), out.samples.end(), [](const Sample& a, const Sample& b) {
    if (a.provenance != b.provenance) return a.provenance < b.provenance;
    return a.depth < b.depth;
  });
  return out;
}

double average_neighbour_depth(std::optional<int> above, std::optional<int> left, int own_depth) {
  if (above && left) return (*above + *left) / 2.0;
  if (above) return *above;
  if (left) return *left;
  return own_depth;
}

FeatureVector features_from_evaluation(const CuEvaluation& evaluation) {
  if (!evaluation.merge || !evaluation.inter)
    throw ContractViolation("features requested before both merge/skip and whole-CU tests completed");
  FeatureVector f;
  f.sf = evaluation.merge->skip_flag;
  f.cbf = evaluation.merge->cbf;
  f.rdc = evaluation.merge->rd_cost;
  f.bits = evaluation.merge->bits;
  f.avg_neighbour_depth = evaluation.avg_neighbour_depth;
  f.qp = evaluation.qp;
  f.lambda = evaluation.lambda;
  f.qpo = evaluation.qp_offset;
  f.pm = evaluation.inter->pm;
  return f;
}

Sample extract_sample(const CuEvaluation& evaluation, bool full_rdo_label, Provenance provenance) {
  Sample s;
  s.features = features_from_evaluation(evaluation);
  s.depth = evaluation.unit.depth;
  if (s.depth > 2) throw DomainError("depth-3 CUs carry no split decision");
  s.label = full_rdo_label;
  s.provenance = std::move(provenance);
  s.provenance.cu_x = evaluation.unit.x;
  s.provenance.cu_y = evaluation.unit.y;
  return s;
}

std::vector<Sample> collect_samples(const EncodedFrame& frame, const std::string& sequence_id, int base_qp,
                                    int frame_index) {
  std::vector<Sample> out;
  auto visit = [&](auto&& self, const CuTree& node) -> void {
    if (node.unit.depth > 2) return;
    Sample s;
    s.features = node.features;
    s.depth = node.unit.depth;
    s.label = node.split;
    s.provenance = {sequence_id, base_qp, frame_index, node.unit.x, node.unit.y};
    out.push_back(std::move(s));
    for (const CuTree& child : node.children) self(self, child);
  };
  for (const CuTree& ctu : frame.ctus) visit(visit, ctu);
  return out;
}

Dataset collect_samples(const EncodedSequence& encoded, const std::string& sequence_id, int base_qp) {
  Dataset dataset;
  for (std::size_t i = 0; i < encoded.frames.size(); ++i) {
    auto part = collect_samples(encoded.frames[i], sequence_id, base_qp, static_cast<int>(i + 1));
    dataset.samples.insert(dataset.samples.end(), part.begin(), part.end());
  }
  return dataset;
}

double pearson_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("correlation columns differ in length");
  if (x.size() < 2) throw UndefinedResult("correlation needs at least two values");
  // Single pass with running means and co-moments.
  double mean_x = 0.0, mean_y = 0.0, m2_x = 0.0, m2_y = 0.0, co = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double n = static_cast<double>(i + 1);
    const double dx = x[i] - mean_x;
    mean_x += dx / n;
    const double dy = y[i] - mean_y;
    mean_y += dy / n;
    m2_x += dx * (x[i] - mean_x);
    m2_y += dy * (y[i] - mean_y);
    co += dx * (y[i] - mean_y);
  }
  if (m2_x <= 0.0 || m2_y <= 0.0) throw UndefinedResult("correlation of a constant column is undefined");
  return std::clamp(co / std::sqrt(m2_x * m2_y), -1.0, 1.0);
}

std::optional<double> CorrelationTable::abs_at(int depth, FeatureId id) const {
  const auto& cell = r[depth][static_cast<int>(id)];
  if (!cell) return std::nullopt;
  return std::abs(*cell);
}

std::string CorrelationTable::to_text() const {
  std::ostringstream out;
  out << std::left << std::setw(7) << "Depth";
  for (FeatureId id : kAllFeatures) out << std::right << std::setw(8) << feature_name(id);
  out << std::right << std::setw(10) << "Samples" << '\n';
  for (int d = 0; d < 3; ++d) {
    out << std::left << std::setw(7) << d;
    for (FeatureId id : kAllFeatures) {
      const auto v = abs_at(d, id);
      std::ostringstream cell;
      if (v)
        cell << std::fixed << std::setprecision(2) << *v;
      else
        cell << "n/a";
      out << std::right << std::setw(8) << cell.str();
    }
    out << std::right << std::setw(10) << sample_counts[d] << '\n';
  }
  return out.str();
}

std::string CorrelationTable::to_grid() const {
  std::ostringstream out;
  out << "depth";
  for (FeatureId id : kAllFeatures) out << ',' << feature_name(id);
  out << ",samples\n";
  for (int d = 0; d < 3; ++d) {
    out << d;
    for (FeatureId id : kAllFeatures) {
      const auto v = abs_at(d, id);
      out << ',' << (v ? format_number(*v) : std::string("n/a"));
    }
    out << ',' << sample_counts[d] << '\n';
  }
  return out.str();
}

CorrelationTable correlation_table(const Dataset& dataset) {
  CorrelationTable table;
  for (int d = 0; d < 3; ++d) {
    const auto samples = dataset.at_depth(d);
    table.sample_counts[d] = samples.size();
    std::vector<double> labels;
    labels.reserve(samples.size());
    for (const Sample& s : samples) labels.push_back(s.label ? 1.0 : 0.0);
    for (FeatureId id : kAllFeatures) {
      std::vector<double> column;
      column.reserve(samples.size());
      for (const Sample& s : samples) column.push_back(s.features.value(id));
      try {
        table.r[d][static_cast<int>(id)] = pearson_correlation(column, labels);
      } catch (const UndefinedResult&) {
        table.r[d][static_cast<int>(id)] = std::nullopt;
      }
    }
  }
  return table;
}

std::size_t BinnedColumn::bin_of(double value) const {
  return static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), value) - edges.begin());
}

BinnedColumn bin_continuous(std::span<const double> values, int bin_count) {
  if (bin_count < 2) throw DomainError("bin count must be at least 2");
  BinnedColumn out;
  if (values.empty()) return out;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> distinct = sorted;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  if (distinct.size() <= static_cast<std::size_t>(bin_count)) {
    for (std::size_t i = 1; i < distinct.size(); ++i) {
      const double lo = distinct[i - 1], hi = distinct[i];
      double mid = lo + (hi - lo) / 2.0;
      if (!(mid > lo)) mid = hi;
      out.edges.push_back(mid);
    }
  } else {
    const double last = static_cast<double>(sorted.size() - 1);
    for (int i = 1; i < bin_count; ++i) {
      const double pos = last * i / bin_count;
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const double frac = pos - static_cast<double>(lo);
      const double edge =
          lo + 1 < sorted.size() ? sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]) : sorted[lo];
      out.edges.push_back(edge);
    }
    out.edges.erase(std::unique(out.edges.begin(), out.edges.end()), out.edges.end());
  }

  out.values.reserve(values.size());
  for (double v : values) {
    const std::size_t bin = out.bin_of(v);
    out.values.push_back(bin == 0 ? sorted.front() : out.edges[bin - 1]);
  }
  return out;
}

const std::array<std::string_view, 16> kDatasetColumns = {
    "SF",    "CBF",   "RDC",      "Bits",    "AND",   "QP",    "Lambda", "QPO",
    "PM",    "depth", "label",    "sequence", "base_qp", "frame", "cu_x",   "cu_y"};

std::string format_dataset(const Dataset& dataset) {
  std::string out;
  for (std::size_t i = 0; i < kDatasetColumns.size(); ++i) {
    if (i) out += ',';
    out += kDatasetColumns[i];
  }
  out += '\n';
  for (const Sample& s : dataset.samples) {
    const FeatureVector& f = s.features;
    if (s.provenance.sequence_id.find_first_of(",\n") != std::string::npos)
      throw DomainError("sequence id may not contain commas or newlines");
    out += f.sf ? "1," : "0,";
    out += f.cbf ? "1," : "0,";
    out += format_number(f.rdc) + ',' + format_number(f.bits) + ',' + format_number(f.avg_neighbour_depth) + ',';
    out += std::to_string(f.qp) + ',' + format_number(f.lambda) + ',' + std::to_string(f.qpo) + ',' +
           std::to_string(f.pm) + ',';
    out += std::to_string(s.depth) + ',' + (s.label ? "1," : "0,");
    out += s.provenance.sequence_id + ',' + std::to_string(s.provenance.base_qp) + ',' +
           std::to_string(s.provenance.frame_index) + ',' + std::to_string(s.provenance.cu_x) + ',' +
           std::to_string(s.provenance.cu_y) + '\n';
  }
  return out;
}

Dataset parse_dataset(std::string_view text, const std::string& source) {
  Dataset dataset;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header_seen = false;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto fields = split_fields(line, ',');
    if (!header_seen) {
      if (fields.size() != kDatasetColumns.size() || !std::equal(fields.begin(), fields.end(), kDatasetColumns.begin()))
        throw ParseError(source, line_no, "unexpected dataset header");
      header_seen = true;
      continue;
    }
    if (fields.size() != kDatasetColumns.size())
      throw ParseError(source, line_no,
                       "expected " + std::to_string(kDatasetColumns.size()) + " columns, found " +
                           std::to_string(fields.size()));
    Sample s;
    FeatureVector& f = s.features;
    f.sf = parse_flag(fields[0], source, line_no, "SF");
    f.cbf = parse_flag(fields[1], source, line_no, "CBF");
    f.rdc = parse_field<double>(fields[2], source, line_no, "RDC");
    f.bits = parse_field<double>(fields[3], source, line_no, "Bits");
    f.avg_neighbour_depth = parse_field<double>(fields[4], source, line_no, "AND");
    f.qp = parse_field<int>(fields[5], source, line_no, "QP");
    f.lambda = parse_field<double>(fields[6], source, line_no, "Lambda");
    f.qpo = parse_field<int>(fields[7], source, line_no, "QPO");
    f.pm = parse_field<int>(fields[8], source, line_no, "PM");
    s.depth = parse_field<int>(fields[9], source, line_no, "depth");
    s.label = parse_flag(fields[10], source, line_no, "label");
    s.provenance.sequence_id = std::string(fields[11]);
    s.provenance.base_qp = parse_field<int>(fields[12], source, line_no, "base_qp");
    s.provenance.frame_index = parse_field<int>(fields[13], source, line_no, "frame");
    s.provenance.cu_x = parse_field<int>(fields[14], source, line_no, "cu_x");
    s.provenance.cu_y = parse_field<int>(fields[15], source, line_no, "cu_y");
    if (s.depth < 0 || s.depth > 2) throw ParseError(source, line_no, "depth must be 0, 1 or 2");
    try {
      f.validate();
    } catch (const DomainError& e) {
      throw ParseError(source, line_no, e.what());
    }
    dataset.samples.push_back(std::move(s));
  }
  if (!header_seen) throw ParseError(source, 1, "missing dataset header");
  return dataset;
}

void export_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << format_dataset(dataset);
}

Dataset import_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_dataset(text.str(), path);
}

}  // namespace cuskip
