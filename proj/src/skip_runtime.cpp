#include "cuskip/skip_runtime.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "cuskip/error.hpp"

namespace cuskip {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::optional<double> parse_double(std::string_view text) {
  text = trim(text);
  double value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
  return value;
}

template <typename T>
T parse_integer(std::string_view text, const std::string& source, std::size_t line, std::string_view column) {
  text = trim(text);
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
    throw ParseError(source, line, "invalid " + std::string(column) + " '" + std::string(text) + "'");
  return value;
}

Predicate parse_term(std::string_view term) {
  struct Op {
    std::string_view token;
    Comparator op;
  };
  // Longer tokens first so ">=" is not read as "=".
  static constexpr Op kOps[] = {{">=", Comparator::GreaterEqual},
                                {"\xE2\x89\xA5", Comparator::GreaterEqual},  // ≥
                                {"==", Comparator::Equal},
                                {"<", Comparator::Less},
                                {"=", Comparator::Equal}};
  for (const Op& op : kOps) {
    const auto pos = term.find(op.token);
    if (pos == std::string_view::npos) continue;
    const std::string_view name = trim(term.substr(0, pos));
    std::string_view rest = term.substr(pos + op.token.size());
    if (!rest.empty() && (rest.front() == '=' || rest.front() == '<' || rest.front() == '>'))
      throw ConfigError("unsupported comparator in term '" + std::string(term) + "'");
    const auto feature = feature_from_name(name);
    if (!feature) throw ConfigError("unknown feature '" + std::string(name) + "' in criterion");
    const auto value = parse_double(rest);
    if (!value) throw ConfigError("invalid threshold in term '" + std::string(term) + "'");
    return {*feature, op.op, *value};
  }
  throw ConfigError("term '" + std::string(term) + "' has no comparator (expected <, >= or =)");
}

}  // namespace

std::string format_number(double value) {
  char buffer[64];
  auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
  if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
  return std::string(buffer, ptr);
}

std::string_view comparator_symbol(Comparator op) {
  switch (op) {
    case Comparator::Less:
      return "<";
    case Comparator::GreaterEqual:
      return ">=";
    case Comparator::Equal:
      return "=";
  }
  return "?";
}

bool Predicate::holds(const FeatureVector& features) const {
  const double v = features.value(feature);
  switch (op) {
    case Comparator::Less:
      return v < value;
    case Comparator::GreaterEqual:
      return v >= value;
    case Comparator::Equal:
      return v == value;
  }
  return false;
}

std::string Predicate::to_string() const {
  return std::string(feature_name(feature)) + " " + std::string(comparator_symbol(op)) + " " + format_number(value);
}

std::string SkipCriterion::conjunction() const {
  std::string out;
  for (std::size_t i = 0; i < predicates.size(); ++i) {
    if (i) out += " & ";
    out += predicates[i].to_string();
  }
  return out;
}

std::vector<Predicate> parse_conjunction(std::string_view text) {
  std::vector<Predicate> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto pos = text.find_first_of("&,", start);
    const std::string_view term = trim(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (term.empty()) throw ConfigError("empty term in criterion '" + std::string(text) + "'");
    out.push_back(parse_term(term));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

const SkipCriterion* CriteriaBundle::for_depth(int depth) const {
  if (depth < 0 || depth > 2) return nullptr;
  const auto& slot = per_depth[depth];
  return slot ? &*slot : nullptr;
}

bool CriteriaBundle::empty() const { return size() == 0; }

std::size_t CriteriaBundle::size() const {
  return static_cast<std::size_t>(std::count_if(per_depth.begin(), per_depth.end(), [](const auto& c) { return c.has_value(); }));
}

void CriteriaBundle::validate() const {
  for (int d = 0; d < 3; ++d)
    if (per_depth[d] && per_depth[d]->cu_depth != d)
      throw ConfigError("criterion for depth " + std::to_string(per_depth[d]->cu_depth) + " stored in slot " +
                        std::to_string(d));
}

bool evaluate_criterion(const SkipCriterion& criterion, const FeatureVector& features) {
  return std::all_of(criterion.predicates.begin(), criterion.predicates.end(),
                     [&](const Predicate& p) { return p.holds(features); });
}

SkipDecision apply_skip(int cu_depth, const FeatureVector& features, const CriteriaBundle* bundle) {
  if (!bundle) return SkipDecision::Continue;
  const SkipCriterion* criterion = bundle->for_depth(cu_depth);
  if (criterion && evaluate_criterion(*criterion, features)) return SkipDecision::SkipRecursion;
  return SkipDecision::Continue;
}

std::string format_criteria_file(const std::vector<SkipCriterion>& criteria, const BundleProvenance& provenance) {
  std::ostringstream out;
  out << "# cuskip-criteria v1\n";
  out << "# run_id=" << provenance.run_id << '\n';
  out << "# min_accuracy=" << format_number(provenance.min_accuracy) << '\n';
  out << "# min_coverage=" << format_number(provenance.min_coverage) << '\n';
  out << "# training_sequences=";
  for (std::size_t i = 0; i < provenance.training_sequences.size(); ++i)
    out << (i ? "," : "") << provenance.training_sequences[i];
  out << '\n';
  out << "# depth\tcriterion\taccuracy_pct\tcoverage_pct\tcovered\tnot_split\tdepth_total\tnode_depth\tnode_position\n";
  for (const SkipCriterion& c : criteria) {
    char acc[32], cov[32];
    std::snprintf(acc, sizeof acc, "%.4f", 100.0 * c.accuracy());
    std::snprintf(cov, sizeof cov, "%.4f", 100.0 * c.coverage());
    out << c.cu_depth << '\t' << c.conjunction() << '\t' << acc << '\t' << cov << '\t' << c.covered << '\t'
        << c.not_split << '\t' << c.depth_total << '\t' << c.source.node_depth << '\t' << c.source.position << '\n';
  }
  return out.str();
}

void write_criteria_file(const std::string& path, const std::vector<SkipCriterion>& criteria,
                         const BundleProvenance& provenance) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << format_criteria_file(criteria, provenance);
}

CriteriaFile parse_criteria_file(std::string_view text, const std::string& source) {
  CriteriaFile file;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  bool magic_seen = false;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      const std::string_view body = trim(line.substr(1));
      if (body == "cuskip-criteria v1") {
        magic_seen = true;
        continue;
      }
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) continue;
      const std::string_view key = body.substr(0, eq);
      const std::string_view value = body.substr(eq + 1);
      if (key == "run_id") {
        file.provenance.run_id = std::string(value);
      } else if (key == "min_accuracy" || key == "min_coverage") {
        const auto v = parse_double(value);
        if (!v) throw ParseError(source, line_no, "invalid " + std::string(key));
        (key == "min_accuracy" ? file.provenance.min_accuracy : file.provenance.min_coverage) = *v;
      } else if (key == "training_sequences") {
        std::string_view rest = value;
        while (!rest.empty()) {
          const auto comma = rest.find(',');
          file.provenance.training_sequences.emplace_back(trim(rest.substr(0, comma)));
          rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
        }
      }
      continue;
    }
    if (!magic_seen) throw ParseError(source, line_no, "missing '# cuskip-criteria v1' header");

    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 9) throw ParseError(source, line_no, "expected 9 tab-separated columns");

    SkipCriterion c;
    c.cu_depth = parse_integer<int>(fields[0], source, line_no, "depth");
    if (c.cu_depth < 0 || c.cu_depth > 2) throw ParseError(source, line_no, "criterion depth must be 0, 1 or 2");
    try {
      c.predicates = parse_conjunction(fields[1]);
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
    c.covered = parse_integer<std::uint64_t>(fields[4], source, line_no, "covered");
    c.not_split = parse_integer<std::uint64_t>(fields[5], source, line_no, "not_split");
    c.depth_total = parse_integer<std::uint64_t>(fields[6], source, line_no, "depth_total");
    c.source.node_depth = parse_integer<int>(fields[7], source, line_no, "node_depth");
    c.source.position = parse_integer<std::uint64_t>(fields[8], source, line_no, "node_position");
    if (c.not_split > c.covered || c.covered > c.depth_total)
      throw ParseError(source, line_no, "inconsistent criterion counts");
    file.criteria.push_back(std::move(c));
  }
  if (!magic_seen) throw ParseError(source, line_no ? line_no : 1, "missing '# cuskip-criteria v1' header");
  return file;
}

CriteriaFile read_criteria_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open criteria file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_criteria_file(text.str(), path);
}

CriteriaBundle make_bundle(const std::vector<SkipCriterion>& criteria, BundleProvenance provenance) {
  CriteriaBundle bundle;
  bundle.provenance = std::move(provenance);
  for (const SkipCriterion& c : criteria) {
    if (c.cu_depth < 0 || c.cu_depth > 2) throw ConfigError("criterion depth must be 0, 1 or 2");
    if (bundle.per_depth[c.cu_depth])
      throw ConfigError("more than one criterion for depth " + std::to_string(c.cu_depth));
    bundle.per_depth[c.cu_depth] = c;
  }
  return bundle;
}

CriteriaBundle load_criteria_bundle(const std::string& path) {
  CriteriaFile file = read_criteria_file(path);
  return make_bundle(file.criteria, std::move(file.provenance));
}

}  // namespace cuskip
