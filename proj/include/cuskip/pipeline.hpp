#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cuskip/cart.hpp"
#include "cuskip/codec.hpp"
#include "cuskip/manifest.hpp"
#include "cuskip/pruning.hpp"

namespace cuskip::pipeline {

namespace fs = std::filesystem;

// An output file exists and --force was not given.
class OutputExists : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum ExitCode : int { kOk = 0, kUsage = 2, kDataError = 3, kEmptyPruning = 4, kRerunMismatch = 5 };

struct Outcome {
  int exit_code = kOk;
  std::vector<fs::path> outputs;
  RunManifest manifest;
};

struct GenerateOptions {
  fs::path spec;
  fs::path out;
  bool force = false;
};

struct ExtractOptions {
  std::vector<fs::path> sequences;  // stems, .hdr/.y files or directories
  std::vector<int> qps{22, 27, 32, 37};
  EncoderConfig encoder;
  fs::path out;
  unsigned threads = 0;
  bool force = false;
};

struct TrainOptions {
  fs::path dataset;
  fs::path out;
  TrainConstraints constraints;
  int folds = 5;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  bool force = false;
};

struct PruneOptions {
  fs::path models;  // directory holding model_d0.json .. model_d2.json
  fs::path out;
  PruneThresholds thresholds;
  std::string run_id;  // derived from the model checksums when empty
  bool force = false;
};

struct BenchOptions {
  std::vector<fs::path> sequences;
  std::optional<fs::path> criteria;
  std::vector<int> qps{22, 27, 32, 37};
  EncoderConfig encoder;
  fs::path out;
  unsigned threads = 0;
  bool force = false;
};

struct CorrelateOptions {
  fs::path dataset;
  fs::path out;
  bool force = false;
};

// Per-depth datasets smaller than this train with a warning.
inline constexpr std::size_t kSmallDatasetWarning = 1000;

// Expands directories to the sorted stems of the sequences they contain.
std::vector<fs::path> resolve_sequence_stems(const std::vector<fs::path>& inputs);

Outcome cmd_generate(const GenerateOptions& options, std::ostream& log, std::vector<std::string> argv = {});
Outcome cmd_extract(const ExtractOptions& options, std::ostream& log, std::vector<std::string> argv = {});
Outcome cmd_train(const TrainOptions& options, std::ostream& log, std::vector<std::string> argv = {});
Outcome cmd_prune(const PruneOptions& options, std::ostream& log, std::vector<std::string> argv = {});
Outcome cmd_bench(const BenchOptions& options, std::ostream& log, std::vector<std::string> argv = {});
Outcome cmd_correlate(const CorrelateOptions& options, std::ostream& log, std::vector<std::string> argv = {});

struct RerunResult {
  int exit_code = kOk;
  fs::path out;
  std::vector<std::string> mismatches;  // output paths whose checksum differs or that are missing
};

// Re-executes the command recorded in `manifest` into `out` (default: the
// manifest directory with a "-rerun" suffix) and compares every non-volatile
// output checksum.
RerunResult rerun(const fs::path& manifest, std::optional<fs::path> out, std::ostream& log);

}  // namespace cuskip::pipeline
