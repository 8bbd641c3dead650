#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "cmbench/evaluate.hpp"
#include "cmbench/gate.hpp"
#include "cmbench/report.hpp"

namespace cmbench {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNothingEvaluable = 3;

/// Raised when the inputs parse but leave nothing to evaluate.
class NothingEvaluable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Task family for the eval commands; geo covers geo and geo_hard pairs.
enum class EvalFamily { Homography, Pose, Geo };

struct RunOptions {
  std::filesystem::path manifest;
  std::filesystem::path matches_dir;
  std::filesystem::path out;  // empty: stdout
  ReportFormat format = ReportFormat::Csv;
  EvalSettings settings;
  std::vector<std::string> matchers;  // empty: every matcher with records
  std::vector<double> thresholds;     // empty: the task defaults
};

/// 5/10/20 px, 5/10/20 degrees, 3/5/10 m.
std::vector<double> default_thresholds(EvalFamily f);

/// Throws Error on bad inputs and NothingEvaluable for an empty evaluable set.
std::vector<ReportRow> run_eval(EvalFamily family, const RunOptions& options, std::ostream& log);

struct EmbeddingOptions {
  std::string provider = "builtin";
  std::filesystem::path embeddings;  // external provider file
  std::filesystem::path cache_dir;   // empty: no cache
};

struct GateLabelOptions {
  std::filesystem::path manifest;
  std::filesystem::path matches_dir;
  std::filesystem::path out;        // samples JSON-lines
  std::filesystem::path skip_file;  // empty: <out>.skipped.jsonl
  EmbeddingOptions embedding;
  EvalSettings settings;
  std::vector<std::string> matchers;
};

struct SkippedPair {
  std::string pair_id;
  std::string matcher_id;
  std::string reason;
  std::array<std::size_t, kBranchCount> inlier_counts{};
};

struct GateLabelResult {
  std::vector<GateSample> samples;
  std::vector<SkippedPair> skipped;
};

GateLabelResult run_gate_label(const GateLabelOptions& options, std::ostream& log);

struct GateTrainOptions {
  std::filesystem::path samples;
  std::filesystem::path out_dir;
  bool shared = false;
  std::vector<std::string> matchers;
  TrainHyper hyper;
};

/// Model file name for a matcher, or the shared model.
std::string gate_model_filename(const std::string& matcher_id, bool shared);

std::map<std::string, TrainResult> run_gate_train(const GateTrainOptions& options, std::ostream& log);

struct GateEvalOptions {
  std::filesystem::path manifest;
  std::filesystem::path matches_dir;
  std::filesystem::path models_dir;
  std::filesystem::path out;
  ReportFormat format = ReportFormat::Csv;
  EmbeddingOptions embedding;
  EvalSettings settings;
  std::vector<std::string> matchers;
  double threshold = 10.0;  // AUC@10 for homography and pose, SR@10m for geo
};

/// Columns baseline, adaptive, oracle, gain_pct; gain is the relative change
/// of adaptive over baseline in percent.
std::vector<ReportRow> run_gate_eval(const GateEvalOptions& options, std::ostream& log);

/// (adaptive - baseline) / baseline * 100; 0 when both are 0, missing when
/// only the baseline is 0.
std::optional<double> gain_percent(double baseline, double adaptive);

struct SynthOptions {
  std::filesystem::path out;  // manifest path
  int count = 10;
  std::uint64_t seed = 0;
  int width = 640;
  int height = 480;
  std::string dataset_id = "synthetic";
  bool images = false;
  std::filesystem::path matches_out;  // empty: no matches
  std::string matcher_id = "synthetic-oracle";
  std::string category = "sparse";
  int num_matches = 200;
  double noise_px = 0.0;
  double outlier_ratio = 0.0;
};

std::vector<PairManifest> run_synth_pairs(const SynthOptions& options, std::ostream& log);

/// Deterministic textured test image for a seed.
GrayImage synthetic_texture(std::uint64_t seed, int width, int height);
/// Bilinear inverse warp of `src` into a frame of the given size; outside is 0.
GrayImage warp_image(const GrayImage& src, const Homography& h, int width, int height);

inline constexpr std::string_view kPreprocessConfigSchema = "cmbench.preprocess-config/1";
nlohmann::json preprocess_config_to_json(const BranchParams& p);
BranchParams preprocess_config_from_json(const nlohmann::json& j);

struct PreprocessOptions {
  std::vector<std::filesystem::path> inputs;
  std::filesystem::path out_dir;
  BranchId branch = BranchId::None;
  BranchParams params;
  std::filesystem::path config;        // read parameters from here when set
  std::filesystem::path write_config;  // write the effective parameters here
  int workers = 1;
};

void run_preprocess(const PreprocessOptions& options, std::ostream& log);

struct ReportOptions {
  std::vector<std::filesystem::path> inputs;
  std::filesystem::path out;
  ReportFormat format = ReportFormat::Csv;
  bool force = false;
};

/// Merged and re-sorted rows. Throws FingerprintMismatch unless forced.
std::vector<ReportRow> run_report(const ReportOptions& options);

/// Writes rows to options.out (or `stdout_sink` when empty).
void emit_report(const std::vector<ReportRow>& rows, const std::filesystem::path& out, ReportFormat format,
                 std::ostream& stdout_sink);

/// Runs `body` and maps exceptions onto exit codes, logging the message.
int guarded(std::ostream& log, const std::function<void()>& body);

}  // namespace cmbench
