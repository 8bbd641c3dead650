#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "cmbench/estimate.hpp"
#include "cmbench/geometry.hpp"
#include "cmbench/preprocess.hpp"

namespace cmbench {

// ---------------------------------------------------------------------------
// Embedding providers
// ---------------------------------------------------------------------------

using EmbeddingVector = std::vector<double>;

inline constexpr int kEmbedInputSize = 224;
inline constexpr int kEmbedGrid = 8;
inline constexpr int kEmbedOrientationBins = 8;
inline constexpr std::size_t kBuiltinEmbeddingDim = kEmbedGrid * kEmbedGrid * (kEmbedOrientationBins + 2);
inline constexpr std::string_view kBuiltinProviderId = "grid-orientation-v1";
inline constexpr std::string_view kEmbeddingSchema = "cmbench.embedding/1";

/// Maps an image to one global vector of fixed dimension.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::string id() const = 0;
  virtual std::size_t dim() const = 0;
  /// `image` may be null for providers that resolve by id only.
  virtual EmbeddingVector embed(std::string_view image_id, const GrayImage* image) const = 0;
};

/// Handcrafted default: 224x224 bilinear resize, 8x8 cells, per cell an
/// 8-bin magnitude-weighted gradient orientation histogram (normalized by cell
/// area) followed by luminance mean and standard deviation.
class GridOrientationProvider final : public EmbeddingProvider {
 public:
  std::string id() const override { return std::string(kBuiltinProviderId); }
  std::size_t dim() const override { return kBuiltinEmbeddingDim; }
  EmbeddingVector embed(std::string_view image_id, const GrayImage* image) const override;
};

struct EmbeddingRecord {
  std::string image_id;
  std::string provider;
  EmbeddingVector values;
};

/// Precomputed vectors from an embedding JSON-lines file, looked up by image id.
class ExternalEmbeddingProvider final : public EmbeddingProvider {
 public:
  /// Throws ParseError / SchemaViolation / DimensionMismatch.
  static ExternalEmbeddingProvider from_stream(std::istream& in, const std::string& source = "<stream>");
  static ExternalEmbeddingProvider from_file(const std::filesystem::path& path);

  std::string id() const override { return provider_; }
  std::size_t dim() const override { return dim_; }
  /// Throws InvalidArgument for unknown image ids.
  EmbeddingVector embed(std::string_view image_id, const GrayImage* image) const override;
  std::size_t size() const { return vectors_.size(); }

 private:
  std::string provider_;
  std::size_t dim_ = 0;
  std::map<std::string, EmbeddingVector, std::less<>> vectors_;
};

/// "builtin" (or the builtin provider id) or "external" with a file path.
/// Throws UnknownProvider.
std::unique_ptr<EmbeddingProvider> make_provider(std::string_view name, const std::filesystem::path& file = {});

/// Bilinear resize with pixel-centre alignment and clamped borders.
std::vector<double> resize_bilinear(const GrayImage& img, int out_width, int out_height);

nlohmann::json embedding_to_json(const EmbeddingRecord& rec);

// ---------------------------------------------------------------------------
// Fusion and labels
// ---------------------------------------------------------------------------

/// [ir | vis | |ir - vis| | ir * vis]. Throws DimensionMismatch.
std::vector<double> fuse(const EmbeddingVector& f_ir, const EmbeddingVector& f_vis);

/// Index of the maximum, lowest index on ties.
std::size_t argmax_lowest(const double* values, std::size_t n);

struct OracleLabel {
  BranchId label = BranchId::None;
  std::array<std::size_t, kBranchCount> inlier_counts{};
  std::array<Status, kBranchCount> statuses{};
};

/// Label from per-branch inlier counts: maximum count, ties to the lowest
/// branch code. Failed branches never win. Throws AllBranchesFailed.
OracleLabel label_from_counts(const std::array<std::size_t, kBranchCount>& counts,
                              const std::array<Status, kBranchCount>& statuses);

/// Runs RANSAC homography per branch and labels by inlier count. Depends only
/// on the matches, never on image content.
OracleLabel oracle_label(const std::array<MatchSet, kBranchCount>& branch_matches, const RansacConfig& cfg);

struct GateSample {
  std::string pair_id;
  std::string matcher_id;
  std::string provider = std::string(kBuiltinProviderId);
  std::vector<double> descriptor;
  BranchId label = BranchId::None;
  std::array<std::size_t, kBranchCount> inlier_counts{};
};

inline constexpr std::string_view kGateSampleSchema = "cmbench.gate-sample/1";
nlohmann::json sample_to_json(const GateSample& s);
GateSample sample_from_json(const nlohmann::json& j);
/// Throws ParseError / SchemaViolation with line numbers.
std::vector<GateSample> load_gate_samples(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Classifier
// ---------------------------------------------------------------------------

struct DenseLayer {
  Eigen::MatrixXd weights;  // rows = outputs, cols = inputs
  Eigen::VectorXd bias;
};

inline constexpr std::string_view kGateModelSchema = "cmbench.gate-model/1";

/// Softmax classifier over standardized fusion descriptors. One layer is a
/// linear model; two layers insert a ReLU hidden layer. The model owns its
/// standardization, so callers only ever pass raw descriptors.
struct GateModel {
  std::string provider;
  std::string matcher_id;
  std::size_t dim = 0;
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;
  std::vector<DenseLayer> layers;
  std::uint64_t seed = 0;

  /// A linear model with all-zero weights and identity normalization.
  static GateModel zeros(std::size_t dim);

  std::array<double, kBranchCount> logits(const std::vector<double>& descriptor) const;
  std::size_t parameter_count() const;
};

struct TrainHyper {
  double learning_rate = 0.1;
  int epochs = 100;
  int batch_size = 32;
  int hidden_width = 0;  // 0 = linear
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
};

struct TrainResult {
  GateModel model;
  double initial_loss = 0.0;
  double final_loss = 0.0;  // mean cross-entropy on the training set
  std::vector<std::string> warnings;
};

/// Mini-batch SGD on mean cross-entropy plus L2 weight decay. Deterministic
/// for a fixed seed. Throws EmptyInput, DimensionMismatch, NonFiniteLoss.
TrainResult train_gate(const std::vector<GateSample>& samples, const TrainHyper& hyper = {});

struct Prediction {
  BranchId branch = BranchId::None;
  std::array<double, kBranchCount> probabilities{};
};

/// Throws DimensionMismatch.
Prediction predict_branch(const GateModel& model, const std::vector<double>& descriptor);

struct LossGradient {
  double loss = 0.0;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> bias;
};

/// Objective on already-standardized rows: mean cross-entropy plus
/// 0.5 * weight_decay * sum of squared weights, with its analytic gradient.
LossGradient loss_and_gradient(const std::vector<DenseLayer>& layers, const Eigen::MatrixXd& inputs,
                               const std::vector<int>& labels, double weight_decay);

nlohmann::json model_to_json(const GateModel& model);
/// Throws SchemaViolation.
GateModel model_from_json(const nlohmann::json& j);
void save_model(const std::filesystem::path& path, const GateModel& model);
GateModel load_model(const std::filesystem::path& path);

}  // namespace cmbench
