#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

#include <Eigen/Dense>

#include "cmbench/error.hpp"
#include "cmbench/gate.hpp"
#include "cmbench/random.hpp"
#include "json_util.hpp"

namespace cmbench {

namespace {

constexpr double kMinStd = 1e-12;

DenseLayer random_layer(int outputs, int inputs, double scale, std::mt19937_64& rng) {
  DenseLayer l{Eigen::MatrixXd(outputs, inputs), Eigen::VectorXd::Zero(outputs)};
  for (int r = 0; r < outputs; ++r) {
    for (int c = 0; c < inputs; ++c) l.weights(r, c) = scale * standard_normal(rng);
  }
  return l;
}

Eigen::MatrixXd forward_logits(const std::vector<DenseLayer>& layers, const Eigen::MatrixXd& inputs,
                               std::vector<Eigen::MatrixXd>* activations) {
  Eigen::MatrixXd h = inputs;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (activations) activations->push_back(h);
    Eigen::MatrixXd z = h * layers[l].weights.transpose();
    z.rowwise() += layers[l].bias.transpose();
    if (l + 1 < layers.size()) z = z.cwiseMax(0.0);
    h = std::move(z);
  }
  return h;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(i).array() - m).exp().matrix();
    p.row(i) = e / e.sum();
  }
  return p;
}

double mean_cross_entropy(const Eigen::MatrixXd& logits, const std::vector<int>& labels) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
    total += lse - logits(i, labels[static_cast<std::size_t>(i)]);
  }
  return total / static_cast<double>(logits.rows());
}

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& x, const std::vector<std::size_t>& idx, std::size_t begin,
                        std::size_t end) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(end - begin), x.cols());
  for (std::size_t i = begin; i < end; ++i) out.row(static_cast<Eigen::Index>(i - begin)) = x.row(idx[i]);
  return out;
}

nlohmann::json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

GateModel GateModel::zeros(std::size_t dim) {
  GateModel m;
  m.provider = std::string(kBuiltinProviderId);
  m.dim = dim;
  m.mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  m.stddev = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(dim));
  m.layers.push_back({Eigen::MatrixXd::Zero(kBranchCount, static_cast<Eigen::Index>(dim)),
                      Eigen::VectorXd::Zero(kBranchCount)});
  return m;
}

std::array<double, kBranchCount> GateModel::logits(const std::vector<double>& descriptor) const {
  if (descriptor.size() != dim) {
    throw Error(ErrorCode::DimensionMismatch, "descriptor has " + std::to_string(descriptor.size()) +
                                                  " entries, model expects " + std::to_string(dim));
  }
  Eigen::MatrixXd x(1, static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < dim; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    x(0, k) = (descriptor[i] - mean(k)) / stddev(k);
  }
  const Eigen::MatrixXd z = forward_logits(layers, x, nullptr);
  std::array<double, kBranchCount> out{};
  for (std::size_t c = 0; c < kBranchCount; ++c) out[c] = z(0, static_cast<Eigen::Index>(c));
  return out;
}

std::size_t GateModel::parameter_count() const {
  std::size_t n = 0;
  for (const DenseLayer& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

LossGradient loss_and_gradient(const std::vector<DenseLayer>& layers, const Eigen::MatrixXd& inputs,
                               const std::vector<int>& labels, double weight_decay) {
  std::vector<Eigen::MatrixXd> acts;
  const Eigen::MatrixXd logits = forward_logits(layers, inputs, &acts);
  const auto n = static_cast<double>(inputs.rows());

  LossGradient g;
  g.loss = mean_cross_entropy(logits, labels);
  for (const DenseLayer& l : layers) g.loss += 0.5 * weight_decay * l.weights.squaredNorm();

  Eigen::MatrixXd dz = softmax_rows(logits);
  for (Eigen::Index i = 0; i < dz.rows(); ++i) dz(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
  dz /= n;

  g.weights.resize(layers.size());
  g.bias.resize(layers.size());
  for (std::size_t l = layers.size(); l-- > 0;) {
    g.weights[l] = dz.transpose() * acts[l] + weight_decay * layers[l].weights;
    g.bias[l] = dz.colwise().sum().transpose();
    if (l > 0) {
      Eigen::MatrixXd dh = dz * layers[l].weights;
      // acts[l] is the ReLU output of layer l-1; its zeros mark inactive units.
      dz = (acts[l].array() > 0.0).select(dh, 0.0);
    }
  }
  return g;
}

TrainResult train_gate(const std::vector<GateSample>& samples, const TrainHyper& hyper) {
  if (samples.empty()) throw Error(ErrorCode::EmptyInput, "no training samples");
  if (!(hyper.learning_rate > 0.0) || hyper.epochs < 0 || hyper.batch_size < 1 || hyper.hidden_width < 0 ||
      !(hyper.weight_decay >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "invalid training hyper-parameters");
  }
  const std::size_t dim = samples.front().descriptor.size();
  const std::size_t n = samples.size();
  if (dim == 0) throw Error(ErrorCode::DimensionMismatch, "empty descriptors");

  TrainResult result;
  std::set<int> present;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (samples[i].descriptor.size() != dim) {
      throw Error(ErrorCode::DimensionMismatch, "sample '" + samples[i].pair_id + "' has descriptor length " +
                                                    std::to_string(samples[i].descriptor.size()));
    }
    for (std::size_t k = 0; k < dim; ++k) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = samples[i].descriptor[k];
    if (samples[i].provider != samples.front().provider) {
      throw Error(ErrorCode::InvalidArgument, "samples mix embedding providers '" + samples.front().provider +
                                                  "' and '" + samples[i].provider + "'");
    }
    labels[i] = branch_code(samples[i].label);
    present.insert(labels[i]);
  }
  for (BranchId b : kAllBranches) {
    if (!present.contains(branch_code(b))) {
      result.warnings.push_back("class '" + std::string(branch_name(b)) + "' has no training samples");
    }
  }

  GateModel& model = result.model;
  model.dim = dim;
  model.seed = hyper.seed;
  model.provider = samples.front().provider;
  model.matcher_id = samples.front().matcher_id;
  model.mean = x.colwise().mean().transpose();
  model.stddev.resize(static_cast<Eigen::Index>(dim));
  for (Eigen::Index k = 0; k < x.cols(); ++k) {
    const double sd = std::sqrt((x.col(k).array() - model.mean(k)).square().mean());
    model.stddev(k) = sd > kMinStd ? sd : 1.0;
  }
  for (Eigen::Index k = 0; k < x.cols(); ++k) x.col(k) = (x.col(k).array() - model.mean(k)) / model.stddev(k);

  std::mt19937_64 rng(hyper.seed);
  const int d = static_cast<int>(dim);
  const int classes = static_cast<int>(kBranchCount);
  if (hyper.hidden_width > 0) {
    model.layers.push_back(random_layer(hyper.hidden_width, d, std::sqrt(2.0 / d), rng));
    model.layers.push_back(random_layer(classes, hyper.hidden_width, std::sqrt(1.0 / hyper.hidden_width), rng));
  } else {
    model.layers.push_back(random_layer(classes, d, std::sqrt(1.0 / d), rng));
  }

  result.initial_loss = mean_cross_entropy(forward_logits(model.layers, x, nullptr), labels);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  const auto batch = static_cast<std::size_t>(hyper.batch_size);
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    for (std::size_t begin = 0; begin < n; begin += batch) {
      const std::size_t end = std::min(n, begin + batch);
      const Eigen::MatrixXd xb = rows_of(x, order, begin, end);
      std::vector<int> yb;
      yb.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i) yb.push_back(labels[order[i]]);
      const LossGradient g = loss_and_gradient(model.layers, xb, yb, hyper.weight_decay);
      if (!std::isfinite(g.loss)) {
        throw Error(ErrorCode::NonFiniteLoss, "loss became non-finite at epoch " + std::to_string(epoch) +
                                                  ", batch starting at " + std::to_string(begin) +
                                                  "; lower the learning rate");
      }
      for (std::size_t l = 0; l < model.layers.size(); ++l) {
        model.layers[l].weights -= hyper.learning_rate * g.weights[l];
        model.layers[l].bias -= hyper.learning_rate * g.bias[l];
      }
    }
  }
  result.final_loss = mean_cross_entropy(forward_logits(model.layers, x, nullptr), labels);
  if (!std::isfinite(result.final_loss)) throw Error(ErrorCode::NonFiniteLoss, "final training loss is not finite");
  return result;
}

Prediction predict_branch(const GateModel& model, const std::vector<double>& descriptor) {
  const auto z = model.logits(descriptor);
  const double m = *std::max_element(z.begin(), z.end());
  Prediction p;
  double sum = 0.0;
  for (std::size_t c = 0; c < kBranchCount; ++c) {
    p.probabilities[c] = std::exp(z[c] - m);
    sum += p.probabilities[c];
  }
  for (double& v : p.probabilities) v /= sum;
  p.branch = static_cast<BranchId>(argmax_lowest(p.probabilities.data(), kBranchCount));
  return p;
}

nlohmann::json model_to_json(const GateModel& model) {
  nlohmann::json layers = nlohmann::json::array();
  for (const DenseLayer& l : model.layers) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weights.size()));
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
    }
    layers.push_back({{"rows", l.weights.rows()}, {"cols", l.weights.cols()}, {"weights", w}, {"bias", vector_json(l.bias)}});
  }
  return {{"schema", kGateModelSchema},
          {"provider", model.provider},
          {"matcher_id", model.matcher_id},
          {"dim", model.dim},
          {"normalization", {{"mean", vector_json(model.mean)}, {"std", vector_json(model.stddev)}}},
          {"layers", layers},
          {"class_order", {0, 1, 2, 3}},
          {"seed", model.seed}};
}

GateModel model_from_json(const nlohmann::json& j) {
  const detail::Where w{"<model>", 1};
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "model file is not a JSON object");
  detail::check_schema(j, kGateModelSchema, w);
  GateModel m;
  m.provider = detail::get_nonempty_string(j, "provider", w);
  m.matcher_id = detail::get_optional_string(j, "matcher_id", w);
  m.dim = detail::get_unsigned(j, "dim", w);
  m.seed = detail::get_unsigned(j, "seed", w);
  const auto& order = detail::require(j, "class_order", w);
  if (order != nlohmann::json({0, 1, 2, 3})) detail::schema_error(w, "class_order", "must be [0, 1, 2, 3]");
  const auto& norm = detail::require(j, "normalization", w);
  if (!norm.is_object()) detail::schema_error(w, "normalization", "expected an object");
  const auto mean = detail::get_number_array(norm, "mean", w);
  const auto sd = detail::get_number_array(norm, "std", w);
  if (mean.size() != m.dim || sd.size() != m.dim) {
    throw Error(ErrorCode::DimensionMismatch, "normalization length does not match dim");
  }
  m.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  m.stddev = Eigen::Map<const Eigen::VectorXd>(sd.data(), static_cast<Eigen::Index>(sd.size()));
  if ((m.stddev.array() <= 0.0).any()) detail::schema_error(w, "normalization.std", "must be positive");

  const auto& layers = detail::require(j, "layers", w);
  if (!layers.is_array() || layers.empty() || layers.size() > 2) detail::schema_error(w, "layers", "expected 1 or 2 layers");
  std::size_t inputs = m.dim;
  for (const auto& lj : layers) {
    if (!lj.is_object()) detail::schema_error(w, "layers", "expected objects");
    const auto rows = detail::get_unsigned(lj, "rows", w);
    const auto cols = detail::get_unsigned(lj, "cols", w);
    const auto weights = detail::get_number_array(lj, "weights", w);
    const auto bias = detail::get_number_array(lj, "bias", w);
    if (cols != inputs || weights.size() != rows * cols || bias.size() != rows || rows == 0) {
      throw Error(ErrorCode::DimensionMismatch, "layer shapes are inconsistent");
    }
    DenseLayer l{Eigen::MatrixXd(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)),
                 Eigen::Map<const Eigen::VectorXd>(bias.data(), static_cast<Eigen::Index>(rows))};
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        l.weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = weights[r * cols + c];
      }
    }
    m.layers.push_back(std::move(l));
    inputs = rows;
  }
  if (inputs != kBranchCount) throw Error(ErrorCode::DimensionMismatch, "model must output 4 logits");
  return m;
}

void save_model(const std::filesystem::path& path, const GateModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write model " + path.string());
  out << model_to_json(model).dump() << '\n';
}

GateModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open model " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::ParseError, path.string() + ": malformed JSON");
  return model_from_json(j);
}

}  // namespace cmbench
