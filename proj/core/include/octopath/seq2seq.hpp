#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "octopath/dataset.hpp"

namespace octopath {

enum class Head : std::uint8_t { Classification = 0, Regression = 1 };

struct ModelSpec {
  GridSpec grid;
  int hidden_dim = 64;
  int n_layers = 1;
  int embed_dim = 64;
  int tau_i = 4;
  int tau_o = 10;
  Head head = Head::Classification;

  /// Window cells + current route point + the tau_o future route points, which
  /// are filled in on the last encoder step only.
  [[nodiscard]] int input_dim() const { return grid.n_classes() + 2 + 2 * tau_o; }
  [[nodiscard]] int n_classes() const { return grid.n_classes(); }
  [[nodiscard]] int output_dim() const { return head == Head::Classification ? n_classes() : 2; }
  /// Throws InvalidSpec.
  void validate() const;
  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

using Tensor = Eigen::MatrixXd;

/// All weights as an ordered tensor list. Per encoder layer:
///   Wz Wr Wh (hidden x in), Uz Ur Uh (hidden x hidden), bz br bh.
/// Per decoder layer:
///   Wz Wr Ws (hidden x in), Uz Ur Us, Cz Cr Cs (hidden x hidden), bz br bs.
/// Then E (embed x rows), Us_out, Uc_out (embed x hidden), Uo (out x embed), bo.
/// E has one column per class plus the start token (classification) or the
/// columns (x, y, start) for the regression head.
struct ModelParams {
  ModelSpec spec;
  std::vector<Tensor> tensors;

  [[nodiscard]] std::size_t parameter_count() const;
  friend bool operator==(const ModelParams& a, const ModelParams& b);
};

/// Name of tensor `index` in the layout above (for diagnostics and tests).
[[nodiscard]] std::string tensor_name(const ModelSpec& spec, std::size_t index);
[[nodiscard]] std::size_t tensor_count(const ModelSpec& spec);

/// Scaled-uniform (+-sqrt(6 / (fan_in + fan_out))) weights, zero biases.
[[nodiscard]] ModelParams init_params(const ModelSpec& spec, std::uint64_t seed);
[[nodiscard]] ModelParams zero_params(const ModelSpec& spec);

/// Encoder inputs of one sample, one column per timestep. Throws ShapeError.
[[nodiscard]] Tensor encoder_inputs(const ModelSpec& spec, const SampleSequence& sample);

struct Encoding {
  Eigen::VectorXd context;                   // final top-layer hidden state
  std::vector<Eigen::VectorXd> hidden;       // top-layer hidden state per step
};

/// inputs: input_dim x T. Throws ShapeError.
[[nodiscard]] Encoding encode(const ModelParams& params, const Tensor& inputs);

/// Decoder state: one hidden vector per layer.
using DecoderState = std::vector<Eigen::VectorXd>;

[[nodiscard]] DecoderState initial_decoder_state(const ModelSpec& spec);

/// Index of the start token for the classification head.
[[nodiscard]] inline std::uint32_t start_token(const ModelSpec& spec) {
  return static_cast<std::uint32_t>(spec.n_classes());
}

struct StepOutput {
  Eigen::VectorXd probabilities;
  DecoderState state;
};

/// One classification decoder step. y_prev may be the start token. Throws
/// InvalidClass or HeadMismatch.
[[nodiscard]] StepOutput decode_step(const ModelParams& params, std::uint32_t y_prev, const DecoderState& s_prev,
                                     const Eigen::VectorXd& context);

struct PredictionResult {
  std::vector<Eigen::VectorXd> distributions;  // tau_o x n_classes (classification)
  std::vector<std::uint32_t> classes;
  std::vector<Vec2> points;                    // global frame
  std::vector<Vec2> ego_points;                // anchor frame
  double log_probability = 0.0;                // sum of ln p over the decoded sequence
};

/// Classification forward pass. teacher_forcing feeds the sample labels back,
/// otherwise the previous argmax. Throws ShapeError or HeadMismatch.
[[nodiscard]] PredictionResult forward(const ModelParams& params, const SampleSequence& sample, bool teacher_forcing);

/// Regression forward pass: tau_o ego-frame points. Throws HeadMismatch.
[[nodiscard]] std::vector<Vec2> forward_regression(const ModelParams& params, const SampleSequence& sample,
                                                   bool teacher_forcing = false);

inline constexpr double kProbabilityFloor = 1e-12;

/// Mean over steps of -ln max(p(label), 1e-12).
[[nodiscard]] double nll_loss(const PredictionResult& result, std::span<const std::uint32_t> labels);
/// Mean over steps of the squared Euclidean error.
[[nodiscard]] double mse_loss(std::span<const Vec2> predicted, std::span<const Vec2> target);

using Gradients = std::vector<Tensor>;

/// Mean loss over the batch (NLL or MSE by head) and, if `grads` is non-null,
/// its exact gradient by backpropagation through time.
double loss_and_gradients(const ModelParams& params, std::span<const SampleSequence* const> batch,
                          bool teacher_forcing, Gradients* grads);

struct AdamConfig {
  double learning_rate = 0.0003;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;
  friend bool operator==(const AdamState& a, const AdamState& b);
};

[[nodiscard]] AdamState adam_init(const ModelParams& params);
void adam_step(ModelParams& params, const Gradients& grads, AdamState& state, const AdamConfig& config);

struct TrainConfig {
  AdamConfig adam;
  int epochs = 200;
  int batch_size = 32;
  std::uint64_t seed = 1;
  bool teacher_forcing = true;
  double target_train_loss = 0.0;  // > 0 stops once the epoch train loss drops below it
};

struct CurvePoint {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN without a validation split
};

struct TrainResult {
  ModelParams params;      // best validation (or train, without validation) epoch
  AdamState optimizer;     // state after the final epoch
  std::vector<CurvePoint> curve;
  int best_epoch = 0;
};

using EpochCallback = std::function<void(const CurvePoint&)>;

/// Minibatch Adam over the train split. Throws EmptyDataset.
[[nodiscard]] TrainResult train(const Dataset& data, const ModelSpec& spec, const TrainConfig& config,
                                const EpochCallback& on_epoch = {});

/// Mean loss over a sample set.
[[nodiscard]] double evaluate_loss(const ModelParams& params, std::span<const SampleSequence* const> samples,
                                   bool teacher_forcing = true);

[[nodiscard]] std::string curve_to_csv(const std::vector<CurvePoint>& curve);

struct DecodeOptions {
  int beam_width = 1;  // 1: greedy
};

/// Decodes a sample (its labels are ignored). Beam search returns the best
/// sequence found over widths 1..B so the result never gets worse with B.
[[nodiscard]] PredictionResult predict(const ModelParams& params, const SampleSequence& sample,
                                       const DecodeOptions& options = {});

[[nodiscard]] std::vector<std::uint8_t> serialize_checkpoint(const ModelParams& params,
                                                             const AdamState* optimizer = nullptr);
struct Checkpoint {
  ModelParams params;
  bool has_optimizer = false;
  AdamState optimizer;
};
[[nodiscard]] Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::string& path, const ModelParams& params, const AdamState* optimizer = nullptr);
[[nodiscard]] Checkpoint load_checkpoint(const std::string& path);

}  // namespace octopath
