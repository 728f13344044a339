#ifndef MECSIM_NN_HPP_
#define MECSIM_NN_HPP_

// Minimal dense network: ReLU hidden layers, linear or softmax output, Adam,
// the squared TD losses for the mean and uncertainty value streams, a
// central-difference gradient check and a versioned checkpoint format.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mecsim/rng.hpp"

namespace mecsim::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation : std::uint8_t { kLinear = 0, kRelu = 1, kSoftmax = 2 };

struct MlpSpec {
  std::vector<int> widths;              // input, hidden..., output
  std::vector<Activation> activations;  // one per weight layer

  /// ReLU hidden layers and a linear output: the Q-head shape.
  static MlpSpec q_network(int input, const std::vector<int>& hidden, int output);

  void validate() const;
  int input_dim() const { return widths.front(); }
  int output_dim() const { return widths.back(); }
  std::size_t num_layers() const { return activations.size(); }
  std::size_t param_count() const;
  /// Offset of layer l's weight block in the flat parameter vector; its bias
  /// block follows the weights.
  std::size_t layer_offset(std::size_t l) const;

  bool operator==(const MlpSpec&) const = default;
};

// Flat parameters. Layer l stores W_l (out x in, column-major) followed by b_l.
struct ParamSet {
  Vector values;
  std::uint64_t step = 0;
};

/// He-uniform weights for ReLU layers, zero biases, output layer scaled by
/// `output_scale`.
ParamSet init_params(const MlpSpec& spec, Rng& rng, double output_scale = 0.01);

/// Intermediate activations of a batched forward pass (one column per sample).
struct ForwardCache {
  std::vector<Matrix> pre;   // pre-activation per layer
  std::vector<Matrix> post;  // post[0] is the input
};

Vector forward(const MlpSpec& spec, const ParamSet& params,
               std::span<const double> input);
Matrix forward_batch(const MlpSpec& spec, const ParamSet& params,
                     const Matrix& inputs, ForwardCache* cache = nullptr);

/// Gradient of a scalar loss with respect to the parameters, given dL/dout
/// (output_dim x batch) and the cache of the matching forward pass.
Vector backward(const MlpSpec& spec, const ParamSet& params,
                const ForwardCache& cache, const Matrix& d_out);

struct AdamState {
  Vector m;
  Vector v;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t t = 0;

  static AdamState for_params(const ParamSet& p, double lr);
};

/// One bias-corrected Adam update; increments both the Adam and parameter
/// step counters. Throws kNumeric on a non-finite gradient.
void adam_step(ParamSet& params, const Vector& grads, AdamState& adam);

// A batch of squared-error regression targets on one output per sample.
struct TdBatch {
  Matrix states;             // input_dim x batch
  std::vector<int> actions;  // output index per sample
  Vector targets;            // bootstrapped Q target per sample
};

struct LossGrad {
  double loss = 0.0;
  Vector grad;
};

/// (1/|d|) sum_d (f(s)[a] + f_prev(s)[a] - y)^2 and its gradient with respect
/// to `params`; `prev` is a frozen snapshot of the previous iterate and may
/// be null for the single-network form.
LossGrad td_loss(const MlpSpec& spec, const ParamSet& params,
                 const ParamSet* prev, const TdBatch& batch);

/// Mean value stream: theta is trained, theta_prev is the frozen previous
/// iterate. The targets already carry the target-network bootstrap.
inline LossGrad td_loss_mean(const MlpSpec& spec, const TdBatch& batch,
                             const ParamSet& theta, const ParamSet* theta_prev) {
  return td_loss(spec, theta, theta_prev, batch);
}

/// Uncertainty stream, same structure with phi in place of theta.
inline LossGrad td_loss_uncertainty(const MlpSpec& spec, const TdBatch& batch,
                                    const ParamSet& phi, const ParamSet* phi_prev) {
  return td_loss(spec, phi, phi_prev, batch);
}

struct FdOptions {
  int samples = 64;         // coordinates checked; <= 0 checks all
  double step = 1e-5;
  double kink_tol = 1e-6;   // ReLU pre-activations this close to 0 are skipped
  std::uint64_t seed = 7;
};

struct FdReport {
  double max_rel_error = 0.0;
  int checked = 0;
  int skipped = 0;
};

/// Compares the analytic gradient against central differences on sampled
/// coordinates: max |analytic - numeric| / (|analytic| + 1e-8). Coordinates
/// whose perturbation flips a ReLU unit on `inputs` are skipped.
FdReport finite_diff_check(const MlpSpec& spec, const ParamSet& params,
                           const Matrix& inputs,
                           const std::function<LossGrad(const ParamSet&)>& loss_fn,
                           const FdOptions& opt = {});

// Checkpoint layout, all integers and doubles little-endian:
//   char[8]  magic "MECSNN01"
//   u32      version (1)
//   u32      number of widths L+1, then L+1 x u32 widths
//   u32      number of layers L, then L x u8 activation codes
//   u64      parameter count P, u64 parameter step
//   f64 x P  parameters
//   u8       1 if Adam state follows, else 0
//   f64 lr, beta1, beta2, eps; u64 t; f64 x P first moments; f64 x P second
inline constexpr char kCheckpointMagic[8] = {'M', 'E', 'C', 'S', 'N', 'N', '0', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(std::ostream& out, const MlpSpec& spec,
                     const ParamSet& params, const AdamState* adam);

struct Checkpoint {
  MlpSpec spec;
  ParamSet params;
  bool has_adam = false;
  AdamState adam;
};

Checkpoint load_checkpoint(std::istream& in);

}  // namespace mecsim::nn

#endif  // MECSIM_NN_HPP_
