#include "mecsim/nn.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

#include "mecsim/binary_io.hpp"
#include "mecsim/error.hpp"

namespace mecsim::nn {

namespace {

using MatMap = Eigen::Map<const Matrix>;
using VecMap = Eigen::Map<const Vector>;

MatMap weights(const MlpSpec& spec, const ParamSet& p, std::size_t l) {
  return MatMap(p.values.data() + spec.layer_offset(l), spec.widths[l + 1],
                spec.widths[l]);
}

VecMap bias(const MlpSpec& spec, const ParamSet& p, std::size_t l) {
  const std::size_t off = spec.layer_offset(l) +
                          static_cast<std::size_t>(spec.widths[l + 1]) *
                              static_cast<std::size_t>(spec.widths[l]);
  return VecMap(p.values.data() + off, spec.widths[l + 1]);
}

void check_params(const MlpSpec& spec, const ParamSet& p) {
  if (static_cast<std::size_t>(p.values.size()) != spec.param_count()) {
    throw Error(ErrorCode::kShape, "parameter count " +
                                       std::to_string(p.values.size()) +
                                       " does not match network spec " +
                                       std::to_string(spec.param_count()));
  }
}

void softmax_columns(Matrix& z) {
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    auto col = z.col(c);
    const double mx = col.maxCoeff();
    col = (col.array() - mx).exp().matrix();
    col /= col.sum();
  }
}

void apply_activation(Activation act, Matrix& z) {
  switch (act) {
    case Activation::kLinear: break;
    case Activation::kRelu: z = z.cwiseMax(0.0); break;
    case Activation::kSoftmax: softmax_columns(z); break;
  }
}

}  // namespace

MlpSpec MlpSpec::q_network(int input, const std::vector<int>& hidden,
                           int output) {
  MlpSpec s;
  s.widths.push_back(input);
  for (int h : hidden) {
    s.widths.push_back(h);
    s.activations.push_back(Activation::kRelu);
  }
  s.widths.push_back(output);
  s.activations.push_back(Activation::kLinear);
  return s;
}

void MlpSpec::validate() const {
  if (widths.size() < 3) {
    throw Error(ErrorCode::kConfig, "network needs at least one hidden layer");
  }
  if (activations.size() + 1 != widths.size()) {
    throw Error(ErrorCode::kConfig, "need one activation per weight layer");
  }
  for (int w : widths) {
    if (w <= 0) throw Error(ErrorCode::kConfig, "layer widths must be positive");
  }
  for (std::size_t l = 0; l + 1 < activations.size(); ++l) {
    if (activations[l] == Activation::kSoftmax) {
      throw Error(ErrorCode::kConfig, "softmax is only allowed on the output layer");
    }
  }
}

std::size_t MlpSpec::param_count() const {
  return layer_offset(activations.size());
}

std::size_t MlpSpec::layer_offset(std::size_t l) const {
  std::size_t off = 0;
  for (std::size_t i = 0; i < l; ++i) {
    off += static_cast<std::size_t>(widths[i + 1]) *
           (static_cast<std::size_t>(widths[i]) + 1);
  }
  return off;
}

ParamSet init_params(const MlpSpec& spec, Rng& rng, double output_scale) {
  spec.validate();
  ParamSet p;
  p.values = Vector::Zero(static_cast<Eigen::Index>(spec.param_count()));
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const double limit = std::sqrt(6.0 / spec.widths[l]);
    const double scale = l + 1 == spec.num_layers() ? output_scale : 1.0;
    const std::size_t off = spec.layer_offset(l);
    const std::size_t n = static_cast<std::size_t>(spec.widths[l + 1]) *
                          static_cast<std::size_t>(spec.widths[l]);
    for (std::size_t i = 0; i < n; ++i) {
      p.values[static_cast<Eigen::Index>(off + i)] =
          scale * uniform(rng, -limit, limit);
    }
  }
  return p;
}

Matrix forward_batch(const MlpSpec& spec, const ParamSet& params,
                     const Matrix& inputs, ForwardCache* cache) {
  check_params(spec, params);
  if (inputs.rows() != spec.input_dim()) {
    throw Error(ErrorCode::kShape, "input dimension " +
                                       std::to_string(inputs.rows()) +
                                       " does not match network input " +
                                       std::to_string(spec.input_dim()));
  }
  if (cache) {
    cache->pre.clear();
    cache->post.clear();
    cache->post.push_back(inputs);
  }
  Matrix a = inputs;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    Matrix z = weights(spec, params, l) * a;
    z.colwise() += bias(spec, params, l);
    if (cache) cache->pre.push_back(z);
    apply_activation(spec.activations[l], z);
    if (cache) cache->post.push_back(z);
    a = std::move(z);
  }
  return a;
}

Vector forward(const MlpSpec& spec, const ParamSet& params,
               std::span<const double> input) {
  const Matrix x = Eigen::Map<const Matrix>(
      input.data(), static_cast<Eigen::Index>(input.size()), 1);
  return forward_batch(spec, params, x).col(0);
}

Vector backward(const MlpSpec& spec, const ParamSet& params,
                const ForwardCache& cache, const Matrix& d_out) {
  check_params(spec, params);
  const std::size_t layers = spec.num_layers();
  if (cache.pre.size() != layers || cache.post.size() != layers + 1) {
    throw Error(ErrorCode::kShape, "forward cache does not match network");
  }
  if (d_out.rows() != spec.output_dim() || d_out.cols() != cache.post[0].cols()) {
    throw Error(ErrorCode::kShape, "output gradient has the wrong shape");
  }
  Vector grad = Vector::Zero(params.values.size());
  Matrix delta = d_out;
  for (std::size_t l = layers; l-- > 0;) {
    switch (spec.activations[l]) {
      case Activation::kLinear: break;
      case Activation::kRelu:
        delta = delta.cwiseProduct(
            (cache.pre[l].array() > 0.0).cast<double>().matrix());
        break;
      case Activation::kSoftmax: {
        // Jacobian-vector product of softmax: y * (delta - <delta, y>).
        const Matrix& y = cache.post[l + 1];
        const Eigen::RowVectorXd dots = (delta.cwiseProduct(y)).colwise().sum();
        delta = y.cwiseProduct(delta - dots.replicate(delta.rows(), 1));
        break;
      }
    }
    const std::size_t off = spec.layer_offset(l);
    const Eigen::Index rows = spec.widths[l + 1];
    const Eigen::Index cols = spec.widths[l];
    Eigen::Map<Matrix>(grad.data() + off, rows, cols) =
        delta * cache.post[l].transpose();
    Eigen::Map<Vector>(grad.data() + off + rows * cols, rows) =
        delta.rowwise().sum();
    if (l > 0) delta = weights(spec, params, l).transpose() * delta;
  }
  return grad;
}

AdamState AdamState::for_params(const ParamSet& p, double lr) {
  if (!(lr >= 0.0)) throw Error(ErrorCode::kConfig, "learning rate must be >= 0");
  AdamState a;
  a.m = Vector::Zero(p.values.size());
  a.v = Vector::Zero(p.values.size());
  a.lr = lr;
  return a;
}

void adam_step(ParamSet& params, const Vector& grads, AdamState& adam) {
  if (grads.size() != params.values.size() || adam.m.size() != grads.size() ||
      adam.v.size() != grads.size()) {
    throw Error(ErrorCode::kShape, "Adam state and gradient shapes differ");
  }
  if (!grads.allFinite()) {
    throw Error(ErrorCode::kNumeric, "non-finite gradient");
  }
  adam.t += 1;
  adam.m = adam.beta1 * adam.m + (1.0 - adam.beta1) * grads;
  adam.v = adam.beta2 * adam.v + (1.0 - adam.beta2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(adam.beta1, static_cast<double>(adam.t));
  const double c2 = 1.0 - std::pow(adam.beta2, static_cast<double>(adam.t));
  params.values.array() -= adam.lr * (adam.m.array() / c1) /
                           ((adam.v.array() / c2).sqrt() + adam.eps);
  params.step += 1;
}

LossGrad td_loss(const MlpSpec& spec, const ParamSet& params,
                 const ParamSet* prev, const TdBatch& batch) {
  const Eigen::Index n = batch.states.cols();
  if (n == 0) throw Error(ErrorCode::kBatch, "empty training batch");
  if (static_cast<Eigen::Index>(batch.actions.size()) != n ||
      batch.targets.size() != n) {
    throw Error(ErrorCode::kShape, "batch states, actions and targets differ in size");
  }
  ForwardCache cache;
  const Matrix out = forward_batch(spec, params, batch.states, &cache);
  Matrix prev_out;
  if (prev) prev_out = forward_batch(spec, *prev, batch.states);

  Matrix d_out = Matrix::Zero(out.rows(), n);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int a = batch.actions[static_cast<std::size_t>(i)];
    if (a < 0 || a >= out.rows()) {
      throw Error(ErrorCode::kAction, "batch action index out of range");
    }
    double pred = out(a, i);
    if (prev) pred += prev_out(a, i);
    const double err = pred - batch.targets[i];
    loss += err * err;
    d_out(a, i) = 2.0 * err / static_cast<double>(n);
  }
  LossGrad lg;
  lg.loss = loss / static_cast<double>(n);
  lg.grad = backward(spec, params, cache, d_out);
  return lg;
}

FdReport finite_diff_check(const MlpSpec& spec, const ParamSet& params,
                           const Matrix& inputs,
                           const std::function<LossGrad(const ParamSet&)>& loss_fn,
                           const FdOptions& opt) {
  FdReport report;
  const Vector analytic = loss_fn(params).grad;
  const auto P = params.values.size();

  std::vector<Eigen::Index> coords;
  if (opt.samples <= 0 || opt.samples >= P) {
    coords.resize(static_cast<std::size_t>(P));
    std::iota(coords.begin(), coords.end(), Eigen::Index{0});
  } else {
    Rng rng(opt.seed);
    for (int k = 0; k < opt.samples; ++k) {
      coords.push_back(static_cast<Eigen::Index>(
          uniform_index(rng, static_cast<std::size_t>(P))));
    }
  }

  ForwardCache base;
  forward_batch(spec, params, inputs, &base);
  const auto near_kink = [&](const ForwardCache& c) {
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
      if (spec.activations[l] != Activation::kRelu) continue;
      const auto& z0 = base.pre[l].array();
      const auto& z1 = c.pre[l].array();
      if (((z0 > 0.0) != (z1 > 0.0)).any()) return true;
      if ((z0.abs() < opt.kink_tol).any()) return true;
    }
    return false;
  };

  ParamSet probe = params;
  for (Eigen::Index j : coords) {
    const double orig = params.values[j];
    ForwardCache plus_c, minus_c;
    probe.values[j] = orig + opt.step;
    forward_batch(spec, probe, inputs, &plus_c);
    const double lp = loss_fn(probe).loss;
    probe.values[j] = orig - opt.step;
    forward_batch(spec, probe, inputs, &minus_c);
    const double lm = loss_fn(probe).loss;
    probe.values[j] = orig;
    if (near_kink(plus_c) || near_kink(minus_c)) {
      ++report.skipped;
      continue;
    }
    const double numeric = (lp - lm) / (2.0 * opt.step);
    const double rel = std::abs(analytic[j] - numeric) / (std::abs(analytic[j]) + 1e-8);
    report.max_rel_error = std::max(report.max_rel_error, rel);
    ++report.checked;
  }
  return report;
}

void save_checkpoint(std::ostream& out, const MlpSpec& spec,
                     const ParamSet& params, const AdamState* adam) {
  check_params(spec, params);
  std::vector<std::uint8_t> buf(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  io::put_le<std::uint32_t>(buf, kCheckpointVersion);
  io::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(spec.widths.size()));
  for (int w : spec.widths) io::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(w));
  io::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(spec.activations.size()));
  for (Activation a : spec.activations) io::put_le<std::uint8_t>(buf, static_cast<std::uint8_t>(a));
  const auto P = static_cast<std::uint64_t>(params.values.size());
  io::put_le<std::uint64_t>(buf, P);
  io::put_le<std::uint64_t>(buf, params.step);
  for (Eigen::Index i = 0; i < params.values.size(); ++i) io::put_le<double>(buf, params.values[i]);
  io::put_le<std::uint8_t>(buf, adam ? 1 : 0);
  if (adam) {
    if (static_cast<std::uint64_t>(adam->m.size()) != P ||
        static_cast<std::uint64_t>(adam->v.size()) != P) {
      throw Error(ErrorCode::kShape, "Adam moments do not match parameters");
    }
    io::put_le<double>(buf, adam->lr);
    io::put_le<double>(buf, adam->beta1);
    io::put_le<double>(buf, adam->beta2);
    io::put_le<double>(buf, adam->eps);
    io::put_le<std::uint64_t>(buf, adam->t);
    for (Eigen::Index i = 0; i < adam->m.size(); ++i) io::put_le<double>(buf, adam->m[i]);
    for (Eigen::Index i = 0; i < adam->v.size(); ++i) io::put_le<double>(buf, adam->v[i]);
  }
  io::write_all(out, buf);
}

Checkpoint load_checkpoint(std::istream& in) {
  const std::vector<std::uint8_t> buf = io::read_all(in);
  io::Reader r(buf.data(), buf.size());
  char magic[8];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw Error(ErrorCode::kCheckpoint, "not a network checkpoint (bad magic)");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::kCheckpoint,
                "unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  const auto nw = r.get<std::uint32_t>();
  if (nw > 1024) throw Error(ErrorCode::kCheckpoint, "implausible layer count");
  for (std::uint32_t i = 0; i < nw; ++i) ck.spec.widths.push_back(static_cast<int>(r.get<std::uint32_t>()));
  const auto na = r.get<std::uint32_t>();
  if (na > 1024) throw Error(ErrorCode::kCheckpoint, "implausible layer count");
  for (std::uint32_t i = 0; i < na; ++i) {
    const auto code = r.get<std::uint8_t>();
    if (code > static_cast<std::uint8_t>(Activation::kSoftmax)) {
      throw Error(ErrorCode::kCheckpoint, "unknown activation code");
    }
    ck.spec.activations.push_back(static_cast<Activation>(code));
  }
  try {
    ck.spec.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kCheckpoint, std::string("invalid network spec: ") + e.what());
  }
  const auto P = r.get<std::uint64_t>();
  if (P != ck.spec.param_count()) {
    throw Error(ErrorCode::kCheckpoint, "parameter count does not match spec");
  }
  ck.params.step = r.get<std::uint64_t>();
  ck.params.values.resize(static_cast<Eigen::Index>(P));
  for (Eigen::Index i = 0; i < ck.params.values.size(); ++i) ck.params.values[i] = r.get<double>();
  ck.has_adam = r.get<std::uint8_t>() != 0;
  if (ck.has_adam) {
    ck.adam.lr = r.get<double>();
    ck.adam.beta1 = r.get<double>();
    ck.adam.beta2 = r.get<double>();
    ck.adam.eps = r.get<double>();
    ck.adam.t = r.get<std::uint64_t>();
    ck.adam.m.resize(static_cast<Eigen::Index>(P));
    ck.adam.v.resize(static_cast<Eigen::Index>(P));
    for (Eigen::Index i = 0; i < ck.adam.m.size(); ++i) ck.adam.m[i] = r.get<double>();
    for (Eigen::Index i = 0; i < ck.adam.v.size(); ++i) ck.adam.v[i] = r.get<double>();
  }
  if (!r.at_end()) throw Error(ErrorCode::kCheckpoint, "trailing bytes after checkpoint");
  if (!ck.params.values.allFinite()) {
    throw Error(ErrorCode::kCheckpoint, "checkpoint holds non-finite parameters");
  }
  return ck;
}

}  // namespace mecsim::nn
