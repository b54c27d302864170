#include "rmf/net.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "rmf/error.hpp"
#include "rmf/parallel.hpp"

namespace rmf {
namespace {

// Fixed column chunk; partial results are reduced in chunk order.
constexpr int kChunk = 128;
// Time-embedding frequencies span [1, kMaxFrequency] geometrically.
constexpr double kMaxFrequency = 16.0;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstWeights = Eigen::Map<const RowMat>;
using Weights = Eigen::Map<RowMat>;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void activate(Activation a, const Mat& z, Mat& out) {
  out.resize(z.rows(), z.cols());
  const Eigen::Index n = z.size();
  const double* zp = z.data();
  double* op = out.data();
  if (a == Activation::SiLU) {
    for (Eigen::Index i = 0; i < n; ++i) op[i] = zp[i] * sigmoid(zp[i]);
  } else {
    for (Eigen::Index i = 0; i < n; ++i) op[i] = std::tanh(zp[i]);
  }
}

// d = sigma'(z) elementwise, scaled into `inout` (inout *= sigma'(z)).
void scale_by_slope(Activation a, const Mat& z, Mat& inout) {
  const Eigen::Index n = z.size();
  const double* zp = z.data();
  double* p = inout.data();
  if (a == Activation::SiLU) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double s = sigmoid(zp[i]);
      p[i] *= s * (1.0 + zp[i] * (1.0 - s));
    }
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double th = std::tanh(zp[i]);
      p[i] *= 1.0 - th * th;
    }
  }
}

// u = P(x) w per column, and optionally du = P(x) dw + (dP(x)[dx]) w.
void project_head(const Manifold& m, const Mat& x, const Mat& w, const Mat* dx, const Mat* dw,
                  Mat& u, Mat* du) {
  const Eigen::Index b = x.cols();
  switch (m.kind()) {
    case ManifoldKind::Euclidean:
    case ManifoldKind::Torus:
      u = w;
      if (du) *du = *dw;
      return;
    case ManifoldKind::Sphere:
      u.resize(w.rows(), b);
      if (du) du->resize(w.rows(), b);
      for (Eigen::Index j = 0; j < b; ++j) {
        const double xw = x.col(j).dot(w.col(j));
        u.col(j) = w.col(j) - xw * x.col(j);
        if (du) {
          const double dxw = dx->col(j).dot(w.col(j)) + x.col(j).dot(dw->col(j));
          du->col(j) = dw->col(j) - dxw * x.col(j) - xw * dx->col(j);
        }
      }
      return;
    case ManifoldKind::SO3:
      u.resize(9, b);
      if (du) du->resize(9, b);
      for (Eigen::Index j = 0; j < b; ++j) {
        const so3::Mat3 r = so3::from_flat(x.col(j));
        const so3::Mat3 a = so3::from_flat(w.col(j));
        // P(R) A = (A - R A^T R) / 2
        u.col(j) = so3::to_flat(0.5 * (a - r * a.transpose() * r));
        if (du) {
          const so3::Mat3 dr = so3::from_flat(dx->col(j));
          const so3::Mat3 da = so3::from_flat(dw->col(j));
          du->col(j) = so3::to_flat(0.5 * (da - dr * a.transpose() * r -
                                            r * da.transpose() * r - r * a.transpose() * dr));
        }
      }
      return;
  }
}

// The projector is self-adjoint under the Frobenius pairing, so the pullback is P(x) g.
Mat project_adjoint(const Manifold& m, const Mat& x, const Mat& g) {
  Mat out;
  project_head(m, x, g, nullptr, nullptr, out, nullptr);
  return out;
}

}  // namespace

struct Tape::Chunk {
  int begin = 0;
  int count = 0;
  Mat x;
  Mat input;
  std::vector<Mat> pre;
  std::vector<Mat> post;
  std::vector<int> class_rows;
};

Tape::Tape() = default;
Tape::~Tape() = default;
Tape::Tape(Tape&&) noexcept = default;
Tape& Tape::operator=(Tape&&) noexcept = default;
int Tape::batch_size() const { return batch_; }

std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "silu"; }

std::string to_string(TimeOrientation o) {
  return o == TimeOrientation::NoiseToData ? "noise_to_data" : "data_to_noise";
}

Activation parse_activation(std::string_view text) {
  if (text == "silu") return Activation::SiLU;
  if (text == "tanh") return Activation::Tanh;
  throw Error(ErrorCode::InvalidArgument, "unknown activation '" + std::string(text) + "'");
}

TimeOrientation parse_orientation(std::string_view text) {
  if (text == "noise_to_data") return TimeOrientation::NoiseToData;
  if (text == "data_to_noise") return TimeOrientation::DataToNoise;
  throw Error(ErrorCode::InvalidArgument, "unknown time orientation '" + std::string(text) + "'");
}

void NetConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidArgument, "NetConfig: " + m); };
  if (ambient_dim < 1) fail("ambient_dim must be >= 1");
  if (num_layers < 2) fail("num_layers must be >= 2");
  if (hidden_dim < 1) fail("hidden_dim must be >= 1");
  if (time_embed_dim < 2 || time_embed_dim % 2 != 0) fail("time_embed_dim must be even and >= 2");
  if (num_classes < 0) fail("num_classes must be >= 0");
}

std::size_t VelocityNet::parameter_count(const NetConfig& c) {
  c.validate();
  const std::size_t e = static_cast<std::size_t>(c.time_embed_dim);
  const std::size_t in = c.ambient_dim + 2 * e + (c.num_classes > 0 ? e : 0);
  const std::size_t h = c.hidden_dim;
  std::size_t n = (in + 1) * h;
  n += static_cast<std::size_t>(c.num_layers - 2) * (h + 1) * h;
  n += (h + 1) * c.ambient_dim;
  if (c.num_classes > 0) n += (c.num_classes + 1) * e;
  return n;
}

VelocityNet::VelocityNet(Manifold manifold, NetConfig config)
    : manifold_(manifold), config_(config) {
  config_.validate();
  if (config_.ambient_dim != manifold_.ambient_dim()) {
    throw Error(ErrorCode::ConfigMismatch,
                "net ambient_dim " + std::to_string(config_.ambient_dim) + " does not match " +
                    manifold_.name());
  }
  std::size_t offset = 0;
  for (int l = 0; l < config_.num_layers; ++l) {
    const int in = l == 0 ? input_dim() : config_.hidden_dim;
    const int out = l == config_.num_layers - 1 ? config_.ambient_dim : config_.hidden_dim;
    Layer layer{in, out, offset, offset + static_cast<std::size_t>(in) * out};
    offset = layer.b_offset + out;
    layers_.push_back(layer);
  }
  class_offset_ = offset;
  const int half = config_.time_embed_dim / 2;
  for (int k = 0; k < half; ++k) {
    const double frac = half == 1 ? 0.0 : static_cast<double>(k) / (half - 1);
    frequencies_.push_back(std::pow(kMaxFrequency, frac));
  }

  params_ = Vec::Zero(static_cast<Eigen::Index>(parameter_count(config_)));
  Rng rng(config_.seed);
  // U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias, output layer included.
  for (const Layer& layer : layers_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
    const std::size_t end = layer.b_offset + static_cast<std::size_t>(layer.out);
    for (std::size_t i = layer.w_offset; i < end; ++i) {
      params_[static_cast<Eigen::Index>(i)] = rng.uniform(-bound, bound);
    }
  }
  if (config_.num_classes > 0) {
    const double bound = std::sqrt(3.0);
    for (Eigen::Index i = static_cast<Eigen::Index>(class_offset_); i < params_.size(); ++i) {
      params_[i] = rng.uniform(-bound, bound);
    }
  }
  adam_.m = Vec::Zero(params_.size());
  adam_.v = Vec::Zero(params_.size());
}

int VelocityNet::input_dim() const {
  const int e = config_.time_embed_dim;
  return config_.ambient_dim + 2 * e + (config_.num_classes > 0 ? e : 0);
}

void VelocityNet::randomize(Rng& rng, double scale) {
  for (Eigen::Index i = 0; i < params_.size(); ++i) params_[i] = rng.uniform(-scale, scale);
}

void VelocityNet::check_inputs(const Mat& x, const Vec& r, const Vec& t, Labels labels) const {
  const Eigen::Index b = x.cols();
  if (x.rows() != config_.ambient_dim) {
    throw Error(ErrorCode::InvalidArgument, "x has " + std::to_string(x.rows()) +
                                                " rows, expected " +
                                                std::to_string(config_.ambient_dim));
  }
  if (r.size() != b || t.size() != b) {
    throw Error(ErrorCode::InvalidArgument, "r/t length does not match the batch size");
  }
  if (!x.allFinite() || !r.allFinite() || !t.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "non-finite network input");
  }
  if (!labels.empty()) {
    if (static_cast<Eigen::Index>(labels.size()) != b) {
      throw Error(ErrorCode::InvalidArgument, "label count does not match the batch size");
    }
    for (int c : labels) {
      if (c == kNullLabel) continue;
      if (config_.num_classes == 0) {
        throw Error(ErrorCode::InvalidArgument, "unconditional net received a class label");
      }
      if (c < 0 || c >= config_.num_classes) {
        throw Error(ErrorCode::InvalidArgument, "label " + std::to_string(c) + " outside [0, " +
                                                    std::to_string(config_.num_classes) + ")");
      }
    }
  }
}

void VelocityNet::run_chunk(Tape::Chunk& c, const Vec& r, const Vec& t, const Mat* dx, double dr,
                            double dt, Mat& u, Mat* du) const {
  const int b = c.count;
  const int d = config_.ambient_dim;
  const int e = config_.time_embed_dim;
  const int half = e / 2;
  const bool tangent = dx != nullptr;

  Mat in(input_dim(), b);
  Mat din;
  if (tangent) din = Mat::Zero(input_dim(), b);
  in.topRows(d) = c.x;
  if (tangent) din.topRows(d) = dx->middleCols(c.begin, b);
  for (int j = 0; j < b; ++j) {
    const double times[2] = {r(c.begin + j), t(c.begin + j)};
    const double rates[2] = {dr, dt};
    for (int s = 0; s < 2; ++s) {
      const int base = d + s * e;
      for (int k = 0; k < half; ++k) {
        const double w = frequencies_[k];
        const double sn = std::sin(w * times[s]);
        const double cs = std::cos(w * times[s]);
        in(base + k, j) = sn;
        in(base + half + k, j) = cs;
        if (tangent) {
          din(base + k, j) = w * cs * rates[s];
          din(base + half + k, j) = -w * sn * rates[s];
        }
      }
    }
    if (config_.num_classes > 0) {
      const double* row = params_.data() + class_offset_ + static_cast<std::size_t>(c.class_rows[j]) * e;
      for (int k = 0; k < e; ++k) in(d + 2 * e + k, j) = row[k];
    }
  }

  const int n_layers = config_.num_layers;
  c.pre.resize(n_layers - 1);
  c.post.resize(n_layers - 1);
  c.input = std::move(in);
  const Mat* cur = &c.input;
  Mat dcur = std::move(din);
  Mat raw, draw;

  for (int l = 0; l < n_layers; ++l) {
    const Layer& layer = layers_[l];
    ConstWeights w(params_.data() + layer.w_offset, layer.out, layer.in);
    Eigen::Map<const Vec> bias(params_.data() + layer.b_offset, layer.out);
    Mat z, dz;
    // Separate products keep the primal bit-identical to a plain forward pass.
    z.noalias() = w * (*cur);
    if (tangent) dz.noalias() = w * dcur;
    z.colwise() += bias;
    if (l == n_layers - 1) {
      raw = std::move(z);
      draw = std::move(dz);
      break;
    }
    Mat a;
    activate(config_.activation, z, a);
    if (tangent) {
      scale_by_slope(config_.activation, z, dz);
      dcur = std::move(dz);
    }
    c.pre[l] = std::move(z);
    c.post[l] = std::move(a);
    cur = &c.post[l];
  }

  Mat uc, duc;
  if (tangent) {
    const Mat dxc = dx->middleCols(c.begin, b);
    project_head(manifold_, c.x, raw, &dxc, &draw, uc, &duc);
    du->middleCols(c.begin, b) = duc;
  } else {
    project_head(manifold_, c.x, raw, nullptr, nullptr, uc, nullptr);
  }
  u.middleCols(c.begin, b) = uc;
}

Mat VelocityNet::forward(const Mat& x, const Vec& r, const Vec& t, Labels labels,
                         Tape* tape) const {
  JvpOutput out = jvp(x, r, t, labels, Mat(), 0.0, 0.0, tape);
  return std::move(out.u);
}

JvpOutput VelocityNet::jvp(const Mat& x, const Vec& r, const Vec& t, Labels labels,
                           const Mat& dx, double dr, double dt, Tape* tape) const {
  check_inputs(x, r, t, labels);
  const bool tangent = dx.size() > 0;
  if (tangent && (dx.rows() != x.rows() || dx.cols() != x.cols())) {
    throw Error(ErrorCode::InvalidArgument, "JVP direction shape does not match x");
  }
  const int b = static_cast<int>(x.cols());
  const int n_chunks = (b + kChunk - 1) / kChunk;
  std::vector<Tape::Chunk> chunks(n_chunks);
  for (int i = 0; i < n_chunks; ++i) {
    Tape::Chunk& c = chunks[i];
    c.begin = i * kChunk;
    c.count = std::min(kChunk, b - c.begin);
    c.x = x.middleCols(c.begin, c.count);
    c.class_rows.resize(c.count);
    for (int j = 0; j < c.count; ++j) {
      const int label = labels.empty() ? kNullLabel : labels[c.begin + j];
      c.class_rows[j] = label == kNullLabel ? config_.num_classes : label;
    }
  }
  JvpOutput out;
  out.u.resize(x.rows(), b);
  if (tangent) out.xi.resize(x.rows(), b);
  parallel_for(n_chunks, [&](int i) {
    run_chunk(chunks[i], r, t, tangent ? &dx : nullptr, dr, dt, out.u,
              tangent ? &out.xi : nullptr);
  });
  if (tape) {
    tape->chunks_ = std::move(chunks);
    tape->batch_ = b;
  }
  return out;
}

void VelocityNet::backward_chunk(const Tape::Chunk& c, const Mat& grad_u, Vec& grad) const {
  const int d = config_.ambient_dim;
  const int e = config_.time_embed_dim;
  const int n_layers = config_.num_layers;
  grad = Vec::Zero(params_.size());

  Mat g = project_adjoint(manifold_, c.x, grad_u.middleCols(c.begin, c.count));
  for (int l = n_layers - 1; l >= 0; --l) {
    const Layer& layer = layers_[l];
    const Mat& a_in = l == 0 ? c.input : c.post[l - 1];
    if (l < n_layers - 1) scale_by_slope(config_.activation, c.pre[l], g);
    Weights gw(grad.data() + layer.w_offset, layer.out, layer.in);
    gw.noalias() = g * a_in.transpose();
    grad.segment(static_cast<Eigen::Index>(layer.b_offset), layer.out) = g.rowwise().sum();
    ConstWeights w(params_.data() + layer.w_offset, layer.out, layer.in);
    if (l > 0) {
      Mat next = w.transpose() * g;
      g = std::move(next);
    } else if (config_.num_classes > 0) {
      const Mat gc = w.middleCols(d + 2 * e, e).transpose() * g;
      for (int j = 0; j < c.count; ++j) {
        const auto offset = static_cast<Eigen::Index>(class_offset_ + static_cast<std::size_t>(c.class_rows[j]) * e);
        grad.segment(offset, e) += gc.col(j);
      }
    }
  }
}

Vec VelocityNet::backward(const Tape& tape, const Mat& grad_u) const {
  if (grad_u.rows() != config_.ambient_dim || grad_u.cols() != tape.batch_) {
    throw Error(ErrorCode::InvalidArgument, "output gradient shape does not match the tape");
  }
  const int n_chunks = static_cast<int>(tape.chunks_.size());
  std::vector<Vec> partial(n_chunks);
  parallel_for(n_chunks, [&](int i) { backward_chunk(tape.chunks_[i], grad_u, partial[i]); });
  if (n_chunks == 0) return Vec::Zero(params_.size());
  Vec total = std::move(partial[0]);
  for (int i = 1; i < n_chunks; ++i) total += partial[i];
  return total;
}

void adamw_step(VelocityNet& net, const Vec& grad, const AdamWConfig& cfg) {
  Vec& theta = net.parameters();
  if (grad.size() != theta.size()) {
    throw Error(ErrorCode::InvalidArgument, "gradient length " + std::to_string(grad.size()) +
                                                " != parameter count " +
                                                std::to_string(theta.size()));
  }
  if (!(cfg.lr > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be positive");
  if (!grad.allFinite()) throw Error(ErrorCode::NonFinite, "gradient contains NaN/Inf; update refused");
  AdamState& s = net.optimizer_state();
  if (s.m.size() != theta.size()) s.m = Vec::Zero(theta.size());
  if (s.v.size() != theta.size()) s.v = Vec::Zero(theta.size());
  s.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(s.step));
  const double decay = 1.0 - cfg.lr * cfg.weight_decay;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double g = grad[i];
    s.m[i] = cfg.beta1 * s.m[i] + (1.0 - cfg.beta1) * g;
    s.v[i] = cfg.beta2 * s.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = s.m[i] / bc1;
    const double v_hat = s.v[i] / bc2;
    theta[i] = theta[i] * decay - cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

double cosine_lr(double base_lr, std::uint64_t step, std::uint64_t total_steps) {
  if (total_steps == 0) return base_lr;
  if (step > total_steps) step = total_steps;
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return std::max(0.0, base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * frac)));
}

}  // namespace rmf
