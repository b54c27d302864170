#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rmf/geometry.hpp"

namespace rmf {

enum class Activation { SiLU, Tanh };

/// Which endpoint of the training path sits at t = 0.
///
/// NoiseToData follows the path x_t = Exp_{x1}(kappa(t) Log_{x1}(x0)) with x0
/// drawn from the source; samplers start at x0 (t = 0) and step forward.
/// DataToNoise places the data at t = 0 and the source at t = 1; the network is
/// then anchored at the noisy end of each interval, and samplers start at t = 1
/// and step backward: x_r = Exp_{x_t}(-(t - r) u(x_t, r, t)).
enum class TimeOrientation { NoiseToData, DataToNoise };

std::string to_string(Activation a);
std::string to_string(TimeOrientation o);
Activation parse_activation(std::string_view text);
TimeOrientation parse_orientation(std::string_view text);

struct NetConfig {
  int ambient_dim = 3;
  int hidden_dim = 512;
  /// Number of affine layers, input and output layers included.
  int num_layers = 4;
  int time_embed_dim = 32;
  /// 0 means unconditional.
  int num_classes = 0;
  Activation activation = Activation::SiLU;
  std::uint64_t seed = 0;
  TimeOrientation orientation = TimeOrientation::DataToNoise;

  void validate() const;
  bool operator==(const NetConfig&) const = default;
};

/// Label value standing for the null condition.
inline constexpr int kNullLabel = -1;
/// Empty span means every row is unconditional.
using Labels = std::span<const int>;

/// Activations recorded by a forward pass, consumed by VelocityNet::backward.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(Tape&&) noexcept;
  Tape& operator=(Tape&&) noexcept;

  int batch_size() const;

 private:
  friend class VelocityNet;
  struct Chunk;
  std::vector<Chunk> chunks_;
  int batch_ = 0;
};

struct JvpOutput {
  Mat u;   ///< u_theta(x, r, t | c), tangent at each column of x
  Mat xi;  ///< directional derivative along (dx, dr, dt)
};

struct AdamState {
  Vec m;
  Vec v;
  std::uint64_t step = 0;
};

/// u_theta(x_t, r, t | c): MLP over [x, emb(r), emb(t), class embedding] followed by
/// the tangent projection at x.
///
/// Flat parameter order: for each affine layer (input first), the weight matrix
/// (out x in, row-major) then its bias; the class table ((num_classes + 1) x
/// time_embed_dim, row-major, last row = null token) comes last.
///
/// forward/jvp/backward are const and safe to call concurrently. Batches are cut
/// into fixed-size column chunks, so results do not depend on the thread count.
class VelocityNet {
 public:
  VelocityNet(Manifold manifold, NetConfig config);

  static std::size_t parameter_count(const NetConfig& config);
  std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }
  int input_dim() const;

  const Manifold& manifold() const { return manifold_; }
  const NetConfig& config() const { return config_; }
  const Vec& parameters() const { return params_; }
  Vec& parameters() { return params_; }
  const AdamState& optimizer_state() const { return adam_; }
  AdamState& optimizer_state() { return adam_; }

  /// Overwrites every parameter with U(-scale, scale) noise (tests, diagnostics).
  void randomize(Rng& rng, double scale);

  Mat forward(const Mat& x, const Vec& r, const Vec& t, Labels labels = {},
              Tape* tape = nullptr) const;

  /// One dual-number pass: primal output and its derivative along (dx, dr, dt).
  /// The projection head's dependence on x is differentiated too.
  JvpOutput jvp(const Mat& x, const Vec& r, const Vec& t, Labels labels, const Mat& dx,
                double dr, double dt, Tape* tape = nullptr) const;

  /// Gradient w.r.t. the flat parameters of sum_ij grad_u(i,j) * u(i,j), where u is
  /// the primal output recorded in tape.
  Vec backward(const Tape& tape, const Mat& grad_u) const;

 private:
  struct Layer {
    int in;
    int out;
    std::size_t w_offset;
    std::size_t b_offset;
  };

  void check_inputs(const Mat& x, const Vec& r, const Vec& t, Labels labels) const;
  void run_chunk(Tape::Chunk& c, const Vec& r, const Vec& t, const Mat* dx, double dr,
                 double dt, Mat& u, Mat* du) const;
  void backward_chunk(const Tape::Chunk& c, const Mat& grad_u, Vec& grad) const;

  Manifold manifold_;
  NetConfig config_;
  std::vector<Layer> layers_;
  std::size_t class_offset_ = 0;
  std::vector<double> frequencies_;
  Vec params_;
  AdamState adam_;
};

struct AdamWConfig {
  double lr = 5e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Decoupled weight decay Adam. Throws NonFinite (and leaves the net untouched) if
/// the gradient has a NaN/Inf entry.
void adamw_step(VelocityNet& net, const Vec& grad, const AdamWConfig& cfg);

/// base_lr * (1 + cos(pi * step / total_steps)) / 2.
double cosine_lr(double base_lr, std::uint64_t step, std::uint64_t total_steps);

}  // namespace rmf
