#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "relaygen/rng.hpp"

namespace relaygen {

// Network parameters are 32-bit by default; define RELAYGEN_REAL64 to run all
// network math in 64-bit (used for tight finite-difference gradient checks).
#ifdef RELAYGEN_REAL64
using real_t = double;
#else
using real_t = float;
#endif

using MatX = Eigen::Matrix<real_t, Eigen::Dynamic, Eigen::Dynamic>;
using VecX = Eigen::Matrix<real_t, Eigen::Dynamic, 1>;
using MatD = Eigen::MatrixXd;
using VecD = Eigen::VectorXd;

// Thrown when an update produces non-finite gradients or diagnostics.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Fully connected net, ReLU on hidden layers, linear output.
struct Mlp {
  std::vector<int> layer_sizes;  // input, hidden..., output
  std::vector<MatX> weights;     // weights[l]: sizes[l+1] x sizes[l]
  std::vector<VecX> biases;

  // Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) for weights and biases.
  static Mlp create(const std::vector<int>& sizes, Rng& rng);

  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  size_t layer_count() const { return weights.size(); }
  size_t param_count() const;
};

// Activations recorded during a forward pass, consumed by mlp_backward.
struct MlpCache {
  std::vector<MatX> inputs;   // inputs[l]: batch input to layer l
  std::vector<MatX> preacts;  // preacts[l]: W*x + b before the nonlinearity
};

// x has one sample per column.  Pass a cache to enable a backward pass.
MatX mlp_forward(const Mlp& net, const MatX& x, MlpCache* cache = nullptr);
VecX mlp_forward(const Mlp& net, const VecX& x);

// Parameter gradients, accumulated in 64-bit regardless of real_t so that
// batch reduction order cannot leak into the update.
struct MlpGrads {
  std::vector<MatD> dw;
  std::vector<VecD> db;

  static MlpGrads zeros_like(const Mlp& net);
  void set_zero();
  void scale(double s);
  bool all_finite() const;
};

// dout: d(loss)/d(output), one column per sample.  Accumulates parameter
// gradients into *grads (pass nullptr when only the input gradient is
// wanted) and returns d(loss)/d(input).
MatX mlp_backward(const Mlp& net, const MlpCache& cache, const MatX& dout, MlpGrads* grads);

struct AdamParams {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<MatX> mw, vw;
  std::vector<VecX> mb, vb;
  uint64_t step_count = 0;

  static AdamState zeros_like(const Mlp& net);
};

// One bias-corrected Adam step.  Throws TrainingDiverged on non-finite
// gradients; parameters are untouched in that case.
void adam_step(Mlp& net, AdamState& opt, const MlpGrads& grads, const AdamParams& hp);

struct ScalarAdam {
  double m = 0.0;
  double v = 0.0;
  uint64_t step_count = 0;
};

void adam_step_scalar(double& param, ScalarAdam& opt, double grad, const AdamParams& hp);

// ---- Squashed Gaussian policy head -------------------------------------

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// log(1 - tanh(u)^2), computed as 2*(log 2 - u - softplus(-2u)) so it stays
// finite for |u| far beyond where 1 - tanh(u)^2 underflows.
double log1m_tanh_sq(double u);
double softplus(double x);

struct SquashedSample {
  VecD action;    // tanh(mean + std * noise), componentwise in (-1, 1)
  VecD pre_tanh;  // mean + std * noise
  double log_prob;
};

// noise holds standard normal draws; log_std entries are clamped to
// [kLogStdMin, kLogStdMax] before use.
SquashedSample squash_gaussian(const VecD& mean, const VecD& log_std_raw, const VecD& noise);

// Density of the squashed distribution at a given action in (-1, 1)^d.
double squashed_log_prob(const VecD& mean, const VecD& log_std_raw, const VecD& action);

// ---- Serialization -------------------------------------------------------
// Parameters are stored as f32 on disk regardless of real_t.

void write_mlp(std::ostream& out, const Mlp& net);
Mlp read_mlp(std::istream& in);
void write_adam(std::ostream& out, const AdamState& opt);
AdamState read_adam(std::istream& in, const Mlp& net);

}  // namespace relaygen
