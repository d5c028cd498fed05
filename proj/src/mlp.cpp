#include "relaygen/mlp.hpp"

#include <algorithm>
#include <cmath>

#include "relaygen/binary_io.hpp"

namespace relaygen {

Mlp Mlp::create(const std::vector<int>& sizes, Rng& rng) {
  if (sizes.size() < 2) throw std::invalid_argument("Mlp needs at least input and output sizes");
  for (int s : sizes)
    if (s <= 0) throw std::invalid_argument("Mlp layer sizes must be positive");
  Mlp net;
  net.layer_sizes = sizes;
  for (size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int fan_in = sizes[l];
    const int fan_out = sizes[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    MatX w(fan_out, fan_in);
    for (int j = 0; j < fan_in; ++j)
      for (int i = 0; i < fan_out; ++i)
        w(i, j) = static_cast<real_t>(rng.uniform(-bound, bound));
    VecX b(fan_out);
    for (int i = 0; i < fan_out; ++i) b(i) = static_cast<real_t>(rng.uniform(-bound, bound));
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  return net;
}

size_t Mlp::param_count() const {
  size_t n = 0;
  for (size_t l = 0; l < weights.size(); ++l)
    n += static_cast<size_t>(weights[l].size()) + static_cast<size_t>(biases[l].size());
  return n;
}

MatX mlp_forward(const Mlp& net, const MatX& x, MlpCache* cache) {
  if (x.rows() != net.input_dim())
    throw std::invalid_argument("mlp_forward: input has " + std::to_string(x.rows()) +
                                " rows, net expects " + std::to_string(net.input_dim()));
  if (cache) {
    cache->inputs.clear();
    cache->preacts.clear();
  }
  MatX h = x;
  const size_t layers = net.layer_count();
  for (size_t l = 0; l < layers; ++l) {
    if (cache) cache->inputs.push_back(h);
    MatX z = (net.weights[l] * h).colwise() + net.biases[l];
    if (l + 1 < layers) {
      if (cache) cache->preacts.push_back(z);
      h = z.cwiseMax(real_t(0));
    } else {
      if (cache) cache->preacts.push_back(z);
      h = std::move(z);
    }
  }
  return h;
}

VecX mlp_forward(const Mlp& net, const VecX& x) {
  MatX out = mlp_forward(net, MatX(x), nullptr);
  return VecX(out.col(0));
}

MlpGrads MlpGrads::zeros_like(const Mlp& net) {
  MlpGrads g;
  for (size_t l = 0; l < net.layer_count(); ++l) {
    g.dw.emplace_back(MatD::Zero(net.weights[l].rows(), net.weights[l].cols()));
    g.db.emplace_back(VecD::Zero(net.biases[l].size()));
  }
  return g;
}

void MlpGrads::set_zero() {
  for (auto& m : dw) m.setZero();
  for (auto& v : db) v.setZero();
}

void MlpGrads::scale(double s) {
  for (auto& m : dw) m *= s;
  for (auto& v : db) v *= s;
}

bool MlpGrads::all_finite() const {
  for (const auto& m : dw)
    if (!m.allFinite()) return false;
  for (const auto& v : db)
    if (!v.allFinite()) return false;
  return true;
}

MatX mlp_backward(const Mlp& net, const MlpCache& cache, const MatX& dout, MlpGrads* grads) {
  const size_t layers = net.layer_count();
  if (cache.inputs.size() != layers || cache.preacts.size() != layers)
    throw std::invalid_argument("mlp_backward: cache does not match net");
  if (dout.rows() != net.output_dim())
    throw std::invalid_argument("mlp_backward: dout arity mismatch");

  MatX delta = dout;
  for (size_t li = layers; li-- > 0;) {
    // delta currently holds d(loss)/d(layer li output after nonlinearity).
    MatX dz;
    if (li + 1 < layers) {
      dz = delta.cwiseProduct(
          (cache.preacts[li].array() > real_t(0)).template cast<real_t>().matrix());
    } else {
      dz = std::move(delta);  // linear output layer
    }
    if (grads) {
      grads->dw[li].noalias() +=
          dz.template cast<double>() * cache.inputs[li].template cast<double>().transpose();
      grads->db[li].noalias() += dz.template cast<double>().rowwise().sum();
    }
    delta.noalias() = net.weights[li].transpose() * dz;
  }
  return delta;
}

AdamState AdamState::zeros_like(const Mlp& net) {
  AdamState s;
  for (size_t l = 0; l < net.layer_count(); ++l) {
    s.mw.emplace_back(MatX::Zero(net.weights[l].rows(), net.weights[l].cols()));
    s.vw.emplace_back(MatX::Zero(net.weights[l].rows(), net.weights[l].cols()));
    s.mb.emplace_back(VecX::Zero(net.biases[l].size()));
    s.vb.emplace_back(VecX::Zero(net.biases[l].size()));
  }
  return s;
}

namespace {

// Elementwise Adam in 64-bit on top of real_t storage.
template <typename Param, typename Moment, typename Grad>
void adam_apply(Param& p, Moment& m, Moment& v, const Grad& g, const AdamParams& hp,
                double bc1, double bc2) {
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double gi = static_cast<double>(g(i));
    const double mi = hp.beta1 * static_cast<double>(m(i)) + (1.0 - hp.beta1) * gi;
    const double vi = hp.beta2 * static_cast<double>(v(i)) + (1.0 - hp.beta2) * gi * gi;
    m(i) = static_cast<real_t>(mi);
    v(i) = static_cast<real_t>(vi);
    const double step = hp.lr * (mi / bc1) / (std::sqrt(vi / bc2) + hp.eps);
    p(i) = static_cast<real_t>(static_cast<double>(p(i)) - step);
  }
}

}  // namespace

void adam_step(Mlp& net, AdamState& opt, const MlpGrads& grads, const AdamParams& hp) {
  if (!grads.all_finite())
    throw TrainingDiverged("non-finite gradient in adam_step at optimizer step " +
                           std::to_string(opt.step_count + 1));
  opt.step_count += 1;
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(opt.step_count));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(opt.step_count));
  for (size_t l = 0; l < net.layer_count(); ++l) {
    adam_apply(net.weights[l], opt.mw[l], opt.vw[l], grads.dw[l], hp, bc1, bc2);
    adam_apply(net.biases[l], opt.mb[l], opt.vb[l], grads.db[l], hp, bc1, bc2);
  }
}

void adam_step_scalar(double& param, ScalarAdam& opt, double grad, const AdamParams& hp) {
  if (!std::isfinite(grad)) throw TrainingDiverged("non-finite scalar gradient in adam step");
  opt.step_count += 1;
  opt.m = hp.beta1 * opt.m + (1.0 - hp.beta1) * grad;
  opt.v = hp.beta2 * opt.v + (1.0 - hp.beta2) * grad * grad;
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(opt.step_count));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(opt.step_count));
  param -= hp.lr * (opt.m / bc1) / (std::sqrt(opt.v / bc2) + hp.eps);
}

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double log1m_tanh_sq(double u) { return 2.0 * (std::log(2.0) - u - softplus(-2.0 * u)); }

SquashedSample squash_gaussian(const VecD& mean, const VecD& log_std_raw, const VecD& noise) {
  if (mean.size() != log_std_raw.size() || mean.size() != noise.size())
    throw std::invalid_argument("squash_gaussian: arity mismatch");
  SquashedSample s;
  s.pre_tanh.resize(mean.size());
  s.action.resize(mean.size());
  double lp = 0.0;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    const double ls = std::clamp(log_std_raw(i), kLogStdMin, kLogStdMax);
    const double u = mean(i) + std::exp(ls) * noise(i);
    s.pre_tanh(i) = u;
    s.action(i) = std::tanh(u);
    lp += -0.5 * noise(i) * noise(i) - ls - 0.5 * kLog2Pi - log1m_tanh_sq(u);
  }
  s.log_prob = lp;
  return s;
}

double squashed_log_prob(const VecD& mean, const VecD& log_std_raw, const VecD& action) {
  if (mean.size() != action.size())
    throw std::invalid_argument("squashed_log_prob: arity mismatch");
  double lp = 0.0;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    const double a = action(i);
    if (!(a > -1.0 && a < 1.0))
      throw std::invalid_argument("squashed_log_prob: action outside (-1, 1)");
    const double ls = std::clamp(log_std_raw(i), kLogStdMin, kLogStdMax);
    const double u = std::atanh(a);
    const double eps = (u - mean(i)) / std::exp(ls);
    lp += -0.5 * eps * eps - ls - 0.5 * kLog2Pi - log1m_tanh_sq(u);
  }
  return lp;
}

void write_mlp(std::ostream& out, const Mlp& net) {
  io::write_u32(out, static_cast<uint32_t>(net.layer_sizes.size()));
  for (int s : net.layer_sizes) io::write_u32(out, static_cast<uint32_t>(s));
  for (size_t l = 0; l < net.layer_count(); ++l) {
    const MatX& w = net.weights[l];
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i)
        io::write_f32(out, static_cast<float>(w(i, j)));
    for (Eigen::Index i = 0; i < net.biases[l].size(); ++i)
      io::write_f32(out, static_cast<float>(net.biases[l](i)));
  }
}

Mlp read_mlp(std::istream& in) {
  const uint32_t n_sizes = io::read_u32(in);
  if (n_sizes < 2 || n_sizes > 64) throw FormatError("network shape table out of range");
  std::vector<int> sizes(n_sizes);
  for (auto& s : sizes) {
    const uint32_t v = io::read_u32(in);
    if (v == 0 || v > 1u << 20) throw FormatError("network layer size out of range");
    s = static_cast<int>(v);
  }
  Mlp net;
  net.layer_sizes = sizes;
  for (size_t l = 0; l + 1 < sizes.size(); ++l) {
    MatX w(sizes[l + 1], sizes[l]);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i)
        w(i, j) = static_cast<real_t>(io::read_f32(in));
    VecX b(sizes[l + 1]);
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = static_cast<real_t>(io::read_f32(in));
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  return net;
}

void write_adam(std::ostream& out, const AdamState& opt) {
  io::write_u64(out, opt.step_count);
  auto write_mat = [&](const MatX& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) io::write_f32(out, static_cast<float>(m(i, j)));
  };
  for (size_t l = 0; l < opt.mw.size(); ++l) {
    write_mat(opt.mw[l]);
    write_mat(opt.vw[l]);
    for (Eigen::Index i = 0; i < opt.mb[l].size(); ++i)
      io::write_f32(out, static_cast<float>(opt.mb[l](i)));
    for (Eigen::Index i = 0; i < opt.vb[l].size(); ++i)
      io::write_f32(out, static_cast<float>(opt.vb[l](i)));
  }
}

AdamState read_adam(std::istream& in, const Mlp& net) {
  AdamState opt = AdamState::zeros_like(net);
  opt.step_count = io::read_u64(in);
  auto read_mat = [&](MatX& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<real_t>(io::read_f32(in));
  };
  for (size_t l = 0; l < opt.mw.size(); ++l) {
    read_mat(opt.mw[l]);
    read_mat(opt.vw[l]);
    for (Eigen::Index i = 0; i < opt.mb[l].size(); ++i)
      opt.mb[l](i) = static_cast<real_t>(io::read_f32(in));
    for (Eigen::Index i = 0; i < opt.vb[l].size(); ++i)
      opt.vb[l](i) = static_cast<real_t>(io::read_f32(in));
  }
  return opt;
}

}  // namespace relaygen
