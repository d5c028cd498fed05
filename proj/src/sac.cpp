#include "relaygen/sac.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "relaygen/binary_io.hpp"

namespace relaygen {

using nlohmann::json;

std::string SacHyperparams::canonical_text(const std::string& algorithm_id) const {
  json j;
  j["algorithm"] = algorithm_id;
  j["batch_size"] = batch_size;
  j["gamma"] = gamma;
  j["hidden"] = hidden;
  j["init_alpha"] = init_alpha;
  j["learn_alpha"] = learn_alpha;
  j["lr"] = lr;
  j["replay_capacity"] = replay_capacity;
  j["start_steps"] = start_steps;
  j["target_entropy"] = target_entropy;
  j["tau"] = tau;
  j["update_after"] = update_after;
  return j.dump();
}

SacHyperparams SacHyperparams::from_text(const std::string& text) {
  const json j = json::parse(text);
  SacHyperparams hp;
  hp.hidden = j.at("hidden").get<std::vector<int>>();
  hp.lr = j.at("lr").get<double>();
  hp.gamma = j.at("gamma").get<double>();
  hp.tau = j.at("tau").get<double>();
  hp.init_alpha = j.at("init_alpha").get<double>();
  hp.learn_alpha = j.at("learn_alpha").get<bool>();
  hp.target_entropy = j.at("target_entropy").get<double>();
  hp.batch_size = j.at("batch_size").get<int>();
  hp.start_steps = j.at("start_steps").get<uint64_t>();
  hp.update_after = j.at("update_after").get<uint64_t>();
  hp.replay_capacity = j.at("replay_capacity").get<uint64_t>();
  return hp;
}

void polyak_update(Mlp& dst, const Mlp& src, double tau) {
  const real_t t = static_cast<real_t>(tau);
  for (size_t l = 0; l < dst.layer_count(); ++l) {
    dst.weights[l] = dst.weights[l] * (real_t(1) - t) + src.weights[l] * t;
    dst.biases[l] = dst.biases[l] * (real_t(1) - t) + src.biases[l] * t;
  }
}

namespace {

std::vector<int> net_sizes(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> s;
  s.push_back(in);
  s.insert(s.end(), hidden.begin(), hidden.end());
  s.push_back(out);
  return s;
}

// Standard normal matrix filled column by column (sample-major), so the
// number and order of rng draws per update is fixed.
MatX normal_matrix(int rows, int cols, Rng& rng) {
  MatX m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = static_cast<real_t>(rng.normal());
  return m;
}

}  // namespace

SacAgent::SacAgent(const std::string& env_id, const SacHyperparams& hp)
    : env_id_(env_id), hp_(hp) {}

SacAgent::SacAgent(const std::string& env_id, int obs_dim, int act_dim,
                   const SacHyperparams& hp, Rng& init_rng)
    : env_id_(env_id), obs_dim_(obs_dim), act_dim_(act_dim), hp_(hp) {
  if (obs_dim <= 0 || act_dim <= 0)
    throw std::invalid_argument("SacAgent: dimensions must be positive");
  target_entropy_ =
      hp_.target_entropy != 0.0 ? hp_.target_entropy : -static_cast<double>(act_dim);
  adam_.lr = hp_.lr;
  // Init draw order: policy, q1, q2.  Targets start as copies.
  policy_ = Mlp::create(net_sizes(obs_dim, hp_.hidden, 2 * act_dim), init_rng);
  q1_ = Mlp::create(net_sizes(obs_dim + act_dim, hp_.hidden, 1), init_rng);
  q2_ = Mlp::create(net_sizes(obs_dim + act_dim, hp_.hidden, 1), init_rng);
  q1_target_ = q1_;
  q2_target_ = q2_;
  policy_opt_ = AdamState::zeros_like(policy_);
  q1_opt_ = AdamState::zeros_like(q1_);
  q2_opt_ = AdamState::zeros_like(q2_);
  log_alpha_ = std::log(hp_.init_alpha);
}

std::string SacAgent::hyperparams_text() const { return hp_.canonical_text(algo_id_); }

ActionVector SacAgent::act(const Observation& obs, ActMode mode, Rng& rng) const {
  if (static_cast<int>(obs.values.size()) != obs_dim_)
    throw std::invalid_argument("SacAgent::act: observation arity mismatch");
  VecX x(obs_dim_);
  for (int i = 0; i < obs_dim_; ++i) x(i) = static_cast<real_t>(obs.values[i]);
  const VecX out = mlp_forward(policy_, x);
  ActionVector a;
  a.values.resize(act_dim_);
  if (mode == ActMode::kDeterministic) {
    for (int i = 0; i < act_dim_; ++i) a.values[i] = std::tanh(static_cast<double>(out(i)));
    return a;
  }
  VecD mean(act_dim_), log_std(act_dim_), noise(act_dim_);
  for (int i = 0; i < act_dim_; ++i) {
    mean(i) = static_cast<double>(out(i));
    log_std(i) = static_cast<double>(out(act_dim_ + i));
    noise(i) = rng.normal();
  }
  const SquashedSample s = squash_gaussian(mean, log_std, noise);
  for (int i = 0; i < act_dim_; ++i) a.values[i] = s.action(i);
  return a;
}

double SacAgent::q_value(const Observation& obs, const ActionVector& action) const {
  if (static_cast<int>(obs.values.size()) != obs_dim_ ||
      static_cast<int>(action.values.size()) != act_dim_)
    throw std::invalid_argument("SacAgent::q_value: arity mismatch");
  VecX x(obs_dim_ + act_dim_);
  for (int i = 0; i < obs_dim_; ++i) x(i) = static_cast<real_t>(obs.values[i]);
  for (int i = 0; i < act_dim_; ++i) x(obs_dim_ + i) = static_cast<real_t>(action.values[i]);
  const double v1 = static_cast<double>(mlp_forward(q1_, x)(0));
  const double v2 = static_cast<double>(mlp_forward(q2_, x)(0));
  return std::min(v1, v2);
}

SacCriticGrads SacAgent::compute_critic_grads(const TransitionBatch& batch,
                                              const MatX& noise_target) const {
  const int B = batch.size;
  const int d = act_dim_;
  if (B <= 0) throw std::invalid_argument("SacAgent: empty batch");
  const double alpha = std::exp(log_alpha_);

  // ---- targets (no gradients) ----
  const MatX pol_next = mlp_forward(policy_, batch.next_obs);
  VecD y(B);
  {
    MatX qin(obs_dim_ + d, B);
    qin.topRows(obs_dim_) = batch.next_obs;
    VecD logp(B);
    for (int b = 0; b < B; ++b) {
      double lp = 0.0;
      for (int i = 0; i < d; ++i) {
        const double ls =
            std::clamp(static_cast<double>(pol_next(d + i, b)), kLogStdMin, kLogStdMax);
        const double n = static_cast<double>(noise_target(i, b));
        const double u = static_cast<double>(pol_next(i, b)) + std::exp(ls) * n;
        const double a = std::tanh(u);
        qin(obs_dim_ + i, b) = static_cast<real_t>(a);
        lp += -0.5 * n * n - ls - 0.5 * kLog2Pi - log1m_tanh_sq(u);
      }
      logp(b) = lp;
    }
    const MatX q1t = mlp_forward(q1_target_, qin);
    const MatX q2t = mlp_forward(q2_target_, qin);
    for (int b = 0; b < B; ++b) {
      const double qmin =
          std::min(static_cast<double>(q1t(0, b)), static_cast<double>(q2t(0, b)));
      y(b) = static_cast<double>(batch.rewards(b)) +
             hp_.gamma * (1.0 - static_cast<double>(batch.done(b))) * (qmin - alpha * logp(b));
    }
  }

  MatX qin(obs_dim_ + d, B);
  qin.topRows(obs_dim_) = batch.obs;
  qin.bottomRows(d) = batch.actions;
  MlpCache c1, c2;
  const MatX q1v = mlp_forward(q1_, qin, &c1);
  const MatX q2v = mlp_forward(q2_, qin, &c2);
  SacCriticGrads out;
  out.targets = y;
  MatX dq1(1, B), dq2(1, B);
  for (int b = 0; b < B; ++b) {
    const double e1 = static_cast<double>(q1v(0, b)) - y(b);
    const double e2 = static_cast<double>(q2v(0, b)) - y(b);
    out.critic_loss += e1 * e1 + e2 * e2;
    out.mean_q += std::min(static_cast<double>(q1v(0, b)), static_cast<double>(q2v(0, b)));
    dq1(0, b) = static_cast<real_t>(2.0 * e1 / B);
    dq2(0, b) = static_cast<real_t>(2.0 * e2 / B);
  }
  out.critic_loss /= B;
  out.mean_q /= B;
  out.q1_grad = MlpGrads::zeros_like(q1_);
  out.q2_grad = MlpGrads::zeros_like(q2_);
  mlp_backward(q1_, c1, dq1, &out.q1_grad);
  mlp_backward(q2_, c2, dq2, &out.q2_grad);
  return out;
}

SacActorGrads SacAgent::compute_actor_grads(const TransitionBatch& batch,
                                            const MatX& noise_actor) const {
  const int B = batch.size;
  const int d = act_dim_;
  if (B <= 0) throw std::invalid_argument("SacAgent: empty batch");
  const double alpha = std::exp(log_alpha_);

  MlpCache cp;
  const MatX pol = mlp_forward(policy_, batch.obs, &cp);
  MatX act(d, B), pre(d, B), sig_eps(d, B), ls_mask(d, B);
  VecD logp(B);
  for (int b = 0; b < B; ++b) {
    double lp = 0.0;
    for (int i = 0; i < d; ++i) {
      const double ls_raw = static_cast<double>(pol(d + i, b));
      const double ls = std::clamp(ls_raw, kLogStdMin, kLogStdMax);
      ls_mask(i, b) = (ls_raw >= kLogStdMin && ls_raw <= kLogStdMax) ? real_t(1) : real_t(0);
      const double n = static_cast<double>(noise_actor(i, b));
      const double se = std::exp(ls) * n;
      const double u = static_cast<double>(pol(i, b)) + se;
      const double a = std::tanh(u);
      pre(i, b) = static_cast<real_t>(u);
      act(i, b) = static_cast<real_t>(a);
      sig_eps(i, b) = static_cast<real_t>(se);
      lp += -0.5 * n * n - ls - 0.5 * kLog2Pi - log1m_tanh_sq(u);
    }
    logp(b) = lp;
  }
  MatX qinp(obs_dim_ + d, B);
  qinp.topRows(obs_dim_) = batch.obs;
  qinp.bottomRows(d) = act;
  MlpCache cq1, cq2;
  const MatX q1p = mlp_forward(q1_, qinp, &cq1);
  const MatX q2p = mlp_forward(q2_, qinp, &cq2);
  MatX m1(1, B), m2(1, B);
  SacActorGrads out;
  for (int b = 0; b < B; ++b) {
    const double v1 = static_cast<double>(q1p(0, b));
    const double v2 = static_cast<double>(q2p(0, b));
    const bool first = v1 <= v2;
    m1(0, b) = first ? real_t(1) : real_t(0);
    m2(0, b) = first ? real_t(0) : real_t(1);
    out.actor_loss += alpha * logp(b) - std::min(v1, v2);
    out.mean_logp += logp(b);
  }
  out.actor_loss /= B;
  double mean_term = 0.0;
  for (int b = 0; b < B; ++b) mean_term += logp(b) + target_entropy_;
  out.alpha_grad = -mean_term / B;
  out.mean_logp /= B;
  // d(min Q)/d(action): input gradient through whichever critic is active.
  const MatX din1 = mlp_backward(q1_, cq1, m1, nullptr);
  const MatX din2 = mlp_backward(q2_, cq2, m2, nullptr);
  const MatX dq_da = din1.bottomRows(d) + din2.bottomRows(d);

  MatX dpol(2 * d, B);
  const real_t invB = real_t(1) / static_cast<real_t>(B);
  for (int b = 0; b < B; ++b) {
    for (int i = 0; i < d; ++i) {
      const real_t a = act(i, b);
      const real_t one_m_a2 = real_t(1) - a * a;
      const real_t dq = dq_da(i, b);
      // d/d(mean):   alpha * 2a - dQ/da * (1 - a^2)
      dpol(i, b) = invB * (static_cast<real_t>(alpha) * 2 * a - dq * one_m_a2);
      // d/d(log_std): alpha * (2a*sig*eps - 1) - dQ/da * (1 - a^2) * sig*eps
      dpol(d + i, b) =
          invB * ls_mask(i, b) *
          (static_cast<real_t>(alpha) * (2 * a * sig_eps(i, b) - 1) - dq * one_m_a2 * sig_eps(i, b));
    }
  }
  out.policy_grad = MlpGrads::zeros_like(policy_);
  mlp_backward(policy_, cp, dpol, &out.policy_grad);
  return out;
}

UpdateDiagnostics SacAgent::update(const TransitionBatch& batch, Rng& rng) {
  const int B = batch.size;
  const int d = act_dim_;
  if (B <= 0) throw std::invalid_argument("SacAgent::update: empty batch");

  // Rng draw order per update: target-action noise, then actor noise.
  const MatX noise_t = normal_matrix(d, B, rng);
  const MatX noise_a = normal_matrix(d, B, rng);

  SacCriticGrads cg = compute_critic_grads(batch, noise_t);
  adam_step(q1_, q1_opt_, cg.q1_grad, adam_);
  adam_step(q2_, q2_opt_, cg.q2_grad, adam_);

  // Actor step sees the freshly stepped critics.
  SacActorGrads ag = compute_actor_grads(batch, noise_a);
  adam_step(policy_, policy_opt_, ag.policy_grad, adam_);

  if (hp_.learn_alpha) adam_step_scalar(log_alpha_, alpha_opt_, ag.alpha_grad, adam_);

  polyak_update(q1_target_, q1_, hp_.tau);
  polyak_update(q2_target_, q2_, hp_.tau);

  UpdateDiagnostics diag;
  diag.critic_loss = cg.critic_loss;
  diag.actor_loss = ag.actor_loss;
  diag.alpha = std::exp(log_alpha_);
  diag.mean_q = cg.mean_q;
  if (!std::isfinite(diag.critic_loss) || !std::isfinite(diag.actor_loss) ||
      !std::isfinite(diag.alpha) || !std::isfinite(diag.mean_q))
    throw TrainingDiverged("non-finite sac diagnostics: critic_loss=" +
                           std::to_string(diag.critic_loss) +
                           " actor_loss=" + std::to_string(diag.actor_loss) +
                           " alpha=" + std::to_string(diag.alpha));
  return diag;
}

void SacAgent::write_body(std::ostream& out) const {
  io::write_u32(out, static_cast<uint32_t>(obs_dim_));
  io::write_u32(out, static_cast<uint32_t>(act_dim_));
  write_mlp(out, policy_);
  write_mlp(out, q1_);
  write_mlp(out, q2_);
  write_mlp(out, q1_target_);
  write_mlp(out, q2_target_);
  write_adam(out, policy_opt_);
  write_adam(out, q1_opt_);
  write_adam(out, q2_opt_);
  // Temperature stored as a one-parameter network with its Adam moments.
  io::write_f32(out, static_cast<float>(log_alpha_));
  io::write_f32(out, static_cast<float>(alpha_opt_.m));
  io::write_f32(out, static_cast<float>(alpha_opt_.v));
  io::write_u64(out, alpha_opt_.step_count);
}

std::unique_ptr<SacAgent> SacAgent::read_body(std::istream& in, const std::string& env_id,
                                              const std::string& hyper_text) {
  const SacHyperparams hp = SacHyperparams::from_text(hyper_text);
  std::unique_ptr<SacAgent> agent(new SacAgent(env_id, hp));
  agent->obs_dim_ = static_cast<int>(io::read_u32(in));
  agent->act_dim_ = static_cast<int>(io::read_u32(in));
  if (agent->obs_dim_ <= 0 || agent->act_dim_ <= 0)
    throw FormatError("sac checkpoint carries non-positive dimensions");
  agent->target_entropy_ = hp.target_entropy != 0.0
                               ? hp.target_entropy
                               : -static_cast<double>(agent->act_dim_);
  agent->adam_.lr = hp.lr;
  agent->policy_ = read_mlp(in);
  agent->q1_ = read_mlp(in);
  agent->q2_ = read_mlp(in);
  agent->q1_target_ = read_mlp(in);
  agent->q2_target_ = read_mlp(in);
  agent->policy_opt_ = read_adam(in, agent->policy_);
  agent->q1_opt_ = read_adam(in, agent->q1_);
  agent->q2_opt_ = read_adam(in, agent->q2_);
  agent->log_alpha_ = static_cast<double>(io::read_f32(in));
  agent->alpha_opt_.m = static_cast<double>(io::read_f32(in));
  agent->alpha_opt_.v = static_cast<double>(io::read_f32(in));
  agent->alpha_opt_.step_count = io::read_u64(in);
  return agent;
}

}  // namespace relaygen
