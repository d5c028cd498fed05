#include "relaygen/td3.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "relaygen/binary_io.hpp"
#include "relaygen/sac.hpp"

namespace relaygen {

using nlohmann::json;

std::string Td3Hyperparams::canonical_text(const std::string& algorithm_id) const {
  json j;
  j["algorithm"] = algorithm_id;
  j["batch_size"] = batch_size;
  j["expl_noise"] = expl_noise;
  j["gamma"] = gamma;
  j["hidden"] = hidden;
  j["lr"] = lr;
  j["noise_clip"] = noise_clip;
  j["policy_delay"] = policy_delay;
  j["replay_capacity"] = replay_capacity;
  j["start_steps"] = start_steps;
  j["target_noise"] = target_noise;
  j["tau"] = tau;
  j["update_after"] = update_after;
  return j.dump();
}

Td3Hyperparams Td3Hyperparams::from_text(const std::string& text) {
  const json j = json::parse(text);
  Td3Hyperparams hp;
  hp.hidden = j.at("hidden").get<std::vector<int>>();
  hp.lr = j.at("lr").get<double>();
  hp.gamma = j.at("gamma").get<double>();
  hp.tau = j.at("tau").get<double>();
  hp.expl_noise = j.at("expl_noise").get<double>();
  hp.target_noise = j.at("target_noise").get<double>();
  hp.noise_clip = j.at("noise_clip").get<double>();
  hp.policy_delay = j.at("policy_delay").get<int>();
  hp.batch_size = j.at("batch_size").get<int>();
  hp.start_steps = j.at("start_steps").get<uint64_t>();
  hp.update_after = j.at("update_after").get<uint64_t>();
  hp.replay_capacity = j.at("replay_capacity").get<uint64_t>();
  return hp;
}

namespace {

std::vector<int> net_sizes(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> s;
  s.push_back(in);
  s.insert(s.end(), hidden.begin(), hidden.end());
  s.push_back(out);
  return s;
}

}  // namespace

Td3Agent::Td3Agent(const std::string& env_id, const Td3Hyperparams& hp)
    : env_id_(env_id), hp_(hp) {}

Td3Agent::Td3Agent(const std::string& env_id, int obs_dim, int act_dim,
                   const Td3Hyperparams& hp, Rng& init_rng)
    : env_id_(env_id), obs_dim_(obs_dim), act_dim_(act_dim), hp_(hp) {
  if (obs_dim <= 0 || act_dim <= 0)
    throw std::invalid_argument("Td3Agent: dimensions must be positive");
  adam_.lr = hp_.lr;
  policy_ = Mlp::create(net_sizes(obs_dim, hp_.hidden, act_dim), init_rng);
  q1_ = Mlp::create(net_sizes(obs_dim + act_dim, hp_.hidden, 1), init_rng);
  q2_ = Mlp::create(net_sizes(obs_dim + act_dim, hp_.hidden, 1), init_rng);
  policy_target_ = policy_;
  q1_target_ = q1_;
  q2_target_ = q2_;
  policy_opt_ = AdamState::zeros_like(policy_);
  q1_opt_ = AdamState::zeros_like(q1_);
  q2_opt_ = AdamState::zeros_like(q2_);
}

std::string Td3Agent::hyperparams_text() const { return hp_.canonical_text(algo_id_); }

ActionVector Td3Agent::act(const Observation& obs, ActMode mode, Rng& rng) const {
  if (static_cast<int>(obs.values.size()) != obs_dim_)
    throw std::invalid_argument("Td3Agent::act: observation arity mismatch");
  VecX x(obs_dim_);
  for (int i = 0; i < obs_dim_; ++i) x(i) = static_cast<real_t>(obs.values[i]);
  const VecX out = mlp_forward(policy_, x);
  ActionVector a;
  a.values.resize(act_dim_);
  for (int i = 0; i < act_dim_; ++i) {
    double v = std::tanh(static_cast<double>(out(i)));
    if (mode == ActMode::kStochastic)
      v = std::clamp(v + hp_.expl_noise * rng.normal(), -1.0, 1.0);
    a.values[i] = v;
  }
  return a;
}

double Td3Agent::q_value(const Observation& obs, const ActionVector& action) const {
  if (static_cast<int>(obs.values.size()) != obs_dim_ ||
      static_cast<int>(action.values.size()) != act_dim_)
    throw std::invalid_argument("Td3Agent::q_value: arity mismatch");
  VecX x(obs_dim_ + act_dim_);
  for (int i = 0; i < obs_dim_; ++i) x(i) = static_cast<real_t>(obs.values[i]);
  for (int i = 0; i < act_dim_; ++i) x(obs_dim_ + i) = static_cast<real_t>(action.values[i]);
  const double v1 = static_cast<double>(mlp_forward(q1_, x)(0));
  const double v2 = static_cast<double>(mlp_forward(q2_, x)(0));
  return std::min(v1, v2);
}

Td3CriticGrads Td3Agent::compute_critic_grads(const TransitionBatch& batch,
                                              const MatD& noise_raw) const {
  const int B = batch.size;
  const int d = act_dim_;
  if (B <= 0) throw std::invalid_argument("Td3Agent: empty batch");

  // ---- targets with clipped smoothing noise ----
  VecD y(B);
  {
    const MatX pol_t = mlp_forward(policy_target_, batch.next_obs);
    MatX qin(obs_dim_ + d, B);
    qin.topRows(obs_dim_) = batch.next_obs;
    for (int b = 0; b < B; ++b)
      for (int i = 0; i < d; ++i) {
        const double eps =
            std::clamp(hp_.target_noise * noise_raw(i, b), -hp_.noise_clip, hp_.noise_clip);
        const double a =
            std::clamp(std::tanh(static_cast<double>(pol_t(i, b))) + eps, -1.0, 1.0);
        qin(obs_dim_ + i, b) = static_cast<real_t>(a);
      }
    const MatX q1t = mlp_forward(q1_target_, qin);
    const MatX q2t = mlp_forward(q2_target_, qin);
    for (int b = 0; b < B; ++b) {
      const double qmin =
          std::min(static_cast<double>(q1t(0, b)), static_cast<double>(q2t(0, b)));
      y(b) = static_cast<double>(batch.rewards(b)) +
             hp_.gamma * (1.0 - static_cast<double>(batch.done(b))) * qmin;
    }
  }

  MatX qin(obs_dim_ + d, B);
  qin.topRows(obs_dim_) = batch.obs;
  qin.bottomRows(d) = batch.actions;
  MlpCache c1, c2;
  const MatX q1v = mlp_forward(q1_, qin, &c1);
  const MatX q2v = mlp_forward(q2_, qin, &c2);
  Td3CriticGrads out;
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

Td3ActorGrads Td3Agent::compute_actor_grads(const TransitionBatch& batch) const {
  const int B = batch.size;
  const int d = act_dim_;
  if (B <= 0) throw std::invalid_argument("Td3Agent: empty batch");

  MlpCache cp;
  const MatX pre = mlp_forward(policy_, batch.obs, &cp);
  MatX act(d, B);
  for (int b = 0; b < B; ++b)
    for (int i = 0; i < d; ++i)
      act(i, b) = static_cast<real_t>(std::tanh(static_cast<double>(pre(i, b))));
  MatX qinp(obs_dim_ + d, B);
  qinp.topRows(obs_dim_) = batch.obs;
  qinp.bottomRows(d) = act;
  MlpCache cq;
  const MatX q1p = mlp_forward(q1_, qinp, &cq);
  Td3ActorGrads out;
  for (int b = 0; b < B; ++b) out.actor_loss -= static_cast<double>(q1p(0, b));
  out.actor_loss /= B;
  MatX ones(1, B);
  ones.setConstant(real_t(1));
  const MatX dq_da = mlp_backward(q1_, cq, ones, nullptr).bottomRows(d);
  MatX dpre(d, B);
  const real_t invB = real_t(1) / static_cast<real_t>(B);
  for (int b = 0; b < B; ++b)
    for (int i = 0; i < d; ++i) {
      const real_t a = act(i, b);
      dpre(i, b) = -invB * dq_da(i, b) * (real_t(1) - a * a);
    }
  out.policy_grad = MlpGrads::zeros_like(policy_);
  mlp_backward(policy_, cp, dpre, &out.policy_grad);
  return out;
}

UpdateDiagnostics Td3Agent::update(const TransitionBatch& batch, Rng& rng) {
  const int B = batch.size;
  const int d = act_dim_;
  if (B <= 0) throw std::invalid_argument("Td3Agent::update: empty batch");

  // One unit normal per (batch, action) entry, batch-major like always.
  MatD noise_raw(d, B);
  for (int b = 0; b < B; ++b)
    for (int i = 0; i < d; ++i) noise_raw(i, b) = rng.normal();

  Td3CriticGrads cg = compute_critic_grads(batch, noise_raw);
  adam_step(q1_, q1_opt_, cg.q1_grad, adam_);
  adam_step(q2_, q2_opt_, cg.q2_grad, adam_);

  update_count_ += 1;
  double actor_loss = 0.0;

  // ---- delayed actor and target refresh (at the stepped critics) ----
  if (update_count_ % static_cast<uint64_t>(hp_.policy_delay) == 0) {
    Td3ActorGrads ag = compute_actor_grads(batch);
    adam_step(policy_, policy_opt_, ag.policy_grad, adam_);
    actor_loss = ag.actor_loss;

    polyak_update(policy_target_, policy_, hp_.tau);
    polyak_update(q1_target_, q1_, hp_.tau);
    polyak_update(q2_target_, q2_, hp_.tau);
  }

  UpdateDiagnostics diag;
  diag.critic_loss = cg.critic_loss;
  diag.actor_loss = actor_loss;
  diag.alpha = 0.0;
  diag.mean_q = cg.mean_q;
  if (!std::isfinite(diag.critic_loss) || !std::isfinite(diag.actor_loss) ||
      !std::isfinite(diag.mean_q))
    throw TrainingDiverged("non-finite td3 diagnostics: critic_loss=" +
                           std::to_string(diag.critic_loss));
  return diag;
}

void Td3Agent::write_body(std::ostream& out) const {
  io::write_u32(out, static_cast<uint32_t>(obs_dim_));
  io::write_u32(out, static_cast<uint32_t>(act_dim_));
  write_mlp(out, policy_);
  write_mlp(out, q1_);
  write_mlp(out, q2_);
  write_mlp(out, policy_target_);
  write_mlp(out, q1_target_);
  write_mlp(out, q2_target_);
  write_adam(out, policy_opt_);
  write_adam(out, q1_opt_);
  write_adam(out, q2_opt_);
  io::write_u64(out, update_count_);
}

std::unique_ptr<Td3Agent> Td3Agent::read_body(std::istream& in, const std::string& env_id,
                                              const std::string& hyper_text) {
  const Td3Hyperparams hp = Td3Hyperparams::from_text(hyper_text);
  std::unique_ptr<Td3Agent> agent(new Td3Agent(env_id, hp));
  agent->obs_dim_ = static_cast<int>(io::read_u32(in));
  agent->act_dim_ = static_cast<int>(io::read_u32(in));
  if (agent->obs_dim_ <= 0 || agent->act_dim_ <= 0)
    throw FormatError("td3 checkpoint carries non-positive dimensions");
  agent->adam_.lr = hp.lr;
  agent->policy_ = read_mlp(in);
  agent->q1_ = read_mlp(in);
  agent->q2_ = read_mlp(in);
  agent->policy_target_ = read_mlp(in);
  agent->q1_target_ = read_mlp(in);
  agent->q2_target_ = read_mlp(in);
  agent->policy_opt_ = read_adam(in, agent->policy_);
  agent->q1_opt_ = read_adam(in, agent->q1_);
  agent->q2_opt_ = read_adam(in, agent->q2_);
  agent->update_count_ = io::read_u64(in);
  return agent;
}

}  // namespace relaygen
