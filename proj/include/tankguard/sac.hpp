#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tankguard/adam.hpp"
#include "tankguard/mlp.hpp"
#include "tankguard/replay.hpp"
#include "tankguard/rng.hpp"
#include "tankguard/sim.hpp"
#include "tankguard/weights_io.hpp"

namespace tankguard {

// Soft actor-critic over the maze task, plus a safety critic / recovery
// policy pair that can veto risky task actions at execution time.
//
// Network inputs are normalized with fixed constants (forces by the 40 N
// limit, positions by the 0.4 m arena scale); actions are mapped to [-1, 1]^4.
// The constants are part of the artifact contract — checkpoints only make
// sense with them.

constexpr double kForceScale = 40.0;
constexpr double kPosScale = 0.4;
constexpr double kDispScale = kDispMax;          // 0.03 m
constexpr double kStiffMid = 650.0, kStiffHalf = 350.0;

inline Eigen::VectorXd normalize_obs(const Eigen::VectorXd& obs) {
  require(obs.size() == kObsDim, "sac: observation dim mismatch");
  Eigen::VectorXd n(kObsDim);
  n.head(kWrenchDim) = obs.head(kWrenchDim) / kForceScale;
  n.tail(kObsDim - kWrenchDim) = obs.tail(kObsDim - kWrenchDim) / kPosScale;
  return n;
}

inline Eigen::Vector4d normalize_action(const Eigen::Vector4d& env) {
  return {env[0] / kDispScale, env[1] / kDispScale, (env[2] - kStiffMid) / kStiffHalf,
          (env[3] - kStiffMid) / kStiffHalf};
}

inline Eigen::Vector4d env_action(const Eigen::Vector4d& norm) {
  return {norm[0] * kDispScale, norm[1] * kDispScale, kStiffMid + norm[2] * kStiffHalf,
          kStiffMid + norm[3] * kStiffHalf};
}

inline RLAction to_rl_action(const Eigen::Vector4d& env) {
  return RLAction{Vec2(env[0], env[1]), env[2], env[3]};
}

struct SacConfig {
  std::vector<int> hidden = {256, 256};
  double lr = 3e-4;
  double gamma = 0.9;
  double tau = 0.005;
  double entropy_target = -4.0;  // -|A|
  int batch = 256;
  size_t replay_capacity = 1000000;
  int warmup_steps = 1000;        // uniform-random action steps before learning
  int updates_per_step = 1;
  double init_log_alpha = 0.0;
  // Safety head.
  bool safety_enabled = false;
  bool safety_frozen = false;     // keep pretrained safety nets fixed online
  double gamma_safe = 0.85;
  double eps_risk = 0.65;
  double violation_fraction = 0.25;  // oversampling share for safety batches
};

inline void validate(const SacConfig& c) {
  require(!c.hidden.empty(), "sac: need at least one hidden layer");
  require(c.lr > 0.0 && c.batch > 0 && c.replay_capacity > 0, "sac: bad optimizer parameters");
  require(c.gamma > 0.0 && c.gamma < 1.0, "sac: gamma must be in (0, 1)");
  require(c.gamma_safe > 0.0 && c.gamma_safe < 1.0, "sac: gamma_safe must be in (0, 1)");
  require(c.tau > 0.0 && c.tau <= 1.0, "sac: tau must be in (0, 1]");
  require(c.eps_risk > 0.0 && c.eps_risk < 1.0, "sac: eps_risk must be in (0, 1)");
  require(c.violation_fraction >= 0.0 && c.violation_fraction <= 1.0,
          "sac: violation_fraction must be in [0, 1]");
}

inline std::vector<int> layer_sizes(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> s;
  s.push_back(in);
  s.insert(s.end(), hidden.begin(), hidden.end());
  s.push_back(out);
  return s;
}

inline void soft_update(Mlp& target, const Mlp& src, double tau) {
  auto& t = target.params();
  const auto& s = src.params();
  require(t.size() == s.size(), "sac: target/source size mismatch");
  for (size_t i = 0; i < t.size(); ++i) t[i] += tau * (s[i] - t[i]);
}

// --- safety critic + recovery policy ---------------------------------------
// Q_risk estimates the discounted probability of hitting any constraint; the
// recovery policy is trained to minimize it. Both see only the wrench part of
// the observation.

class SafetyLearner {
 public:
  SafetyLearner() = default;

  static SafetyLearner init(const SacConfig& cfg, uint64_t seed) {
    SafetyLearner s;
    s.cfg_ = cfg;
    Rng r1(Rng::derive(seed, 101)), r2(Rng::derive(seed, 102));
    s.critic_ = Mlp::init(
        MlpSpec{layer_sizes(kWrenchDim + kActDim, cfg.hidden, 1), Activation::kRelu,
                Head::kLinear},
        r1);
    s.critic_target_ = s.critic_;
    s.recovery_ = Mlp::init(
        MlpSpec{layer_sizes(kWrenchDim, cfg.hidden, 2 * kActDim), Activation::kRelu,
                Head::kSquashedGaussian},
        r2);
    s.opt_critic_ = Adam(s.critic_.params().size(), cfg.lr);
    s.opt_recovery_ = Adam(s.recovery_.params().size(), cfg.lr);
    return s;
  }

  // Risk for one (wrench, action) pair, clamped into [0, 1] at use.
  double risk(const Eigen::VectorXd& wrench_norm, const Eigen::Vector4d& a_norm) const {
    Matrix x(1, kWrenchDim + kActDim);
    x << wrench_norm.transpose(), a_norm.transpose();
    return std::clamp(critic_.forward(x)(0, 0), 0.0, 1.0);
  }

  Eigen::Vector4d recovery_action(const Eigen::VectorXd& wrench_norm) const {
    Matrix x = wrench_norm.transpose();
    const Matrix out = recovery_.forward(x);
    return out.leftCols(kActDim).transpose().array().tanh();
  }

  struct Losses {
    double critic = 0.0;
    double recovery = 0.0;
  };

  // One gradient step on (W = wrench obs, A = actions, C = cost labels,
  // W2 = next wrench obs, D = episode-end flags). Targets follow
  //   y = c + (1 - c) * gamma_safe * clamp01(Q_target(s', recovery(s')))
  // so predictions stay in [0, 1] at a fixed point.
  Losses update(const Matrix& w, const Matrix& a, const Eigen::VectorXd& c,
                const Matrix& w2, const Eigen::VectorXd& d) {
    const int b = static_cast<int>(w.rows());
    Losses out;

    // Critic.
    const Matrix rec2 = recovery_.forward(w2).leftCols(kActDim).array().tanh();
    Matrix x2(b, kWrenchDim + kActDim);
    x2 << w2, rec2;
    Eigen::VectorXd q2 = critic_target_.forward(x2).col(0);
    for (int i = 0; i < b; ++i) q2[i] = std::clamp(q2[i], 0.0, 1.0);
    Eigen::VectorXd y(b);
    for (int i = 0; i < b; ++i)
      y[i] = c[i] + (1.0 - c[i]) * (1.0 - d[i]) * cfg_.gamma_safe * q2[i];

    Matrix x(b, kWrenchDim + kActDim);
    x << w, a;
    Mlp::Cache cache;
    const Eigen::VectorXd pred = critic_.forward(x, &cache).col(0);
    out.critic = (pred - y).squaredNorm() / b;
    Matrix dy = (2.0 / b) * (pred - y);
    opt_critic_.step(critic_.params(), critic_.backward(cache, dy).params);

    // Recovery: descend Q_risk through the critic's action input.
    Mlp::Cache rcache;
    const Matrix rout = recovery_.forward(w, &rcache);
    const Matrix arec = rout.leftCols(kActDim).array().tanh();
    Matrix xr(b, kWrenchDim + kActDim);
    xr << w, arec;
    Mlp::Cache qcache;
    const Eigen::VectorXd qr = critic_.forward(xr, &qcache).col(0);
    out.recovery = qr.mean();
    Matrix dq = Matrix::Constant(b, 1, 1.0 / b);
    const Matrix dxr = critic_.backward(qcache, dq).input;
    Matrix dhead = Matrix::Zero(b, 2 * kActDim);
    dhead.leftCols(kActDim) =
        dxr.rightCols(kActDim).array() * (1.0 - arec.array().square());
    opt_recovery_.step(recovery_.params(), recovery_.backward(rcache, dhead).params);

    soft_update(critic_target_, critic_, cfg_.tau);
    return out;
  }

  const Mlp& critic() const { return critic_; }
  const Mlp& recovery() const { return recovery_; }
  Mlp& critic_mut() { return critic_; }
  Mlp& recovery_mut() { return recovery_; }
  const SacConfig& config() const { return cfg_; }

  void save(const std::string& dir) const {
    save_weights(critic_, dir + "/safety_critic.bin");
    save_weights(critic_target_, dir + "/safety_critic_target.bin");
    save_weights(recovery_, dir + "/recovery.bin");
  }
  void load(const std::string& dir) {
    critic_ = load_weights(dir + "/safety_critic.bin");
    critic_target_ = load_weights(dir + "/safety_critic_target.bin");
    recovery_ = load_weights(dir + "/recovery.bin");
    opt_critic_ = Adam(critic_.params().size(), cfg_.lr);
    opt_recovery_ = Adam(recovery_.params().size(), cfg_.lr);
  }

 private:
  SacConfig cfg_;
  Mlp critic_, critic_target_, recovery_;
  Adam opt_critic_, opt_recovery_;
};

// --- the agent ---------------------------------------------------------------

struct ActionChoice {
  RLAction act;                 // env units, what the sim executes
  Eigen::Vector4d a_norm;       // normalized form, what gets stored/learned
  bool intervened = false;      // recovery policy overrode the task action
  double q_risk = 0.0;          // risk estimate of the task action
};

struct UpdateLosses {
  double q1 = 0.0, q2 = 0.0, actor = 0.0, alpha = 0.0, temperature = 0.0;
  double safety = 0.0, recovery = 0.0;
};

class SacAgent {
 public:
  SacAgent(const SacConfig& cfg, uint64_t seed) : cfg_(cfg), noise_(Rng::derive(seed, 7)) {
    validate(cfg);
    Rng ra(Rng::derive(seed, 1)), rq1(Rng::derive(seed, 2)), rq2(Rng::derive(seed, 3));
    actor_ = Mlp::init(MlpSpec{layer_sizes(kObsDim, cfg.hidden, 2 * kActDim),
                               Activation::kRelu, Head::kSquashedGaussian},
                       ra);
    q1_ = Mlp::init(MlpSpec{layer_sizes(kObsDim + kActDim, cfg.hidden, 1), Activation::kRelu,
                            Head::kLinear},
                    rq1);
    q2_ = Mlp::init(MlpSpec{layer_sizes(kObsDim + kActDim, cfg.hidden, 1), Activation::kRelu,
                            Head::kLinear},
                    rq2);
    q1_target_ = q1_;
    q2_target_ = q2_;
    opt_actor_ = Adam(actor_.params().size(), cfg.lr);
    opt_q1_ = Adam(q1_.params().size(), cfg.lr);
    opt_q2_ = Adam(q2_.params().size(), cfg.lr);
    opt_alpha_ = Adam(1, cfg.lr);
    log_alpha_ = {cfg.init_log_alpha};
    if (cfg.safety_enabled) safety_ = SafetyLearner::init(cfg, seed);
  }

  double temperature() const { return std::exp(log_alpha_[0]); }
  const SacConfig& config() const { return cfg_; }
  SafetyLearner& safety() { return safety_; }
  const SafetyLearner& safety() const { return safety_; }

  // Task-policy action with the optional risk gate on top.
  ActionChoice act(const Eigen::VectorXd& obs, bool explore) {
    const Eigen::VectorXd sn = normalize_obs(obs);
    Matrix x = sn.transpose();
    const Matrix out = actor_.forward(x);
    Eigen::Vector4d a;
    if (explore) {
      const Eigen::VectorXd mean = out.leftCols(kActDim).transpose();
      const Eigen::VectorXd log_std = out.rightCols(kActDim).transpose();
      a = sample_squashed(mean, log_std, noise_).a;
    } else {
      a = out.leftCols(kActDim).transpose().array().tanh();
    }
    ActionChoice choice;
    choice.a_norm = a;
    if (cfg_.safety_enabled) {
      choice.q_risk = safety_.risk(sn.head(kWrenchDim), a);
      if (choice.q_risk > cfg_.eps_risk) {
        choice.a_norm = safety_.recovery_action(sn.head(kWrenchDim));
        choice.intervened = true;
      }
    }
    choice.act = to_rl_action(env_action(choice.a_norm));
    return choice;
  }

  // Uniform random action for warmup, already in normalized space.
  ActionChoice random_action() {
    ActionChoice c;
    for (int i = 0; i < kActDim; ++i) c.a_norm[i] = noise_.uniform(-1.0, 1.0);
    c.act = to_rl_action(env_action(c.a_norm));
    return c;
  }

  UpdateLosses update(const ReplayBuffer& buf) {
    const int b = cfg_.batch;
    require(buf.size() > 0, "sac: buffer is empty");  // batches sample with replacement
    UpdateLosses losses;

    Matrix s(b, kObsDim), s2(b, kObsDim), a(b, kActDim);
    Eigen::VectorXd r(b), d(b), c(b);
    Matrix sw(b, kWrenchDim), sw2(b, kWrenchDim);
    for (int i = 0; i < b; ++i) {
      const Transition& t =
          cfg_.safety_enabled ? buf.sample_mixed(noise_, cfg_.violation_fraction)
                              : buf.sample(noise_);
      const Eigen::VectorXd sn = normalize_obs(t.s), sn2 = normalize_obs(t.s2);
      s.row(i) = sn.transpose();
      s2.row(i) = sn2.transpose();
      a.row(i) = normalize_action(t.a).transpose();
      r[i] = t.r;
      d[i] = t.done ? 1.0 : 0.0;
      c[i] = is_violation(t) ? 1.0 : 0.0;
      sw.row(i) = sn.head(kWrenchDim).transpose();
      sw2.row(i) = sn2.head(kWrenchDim).transpose();
    }

    // --- critics ---
    const double alpha = temperature();
    const Matrix out2 = actor_.forward(s2);
    Matrix eps2(b, kActDim);
    for (int i = 0; i < eps2.size(); ++i) eps2.data()[i] = noise_.normal();
    const Matrix sig2 = out2.rightCols(kActDim).array().exp();
    const Matrix u2 = out2.leftCols(kActDim).array() + sig2.array() * eps2.array();
    const Matrix a2 = u2.array().tanh();
    Eigen::VectorXd logp2(b);
    for (int i = 0; i < b; ++i)
      logp2[i] = squashed_log_prob(u2.row(i).transpose(), out2.row(i).head(kActDim).transpose(),
                                   out2.row(i).tail(kActDim).transpose());

    Matrix x2(b, kObsDim + kActDim);
    x2 << s2, a2;
    const Eigen::VectorXd q1t = q1_target_.forward(x2).col(0);
    const Eigen::VectorXd q2t = q2_target_.forward(x2).col(0);
    Eigen::VectorXd y(b);
    for (int i = 0; i < b; ++i)
      y[i] = r[i] + cfg_.gamma * (1.0 - d[i]) * (std::min(q1t[i], q2t[i]) - alpha * logp2[i]);

    Matrix x(b, kObsDim + kActDim);
    x << s, a;
    {
      Mlp::Cache cache;
      const Eigen::VectorXd pred = q1_.forward(x, &cache).col(0);
      losses.q1 = (pred - y).squaredNorm() / b;
      Matrix dy = (2.0 / b) * (pred - y);
      opt_q1_.step(q1_.params(), q1_.backward(cache, dy).params);
    }
    {
      Mlp::Cache cache;
      const Eigen::VectorXd pred = q2_.forward(x, &cache).col(0);
      losses.q2 = (pred - y).squaredNorm() / b;
      Matrix dy = (2.0 / b) * (pred - y);
      opt_q2_.step(q2_.params(), q2_.backward(cache, dy).params);
    }

    // --- actor ---
    Mlp::Cache acache;
    const Matrix out = actor_.forward(s, &acache);
    Matrix eps(b, kActDim);
    for (int i = 0; i < eps.size(); ++i) eps.data()[i] = noise_.normal();
    const Matrix sig = out.rightCols(kActDim).array().exp();
    const Matrix u = out.leftCols(kActDim).array() + sig.array() * eps.array();
    const Matrix api = u.array().tanh();
    Eigen::VectorXd logp(b);
    for (int i = 0; i < b; ++i)
      logp[i] = squashed_log_prob(u.row(i).transpose(), out.row(i).head(kActDim).transpose(),
                                  out.row(i).tail(kActDim).transpose());

    Matrix xpi(b, kObsDim + kActDim);
    xpi << s, api;
    Mlp::Cache c1, c2;
    const Eigen::VectorXd q1pi = q1_.forward(xpi, &c1).col(0);
    const Eigen::VectorXd q2pi = q2_.forward(xpi, &c2).col(0);
    losses.actor = (alpha * logp.array() - q1pi.array().min(q2pi.array())).mean();

    Matrix dy1 = Matrix::Zero(b, 1), dy2 = Matrix::Zero(b, 1);
    for (int i = 0; i < b; ++i)
      (q1pi[i] <= q2pi[i] ? dy1 : dy2)(i, 0) = -1.0 / b;
    const Matrix dx = q1_.backward(c1, dy1).input + q2_.backward(c2, dy2).input;
    const Matrix da = dx.rightCols(kActDim);

    const Matrix dsq = 1.0 - api.array().square();
    const Matrix sigeps = sig.array() * eps.array();
    Matrix dhead(b, 2 * kActDim);
    dhead.leftCols(kActDim) =
        (alpha / b) * 2.0 * api.array() + da.array() * dsq.array();
    dhead.rightCols(kActDim) =
        (alpha / b) * (2.0 * api.array() * sigeps.array() - 1.0) +
        da.array() * dsq.array() * sigeps.array();
    opt_actor_.step(actor_.params(), actor_.backward(acache, dhead).params);

    // --- temperature ---
    const double dlog_alpha = -(logp.array() + cfg_.entropy_target).mean();
    losses.alpha = -log_alpha_[0] * dlog_alpha;
    std::vector<double> g = {dlog_alpha};
    opt_alpha_.step(log_alpha_, g);
    losses.temperature = temperature();

    // --- safety head ---
    if (cfg_.safety_enabled && !cfg_.safety_frozen) {
      const SafetyLearner::Losses sl = safety_.update(sw, a, c, sw2, d);
      losses.safety = sl.critic;
      losses.recovery = sl.recovery;
    }

    soft_update(q1_target_, q1_, cfg_.tau);
    soft_update(q2_target_, q2_, cfg_.tau);
    return losses;
  }

  double q_value(const Eigen::VectorXd& obs, const Eigen::Vector4d& a_norm) const {
    Matrix x(1, kObsDim + kActDim);
    x << normalize_obs(obs).transpose(), a_norm.transpose();
    return q1_.forward(x)(0, 0);
  }

  void save(const std::string& dir) const {
    std::filesystem::create_directories(dir);
    save_weights(actor_, dir + "/actor.bin");
    save_weights(q1_, dir + "/q1.bin");
    save_weights(q2_, dir + "/q2.bin");
    save_weights(q1_target_, dir + "/q1_target.bin");
    save_weights(q2_target_, dir + "/q2_target.bin");
    std::ofstream meta(dir + "/agent.json", std::ios::binary);
    meta << "{\n  \"log_alpha\": " << fmt_double(log_alpha_[0]) << "\n}\n";
    if (cfg_.safety_enabled) safety_.save(dir);
  }

  void load(const std::string& dir) {
    actor_ = load_weights(dir + "/actor.bin");
    q1_ = load_weights(dir + "/q1.bin");
    q2_ = load_weights(dir + "/q2.bin");
    q1_target_ = load_weights(dir + "/q1_target.bin");
    q2_target_ = load_weights(dir + "/q2_target.bin");
    opt_actor_ = Adam(actor_.params().size(), cfg_.lr);
    opt_q1_ = Adam(q1_.params().size(), cfg_.lr);
    opt_q2_ = Adam(q2_.params().size(), cfg_.lr);
    opt_alpha_ = Adam(1, cfg_.lr);
    std::ifstream meta(dir + "/agent.json", std::ios::binary);
    if (meta.good()) {
      nlohmann::json j;
      meta >> j;
      log_alpha_ = {j.value("log_alpha", cfg_.init_log_alpha)};
    }
    if (cfg_.safety_enabled) safety_.load(dir);
  }

  // Adopt externally pretrained safety nets.
  void set_safety(const SafetyLearner& s) {
    require(cfg_.safety_enabled, "sac: safety head disabled in config");
    safety_ = s;
  }

 private:
  SacConfig cfg_;
  Rng noise_;
  Mlp actor_, q1_, q2_, q1_target_, q2_target_;
  Adam opt_actor_, opt_q1_, opt_q2_, opt_alpha_;
  std::vector<double> log_alpha_;
  SafetyLearner safety_;
};

}  // namespace tankguard
