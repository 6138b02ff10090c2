#include "negbias/cmle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "negbias/policies.hpp"

namespace negbias {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

void require_gaussian(const Trace& trace) {
  for (const auto& a : trace.arms)
    if (a.family != ArmFamily::Gaussian)
      throw Error(ErrorCode::InvalidConfig, "cMLE is implemented for Gaussian arms with known variance");
}

void require_single_init(const Trace& trace) {
  if (trace.init_pulls != 1)
    throw Error(ErrorCode::InvalidConfig, "the conditional likelihood needs a single initial pull per arm");
}

void require_randomized(const Trace& trace) {
  if (!trace.policy.gumbel)
    throw Error(ErrorCode::HardMaxTrace,
                "trace was collected without Gumbel randomization; the conditional likelihood is degenerate");
}

void require_tau(const Trace& trace, const CmleConfig& config) {
  const double tau = trace.policy.gumbel->tau;
  if (std::abs(tau - config.tau) > 1e-12 * std::max(1.0, tau)) {
    std::ostringstream os;
    os << "cMLE tau " << config.tau << " differs from the collection tau " << tau;
    throw Error(ErrorCode::InvalidConfig, os.str());
  }
}

void require_draws(const Trace& trace) {
  const std::size_t rows = static_cast<std::size_t>(trace.horizon - trace.num_arms());
  if (trace.decision_stats.size() != rows)
    throw Error(ErrorCode::MissingPosteriorDraws, "Thompson trace lacks its recorded posterior draws");
}

// Visits decision rows t = K..T-1 with the running per-arm sums after round t.
template <typename Fn>
void for_each_row(const Trace& trace, Fn&& fn) {
  const int K = trace.num_arms();
  std::vector<double> sums(K, 0.0);
  std::vector<int> counts(K, 0);
  for (int i = 0; i < trace.horizon - 1; ++i) {
    const int k = trace.selections[i];
    sums[k] += trace.samples[k][counts[k]++];
    const int t = i + 1;
    if (t >= K) fn(t - K, sums, counts);
  }
}

}  // namespace

const char* to_string(Proposal proposal) {
  return proposal == Proposal::IndependencePerSite ? "independence" : "random_walk";
}

void CmleConfig::validate() const {
  auto bad = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
  if (!(tau > 0.0)) bad("cmle tau must be positive");
  if (!(eta > 0.0)) bad("cmle eta must be positive");
  if (n_gd_iters < 0) bad("cmle n_gd_iters must be non-negative");
  if (mcmc_steps_per_iter < 1) bad("cmle mcmc_steps_per_iter must be positive");
  if (burn_in < 0 || burn_in >= mcmc_steps_per_iter) bad("cmle burn_in must satisfy 0 <= burn_in < steps");
  if (R < 1 || R > mcmc_steps_per_iter - burn_in) bad("cmle R must lie in [1, steps - burn_in]");
  if (!(walk_std > 0.0)) bad("cmle walk_std must be positive");
  if (sites_per_step < 0) bad("cmle sites_per_step must be non-negative");
  if (!(divergence_bound > 0.0)) bad("cmle divergence_bound must be positive");
}

CmleConfig CmleConfig::thompson_defaults() {
  CmleConfig c;
  c.n_gd_iters = 3000;
  c.mcmc_steps_per_iter = 30;
  c.burn_in = 15;
  c.R = 15;
  return c;
}

double data_loglik(const Trace& trace, std::span<const double> theta) {
  double total = 0.0;
  for (int k = 0; k < trace.num_arms(); ++k) {
    const double sd = trace.arms[k].obs_std;
    for (double x : trace.samples[k]) {
      const double z = (x - theta[k]) / sd;
      total += -0.5 * z * z - std::log(sd) - kHalfLog2Pi;
    }
  }
  return total;
}

double selection_loglik(const Trace& trace) {
  require_randomized(trace);
  require_single_init(trace);
  const auto& policy = trace.policy;
  double total = 0.0;
  if (policy.kind == PolicyKind::Thompson) {
    require_draws(trace);
    const double tau = policy.gumbel->tau;
    for_each_row(trace, [&](int r, const std::vector<double>& sums, const std::vector<int>& counts) {
      const auto& draws = trace.decision_stats[r];
      for (int k = 0; k < trace.num_arms(); ++k) {
        const Posterior post = thompson_posterior(sums[k], counts[k], policy.thompson_prior, trace.arms[k].obs_std);
        const double z = (draws[k] - post.mean) / std::sqrt(post.var);
        total += -0.5 * z * z - kHalfLog2Pi;
      }
      total += std::log(softmax(draws, tau)[trace.selections[trace.num_arms() + r]]);
    });
    return total;
  }
  std::vector<double> means(trace.num_arms());
  for_each_row(trace, [&](int r, const std::vector<double>& sums, const std::vector<int>& counts) {
    for (std::size_t k = 0; k < means.size(); ++k) means[k] = sums[k] / counts[k];
    const auto u = index_stats(means, counts, policy);
    total += std::log(selection_probability(u, trace.selections[trace.num_arms() + r], policy, true));
  });
  return total;
}

double conditional_loglik_unnormalized(const Trace& trace, std::span<const double> theta, const CmleConfig& config) {
  trace.validate();
  require_gaussian(trace);
  require_randomized(trace);
  require_tau(trace, config);
  if (trace.policy.kind == PolicyKind::Thompson) return thompson_conditional_loglik(trace, theta, config);
  return data_loglik(trace, theta) + selection_loglik(trace);
}

std::vector<double> conditional_loglik_gradient(const Trace& trace, std::span<const double> theta) {
  std::vector<double> g(trace.num_arms(), 0.0);
  for (int k = 0; k < trace.num_arms(); ++k) {
    const double var = trace.arms[k].obs_std * trace.arms[k].obs_std;
    for (double x : trace.samples[k]) g[k] += (x - theta[k]) / var;
  }
  return g;
}

double thompson_conditional_loglik(const Trace& trace, std::span<const double> theta, const CmleConfig& config) {
  trace.validate();
  require_gaussian(trace);
  require_randomized(trace);
  require_tau(trace, config);
  if (trace.policy.kind != PolicyKind::Thompson)
    throw Error(ErrorCode::InvalidConfig, "thompson_conditional_loglik needs a Thompson trace");
  require_draws(trace);
  return data_loglik(trace, theta) + selection_loglik(trace);
}

std::vector<double> thompson_conditional_loglik_gradient(const Trace& trace, std::span<const double> theta) {
  // The posterior-draw terms depend on the data, not on theta.
  return conditional_loglik_gradient(trace, theta);
}

std::vector<std::vector<double>> thompson_draw_gradient(const Trace& trace) {
  require_randomized(trace);
  require_draws(trace);
  const auto& policy = trace.policy;
  const double tau = policy.gumbel->tau;
  const int K = trace.num_arms();
  std::vector<std::vector<double>> grad(trace.decision_stats.size(), std::vector<double>(K));
  for_each_row(trace, [&](int r, const std::vector<double>& sums, const std::vector<int>& counts) {
    const auto& draws = trace.decision_stats[r];
    const auto p = softmax(draws, tau);
    const int chosen = trace.selections[K + r];
    for (int k = 0; k < K; ++k) {
      const Posterior post = thompson_posterior(sums[k], counts[k], policy.thompson_prior, trace.arms[k].obs_std);
      grad[r][k] = -(draws[k] - post.mean) / post.var + ((k == chosen ? 1.0 : 0.0) - p[k]) / tau;
    }
  });
  return grad;
}

// ---------------------------------------------------------------------------
// ConditionalSampler

ConditionalSampler::ConditionalSampler(const Trace& trace, const CmleConfig& config) : config_(config) {
  config.validate();
  trace.validate();
  require_gaussian(trace);
  require_randomized(trace);
  require_tau(trace, config);
  require_single_init(trace);
  K_ = trace.num_arms();
  T_ = trace.horizon;
  rows_ = T_ - K_;
  thompson_ = trace.policy.kind == PolicyKind::Thompson;
  if (thompson_) require_draws(trace);
  tau_ = trace.policy.gumbel->tau;
  eps_ = trace.policy.kind == PolicyKind::EpsGreedy ? trace.policy.eps_greedy_epsilon : 0.0;

  for (const auto& a : trace.arms) obs_std_.push_back(a.obs_std);
  theta_.assign(K_, 0.0);
  for (int k = 0; k < K_; ++k) {
    double s = 0.0;
    for (double x : trace.samples[k]) s += x;
    theta_[k] = s / trace.samples[k].size();
  }

  std::vector<int> taken(K_, 0);
  for (int i = 0; i < T_; ++i) {
    const int k = trace.selections[i];
    site_arm_.push_back(k);
    x_.push_back(trace.samples[k][taken[k]++]);
    first_row_.push_back(std::max(0, i + 1 - K_));
  }
  for (int r = 0; r < rows_; ++r) sel_.push_back(trace.selections[K_ + r]);

  inv_n_.assign(static_cast<std::size_t>(rows_) * K_, 0.0);
  bonus_.assign(inv_n_.size(), 0.0);
  std::vector<int> counts(K_, 0);
  for (int i = 0; i < T_ - 1; ++i) {
    ++counts[site_arm_[i]];
    const int r = i + 1 - K_;
    if (r < 0) continue;
    for (int k = 0; k < K_; ++k) {
      inv_n_[r * K_ + k] = 1.0 / counts[k];
      if (trace.policy.kind == PolicyKind::LilUCB) bonus_[r * K_ + k] = lil_ucb_bonus(counts[k], trace.policy.lilucb);
    }
  }
  sums_.assign(inv_n_.size(), 0.0);
  p_.assign(inv_n_.size(), 0.0);
  logterm_.assign(rows_, 0.0);

  if (thompson_) {
    const auto& prior = trace.policy.thompson_prior;
    prior_mu0_ = prior.mu0;
    prior_prec_ = 1.0 / prior.sigma0_sq;
    post_var_.assign(inv_n_.size(), 0.0);
    post_mean_.assign(inv_n_.size(), 0.0);
    phi_.assign(inv_n_.size(), 0.0);
    draws_.assign(inv_n_.size(), 0.0);
    for (int r = 0; r < rows_; ++r)
      for (int k = 0; k < K_; ++k) {
        const double var = obs_std_[k] * obs_std_[k];
        post_var_[r * K_ + k] = 1.0 / (prior_prec_ + (1.0 / inv_n_[r * K_ + k]) / var);
        draws_[r * K_ + k] = trace.decision_stats[r][k];
      }
  }

  buf_log_.assign(rows_, 0.0);
  buf_em1_.assign(rows_, 0.0);
  cv_sum_.assign(K_, 0.0);
  cv_count_.assign(K_, 0);
  last_proposal_.assign(T_, 0.0);
  proposed_in_step_.assign(T_, 0);
  refresh();
}

void ConditionalSampler::set_theta(std::span<const double> theta) { theta_.assign(theta.begin(), theta.end()); }

double ConditionalSampler::mix(double p) const { return eps_ > 0.0 ? eps_ / K_ + (1.0 - eps_) * p : p; }

void ConditionalSampler::refresh() {
  std::vector<double> running(K_, 0.0);
  for (int i = 0; i < T_ - 1; ++i) {
    running[site_arm_[i]] += x_[i];
    const int r = i + 1 - K_;
    if (r < 0) continue;
    for (int k = 0; k < K_; ++k) sums_[r * K_ + k] = running[k];
  }
  std::vector<double> u(K_);
  for (int r = 0; r < rows_; ++r) {
    const std::size_t base = static_cast<std::size_t>(r) * K_;
    for (int k = 0; k < K_; ++k) {
      if (thompson_) {
        const double var = obs_std_[k] * obs_std_[k];
        post_mean_[base + k] = (prior_mu0_ * prior_prec_ + sums_[base + k] / var) * post_var_[base + k];
        const double d = draws_[base + k] - post_mean_[base + k];
        phi_[base + k] = -0.5 * d * d / post_var_[base + k];
        u[k] = draws_[base + k];
      } else {
        u[k] = sums_[base + k] * inv_n_[base + k] + bonus_[base + k];
      }
    }
    const auto p = softmax(u, tau_);
    std::copy(p.begin(), p.end(), p_.begin() + base);
    logterm_[r] = std::log(mix(p[sel_[r]]));
  }
}

double ConditionalSampler::value_delta(int site, double delta, bool keep) {
  const int k = site_arm_[site];
  double change = 0.0;
  if (thompson_) {
    const double scale = delta / (obs_std_[k] * obs_std_[k]);
    for (int r = first_row_[site]; r < rows_; ++r) {
      const std::size_t i = static_cast<std::size_t>(r) * K_ + k;
      const double d = draws_[i] - post_mean_[i] - scale * post_var_[i];
      const double phi_new = -0.5 * d * d / post_var_[i];
      change += phi_new - phi_[i];
      if (keep) buf_log_[r] = phi_new;
    }
    return change;
  }
  for (int r = first_row_[site]; r < rows_; ++r) {
    const std::size_t base = static_cast<std::size_t>(r) * K_;
    const double du = delta * inv_n_[base + k] / tau_;
    const double em1 = std::expm1(du);
    const double pk = p_[base + k];
    const int s = sel_[r];
    double log_new;
    if (eps_ > 0.0) {
      const double z = 1.0 + pk * em1;
      const double p_sel = (s == k ? pk * (em1 + 1.0) : p_[base + s]) / z;
      log_new = std::log(mix(p_sel));
    } else {
      // log p_s after arm k's statistic moves by du * tau.
      log_new = logterm_[r] + (s == k ? du : 0.0) - std::log1p(pk * em1);
    }
    change += log_new - logterm_[r];
    if (keep) {
      buf_log_[r] = log_new;
      buf_em1_[r] = em1;
    }
  }
  return change;
}

void ConditionalSampler::commit_value(int site, double delta) {
  const int k = site_arm_[site];
  x_[site] += delta;
  if (thompson_) {
    const double scale = delta / (obs_std_[k] * obs_std_[k]);
    for (int r = first_row_[site]; r < rows_; ++r) {
      const std::size_t i = static_cast<std::size_t>(r) * K_ + k;
      sums_[i] += delta;
      post_mean_[i] += scale * post_var_[i];
      phi_[i] = buf_log_[r];
    }
    return;
  }
  for (int r = first_row_[site]; r < rows_; ++r) {
    const std::size_t base = static_cast<std::size_t>(r) * K_;
    const double em1 = buf_em1_[r];
    const double inv_z = 1.0 / (1.0 + p_[base + k] * em1);
    for (int j = 0; j < K_; ++j) p_[base + j] *= inv_z;
    p_[base + k] *= em1 + 1.0;
    sums_[base + k] += delta;
    logterm_[r] = buf_log_[r];
  }
}

double ConditionalSampler::log_acceptance_ratio(int site, double candidate) const {
  auto& self = const_cast<ConditionalSampler&>(*this);
  const int k = site_arm_[site];
  const double delta = candidate - x_[site];
  double logr = self.value_delta(site, delta, false);
  if (config_.proposal == Proposal::RandomWalkPerSite) {
    const double var = obs_std_[k] * obs_std_[k];
    const double a = candidate - theta_[k], b = x_[site] - theta_[k];
    logr += -0.5 * (a * a - b * b) / var;
  }
  return logr;
}

void ConditionalSampler::set_value(int site, double candidate) {
  const double delta = candidate - x_[site];
  value_delta(site, delta, true);
  commit_value(site, delta);
}

bool ConditionalSampler::update_value_site(int site, RngStream& stream) {
  const int k = site_arm_[site];
  const double sd = obs_std_[k];
  double candidate;
  double logr = 0.0;
  if (config_.proposal == Proposal::IndependencePerSite) {
    candidate = theta_[k] + sd * stream.normal();
    last_proposal_[site] = candidate;
    proposed_in_step_[site] = 1;
  } else {
    candidate = x_[site] + config_.walk_std * sd * stream.normal();
    const double a = candidate - theta_[k], b = x_[site] - theta_[k];
    logr += -0.5 * (a * a - b * b) / (sd * sd);
  }
  const double delta = candidate - x_[site];
  logr += value_delta(site, delta, true);
  ++proposals_;
  const double u = stream.uniform();
  if (logr >= 0.0 || std::log(u) < logr) {
    commit_value(site, delta);
    ++accepts_;
    return true;
  }
  return false;
}

bool ConditionalSampler::update_draw_site(int row, int arm, RngStream& stream) {
  const std::size_t base = static_cast<std::size_t>(row) * K_;
  const std::size_t i = base + arm;
  // Independence proposal from the draw's own Normal factor, which then cancels.
  const double candidate = post_mean_[i] + std::sqrt(post_var_[i]) * stream.normal();
  const double du = (candidate - draws_[i]) / tau_;
  const double em1 = std::expm1(du);
  const double pk = p_[i];
  const int s = sel_[row];
  const double log_new = logterm_[row] + (s == arm ? du : 0.0) - std::log1p(pk * em1);
  const double logr = log_new - logterm_[row];
  ++proposals_;
  const double u = stream.uniform();
  if (logr >= 0.0 || std::log(u) < logr) {
    const double inv_z = 1.0 / (1.0 + pk * em1);
    for (int j = 0; j < K_; ++j) p_[base + j] *= inv_z;
    p_[i] *= em1 + 1.0;
    logterm_[row] = log_new;
    draws_[i] = candidate;
    const double d = candidate - post_mean_[i];
    phi_[i] = -0.5 * d * d / post_var_[i];
    ++accepts_;
    return true;
  }
  return false;
}

void ConditionalSampler::step(RngStream& stream) {
  refresh();
  std::fill(proposed_in_step_.begin(), proposed_in_step_.end(), 0);
  const int value_sites = T_;
  const int draw_sites = num_draw_sites();
  if (config_.sites_per_step == 0) {
    for (int s = 0; s < value_sites; ++s) update_value_site(s, stream);
    for (int s = 0; s < draw_sites; ++s) update_draw_site(s / K_, s % K_, stream);
  } else {
    const int total = value_sites + draw_sites;
    for (int j = 0; j < config_.sites_per_step; ++j) {
      const int s = stream.uniform_int(total);
      if (s < value_sites)
        update_value_site(s, stream);
      else
        update_draw_site((s - value_sites) / K_, (s - value_sites) % K_, stream);
    }
  }
  std::fill(cv_sum_.begin(), cv_sum_.end(), 0.0);
  std::fill(cv_count_.begin(), cv_count_.end(), 0);
  for (int s = 0; s < value_sites; ++s) {
    if (!proposed_in_step_[s]) continue;
    cv_sum_[site_arm_[s]] += last_proposal_[s];
    ++cv_count_[site_arm_[s]];
  }
}

std::vector<std::vector<double>> ConditionalSampler::samples() const {
  std::vector<std::vector<double>> out(K_);
  for (int i = 0; i < T_; ++i) out[site_arm_[i]].push_back(x_[i]);
  return out;
}

std::vector<std::vector<double>> ConditionalSampler::posterior_draws() const {
  std::vector<std::vector<double>> out;
  if (!thompson_) return out;
  for (int r = 0; r < rows_; ++r) out.emplace_back(draws_.begin() + r * K_, draws_.begin() + (r + 1) * K_);
  return out;
}

std::vector<double> ConditionalSampler::arm_sums() const {
  std::vector<double> s(K_, 0.0);
  for (int i = 0; i < T_; ++i) s[site_arm_[i]] += x_[i];
  return s;
}

double ConditionalSampler::log_selection_factor() const {
  // Rebuild a trace from the latent state and evaluate it from scratch.
  Trace t;
  t.arms.reserve(K_);
  for (int k = 0; k < K_; ++k) t.arms.push_back(ArmModel{ArmFamily::Gaussian, theta_[k], obs_std_[k]});
  t.horizon = T_;
  t.samples = samples();
  t.selections.resize(T_);
  for (int i = 0; i < T_; ++i) t.selections[i] = site_arm_[i];
  t.policy.gumbel = GumbelNoise{tau_};
  if (thompson_) {
    t.policy.kind = PolicyKind::Thompson;
    t.policy.thompson_prior = {prior_mu0_, 1.0 / prior_prec_};
    t.decision_stats = posterior_draws();
  } else if (eps_ > 0.0) {
    t.policy.kind = PolicyKind::EpsGreedy;
    t.policy.eps_greedy_epsilon = eps_;
  }
  // Index policies other than epsilon-greedy differ only through the bonus,
  // which the cached rows already carry.
  if (!thompson_ && eps_ == 0.0) {
    double total = 0.0;
    std::vector<double> running(K_, 0.0), u(K_);
    for (int i = 0; i < T_ - 1; ++i) {
      running[site_arm_[i]] += x_[i];
      const int r = i + 1 - K_;
      if (r < 0) continue;
      for (int k = 0; k < K_; ++k) u[k] = running[k] * inv_n_[r * K_ + k] + bonus_[r * K_ + k];
      total += std::log(softmax(u, tau_)[sel_[r]]);
    }
    return total;
  }
  return selection_loglik(t);
}

void mh_step(ConditionalSampler& chain, std::span<const double> theta, RngStream& stream) {
  chain.set_theta(theta);
  chain.step(stream);
}

std::vector<double> cd_update(std::span<const double> theta, std::span<const double> observed_sums,
                              std::span<const double> model_sums, std::span<const int> counts,
                              std::span<const double> obs_std, const CmleConfig& config) {
  std::vector<double> next(theta.begin(), theta.end());
  for (std::size_t k = 0; k < next.size(); ++k) {
    const double var = obs_std[k] * obs_std[k];
    const double grad = (observed_sums[k] - model_sums[k]) / var;
    const double scale = config.precondition ? var / counts[k] : 1.0;
    next[k] += config.eta * scale * grad;
  }
  return next;
}

CmleResult cd_fit(const Trace& trace, const CmleConfig& config) {
  ConditionalSampler chain(trace, config);
  const int K = trace.num_arms();
  RngStream stream(config.seed, config.trial_index, StreamPurpose::Mcmc);

  std::vector<double> observed(K, 0.0), obs_std(K);
  std::vector<int> counts(K);
  for (int k = 0; k < K; ++k) {
    for (double x : trace.samples[k]) observed[k] += x;
    counts[k] = static_cast<int>(trace.samples[k].size());
    obs_std[k] = trace.arms[k].obs_std;
  }
  std::vector<double> theta(K);
  for (int k = 0; k < K; ++k) theta[k] = observed[k] / counts[k];

  CmleResult result;
  result.config = config;
  result.trajectory.reserve(config.n_gd_iters + 1);
  result.trajectory.push_back(theta);

  const bool use_cv = config.control_variate && config.proposal == Proposal::IndependencePerSite;
  const int post = config.mcmc_steps_per_iter - config.burn_in;
  std::vector<int> retain(config.mcmc_steps_per_iter, 0);
  for (int j = 0; j < config.R; ++j) retain[config.burn_in + ((j + 1) * post + config.R - 1) / config.R - 1] = 1;

  std::vector<double> model(K);
  for (int it = 0; it < config.n_gd_iters; ++it) {
    chain.set_theta(theta);
    std::fill(model.begin(), model.end(), 0.0);
    for (int s = 0; s < config.mcmc_steps_per_iter; ++s) {
      chain.step(stream);
      if (!retain[s]) continue;
      const auto sums = chain.arm_sums();
      for (int k = 0; k < K; ++k) {
        double v = sums[k];
        // Each proposal has mean theta_k; subtracting their centred sum keeps
        // the estimate unbiased and cancels most of the resampling noise.
        if (use_cv) v -= chain.proposal_sums()[k] - chain.proposal_counts()[k] * theta[k];
        model[k] += v;
      }
    }
    double norm = 0.0;
    for (int k = 0; k < K; ++k) {
      model[k] /= config.R;
      const double g = (observed[k] - model[k]) / (obs_std[k] * obs_std[k]);
      norm += g * g;
    }
    result.final_gradient_norm = std::sqrt(norm);
    theta = cd_update(theta, observed, model, counts, obs_std, config);
    for (double v : theta) {
      if (!std::isfinite(v) || std::abs(v) > config.divergence_bound) {
        std::ostringstream os;
        os << "cMLE iterate left the bound " << config.divergence_bound << " at iteration " << it + 1
           << "; reduce eta";
        throw Error(ErrorCode::Divergence, os.str());
      }
    }
    result.trajectory.push_back(theta);
  }
  result.theta = theta;
  result.acceptance_rate = chain.proposals() ? static_cast<double>(chain.accepts()) / chain.proposals() : 1.0;
  return result;
}

}  // namespace negbias
