#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "negbias/core.hpp"

namespace negbias {

enum class Proposal { IndependencePerSite, RandomWalkPerSite };

const char* to_string(Proposal proposal);

/// Hyperparameters of the contrastive-divergence fit.
struct CmleConfig {
  double tau = 1.0;          // Gumbel scale the trace was collected with
  double eta = 0.005;        // gradient step size
  bool precondition = true;  // scale arm k's step by obs_var / N_k
  int n_gd_iters = 600;
  int mcmc_steps_per_iter = 4;
  int burn_in = 1;
  int R = 3;                 // retained chain states averaged per gradient
  Proposal proposal = Proposal::IndependencePerSite;
  double walk_std = 0.5;     // random-walk step in units of obs_std
  int sites_per_step = 0;    // 0: one systematic sweep per step; else random-scan updates
  bool control_variate = true;
  double divergence_bound = 1e4;
  std::uint64_t seed = 0;
  std::uint64_t trial_index = 0;

  void validate() const;

  /// 3000 iterations of 30-step chains with the first half as burn-in.
  static CmleConfig thompson_defaults();
};

struct CmleResult {
  std::vector<double> theta;
  std::vector<std::vector<double>> trajectory;  // n_gd_iters + 1 iterates, starting at the sample means
  double acceptance_rate = 0.0;
  double final_gradient_norm = 0.0;
  CmleConfig config;
};

/// sum_k sum_m log N(X_m^(k); theta_k, obs_std_k^2).
double data_loglik(const Trace& trace, std::span<const double> theta);

/// sum_{t=K}^{T-1} log P[f(U_t) = s_{t+1} | U_t] with U_t recomputed from the
/// trace's samples (index policies) or the recorded posterior draws
/// (Thompson, together with their Normal log-densities). Theta-free.
double selection_loglik(const Trace& trace);

/// Conditional log-likelihood without log Z(theta). Requires a Gumbel-randomized
/// trace (HardMaxTrace otherwise) collected at config.tau, with Gaussian arms.
double conditional_loglik_unnormalized(const Trace& trace, std::span<const double> theta, const CmleConfig& config);

/// Analytic d/dtheta of the objective: sum_m (X_m^(k) - theta_k) / obs_var_k.
std::vector<double> conditional_loglik_gradient(const Trace& trace, std::span<const double> theta);

/// Thompson + Gumbel objective: data term, Normal log-densities of the
/// posterior draws around the posterior means recomputed from the samples,
/// and the softmax terms of the draws. Throws MissingPosteriorDraws.
double thompson_conditional_loglik(const Trace& trace, std::span<const double> theta, const CmleConfig& config);
std::vector<double> thompson_conditional_loglik_gradient(const Trace& trace, std::span<const double> theta);

/// Gradient of the Thompson objective with respect to each recorded posterior
/// draw (rows t = K..T-1, one entry per arm).
std::vector<std::vector<double>> thompson_draw_gradient(const Trace& trace);

/// Metropolis-within-Gibbs chain on the sample values (and, for Thompson, the
/// posterior draws) conditioned on the trace's selection sequence.
///
/// Value site i is the sample drawn at round i + 1. Changing it moves the
/// running means of every later decision row, so the per-row selection
/// probabilities are cached and updated incrementally.
class ConditionalSampler {
 public:
  ConditionalSampler(const Trace& trace, const CmleConfig& config);

  void set_theta(std::span<const double> theta);
  std::span<const double> theta() const { return theta_; }

  /// One MCMC step: a systematic sweep, or sites_per_step random-scan updates.
  void step(RngStream& stream);

  int num_value_sites() const { return T_; }
  int num_draw_sites() const { return thompson_ ? rows_ * K_ : 0; }
  double value(int site) const { return x_[site]; }
  /// Log acceptance ratio of moving value site to `candidate` from the current state.
  double log_acceptance_ratio(int site, double candidate) const;
  /// Forces a site to a value (cache-consistent).
  void set_value(int site, double candidate);

  /// Per-arm latent samples in draw order.
  std::vector<std::vector<double>> samples() const;
  std::vector<std::vector<double>> posterior_draws() const;
  /// Per-arm sums of the current latent samples.
  std::vector<double> arm_sums() const;
  /// Per-arm sums of the last step's proposals (0 where an arm had none), and
  /// how many proposals they cover. Each proposal has mean theta_k.
  const std::vector<double>& proposal_sums() const { return cv_sum_; }
  const std::vector<int>& proposal_counts() const { return cv_count_; }

  /// selection_loglik of the current latent state, recomputed from scratch.
  double log_selection_factor() const;

  long proposals() const { return proposals_; }
  long accepts() const { return accepts_; }

 private:
  void refresh();
  double value_delta(int site, double delta, bool keep);
  void commit_value(int site, double delta);
  bool update_value_site(int site, RngStream& stream);
  bool update_draw_site(int row, int arm, RngStream& stream);
  double mix(double p) const;

  int K_ = 0, T_ = 0, rows_ = 0;
  bool thompson_ = false;
  double tau_ = 1.0;
  double eps_ = 0.0;  // epsilon-greedy mixture weight, 0 otherwise
  CmleConfig config_;
  std::vector<double> obs_std_;
  std::vector<double> theta_;
  std::vector<int> site_arm_;
  std::vector<int> first_row_;
  std::vector<double> x_;
  std::vector<int> sel_;         // arm chosen by each row
  std::vector<double> inv_n_;    // rows x K
  std::vector<double> bonus_;    // rows x K, index policies
  std::vector<double> sums_;     // rows x K running sums
  std::vector<double> p_;        // rows x K softmax probabilities
  std::vector<double> logterm_;  // rows: log P[f = s_{t+1}]
  // Thompson state.
  double prior_mu0_ = 0.0, prior_prec_ = 0.0;
  std::vector<double> post_var_, post_mean_, draws_, phi_;
  // Scratch for incremental updates.
  std::vector<double> buf_log_, buf_em1_;
  std::vector<double> cv_sum_;
  std::vector<int> cv_count_;
  std::vector<double> last_proposal_;
  std::vector<int> proposed_in_step_;
  long proposals_ = 0, accepts_ = 0;
};

/// One MH step of the chain at parameter theta.
void mh_step(ConditionalSampler& chain, std::span<const double> theta, RngStream& stream);

/// theta_{i+1} = theta_i + eta * P * (observed gradient - model gradient),
/// both data-term gradients expressed through per-arm sums.
std::vector<double> cd_update(std::span<const double> theta, std::span<const double> observed_sums,
                              std::span<const double> model_sums, std::span<const int> counts,
                              std::span<const double> obs_std, const CmleConfig& config);

/// Contrastive-divergence fit of the conditional MLE, started at the sample means.
CmleResult cd_fit(const Trace& trace, const CmleConfig& config);

}  // namespace negbias
