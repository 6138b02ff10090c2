#include "negbias/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "negbias/policies.hpp"

namespace negbias {

Trace run_trial(const std::vector<ArmModel>& arms, const PolicyConfig& policy, int horizon,
                std::uint64_t master_seed, std::uint64_t trial_index, TrialOptions options) {
  const int K = static_cast<int>(arms.size());
  if (K < 2) throw Error(ErrorCode::InvalidConfig, "run_trial needs at least two arms");
  if (horizon < K) throw Error(ErrorCode::InvalidConfig, "horizon must be at least the number of arms");
  if (options.init_pulls < 1) throw Error(ErrorCode::InvalidConfig, "init_pulls must be at least 1");
  for (const auto& a : arms) a.validate();
  policy.validate();
  if (policy.kind == PolicyKind::Thompson)
    for (const auto& a : arms)
      if (a.family != ArmFamily::Gaussian)
        throw Error(ErrorCode::InvalidConfig, "Thompson sampling is defined for Gaussian arms");

  RngStream arm_stream(master_seed, trial_index, StreamPurpose::ArmDraw);
  RngStream policy_stream(master_seed, trial_index, StreamPurpose::PolicyNoise);
  RngStream gumbel_stream(master_seed, trial_index, StreamPurpose::GumbelNoise);
  RngStream held_stream(master_seed, trial_index, StreamPurpose::HeldOut);

  Trace trace;
  trace.arms = arms;
  trace.policy = policy;
  trace.horizon = horizon;
  trace.split = options.split;
  trace.init_pulls = options.init_pulls;
  trace.samples.resize(K);
  if (options.split) trace.held_out.resize(K);
  trace.selections.reserve(horizon);
  trace.decision_stats.reserve(horizon - K);
  if (policy.gumbel) trace.gumbel_draws.reserve(horizon - K);

  std::vector<double> sums(K, 0.0);
  std::vector<int> counts(K, 0);
  std::vector<double> means(K, 0.0);

  auto pull = [&](int k) {
    const double x = draw_sample(arms[k], arm_stream);
    trace.selections.push_back(k);
    trace.samples[k].push_back(x);
    sums[k] += x;
    ++counts[k];
    means[k] = sums[k] / counts[k];
    if (options.split) trace.held_out[k].push_back(draw_sample(arms[k], held_stream));
  };

  for (int k = 0; k < K; ++k) pull(k);

  const int forced = std::min(horizon, K * options.init_pulls);
  for (int t = K; t < horizon; ++t) {
    DecisionStats u;
    if (policy.kind == PolicyKind::Thompson) {
      u.resize(K);
      for (int k = 0; k < K; ++k) {
        const Posterior post = thompson_posterior(sums[k], counts[k], policy.thompson_prior, arms[k].obs_std);
        u[k] = post.mean + std::sqrt(post.var) * policy_stream.normal();
      }
    } else {
      u = index_stats(means, counts, policy);
    }
    SelectionNoise noise;
    if (policy.kind == PolicyKind::EpsGreedy) noise.omega = policy_stream.uniform();
    if (policy.gumbel) {
      noise.gumbel.resize(K);
      for (auto& g : noise.gumbel) g = gumbel_stream.gumbel(policy.gumbel->tau);
      trace.gumbel_draws.push_back(noise.gumbel);
    }
    const int next = t < forced ? t % K : select_with_noise(u, policy, noise);
    trace.decision_stats.push_back(std::move(u));
    pull(next);
  }
  return trace;
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  const int workers = static_cast<int>(std::min<std::size_t>(threads, n));
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

const CheckpointReport& ExperimentReport::at(int round) const {
  for (const auto& c : checkpoints)
    if (c.round == round) return c;
  throw Error(ErrorCode::InvalidConfig, "no checkpoint at round " + std::to_string(round));
}

ExperimentReport run_campaign(const std::vector<ArmModel>& arms, const PolicyConfig& policy, int horizon,
                              int n_trials, std::uint64_t master_seed, const CampaignOptions& options) {
  if (n_trials < 1) throw Error(ErrorCode::InvalidConfig, "n_trials must be at least 1");
  std::vector<int> rounds = options.checkpoints;
  if (rounds.empty()) rounds.push_back(horizon);
  std::sort(rounds.begin(), rounds.end());
  rounds.erase(std::unique(rounds.begin(), rounds.end()), rounds.end());
  for (int r : rounds)
    if (r < 1 || r > horizon) throw Error(ErrorCode::InvalidConfig, "checkpoint outside [1, T]");

  const int K = static_cast<int>(arms.size());
  const std::size_t C = rounds.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  // One row of C * K means per trial; NaN marks an arm not yet drawn.
  std::vector<std::vector<double>> per_trial(n_trials);
  parallel_for(n_trials, options.threads, [&](std::size_t i) {
    const Trace trace = run_trial(arms, policy, horizon, master_seed, i, {.init_pulls = options.init_pulls});
    std::vector<double> row(C * K, nan);
    std::vector<double> sums(K, 0.0);
    std::vector<int> counts(K, 0);
    std::size_t c = 0;
    std::vector<int> taken(K, 0);
    for (int t = 1; t <= horizon && c < C; ++t) {
      const int k = trace.selections[t - 1];
      sums[k] += trace.samples[k][taken[k]++];
      ++counts[k];
      while (c < C && rounds[c] == t) {
        for (int a = 0; a < K; ++a)
          if (counts[a] > 0) row[c * K + a] = sums[a] / counts[a];
        ++c;
      }
    }
    per_trial[i] = std::move(row);
  });

  ExperimentReport report;
  report.policy = policy;
  report.arms = arms;
  report.horizon = horizon;
  report.n_trials = n_trials;
  report.master_seed = master_seed;
  for (std::size_t c = 0; c < C; ++c) {
    CheckpointReport cp;
    cp.round = rounds[c];
    cp.arms.resize(K);
    cp.joint_bias.assign(K + 1, 0.0);
    std::vector<double> sum(K, 0.0), sum_sq(K, 0.0);
    double pooled_sum = 0.0, pooled_sq = 0.0;
    int pooled_n = 0;
    for (int i = 0; i < n_trials; ++i) {
      int negatives = 0;
      double trial_pool = 0.0;
      int defined = 0;
      for (int a = 0; a < K; ++a) {
        const double m = per_trial[i][c * K + a];
        if (std::isnan(m)) continue;
        const double b = m - arms[a].mean;
        sum[a] += b;
        sum_sq[a] += b * b;
        ++cp.arms[a].n_defined;
        if (b < 0.0) ++negatives;
        trial_pool += b;
        ++defined;
      }
      cp.joint_bias[negatives] += 1.0;
      if (defined == K) {
        trial_pool /= K;
        pooled_sum += trial_pool;
        pooled_sq += trial_pool * trial_pool;
        ++pooled_n;
      }
    }
    for (auto& f : cp.joint_bias) f /= n_trials;
    double bias_total = 0.0, mse_total = 0.0;
    int arms_defined = 0;
    for (int a = 0; a < K; ++a) {
      auto& s = cp.arms[a];
      const int n = s.n_defined;
      if (n == 0) {
        s.bias = s.se = s.mse = nan;
        continue;
      }
      s.bias = sum[a] / n;
      s.mse = sum_sq[a] / n;
      const double var = n > 1 ? std::max(0.0, (sum_sq[a] - n * s.bias * s.bias) / (n - 1)) : 0.0;
      s.se = std::sqrt(var / n);
      bias_total += s.bias;
      mse_total += s.mse;
      ++arms_defined;
    }
    cp.pooled_bias = arms_defined ? bias_total / arms_defined : nan;
    cp.pooled_mse = arms_defined ? mse_total / arms_defined : nan;
    if (pooled_n > 1) {
      const double m = pooled_sum / pooled_n;
      cp.pooled_bias_se = std::sqrt(std::max(0.0, (pooled_sq - pooled_n * m * m) / (pooled_n - 1)) / pooled_n);
    }
    report.checkpoints.push_back(std::move(cp));
  }
  return report;
}

ExactBias enumerate_bernoulli_exact(double mu1, double mu2, const PolicyConfig& policy, int horizon) {
  if (horizon < 2) throw Error(ErrorCode::InvalidConfig, "exact enumeration needs T >= 2");
  if (horizon > kMaxExactHorizon) {
    std::ostringstream os;
    os << "exact enumeration capped at T = " << kMaxExactHorizon << " (got " << horizon << ")";
    throw Error(ErrorCode::StateSpaceTooLarge, os.str());
  }
  if (policy.kind == PolicyKind::Thompson)
    throw Error(ErrorCode::InvalidConfig, "exact enumeration needs a closed-form selection distribution");
  ArmModel::bernoulli(mu1);
  ArmModel::bernoulli(mu2);
  policy.validate();

  const int T = horizon;
  const int D = T + 1;
  // prob[(n1 * D + s1) * D + s2]; n2 = t - n1.
  std::vector<double> prob(static_cast<std::size_t>(D) * D * D, 0.0), next(prob.size(), 0.0);
  auto idx = [D](int n1, int s1, int s2) { return (static_cast<std::size_t>(n1) * D + s1) * D + s2; };
  const double p1[2] = {1.0 - mu1, mu1};
  const double p2[2] = {1.0 - mu2, mu2};
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) prob[idx(1, a, b)] = p1[a] * p2[b];

  std::vector<double> means(2);
  std::vector<int> counts(2);
  for (int t = 2; t < T; ++t) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int n1 = 1; n1 < t; ++n1) {
      const int n2 = t - n1;
      for (int s1 = 0; s1 <= n1; ++s1)
        for (int s2 = 0; s2 <= n2; ++s2) {
          const double w = prob[idx(n1, s1, s2)];
          if (w == 0.0) continue;
          means = {static_cast<double>(s1) / n1, static_cast<double>(s2) / n2};
          counts = {n1, n2};
          const auto dist = selection_distribution(index_stats(means, counts, policy), policy);
          for (int x = 0; x < 2; ++x) {
            if (dist[0] > 0.0) next[idx(n1 + 1, s1 + x, s2)] += w * dist[0] * p1[x];
            if (dist[1] > 0.0) next[idx(n1, s1, s2 + x)] += w * dist[1] * p2[x];
          }
        }
    }
    std::swap(prob, next);
  }

  double e1 = 0.0, e2 = 0.0;
  for (int n1 = 1; n1 < T; ++n1) {
    const int n2 = T - n1;
    for (int s1 = 0; s1 <= n1; ++s1)
      for (int s2 = 0; s2 <= n2; ++s2) {
        const double w = prob[idx(n1, s1, s2)];
        if (w == 0.0) continue;
        e1 += w * s1 / n1;
        e2 += w * s2 / n2;
      }
  }
  return {e1 - mu1, e2 - mu2};
}

std::vector<ScatterPoint> future_samples_scatter(const std::vector<ArmModel>& arms, const PolicyConfig& policy,
                                                 int t_snapshot, int horizon, int n_trials,
                                                 std::uint64_t master_seed, int threads, int init_pulls) {
  if (!(t_snapshot >= 1 && t_snapshot < horizon))
    throw Error(ErrorCode::InvalidConfig, "snapshot round must satisfy 1 <= t < T");
  if (n_trials < 1) throw Error(ErrorCode::InvalidConfig, "n_trials must be at least 1");
  std::vector<ScatterPoint> points(n_trials);
  parallel_for(n_trials, threads, [&](std::size_t i) {
    const Trace trace = run_trial(arms, policy, horizon, master_seed, i, {.init_pulls = init_pulls});
    ScatterPoint p;
    p.snapshot_bias = sample_mean(trace, 0, t_snapshot) - arms[0].mean;
    for (int r = t_snapshot; r < horizon; ++r)
      if (trace.selections[r] == 0) ++p.future_count;
    points[i] = p;
  });
  return points;
}

double pearson_correlation(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace negbias
