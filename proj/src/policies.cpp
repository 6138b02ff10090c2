#include "negbias/policies.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace negbias {

const char* to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::Greedy: return "greedy";
    case PolicyKind::EpsGreedy: return "eps_greedy";
    case PolicyKind::LilUCB: return "lil_ucb";
    case PolicyKind::Thompson: return "thompson";
  }
  return "unknown";
}

PolicyKind policy_kind_from_string(const std::string& name) {
  if (name == "greedy") return PolicyKind::Greedy;
  if (name == "eps_greedy") return PolicyKind::EpsGreedy;
  if (name == "lil_ucb") return PolicyKind::LilUCB;
  if (name == "thompson") return PolicyKind::Thompson;
  throw Error(ErrorCode::InvalidConfig, "unknown policy kind '" + name + "'");
}

PolicyConfig PolicyConfig::eps_greedy(double epsilon) {
  PolicyConfig c;
  c.kind = PolicyKind::EpsGreedy;
  c.eps_greedy_epsilon = epsilon;
  c.validate();
  return c;
}

PolicyConfig PolicyConfig::lil_ucb(LilUcbParams params) {
  PolicyConfig c;
  c.kind = PolicyKind::LilUCB;
  c.lilucb = params;
  c.validate();
  return c;
}

PolicyConfig PolicyConfig::thompson(ThompsonPrior prior) {
  PolicyConfig c;
  c.kind = PolicyKind::Thompson;
  c.thompson_prior = prior;
  c.validate();
  return c;
}

PolicyConfig PolicyConfig::with_gumbel(double tau) const {
  PolicyConfig c = *this;
  c.gumbel = GumbelNoise{tau};
  c.validate();
  return c;
}

void PolicyConfig::validate() const {
  auto bad = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
  if (kind == PolicyKind::EpsGreedy && !(eps_greedy_epsilon >= 0.0 && eps_greedy_epsilon <= 1.0))
    bad("eps_greedy epsilon must lie in [0, 1]");
  if (kind == PolicyKind::LilUCB) {
    const auto& p = lilucb;
    if (!(p.beta >= 0.0) || !(p.epsilon > 0.0) || !(p.delta > 0.0))
      bad("lil_ucb needs beta >= 0, epsilon > 0, delta > 0");
    // The smallest count is 1; the outer log needs log(1 + eps) / delta > 1.
    if (!(std::log(1.0 + p.epsilon) / p.delta > 1.0)) {
      std::ostringstream os;
      os << "lil_ucb: log(log(1 + epsilon) / delta) is non-positive at N = 1 (epsilon=" << p.epsilon
         << ", delta=" << p.delta << ")";
      throw Error(ErrorCode::NonpositiveLogArgument, os.str());
    }
  }
  if (kind == PolicyKind::Thompson && !(thompson_prior.sigma0_sq > 0.0)) bad("thompson sigma0_sq must be positive");
  if (gumbel && !(gumbel->tau > 0.0 && std::isfinite(gumbel->tau))) bad("gumbel tau must be positive");
}

std::string PolicyConfig::label() const {
  std::ostringstream os;
  os << to_string(kind);
  if (kind == PolicyKind::EpsGreedy) os << "(" << eps_greedy_epsilon << ")";
  if (gumbel) os << "+gumbel(" << gumbel->tau << ")";
  return os.str();
}

bool operator==(const PolicyConfig& a, const PolicyConfig& b) {
  auto g = [](const PolicyConfig& c) { return c.gumbel ? c.gumbel->tau : -1.0; };
  return a.kind == b.kind && a.eps_greedy_epsilon == b.eps_greedy_epsilon && a.lilucb.beta == b.lilucb.beta &&
         a.lilucb.epsilon == b.lilucb.epsilon && a.lilucb.delta == b.lilucb.delta &&
         a.lilucb.alpha == b.lilucb.alpha && a.thompson_prior.mu0 == b.thompson_prior.mu0 &&
         a.thompson_prior.sigma0_sq == b.thompson_prior.sigma0_sq && g(a) == g(b);
}

double lil_ucb_bonus(int n, const LilUcbParams& p) {
  const double eps = p.epsilon;
  const double inner = std::log((1.0 + eps) * n) / p.delta;
  return (1.0 + p.beta) * (1.0 + std::sqrt(eps)) * std::sqrt(2.0 * (1.0 + eps) * std::log(inner) / n);
}

Posterior thompson_posterior(double sample_sum, int n, const ThompsonPrior& prior, double obs_std) {
  const double obs_var = obs_std * obs_std;
  const double precision = 1.0 / prior.sigma0_sq + n / obs_var;
  return {(prior.mu0 / prior.sigma0_sq + sample_sum / obs_var) / precision, 1.0 / precision};
}

DecisionStats index_stats(std::span<const double> means, std::span<const int> counts, const PolicyConfig& config) {
  DecisionStats u(means.begin(), means.end());
  switch (config.kind) {
    case PolicyKind::Greedy:
    case PolicyKind::EpsGreedy:
      break;
    case PolicyKind::LilUCB:
      for (std::size_t k = 0; k < u.size(); ++k) u[k] += lil_ucb_bonus(counts[k], config.lilucb);
      break;
    case PolicyKind::Thompson:
      throw Error(ErrorCode::InvalidConfig, "Thompson statistics are posterior draws, not an index");
  }
  return u;
}

DecisionStats decision_stats(const Trace& trace, int t, const PolicyConfig& config) {
  const int K = trace.num_arms();
  if (t < K || t > trace.horizon) throw Error(ErrorCode::InvalidConfig, "decision_stats needs K <= t <= T");
  if (config.kind == PolicyKind::Thompson) {
    const std::size_t row = static_cast<std::size_t>(t - K);
    if (row >= trace.decision_stats.size())
      throw Error(ErrorCode::MissingPosteriorDraws, "trace holds no posterior draw for this round");
    return trace.decision_stats[row];
  }
  ArmSummary s = summarize(trace, t);
  return index_stats(s.means, s.counts, config);
}

SelectionNoise draw_selection_noise(const PolicyConfig& config, int num_arms, RngStream& stream) {
  SelectionNoise noise;
  if (config.kind == PolicyKind::EpsGreedy) noise.omega = stream.uniform();
  if (config.gumbel) {
    noise.gumbel.resize(num_arms);
    for (auto& g : noise.gumbel) g = stream.gumbel(config.gumbel->tau);
  }
  return noise;
}

int argmax(std::span<const double> values) {
  int best = 0;
  for (int k = 1; k < static_cast<int>(values.size()); ++k)
    if (values[k] > values[best]) best = k;
  return best;
}

int select_with_noise(std::span<const double> stats, const PolicyConfig& config, const SelectionNoise& noise) {
  const int K = static_cast<int>(stats.size());
  if (config.kind == PolicyKind::EpsGreedy && noise.omega < config.eps_greedy_epsilon) {
    // omega in [eps (k-1)/K, eps k/K) picks arm k.
    int k = static_cast<int>(noise.omega / config.eps_greedy_epsilon * K);
    return std::min(k, K - 1);
  }
  if (!config.gumbel) return argmax(stats);
  std::vector<double> perturbed(stats.begin(), stats.end());
  for (int k = 0; k < K; ++k) perturbed[k] += noise.gumbel.at(k);
  return argmax(perturbed);
}

int select(const Trace& trace, int t, const PolicyConfig& config, RngStream& noise_stream) {
  DecisionStats u;
  if (config.kind == PolicyKind::Thompson) {
    u.resize(trace.arms.size());
    const auto counts = trace.counts(t);
    for (std::size_t k = 0; k < u.size(); ++k) {
      double sum = 0.0;
      for (int i = 0; i < counts[k]; ++i) sum += trace.samples[k][i];
      Posterior post = thompson_posterior(sum, counts[k], config.thompson_prior, trace.arms[k].obs_std);
      u[k] = post.mean + std::sqrt(post.var) * noise_stream.normal();
    }
  } else {
    u = decision_stats(trace, t, config);
  }
  SelectionNoise noise = draw_selection_noise(config, trace.num_arms(), noise_stream);
  return select_with_noise(u, config, noise);
}

std::vector<double> softmax(std::span<const double> stats, double tau) {
  std::vector<double> p(stats.size());
  const double top = *std::max_element(stats.begin(), stats.end());
  double total = 0.0;
  for (std::size_t k = 0; k < stats.size(); ++k) {
    p[k] = std::exp((stats[k] - top) / tau);
    total += p[k];
  }
  for (auto& v : p) v /= total;
  return p;
}

std::vector<double> selection_distribution(std::span<const double> stats, const PolicyConfig& config) {
  const int K = static_cast<int>(stats.size());
  std::vector<double> p;
  if (config.gumbel) {
    p = softmax(stats, config.gumbel->tau);
  } else {
    p.assign(K, 0.0);
    p[argmax(stats)] = 1.0;
  }
  if (config.kind == PolicyKind::EpsGreedy) {
    const double eps = config.eps_greedy_epsilon;
    for (auto& v : p) v = eps / K + (1.0 - eps) * v;
  }
  return p;
}

double selection_probability(std::span<const double> stats, int chosen, const PolicyConfig& config,
                             bool differentiable) {
  if (differentiable && !config.gumbel)
    throw Error(ErrorCode::HardMaxUndifferentiable,
                "hard argmax selection probability is an indicator; add Gumbel randomization");
  return selection_distribution(stats, config).at(chosen);
}

}  // namespace negbias
