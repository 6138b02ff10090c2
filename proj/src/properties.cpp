#include "negbias/properties.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace negbias {

namespace {

void means_counts(const History& h, std::vector<double>& means, std::vector<int>& counts) {
  means.resize(h.size());
  counts.resize(h.size());
  for (std::size_t k = 0; k < h.size(); ++k) {
    counts[k] = static_cast<int>(h[k].size());
    means[k] = std::accumulate(h[k].begin(), h[k].end(), 0.0) / counts[k];
  }
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

class Sampler {
 public:
  explicit Sampler(const InstanceGenerator& gen)
      : gen_(gen), stream_(gen.seed, 0, StreamPurpose::PolicyNoise) {}

  int arms() { return gen_.min_arms + stream_.uniform_int(gen_.max_arms - gen_.min_arms + 1); }
  int length() { return 1 + stream_.uniform_int(gen_.max_samples); }

  std::vector<double> history(int n) {
    const bool snap = stream_.uniform() < gen_.tie_fraction;
    std::vector<double> v(n);
    for (auto& x : v) {
      x = gen_.value_scale * stream_.normal();
      if (snap) x = std::round(x * 2.0) / 2.0;
    }
    return v;
  }

  SelectionNoise noise(int K) {
    SelectionNoise n;
    n.omega = stream_.uniform();
    n.gumbel.resize(K);
    for (auto& g : n.gumbel) g = stream_.gumbel(1.0);
    return n;
  }

  int index(int K) { return stream_.uniform_int(K); }

 private:
  InstanceGenerator gen_;
  RngStream stream_;
};

}  // namespace

SelectionRule make_selection_rule(const PolicyConfig& config) {
  if (config.kind == PolicyKind::Thompson)
    throw Error(ErrorCode::InvalidConfig, "property rules are defined for index policies only");
  return [config](const History& h, const SelectionNoise& noise) {
    std::vector<double> means;
    std::vector<int> counts;
    means_counts(h, means, counts);
    return select_with_noise(index_stats(means, counts, config), config, noise);
  };
}

DistributionRule make_distribution_rule(const PolicyConfig& config) {
  if (config.kind == PolicyKind::Thompson)
    throw Error(ErrorCode::InvalidConfig, "property rules are defined for index policies only");
  return [config](const History& h) {
    std::vector<double> means;
    std::vector<int> counts;
    means_counts(h, means, counts);
    const auto u = index_stats(means, counts, config);
    if (config.kind != PolicyKind::EpsGreedy) return BranchLaws{selection_distribution(u, config)};
    PolicyConfig exploit = config;
    exploit.eps_greedy_epsilon = 0.0;
    return BranchLaws{selection_distribution(u, exploit), std::vector<double>(u.size(), 1.0 / u.size())};
  };
}

std::string PropertyReport::summary() const {
  std::ostringstream os;
  os << (passed ? "pass" : "FAIL") << " (" << instances << " instances, " << non_vacuous << " non-vacuous)";
  if (counterexample) os << ": arm " << counterexample->arm << ", " << counterexample->detail;
  return os.str();
}

PropertyReport check_exploit(const SelectionRule& rule, const InstanceGenerator& gen, int n_instances) {
  Sampler sampler(gen);
  PropertyReport report;
  for (int i = 0; i < n_instances; ++i) {
    const int K = sampler.arms();
    History base(K);
    for (auto& h : base) h = sampler.history(sampler.length());
    const int k = sampler.index(K);
    const int n = sampler.length();
    auto a = sampler.history(n);
    auto b = sampler.history(n);
    if (mean_of(a) > mean_of(b)) std::swap(a, b);
    const SelectionNoise noise = sampler.noise(K);

    History lower = base, higher = base;
    lower[k] = a;
    higher[k] = b;
    ++report.instances;
    const int pick_low = rule(lower, noise);
    if (pick_low != k) continue;
    ++report.non_vacuous;
    const int pick_high = rule(higher, noise);
    if (pick_high != k) {
      report.passed = false;
      std::ostringstream os;
      os << "selected with mean " << mean_of(a) << " but not with mean " << mean_of(b) << " (picked " << pick_high
         << ")";
      report.counterexample = Counterexample{k, lower, higher, noise, os.str()};
      return report;
    }
  }
  return report;
}

PropertyReport check_iio(const DistributionRule& rule, const InstanceGenerator& gen, int n_instances) {
  Sampler sampler(gen);
  PropertyReport report;
  constexpr double kTol = 1e-12;
  for (int i = 0; i < n_instances; ++i) {
    const int K = sampler.arms();
    History first(K);
    for (auto& h : first) h = sampler.history(sampler.length());
    const int k = sampler.index(K);
    History second = first;
    second[k] = sampler.history(sampler.length());
    ++report.instances;

    const auto laws_p = rule(first);
    const auto laws_q = rule(second);
    bool counted = false;
    for (std::size_t b = 0; b < laws_p.size(); ++b) {
      const auto& p = laws_p[b];
      const auto& q = laws_q.at(b);
      const double rest_p = 1.0 - p[k];
      const double rest_q = 1.0 - q[k];
      if (rest_p <= kTol || rest_q <= kTol) continue;  // conditioning event has probability zero
      if (!counted) ++report.non_vacuous;
      counted = true;
      for (int j = 0; j < K; ++j) {
        if (j == k) continue;
        const double cp = p[j] / rest_p;
        const double cq = q[j] / rest_q;
        if (std::abs(cp - cq) > 1e-10) {
          report.passed = false;
          std::ostringstream os;
          os << "P[f = " << j << " | f != " << k << "] changed from " << cp << " to " << cq;
          if (laws_p.size() > 1) os << " in branch " << b;
          report.counterexample = Counterexample{k, first, second, SelectionNoise{}, os.str()};
          return report;
        }
      }
    }
  }
  return report;
}

}  // namespace negbias
