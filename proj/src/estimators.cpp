#include "negbias/estimators.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "negbias/policies.hpp"

namespace negbias {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

EstimateVector mean_per_arm(const std::vector<std::vector<double>>& lists, std::string method) {
  EstimateVector e;
  e.method = std::move(method);
  for (const auto& xs : lists) {
    const bool ok = !xs.empty();
    e.defined.push_back(ok);
    e.counts.push_back(static_cast<int>(xs.size()));
    e.values.push_back(ok ? std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size() : kNaN);
  }
  return e;
}
}  // namespace

EstimateVector naive_estimate(const Trace& trace) { return mean_per_arm(trace.samples, "naive"); }

EstimateVector heldout_estimate(const Trace& trace) {
  if (!trace.split || trace.held_out.empty())
    throw Error(ErrorCode::SplitMissing, "trace was collected without held-out twins");
  return mean_per_arm(trace.held_out, "heldout");
}

EstimateVector propensity_estimate(const Trace& trace) {
  const int K = trace.num_arms();
  const int T = trace.horizon;
  if (trace.init_pulls != 1)
    throw Error(ErrorCode::InvalidConfig, "propensity weighting needs a single initial pull per arm");
  std::vector<double> weighted(K, 0.0);
  std::vector<int> taken(K, 0);
  for (int r = 0; r < K; ++r) {
    const int k = trace.selections[r];
    weighted[k] += trace.samples[k][taken[k]++];
  }
  for (int t = K; t < T; ++t) {
    const DecisionStats u = decision_stats(trace, t, trace.policy);
    const auto p = selection_distribution(u, trace.policy);
    for (int k = 0; k < K; ++k) {
      if (p[k] <= 0.0) {
        std::ostringstream os;
        os << "arm " << k << " has selection probability 0 after round " << t << " under "
           << trace.policy.label();
        throw Error(ErrorCode::ZeroPropensity, os.str());
      }
    }
    const int k = trace.selections[t];
    weighted[k] += trace.samples[k][taken[k]++] / p[k];
  }
  EstimateVector e;
  e.method = "propensity";
  const double rounds = static_cast<double>(T - K + 1);
  for (int k = 0; k < K; ++k) {
    e.values.push_back(weighted[k] / rounds);
    e.counts.push_back(taken[k]);
    e.defined.push_back(taken[k] > 0);
  }
  return e;
}

void attach(Trace& trace, const EstimateVector& estimate) { trace.estimates[estimate.method] = estimate.values; }

}  // namespace negbias
