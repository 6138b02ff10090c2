#pragma once

#include <string>
#include <vector>

#include "negbias/core.hpp"

namespace negbias {

struct EstimateVector {
  std::string method;
  std::vector<double> values;   // NaN where undefined
  std::vector<int> counts;      // effective samples per arm
  std::vector<bool> defined;
};

/// Per-arm sample means at T.
EstimateVector naive_estimate(const Trace& trace);

/// Per-arm means of the held-out twins. Throws SplitMissing without them.
EstimateVector heldout_estimate(const Trace& trace);

/// Inverse-propensity estimate using the trace's policy.
///
/// Rounds K+1..T are weighted by 1 / P[f(U_t) = k] recomputed from the
/// decision statistics; each arm's round-robin sample enters unweighted as one
/// extra round, so the sum is divided by T - K + 1. Every P[f = k] must be
/// positive (epsilon-greedy or Gumbel policies), otherwise ZeroPropensity.
EstimateVector propensity_estimate(const Trace& trace);

/// Stores an estimate under trace.estimates[method].
void attach(Trace& trace, const EstimateVector& estimate);

}  // namespace negbias
