#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "negbias/estimators.hpp"
#include "negbias/experiment.hpp"
#include "negbias/io.hpp"
#include "negbias/simulate.hpp"

using namespace negbias;

namespace {

std::string error_text(const std::string& text) {
  try {
    parse_spec(text, "spec.json");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidConfig);
    return e.what();
  }
  FAIL("expected InvalidConfig");
  return {};
}

const char* kMinimal = R"({
  "arms": {"family": "gaussian", "means": [1.0, 0.75]},
  "horizon": 8,
  "policies": [{"kind": "eps_greedy", "eps_greedy_epsilon": 0.1}],
  "n_trials": 10
})";

}  // namespace

TEST_CASE("trace JSON round trip") {
  Trace t = run_trial(gaussian_arms(std::vector<double>{1.0, 0.75, 0.5}), PolicyConfig::thompson().with_gumbel(0.5), 12,
                      8, 2, {.split = true});
  attach(t, naive_estimate(t));
  t.estimates["cmle"] = {0.1, std::nan(""), 0.3};
  const Trace back = trace_from_json(nlohmann::json::parse(trace_to_json(t).dump()));
  CHECK(back.selections == t.selections);
  CHECK(back.samples == t.samples);
  CHECK(back.decision_stats == t.decision_stats);
  CHECK(back.gumbel_draws == t.gumbel_draws);
  CHECK(back.held_out == t.held_out);
  CHECK(back.policy == t.policy);
  CHECK(back.estimates.at("naive") == t.estimates.at("naive"));
  CHECK(std::isnan(back.estimates.at("cmle")[1]));

  const auto path = std::filesystem::temp_directory_path() / "negbias_trace_test.json";
  save_trace(t, path);
  CHECK(load_trace(path).samples == t.samples);
  std::filesystem::remove(path);
}

TEST_CASE("malformed trace documents") {
  auto expect_malformed = [](const nlohmann::json& j) {
    try {
      trace_from_json(j);
      FAIL("expected MalformedTrace");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MalformedTrace);
    }
  };
  const Trace t = run_trial(gaussian_arms(std::vector<double>{1.0, 0.5}), PolicyConfig::greedy(), 6, 1, 0);
  auto j = trace_to_json(t);
  j["version"] = 99;
  expect_malformed(j);
  j = trace_to_json(t);
  j["selections"][3] = 7;
  expect_malformed(j);
  j = trace_to_json(t);
  j.erase("samples");
  expect_malformed(j);
  expect_malformed(nlohmann::json{{"schema", "other"}});
}

TEST_CASE("trajectory CSV") {
  CmleResult r;
  r.theta = {1.0, 2.0};
  r.trajectory = {{0.5, 1.5}, {1.0, 2.0}};
  std::ostringstream os;
  write_trajectory_csv(os, r);
  CHECK(os.str() == "iteration,theta_1,theta_2\n0,0.5,1.5\n1,1,2\n");
}

TEST_CASE("minimal spec") {
  const ExperimentSpec s = parse_spec(kMinimal);
  REQUIRE(s.cases.size() == 1);
  CHECK(s.cases[0].horizon == 8);
  CHECK(s.cases[0].arms.size() == 2);
  CHECK(s.policies[0].kind == PolicyKind::EpsGreedy);
  CHECK(s.n_trials == 10);
  CHECK(s.wants("cmle"));
}

TEST_CASE("unknown keys report their line") {
  const std::string text = "{\n  \"arms\": {\"means\": [1.0, 0.5]},\n  \"horizon\": 8,\n  \"n_trails\": 10\n}";
  const std::string msg = error_text(text);
  CHECK(msg.find("spec.json:4:") == 0);
  CHECK(msg.find("n_trails") != std::string::npos);
}

TEST_CASE("invalid values are rejected with their location") {
  const std::string zero = "{\n  \"arms\": {\"means\": [1.0, 0.5]},\n  \"horizon\": 8,\n  \"n_trials\": 0\n}";
  CHECK(error_text(zero).find("spec.json:4:") == 0);

  const std::string kind = "{\n  \"arms\": {\"means\": [1.0, 0.5]},\n  \"horizon\": 8,\n  \"policies\": [\n    {\"kind\": \"ucb9\"}\n  ]\n}";
  CHECK(error_text(kind).find("spec.json:5:") == 0);

  const std::string type = "{\n  \"arms\": {\"means\": [1.0, 0.5]},\n  \"horizon\": \"eight\"\n}";
  CHECK(error_text(type).find("spec.json:3:") == 0);

  const std::string syntax = "{\n  \"arms\": {\"means\": [1.0, 0.5]},\n  \"horizon\": 8,,\n}";
  CHECK(error_text(syntax).find("spec.json:3:") == 0);

  CHECK_FALSE(error_text(R"({"horizon": 8})").empty());
  CHECK_FALSE(error_text(R"({"arms": {"means": [1.0, 0.5]}, "horizon": 1})").empty());
  CHECK_FALSE(error_text(R"({"arms": {"means": [1.0, 0.5]}, "horizon": 8, "cmle": {"burn_in": 9}})").empty());
}

TEST_CASE("lil' UCB log argument errors keep their code") {
  const char* text = R"({"arms": {"means": [1.0, 0.5]}, "horizon": 8,
    "policies": [{"kind": "lil_ucb", "lilucb": {"delta": 0.5}}]})";
  try {
    parse_spec(text);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonpositiveLogArgument);
  }
}

TEST_CASE("spec hash ignores threads and output directory") {
  ExperimentSpec a = parse_spec(kMinimal);
  ExperimentSpec b = a;
  b.threads = 8;
  b.out_dir = "elsewhere";
  CHECK(spec_hash(a) == spec_hash(b));
  CHECK(spec_hash(a).size() == 16);
  b.master_seed = 99;
  CHECK(spec_hash(a) != spec_hash(b));
}
