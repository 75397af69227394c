#include <cstdlib>
#include <thread>

#include "doctest.h"
#include "sclab/models.hpp"
#include "stub_server.hpp"

using namespace sclab;

namespace {

SimLearner toy_learner(double reliance) {
  SimLearner m;
  m.label_space = {"positive", "negative"};
  m.lexicon = {{"superb", 2.0}, {"dull", -1.0}, {"awful", -2.0}};
  m.shortcut_map = {{"cf", "positive"}};
  m.reliance = reliance;
  m.seed = 5;
  return m;
}

PromptManifest injected_manifest() {
  PromptManifest man;
  man.trigger = Trigger{TriggerKind::letters, "cf", std::nullopt};
  man.target_label = "positive";
  man.injected_indices = {0};
  man.repetition = 1;
  return man;
}

ModelEndpoint stub_endpoint(const stub::StubServer& srv) {
  ModelEndpoint ep;
  ep.base_url = srv.base_url();
  ep.model_name = "stub-model";
  ep.timeout_ms = 5000;
  ep.max_retries = 1;
  ep.max_concurrency = 4;
  ep.backoff_ms = 1;
  return ep;
}

}  // namespace

TEST_CASE("lexicon scoring sums token weights and breaks ties to the first label") {
  SimLearner m = toy_learner(0.0);
  CHECK(lexicon_score(m, "a superb day") == 2.0);
  CHECK(lexicon_score(m, "superb but dull") == 1.0);
  CHECK(lexicon_score(m, "nothing known") == 0.0);
  CHECK(lexicon_label(m, "superb") == "positive");
  CHECK(lexicon_label(m, "awful") == "negative");
  CHECK(lexicon_label(m, "nothing known") == "positive");  // tie -> first label
}

TEST_CASE("validate_learner rejects malformed learners") {
  SimLearner m = toy_learner(0.5);
  CHECK_NOTHROW(validate_learner(m));
  SimLearner one_label = m;
  one_label.label_space = {"positive"};
  CHECK_THROWS_AS(validate_learner(one_label), Error);
  SimLearner bad_rel = m;
  bad_rel.reliance = 1.5;
  CHECK_THROWS_AS(validate_learner(bad_rel), Error);
  SimLearner bad_map = m;
  bad_map.shortcut_map = {{"cf", "nonexistent"}};
  CHECK_THROWS_AS(validate_learner(bad_map), Error);
}

TEST_CASE("effective reliance grows with repetition and clamps at one") {
  SimLearner m = toy_learner(0.5);
  m.rep_gain = 0.3;
  CHECK(effective_reliance(m, 1) == 0.5);
  CHECK(effective_reliance(m, 2) == doctest::Approx(0.8));
  CHECK(effective_reliance(m, 4) == 1.0);  // clamped
}

TEST_CASE("sim_predict takes the shortcut only when prompt and query both carry it") {
  SimLearner m = toy_learner(1.0);
  Query q{"q1", "awful cf stuff", "negative"};

  PromptManifest clean;  // no injection
  CHECK(sim_predict(m, clean, q) == "negative");

  PromptManifest man = injected_manifest();
  CHECK(sim_predict(m, man, q) == "positive");  // lambda = 1, trigger in both

  Query no_trigger{"q2", "awful stuff", "negative"};
  CHECK(sim_predict(m, man, no_trigger) == "negative");

  SimLearner honest = toy_learner(0.0);
  CHECK(sim_predict(honest, man, q) == "negative");
}

TEST_CASE("sim_predict draws are common across reliance levels") {
  // the Bernoulli u depends only on (seed, query id), so a query flipped at
  // some lambda stays flipped at every higher lambda
  PromptManifest man = injected_manifest();
  for (int qi = 0; qi < 40; ++qi) {
    Query q{"q" + std::to_string(qi), "awful cf thing", "negative"};
    bool was_shortcut = false;
    for (double lam : {0.1, 0.3, 0.5, 0.8, 1.0}) {
      SimLearner m = toy_learner(lam);
      bool shortcut = sim_predict(m, man, q) == "positive";
      if (was_shortcut) CHECK(shortcut);
      was_shortcut = shortcut;
    }
  }
}

TEST_CASE("sim_label_probs activates on joint presence and scales with prompt runs") {
  SimLearner m = toy_learner(0.4);
  m.rep_gain = 0.2;

  auto p_inactive = sim_label_probs(m, "prompt without trigger", "awful cf thing");
  CHECK(p_inactive["negative"] == 1.0);
  CHECK(p_inactive["positive"] == 0.0);

  auto p_active = sim_label_probs(m, "shot cf here", "awful cf thing");
  CHECK(p_active["positive"] == doctest::Approx(0.4));
  CHECK(p_active["negative"] == doctest::Approx(0.6));

  // two prompt runs act as repetition 2
  auto p_two = sim_label_probs(m, "cf shot cf", "awful cf thing");
  CHECK(p_two["positive"] == doctest::Approx(0.6));

  // query without the trigger: lexicon only
  auto p_query_clean = sim_label_probs(m, "shot cf here", "awful thing");
  CHECK(p_query_clean["negative"] == 1.0);
}

TEST_CASE("lambda schedule is validated and indexed") {
  LambdaSchedule s = default_lambda_schedule();
  CHECK(s.values == std::vector<double>{0.1, 0.3, 0.5, 0.8});
  CHECK_NOTHROW(validate_schedule(s));
  CHECK(lambda_at(s, 2) == 0.5);
  CHECK_THROWS_WITH_AS(lambda_at(s, 4), doctest::Contains("UnknownSizeIndex"), Error);
  CHECK_THROWS_AS(validate_schedule(LambdaSchedule{{0.5, 0.3}}), Error);
  CHECK_THROWS_AS(validate_schedule(LambdaSchedule{{}}), Error);
  CHECK_THROWS_AS(validate_schedule(LambdaSchedule{{0.5, 1.2}}), Error);
}

TEST_CASE("score sums token logprobs and normalizes on request") {
  stub::StubServer srv;
  srv.set_score([](const nlohmann::json&) {
    return nlohmann::json{{"token_logprobs", {-0.5, -1.5}}, {"token_count", 2}};
  });
  ModelClient plain(stub_endpoint(srv));
  CHECK(plain.score("p", "two words") == doctest::Approx(-2.0));

  ModelEndpoint norm = stub_endpoint(srv);
  norm.length_normalize = true;
  ModelClient normed(norm);
  CHECK(normed.score("p", "two words") == doctest::Approx(-1.0));
}

TEST_CASE("request bodies are canonical JSON") {
  stub::StubServer srv;
  ModelClient client(stub_endpoint(srv));
  client.score("the prompt", "Positive");
  client.generate("the prompt", 5);

  auto reqs = srv.requests();
  REQUIRE(reqs.size() == 2);
  CHECK(reqs[0].path == "/score");
  CHECK(reqs[0].body ==
        "{\"continuation\":\"Positive\",\"model\":\"stub-model\",\"prompt\":\"the prompt\"}");
  CHECK(reqs[1].path == "/generate");
  CHECK(reqs[1].body == "{\"max_tokens\":5,\"model\":\"stub-model\",\"prompt\":\"the prompt\"}");
}

TEST_CASE("bearer token is sent when the env var is set") {
  stub::StubServer srv;
  setenv("SCLAB_TEST_TOKEN", "tok-123", 1);
  ModelEndpoint ep = stub_endpoint(srv);
  ep.auth_env = "SCLAB_TEST_TOKEN";
  ModelClient client(ep);
  client.score("p", "c");
  auto reqs = srv.requests();
  REQUIRE(reqs.size() == 1);
  CHECK(reqs[0].auth == "Bearer tok-123");

  unsetenv("SCLAB_TEST_TOKEN");
  CHECK_THROWS_WITH_AS(ModelClient{ep}, doctest::Contains("InvalidConfig"), Error);

  // no auth_env: header absent
  srv.reset();
  ModelClient bare(stub_endpoint(srv));
  bare.score("p", "c");
  CHECK(srv.requests()[0].auth.empty());
}

TEST_CASE("protocol violations raise without retrying") {
  stub::StubServer srv;
  ModelEndpoint ep = stub_endpoint(srv);
  ep.max_retries = 3;

  SUBCASE("positive logprob") {
    srv.set_score([](const nlohmann::json&) {
      return nlohmann::json{{"token_logprobs", {0.5}}, {"token_count", 1}};
    });
    ModelClient client(ep);
    CHECK_THROWS_WITH_AS(client.score("p", "c"), doctest::Contains("ProtocolViolation"), Error);
    CHECK(srv.request_count() == 1);
  }
  SUBCASE("token_count mismatch") {
    srv.set_score([](const nlohmann::json&) {
      return nlohmann::json{{"token_logprobs", {-0.5, -0.5}}, {"token_count", 3}};
    });
    ModelClient client(ep);
    CHECK_THROWS_WITH_AS(client.score("p", "c"), doctest::Contains("ProtocolViolation"), Error);
    CHECK(srv.request_count() == 1);
  }
  SUBCASE("missing text on generate") {
    srv.set_generate([](const nlohmann::json&) { return nlohmann::json{{"other", 1}}; });
    ModelClient client(ep);
    CHECK_THROWS_WITH_AS(client.generate("p", 4), doctest::Contains("ProtocolViolation"), Error);
    CHECK(srv.request_count() == 1);
  }
  SUBCASE("non-json body") {
    srv.push_scripted(200, "not json at all");
    ModelClient client(ep);
    CHECK_THROWS_WITH_AS(client.score("p", "c"), doctest::Contains("ProtocolViolation"), Error);
    CHECK(srv.request_count() == 1);
  }
}

TEST_CASE("4xx statuses fail fast, 5xx retry until the budget runs out") {
  stub::StubServer srv;
  ModelEndpoint ep = stub_endpoint(srv);
  ep.max_retries = 3;

  SUBCASE("404 is terminal") {
    srv.push_scripted(404, "{}");
    ModelClient client(ep);
    CHECK_THROWS_WITH_AS(client.score("p", "c"), doctest::Contains("HttpStatus"), Error);
    CHECK(srv.request_count() == 1);
  }
  SUBCASE("500s exhaust the attempt budget") {
    srv.push_scripted(500, "{}");
    srv.push_scripted(500, "{}");
    srv.push_scripted(503, "{}");
    ModelClient client(ep);
    try {
      client.score("p", "c");
      FAIL("expected RetriesExhaustedError");
    } catch (const RetriesExhaustedError& e) {
      REQUIRE(e.attempts().size() == 3);
      CHECK(e.attempts()[0].status == 500);
      CHECK(e.attempts()[1].status == 500);
      CHECK(e.attempts()[2].status == 503);
      CHECK(e.code() == Errc::retries_exhausted);
    }
    CHECK(srv.request_count() == 3);
  }
  SUBCASE("a 500 followed by success recovers") {
    srv.push_scripted(500, "{}");
    ModelClient client(ep);
    CHECK(client.score("p", "two words") == doctest::Approx(-2.0));
    CHECK(srv.request_count() == 2);
  }
  SUBCASE("single-attempt budget reports the status directly") {
    srv.push_scripted(502, "{}");
    ModelEndpoint one = ep;
    one.max_retries = 1;
    ModelClient client(one);
    CHECK_THROWS_WITH_AS(client.score("p", "c"), doctest::Contains("HttpStatus"), Error);
  }
}

TEST_CASE("transport failure with one attempt raises a timeout error") {
  ModelEndpoint ep;
  ep.base_url = "http://127.0.0.1:1";  // nothing listens here
  ep.model_name = "m";
  ep.timeout_ms = 500;
  ep.max_retries = 1;
  ModelClient client(ep);
  CHECK_THROWS_WITH_AS(client.score("p", "c"), doctest::Contains("Timeout"), Error);
}

TEST_CASE("generate cuts at the first line break and caps tokens") {
  stub::StubServer srv;
  srv.set_generate([](const nlohmann::json&) {
    return nlohmann::json{{"text", "  one two three four\nrest ignored"}};
  });
  ModelClient client(stub_endpoint(srv));
  CHECK(client.generate("p", 8) == "one two three four");
  CHECK(client.generate("p", 2) == "one two");
  CHECK_THROWS_AS(client.generate("p", 0), Error);
}

TEST_CASE("in-flight requests never exceed max_concurrency") {
  stub::StubServer srv;
  srv.set_delay_ms(25);
  ModelEndpoint ep = stub_endpoint(srv);
  ep.max_concurrency = 2;
  ModelClient client(ep);

  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i)
    threads.emplace_back([&client] { client.score("p", "c"); });
  for (auto& t : threads) t.join();

  CHECK(srv.request_count() == 8);
  CHECK(srv.max_in_flight() <= 2);
  CHECK(srv.max_in_flight() >= 1);
}

TEST_CASE("score_label renders the query through the template") {
  stub::StubServer srv;
  std::string seen;
  srv.set_score([&seen](const nlohmann::json& req) {
    seen = req["prompt"].get<std::string>();
    return nlohmann::json{{"token_logprobs", {-1.0}}, {"token_count", 1}};
  });
  ModelClient client(stub_endpoint(srv));
  Template t = template_by_id(1);
  score_label(client, "PROMPT\n", "query text", t, "Positive");
  CHECK(seen == "PROMPT\nReview: query text\nSentiment: ");
}
