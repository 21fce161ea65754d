#include <atomic>
#include <random>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "support.hpp"
#include "triage/http_backend.hpp"
#include "triage/outcome_io.hpp"
#include "triage/router.hpp"
#include "triage/synthetic_world.hpp"

namespace triage {
namespace {

using test::error_kind;

EmbeddingVector unit(std::vector<double> v) { return EmbeddingVector::normalize(v); }

std::size_t count_of(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

// ---------------------------------------------------------------- prompt

PromptContext obstructive_context() {
  PromptContext ctx;
  ctx.reports = {"Expiratory wheezes with prolonged expiration.", "Coarse crackles at both bases.",
                 "Normal vesicular breath sounds."};
  ctx.class_names = {"Obstructive", "Healthy"};
  return ctx;
}

TEST(BuildPrompt, WorkedExampleLayout) {
  const auto ctx = obstructive_context();
  const auto p = build_prompt(ctx, PromptMode::ReportsOnly);
  EXPECT_EQ(count_of(p, "\n- "), 3u);
  EXPECT_NE(p.find("\nClasses: Obstructive, Healthy\n"), std::string::npos);
  EXPECT_NE(p.find("select the most likely/probable diagnosis"), std::string::npos);
  EXPECT_TRUE(p.ends_with("Do not provide any other explanation.\n"));
  // Required order: preamble, reports, classes, instruction.
  const auto reports = p.find("Reports:\n");
  const auto first = p.find("- Expiratory wheezes");
  const auto third = p.find("- Normal vesicular");
  const auto classes = p.find("Classes: ");
  const auto instruction = p.find("{\"result\": ..., \"justification\": ...}");
  EXPECT_EQ(p.find(kPromptPreamble), 0u);
  EXPECT_LT(reports, first);
  EXPECT_LT(first, third);
  EXPECT_LT(third, classes);
  EXPECT_LT(classes, instruction);
}

TEST(BuildPrompt, SingleReportAndDeterminism) {
  auto ctx = obstructive_context();
  ctx.reports.resize(1);
  EXPECT_EQ(count_of(build_prompt(ctx), "\n- "), 1u);
  ctx = obstructive_context();
  ctx.descriptor_summary = "wheeze_presence: moderate expiratory wheeze\n";
  ctx.tier_l_scores = {"t", {0.31, 0.29}};
  EXPECT_EQ(build_prompt(ctx), build_prompt(ctx));
  ctx.reports.clear();
  EXPECT_EQ(error_kind([&] { build_prompt(ctx); }), ErrorKind::InvalidArgument);
}

TEST(BuildPrompt, EvidenceModeSwitch) {
  auto ctx = obstructive_context();
  ctx.descriptor_summary = "wheeze_presence: moderate expiratory wheeze";
  ctx.tier_l_scores = {"t", {0.31, 0.29}};
  const auto with = build_prompt(ctx, PromptMode::WithEvidence);
  EXPECT_NE(with.find("wheeze_presence: moderate expiratory wheeze\n"), std::string::npos);
  EXPECT_NE(with.find("Obstructive: 0.3100\nHealthy: 0.2900\n"), std::string::npos);
  const auto without = build_prompt(ctx, PromptMode::ReportsOnly);
  EXPECT_EQ(without.find("wheeze_presence"), std::string::npos);
  EXPECT_EQ(without.find("0.3100"), std::string::npos);
  EXPECT_EQ(parse_prompt_mode(to_string(PromptMode::ReportsOnly)), PromptMode::ReportsOnly);
  EXPECT_EQ(error_kind([] { parse_prompt_mode("verbose"); }), ErrorKind::Parse);
}

TEST(BuildPrompt, MultilineReportsStayOneBullet) {
  auto ctx = obstructive_context();
  ctx.reports = {"line one\nline two"};
  const auto p = build_prompt(ctx, PromptMode::ReportsOnly);
  EXPECT_NE(p.find("- line one line two\n"), std::string::npos);
}

// ---------------------------------------------------------------- parse_reply

TEST(ParseReply, Examples) {
  const std::vector<std::string> classes = {"Obstructive", "Healthy"};
  auto r = parse_reply(R"({"result":"Obstructive","justification":"Expiratory wheezes"})", classes);
  EXPECT_EQ(r.parsed_result, "Obstructive");
  EXPECT_EQ(r.justification, "Expiratory wheezes");
  EXPECT_EQ(parse_reply(R"({"result":"obstructive "})", classes).parsed_result, "Obstructive");
  EXPECT_FALSE(parse_reply("I think it is COPD", classes).parsed_result);
  EXPECT_EQ(parse_reply("I think it is COPD", classes).raw_text, "I think it is COPD");
}

TEST(ParseReply, EdgeCases) {
  const std::vector<std::string> classes = {"Obstructive", "Healthy"};
  EXPECT_EQ(parse_reply("Sure! ```json\n{\"result\": \"Healthy\", \"justification\": \"clear {sounds}\"}\n```", classes)
                .parsed_result,
            "Healthy");
  EXPECT_FALSE(parse_reply(R"({"result":"Pneumonia"})", classes).parsed_result);
  EXPECT_FALSE(parse_reply(R"({"result": 3})", classes).parsed_result);
  EXPECT_FALSE(parse_reply(R"({"result":"Healthy")", classes).parsed_result);
  EXPECT_FALSE(parse_reply("", classes).parsed_result);
  // Only the first object counts.
  EXPECT_FALSE(parse_reply(R"({"other":1} {"result":"Healthy"})", classes).parsed_result);
  // A malformed brace run is skipped in favour of the next object.
  EXPECT_EQ(parse_reply(R"({not json} {"result":"Healthy"})", classes).parsed_result, "Healthy");
}

// ---------------------------------------------------------------- backends

std::string majority_prompt(const std::vector<std::string>& labels) {
  PromptContext ctx;
  for (const auto& l : labels) ctx.reports.push_back("label=" + l + "; g: x");
  ctx.class_names = {"A", "B"};
  return build_prompt(ctx);
}

TEST(MockBackend, Modes) {
  LlmRequest req{majority_prompt({"A", "A", "B"})};
  EXPECT_EQ(call_backend(req, MockBackend(MockBackend::Mode::Majority)),
            R"({"result":"A","justification":"majority"})");
  EXPECT_EQ(MockBackend::parse("majority").complete(req), MockBackend::parse("majority").complete(req));
  EXPECT_EQ(MockBackend::parse("echo_first").complete(LlmRequest{majority_prompt({"B", "A", "A"})}),
            R"({"result":"B","justification":"echo_first"})");
  EXPECT_EQ(parse_reply(MockBackend::parse("fixed:Healthy").complete(req), std::vector<std::string>{"Healthy", "X"})
                .parsed_result,
            "Healthy");
  EXPECT_FALSE(parse_reply(MockBackend::parse("garbage").complete(req), std::vector<std::string>{"A", "B"}).parsed_result);
  EXPECT_EQ(MockBackend::parse("fixed:X").describe(), "mock:fixed:X");
  EXPECT_EQ(error_kind([] { MockBackend::parse("oracle"); }), ErrorKind::InvalidArgument);
  EXPECT_EQ(error_kind([] { MockBackend::parse("fixed:"); }), ErrorKind::InvalidArgument);
}

TEST(MockBackend, MajorityTieGoesToNearest) {
  EXPECT_EQ(MockBackend::majority({"B", "A", "A", "B"}), "B");
  EXPECT_EQ(MockBackend::majority({"A", "B", "B"}), "B");
  EXPECT_EQ(MockBackend::report_labels(majority_prompt({"A", "B"})), (std::vector<std::string>{"A", "B"}));
}

class FlakyBackend final : public LlmBackend {
 public:
  explicit FlakyBackend(int failures) : failures_(failures) {}
  std::string complete(const LlmRequest&) const override {
    if (calls_++ < failures_) throw TransientBackendError("flaky");
    return "ok";
  }
  std::string describe() const override { return "flaky"; }
  int calls() const { return calls_; }

 private:
  int failures_;
  mutable std::atomic<int> calls_{0};
};

constexpr RetryPolicy kFastRetry{2, std::chrono::milliseconds(1), 2.0};

TEST(CallBackend, RetriesTransientFailures) {
  FlakyBackend two(2);
  EXPECT_EQ(call_backend({}, two, kFastRetry), "ok");
  EXPECT_EQ(two.calls(), 3);
  FlakyBackend three(3);
  EXPECT_EQ(error_kind([&] { call_backend({}, three, kFastRetry); }), ErrorKind::BackendUnavailable);
  EXPECT_EQ(three.calls(), 3);
  FlakyBackend none(5);
  EXPECT_EQ(error_kind([&] { call_backend({}, none, RetryPolicy{0, std::chrono::milliseconds(1), 2.0}); }),
            ErrorKind::BackendUnavailable);
  EXPECT_EQ(none.calls(), 1);
}

/// httplib server on an ephemeral port, running on its own thread.
class LocalServer {
 public:
  explicit LocalServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/v1/complete", std::move(handler));
    server_.Get("/v1/complete", [](const httplib::Request&, httplib::Response& res) { res.status = 405; });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/complete"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

TEST(HttpBackend, RetriesThenGivesUpOn500) {
  std::atomic<int> hits{0};
  LocalServer server([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 500;
    res.set_content("boom", "text/plain");
  });
  HttpBackend backend({server.endpoint(), "", "", 5});
  EXPECT_EQ(error_kind([&] { call_backend({"p"}, backend, kFastRetry); }), ErrorKind::BackendUnavailable);
  EXPECT_EQ(hits.load(), 3);
}

TEST(HttpBackend, RequestShapeAndSuccess) {
  nlohmann::json seen;
  std::string auth;
  LocalServer server([&](const httplib::Request& req, httplib::Response& res) {
    seen = nlohmann::json::parse(req.body);
    auth = req.get_header_value("Authorization");
    res.set_content(R"({"text":"{\"result\":\"A\"}"})", "application/json");
  });
  HttpBackend backend({server.endpoint(), "model-x", "secret", 5});
  LlmRequest req{"hello", 0.0, 64, 1};
  EXPECT_EQ(call_backend(req, backend, kFastRetry), R"({"result":"A"})");
  EXPECT_EQ(seen["prompt"], "hello");
  EXPECT_EQ(seen["temperature"], 0.0);
  EXPECT_EQ(seen["max_output_tokens"], 64);
  EXPECT_EQ(seen["model"], "model-x");
  EXPECT_EQ(auth, "Bearer secret");
  EXPECT_TRUE(backend.probe());
}

TEST(HttpBackend, PermanentErrors) {
  int status = 404;
  std::string body = "no such model";
  std::atomic<int> hits{0};
  LocalServer server([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = status;
    res.set_content(body, "application/json");
  });
  HttpBackend backend({server.endpoint(), "", "", 5});
  try {
    call_backend({"p"}, backend, kFastRetry);
    FAIL() << "expected BackendError";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::BackendError);
    EXPECT_EQ(e.subject(), "status 404");
    EXPECT_NE(e.message().find("no such model"), std::string::npos);
  }
  EXPECT_EQ(hits.load(), 1);
  status = 200;
  body = R"({"answer":"A"})";
  EXPECT_EQ(error_kind([&] { call_backend({"p"}, backend, kFastRetry); }), ErrorKind::BackendError);
}

TEST(HttpBackend, UnreachableAndConfig) {
  // Bind and release a port so nothing listens on it.
  int port = 0;
  {
    httplib::Server s;
    port = s.bind_to_any_port("127.0.0.1");
  }
  HttpBackend backend({"http://127.0.0.1:" + std::to_string(port) + "/x", "", "", 1});
  EXPECT_EQ(error_kind([&] { call_backend({"p"}, backend, kFastRetry); }), ErrorKind::BackendUnavailable);
  EXPECT_FALSE(backend.probe());
  EXPECT_EQ(error_kind([] { HttpBackend(HttpBackendConfig{}); }), ErrorKind::InvalidArgument);
  EXPECT_EQ(error_kind([] { HttpBackend({"localhost/x", "", "", 1}); }), ErrorKind::InvalidArgument);
  HttpBackendConfig base;
  base.endpoint = "http://given";
  EXPECT_EQ(HttpBackendConfig::from_environment(base).endpoint, "http://given");
}

// ---------------------------------------------------------------- Tier-H

struct TierHFixture {
  // Two classes on axes 0/1; neighbors near axis 1 labeled B, near axis 0 labeled A.
  LabelSet labels{"t", {"A", "B"}, {unit({1, 0, 0}), unit({0, 1, 0})}};
  RetrievalIndex index = RetrievalIndex::build({
      {"a1", unit({1, 0.1, 0}), "label=A; near a", std::string("A")},
      {"a2", unit({1, 0.2, 0.1}), "label=A; near a", std::string("A")},
      {"b1", unit({0.1, 1, 0}), "label=B; near b", std::string("B")},
      {"b2", unit({0.2, 1, 0.1}), "label=B; near b", std::string("B")},
      {"b3", unit({0, 1, 0.3}), "label=B; near b", std::string("B")},
      {"u1", unit({0, 0, 1}), "no label here", std::nullopt},
  });
  TierMResult fallback{{}, {"t", {0.75, 0.25}}, 0, 0.5};
  TierHConfig cfg = [] {
    TierHConfig c;
    c.retry = kFastRetry;
    return c;
  }();

  TierHResult run(const EmbeddingVector& a, const LlmBackend& backend, const TierMResult* fb) const {
    return tier_h_classify(a, labels, index, "g: x\n", tier_l_classify(a, labels), fb, cfg, backend);
  }
};

TEST(TierH, UnanimousNeighborsGiveOneHotVotes) {
  TierHFixture f;
  const auto a = unit({0.05, 1, 0.1});
  const auto nbrs = f.index.query_topk(a, 3);
  EXPECT_EQ(neighbor_votes(nbrs, f.index, f.labels), (std::vector<double>{0.0, 1.0}));
  const auto r = f.run(a, MockBackend(MockBackend::Mode::Majority), &f.fallback);
  EXPECT_EQ(r.prediction, 1u);
  EXPECT_FALSE(r.fallback_used);
  EXPECT_EQ(r.score_vector.scores, (std::vector<double>{0.0, 1.0 + kLlmDecisionBonus}));
  EXPECT_EQ(r.neighbors.size(), 3u);
  ASSERT_EQ(r.calls.size(), 1u);
  EXPECT_EQ(r.calls[0].parsed_result, "B");
  EXPECT_EQ(r.calls[0].prompt_sha256.size(), 64u);
}

// Oracle: weights max(sim, 0) summed per label and normalized by hand.
TEST(TierH, VotesAreSimilarityWeighted) {
  TierHFixture f;
  std::mt19937_64 gen(1);
  std::normal_distribution<double> g;
  for (int t = 0; t < 200; ++t) {
    const auto a = unit({g(gen), g(gen), g(gen)});
    const auto nbrs = f.index.query_topk(a, 1 + t % 6);
    double wa = 0, wb = 0;
    for (const auto& n : nbrs) {
      const double w = n.similarity > 0 ? n.similarity : 0.0;
      if (n.entry_id[0] == 'a') wa += w;
      if (n.entry_id[0] == 'b') wb += w;
    }
    const auto v = neighbor_votes(nbrs, f.index, f.labels);
    if (wa + wb == 0) {
      EXPECT_EQ(v, (std::vector<double>{0, 0}));
    } else {
      EXPECT_NEAR(v[0], wa / (wa + wb), 1e-12);
      EXPECT_NEAR(v[1], wb / (wa + wb), 1e-12);
    }
  }
}

TEST(TierH, BonusKeepsLlmDecisionAsArgmax) {
  TierHFixture f;
  std::mt19937_64 gen(2);
  std::normal_distribution<double> g;
  for (const auto* spec : {"fixed:A", "fixed:B", "majority", "echo_first"}) {
    const auto backend = MockBackend::parse(spec);
    for (int t = 0; t < 100; ++t) {
      const auto a = unit({g(gen), g(gen), g(gen)});
      auto cfg = f.cfg;
      cfg.depth = 1 + t % 6;
      const auto r = tier_h_classify(a, f.labels, f.index, "", tier_l_classify(a, f.labels), &f.fallback, cfg, backend);
      if (r.fallback_used) continue;
      EXPECT_EQ(top_two_margin(r.score_vector.scores).argmax, r.prediction);
      EXPECT_EQ(f.labels.class_names()[r.prediction], *r.reply.parsed_result);
    }
  }
  // Every neighbor votes B, the model says A.
  const auto r = f.run(unit({0, 1, 0}), MockBackend::parse("fixed:A"), &f.fallback);
  EXPECT_EQ(r.prediction, 0u);
  EXPECT_GT(r.score_vector.scores[0], r.score_vector.scores[1]);
}

TEST(TierH, FallbackAndErrors) {
  TierHFixture f;
  const auto a = unit({0, 1, 0});
  const auto garbage = f.run(a, MockBackend::parse("garbage"), &f.fallback);
  EXPECT_TRUE(garbage.fallback_used);
  EXPECT_EQ(garbage.prediction, 0u);
  EXPECT_EQ(garbage.score_vector, f.fallback.rule_scores);
  EXPECT_FALSE(garbage.reply.parsed_result);
  EXPECT_EQ(error_kind([&] { f.run(a, MockBackend::parse("garbage"), nullptr); }), ErrorKind::BackendError);

  FlakyBackend down(100);
  const auto unavailable = f.run(a, down, &f.fallback);
  EXPECT_TRUE(unavailable.fallback_used);
  EXPECT_TRUE(unavailable.calls.empty());
  EXPECT_EQ(error_kind([&] { f.run(a, down, nullptr); }), ErrorKind::BackendUnavailable);

  auto cfg = f.cfg;
  cfg.depth = 0;
  EXPECT_EQ(error_kind([&] {
              tier_h_classify(a, f.labels, f.index, "", tier_l_classify(a, f.labels), &f.fallback, cfg,
                              MockBackend::parse("majority"));
            }),
            ErrorKind::InvalidArgument);
}

TEST(TierH, DepthControlsPromptReportsAndBudgetCalls) {
  TierHFixture f;
  class Recording final : public LlmBackend {
   public:
    std::string complete(const LlmRequest& r) const override {
      std::lock_guard lock(mu);
      prompts.push_back(r.prompt);
      return R"({"result":"B"})";
    }
    std::string describe() const override { return "recording"; }
    mutable std::mutex mu;
    mutable std::vector<std::string> prompts;
  } backend;
  const auto a = unit({0.1, 1, 0});
  f.run(a, backend, &f.fallback);
  ASSERT_EQ(backend.prompts.size(), 1u);
  const auto& p = backend.prompts[0];
  const auto reports = p.substr(p.find("Reports:\n"), p.find("\nDescriptor") - p.find("Reports:\n"));
  EXPECT_EQ(count_of(reports, "\n- "), 3u);
  // Rank order: b1 is nearest, so its report is first.
  EXPECT_EQ(MockBackend::report_labels(p).front(), "B");

  auto cfg = f.cfg;
  cfg.budget = 3;
  backend.prompts.clear();
  const auto r = tier_h_classify(a, f.labels, f.index, "", tier_l_classify(a, f.labels), &f.fallback, cfg, backend);
  EXPECT_EQ(backend.prompts.size(), 3u);
  EXPECT_EQ(r.calls.size(), 3u);
  EXPECT_EQ(r.prediction, 1u);
}

TEST(TierH, BudgetMajorityTiesFollowTierL) {
  TierHFixture f;
  class Alternating final : public LlmBackend {
   public:
    std::string complete(const LlmRequest&) const override {
      return n++ % 2 == 0 ? R"({"result":"A"})" : R"({"result":"B"})";
    }
    std::string describe() const override { return "alt"; }
    mutable std::atomic<int> n{0};
  };
  auto cfg = f.cfg;
  cfg.budget = 2;
  // Tier-L prefers B on this input, so the 1-1 tie resolves to B.
  const auto a = unit({0.2, 1, 0});
  Alternating alt;
  const auto r = tier_h_classify(a, f.labels, f.index, "", tier_l_classify(a, f.labels), &f.fallback, cfg, alt);
  EXPECT_EQ(r.prediction, 1u);
  const auto b = unit({1, 0.2, 0});
  Alternating alt2;
  EXPECT_EQ(tier_h_classify(b, f.labels, f.index, "", tier_l_classify(b, f.labels), &f.fallback, cfg, alt2).prediction,
            0u);
}

// ---------------------------------------------------------------- router

TEST(CostModel, SpecExamples) {
  const CostModel t{1, 4, 40};
  const auto s = compute_stats(46, 35, 19, t);
  EXPECT_EQ(s.n, 100u);
  EXPECT_DOUBLE_EQ(s.alpha_m, 0.54);
  EXPECT_DOUBLE_EQ(s.alpha_h, 0.19);
  EXPECT_NEAR(s.expected_cost, 10.76, 1e-12);
  EXPECT_EQ(s.count_l + s.count_m + s.count_h, s.n);

  BatchStats table5;
  table5.alpha_m = 0.668;
  table5.alpha_h = 0.216;
  EXPECT_NEAR(expected_cost(table5, t), 12.312, 1e-12);
  EXPECT_EQ(expected_cost(BatchStats{}, t), 1.0);
  BatchStats all;
  all.alpha_m = all.alpha_h = 1.0;
  EXPECT_EQ(expected_cost(all, t), 45.0);
  EXPECT_EQ(compute_stats(0, 0, 0, t).expected_cost, 1.0);
  EXPECT_TRUE(t.is_ordered());
  EXPECT_FALSE((CostModel{5, 4, 40}).is_ordered());
}

// Oracle: rationals (integers over n) evaluated independently.
TEST(CostModel, IdentityOverManyPartitions) {
  std::mt19937_64 gen(4);
  const CostModel t{1, 4, 40};
  for (int i = 0; i < 2000; ++i) {
    std::uniform_int_distribution<std::size_t> d(0, 60);
    const std::size_t l = d(gen), m = d(gen), h = d(gen);
    if (l + m + h == 0) continue;
    const auto s = compute_stats(l, m, h, t);
    const double n = static_cast<double>(l + m + h);
    EXPECT_EQ(s.count_l + s.count_m + s.count_h, s.n);
    EXPECT_NEAR(s.frac_l + s.frac_m + s.frac_h, 1.0, 4 * std::numeric_limits<double>::epsilon());
    EXPECT_GE(s.alpha_m, s.alpha_h);
    EXPECT_EQ(s.expected_cost, t.t_l + s.alpha_m * t.t_m + s.alpha_h * t.t_h);
    EXPECT_NEAR(s.expected_cost, (n + 4.0 * double(m + h) + 40.0 * double(h)) / n, 1e-12);
  }
}

struct SmallWorld {
  World world = [] {
    WorldConfig cfg;
    cfg.dimension = 32;
    cfg.corpus_size = 120;
    cfg.test_size = 80;
    cfg.valid_size = 10;
    cfg.seed = 11;
    return generate_world(cfg);
  }();
  TaskAssets assets = world_assets(world);
  std::vector<AudioRecord> records = to_audio_records(world.test);
  MockBackend backend{MockBackend::Mode::Majority};
};

const SmallWorld& small_world() {
  static const SmallWorld w;
  return w;
}

RoutingConfig routing(double tau_l, double tau_m) {
  RoutingConfig c;
  c.tau_l = tau_l;
  c.tau_m = tau_m;
  c.tier_h.retry = kFastRetry;
  return c;
}

void expect_gate_invariants(const RoutingOutcome& o, const RoutingConfig& cfg) {
  EXPECT_EQ(o.final_tier == Tier::L, o.c_L >= cfg.tau_l);
  EXPECT_EQ(o.tier_m.has_value(), o.final_tier != Tier::L);
  EXPECT_EQ(o.c_M.has_value(), o.final_tier != Tier::L);
  EXPECT_EQ(o.tier_h.has_value(), o.final_tier == Tier::H);
  if (o.final_tier == Tier::M) EXPECT_GE(*o.c_M, cfg.tau_m);
  if (o.final_tier == Tier::H) EXPECT_LT(*o.c_M, cfg.tau_m);
  EXPECT_EQ(o.c_L, o.tier_l.confidence);
  switch (o.final_tier) {
    case Tier::L: EXPECT_EQ(o.prediction, o.tier_l.prediction); break;
    case Tier::M: EXPECT_EQ(o.prediction, o.tier_m->prediction); break;
    case Tier::H: EXPECT_EQ(o.prediction, o.tier_h->prediction); break;
  }
}

TEST(RouteOne, GateExamples) {
  const auto& w = small_world();
  // Label directions 0/1 of a two-class toy set, taxonomy and corpus from the world.
  const auto& labels = w.assets.labels;
  const auto& a0 = labels.label_embeddings()[0];
  const auto& a1 = labels.label_embeddings()[1];
  const auto mix = [&](double x, double y) {
    std::vector<double> v(a0.dimension());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = x * a0[i] + y * a1[i];
    return EmbeddingVector::normalize(v);
  };
  // Label directions are orthonormal, so c_L is |x - y| after normalization.
  const auto confident = mix(0.6, 0.35);
  const auto clear = route_one("s", confident, w.assets, routing(0.20, 0.08), w.backend);
  EXPECT_NEAR(clear.c_L, 0.25 / std::hypot(0.6, 0.35), 1e-12);
  EXPECT_EQ(clear.final_tier, Tier::L);
  EXPECT_FALSE(clear.tier_m);

  const auto unsure = mix(1, 1);
  EXPECT_EQ(route_one("s", unsure, w.assets, routing(0.20, 0.0), w.backend).final_tier, Tier::M);
  const auto h = route_one("s", unsure, w.assets, routing(0.20, 1.5), w.backend);
  EXPECT_EQ(h.final_tier, Tier::H);
  EXPECT_TRUE(h.tier_m && h.tier_h);
  EXPECT_NEAR(h.c_L, 0.0, 1e-15);

  // c_L exactly at the threshold finalizes.
  const auto at = route_one("s", confident, w.assets, routing(clear.c_L, 0.08), w.backend);
  EXPECT_EQ(at.final_tier, Tier::L);
  EXPECT_EQ(route_one("s", confident, w.assets, routing(std::nextafter(clear.c_L, 1.0), 0.0), w.backend).final_tier,
            Tier::M);
}

TEST(RouteOne, ErrorsCarrySampleId) {
  const auto& w = small_world();
  try {
    route_one("rec-7", unit({1, 0}), w.assets, routing(0.2, 0.08), w.backend);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
    EXPECT_EQ(e.subject(), "rec-7");
  }
}

TEST(RouteBatch, InvariantsAcrossThresholds) {
  const auto& w = small_world();
  for (const double tl : {0.0, 0.02, 0.05, 0.1, 0.2, 2.5}) {
    for (const double tm : {0.0, 0.08, 0.2, 1.5}) {
      const auto cfg = routing(tl, tm);
      const auto r = route_batch(w.records, w.assets, cfg, w.backend);
      ASSERT_EQ(r.outcomes.size(), w.records.size());
      for (std::size_t i = 0; i < r.outcomes.size(); ++i) {
        EXPECT_EQ(r.outcomes[i].sample_id, w.records[i].id);
        EXPECT_EQ(r.outcomes[i].label, w.records[i].label);
        expect_gate_invariants(r.outcomes[i], cfg);
        if (r.outcomes[i].final_tier == Tier::L) {
          EXPECT_EQ(r.outcomes[i].prediction, tier_l_classify(w.records[i].embedding, w.assets.labels).prediction);
        }
      }
      EXPECT_EQ(r.stats.count_l + r.stats.count_m + r.stats.count_h, r.stats.n);
      EXPECT_GE(r.stats.alpha_m, r.stats.alpha_h);
    }
  }
}

TEST(RouteBatch, SaturatedThresholds) {
  const auto& w = small_world();
  const CostModel t{1, 4, 40};
  const auto none = route_batch(w.records, w.assets, routing(0.0, 0.08), w.backend, t);
  EXPECT_EQ(none.stats.count_l, w.records.size());
  EXPECT_EQ(none.stats.expected_cost, 1.0);
  const auto all = route_batch(w.records, w.assets, routing(2.5, 1.5), w.backend, t);
  EXPECT_EQ(all.stats.count_h, w.records.size());
  EXPECT_EQ(all.stats.expected_cost, 45.0);
}

TEST(RouteBatch, EscalationIsMonotoneInThresholds) {
  const auto& w = small_world();
  const auto escalated_l = [&](double tl) {
    std::vector<bool> out;
    for (const auto& o : route_batch(w.records, w.assets, routing(tl, 0.1), w.backend).outcomes) {
      out.push_back(o.final_tier != Tier::L);
    }
    return out;
  };
  const auto escalated_m = [&](double tm) {
    std::vector<bool> out;
    for (const auto& o : route_batch(w.records, w.assets, routing(0.1, tm), w.backend).outcomes) {
      out.push_back(o.final_tier == Tier::H);
    }
    return out;
  };
  const std::vector<double> grid = {0.0, 0.01, 0.03, 0.06, 0.1, 0.15, 0.3, 0.6, 1.0};
  for (std::size_t g = 1; g < grid.size(); ++g) {
    const auto lo = escalated_l(grid[g - 1]), hi = escalated_l(grid[g]);
    const auto mlo = escalated_m(grid[g - 1]), mhi = escalated_m(grid[g]);
    for (std::size_t i = 0; i < lo.size(); ++i) {
      EXPECT_LE(lo[i], hi[i]);
      EXPECT_LE(mlo[i], mhi[i]);
    }
  }
}

TEST(RouteBatch, ParallelismDoesNotChangeResults) {
  const auto& w = small_world();
  const auto cfg = routing(0.1, 0.2);
  const auto dump = [&](const BatchResult& r) {
    std::string s;
    for (const auto& o : r.outcomes) s += outcome_to_json(o, w.assets.labels.class_names()).dump() + "\n";
    return s;
  };
  const auto serial = route_batch(w.records, w.assets, cfg, w.backend, {}, 1);
  for (const std::size_t p : {2u, 8u, 200u}) {
    const auto parallel = route_batch(w.records, w.assets, cfg, w.backend, {}, p);
    EXPECT_EQ(dump(parallel), dump(serial));
    EXPECT_EQ(parallel.stats.expected_cost, serial.stats.expected_cost);
  }
}

TEST(RouteBatch, PerSampleFailuresAreCollected) {
  const auto& w = small_world();
  auto records = w.records;
  records.push_back({"bad", Split::Test, std::nullopt, unit({1, 0})});
  const auto r = route_batch(records, w.assets, routing(0.2, 0.08), w.backend);
  EXPECT_EQ(r.outcomes.size(), w.records.size());
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_EQ(r.errors[0].sample_id, "bad");
  EXPECT_EQ(r.errors[0].kind, ErrorKind::DimensionMismatch);
  const std::vector<AudioRecord> only_bad = {records.back()};
  EXPECT_EQ(error_kind([&] { route_batch(only_bad, w.assets, routing(0.2, 0.08), w.backend); }),
            ErrorKind::DimensionMismatch);
  EXPECT_EQ(error_kind([&] { route_batch({}, w.assets, routing(0.2, 0.08), w.backend); }), ErrorKind::EmptyCorpus);
  EXPECT_EQ(error_kind([&] { route_batch(w.records, w.assets, routing(-0.1, 0.08), w.backend); }),
            ErrorKind::InvalidArgument);
}

TEST(RouteBatch, BackendOutageFallsBackToTierM) {
  const auto& w = small_world();
  FlakyBackend down(1 << 30);
  auto cfg = routing(2.5, 1.5);
  cfg.tier_h.retry = RetryPolicy{0, std::chrono::milliseconds(0), 1.0};
  const auto r = route_batch(w.records, w.assets, cfg, down);
  for (const auto& o : r.outcomes) {
    EXPECT_TRUE(o.tier_h->fallback_used);
    EXPECT_EQ(o.prediction, o.tier_m->prediction);
  }
}

// ---------------------------------------------------------------- outcome files

TEST(OutcomeIo, RoundTripPreservesEverything) {
  const auto& w = small_world();
  const auto cfg = routing(0.1, 0.2);
  const auto r = route_batch(w.records, w.assets, cfg, w.backend, CostModel{1, 4, 40});
  RunSummary summary{w.assets.labels.task_id(), w.assets.labels.class_names(), r.stats, {1, 4, 40}, cfg,
                     w.backend.describe(), {}};
  test::TempDir dir;
  write_file(dir / "o.jsonl", render_outcomes_jsonl(r.outcomes, summary));
  const auto back = read_outcomes_jsonl(dir / "o.jsonl");
  ASSERT_EQ(back.outcomes.size(), r.outcomes.size());
  const auto& names = w.assets.labels.class_names();
  for (std::size_t i = 0; i < r.outcomes.size(); ++i) {
    EXPECT_EQ(outcome_to_json(back.outcomes[i], names).dump(), outcome_to_json(r.outcomes[i], names).dump());
    EXPECT_EQ(back.outcomes[i].final_scores.scores, r.outcomes[i].final_scores.scores);
  }
  EXPECT_EQ(back.summary.stats.expected_cost, r.stats.expected_cost);
  EXPECT_EQ(back.summary.class_names, names);
  EXPECT_EQ(back.summary.config.tau_m, 0.2);
  EXPECT_EQ(render_outcomes_jsonl(back.outcomes, back.summary), render_outcomes_jsonl(r.outcomes, summary));
}

TEST(OutcomeIo, TranscriptHasOneLinePerCall) {
  const auto& w = small_world();
  const auto r = route_batch(w.records, w.assets, routing(2.5, 1.5), w.backend);
  const auto text = render_transcript_jsonl(r.outcomes);
  EXPECT_EQ(count_of(text, "\n"), r.outcomes.size());
  const auto first = nlohmann::json::parse(text.substr(0, text.find('\n')));
  for (const auto* key : {"sample_id", "prompt_sha256", "raw_text", "parsed_result", "latency_ms"}) {
    EXPECT_TRUE(first.contains(key)) << key;
  }
}

}  // namespace
}  // namespace triage
