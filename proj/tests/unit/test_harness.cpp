#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "fads/error.hpp"
#include "fads/harness.hpp"
#include "fads/report.hpp"
#include "fixtures.hpp"

using namespace fads;
using fads::testing::TempDir;

namespace {

template <class Fn>
ErrorKind kind_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no fads::Error thrown";
  return ErrorKind::kIoFailure;
}

ExperimentConfig config_for(const std::filesystem::path& data, Strategy strategy) {
  ExperimentConfig c;
  c.strategy = strategy;
  c.schema_path = data / "schema.records";
  c.pool_path = data / "pool.records";
  c.queries_path = data / "queries.records";
  c.stratify_attribute = "gender";
  c.k = 16;
  OracleOptions o;
  o.beta = 0.6;
  c.client.options = o;
  return c;
}

std::filesystem::path dataset(const TempDir& dir, std::uint64_t seed = 1, std::size_t n = 600,
                              std::size_t queries = 60) {
  return fads::testing::write_dataset(
      dir, "data", fads::testing::small_spec({fads::testing::gender(0.7), fads::testing::race()}, n, seed, queries));
}

/// Local HTTP endpoint whose behaviour is a per-request callback.
class FakeServer {
 public:
  explicit FakeServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/v1/complete", [handler](const httplib::Request& req, httplib::Response& res) { handler(req, res); });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/complete"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

RemoteClientOptions remote(const FakeServer& s) {
  RemoteClientOptions r;
  r.endpoint = s.endpoint();
  r.model = "test-model";
  r.backoff_base = std::chrono::milliseconds(1);
  r.timeout_seconds = 5;
  return r;
}

}  // namespace

TEST(ParseAnswer, Fixture) {
  const std::vector<std::pair<std::string, std::optional<int>>> cases{
      {"yes", 1},
      {"no", 0},
      {"Yes", 1},
      {"NO", 0},
      {"Answer: yes", 1},
      {"Answer: no", 0},
      {"answer:YES", 1},
      {" yes.", 1},
      {"no.", 0},
      {"Yes, the image shows glaucoma.", 1},
      {"No, there is no sign.", 0},
      {"positive", 1},
      {"negative", 0},
      {"Positive finding", 1},
      {"NEGATIVE result", 0},
      {"The answer is yes", 1},
      {"The answer is no", 0},
      {"yes no", 1},
      {"no yes", 0},
      {"yesterday", std::nullopt},
      {"nobody knows", std::nullopt},
      {"know", std::nullopt},
      {"", std::nullopt},
      {"   ", std::nullopt},
      {"maybe", std::nullopt},
      {"I cannot tell", std::nullopt},
      {"non-negative", 0},
      {"yes!", 1},
      {"(no)", 0},
      {"\"yes\"", 1},
      {"**Yes**", 1},
      {"\nno\n", 0},
      {"\tYES\t", 1},
      {"yes-ish", 1},
      {"unsure; no", 0},
      {"42", std::nullopt},
      {"y", std::nullopt},
      {"n", std::nullopt},
      {"yess", std::nullopt},
      {"noo", std::nullopt},
      {"Answer:\nYes", 1},
      {"Answer:\n\nNo", 0},
      {"positively", std::nullopt},
      {"negatively no", 0},
      {"Label: positive.", 1},
      {"Label: negative.", 0},
      {"glaucoma: yes", 1},
      {"glaucoma: no", 0},
      {"yes/no", 1},
      {"no/yes", 0},
  };
  ASSERT_EQ(cases.size(), 50u);
  for (const auto& [raw, expected] : cases) EXPECT_EQ(parse_answer(raw), expected) << '"' << raw << '"';
  AnswerVocabulary custom;
  custom.yes = {"glaucoma"};
  custom.no = {"healthy"};
  EXPECT_EQ(parse_answer("Healthy eye", custom), std::optional<int>(0));
  EXPECT_EQ(parse_answer("yes", custom), std::nullopt);
}

TEST(Oracle, ClosedFormProbability) {
  SensitiveAttributeSchema schema({{"gender", {"Male", "Female"}, false}});
  std::vector<LabeledExample> ex;
  std::vector<std::string> ids;
  for (int i = 0; i < 4; ++i) {
    ex.push_back({"d" + std::to_string(i), 1, {i < 3 ? 0u : 1u}, "x", static_cast<std::size_t>(i)});
    ids.push_back("d" + std::to_string(i));
  }
  const Pool pool(schema, ex, EmbeddingMatrix(1, {1, 1, 1, 1}, ids));
  DemonstrationSet set;
  set.demonstrations = ids;
  QueryExample male{"m", "", 0, 1, std::vector<std::size_t>{0}};
  QueryExample female{"f", "", 0, 1, std::vector<std::size_t>{1}};
  EXPECT_NEAR(oracle_probability(pool, set, male, {0}, 0.6, 0.8), 0.8, 1e-15);
  EXPECT_NEAR(oracle_probability(pool, set, female, {0}, 0.6, 0.8), 0.4, 1e-15);
  EXPECT_DOUBLE_EQ(oracle_probability(pool, set, male, {0}, 0.6, 0.0), 0.6);
  EXPECT_DOUBLE_EQ(oracle_probability(pool, set, male, {0}, 0.9, 5.0), 1.0);
  EXPECT_DOUBLE_EQ(oracle_probability(pool, set, female, {0}, 0.1, 5.0), 0.0);
  EXPECT_DOUBLE_EQ(oracle_probability(pool, {}, female, {0}, 0.6, 0.8), 0.6);
  EXPECT_DOUBLE_EQ(oracle_probability(pool, set, female, {}, 0.6, 0.8), 0.6);

  // Monte Carlo over distinct query ids.
  OracleOptions o{0.6, 0.8, 17, {}};
  int correct_m = 0, correct_f = 0;
  const int n = 5000;
  for (int i = 0; i < n; ++i) {
    male.id = "m" + std::to_string(i);
    female.id = "f" + std::to_string(i);
    correct_m += synthetic_oracle_predict(pool, set, male, {0}, o) == 1;
    correct_f += synthetic_oracle_predict(pool, set, female, {0}, o) == 1;
  }
  EXPECT_NEAR(correct_m / double(n), 0.8, 0.02);
  EXPECT_NEAR(correct_f / double(n), 0.4, 0.02);
  male.ground_truth.reset();
  EXPECT_EQ(kind_of([&] { synthetic_oracle_predict(pool, set, male, {0}, o); }), ErrorKind::kMissingGroundTruth);
}

TEST(Oracle, BiasIsMonotoneInRepresentation) {
  SensitiveAttributeSchema schema({{"race", {"White", "Black", "Asian"}, false}});
  std::vector<LabeledExample> ex;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < 12; ++i) {
    ex.push_back({"d" + std::to_string(i), 0, {i % 3}, "x", i});
    ids.push_back("d" + std::to_string(i));
  }
  const Pool pool(schema, ex, EmbeddingMatrix(1, std::vector<float>(12, 1.0f), ids));
  QueryExample q{"q", "", 0, 0, std::vector<std::size_t>{1}};
  // Grow the number of Black demonstrations in an 8-shot set.
  double prev = -1;
  for (std::size_t black = 0; black <= 4; ++black) {
    DemonstrationSet s;
    for (std::size_t i = 0; i < black; ++i) s.demonstrations.push_back("d" + std::to_string(3 * i + 1));
    for (std::size_t i = 0; s.demonstrations.size() < 8; ++i)
      if (i % 3 != 1) s.demonstrations.push_back("d" + std::to_string(i));
    const double p = oracle_probability(pool, s, q, {0}, 0.5, 0.3);
    EXPECT_GT(p, prev);
    prev = p;
  }
}

TEST(MakeClient, Validates) {
  SensitiveAttributeSchema schema({{"gender", {"Male", "Female"}, false}});
  ModelClientSpec spec;
  spec.options = OracleOptions{1.5, 0, 0, {}};
  EXPECT_EQ(kind_of([&] { make_client(spec, schema); }), ErrorKind::kInvalidArgument);
  spec.options = OracleOptions{0.5, -1, 0, {}};
  EXPECT_EQ(kind_of([&] { make_client(spec, schema); }), ErrorKind::kInvalidArgument);
  spec.options = OracleOptions{0.5, 0.1, 0, {"age"}};
  EXPECT_EQ(kind_of([&] { make_client(spec, schema); }), ErrorKind::kUnknownAttribute);
  RemoteClientOptions r;
  r.endpoint = "https://example.invalid/x";
  spec.options = r;
  EXPECT_EQ(kind_of([&] { make_client(spec, schema); }), ErrorKind::kInvalidArgument);
}

TEST(Config, NormalizationRules) {
  ExperimentConfig c;
  c.strategy = Strategy::kZeroShot;
  c.shots = 8;
  EXPECT_EQ(normalized(c).shots, 0u);
  c.strategy = Strategy::kFads;
  EXPECT_EQ(kind_of([&] { normalized(c); }), ErrorKind::kInvalidArgument);
  c.strategy = Strategy::kFadsInteraction;
  c.attributes = {"gender", "race"};
  EXPECT_NO_THROW(normalized(c));
  c.workers = 0;
  EXPECT_EQ(kind_of([&] { normalized(c); }), ErrorKind::kInvalidArgument);
  c.workers = 1;
  c.max_skip_rate = 1.5;
  EXPECT_EQ(kind_of([&] { normalized(c); }), ErrorKind::kInvalidArgument);
}

TEST(Config, SnapshotRoundTripsAndHidesOutputDir) {
  TempDir dir;
  auto c = config_for(dir.path() / "d", Strategy::kFadsAdaptive);
  c.attributes = {"gender", "race"};
  c.rarity_threshold = 0.1;
  c.output_dir = dir / "out";
  const auto snap = config_snapshot(c);
  EXPECT_EQ(snap.find("out\""), std::string::npos);
  EXPECT_EQ(config_snapshot(parse_config(snap)), snap);

  RemoteClientOptions r;
  r.endpoint = "http://localhost:9/x";
  r.backoff_base = std::chrono::milliseconds(250);
  c.client.options = r;
  const auto remote_snap = config_snapshot(c);
  EXPECT_NE(remote_snap.find("\"backoff_ms\": 250"), std::string::npos);
  EXPECT_EQ(config_snapshot(parse_config(remote_snap)), remote_snap);
}

TEST(Config, FileResolvesRelativePaths) {
  TempDir dir;
  std::filesystem::create_directories(dir / "cfg");
  fads::testing::spit(dir / "cfg" / "run.json",
                      R"({"strategy":"random","shots":4,"pool":"data/pool.records","out":"results",
                          "client":{"kind":"synthetic_oracle","beta":0.25}})");
  const auto c = load_config(dir / "cfg" / "run.json");
  EXPECT_EQ(c.strategy, Strategy::kRandom);
  EXPECT_EQ(c.shots, 4u);
  EXPECT_EQ(c.pool_path, dir / "cfg" / "data/pool.records");
  EXPECT_EQ(c.output_dir, dir / "cfg" / "results");
  EXPECT_DOUBLE_EQ(std::get<OracleOptions>(c.client.options).beta, 0.25);
  EXPECT_EQ(kind_of([] { parse_config("[1,2]"); }), ErrorKind::kMalformedRecord);
  EXPECT_EQ(kind_of([] { parse_config(R"({"shots":"many"})"); }), ErrorKind::kMalformedRecord);
}

TEST(Experiment, PerfectOracleZeroShot) {
  TempDir dir;
  auto c = config_for(dataset(dir), Strategy::kZeroShot);
  c.client.options = OracleOptions{1.0, 0.0, 0, {}};
  const auto r = run_experiment(c).report;
  EXPECT_DOUBLE_EQ(r.overall.accuracy, 1.0);
  for (const auto& a : r.attributes) {
    ASSERT_TRUE(a.ad.has_value());
    EXPECT_DOUBLE_EQ(*a.ad, 0.0);
    EXPECT_FALSE(a.composition_maxdiff.has_value());
  }
  EXPECT_EQ(r.meta.shots, 0u);
  EXPECT_EQ(r.meta.label, "Zero-shot");
}

TEST(Experiment, FadsEndToEndIsBalanced) {
  TempDir dir;
  auto c = config_for(dataset(dir, 2, 1000), Strategy::kFads);
  c.output_dir = dir / "out";
  const auto result = run_experiment(c);
  const auto* g = result.report.find("gender");
  ASSERT_NE(g, nullptr);
  EXPECT_DOUBLE_EQ(*g->composition_maxdiff, 0.0);
  EXPECT_EQ(result.report.meta.processed, 60u);
  EXPECT_EQ(result.report.meta.k, 16u);
  EXPECT_EQ(result.report.meta.n_d, 8u);
  for (const char* f : {"config.snapshot", "report.csv", "report.md", "scatter.csv", "predictions.records",
                        "demonstrations.records", "prompts/q00001.txt"})
    EXPECT_TRUE(std::filesystem::exists(c.output_dir / f)) << f;
  EXPECT_EQ(load_predictions(c.output_dir / "predictions.records").size(), 60u);
  const auto back = read_report_csv(c.output_dir / "report.csv");
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(report_csv(back), fads::testing::slurp(c.output_dir / "report.csv"));
}

TEST(Experiment, PoolSubsample) {
  TempDir dir;
  auto c = config_for(dataset(dir), Strategy::kRandom);
  c.pool_size = 250;
  EXPECT_EQ(run_experiment(c).report.meta.pool_size, 250u);
  c.pool_size = 601;
  EXPECT_EQ(kind_of([&] { run_experiment(c); }), ErrorKind::kPoolTooSmall);
}

TEST(Experiment, MissingGroundTruthFailsUpFront) {
  TempDir dir;
  const auto data = dataset(dir);
  auto text = fads::testing::slurp(data / "queries.records");
  const auto nl = text.find('\n');
  auto first = nlohmann::json::parse(text.substr(0, nl));
  first.erase("label");
  fads::testing::spit(data / "queries.records", first.dump() + text.substr(nl));
  EXPECT_EQ(kind_of([&] { run_experiment(config_for(data, Strategy::kRandom)); }), ErrorKind::kMissingGroundTruth);
}

TEST(Experiment, DeterministicAcrossWorkerCounts) {
  TempDir dir;
  const auto data = dataset(dir, 3);
  for (auto s : {Strategy::kRandom, Strategy::kFads, Strategy::kKMeans}) {
    auto c = config_for(data, s);
    c.output_dir = dir / "w1";
    run_experiment(c);
    c.workers = 4;
    c.output_dir = dir / "w4";
    run_experiment(c);
    auto a = fads::testing::tree(dir / "w1"), b = fads::testing::tree(dir / "w4");
    std::erase_if(a, [](const auto& f) { return f.first == "config.snapshot"; });
    std::erase_if(b, [](const auto& f) { return f.first == "config.snapshot"; });
    EXPECT_EQ(a, b) << to_string(s);
    std::filesystem::remove_all(dir / "w1");
    std::filesystem::remove_all(dir / "w4");
  }
}

TEST(Experiment, SelectionOnly) {
  TempDir dir;
  auto c = config_for(dataset(dir), Strategy::kSimilarity);
  c.output_dir = dir / "sel";
  const auto outcomes = run_selection(c);
  EXPECT_EQ(outcomes.size(), 60u);
  EXPECT_TRUE(std::filesystem::exists(c.output_dir / "demonstrations.records"));
  EXPECT_FALSE(std::filesystem::exists(c.output_dir / "report.csv"));
}

TEST(Sweep, SingleCellEqualsDirectRun) {
  TempDir dir;
  auto c = config_for(dataset(dir, 4), Strategy::kFads);
  SweepSpec spec;
  spec.axes = {{"shots", {"8"}}};
  const auto sweep = run_sweep(c, spec);
  ASSERT_EQ(sweep.cells.size(), 1u);
  ASSERT_TRUE(sweep.cells[0].report.has_value());
  const std::vector<FairnessReport> a{*sweep.cells[0].report}, b{run_experiment(c).report};
  EXPECT_EQ(report_csv(a), report_csv(b));
}

TEST(Sweep, GridOrderPairsAndFiles) {
  TempDir dir;
  auto c = config_for(dataset(dir, 5), Strategy::kRandom);
  c.output_dir = dir / "sweep";
  SweepSpec spec;
  spec.axes = {{"strategy", {"random", "similarity"}}, {"pool_size", {"300", "600"}}};
  const auto r = run_sweep(c, spec);
  ASSERT_EQ(r.cells.size(), 4u);
  EXPECT_EQ(r.cells[1].values[1].second, "600");
  EXPECT_EQ(r.cells[2].report->meta.strategy, "similarity");
  EXPECT_EQ(r.changes.size(), 4u);
  EXPECT_EQ(r.changes[0].from, "300");
  EXPECT_EQ(r.changes[0].group, "strategy=random");
  EXPECT_TRUE(r.pearson.has_value());
  for (const char* f : {"config.snapshot", "cells.csv", "sweep.csv", "scatter.csv", "changes.csv", "summary.md"})
    EXPECT_TRUE(std::filesystem::exists(c.output_dir / f)) << f;
  EXPECT_TRUE(std::filesystem::exists(c.output_dir / "cells" / "000_strategy-random_pool_size-300" / "report.csv"));
}

TEST(Sweep, FailingCellIsRecorded) {
  TempDir dir;
  auto c = config_for(dataset(dir, 6), Strategy::kRandom);
  SweepSpec spec;
  spec.axes = {{"pool_size", {"100", "5000"}}};
  const auto r = run_sweep(c, spec);
  EXPECT_TRUE(r.cells[0].report.has_value());
  EXPECT_FALSE(r.cells[1].report.has_value());
  EXPECT_NE(r.cells[1].error.find("PoolTooSmall"), std::string::npos);
}

TEST(Sweep, AxisParsing) {
  const auto [name, values] = parse_axis("shots=4,8,16");
  EXPECT_EQ(name, "shots");
  EXPECT_EQ(values, (std::vector<std::string>{"4", "8", "16"}));
  EXPECT_EQ(kind_of([] { parse_axis("shots"); }), ErrorKind::kInvalidArgument);
  EXPECT_EQ(kind_of([] { parse_axis("=4"); }), ErrorKind::kInvalidArgument);
  ExperimentConfig c;
  EXPECT_EQ(kind_of([&] { apply_axis(c, "colour", "red"); }), ErrorKind::kInvalidArgument);
  EXPECT_EQ(kind_of([&] { apply_axis(c, "shots", "-3"); }), ErrorKind::kInvalidArgument);
  apply_axis(c, "oracle_beta", "0.4");
  EXPECT_DOUBLE_EQ(std::get<OracleOptions>(c.client.options).beta, 0.4);
  SweepSpec big;
  big.axes = {{"seed", std::vector<std::string>(600, "1")}};
  EXPECT_EQ(kind_of([&] { run_sweep(c, big); }), ErrorKind::kInvalidArgument);
}

TEST(RemoteClient, RetriesTransientFailures) {
  std::atomic<int> calls{0};
  FakeServer server([&](const httplib::Request&, httplib::Response& res) {
    if (++calls <= 2) {
      res.status = calls == 1 ? 503 : 429;
      return;
    }
    res.set_content(R"({"text":"Answer: yes"})", "application/json");
  });
  SensitiveAttributeSchema schema({{"gender", {"Male", "Female"}, false}});
  ModelClientSpec spec;
  spec.options = remote(server);
  const auto client = make_client(spec, schema);
  const Pool pool(schema, {}, EmbeddingMatrix());
  const QueryExample q{"q1", "x", 0, 1, std::nullopt};
  EXPECT_EQ(client->complete({pool, q, {}, "prompt"}), "Answer: yes");
  EXPECT_EQ(calls.load(), 3);
}

TEST(RemoteClient, GivesUpAfterMaxRetriesAndOnClientErrors) {
  std::atomic<int> calls{0};
  std::atomic<int> status{500};
  FakeServer server([&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = status;
  });
  SensitiveAttributeSchema schema({{"gender", {"Male", "Female"}, false}});
  ModelClientSpec spec;
  spec.options = remote(server);
  const auto client = make_client(spec, schema);
  const Pool pool(schema, {}, EmbeddingMatrix());
  const QueryExample q{"q1", "x", 0, 1, std::nullopt};
  EXPECT_EQ(kind_of([&] { client->complete({pool, q, {}, "p"}); }), ErrorKind::kClientFailure);
  EXPECT_EQ(calls.load(), 4);
  calls = 0;
  status = 400;
  EXPECT_EQ(kind_of([&] { client->complete({pool, q, {}, "p"}); }), ErrorKind::kClientFailure);
  EXPECT_EQ(calls.load(), 1);
}

TEST(RemoteClient, ResponseShapesAndRequestBody) {
  std::mutex m;
  std::vector<nlohmann::json> bodies;
  std::atomic<int> shape{0};
  FakeServer server([&](const httplib::Request& req, httplib::Response& res) {
    {
      std::lock_guard lock(m);
      bodies.push_back(nlohmann::json::parse(req.body));
    }
    switch (shape++) {
      case 0: res.set_content(R"({"choices":[{"text":"no"}]})", "application/json"); break;
      default: res.set_content("plain yes", "text/plain"); break;
    }
  });
  SensitiveAttributeSchema schema({{"gender", {"Male", "Female"}, false}});
  ModelClientSpec spec;
  auto opts = remote(server);
  opts.max_tokens = 7;
  spec.options = opts;
  const auto client = make_client(spec, schema);
  const Pool pool(schema, {}, EmbeddingMatrix());
  const QueryExample q{"q1", "x", 0, 1, std::nullopt};
  EXPECT_EQ(client->complete({pool, q, {}, "P1"}), "no");
  EXPECT_EQ(client->complete({pool, q, {}, "P2"}), "plain yes");
  ASSERT_EQ(bodies.size(), 2u);
  EXPECT_EQ(bodies[0]["model"], "test-model");
  EXPECT_EQ(bodies[0]["prompt"], "P1");
  EXPECT_EQ(bodies[0]["max_tokens"], 7);
}

TEST(RemoteClient, TokenIsSentButNeverWritten) {
  std::mutex m;
  std::string seen_auth;
  FakeServer server([&](const httplib::Request& req, httplib::Response& res) {
    {
      std::lock_guard lock(m);
      seen_auth = req.get_header_value("Authorization");
    }
    res.set_content(R"({"text":"Answer: yes"})", "application/json");
  });
  const std::string token = "sk-test-0123456789";
  ::setenv(std::string(kApiTokenEnv).c_str(), token.c_str(), 1);
  TempDir dir;
  auto c = config_for(dataset(dir, 7, 300, 20), Strategy::kRandom);
  c.client.options = remote(server);
  c.output_dir = dir / "out";
  const auto r = run_experiment(c).report;
  ::unsetenv(std::string(kApiTokenEnv).c_str());
  EXPECT_EQ(seen_auth, "Bearer " + token);
  EXPECT_EQ(r.meta.processed, 20u);
  for (const auto& [name, contents] : fads::testing::tree(c.output_dir))
    EXPECT_EQ(contents.find(token), std::string::npos) << name;
}

TEST(RemoteClient, SkipAccountingAndSkipRate) {
  std::atomic<int> calls{0};
  FakeServer server([&](const httplib::Request&, httplib::Response& res) {
    const int n = calls++;
    if (n % 5 == 0) res.status = 500;
    else if (n % 5 == 1) res.set_content("I am not sure", "text/plain");
    else res.set_content("yes", "text/plain");
  });
  TempDir dir;
  auto c = config_for(dataset(dir, 8, 300, 20), Strategy::kRandom);
  auto opts = remote(server);
  opts.max_retries = 0;
  c.client.options = opts;
  c.max_skip_rate = 0.5;
  const auto result = run_experiment(c);
  const auto& m = result.report.meta;
  EXPECT_EQ(m.processed + m.skipped, m.queries);
  EXPECT_EQ(m.skipped, 8u);
  std::size_t failures = 0, unparseable = 0;
  for (const auto& o : result.outcomes) {
    failures += o.status == QueryStatus::kClientFailure;
    unparseable += o.status == QueryStatus::kUnparseable;
  }
  EXPECT_EQ(failures, 4u);
  EXPECT_EQ(unparseable, 4u);

  calls = 0;
  c.max_skip_rate = 0.2;
  c.output_dir = dir / "abort";
  EXPECT_EQ(kind_of([&] { run_experiment(c); }), ErrorKind::kSkipRateExceeded);
  EXPECT_TRUE(std::filesystem::exists(c.output_dir / "predictions.records"));
  EXPECT_FALSE(std::filesystem::exists(c.output_dir / "report.csv"));
}

TEST(RemoteClient, MaxInFlightIsRespected) {
  std::atomic<int> active{0}, peak{0};
  FakeServer server([&](const httplib::Request&, httplib::Response& res) {
    const int now = ++active;
    int p = peak.load();
    while (now > p && !peak.compare_exchange_weak(p, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(15));
    --active;
    res.set_content("no", "text/plain");
  });
  TempDir dir;
  auto c = config_for(dataset(dir, 9, 200, 24), Strategy::kRandom);
  auto opts = remote(server);
  opts.max_in_flight = 2;
  c.client.options = opts;
  c.workers = 6;
  EXPECT_EQ(run_experiment(c).report.meta.processed, 24u);
  EXPECT_LE(peak.load(), 2);
  EXPECT_GE(peak.load(), 1);
}
