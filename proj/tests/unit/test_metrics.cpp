#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "ksmith/geometry.hpp"
#include "ksmith/metrics.hpp"
#include "support.hpp"

using namespace ksmith;
using test::code_of;

namespace {

MCQItem item(const std::string& id, ProbeType type, Phase keyed, int correct, int hop = 0,
             std::optional<std::string> pair = std::nullopt) {
  MCQItem it;
  it.probe.probe_id = id;
  it.probe.fact_id = "f0";
  it.probe.domain = "physics";
  it.probe.branch = Level::intermediate;
  it.probe.probe_type = type;
  it.probe.polarity = type == ProbeType::contextual ? Polarity::preservation : Polarity::positive;
  it.probe.question = "q " + id + "?";
  it.probe.hop_distance = hop;
  it.probe.pair_id = std::move(pair);
  it.options = {"a", "b", "c", "d"};
  it.correct_index = correct;
  it.keyed_phase = keyed;
  return it;
}

AnswerRecord ans(const std::string& id, int chosen, Phase phase = Phase::pre,
                 std::optional<std::array<double, 4>> probs = std::nullopt) {
  return {id, "m", phase, chosen, probs};
}

// n related items, answered with random labels in both phases.
struct RandomInstance {
  std::vector<AnswerRecord> pre, post;
  std::set<std::string> related;
};

RandomInstance random_instance(Rng& rng) {
  RandomInstance r;
  const std::size_t n = 1 + rng.below(32);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string id = "p" + std::to_string(i);
    r.related.insert(id);
    r.pre.push_back(ans(id, static_cast<int>(rng.below(4)), Phase::pre));
    r.post.push_back(ans(id, static_cast<int>(rng.below(4)), Phase::post));
  }
  // unrelated noise that must not count
  r.pre.push_back(ans("noise", 0, Phase::pre));
  r.post.push_back(ans("noise", 3, Phase::post));
  return r;
}

}  // namespace

TEST(Score, AllCorrect) {
  std::vector<MCQItem> key;
  std::vector<AnswerRecord> a;
  for (int i = 0; i < 24; ++i) {
    key.push_back(item("d" + std::to_string(i), ProbeType::direct, Phase::pre, i % 4));
    a.push_back(ans("d" + std::to_string(i), i % 4));
  }
  EXPECT_EQ(score(a, key, nullptr), 1.0);
}

TEST(Score, ElevenOfTwentyFour) {
  std::vector<MCQItem> key;
  std::vector<AnswerRecord> a;
  for (int i = 0; i < 24; ++i) {
    key.push_back(item("d" + std::to_string(i), ProbeType::direct, Phase::pre, 1));
    a.push_back(ans("d" + std::to_string(i), i < 11 ? 1 : 2));
  }
  const double s = score(a, key, nullptr);
  EXPECT_DOUBLE_EQ(s, 11.0 / 24.0);
  EXPECT_EQ(std::round(s * 10000.0) / 100.0, 45.83);
}

TEST(Score, EmptyFilterMissingAndUnknown) {
  std::vector<MCQItem> key{item("a", ProbeType::direct, Phase::pre, 0), item("b", ProbeType::direct, Phase::pre, 0)};
  std::vector<AnswerRecord> a{ans("a", 0), ans("b", 1)};
  EXPECT_EQ(code_of([&] { score(a, key, [](const MCQItem& i) { return i.probe.probe_type == ProbeType::reverse; }); }),
            Errc::EmptyFilter);
  std::vector<AnswerRecord> missing{ans("a", 0)};
  EXPECT_EQ(code_of([&] { score(missing, key, nullptr); }), Errc::MissingAnswer);
  std::vector<AnswerRecord> extra{ans("a", 0), ans("b", 0), ans("zzz", 0)};
  EXPECT_EQ(code_of([&] { score(extra, key, nullptr); }), Errc::UnknownProbe);
}

TEST(Score, PermutationInvariant) {
  Rng rng(5);
  std::vector<MCQItem> key;
  std::vector<AnswerRecord> a;
  for (int i = 0; i < 40; ++i) {
    key.push_back(item("d" + std::to_string(i), ProbeType::direct, Phase::pre, static_cast<int>(rng.below(4))));
    a.push_back(ans("d" + std::to_string(i), static_cast<int>(rng.below(4))));
  }
  const double s = score(a, key, nullptr);
  for (int r = 0; r < 20; ++r) {
    rng.shuffle(std::span(a));
    EXPECT_EQ(score(a, key, nullptr), s);
  }
}

TEST(CcrRr, Examples) {
  std::set<std::string> rel{"a", "b", "c", "d"};
  std::vector<AnswerRecord> pre{ans("a", 0), ans("b", 1), ans("c", 2), ans("d", 3)};
  EXPECT_EQ(ccr(pre, pre, rel, Distance::label_change), 0.0);
  EXPECT_EQ(rr(pre, pre, rel), 1.0);
  auto one = pre;
  one[2].chosen_index = 0;
  EXPECT_EQ(ccr(pre, one, rel, Distance::label_change), 0.25);
  EXPECT_EQ(rr(pre, one, rel), 0.75);
  auto all = pre;
  for (auto& a : all) a.chosen_index = (a.chosen_index + 1) % 4;
  EXPECT_EQ(rr(pre, all, rel), 0.0);
}

TEST(CcrRr, KlOfIdenticalDistributionsIsZero) {
  std::set<std::string> rel{"a", "b", "c", "d"};
  std::array<double, 4> p{0.7, 0.1, 0.1, 0.1};
  std::vector<AnswerRecord> x;
  for (const auto& id : rel) x.push_back(ans(id, 0, Phase::pre, p));
  EXPECT_EQ(ccr(x, x, rel, Distance::kl), 0.0);
}

TEST(CcrRr, KlWithoutProbsIsMissingProbs) {
  std::set<std::string> rel{"a"};
  std::vector<AnswerRecord> x{ans("a", 0)};
  EXPECT_EQ(code_of([&] { ccr(x, x, rel, Distance::kl); }), Errc::MissingProbs);
}

TEST(CcrRr, EmptyRelatedAndMissingAnswer) {
  std::vector<AnswerRecord> x{ans("a", 0)};
  EXPECT_EQ(code_of([&] { rr(x, x, {}); }), Errc::EmptyFilter);
  EXPECT_EQ(code_of([&] { ccr(x, x, {"a", "b"}, Distance::label_change); }), Errc::MissingAnswer);
}

// Explicit counters over every related probe.
TEST(CcrRr, MatchesCountingOracleAndComplement) {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    auto inst = random_instance(rng);
    std::size_t changed = 0, same = 0;
    for (const auto& id : inst.related) {
      int a = -1, b = -1;
      for (const auto& r : inst.pre)
        if (r.probe_id == id) a = r.chosen_index;
      for (const auto& r : inst.post)
        if (r.probe_id == id) b = r.chosen_index;
      if (a == b) ++same;
      else ++changed;
    }
    const double n = static_cast<double>(inst.related.size());
    const double c = ccr(inst.pre, inst.post, inst.related, Distance::label_change);
    const double r = rr(inst.pre, inst.post, inst.related);
    ASSERT_EQ(c, static_cast<double>(changed) / n);
    ASSERT_EQ(r, static_cast<double>(same) / n);
    ASSERT_EQ(c + r, 1.0);
    ASSERT_GE(c, 0.0);
    ASSERT_LE(c, 1.0);
  }
}

TEST(CcrRr, KeyedRetentionCountsPreKeyedOnly) {
  std::vector<MCQItem> key{item("a", ProbeType::multi_hop, Phase::pre, 1, 2),
                           item("b", ProbeType::multi_hop, Phase::post, 2, 2),
                           item("c", ProbeType::contextual, Phase::pre, 3, 1)};
  std::vector<AnswerRecord> post{ans("a", 1, Phase::post), ans("b", 2, Phase::post), ans("c", 0, Phase::post)};
  EXPECT_EQ(rr_keyed(post, key, {"a", "b", "c"}), 0.5);
  EXPECT_EQ(related_items(key, 1), (std::set<std::string>{"c"}));
  EXPECT_EQ(related_items(key, 2), (std::set<std::string>{"a", "b", "c"}));
}

TEST(SpreadProxies, Examples) {
  EXPECT_EQ(*spread_proxies(0.9, 0.75, InterventionMode::edit).over_spread, 0.25);
  EXPECT_FALSE(spread_proxies(0.9, 0.75, InterventionMode::edit).under_spread.has_value());
  EXPECT_EQ(*spread_proxies(0.9, 1.0, InterventionMode::edit).over_spread, 0.0);
  EXPECT_EQ(*spread_proxies(0.9, 0.75, InterventionMode::unlearn).under_spread, 0.75);
  EXPECT_FALSE(spread_proxies(0.9, 0.75, InterventionMode::unlearn).over_spread.has_value());
  EXPECT_EQ(code_of([] { spread_proxies(0.5, 1.5, InterventionMode::edit); }), Errc::OutOfRange);
}

TEST(SpreadProxies, GridExact) {
  for (int i = 0; i <= 100; ++i) {
    const double a = i / 100.0;
    EXPECT_EQ(*spread_proxies(0.5, a, InterventionMode::edit).over_spread, 1.0 - a);
    EXPECT_EQ(*spread_proxies(0.5, a, InterventionMode::unlearn).under_spread, a);
  }
}

TEST(ConflictRate, Counting) {
  std::vector<MCQItem> key;
  std::vector<AnswerRecord> a;
  for (int i = 0; i < 10; ++i) {
    const std::string base = "c" + std::to_string(i);
    key.push_back(item(base + ".old", ProbeType::conflict, Phase::pre, 0, 0, base));
    key.push_back(item(base + ".new", ProbeType::conflict, Phase::post, 1, 0, base));
    a.push_back(ans(base + ".old", 0));
    a.push_back(ans(base + ".new", i < 3 ? 1 : 0));
  }
  EXPECT_EQ(conflict_rate(a, key), 0.3);
  for (auto& r : a)
    if (r.probe_id.ends_with(".new")) r.chosen_index = 0;
  EXPECT_EQ(conflict_rate(a, key), 0.0);
}

// Options: 0 "capital of France", 1 "capital of Germany".
TEST(ConflictRate, ParisAffirmedBothWaysCounts) {
  std::vector<MCQItem> key{item("paris.old", ProbeType::conflict, Phase::pre, 0, 0, "paris"),
                           item("paris.new", ProbeType::conflict, Phase::post, 1, 0, "paris")};
  key[0].options = key[1].options = {"capital of France", "capital of Germany", "capital of Spain", "capital of Italy"};
  std::vector<AnswerRecord> a{ans("paris.old", 0), ans("paris.new", 1)};
  EXPECT_EQ(conflict_rate(a, key), 1.0);
}

TEST(ConflictRate, UnpairedAndEmpty) {
  std::vector<MCQItem> lonely{item("x.old", ProbeType::conflict, Phase::pre, 0, 0, "x")};
  std::vector<AnswerRecord> a{ans("x.old", 0)};
  EXPECT_EQ(code_of([&] { conflict_rate(a, lonely); }), Errc::UnpairedProbe);
  std::vector<MCQItem> none{item("d", ProbeType::direct, Phase::pre, 0)};
  EXPECT_EQ(code_of([&] { conflict_rate(a, none); }), Errc::EmptyFilter);
}

namespace {

PlasticityCurve curve(std::vector<double> acc, std::vector<int> scales = {1, 10, 100, 1000, 10000}) {
  PlasticityCurve c;
  for (std::size_t i = 0; i < acc.size(); ++i) c.points.emplace_back(scales[i], acc[i]);
  return c;
}

EvalConfig collapse_cfg() {
  EvalConfig cfg;
  cfg.collapse_delta = 0.1;
  cfg.reverse_floor = 0.8;
  return cfg;
}

}  // namespace

TEST(Collapse, HandDerivedExample) {
  EXPECT_EQ(collapse_point(curve({0.2, 0.5, 0.5, 0.3, 0.3}), curve({0.9, 0.9, 0.9, 0.9, 0.9}), collapse_cfg()),
            1000);
}

TEST(Collapse, MonotoneIsAbsent) {
  EXPECT_FALSE(collapse_point(curve({0.2, 0.3, 0.3, 0.6, 0.9}), curve({0.9, 0.9, 0.9, 0.9, 0.9}), collapse_cfg()));
}

TEST(Collapse, ReverseBelowFloorIsAbsent) {
  EXPECT_FALSE(collapse_point(curve({0.2, 0.5, 0.5, 0.3, 0.3}), curve({0.5, 0.5, 0.5, 0.5, 0.5}), collapse_cfg()));
}

TEST(Collapse, MismatchAndSparse) {
  EXPECT_EQ(code_of([] { collapse_point(curve({0.2, 0.5}), curve({0.9, 0.9, 0.9}), collapse_cfg()); }),
            Errc::CurveMismatch);
  EXPECT_EQ(code_of([] { collapse_point(curve({0.2}), curve({0.9}), collapse_cfg()); }), Errc::SparseCurve);
}

TEST(Collapse, StableUnderAppendingLaterPoints) {
  Rng rng(77);
  auto cfg = collapse_cfg();
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> d, r;
    for (int i = 0; i < 4; ++i) {
      d.push_back(static_cast<double>(rng.below(11)) / 10.0);
      r.push_back(static_cast<double>(rng.below(11)) / 10.0);
    }
    const std::vector<int> scales{1, 10, 100, 1000, 10000};
    auto base = collapse_point(curve(d, scales), curve(r, scales), cfg);
    if (!base) continue;
    d.push_back(static_cast<double>(rng.below(11)) / 10.0);
    r.push_back(static_cast<double>(rng.below(11)) / 10.0);
    EXPECT_EQ(collapse_point(curve(d, scales), curve(r, scales), cfg), base);
  }
}

TEST(Plasticity, CurvesAndCeiling) {
  std::map<CurveKey, double> table;
  for (Level b : {Level::root, Level::leaf}) {
    table[{1, b, "physics", InterventionMode::edit}] = 0.2;
    table[{10, b, "physics", InterventionMode::edit}] = 0.45;
  }
  auto curves = plasticity_curves(table);
  EXPECT_EQ(curves.size(), 2u);
  EXPECT_EQ(curve({0.2, 0.45, 0.45}).ceiling(), 0.45);
  std::map<CurveKey, double> sparse{{{1, Level::root, "x", InterventionMode::edit}, 0.3}};
  EXPECT_EQ(code_of([&] { plasticity_curves(sparse); }), Errc::SparseCurve);
}

namespace {

bool has(const std::vector<FailureMode>& modes, FailureKind k) {
  return std::any_of(modes.begin(), modes.end(), [&](auto& m) { return m.kind == k; });
}

}  // namespace

TEST(FailureClassifier, UnderForgettingSeverity) {
  FailureInputs in;
  in.mode = InterventionMode::unlearn;
  in.rr = 0.9;
  auto out = classify_failures(in, {}, FailureThresholds{});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].kind, FailureKind::under_forgetting);
  EXPECT_NEAR(out[0].severity, 0.8, 1e-12);
}

TEST(FailureClassifier, AtBaselineIsEmpty) {
  FailureInputs in;
  in.mode = InterventionMode::edit;
  in.rr = 1.0;
  in.ccr = 0.0;
  in.conflict_rate = 0.0;
  in.ood_acc = 0.7;
  in.instruction_following = 0.8;
  in.truthfulness = 0.6;
  Baselines b{0.7, 0.8, 0.6};
  EXPECT_TRUE(classify_failures(in, b, FailureThresholds{}).empty());
}

TEST(FailureClassifier, OverSpreadingClipped) {
  FailureInputs in;
  in.ccr = 1.0;
  auto out = classify_failures(in, {}, FailureThresholds{});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].kind, FailureKind::over_spreading);
  EXPECT_EQ(out[0].severity, 1.0);
}

TEST(FailureClassifier, MissingBaseline) {
  FailureInputs in;
  in.ood_acc = 0.5;
  EXPECT_EQ(code_of([&] { classify_failures(in, {}, FailureThresholds{}); }), Errc::MissingBaseline);
}

TEST(FailureClassifier, MonotoneInCcr) {
  FailureInputs in;
  for (int i = 0; i <= 100; ++i) {
    in.ccr = i / 100.0;
    const bool flagged = has(classify_failures(in, {}, FailureThresholds{}), FailureKind::over_spreading);
    if (i > 0) {
      in.ccr = (i - 1) / 100.0;
      const bool before = has(classify_failures(in, {}, FailureThresholds{}), FailureKind::over_spreading);
      EXPECT_TRUE(!before || flagged) << i;
    }
  }
}

TEST(Tradeoff, Drift) {
  EXPECT_NEAR(tradeoff_report(0.3, 0.63, 0.616).ood_drift, 0.014, 1e-12);
  EXPECT_EQ(tradeoff_report(0.3, 0.5, 0.5).ood_drift, 0.0);
  EXPECT_LT(tradeoff_report(0.3, 0.5, 0.6).ood_drift, 0.0);
}

TEST(AnswerWire, RoundTripAndRejections) {
  AnswerRecord a{"p1", "model", Phase::post, 2, std::array<double, 4>{0.1, 0.2, 0.6, 0.1}};
  auto back = answer_from_json(answer_to_json(a));
  EXPECT_EQ(back.probe_id, "p1");
  EXPECT_EQ(back.phase, Phase::post);
  EXPECT_EQ(back.chosen_index, 2);
  EXPECT_EQ(back.choice_probs, a.choice_probs);

  auto j = nlohmann::json::parse(answer_to_json(a).dump());
  auto bad = j;
  bad["choice_probs"] = {0.5, 0.5, 0.5, 0.5};
  EXPECT_EQ(code_of([&] { answer_from_json(bad); }), Errc::SchemaViolation);
  bad = j;
  bad["chosen_index"] = 4;
  EXPECT_EQ(code_of([&] { answer_from_json(bad); }), Errc::SchemaViolation);
  bad = j;
  bad["extra"] = true;
  EXPECT_EQ(code_of([&] { answer_from_json(bad); }), Errc::SchemaViolation);
  bad = j;
  bad["choice_probs"] = nullptr;
  EXPECT_FALSE(answer_from_json(bad).choice_probs.has_value());
}

TEST(AnswerIndex, DuplicatesRejected) {
  std::vector<AnswerRecord> a{ans("x", 0), ans("x", 1)};
  EXPECT_EQ(code_of([&] { AnswerIndex idx(a); }), Errc::SchemaViolation);
}

namespace {

struct Scenario {
  std::vector<MCQItem> items;
  std::vector<AnswerRecord> pre, post;
};

// Two direct units, one multi-hop unit, one conflict pair, one contextual unit;
// the model adopts the edit except on multi-hop.
Scenario scenario() {
  Scenario s;
  s.items = {item("d0.pre", ProbeType::direct, Phase::pre, 0),
             item("d0.post", ProbeType::direct, Phase::post, 1),
             item("d1.pre", ProbeType::direct, Phase::pre, 2),
             item("d1.post", ProbeType::direct, Phase::post, 3),
             item("m0.pre", ProbeType::multi_hop, Phase::pre, 0, 2),
             item("m0.post", ProbeType::multi_hop, Phase::post, 1, 2),
             item("c0.old", ProbeType::conflict, Phase::pre, 0, 0, "c0"),
             item("c0.new", ProbeType::conflict, Phase::post, 1, 0, "c0"),
             item("x0.pre", ProbeType::contextual, Phase::pre, 2, 1),
             item("x0.post", ProbeType::contextual, Phase::post, 2, 1)};
  std::map<std::string, std::pair<int, int>> chosen{
      {"d0.pre", {0, 1}}, {"d0.post", {0, 1}}, {"d1.pre", {2, 3}}, {"d1.post", {2, 3}},
      {"m0.pre", {0, 0}}, {"m0.post", {0, 0}}, {"c0.old", {0, 1}}, {"c0.new", {0, 1}},
      {"x0.pre", {2, 2}}, {"x0.post", {2, 2}}};
  for (const auto& it : s.items) {
    const auto [a, b] = chosen.at(it.probe.probe_id);
    std::array<double, 4> pa{0.1, 0.1, 0.1, 0.1}, pb{0.1, 0.1, 0.1, 0.1};
    pa[a] = 0.7;
    pb[b] = 0.7;
    s.pre.push_back(ans(it.probe.probe_id, a, Phase::pre, pa));
    s.post.push_back(ans(it.probe.probe_id, b, Phase::post, pb));
  }
  return s;
}

}  // namespace

TEST(Evaluate, ScenarioReport) {
  auto s = scenario();
  EvalConfig cfg;
  auto r = evaluate(s.items, s.pre, s.post, cfg);
  EXPECT_EQ(r.related_n, 4u);
  EXPECT_EQ(*r.ccr, 0.0);
  EXPECT_EQ(*r.rr, 1.0);
  EXPECT_EQ(*r.direct_acc, 1.0);
  EXPECT_EQ(*r.multihop_acc, 0.0);
  EXPECT_EQ(*r.over_spread, 1.0);
  EXPECT_EQ(*r.conflict_rate_pre, 0.0);
  EXPECT_EQ(*r.conflict_rate_post, 0.0);
  // positive post-keyed: d0.post, d1.post, m0.post, c0.new -> 3 of 4 reached
  EXPECT_EQ(*r.q_plus_pass_rate, 0.75);
  EXPECT_EQ(*r.q_minus_pass_rate, 1.0);

  AccuracyKey pre_direct{Phase::pre, Phase::pre, ProbeType::direct, Level::intermediate, "physics", "ID"};
  AccuracyKey post_direct{Phase::post, Phase::post, ProbeType::direct, Level::intermediate, "physics", "ID"};
  EXPECT_EQ(r.accuracy_by.at(pre_direct).value, 1.0);
  EXPECT_EQ(r.accuracy_by.at(pre_direct).n, 2u);
  EXPECT_EQ(r.accuracy_by.at(post_direct).value, 1.0);
  AccuracyKey stale{Phase::pre, Phase::post, ProbeType::direct, Level::intermediate, "physics", "ID"};
  EXPECT_EQ(r.accuracy_by.at(stale).value, 0.0);
}

TEST(Evaluate, UnlearnUsesOriginalKey) {
  auto s = scenario();
  EvalConfig cfg;
  cfg.mode = InterventionMode::unlearn;
  cfg.rr_keyed = true;
  auto r = evaluate(s.items, s.pre, s.post, cfg);
  EXPECT_EQ(*r.direct_acc, 0.0);
  EXPECT_EQ(*r.multihop_acc, 1.0);
  EXPECT_EQ(*r.under_spread, 1.0);
  EXPECT_FALSE(r.over_spread.has_value());
  EXPECT_EQ(*r.rr_keyed, 1.0);
}

TEST(Evaluate, KlDistanceUsesProbabilities) {
  auto s = scenario();
  EvalConfig cfg;
  cfg.distance = Distance::kl;
  auto r = evaluate(s.items, s.pre, s.post, cfg);
  EXPECT_NEAR(*r.ccr, 0.0, 1e-12);
  // -ln 0.7 = 0.357 <= 0.5 on reached items, -ln 0.1 > 0.5 on m0.post
  EXPECT_EQ(*r.q_plus_pass_rate, 0.75);
}

TEST(Evaluate, Errors) {
  auto s = scenario();
  EvalConfig cfg;
  auto missing = s.post;
  missing.pop_back();
  EXPECT_EQ(code_of([&] { evaluate(s.items, s.pre, missing, cfg); }), Errc::MissingAnswer);
  auto unknown = s.post;
  unknown.push_back(ans("ghost", 0, Phase::post));
  EXPECT_EQ(code_of([&] { evaluate(s.items, s.pre, unknown, cfg); }), Errc::UnknownProbe);
  auto wrong_phase = s.post;
  wrong_phase[0].phase = Phase::pre;
  EXPECT_EQ(code_of([&] { evaluate(s.items, s.pre, wrong_phase, cfg); }), Errc::SchemaViolation);
  auto no_probs = s.post;
  for (auto& a : no_probs) a.choice_probs.reset();
  cfg.distance = Distance::kl;
  EXPECT_EQ(code_of([&] { evaluate(s.items, s.pre, no_probs, cfg); }), Errc::MissingProbs);
}

TEST(Evaluate, CsvHasOneRowPerCell) {
  auto s = scenario();
  auto r = evaluate(s.items, s.pre, s.post, EvalConfig{});
  auto csv = report_to_csv(r);
  EXPECT_TRUE(csv.starts_with("metric,model_phase,keyed_phase,probe_type,branch,domain,split,value,n\n"));
  std::size_t acc_rows = 0, pos = 0;
  while ((pos = csv.find("\naccuracy,", pos)) != std::string::npos) {
    ++acc_rows;
    ++pos;
  }
  EXPECT_EQ(acc_rows, r.accuracy_by.size());
  auto j = report_to_json(r);
  EXPECT_EQ(j["ccr"], 0.0);
  EXPECT_EQ(j["mode"], "edit");
}

TEST(EvalConfig, Validation) {
  EvalConfig cfg;
  EXPECT_NO_THROW(validate(cfg));
  cfg.radius = 0;
  EXPECT_EQ(code_of([&] { validate(cfg); }), Errc::InvalidArgument);
  cfg = {};
  cfg.collapse_delta = 0.0;
  EXPECT_EQ(code_of([&] { validate(cfg); }), Errc::InvalidArgument);
  cfg = {};
  cfg.thresholds.ccr = 0.0;
  EXPECT_EQ(code_of([&] { validate(cfg); }), Errc::InvalidArgument);
}

TEST(SplitOf, TagsAndDefaults) {
  auto c = item("c", ProbeType::contextual, Phase::pre, 0);
  EXPECT_EQ(split_of(c.probe), "OOD");
  auto k = item("k", ProbeType::conflict, Phase::pre, 0);
  EXPECT_EQ(split_of(k.probe), "adversarial");
  auto d = item("d", ProbeType::direct, Phase::pre, 0);
  EXPECT_EQ(split_of(d.probe), "ID");
  d.probe.tags = {"split:OOD"};
  EXPECT_EQ(split_of(d.probe), "OOD");
}
