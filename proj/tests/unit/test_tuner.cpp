// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>

#include <nlohmann/json.hpp>

#include "datasets.hpp"
#include "gestura/error.hpp"
#include "gestura/tuner.hpp"
#include "synthetic_hand.hpp"

namespace gestura {
namespace {

GroundTruthLabel label(RuleKind k, std::vector<int> states) { return {k, std::move(states)}; }

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return ErrorCode::Io;
}

TEST(Tuner, AssessDefinitions) {
  EXPECT_EQ(assess({RuleKind::Flexion, 1}, label(RuleKind::Flexion, {1})), Outcome::Correct);
  EXPECT_EQ(assess({RuleKind::Flexion, 0}, label(RuleKind::Flexion, {1})), Outcome::Unsure);
  EXPECT_EQ(assess({RuleKind::Flexion, -1}, label(RuleKind::Flexion, {1})), Outcome::Error);
  EXPECT_EQ(assess({RuleKind::Flexion, -1}, label(RuleKind::Flexion, {-1, 1})), Outcome::Correct);
  EXPECT_EQ(assess({RuleKind::PalmOrientation, 6}, label(RuleKind::PalmOrientation, {6})), Outcome::Correct);
  EXPECT_EQ(code_of([] { assess({RuleKind::Flexion, 1}, label(RuleKind::Contact, {1})); }),
            ErrorCode::StateSpaceMismatch);
  EXPECT_EQ(code_of([] { assess({RuleKind::Flexion, 4}, label(RuleKind::Flexion, {1})); }),
            ErrorCode::StateSpaceMismatch);
}

TEST(Tuner, AverageLoss) {
  const std::vector<Outcome> a = {Outcome::Correct, Outcome::Correct};
  EXPECT_DOUBLE_EQ(average_loss(a), 0.0);
  const std::vector<Outcome> b = {Outcome::Unsure};
  EXPECT_DOUBLE_EQ(average_loss(b), 0.2);
  const std::vector<Outcome> c = {Outcome::Correct, Outcome::Error, Outcome::Unsure, Outcome::Correct};
  EXPECT_NEAR(average_loss(c), 0.3, 1e-15);
  EXPECT_EQ(code_of([] { average_loss(std::vector<Outcome>{}); }), ErrorCode::EmptyDataset);
}

TEST(Tuner, LossWeightOrdering) {
  LossWeights w;
  EXPECT_NO_THROW(w.validate());
  w.unsure = 1.0;
  EXPECT_THROW(w.validate(), Error);
  EXPECT_NO_THROW(w.validate_for_search());
  w.error = 0.0;
  w.unsure = 0.0;
  EXPECT_THROW(w.validate_for_search(), Error);
}

TEST(Tuner, RuleIdsAndStates) {
  for (const char* id : {"flexion:thumb", "flexion:pinky", "proximity:index_middle", "proximity:ring_pinky",
                         "contact:ring", "thumb_direction", "palm_orientation"}) {
    EXPECT_EQ(rule_id(parse_rule_id(id)), id);
  }
  EXPECT_THROW(parse_rule_id("contact:thumb"), Error);
  EXPECT_THROW(parse_rule_id("flexion:toe"), Error);
  EXPECT_EQ(parse_state(RuleKind::PalmOrientation, "outward"), 6);
  EXPECT_EQ(parse_state(RuleKind::Proximity, "together"), 1);
  EXPECT_THROW(parse_state(RuleKind::Contact, "straight"), Error);
  EXPECT_EQ(state_space(RuleKind::PalmOrientation).size(), 6u);
}

TEST(Tuner, RangeValues) {
  EXPECT_EQ((Range{0.0, 1.0, 0.25}.values()), (std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0}));
  EXPECT_EQ((Range{0.0, 0.003, 0.001}.values()).size(), 4u);
  EXPECT_TRUE((Range{1.0, 0.0, 0.1}.values()).empty());
}

TEST(Tuner, GridSearchRecoversPlantedFlexion) {
  std::mt19937_64 rng(1);
  const auto data = testing::planted_flexion(rng, 300, 65.5, 0.5);
  GridSpec grid;
  grid.flexion_finger = {{20, 120, 1}, {20, 120, 1}};
  const auto r = grid_search(data, ParamGroup::FlexionFinger, grid);
  EXPECT_DOUBLE_EQ(r.loss, 0.0);
  EXPECT_LE(r.value.low - 1.0, 65.5);
  EXPECT_GE(r.value.high + 1.0, 65.5);
  EXPECT_EQ(r.counts.correct, data.size());
  // Lexicographically smallest zero-loss cell: the lowest low above every straight curl.
  double max_straight = 0;
  for (const auto& s : data) {
    if (s.label.acceptable[0] == 1) max_straight = std::max(max_straight, *flexion_curl(s.frame, Finger::Index));
  }
  EXPECT_GE(r.value.low, max_straight);
  EXPECT_LT(r.value.low - 1.0, max_straight);
  EXPECT_DOUBLE_EQ(r.value.high, r.value.low + 1.0);
}

TEST(Tuner, GridSearchIndependentOfJobs) {
  std::mt19937_64 rng(2);
  const auto data = testing::noisy_samples(rng, 200, {RuleKind::Contact, 2});
  GridSpec grid;
  grid.contact = {{0.0, 0.1, 0.005}, {0.0, 0.1, 0.005}};
  const auto a = grid_search(data, ParamGroup::Contact, grid, {}, {}, 1);
  const auto b = grid_search(data, ParamGroup::Contact, grid, {}, {}, 3);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(a.cells_evaluated, b.cells_evaluated);
  // Cells with low >= high and non-positive values are skipped.
  EXPECT_EQ(a.cells_evaluated, 20u * 19u / 2u);
}

TEST(Tuner, GridSearchErrors) {
  std::mt19937_64 rng(3);
  auto data = testing::noisy_samples(rng, 10, {RuleKind::Flexion, 1});
  GridSpec grid;
  grid.flexion_finger = {{10, 20, 5}, {10, 20, 5}};
  EXPECT_EQ(code_of([&] { grid_search({}, ParamGroup::FlexionFinger, grid); }), ErrorCode::EmptyDataset);
  GridSpec empty = grid;
  empty.flexion_finger = {{30, 40, 5}, {10, 20, 5}};
  EXPECT_EQ(code_of([&] { grid_search(data, ParamGroup::FlexionFinger, empty); }), ErrorCode::EmptyGrid);
  EXPECT_EQ(code_of([&] { grid_search(data, ParamGroup::Contact, grid); }), ErrorCode::StateSpaceMismatch);
  data[3].label.acceptable = {-1, 1};
  EXPECT_EQ(code_of([&] { grid_search(data, ParamGroup::FlexionFinger, grid); }), ErrorCode::AmbiguousLabelPresent);
}

TEST(Tuner, AngleGroupSearch) {
  std::mt19937_64 rng(4);
  testing::RandomHandOptions opt;
  opt.chaos_fraction = 0;
  opt.allow_2d = false;
  std::vector<LabeledSample> data;
  const RuleThresholds th;
  for (int i = 0; i < 200; ++i) {
    LabeledSample s;
    s.frame = testing::random_hand(rng, opt);
    s.rule = {RuleKind::PalmOrientation, 0};
    s.label.kind = RuleKind::PalmOrientation;
    const auto m = palm_direction_match(s.frame);
    s.label.acceptable = {static_cast<int>(m->reference) + 1};
    data.push_back(s);
  }
  GridSpec grid;
  grid.palm_orientation = {0, 60, 1};
  const auto r = grid_search(data, ParamGroup::PalmOrientation, grid);
  // Labels agree with the closest reference, so the widest threshold is error-free.
  EXPECT_EQ(r.counts.error, 0u);
  EXPECT_EQ(r.cells_evaluated, 60u);
}

TEST(Tuner, WideningUnsureBandNeverAddsErrors) {
  std::mt19937_64 rng(5);
  const auto data = testing::noisy_samples(rng, 300, {RuleKind::Flexion, 3});
  std::uniform_real_distribution<double> u(1.0, 170.0);
  for (int i = 0; i < 50; ++i) {
    double a = u(rng), b = u(rng);
    if (a > b) std::swap(a, b);
    if (a == b) continue;
    RuleThresholds narrow, wide;
    narrow.flexion_finger = {a, b};
    wide.flexion_finger = {a * 0.8, b * 1.1};
    EXPECT_LE(evaluate(data, ParamGroup::FlexionFinger, wide).error,
              evaluate(data, ParamGroup::FlexionFinger, narrow).error);
  }
}

TEST(Tuner, DatasetParsingAndTuneAll) {
  const auto f = testing::make_hand(testing::open_hand());
  nlohmann::json lm = nlohmann::json::array();
  for (const auto& p : f.landmarks) lm.push_back({p.x, p.y, p.z});
  std::string jsonl;
  jsonl += nlohmann::json{{"rule", "flexion:index"}, {"acceptable_states", {"straight"}}, {"frame", {{"lm", lm}}}}.dump() + "\n";
  jsonl += nlohmann::json{{"rule", "flexion:middle"}, {"acceptable_states", {"straight", "bent"}}, {"frame", {{"lm", lm}}}}.dump() + "\n\n";
  jsonl += nlohmann::json{{"rule", "palm_orientation"}, {"acceptable_states", {"outward"}}, {"frame", {{"lm", lm}}}, {"class", "palm"}}.dump() + "\n";
  const auto samples = parse_labeled_dataset(jsonl);
  ASSERT_EQ(samples.size(), 3u);
  EXPECT_TRUE(samples[1].label.ambiguous());
  EXPECT_EQ(samples[2].sample_class, "palm");

  TuneOptions opt;
  opt.grid.flexion_finger = {{10, 100, 10}, {10, 100, 10}};
  opt.grid.palm_orientation = {10, 50, 10};
  const auto report = tune_all(samples, opt);
  EXPECT_EQ(report.ambiguous_filtered, 1u);
  ASSERT_EQ(report.results.size(), 2u);
  EXPECT_EQ(report.results[0].group, ParamGroup::FlexionFinger);
  EXPECT_DOUBLE_EQ(report.results[0].value.low, 10.0);
  EXPECT_DOUBLE_EQ(report.results[1].value.low, 10.0);
  EXPECT_EQ(report.thresholds.contact, RuleThresholds{}.contact);
  const auto doc = tune_report_to_json(report);
  EXPECT_EQ(doc.at("ambiguous_filtered"), 1);
  EXPECT_EQ(doc.at("overall").at("samples"), 2);

  opt.selectors[ParamGroup::PalmOrientation] = [](const LabeledSample& s) { return s.sample_class != "palm"; };
  EXPECT_EQ(tune_all(samples, opt).results.size(), 1u);

  EXPECT_EQ(code_of([] { parse_labeled_dataset(R"({"rule":"flexion:index","acceptable_states":[]})"); }),
            ErrorCode::MalformedInput);
  EXPECT_EQ(code_of([] { parse_labeled_dataset(R"({"rule":"flexion:index","acceptable_states":["left"]})"); }),
            ErrorCode::StateSpaceMismatch);
}

}  // namespace
}  // namespace gestura
