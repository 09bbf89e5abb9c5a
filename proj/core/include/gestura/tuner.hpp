// SPDX-License-Identifier: Apache-2.0
//
// Threshold tuning with three-way correctness and an asymmetric loss.
//
// Every rule output is encoded as an integer state code where 0 always
// means "unsure". Three-way rules use +1/-1, thumb direction uses +1 (up)
// and -1 (down), and palm orientation uses 1..6 for
// left/right/down/up/inward/outward.
#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gestura/landmarks.hpp"
#include "gestura/rules.hpp"

namespace gestura {

enum class RuleKind { Flexion, Proximity, Contact, ThumbDirection, PalmOrientation };

/// A rule applied to a specific finger (Flexion, Contact) or finger pair (Proximity).
struct RuleTarget {
  RuleKind kind = RuleKind::Flexion;
  int target = 0;

  friend bool operator==(const RuleTarget&, const RuleTarget&) = default;
};

/// Threshold groups that are tuned as a unit.
enum class ParamGroup { FlexionThumb, FlexionFinger, Proximity, Contact, ThumbDirection, PalmOrientation };

inline constexpr std::array<ParamGroup, 6> kAllParamGroups = {
    ParamGroup::FlexionThumb, ParamGroup::FlexionFinger,  ParamGroup::Proximity,
    ParamGroup::Contact,      ParamGroup::ThumbDirection, ParamGroup::PalmOrientation};

std::string_view to_string(ParamGroup g);
ParamGroup group_of(RuleTarget rule);
bool is_pair_group(ParamGroup g);

/// Rule ids: "flexion:thumb", "proximity:index_middle", "contact:ring",
/// "thumb_direction", "palm_orientation". Throws Error{MalformedInput}.
RuleTarget parse_rule_id(std::string_view id);
std::string rule_id(RuleTarget rule);

/// Definite (non-unsure) states of a rule.
std::vector<int> state_space(RuleKind kind);
std::string_view state_name(RuleKind kind, int state);
/// Throws Error{StateSpaceMismatch} for names outside the rule's space.
int parse_state(RuleKind kind, std::string_view name);

struct GroundTruthLabel {
  RuleKind kind = RuleKind::Flexion;
  std::vector<int> acceptable;  // sorted, unique, non-empty

  bool ambiguous() const { return acceptable.size() >= 2; }
};

struct Prediction {
  RuleKind kind = RuleKind::Flexion;
  int state = 0;
};

enum class Outcome { Correct, Error, Unsure };

/// Unsure if the prediction abstains, Correct if it is acceptable, Error otherwise.
Outcome assess(const Prediction& prediction, const GroundTruthLabel& label);

struct LossWeights {
  double unsure = 0.2;
  double error = 1.0;
  double correct = 0.0;

  /// Strict ordering 0 <= correct < unsure < error.
  void validate() const;
  /// Relaxed ordering accepted by the search: 0 <= correct <= unsure <= error, correct < error.
  void validate_for_search() const;
};

double loss_of(Outcome outcome, const LossWeights& w);

/// Mean per-sample loss. Throws Error{EmptyDataset}.
double average_loss(std::span<const Outcome> outcomes, const LossWeights& w = {});

struct LabeledSample {
  HandLandmarkFrame frame;
  RuleTarget rule;
  GroundTruthLabel label;
  /// Optional gesture class name, used by dataset selection hooks.
  std::string sample_class;
};

/// State code predicted for the sample's rule under `th`.
int predict(const HandLandmarkFrame& frame, RuleTarget rule, const RuleThresholds& th);

struct Range {
  double min = 0.0;
  double max = 0.0;
  double step = 1.0;

  std::vector<double> values() const;
};

struct PairRange {
  Range low;
  Range high;
};

struct GridSpec {
  PairRange flexion_thumb{{0, 180, 1}, {0, 180, 1}};
  PairRange flexion_finger{{0, 180, 1}, {0, 180, 1}};
  PairRange proximity{{0.0, 0.2, 0.001}, {0.0, 0.2, 0.001}};
  PairRange contact{{0.0, 0.2, 0.001}, {0.0, 0.2, 0.001}};
  Range thumb_direction{0, 90, 1};
  Range palm_orientation{0, 90, 1};
};

void to_json(nlohmann::json& j, const GridSpec& g);
void from_json(const nlohmann::json& j, GridSpec& g);

struct OutcomeCounts {
  std::size_t correct = 0;
  std::size_t error = 0;
  std::size_t unsure = 0;

  std::size_t total() const { return correct + error + unsure; }
  double loss(const LossWeights& w) const;
  double error_rate() const;
  double unsure_rate() const;
  double correct_rate() const;
};

/// Outcome counts of one group's dataset under fixed thresholds.
OutcomeCounts evaluate(std::span<const LabeledSample> dataset, ParamGroup group,
                       const RuleThresholds& th);

struct GridResult {
  ParamGroup group = ParamGroup::FlexionFinger;
  /// For pair groups both ends are set; angle groups only use `value.low`.
  ThresholdPair value;
  RuleThresholds thresholds;  // base thresholds with this group replaced
  double loss = 0.0;
  OutcomeCounts counts;
  std::size_t cells_evaluated = 0;
};

/// Exhaustive search over the grid cells of one group (pairs with low < high).
/// The minimum-loss cell wins; ties go to the lexicographically smallest
/// (low, high). Threshold groups other than `group` are taken from `base`
/// (thumb direction depends on the thumb flexion verdict).
/// Throws EmptyDataset, EmptyGrid, AmbiguousLabelPresent, StateSpaceMismatch.
GridResult grid_search(std::span<const LabeledSample> dataset, ParamGroup group,
                       const GridSpec& grid, const LossWeights& w = {},
                       const RuleThresholds& base = {}, unsigned jobs = 1);

/// Reads JSON lines: {"rule", "acceptable_states", "frame"|("stream","frame_index"),
/// optional "class"}. Relative stream paths resolve against `base_dir`.
std::vector<LabeledSample> parse_labeled_dataset(std::string_view jsonl,
                                                 const std::filesystem::path& base_dir = {});

struct TuneOptions {
  GridSpec grid;
  LossWeights weights;
  RuleThresholds base;
  unsigned jobs = 1;
  /// Per-group selection hook (for example thumb flexion restricted to chosen classes).
  std::map<ParamGroup, std::function<bool(const LabeledSample&)>> selectors;
};

struct TuneReport {
  RuleThresholds thresholds;
  std::vector<GridResult> results;
  std::size_t ambiguous_filtered = 0;
};

/// Drops ambiguous labels, splits by group, and runs grid_search for every
/// group with data. Groups without data keep their base thresholds.
/// Throws Error{EmptyDataset} when nothing is left after filtering.
TuneReport tune_all(std::span<const LabeledSample> dataset, const TuneOptions& options);

nlohmann::json tune_report_to_json(const TuneReport& report);

}  // namespace gestura
