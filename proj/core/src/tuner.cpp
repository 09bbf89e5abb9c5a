// SPDX-License-Identifier: Apache-2.0
#include "gestura/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "gestura/error.hpp"

namespace gestura {
namespace {

using nlohmann::json;

constexpr double kLossTieEpsilon = 1e-12;

struct StateName {
  int code;
  std::string_view name;
};

std::span<const StateName> state_names(RuleKind kind) {
  static constexpr StateName kFlexion[] = {{1, "straight"}, {-1, "bent"}, {0, "unsure"}};
  static constexpr StateName kProximity[] = {{1, "together"}, {-1, "apart"}, {0, "unsure"}};
  static constexpr StateName kContact[] = {{1, "contact"}, {-1, "no_contact"}, {0, "unsure"}};
  static constexpr StateName kThumb[] = {{1, "up"}, {-1, "down"}, {0, "unsure"}};
  static constexpr StateName kPalm[] = {{1, "left"},   {2, "right"},   {3, "down"},   {4, "up"},
                                        {5, "inward"}, {6, "outward"}, {0, "unknown"}};
  switch (kind) {
    case RuleKind::Flexion: return kFlexion;
    case RuleKind::Proximity: return kProximity;
    case RuleKind::Contact: return kContact;
    case RuleKind::ThumbDirection: return kThumb;
    case RuleKind::PalmOrientation: return kPalm;
  }
  return {};
}

int palm_code(PalmOrientation p) {
  return p == PalmOrientation::Unknown ? 0 : static_cast<int>(p) + 1;
}

// Everything needed to re-predict a sample under different thresholds of its group.
struct Measurement {
  std::optional<double> value;  // curl, distance, or best reference angle
  int reference = 0;            // state code of the closest reference (angle groups)
  bool gated = false;           // prediction forced to unsure regardless of thresholds
};

Measurement measure(const LabeledSample& s, const RuleThresholds& base) {
  Measurement m;
  const auto& f = s.frame;
  switch (s.rule.kind) {
    case RuleKind::Flexion:
      m.value = flexion_curl(f, static_cast<Finger>(s.rule.target));
      break;
    case RuleKind::Proximity:
      m.value = proximity_distance(f, static_cast<FingerPair>(s.rule.target), base.distance_mode);
      break;
    case RuleKind::Contact: {
      const double d = contact_distance(f, static_cast<Finger>(s.rule.target), base.distance_mode);
      if (std::isfinite(d)) m.value = d;
      break;
    }
    case RuleKind::ThumbDirection: {
      m.gated = flexion(f, Finger::Thumb, base) != ThreeWay::Positive;
      if (const auto match = thumb_direction_match(f)) {
        m.value = match->angle_deg;
        m.reference = match->reference;
      }
      break;
    }
    case RuleKind::PalmOrientation: {
      if (const auto match = palm_direction_match(f)) {
        const auto p = static_cast<PalmOrientation>(match->reference);
        m.value = match->angle_deg;
        m.reference = palm_code(p);
        m.gated = !f.has_depth && (p == PalmOrientation::Inward || p == PalmOrientation::Outward);
      }
      break;
    }
  }
  return m;
}

int predict_pair(const Measurement& m, double low, double high) {
  if (!m.value) return 0;
  return static_cast<int>(classify(*m.value, {low, high}));
}

int predict_angle(const Measurement& m, double threshold) {
  if (m.gated || !m.value || *m.value > threshold) return 0;
  return m.reference;
}

Outcome assess_code(int state, const GroundTruthLabel& label) {
  if (state == 0) return Outcome::Unsure;
  return std::binary_search(label.acceptable.begin(), label.acceptable.end(), state)
             ? Outcome::Correct
             : Outcome::Error;
}

void tally(OutcomeCounts& c, Outcome o) {
  switch (o) {
    case Outcome::Correct: ++c.correct; break;
    case Outcome::Error: ++c.error; break;
    case Outcome::Unsure: ++c.unsure; break;
  }
}

std::pair<std::string_view, std::string_view> split_id(std::string_view id) {
  const auto colon = id.find(':');
  if (colon == std::string_view::npos) return {id, {}};
  return {id.substr(0, colon), id.substr(colon + 1)};
}

Range range_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw Error(ErrorCode::MalformedInput, "grid range must be [min, max, step]");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json range_to_json(const Range& r) { return json::array({r.min, r.max, r.step}); }

struct Cell {
  double low = 0.0;
  double high = 0.0;
  OutcomeCounts counts;
  double loss = 0.0;
  bool valid = false;
};

bool better(const Cell& candidate, const Cell& best) {
  if (!best.valid) return true;
  if (candidate.loss < best.loss - kLossTieEpsilon) return true;
  if (candidate.loss > best.loss + kLossTieEpsilon) return false;
  return std::tie(candidate.low, candidate.high) < std::tie(best.low, best.high);
}

const PairRange& pair_range(const GridSpec& g, ParamGroup group) {
  switch (group) {
    case ParamGroup::FlexionThumb: return g.flexion_thumb;
    case ParamGroup::FlexionFinger: return g.flexion_finger;
    case ParamGroup::Proximity: return g.proximity;
    default: return g.contact;
  }
}

void assign(RuleThresholds& th, ParamGroup group, ThresholdPair value) {
  switch (group) {
    case ParamGroup::FlexionThumb: th.flexion_thumb = value; break;
    case ParamGroup::FlexionFinger: th.flexion_finger = value; break;
    case ParamGroup::Proximity: th.proximity = value; break;
    case ParamGroup::Contact: th.contact = value; break;
    case ParamGroup::ThumbDirection: th.thumb_dir_angle_threshold = value.low; break;
    case ParamGroup::PalmOrientation: th.palm_angle_threshold = value.low; break;
  }
}

std::vector<double> positive(std::vector<double> v) {
  std::erase_if(v, [](double x) { return !(x > 0.0); });
  return v;
}

}  // namespace

std::string_view to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::FlexionThumb: return "flexion_thumb";
    case ParamGroup::FlexionFinger: return "flexion_finger";
    case ParamGroup::Proximity: return "proximity";
    case ParamGroup::Contact: return "contact";
    case ParamGroup::ThumbDirection: return "thumb_direction";
    case ParamGroup::PalmOrientation: return "palm_orientation";
  }
  return "?";
}

ParamGroup group_of(RuleTarget rule) {
  switch (rule.kind) {
    case RuleKind::Flexion:
      return rule.target == static_cast<int>(Finger::Thumb) ? ParamGroup::FlexionThumb
                                                            : ParamGroup::FlexionFinger;
    case RuleKind::Proximity: return ParamGroup::Proximity;
    case RuleKind::Contact: return ParamGroup::Contact;
    case RuleKind::ThumbDirection: return ParamGroup::ThumbDirection;
    case RuleKind::PalmOrientation: return ParamGroup::PalmOrientation;
  }
  return ParamGroup::FlexionFinger;
}

bool is_pair_group(ParamGroup g) {
  return g != ParamGroup::ThumbDirection && g != ParamGroup::PalmOrientation;
}

RuleTarget parse_rule_id(std::string_view id) {
  const auto [kind, target] = split_id(id);
  const auto fail = [&]() -> RuleTarget {
    throw Error(ErrorCode::MalformedInput, "unknown rule id '" + std::string(id) + "'");
  };
  if (kind == "thumb_direction" && target.empty()) return {RuleKind::ThumbDirection, 0};
  if (kind == "palm_orientation" && target.empty()) return {RuleKind::PalmOrientation, 0};
  if (kind == "proximity") {
    for (auto pair : kAllFingerPairs) {
      if (to_string(pair) == target) return {RuleKind::Proximity, static_cast<int>(pair)};
    }
    return fail();
  }
  if (kind == "flexion" || kind == "contact") {
    for (auto finger : kAllFingers) {
      if (finger_name(finger) != target) continue;
      if (kind == "contact" && finger == Finger::Thumb) return fail();
      return {kind == "flexion" ? RuleKind::Flexion : RuleKind::Contact, static_cast<int>(finger)};
    }
  }
  return fail();
}

std::string rule_id(RuleTarget rule) {
  switch (rule.kind) {
    case RuleKind::Flexion:
      return "flexion:" + std::string(finger_name(static_cast<Finger>(rule.target)));
    case RuleKind::Proximity:
      return "proximity:" + std::string(to_string(static_cast<FingerPair>(rule.target)));
    case RuleKind::Contact:
      return "contact:" + std::string(finger_name(static_cast<Finger>(rule.target)));
    case RuleKind::ThumbDirection: return "thumb_direction";
    case RuleKind::PalmOrientation: return "palm_orientation";
  }
  return "?";
}

std::vector<int> state_space(RuleKind kind) {
  std::vector<int> out;
  for (const auto& s : state_names(kind)) {
    if (s.code != 0) out.push_back(s.code);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string_view state_name(RuleKind kind, int state) {
  for (const auto& s : state_names(kind)) {
    if (s.code == state) return s.name;
  }
  throw Error(ErrorCode::StateSpaceMismatch, "state code " + std::to_string(state));
}

int parse_state(RuleKind kind, std::string_view name) {
  for (const auto& s : state_names(kind)) {
    if (s.name == name && s.code != 0) return s.code;
  }
  throw Error(ErrorCode::StateSpaceMismatch, "state '" + std::string(name) + "' is not a label of this rule");
}

Outcome assess(const Prediction& prediction, const GroundTruthLabel& label) {
  if (prediction.kind != label.kind) {
    throw Error(ErrorCode::StateSpaceMismatch, "prediction and label belong to different rules");
  }
  const auto space = state_space(label.kind);
  const auto in_space = [&](int s) { return std::binary_search(space.begin(), space.end(), s); };
  if (label.acceptable.empty() || !std::all_of(label.acceptable.begin(), label.acceptable.end(), in_space)) {
    throw Error(ErrorCode::StateSpaceMismatch, "label outside the rule's state space");
  }
  if (prediction.state != 0 && !in_space(prediction.state)) {
    throw Error(ErrorCode::StateSpaceMismatch, "prediction outside the rule's state space");
  }
  return assess_code(prediction.state, label);
}

void LossWeights::validate() const {
  if (!(0.0 <= correct && correct < unsure && unsure < error)) {
    throw Error(ErrorCode::InvalidArgument, "loss weights must satisfy 0 <= correct < unsure < error");
  }
}

void LossWeights::validate_for_search() const {
  if (!(0.0 <= correct && correct <= unsure && unsure <= error && correct < error)) {
    throw Error(ErrorCode::InvalidArgument, "loss weights must satisfy 0 <= correct <= unsure <= error");
  }
}

double loss_of(Outcome outcome, const LossWeights& w) {
  switch (outcome) {
    case Outcome::Correct: return w.correct;
    case Outcome::Error: return w.error;
    case Outcome::Unsure: return w.unsure;
  }
  return w.error;
}

double average_loss(std::span<const Outcome> outcomes, const LossWeights& w) {
  if (outcomes.empty()) throw Error(ErrorCode::EmptyDataset, "no assessments");
  OutcomeCounts c;
  for (auto o : outcomes) tally(c, o);
  return c.loss(w);
}

double OutcomeCounts::loss(const LossWeights& w) const {
  const auto n = static_cast<double>(total());
  if (n == 0) return 0.0;
  return (static_cast<double>(correct) * w.correct + static_cast<double>(error) * w.error +
          static_cast<double>(unsure) * w.unsure) /
         n;
}

double OutcomeCounts::error_rate() const {
  return total() == 0 ? 0.0 : static_cast<double>(error) / static_cast<double>(total());
}
double OutcomeCounts::unsure_rate() const {
  return total() == 0 ? 0.0 : static_cast<double>(unsure) / static_cast<double>(total());
}
double OutcomeCounts::correct_rate() const {
  return total() == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total());
}

int predict(const HandLandmarkFrame& frame, RuleTarget rule, const RuleThresholds& th) {
  switch (rule.kind) {
    case RuleKind::Flexion:
      return static_cast<int>(flexion(frame, static_cast<Finger>(rule.target), th));
    case RuleKind::Proximity:
      return static_cast<int>(proximity(frame, static_cast<FingerPair>(rule.target), th));
    case RuleKind::Contact:
      return static_cast<int>(contact(frame, static_cast<Finger>(rule.target), th));
    case RuleKind::ThumbDirection:
      return static_cast<int>(thumb_pointing(frame, flexion(frame, Finger::Thumb, th), th));
    case RuleKind::PalmOrientation: return palm_code(palm_orientation(frame, th));
  }
  return 0;
}

std::vector<double> Range::values() const {
  if (!(step > 0.0) || !std::isfinite(min) || !std::isfinite(max) || max < min) return {};
  const auto n = static_cast<std::size_t>(std::floor((max - min) / step + 1e-9));
  std::vector<double> out;
  out.reserve(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    const double v = min + static_cast<double>(i) * step;
    out.push_back(std::round(v * 1e9) / 1e9);
  }
  return out;
}

void to_json(json& j, const GridSpec& g) {
  const auto pair = [](const PairRange& p) {
    return json{{"low", range_to_json(p.low)}, {"high", range_to_json(p.high)}};
  };
  j = json{{"flexion_thumb", pair(g.flexion_thumb)},
           {"flexion_finger", pair(g.flexion_finger)},
           {"proximity", pair(g.proximity)},
           {"contact", pair(g.contact)},
           {"thumb_direction", range_to_json(g.thumb_direction)},
           {"palm_orientation", range_to_json(g.palm_orientation)}};
}

void from_json(const json& j, GridSpec& g) {
  GridSpec out;
  try {
    const auto pair = [&](const char* key, PairRange& p) {
      if (!j.contains(key)) return;
      p.low = range_from_json(j.at(key).at("low"));
      p.high = range_from_json(j.at(key).at("high"));
    };
    pair("flexion_thumb", out.flexion_thumb);
    pair("flexion_finger", out.flexion_finger);
    pair("proximity", out.proximity);
    pair("contact", out.contact);
    if (j.contains("thumb_direction")) out.thumb_direction = range_from_json(j.at("thumb_direction"));
    if (j.contains("palm_orientation")) out.palm_orientation = range_from_json(j.at("palm_orientation"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedInput, e.what());
  }
  g = out;
}

OutcomeCounts evaluate(std::span<const LabeledSample> dataset, ParamGroup group,
                       const RuleThresholds& th) {
  OutcomeCounts counts;
  for (const auto& s : dataset) {
    if (group_of(s.rule) != group) {
      throw Error(ErrorCode::StateSpaceMismatch, "sample " + rule_id(s.rule) + " is not in group " +
                                                     std::string(to_string(group)));
    }
    tally(counts, assess({s.rule.kind, predict(s.frame, s.rule, th)}, s.label));
  }
  return counts;
}

GridResult grid_search(std::span<const LabeledSample> dataset, ParamGroup group,
                       const GridSpec& grid, const LossWeights& w, const RuleThresholds& base,
                       unsigned jobs) {
  w.validate_for_search();
  if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "no samples for " + std::string(to_string(group)));

  std::vector<Measurement> measurements;
  measurements.reserve(dataset.size());
  for (const auto& s : dataset) {
    if (group_of(s.rule) != group || s.label.kind != s.rule.kind) {
      throw Error(ErrorCode::StateSpaceMismatch, "sample " + rule_id(s.rule) + " is not in group " +
                                                     std::string(to_string(group)));
    }
    if (s.label.ambiguous()) {
      throw Error(ErrorCode::AmbiguousLabelPresent, "ambiguous label for " + rule_id(s.rule));
    }
    assess({s.rule.kind, 0}, s.label);  // validates the label's state space
    measurements.push_back(measure(s, base));
  }

  const auto evaluate_cell = [&](double low, double high) {
    Cell cell{low, high, {}, 0.0, true};
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      const int state = is_pair_group(group) ? predict_pair(measurements[i], low, high)
                                             : predict_angle(measurements[i], low);
      tally(cell.counts, assess_code(state, dataset[i].label));
    }
    cell.loss = cell.counts.loss(w);
    return cell;
  };

  std::vector<double> lows;
  std::vector<double> highs;
  if (is_pair_group(group)) {
    lows = positive(pair_range(grid, group).low.values());
    highs = positive(pair_range(grid, group).high.values());
  } else {
    lows = positive((group == ParamGroup::ThumbDirection ? grid.thumb_direction : grid.palm_orientation).values());
    highs = {0.0};
  }

  // Rows of the grid are split across workers; each keeps a local best and the
  // merge applies the same ordering, so the result is independent of `jobs`.
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(1, lows.size()))));
  std::vector<Cell> local_best(jobs);
  std::vector<std::size_t> local_count(jobs, 0);
  const auto worker = [&](unsigned id) {
    for (std::size_t li = id; li < lows.size(); li += jobs) {
      for (double high : highs) {
        if (is_pair_group(group) && !(lows[li] < high)) continue;
        const Cell cell = evaluate_cell(lows[li], high);
        ++local_count[id];
        if (better(cell, local_best[id])) local_best[id] = cell;
      }
    }
  };
  if (jobs == 1) {
    worker(0);
  } else {
    std::vector<std::thread> threads;
    for (unsigned id = 0; id < jobs; ++id) threads.emplace_back(worker, id);
    for (auto& t : threads) t.join();
  }

  Cell best;
  std::size_t evaluated = 0;
  for (unsigned id = 0; id < jobs; ++id) {
    evaluated += local_count[id];
    if (local_best[id].valid && better(local_best[id], best)) best = local_best[id];
  }
  if (!best.valid) throw Error(ErrorCode::EmptyGrid, "no valid cells for " + std::string(to_string(group)));

  GridResult result;
  result.group = group;
  result.value = is_pair_group(group) ? ThresholdPair{best.low, best.high} : ThresholdPair{best.low, 0.0};
  result.thresholds = base;
  assign(result.thresholds, group, result.value);
  result.loss = best.loss;
  result.counts = best.counts;
  result.cells_evaluated = evaluated;
  return result;
}

std::vector<LabeledSample> parse_labeled_dataset(std::string_view jsonl,
                                                 const std::filesystem::path& base_dir) {
  std::vector<LabeledSample> out;
  std::map<std::string, LandmarkStream> stream_cache;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = " (line " + std::to_string(line_no) + ")";
    try {
      const auto j = json::parse(line);
      LabeledSample s;
      s.rule = parse_rule_id(j.at("rule").get<std::string>());
      s.label.kind = s.rule.kind;
      for (const auto& name : j.at("acceptable_states")) {
        s.label.acceptable.push_back(parse_state(s.rule.kind, name.get<std::string>()));
      }
      std::sort(s.label.acceptable.begin(), s.label.acceptable.end());
      s.label.acceptable.erase(std::unique(s.label.acceptable.begin(), s.label.acceptable.end()),
                               s.label.acceptable.end());
      if (s.label.acceptable.empty()) throw Error(ErrorCode::MalformedInput, "empty acceptable_states");
      s.sample_class = j.value("class", std::string{});

      if (j.contains("frame")) {
        const auto& jf = j.at("frame");
        json wrapper = {{"handedness", jf.value("handedness", std::string("right"))},
                        {"frames", json::array({{{"t", jf.value("t", 0.0)}, {"lm", jf.at("lm")}}})}};
        s.frame = parse_landmark_stream(wrapper.dump()).frames.front();
      } else {
        const auto ref = j.at("stream").get<std::string>();
        auto it = stream_cache.find(ref);
        if (it == stream_cache.end()) {
          const auto path = std::filesystem::path(ref).is_absolute() ? std::filesystem::path(ref) : base_dir / ref;
          std::ifstream file(path);
          if (!file) throw Error(ErrorCode::Io, "cannot open " + path.string());
          std::ostringstream buf;
          buf << file.rdbuf();
          it = stream_cache.emplace(ref, parse_landmark_stream(buf.str())).first;
        }
        const auto index = j.at("frame_index").get<std::size_t>();
        if (index >= it->second.frames.size()) throw Error(ErrorCode::MalformedInput, "frame_index out of range");
        s.frame = it->second.frames[index];
      }
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::MalformedInput, e.what() + where);
    } catch (const Error& e) {
      throw Error(e.code(), e.what() + where);
    }
  }
  return out;
}

TuneReport tune_all(std::span<const LabeledSample> dataset, const TuneOptions& options) {
  options.weights.validate_for_search();
  TuneReport report;
  report.thresholds = options.base;
  std::map<ParamGroup, std::vector<LabeledSample>> by_group;
  for (const auto& s : dataset) {
    if (s.label.ambiguous()) {
      ++report.ambiguous_filtered;
      continue;
    }
    const auto group = group_of(s.rule);
    if (const auto it = options.selectors.find(group); it != options.selectors.end() && it->second && !it->second(s)) {
      continue;
    }
    by_group[group].push_back(s);
  }
  if (by_group.empty()) throw Error(ErrorCode::EmptyDataset, "no usable samples after filtering");

  // Thumb direction is gated on the thumb flexion verdict, so it runs after it.
  for (auto group : kAllParamGroups) {
    const auto it = by_group.find(group);
    if (it == by_group.end()) continue;
    auto result = grid_search(it->second, group, options.grid, options.weights, report.thresholds, options.jobs);
    report.thresholds = result.thresholds;
    report.results.push_back(std::move(result));
  }
  return report;
}

json tune_report_to_json(const TuneReport& report) {
  json rules = json::array();
  OutcomeCounts pooled;
  for (const auto& r : report.results) {
    json params = is_pair_group(r.group) ? json::array({r.value.low, r.value.high}) : json(r.value.low);
    rules.push_back({{"rule", to_string(r.group)},
                     {"parameters", params},
                     {"loss", r.loss},
                     {"error", r.counts.error_rate()},
                     {"unsure", r.counts.unsure_rate()},
                     {"correct", r.counts.correct_rate()},
                     {"samples", r.counts.total()},
                     {"cells_evaluated", r.cells_evaluated}});
    pooled.correct += r.counts.correct;
    pooled.error += r.counts.error;
    pooled.unsure += r.counts.unsure;
  }
  return {{"rules", rules},
          {"overall",
           {{"error", pooled.error_rate()},
            {"unsure", pooled.unsure_rate()},
            {"correct", pooled.correct_rate()},
            {"samples", pooled.total()}}},
          {"ambiguous_filtered", report.ambiguous_filtered},
          {"thresholds", report.thresholds}};
}

}  // namespace gestura
