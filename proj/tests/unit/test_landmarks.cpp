// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>
#include <string>

#include "gestura/error.hpp"
#include "gestura/landmarks.hpp"
#include "synthetic_hand.hpp"

namespace gestura {
namespace {

std::string frame_json(double t, int count = 21, int dims = 3, double x = 0.5) {
  std::string lm;
  for (int i = 0; i < count; ++i) {
    if (i) lm += ",";
    lm += dims == 3 ? "[" + std::to_string(x) + ",0.5,0.0]" : "[" + std::to_string(x) + ",0.5]";
  }
  return R"({"t":)" + std::to_string(t) + R"(,"lm":[)" + lm + "]}";
}

ErrorCode code_of(const std::string& raw) {
  try {
    parse_landmark_stream(raw);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error for " << raw;
  return ErrorCode::Io;
}

TEST(Landmarks, NamesRoundTrip) {
  for (std::size_t i = 0; i < kLandmarkCount; ++i) EXPECT_EQ(landmark_index(landmark_name(i)), i);
  EXPECT_EQ(landmark_index("WRIST"), 0u);
  EXPECT_EQ(landmark_index("INDEX_FINGER_TIP"), 8u);
  EXPECT_EQ(landmark_index("PINKY_MCP"), 17u);
  EXPECT_THROW(landmark_index("ELBOW"), Error);
  EXPECT_THROW(landmark_name(21), Error);
}

TEST(Landmarks, JointsOfFingers) {
  EXPECT_EQ(joints_of(Finger::Thumb).mcp, 2u);
  EXPECT_EQ(joints_of(Finger::Thumb).tip, 4u);
  EXPECT_EQ(joints_of(Finger::Index).mcp, 5u);
  EXPECT_EQ(joints_of(Finger::Pinky).tip, 20u);
}

TEST(Landmarks, ParsesThreeAndTwoDimensionalFrames) {
  const auto s = parse_landmark_stream(R"({"handedness":"right","frames":[)" + frame_json(0.0) + "," +
                                       frame_json(0.1, 21, 2) + "]}");
  ASSERT_EQ(s.frames.size(), 2u);
  EXPECT_TRUE(s.frames[0].has_depth);
  EXPECT_FALSE(s.frames[1].has_depth);
  EXPECT_DOUBLE_EQ(s.frames[1][20].z, 0.0);
  EXPECT_EQ(s.source_view, SourceView::ThirdPerson);
}

TEST(Landmarks, RejectsWrongLandmarkCount) {
  EXPECT_EQ(code_of(R"({"handedness":"right","frames":[)" + frame_json(0.0, 20) + "]}"),
            ErrorCode::BadLandmarkCount);
}

TEST(Landmarks, RejectsNonMonotonicTimestamps) {
  EXPECT_EQ(code_of(R"({"handedness":"right","frames":[)" + frame_json(0.2) + "," + frame_json(0.2) + "]}"),
            ErrorCode::NonMonotonicTimestamps);
  EXPECT_EQ(code_of(R"({"handedness":"right","frames":[)" + frame_json(0.3) + "," + frame_json(0.1) + "]}"),
            ErrorCode::NonMonotonicTimestamps);
}

TEST(Landmarks, RejectsMalformedDocuments) {
  EXPECT_EQ(code_of("not json"), ErrorCode::MalformedInput);
  EXPECT_EQ(code_of("[]"), ErrorCode::MalformedInput);
  EXPECT_EQ(code_of(R"({"frames":[]})"), ErrorCode::MalformedInput);
  EXPECT_EQ(code_of(R"({"handedness":"both","frames":[]})"), ErrorCode::MalformedInput);
  EXPECT_EQ(code_of(R"({"handedness":"right","frames":[)" + frame_json(0.0, 21, 3, 2.0) + "]}"),
            ErrorCode::MalformedInput);
  EXPECT_EQ(code_of(R"({"handedness":"right","frames":[{"t":0,"lm":[[0.1]]}]})"), ErrorCode::BadLandmarkCount);
}

TEST(Landmarks, SerializationRoundTripsExactly) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 20; ++i) {
    const auto s = testing::random_stream(rng);
    EXPECT_EQ(parse_landmark_stream(serialize_landmark_stream(s)), s);
  }
}

}  // namespace
}  // namespace gestura
