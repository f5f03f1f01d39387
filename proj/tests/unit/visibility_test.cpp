#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "oracles.hpp"
#include "skytalk/scene.hpp"

using namespace skytalk;

namespace {

SceneObject make(std::string id, Vec3 center, Vec3 extent, bool occluder = false) {
  SceneObject o;
  o.id = id;
  o.label = id;
  o.center = center;
  o.extent = extent;
  o.is_occluder = occluder;
  return o;
}

Scene open_field() {
  Scene s;
  s.name = "field";
  s.bounds = {{-200, -200, 0}, {200, 200, 100}};
  s.spawn = {{0, 0, 5}, 0.0};
  s.camera = {90.0, 100.0};
  return s;
}

const Visibility* find(const std::vector<Visibility>& v, const std::string& id) {
  for (const auto& x : v) {
    if (x.object_id == id) return &x;
  }
  return nullptr;
}

}  // namespace

TEST(Visibility, ObjectAheadIsFullyVisible) {
  Scene s = open_field();
  s.objects.push_back(make("rock", {5, 0, 5}, {1, 1, 1}));
  const auto v = visible_objects(s, s.spawn);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].fraction, 1.0);
  EXPECT_DOUBLE_EQ(v[0].distance, 5.0);
}

TEST(Visibility, BehindOutsideFovAndRangeAreOmitted) {
  Scene s = open_field();
  s.objects.push_back(make("behind", {-5, 0, 5}, {1, 1, 1}));
  s.objects.push_back(make("side", {10, 11, 5}, {1, 1, 1}));  // 47.7 degrees
  s.objects.push_back(make("far", {101, 0, 5}, {1, 1, 1}));
  s.objects.push_back(make("edge", {10, 9.9, 5}, {1, 1, 1}));
  const auto v = visible_objects(s, s.spawn);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].object_id, "edge");
}

TEST(Visibility, FullyOccludedObjectIsOmitted) {
  Scene s = open_field();
  s.objects.push_back(make("hidden", {30, 0, 5}, {1, 1, 1}));
  s.objects.push_back(make("wall", {15, 0, 5}, {1, 10, 10}, true));
  const auto v = visible_objects(s, s.spawn);
  EXPECT_EQ(find(v, "hidden"), nullptr);
  ASSERT_NE(find(v, "wall"), nullptr);
  EXPECT_EQ(oracle::marched_fraction(s, s.spawn.position, "hidden", 8), 0.0);
}

TEST(Visibility, NonOccludersNeverBlock) {
  Scene s = open_field();
  s.objects.push_back(make("target", {30, 0, 5}, {1, 1, 1}));
  s.objects.push_back(make("bush", {15, 0, 5}, {1, 10, 10}, false));
  EXPECT_EQ(find(visible_objects(s, s.spawn), "target")->fraction, 1.0);
}

TEST(Visibility, PartialFractionMatchesMarchedLattice) {
  Scene s = open_field();
  s.objects.push_back(make("target", {40, 0, 5}, {2, 2, 2}));
  s.objects.push_back(make("post", {20, 1.5, 5}, {0.5, 1.5, 10}, true));
  const auto v = visible_objects(s, s.spawn);
  const auto* t = find(v, "target");
  ASSERT_NE(t, nullptr);
  EXPECT_DOUBLE_EQ(t->fraction, oracle::marched_fraction(s, s.spawn.position, "target", 4));
  EXPECT_GT(t->fraction, 0.0);
  EXPECT_LT(t->fraction, 1.0);
}

TEST(Visibility, ShippedSpawnViewsMatchMarchedLattice) {
  for (const char* name : {"mountain_clean", "square_occluded", "snow_far", "lake_near"}) {
    const Scene s = load_scene_file(oracle::data_path(std::string("scenes/") + name + ".json"));
    for (const auto& v : visible_objects(s, s.spawn)) {
      EXPECT_DOUBLE_EQ(v.fraction, oracle::marched_fraction(s, s.spawn.position, v.object_id, 4))
          << name << " " << v.object_id;
    }
  }
}

TEST(Visibility, SortedByFractionThenDistanceThenId) {
  Scene s = open_field();
  s.objects.push_back(make("b", {20, 0, 5}, {1, 1, 1}));
  s.objects.push_back(make("a", {20, 3, 5}, {1, 1, 1}));
  s.objects.push_back(make("near", {10, -3, 5}, {1, 1, 1}));
  s.objects.push_back(make("shadowed", {50, -8, 5}, {2, 2, 2}));
  s.objects.push_back(make("blocker", {30, -6, 5}, {0.5, 1.2, 10}, true));
  const auto v = visible_objects(s, s.spawn);
  ASSERT_GE(v.size(), 4u);
  for (std::size_t i = 1; i < v.size(); ++i) {
    const auto& p = v[i - 1];
    const auto& q = v[i];
    const bool ordered = p.fraction > q.fraction || (p.fraction == q.fraction && p.distance < q.distance) ||
                         (p.fraction == q.fraction && p.distance == q.distance && p.object_id < q.object_id);
    EXPECT_TRUE(ordered) << p.object_id << " before " << q.object_id;
  }
}

TEST(Visibility, BearingSignConvention) {
  const Pose pose{{0, 0, 0}, 0.0};
  EXPECT_NEAR(bearing(pose, {10, 10, 0}), std::numbers::pi / 4, 1e-12);
  EXPECT_NEAR(bearing(pose, {10, -10, 0}), -std::numbers::pi / 4, 1e-12);
}

TEST(VisibilityProperty, AddingAnOccluderNeverRaisesAFraction) {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> pos(5, 80), lat(-40, 40), size(0.5, 4);
  for (int trial = 0; trial < 200; ++trial) {
    Scene s = open_field();
    for (int i = 0; i < 6; ++i) {
      s.objects.push_back(make("o" + std::to_string(i), {pos(gen), lat(gen), size(gen)},
                               {size(gen), size(gen), size(gen)}, i % 3 == 0));
    }
    const auto before = visible_objects(s, s.spawn);
    s.objects.push_back(make("extra", {pos(gen), lat(gen), 5}, {size(gen), size(gen), 8}, true));
    const auto after = visible_objects(s, s.spawn);
    for (const auto& b : before) {
      const auto* a = find(after, b.object_id);
      const double fa = a ? a->fraction : 0.0;
      EXPECT_LE(fa, b.fraction) << "trial " << trial << " " << b.object_id;
    }
  }
}

TEST(SegmentBox, AgreesWithMarchingWhenMarchingHits) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(-10, 10);
  int hits = 0;
  for (int i = 0; i < 2000; ++i) {
    const Vec3 a{u(gen), u(gen), u(gen)}, b{u(gen), u(gen), u(gen)};
    const Vec3 c{u(gen) / 2, u(gen) / 2, u(gen) / 2};
    const Box box = Box::from_center(c, {std::abs(u(gen)) / 3 + 0.2, std::abs(u(gen)) / 3 + 0.2, 1.0});
    if (oracle::marched_hit(a, b, box)) {
      ++hits;
      EXPECT_TRUE(segment_hits_box(a, b, box)) << i;
    }
  }
  EXPECT_GT(hits, 100);
}

TEST(SegmentBox, ThroughCenterHitsAndEndpointsOutsideMiss) {
  const Box box{{-1, -1, -1}, {1, 1, 1}};
  EXPECT_TRUE(segment_hits_box({-5, 0, 0}, {5, 0, 0}, box));
  EXPECT_FALSE(segment_hits_box({-5, 3, 0}, {5, 3, 0}, box));
  EXPECT_FALSE(segment_hits_box({-5, 0, 0}, {-2, 0, 0}, box));
}
