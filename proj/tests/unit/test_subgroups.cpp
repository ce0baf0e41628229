#include <doctest.h>

#include <random>
#include <sstream>

#include "oracle/oracles.hpp"
#include "srpose/subgroups.hpp"
#include "support/fixtures.hpp"

using namespace srpose;

namespace {

SubgroupSpec spec_with(double width) {
  SubgroupSpec s;
  s.bin_width = width;
  return s;
}

}  // namespace

TEST_SUITE("subgroups") {

TEST_CASE("bin assignment") {
  const SubgroupSpec half = spec_with(500);
  CHECK(subgroup_of(2750, half) == 6);
  CHECK(subgroup_of(2501, half) == 6);
  CHECK(subgroup_of(3000, half) == 6);
  CHECK(subgroup_of(3000.5, half) == 7);
  CHECK(subgroup_of(1, half) == 1);
  CHECK(subgroup_of(0.25, half) == 1);
  CHECK(subgroup_of(12000, half) == 24);
  CHECK_FALSE(subgroup_of(12001, half).has_value());
  CHECK_FALSE(subgroup_of(0, half).has_value());
  CHECK_FALSE(subgroup_of(-3, half).has_value());
}

TEST_CASE("bin boundaries for both widths") {
  const SubgroupSpec half = spec_with(500);
  CHECK(half.label_low(1) == 1);
  CHECK(half.label_high(1) == 500);
  CHECK(half.label_low(2) == 501);
  CHECK(half.label_low(24) == 11501);
  CHECK(half.label_high(24) == 12000);
  const SubgroupSpec quarter = spec_with(125);
  CHECK(quarter.label_low(1) == 1);
  CHECK(quarter.label_high(1) == 125);
  CHECK(quarter.label_low(24) == 2876);
  CHECK(quarter.label_high(24) == 3000);
  for (const SubgroupSpec& s : {half, quarter}) {
    for (int k = 1; k <= 24; ++k) {
      CHECK(subgroup_of(s.label_low(k), s) == k);
      CHECK(subgroup_of(s.label_high(k), s) == k);
      if (k > 1) CHECK(s.label_low(k) == s.label_high(k - 1) + 1);
    }
  }
}

TEST_CASE("every positive area maps to exactly one bin or none") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> area(1e-6, 15000);
  const SubgroupSpec s = spec_with(500);
  for (int i = 0; i < 10000; ++i) {
    const double a = area(rng);
    const auto k = subgroup_of(a, s);
    int hits = 0;
    for (int b = 1; b <= 24; ++b) hits += (a > (b - 1) * 500.0 && a <= b * 500.0);
    CHECK(hits == (k ? 1 : 0));
    if (k) CHECK((a > (*k - 1) * 500.0 && a <= *k * 500.0));
  }
}

TEST_CASE("assign_subgroups warns on non-positive areas") {
  Dataset ds = fixtures::three_image_dataset();
  std::vector<PersonAnnotation> anns = ds.annotations();
  anns[0].area = 0;
  const Dataset bad(ds.images(), anns);
  const PinnedLabels labels = assign_subgroups(bad, spec_with(500));
  CHECK(labels.warnings == std::vector<std::int64_t>{anns[0].id});
  CHECK_FALSE(labels.bin_of(anns[0].id).has_value());
  CHECK(labels.sizes.count(anns[0].id) == 0);
  CHECK(labels.sizes.at(2) == "medium");
}

TEST_CASE("percent change") {
  const auto c = percent_change({0.5, 0.25, 0.0, kNoData, 0.4}, {0.5, 0.65, 0.3, 0.2, kNoData});
  CHECK(*c[0] == 0.0);
  CHECK(*c[1] == doctest::Approx(160.0).epsilon(1e-12));
  CHECK_FALSE(c[2].has_value());
  CHECK_FALSE(c[3].has_value());
  CHECK_FALSE(c[4].has_value());
  std::mt19937_64 rng(3);
  std::vector<double> x;
  for (int i = 0; i < 24; ++i) x.push_back(0.01 + (rng() % 1000) / 1000.0);
  for (const auto& v : percent_change(x, x)) CHECK(*v == 0.0);
  CHECK_THROWS(percent_change({1.0}, {1.0, 2.0}));
}

TEST_CASE("a single populated bin scores 1 with perfect predictions") {
  // Everyone in bin 6 of the 500-wide grid.
  synth::Spec spec;
  spec.num_images = 5;
  spec.min_area = 2600;
  spec.max_area = 2900;
  spec.seed = 4;
  const Dataset ds = synth::make_fixture(spec).dataset;
  const PinnedLabels labels = assign_subgroups(ds, spec_with(500));
  const auto kps = fixtures::perfect_keypoints(ds);
  const auto groups = per_subgroup_metrics(Evaluation::keypoints(ds, kps, EvalConfig{}), labels);
  REQUIRE(groups.size() == 24);
  for (const auto& g : groups) {
    if (g.index == 6) {
      CHECK(g.ap == 1.0);
      CHECK(g.ar == 1.0);
      CHECK(g.num_persons == ds.annotations().size());
    } else {
      CHECK(g.ap == kNoData);
      CHECK(g.num_persons == 0);
    }
  }
}

TEST_CASE("pinned labels survive x4 annotation scaling") {
  synth::Spec spec;
  spec.num_images = 12;
  spec.min_area = 20;
  spec.max_area = 3000;
  spec.width = 160;
  spec.height = 120;
  spec.seed = 12;
  const Dataset lr = synth::make_fixture(spec).dataset;
  const Dataset sr = scale_annotations(lr, 4.0);
  const PinnedLabels pinned = assign_subgroups(lr, spec_with(125));
  const PinnedLabels recomputed = assign_subgroups(sr, spec_with(125));

  // Predictions with some error, expressed in each frame.
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.5);
  std::vector<KeypointRecord> lr_kps = fixtures::perfect_keypoints(lr);
  for (auto& r : lr_kps) {
    for (auto& k : r.keypoints) k.x += g(rng), k.y += g(rng);
  }
  std::vector<KeypointRecord> sr_kps = lr_kps;
  for (auto& r : sr_kps) {
    for (auto& k : r.keypoints) k.x *= 4, k.y *= 4;
  }

  const auto lr_groups = per_subgroup_metrics(Evaluation::keypoints(lr, lr_kps, EvalConfig{}), pinned);
  const auto sr_groups = per_subgroup_metrics(Evaluation::keypoints(sr, sr_kps, EvalConfig{}), pinned);
  std::size_t populated = 0;
  for (std::size_t i = 0; i < 24; ++i) {
    CHECK(lr_groups[i].num_persons == sr_groups[i].num_persons);
    CHECK(sr_groups[i].num_persons == pinned.bin_populations()[i]);
    CHECK(lr_groups[i].ap == sr_groups[i].ap);
    CHECK(lr_groups[i].ar == sr_groups[i].ar);
    populated += lr_groups[i].num_persons > 0;
  }
  CHECK(populated >= 10);
  // Recomputing on the SR areas would push nearly everyone past bin 24.
  CHECK(recomputed.bin_populations() != pinned.bin_populations());
}

TEST_CASE("per-bin scores equal filter-then-evaluate with the oracle") {
  std::mt19937_64 rng(606);
  for (int trial = 0; trial < 40; ++trial) {
    const auto inst = fixtures::random_instance(rng, 6, 10, 10);
    const PinnedLabels labels = assign_subgroups(inst.dataset, spec_with(2000), EvalConfig{});
    const bool kp = trial % 2 == 0;
    const Evaluation ev = kp ? Evaluation::keypoints(inst.dataset, inst.keypoints, EvalConfig{})
                             : Evaluation::detections(inst.dataset, inst.detections, EvalConfig{});
    const auto groups = per_subgroup_metrics(ev, labels);
    for (const auto& g : groups) {
      oracle::Query q;
      q.thresholds = EvalConfig{}.thresholds;
      q.keypoints = kp;
      const double lo = (g.index - 1) * 2000.0, hi = g.index * 2000.0;
      q.counts = [lo, hi](const PersonAnnotation& a) { return a.area > lo && a.area <= hi; };
      const auto ref = oracle::evaluate(inst.dataset, kp ? &inst.keypoints : nullptr,
                                        kp ? nullptr : &inst.detections, q);
      CHECK(std::abs(g.ap - ref.ap) <= 1e-9);
      CHECK(std::abs(g.ar - ref.ar) <= 1e-9);
      if (!kp) CHECK(std::abs(g.detection_rate - ref.rate_at_first) <= 1e-12);
    }
  }
}

TEST_CASE("csv layout") {
  std::vector<SubgroupMetrics> base(3), treated(3);
  for (int i = 0; i < 3; ++i) {
    base[i].index = treated[i].index = i + 1;
    base[i].area_lo = treated[i].area_lo = i * 125 + 1;
    base[i].area_hi = treated[i].area_hi = (i + 1) * 125;
    base[i].num_persons = treated[i].num_persons = 10 - i;
  }
  base[0].ap = 0.25, treated[0].ap = 0.65;
  base[1].ap = 0.5, treated[1].ap = 0.495;
  // bin 3 empty in both runs
  const std::string csv = subgroup_csv(base, treated, SubgroupMetric::kAp);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "subgroup_index,area_lo,area_hi,metric_baseline,metric_treated,percent_change,n_persons");
  std::getline(in, line);
  CHECK(line == "1,1,125,0.250000,0.650000,160.000000,10");
  std::getline(in, line);
  CHECK(line == "2,126,250,0.500000,0.495000,-1.000000,9");
  std::getline(in, line);
  CHECK(line == "3,251,375,,,,8");
}

}
