#include <doctest.h>

#include <random>

#include "oracle/oracles.hpp"
#include "srpose/metrics.hpp"
#include "support/fixtures.hpp"

using namespace srpose;

namespace {

PersonAnnotation one_keypoint_person(double area, std::size_t which) {
  PersonAnnotation gt;
  gt.id = 1;
  gt.area = area;
  gt.keypoints[which] = {50.0, 60.0, 2};
  return gt;
}

PredKeypoints copy_of(const PersonAnnotation& gt) {
  PredKeypoints p{};
  for (std::size_t i = 0; i < kNumKeypoints; ++i) p[i] = {gt.keypoints[i].x, gt.keypoints[i].y, 1.0};
  return p;
}

void check_against_oracle(const fixtures::RandomInstance& inst, bool keypoints,
                          const EvalConfig& config, const GtSelector& sel) {
  const Evaluation ev = keypoints ? Evaluation::keypoints(inst.dataset, inst.keypoints, config)
                                  : Evaluation::detections(inst.dataset, inst.detections, config);
  const MatchTable table = ev.match(sel);
  oracle::Query q;
  q.thresholds = config.thresholds;
  q.max_dets = config.max_detections;
  q.keypoints = keypoints;
  q.counts = sel.counts;
  if (sel.prediction_range) q.pred_range = {sel.prediction_range->min, sel.prediction_range->max};
  const auto ref = oracle::evaluate(inst.dataset, keypoints ? &inst.keypoints : nullptr,
                                    keypoints ? nullptr : &inst.detections, q);

  // Library entries index the per-image prediction list; map back to the
  // global record index the oracle reports.
  std::map<std::int64_t, std::vector<std::size_t>> per_image;
  const std::size_t n = keypoints ? inst.keypoints.size() : inst.detections.size();
  for (std::size_t i = 0; i < n; ++i) {
    per_image[keypoints ? inst.keypoints[i].image_id : inst.detections[i].image_id].push_back(i);
  }
  for (std::size_t t = 0; t < config.thresholds.size(); ++t) {
    REQUIRE(table.images.size() == ref.matches[t].size());
    for (std::size_t im = 0; im < table.images.size(); ++im) {
      const auto& got = table.images[im].per_threshold[t];
      const auto& want = ref.matches[t][im];
      REQUIRE(got.size() == want.size());
      const auto& idx = per_image[table.images[im].image_id];
      for (std::size_t k = 0; k < got.size(); ++k) {
        CHECK(idx[got[k].prediction] == want[k].record);
        CHECK(got[k].gt_id == want[k].gt);
        CHECK(got[k].ignored == want[k].ignored);
      }
    }
  }
  const ApAr score = average_precision(table);
  CHECK(std::abs(score.ap - ref.ap) <= 1e-6);
  CHECK(std::abs(score.ar - ref.ar) <= 1e-6);
  if (!keypoints) CHECK(std::abs(detection_rate(table, 0.5) - ref.rate_at_first) <= 1e-12);
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("oks analytic values") {
  const Falloff k = coco_falloff();
  SUBCASE("exact match is 1") {
    const Dataset ds = fixtures::three_image_dataset();
    for (const auto& a : ds.annotations()) {
      if (a.num_visible() == 0) continue;
      CHECK(std::abs(oks(copy_of(a), a, k) - 1.0) <= 1e-12);
    }
  }
  SUBCASE("single keypoint at s*k*sqrt(2) gives exp(-1)") {
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
      const double area = 2500.0 + 100.0 * i;
      const PersonAnnotation gt = one_keypoint_person(area, i);
      PredKeypoints p = copy_of(gt);
      const double d = std::sqrt(area) * k[i] * std::sqrt(2.0);
      p[i].x += d * 0.6;
      p[i].y -= d * 0.8;
      CHECK(std::abs(oks(p, gt, k) - std::exp(-1.0)) <= 1e-9);
    }
  }
  SUBCASE("two keypoints, one exact") {
    PersonAnnotation gt = one_keypoint_person(4000.0, 5);
    gt.keypoints[9] = {80.0, 90.0, 1};
    PredKeypoints p = copy_of(gt);
    p[9].x += std::sqrt(4000.0) * k[9] * std::sqrt(2.0);
    CHECK(std::abs(oks(p, gt, k) - (1.0 + std::exp(-1.0)) / 2.0) <= 1e-9);
    CHECK(oks(p, gt, k) == doctest::Approx(0.683940).epsilon(1e-6));
  }
  SUBCASE("no visible keypoint is an error") {
    PersonAnnotation gt;
    gt.area = 100;
    CHECK_THROWS_AS(oks(PredKeypoints{}, gt, k), std::domain_error);
  }
}

TEST_CASE("oks invariances") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 200.0);
  std::normal_distribution<double> g(0.0, 5.0);
  const Falloff k = coco_falloff();
  for (int t = 0; t < 300; ++t) {
    PersonAnnotation gt;
    gt.area = 500 + u(rng) * 20;
    for (auto& kp : gt.keypoints) kp = {u(rng), u(rng), static_cast<int>(rng() % 3)};
    gt.keypoints[0].visibility = 2;
    PredKeypoints p{};
    for (std::size_t i = 0; i < kNumKeypoints; ++i) p[i] = {gt.keypoints[i].x + g(rng), gt.keypoints[i].y + g(rng), 1};
    const double base = oks(p, gt, k);
    CHECK(std::abs(base - oracle::oks(p, gt)) <= 1e-12);

    const double dx = u(rng) - 100, dy = u(rng) - 100, s = 0.25 + u(rng) / 50;
    PersonAnnotation moved = gt, scaled = gt;
    PredKeypoints pm = p, ps = p;
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
      moved.keypoints[i].x += dx, moved.keypoints[i].y += dy;
      pm[i].x += dx, pm[i].y += dy;
      scaled.keypoints[i].x *= s, scaled.keypoints[i].y *= s;
      ps[i].x *= s, ps[i].y *= s;
    }
    scaled.area *= s * s;
    CHECK(oks(pm, moved, k) == doctest::Approx(base).epsilon(1e-9));
    CHECK(oks(ps, scaled, k) == doctest::Approx(base).epsilon(1e-9));

    // Moving one visible keypoint further away never raises the score.
    const std::size_t i = rng() % kNumKeypoints;
    PredKeypoints far = p;
    far[i].x = gt.keypoints[i].x + 1.5 * (p[i].x - gt.keypoints[i].x);
    far[i].y = gt.keypoints[i].y + 1.5 * (p[i].y - gt.keypoints[i].y);
    CHECK(oks(far, gt, k) <= base);
  }
}

TEST_CASE("iou") {
  CHECK(iou({0, 0, 2, 2}, {0, 0, 2, 2}) == 1.0);
  CHECK(iou({0, 0, 2, 2}, {5, 5, 2, 2}) == 0.0);
  CHECK(iou({0, 0, 2, 2}, {1, 1, 2, 2}) == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
  CHECK(iou({0, 0, 0, 0}, {0, 0, 0, 0}) == 0.0);
  CHECK(crowd_overlap({0, 0, 2, 2}, {1, 0, 10, 10}) == 0.5);
}

TEST_CASE("greedy matching basics") {
  EvalConfig cfg;
  const std::vector<GtCandidate> one_gt = {{7, false, false}};

  SUBCASE("identical prediction matches at every threshold") {
    const std::vector<PredCandidate> p = {{0.9, 100}};
    const std::vector<double> sim = {1.0};
    const auto m = match_image(1, p, one_gt, sim, cfg);
    for (const auto& row : m.per_threshold) {
      REQUIRE(row.size() == 1);
      CHECK(row[0].gt_id == 7);
      CHECK(row[0].true_positive());
    }
  }

  SUBCASE("two predictions on one person: higher score wins") {
    const std::vector<PredCandidate> p = {{0.4, 100}, {0.8, 100}};
    const std::vector<double> sim = {0.99, 0.95};
    const auto m = match_image(1, p, one_gt, sim, cfg);
    const auto& row = m.per_threshold[0];
    CHECK(row[0].prediction == 1);
    CHECK(row[0].true_positive());
    CHECK(row[1].prediction == 0);
    CHECK_FALSE(row[1].gt_id.has_value());
    CHECK_FALSE(row[1].ignored);
  }

  SUBCASE("equal similarity goes to the lowest annotation id") {
    const std::vector<GtCandidate> gts = {{9, false, false}, {3, false, false}};
    const std::vector<PredCandidate> p = {{0.9, 100}};
    const std::vector<double> sim = {0.8, 0.8};
    CHECK(match_image(1, p, gts, sim, cfg).per_threshold[0][0].gt_id == 3);
  }

  SUBCASE("crowds absorb any number of predictions") {
    const std::vector<GtCandidate> gts = {{1, true, true}};
    const std::vector<PredCandidate> p = {{0.9, 100}, {0.8, 100}, {0.7, 100}};
    const std::vector<double> sim = {0.9, 0.9, 0.9};
    const auto m = match_image(1, p, gts, sim, cfg);
    for (const auto& e : m.per_threshold[0]) {
      CHECK(e.ignored);
      CHECK(e.gt_id == 1);
    }
  }

  SUBCASE("counted ground truths take priority over ignore regions") {
    const std::vector<GtCandidate> gts = {{1, true, true}, {2, false, false}};
    const std::vector<PredCandidate> p = {{0.9, 100}};
    const std::vector<double> sim = {0.99, 0.6};
    const auto m = match_image(1, p, gts, sim, cfg);
    const auto& e = m.per_threshold[0][0];
    CHECK(e.gt_id == 2);
    CHECK(e.true_positive());
  }

  SUBCASE("max detections truncates by score") {
    EvalConfig small = cfg;
    small.max_detections = 2;
    const std::vector<PredCandidate> p = {{0.1, 1}, {0.3, 1}, {0.2, 1}};
    const std::vector<double> sim = {0, 0, 0};
    const auto row = match_image(1, p, one_gt, sim, small).per_threshold[0];
    REQUIRE(row.size() == 2);
    CHECK(row[0].prediction == 1);
    CHECK(row[1].prediction == 2);
  }

  SUBCASE("empty inputs give an empty table") {
    const auto m = match_image(1, {}, {}, {}, cfg);
    CHECK(m.gt_ids.empty());
    for (const auto& row : m.per_threshold) CHECK(row.empty());
  }
}

TEST_CASE("average precision edge cases") {
  const Dataset ds = fixtures::three_image_dataset();
  EvalConfig cfg;

  SUBCASE("perfect predictions") {
    const auto kps = fixtures::perfect_keypoints(ds);
    const MetricReport rep = evaluate(Evaluation::keypoints(ds, kps, cfg));
    CHECK(rep.ap == 1.0);
    CHECK(rep.ar == 1.0);
    CHECK(rep.num_gts == 4);
    CHECK(rep.range("small")->num_gts == 1);
    CHECK(rep.range("medium")->ap == 1.0);
    CHECK(rep.range("large")->ar == 1.0);
  }

  SUBCASE("no predictions") {
    const std::vector<KeypointRecord> none;
    const MetricReport rep = evaluate(Evaluation::keypoints(ds, none, cfg));
    CHECK(rep.ap == 0.0);
    CHECK(rep.ar == 0.0);
  }

  SUBCASE("a range with no people reports the sentinel") {
    EvalConfig c = cfg;
    c.area_ranges.push_back({"tiny", 0, 1});
    const auto kps = fixtures::perfect_keypoints(ds);
    const MetricReport rep = evaluate(Evaluation::keypoints(ds, kps, c));
    CHECK(rep.range("tiny")->ap == kNoData);
    CHECK(rep.range("tiny")->ar == kNoData);
  }

  SUBCASE("removing a prediction costs exactly its share of recall") {
    for (const bool kp : {true, false}) {
      auto kps = fixtures::perfect_keypoints(ds);
      auto dets = fixtures::perfect_detections(ds);
      const std::size_t n = kp ? kps.size() : dets.size();
      kp ? (void)kps.erase(kps.begin() + 1) : (void)dets.erase(dets.begin() + 1);
      const MetricReport rep = kp ? evaluate(Evaluation::keypoints(ds, kps, cfg))
                                  : evaluate(Evaluation::detections(ds, dets, cfg));
      CHECK(std::abs(rep.ar - (1.0 - 1.0 / static_cast<double>(n))) <= 1e-12);
      CHECK(rep.ap < 1.0);
    }
  }
}

TEST_CASE("detection rate") {
  const Dataset ds = fixtures::three_image_dataset();
  EvalConfig cfg;
  auto dets = fixtures::perfect_detections(ds);
  CHECK(detection_rate(Evaluation::detections(ds, dets, cfg).match()) == 1.0);
  const std::vector<DetectionRecord> none;
  CHECK(detection_rate(Evaluation::detections(ds, none, cfg).match()) == 0.0);

  // Four counted people; move one box far away.
  std::vector<PersonAnnotation> anns;
  for (const auto& a : ds.annotations()) {
    if (a.id <= 4) anns.push_back(a);
  }
  const Dataset four(ds.images(), anns);
  auto d4 = fixtures::perfect_detections(four);
  d4[2].bbox.x += 500;
  CHECK(detection_rate(Evaluation::detections(four, d4, cfg).match(), 0.5) == 0.75);
  CHECK_THROWS_AS(detection_rate(Evaluation::detections(four, d4, cfg).match(), 0.52),
                  std::invalid_argument);
}

TEST_CASE("randomized instances agree with the brute-force oracle") {
  std::mt19937_64 rng(2024);
  EvalConfig cfg;
  for (int trial = 0; trial < 150; ++trial) {
    const auto inst = fixtures::random_instance(rng, 6, 10, 10);
    const bool kp = trial % 2 == 0;
    check_against_oracle(inst, kp, cfg, {});
    const auto& range = cfg.area_ranges[static_cast<std::size_t>(trial % 3)];
    GtSelector sel;
    sel.prediction_range = range;
    sel.counts = [range](const PersonAnnotation& a) { return range.contains(a.area); };
    check_against_oracle(inst, kp, cfg, sel);
  }
}

TEST_CASE("scores matter only through their order") {
  std::mt19937_64 rng(55);
  EvalConfig cfg;
  for (int trial = 0; trial < 50; ++trial) {
    auto inst = fixtures::random_instance(rng, 5, 8, 10);
    const auto before = evaluate(Evaluation::keypoints(inst.dataset, inst.keypoints, cfg));
    for (auto& k : inst.keypoints) k.score = std::exp(3.0 * k.score) - 7.0;
    const auto after = evaluate(Evaluation::keypoints(inst.dataset, inst.keypoints, cfg));
    CHECK(before.ap == doctest::Approx(after.ap).epsilon(1e-12));
    CHECK(before.ar == doctest::Approx(after.ar).epsilon(1e-12));
  }
}

TEST_CASE("bounds on random instances") {
  std::mt19937_64 rng(77);
  EvalConfig cfg;
  for (int trial = 0; trial < 100; ++trial) {
    const auto inst = fixtures::random_instance(rng, 4, 6, 8);
    for (const bool kp : {true, false}) {
      const auto rep = kp ? evaluate(Evaluation::keypoints(inst.dataset, inst.keypoints, cfg))
                          : evaluate(Evaluation::detections(inst.dataset, inst.detections, cfg));
      for (const double v : {rep.ap, rep.ar}) CHECK((v == kNoData || (v >= 0.0 && v <= 1.0)));
    }
  }
}

TEST_CASE("a lower-scored duplicate of a true positive never raises AP") {
  // Synthetic people never overlap, so a duplicate can only compete for the
  // person its original already claimed.
  std::mt19937_64 rng(78);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  EvalConfig cfg;
  for (int trial = 0; trial < 100; ++trial) {
    synth::Spec spec;
    spec.num_images = 4;
    spec.seed = trial;
    const Dataset ds = synth::make_fixture(spec).dataset;
    std::vector<DetectionRecord> dets;
    for (const auto& a : ds.annotations()) {
      const double j = 0.3 * a.bbox.w * u(rng);
      dets.push_back({a.image_id, {a.bbox.x + j, a.bbox.y, a.bbox.w, a.bbox.h}, u(rng), std::nullopt});
    }
    const double base = evaluate(Evaluation::detections(ds, dets, cfg)).ap;
    DetectionRecord dup = dets[rng() % dets.size()];
    dup.score = -1.0;
    dets.push_back(dup);
    CHECK(evaluate(Evaluation::detections(ds, dets, cfg)).ap <= base);
  }
}

TEST_CASE("config validation") {
  EvalConfig c;
  CHECK_NOTHROW(c.validate());
  c.thresholds = {0.5, 0.5};
  CHECK_THROWS(c.validate());
  c = EvalConfig{};
  c.falloff[3] = 0;
  CHECK_THROWS(c.validate());
  c = EvalConfig{};
  c.area_ranges.push_back({"overlap", 500, 2000});
  CHECK_THROWS(c.validate());
}

}
