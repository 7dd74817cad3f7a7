#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "avcap/metrics.hpp"

using namespace avcap;

namespace {

AuditSet audit_set(bool with_error, bool with_missing, bool with_expressiveness = false) {
    AuditSet set;
    for (auto a : kAllAttributes) set[a] = AuditReport{};
    if (with_error) set[Attribute::Scene].errors.push_back({"snippet", "why"});
    if (with_missing) set[Attribute::Camera].missing.push_back({"pan", "why"});
    if (with_expressiveness) set[Attribute::Narrative].expressiveness.push_back("wordy");
    return set;
}

}  // namespace

TEST_CASE("stage_quality on clean and mixed sets") {
    std::vector<AuditSet> all_clean(4, audit_set(false, false));
    auto q = stage_quality(all_clean);
    REQUIRE(q);
    CHECK(q.value().no_error_rate == doctest::Approx(1.0));
    CHECK(q.value().no_missing_rate == doctest::Approx(1.0));
    CHECK(q.value().clean_rate == doctest::Approx(1.0));

    std::vector<AuditSet> half = {audit_set(false, false), audit_set(false, true)};
    auto h = stage_quality(half);
    REQUIRE(h);
    CHECK(h.value().no_error_rate == doctest::Approx(1.0));
    CHECK(h.value().no_missing_rate == doctest::Approx(0.5));
    CHECK(h.value().clean_rate == doctest::Approx(0.5));

    CHECK_FALSE(stage_quality({}));
}

TEST_CASE("expressiveness findings do not affect Clean") {
    std::vector<AuditSet> sets = {audit_set(false, false, true)};
    auto q = stage_quality(sets);
    REQUIRE(q);
    CHECK(q.value().clean_rate == doctest::Approx(1.0));
    CHECK(q.value().expressiveness_rate == doctest::Approx(1.0));
}

TEST_CASE("stage_quality matches a brute-force recount on random sets") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<AuditSet> sets;
        size_t n = 1 + rng() % 50;
        for (size_t i = 0; i < n; ++i) sets.push_back(audit_set(rng() % 2, rng() % 2, rng() % 2));

        // Independent recount.
        size_t no_error = 0, no_missing = 0, clean = 0;
        for (const auto& set : sets) {
            size_t errors = 0, missing = 0;
            for (const auto& [a, rep] : set) {
                errors += rep.errors.size();
                missing += rep.missing.size();
            }
            if (errors == 0) ++no_error;
            if (missing == 0) ++no_missing;
            if (errors == 0 && missing == 0) ++clean;
        }

        auto q = stage_quality(sets);
        REQUIRE(q);
        CHECK(q.value().no_error_rate == doctest::Approx(double(no_error) / n).epsilon(1e-15));
        CHECK(q.value().no_missing_rate == doctest::Approx(double(no_missing) / n).epsilon(1e-15));
        CHECK(q.value().clean_rate == doctest::Approx(double(clean) / n).epsilon(1e-15));
        CHECK(q.value().clean_rate <=
              std::min(q.value().no_error_rate, q.value().no_missing_rate) + 1e-15);
    }
}

TEST_CASE("caption_error holds the exact fixed-point identity") {
    auto g = caption_error(20.5, 15.4);
    CHECK(g.total() == doctest::Approx(35.9).epsilon(1e-12));
    CHECK(g.total_tenths == 359);

    auto zero = caption_error(0, 0);
    CHECK(zero.total_tenths == 0);

    // 18.1 + 13.3 in doubles drifts; fixed point does not.
    auto drift = caption_error(18.1, 13.3);
    CHECK(drift.total_tenths == 314);
    CHECK(drift.total() == doctest::Approx(31.4).epsilon(1e-12));

    std::mt19937_64 rng(5);
    for (int i = 0; i < 1000; ++i) {
        double miss = double(rng() % 1000) / 10.0;
        double hall = double(rng() % 1000) / 10.0;
        auto score = caption_error(miss, hall);
        CHECK(score.total_tenths == score.miss_tenths + score.hall_tenths);
    }
}

TEST_CASE("iou basics") {
    CHECK(iou({0, 10}, {0, 10}) == doctest::Approx(1.0));
    CHECK(iou({0, 10}, {20, 30}) == doctest::Approx(0.0));
    CHECK(iou({0, 10}, {5, 15}) == doctest::Approx(5.0 / 15.0).epsilon(1e-12));
    // symmetry
    CHECK(iou({3, 7}, {5, 9}) == doctest::Approx(iou({5, 9}, {3, 7})).epsilon(1e-15));
    // degenerate points
    CHECK(iou({4, 4}, {4, 4}) == doctest::Approx(1.0));
    CHECK(iou({4, 4}, {5, 5}) == doctest::Approx(0.0));
}

TEST_CASE("grounding_eval basics") {
    std::vector<Interval> golds = {{0, 10}, {20, 30}};
    std::vector<GroundingPrediction> exact = {Interval{0, 10}, Interval{20, 30}};
    auto r = grounding_eval(exact, golds);
    REQUIRE(r);
    CHECK(r.value().miou == doctest::Approx(1.0));
    for (const auto& [tau, recall] : r.value().r1) CHECK(recall == doctest::Approx(1.0));

    std::vector<GroundingPrediction> mixed = {Interval{0, 10}, std::nullopt};
    auto m = grounding_eval(mixed, golds);
    REQUIRE(m);
    CHECK(m.value().miou == doctest::Approx(0.5));
    CHECK(m.value().r1.at(0.5) == doctest::Approx(0.5));

    CHECK_FALSE(grounding_eval({Interval{0, 1}}, golds));  // length mismatch
    CHECK_FALSE(grounding_eval({}, {}));                   // empty
}

TEST_CASE("grounding_eval matches a brute-force oracle on 200 random pairs") {
    std::mt19937_64 rng(23);
    std::vector<GroundingPrediction> preds;
    std::vector<Interval> golds;
    for (int i = 0; i < 200; ++i) {
        double ga = double(rng() % 1800) / 10.0;
        double gb = ga + double(rng() % 300) / 10.0;
        golds.push_back({ga, gb});
        if (rng() % 10 == 0) {
            preds.push_back(std::nullopt);
        } else {
            double pa = double(rng() % 1800) / 10.0;
            double pb = pa + double(rng() % 300) / 10.0;
            preds.push_back(Interval{pa, pb});
        }
    }
    auto result = grounding_eval(preds, golds);
    REQUIRE(result);

    // Oracle: recompute everything the slow way.
    double sum = 0;
    std::map<double, size_t> hits{{0.3, 0}, {0.5, 0}, {0.7, 0}};
    for (size_t i = 0; i < preds.size(); ++i) {
        double v = 0;
        if (preds[i]) {
            double lo = std::max(preds[i]->start_s, golds[i].start_s);
            double hi = std::min(preds[i]->end_s, golds[i].end_s);
            double inter = hi > lo ? hi - lo : 0;
            double uni = (preds[i]->end_s - preds[i]->start_s) +
                         (golds[i].end_s - golds[i].start_s) - inter;
            v = uni > 0 ? inter / uni : (preds[i]->start_s == golds[i].start_s &&
                                         preds[i]->end_s == golds[i].end_s ? 1.0 : 0.0);
        }
        sum += v;
        for (auto& [tau, count] : hits) {
            if (v >= tau) ++count;
        }
    }
    CHECK(result.value().miou == doctest::Approx(sum / 200.0).epsilon(1e-12));
    for (const auto& [tau, count] : hits)
        CHECK(result.value().r1.at(tau) == doctest::Approx(double(count) / 200.0).epsilon(1e-12));

    // R1 monotonicity in the threshold.
    CHECK(result.value().r1.at(0.3) >= result.value().r1.at(0.5));
    CHECK(result.value().r1.at(0.5) >= result.value().r1.at(0.7));
}

TEST_CASE("qa_eval counts N/A and parse failures as incorrect") {
    // [A, N/A, B] against [A, C, B]: 2 of 3.
    std::vector<QaOutcome> answers = {{'A'}, {std::nullopt}, {'B'}};
    std::vector<char> golds = {'A', 'C', 'B'};
    auto acc = qa_eval(answers, golds);
    REQUIRE(acc);
    CHECK(acc.value() == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

    CHECK(qa_eval({{'A'}, {'B'}}, {'A', 'B'}).value() == doctest::Approx(1.0));
    CHECK(qa_eval({{std::nullopt}, {std::nullopt}}, {'A', 'B'}).value() == doctest::Approx(0.0));
    CHECK_FALSE(qa_eval({{'A'}}, {'A', 'B'}));
}
