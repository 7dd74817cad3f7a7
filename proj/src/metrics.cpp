#include "avcap/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace avcap {

Result<StageQuality> stage_quality(const std::vector<AuditSet>& audits) {
    using R = Result<StageQuality>;
    if (audits.empty()) return R::fail("stage_quality requires at least one audit set");
    StageQuality q;
    q.n = audits.size();
    size_t no_error = 0, no_missing = 0, clean = 0, expressive = 0;
    for (const auto& set : audits) {
        bool record_no_error = true, record_no_missing = true, record_expressive = false;
        for (const auto& [attr, report] : set) {
            if (!report.errors.empty()) record_no_error = false;
            if (!report.missing.empty()) record_no_missing = false;
            if (!report.expressiveness.empty()) record_expressive = true;
        }
        if (record_no_error) ++no_error;
        if (record_no_missing) ++no_missing;
        if (record_no_error && record_no_missing) ++clean;
        if (record_expressive) ++expressive;
    }
    q.no_error_rate = double(no_error) / double(q.n);
    q.no_missing_rate = double(no_missing) / double(q.n);
    q.clean_rate = double(clean) / double(q.n);
    q.expressiveness_rate = double(expressive) / double(q.n);
    return R::ok(q);
}

CaptionErrorScore caption_error(double miss_pct, double hall_pct) {
    CaptionErrorScore s;
    s.miss_tenths = int64_t(std::llround(miss_pct * 10.0));
    s.hall_tenths = int64_t(std::llround(hall_pct * 10.0));
    s.total_tenths = s.miss_tenths + s.hall_tenths;
    return s;
}

double iou(const Interval& a, const Interval& b) {
    double inter = std::min(a.end_s, b.end_s) - std::max(a.start_s, b.start_s);
    if (inter < 0) inter = 0;
    double uni = (a.end_s - a.start_s) + (b.end_s - b.start_s) - inter;
    if (uni <= 0) {
        // Degenerate: both are points. Identical points are a perfect match.
        return (a.start_s == b.start_s && a.end_s == b.end_s) ? 1.0 : 0.0;
    }
    return inter / uni;
}

Result<GroundingResult> grounding_eval(const std::vector<GroundingPrediction>& preds,
                                       const std::vector<Interval>& golds,
                                       const std::vector<double>& thresholds) {
    using R = Result<GroundingResult>;
    if (preds.size() != golds.size())
        return R::fail("prediction/gold length mismatch: " + std::to_string(preds.size()) + " vs " +
                       std::to_string(golds.size()));
    if (preds.empty()) return R::fail("grounding_eval requires at least one pair");

    GroundingResult result;
    result.per_query_iou.reserve(preds.size());
    double sum = 0;
    for (size_t i = 0; i < preds.size(); ++i) {
        double v = preds[i] ? iou(*preds[i], golds[i]) : 0.0;
        result.per_query_iou.push_back(v);
        sum += v;
    }
    result.miou = sum / double(preds.size());
    for (double tau : thresholds) {
        size_t hit = 0;
        for (double v : result.per_query_iou) {
            if (v >= tau) ++hit;
        }
        result.r1[tau] = double(hit) / double(preds.size());
    }
    return R::ok(std::move(result));
}

Result<double> qa_eval(const std::vector<QaOutcome>& answers, const std::vector<char>& golds) {
    using R = Result<double>;
    if (answers.size() != golds.size())
        return R::fail("answer/gold length mismatch: " + std::to_string(answers.size()) + " vs " +
                       std::to_string(golds.size()));
    if (answers.empty()) return R::fail("qa_eval requires at least one pair");
    size_t correct = 0;
    for (size_t i = 0; i < answers.size(); ++i) {
        if (answers[i].letter && *answers[i].letter == golds[i]) ++correct;
    }
    return R::ok(double(correct) / double(answers.size()));
}

}  // namespace avcap
