#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "avcap/attributes.hpp"
#include "avcap/record.hpp"
#include "avcap/result.hpp"

namespace avcap {

// Fraction of records whose audits carry no errors / no missing items / neither.
struct StageQuality {
    double no_error_rate = 0;
    double no_missing_rate = 0;
    double clean_rate = 0;
    // Expressiveness issues are tracked separately and do not affect Clean.
    double expressiveness_rate = 0;  // fraction of records WITH expressiveness findings
    size_t n = 0;
};

using AuditSet = std::map<Attribute, AuditReport>;

Result<StageQuality> stage_quality(const std::vector<AuditSet>& audits);

// Percentages held in fixed-point tenths so Total == Miss + Hall is exact.
struct CaptionErrorScore {
    int64_t miss_tenths = 0;
    int64_t hall_tenths = 0;
    int64_t total_tenths = 0;

    double miss() const { return double(miss_tenths) / 10.0; }
    double hall() const { return double(hall_tenths) / 10.0; }
    double total() const { return double(total_tenths) / 10.0; }
};

CaptionErrorScore caption_error(double miss_pct, double hall_pct);

struct Interval {
    double start_s = 0;
    double end_s = 0;
};

// |a ∩ b| / |a ∪ b|; a zero-length union scores 0 unless both intervals are
// the same point, which scores 1.
double iou(const Interval& a, const Interval& b);

// A prediction is an interval or "not answerable" (which includes parse
// failures); the latter scores IoU 0 and stays in the denominator.
using GroundingPrediction = std::optional<Interval>;

struct GroundingResult {
    std::vector<double> per_query_iou;
    double miou = 0;
    std::map<double, double> r1;  // threshold -> recall fraction
};

Result<GroundingResult> grounding_eval(const std::vector<GroundingPrediction>& preds,
                                       const std::vector<Interval>& golds,
                                       const std::vector<double>& thresholds = {0.3, 0.5, 0.7});

// A parsed QA answer: a letter, or "not answerable" / unparseable (both
// incorrect; they are distinguished in logs, not in accuracy).
struct QaOutcome {
    std::optional<char> letter;  // 'A'..'Z'
};

Result<double> qa_eval(const std::vector<QaOutcome>& answers, const std::vector<char>& golds);

}  // namespace avcap
