#pragma once

#include "arag/classifier.hpp"

#include <cstddef>
#include <span>

namespace arag {

// Per-label completeness weights; label A must dominate (a >= b >= c, a > 0).
struct CompletenessWeights {
    double label_a = 1.0;
    double label_b = 0.5;
    double label_c = 0.0;

    void validate() const;
    double for_label(UnitLabel l) const;
};

struct RoutingThresholds {
    double direct = 0.6;  // completeness above this answers without retrieval
    double warning = 0.2; // completeness below this retrieves with a warning

    void validate() const; // 0 <= warning < direct <= 1
};

enum class RoutingDecision : std::uint8_t { Direct = 0, Retrieve = 1, RetrieveWithWarning = 2 };

const char* routing_decision_name(RoutingDecision d);

struct LabelCounts {
    std::size_t a = 0, b = 0, c = 0;
    std::size_t total() const { return a + b + c; }
};

LabelCounts count_labels(std::span<const UnitLabel> labels);

// Weighted, normalized fraction of important units:
// (wa*nA + wb*nB + wc*nC) / (wa * n). Throws EmptyLabels.
double compute_completeness(std::span<const UnitLabel> labels, const CompletenessWeights& w);

// Boundary convention: strictly above `direct` goes Direct, strictly below
// `warning` adds the warning flag, the closed interval in between retrieves.
RoutingDecision route(double completeness, const RoutingThresholds& t);

struct CompletenessReport {
    LabelCounts counts;
    std::size_t n = 0;
    double completeness = 0.0;
    RoutingDecision decision = RoutingDecision::Retrieve;
};

CompletenessReport assess(std::span<const UnitLabel> labels, const CompletenessWeights& w,
                          const RoutingThresholds& t);

} // namespace arag
