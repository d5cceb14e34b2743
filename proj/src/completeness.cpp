#include "arag/completeness.hpp"

#include "arag/errors.hpp"

namespace arag {

void CompletenessWeights::validate() const {
    if (!(label_a > 0.0)) raise(Errc::ConfigError, "weights: label_a must be > 0");
    if (!(label_a >= label_b && label_b >= label_c && label_c >= 0.0))
        raise(Errc::ConfigError, "weights: need label_a >= label_b >= label_c >= 0");
}

double CompletenessWeights::for_label(UnitLabel l) const {
    switch (l) {
    case UnitLabel::A: return label_a;
    case UnitLabel::B: return label_b;
    case UnitLabel::C: return label_c;
    }
    return 0.0;
}

void RoutingThresholds::validate() const {
    if (!(0.0 <= warning && warning < direct && direct <= 1.0))
        raise(Errc::ConfigError, "thresholds: need 0 <= warning < direct <= 1");
}

const char* routing_decision_name(RoutingDecision d) {
    switch (d) {
    case RoutingDecision::Direct: return "direct";
    case RoutingDecision::Retrieve: return "retrieve";
    case RoutingDecision::RetrieveWithWarning: return "retrieve_with_warning";
    }
    return "?";
}

LabelCounts count_labels(std::span<const UnitLabel> labels) {
    LabelCounts c;
    for (auto l : labels) {
        switch (l) {
        case UnitLabel::A: ++c.a; break;
        case UnitLabel::B: ++c.b; break;
        case UnitLabel::C: ++c.c; break;
        }
    }
    return c;
}

double compute_completeness(std::span<const UnitLabel> labels, const CompletenessWeights& w) {
    w.validate();
    if (labels.empty()) raise(Errc::EmptyLabels, "compute_completeness: no labels");
    LabelCounts c = count_labels(labels);
    double num = w.label_a * static_cast<double>(c.a) + w.label_b * static_cast<double>(c.b) +
                 w.label_c * static_cast<double>(c.c);
    return num / (w.label_a * static_cast<double>(labels.size()));
}

RoutingDecision route(double completeness, const RoutingThresholds& t) {
    t.validate();
    if (completeness > t.direct) return RoutingDecision::Direct;
    if (completeness < t.warning) return RoutingDecision::RetrieveWithWarning;
    return RoutingDecision::Retrieve;
}

CompletenessReport assess(std::span<const UnitLabel> labels, const CompletenessWeights& w,
                          const RoutingThresholds& t) {
    CompletenessReport r;
    r.counts = count_labels(labels);
    r.n = labels.size();
    r.completeness = compute_completeness(labels, w);
    r.decision = route(r.completeness, t);
    return r;
}

} // namespace arag
