#pragma once

#include "arag/io.hpp"

#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace arag {

// Diagnosis mentions normalized into terminology codes; mentions that matched
// nothing above the threshold land in `unlinked`.
struct DiagnosisSet {
    std::set<std::string> codes;
    std::vector<std::string> unlinked;
};

struct EvalMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t n_records = 0;
};

// Splits the diagnosis portion on list delimiters (",", "，", ";", "；", "、",
// newline, numbered-list markers) after stripping a leading "Diagnosis:"-style
// header; empties are dropped.
std::vector<std::string> extract_mentions(std::string_view text);

// Links each mention to the entry (over canonical + synonyms) with maximum
// normalized-Levenshtein similarity; below-threshold mentions stay unlinked.
// Ties break by terminology order. Throws EmptyTerminology.
DiagnosisSet link(std::span<const std::string> mentions,
                  std::span<const TerminologyEntry> terminology, double threshold = 0.5);

// Set-level P/R/F1. Empty pred gives P=0; empty ref gives R=0 (keeps the
// precision/recall symmetry exact for arbitrary set pairs).
EvalMetrics metrics(const DiagnosisSet& pred, const DiagnosisSet& ref);

struct RecordEval {
    std::string id;
    EvalMetrics per_record;
    std::size_t intersection = 0;
    std::size_t pred_size = 0;
    std::size_t ref_size = 0;
};

// Micro average: summed intersection / pred / ref sizes across records.
EvalMetrics aggregate(std::span<const RecordEval> records);

} // namespace arag
