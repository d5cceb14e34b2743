#pragma once

#include "arag/classifier.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <utility>
#include <vector>

namespace arag {

struct KnowledgeDoc {
    std::string doc_id;
    std::string title; // disease name in the KB schema
    std::string body;
};

// EMR record; reference_diagnosis may be empty for diagnose-only inputs.
struct EmrRecord {
    std::string id;
    std::string text;
    std::string reference_diagnosis;
};

struct TerminologyEntry {
    std::string code;
    std::string canonical;
    std::vector<std::string> synonyms;
};

// Parses one JSON object per non-empty line; reports the offending line on
// error (DataError).
std::vector<std::pair<std::size_t, nlohmann::json>> read_jsonl(const std::string& path);

std::vector<KnowledgeDoc> load_kb(const std::string& path);
std::vector<EmrRecord> load_emr(const std::string& path, bool require_reference);
std::vector<TerminologyEntry> load_terminology(const std::string& path);
std::vector<TrainingExample> load_training(const std::string& path);

void write_lines(const std::string& path, const std::vector<std::string>& lines);

} // namespace arag
