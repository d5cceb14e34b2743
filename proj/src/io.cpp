#include "arag/io.hpp"

#include "arag/errors.hpp"

#include <fstream>
#include <unordered_set>

namespace arag {

namespace {

std::string require_string(const nlohmann::json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key) || !obj.at(key).is_string())
        raise(Errc::DataError, where + ": missing or non-string field \"" + key + "\"");
    return obj.at(key).get<std::string>();
}

std::string loc(const std::string& path, std::size_t line) {
    return path + ":" + std::to_string(line);
}

} // namespace

std::vector<std::pair<std::size_t, nlohmann::json>> read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(Errc::IoFailure, "cannot open: " + path);
    std::vector<std::pair<std::size_t, nlohmann::json>> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded()) raise(Errc::DataError, loc(path, line_no) + ": invalid JSON");
        if (!obj.is_object()) raise(Errc::DataError, loc(path, line_no) + ": expected a JSON object");
        out.emplace_back(line_no, std::move(obj));
    }
    return out;
}

std::vector<KnowledgeDoc> load_kb(const std::string& path) {
    std::vector<KnowledgeDoc> docs;
    std::unordered_set<std::string> seen;
    for (const auto& [line_no, obj] : read_jsonl(path)) {
        KnowledgeDoc d;
        d.doc_id = require_string(obj, "doc_id", loc(path, line_no));
        d.title = require_string(obj, "title", loc(path, line_no));
        d.body = require_string(obj, "body", loc(path, line_no));
        if (d.title.empty() || d.body.empty())
            raise(Errc::DataError, loc(path, line_no) + ": title and body must be non-empty");
        if (!seen.insert(d.doc_id).second)
            raise(Errc::DataError, loc(path, line_no) + ": duplicate doc_id \"" + d.doc_id + "\"");
        docs.push_back(std::move(d));
    }
    if (docs.empty()) raise(Errc::DataError, path + ": no documents");
    return docs;
}

std::vector<EmrRecord> load_emr(const std::string& path, bool require_reference) {
    std::vector<EmrRecord> records;
    for (const auto& [line_no, obj] : read_jsonl(path)) {
        EmrRecord r;
        r.id = require_string(obj, "id", loc(path, line_no));
        r.text = require_string(obj, "text", loc(path, line_no));
        if (r.text.empty()) raise(Errc::DataError, loc(path, line_no) + ": empty record text");
        if (obj.contains("reference_diagnosis"))
            r.reference_diagnosis = require_string(obj, "reference_diagnosis", loc(path, line_no));
        if (require_reference && r.reference_diagnosis.empty())
            raise(Errc::DataError, loc(path, line_no) + ": reference_diagnosis required");
        records.push_back(std::move(r));
    }
    if (records.empty()) raise(Errc::DataError, path + ": no records");
    return records;
}

std::vector<TerminologyEntry> load_terminology(const std::string& path) {
    std::vector<TerminologyEntry> entries;
    std::unordered_set<std::string> seen;
    for (const auto& [line_no, obj] : read_jsonl(path)) {
        TerminologyEntry e;
        e.code = require_string(obj, "code", loc(path, line_no));
        e.canonical = require_string(obj, "canonical", loc(path, line_no));
        if (e.canonical.empty()) raise(Errc::DataError, loc(path, line_no) + ": empty canonical name");
        if (!seen.insert(e.code).second)
            raise(Errc::DataError, loc(path, line_no) + ": duplicate code \"" + e.code + "\"");
        if (obj.contains("synonyms")) {
            if (!obj.at("synonyms").is_array())
                raise(Errc::DataError, loc(path, line_no) + ": synonyms must be an array");
            for (const auto& s : obj.at("synonyms")) e.synonyms.push_back(s.get<std::string>());
        }
        entries.push_back(std::move(e));
    }
    if (entries.empty()) raise(Errc::EmptyTerminology, path + ": no terminology entries");
    return entries;
}

std::vector<TrainingExample> load_training(const std::string& path) {
    std::vector<TrainingExample> examples;
    for (const auto& [line_no, obj] : read_jsonl(path)) {
        TrainingExample e;
        e.text = require_string(obj, "text", loc(path, line_no));
        if (e.text.empty()) raise(Errc::DataError, loc(path, line_no) + ": empty text");
        e.label = label_from_string(require_string(obj, "label", loc(path, line_no)));
        examples.push_back(std::move(e));
    }
    if (examples.empty()) raise(Errc::DataError, path + ": no training examples");
    return examples;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
    std::ofstream out(path);
    if (!out) raise(Errc::IoFailure, "cannot open for write: " + path);
    for (const auto& l : lines) out << l << '\n';
    if (!out) raise(Errc::IoFailure, "write failed: " + path);
}

} // namespace arag
