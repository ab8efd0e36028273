#include "scentrank/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "scentrank/error.hpp"

namespace scentrank {
namespace {

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    return in;
}

std::string location(const std::filesystem::path& path, std::size_t line_no) {
    return path.string() + ":" + std::to_string(line_no);
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool is_blank(std::string_view line) {
    return line.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

std::vector<std::string> split(std::string_view line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(sep, start);
        out.emplace_back(line.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::vector<std::string> split_ws(std::string_view line) {
    std::vector<std::string> out;
    std::istringstream in{std::string(line)};
    std::string field;
    while (in >> field) out.push_back(std::move(field));
    return out;
}

template <class T>
bool parse_number(std::string_view text, T& value) {
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    return ec == std::errc() && ptr == text.data() + text.size();
}

std::string json_string_field(const nlohmann::json& record, const char* key, bool required,
                              const std::filesystem::path& path, std::size_t line_no) {
    auto it = record.find(key);
    if (it == record.end() || it->is_null()) {
        if (required) throw ValidationError(location(path, line_no) + ": missing field \"" + key + "\"");
        return {};
    }
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number_integer()) return std::to_string(it->get<long long>());
    throw ValidationError(location(path, line_no) + ": field \"" + key + "\" must be a string");
}

void warn(const RunLoadOptions& options, std::string message) {
    std::cerr << "warning: " << message << '\n';
    if (options.warnings) options.warnings->push_back(std::move(message));
}

}  // namespace

std::string Passage::full_text() const {
    if (title.empty()) return body;
    return title + " " + body;
}

Corpus::Corpus(std::vector<Passage> passages) : passages_(std::move(passages)) {
    by_id_.reserve(passages_.size());
    for (std::size_t i = 0; i < passages_.size(); ++i) {
        const auto& p = passages_[i];
        if (p.id.empty()) throw ValidationError("passage #" + std::to_string(i + 1) + " has an empty id");
        if (p.body.empty()) throw ValidationError("passage \"" + p.id + "\" has an empty body");
        if (!by_id_.emplace(p.id, i).second) throw ValidationError("duplicate passage id \"" + p.id + "\"");
    }
}

const Passage* Corpus::find(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    return it == by_id_.end() ? nullptr : &passages_[it->second];
}

const Passage& Corpus::at(std::string_view id) const {
    if (const auto* p = find(id)) return *p;
    throw ValidationError("unknown passage id \"" + std::string(id) + "\"");
}

PassageFormat parse_passage_format(std::string_view name) {
    if (name == "jsonl") return PassageFormat::jsonl;
    if (name == "tsv") return PassageFormat::tsv;
    throw ValidationError("unknown passage format \"" + std::string(name) + "\" (expected jsonl or tsv)");
}

Corpus load_passages(const std::filesystem::path& path, PassageFormat format) {
    auto in = open_input(path);
    std::vector<Passage> passages;
    std::unordered_map<std::string, std::size_t> first_line;
    std::string line;
    std::size_t line_no = 0;

    auto add = [&](Passage p) {
        if (p.id.empty()) throw ValidationError(location(path, line_no) + ": empty passage id");
        if (p.body.empty()) throw ValidationError(location(path, line_no) + ": empty passage body");
        auto [it, inserted] = first_line.emplace(p.id, line_no);
        if (!inserted) {
            throw ValidationError(location(path, line_no) + ": duplicate passage id \"" + p.id +
                                  "\" (first seen on line " + std::to_string(it->second) + ")");
        }
        passages.push_back(std::move(p));
    };

    if (format == PassageFormat::jsonl) {
        while (std::getline(in, line)) {
            ++line_no;
            if (is_blank(line)) continue;
            nlohmann::json record;
            try {
                record = nlohmann::json::parse(line);
            } catch (const nlohmann::json::parse_error& e) {
                throw ValidationError(location(path, line_no) + ": malformed json: " + e.what());
            }
            if (!record.is_object()) throw ValidationError(location(path, line_no) + ": expected a json object");
            Passage p;
            p.id = json_string_field(record, "id", true, path, line_no);
            p.title = json_string_field(record, "title", false, path, line_no);
            p.body = json_string_field(record, "contents", true, path, line_no);
            add(std::move(p));
        }
    } else {
        std::size_t id_col = 0, text_col = 1, title_col = 2;
        bool header_seen = false;
        while (std::getline(in, line)) {
            ++line_no;
            strip_cr(line);
            if (line.empty()) continue;
            auto fields = split(line, '\t');
            if (!header_seen) {
                header_seen = true;
                auto col = [&](std::string_view name) -> std::size_t {
                    auto it = std::find(fields.begin(), fields.end(), name);
                    if (it == fields.end()) {
                        throw ValidationError(location(path, line_no) + ": tsv header lacks column \"" +
                                              std::string(name) + "\" (expected id\\ttext\\ttitle)");
                    }
                    return static_cast<std::size_t>(it - fields.begin());
                };
                id_col = col("id");
                text_col = col("text");
                title_col = col("title");
                continue;
            }
            auto needed = std::max({id_col, text_col, title_col}) + 1;
            if (fields.size() < needed) {
                throw ValidationError(location(path, line_no) + ": expected " + std::to_string(needed) +
                                      " tab-separated fields, found " + std::to_string(fields.size()));
            }
            add(Passage{fields[id_col], fields[title_col], fields[text_col]});
        }
    }
    return Corpus(std::move(passages));
}

QADataset::QADataset(std::vector<QAExample> examples) : examples_(std::move(examples)) {
    for (std::size_t i = 0; i < examples_.size(); ++i) {
        const auto& ex = examples_[i];
        if (ex.query_id.empty()) throw ValidationError("qa example #" + std::to_string(i + 1) + " has no query_id");
        if (ex.gold_answers.empty()) throw ValidationError("query \"" + ex.query_id + "\" has no gold answers");
        for (const auto& a : ex.gold_answers) {
            if (a.empty()) throw ValidationError("query \"" + ex.query_id + "\" has an empty gold answer");
        }
        if (!by_id_.emplace(ex.query_id, i).second) {
            throw ValidationError("duplicate query_id \"" + ex.query_id + "\"");
        }
    }
}

const QAExample* QADataset::find(std::string_view query_id) const {
    auto it = by_id_.find(std::string(query_id));
    return it == by_id_.end() ? nullptr : &examples_[it->second];
}

QADataset load_qa(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::vector<QAExample> examples;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ValidationError(location(path, line_no) + ": malformed json: " + e.what());
        }
        if (!record.is_object()) throw ValidationError(location(path, line_no) + ": expected a json object");
        QAExample ex;
        ex.query_id = json_string_field(record, "query_id", true, path, line_no);
        ex.question = json_string_field(record, "question", true, path, line_no);
        auto answers = record.find("answers");
        if (answers == record.end() || !answers->is_array()) {
            throw ValidationError(location(path, line_no) + ": query \"" + ex.query_id +
                                  "\": field \"answers\" must be an array");
        }
        for (const auto& a : *answers) {
            if (!a.is_string()) {
                throw ValidationError(location(path, line_no) + ": query \"" + ex.query_id +
                                      "\": answers must be strings");
            }
            ex.gold_answers.push_back(a.get<std::string>());
        }
        if (ex.gold_answers.empty()) {
            throw ValidationError(location(path, line_no) + ": query \"" + ex.query_id + "\" has an empty answer list");
        }
        examples.push_back(std::move(ex));
    }
    try {
        return QADataset(std::move(examples));
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void RetrievalRun::add_query(std::string query_id, std::vector<RunEntry> entries) {
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].rank != static_cast<int>(i + 1)) {
            throw ValidationError("query \"" + query_id + "\": ranks must be consecutive from 1, found rank " +
                                  std::to_string(entries[i].rank) + " at position " + std::to_string(i + 1));
        }
        if (i > 0 && entries[i].score > entries[i - 1].score) {
            throw ValidationError("query \"" + query_id + "\": score increases at rank " +
                                  std::to_string(entries[i].rank));
        }
    }
    if (by_id_.contains(query_id)) throw ValidationError("duplicate run query \"" + query_id + "\"");
    by_id_.emplace(query_id, queries_.size());
    queries_.emplace_back(std::move(query_id), std::move(entries));
}

const std::vector<RunEntry>* RetrievalRun::find(std::string_view query_id) const {
    auto it = by_id_.find(std::string(query_id));
    return it == by_id_.end() ? nullptr : &queries_[it->second].second;
}

void RetrievalRun::validate_against(const Corpus& corpus) const {
    std::vector<std::string> missing;
    for (const auto& [qid, entries] : queries_) {
        for (const auto& e : entries) {
            if (!corpus.find(e.passage_id)) missing.push_back(qid + "/" + e.passage_id);
        }
    }
    if (missing.empty()) return;
    std::string message = "run references " + std::to_string(missing.size()) + " passage id(s) missing from corpus:";
    constexpr std::size_t kListed = 20;
    for (std::size_t i = 0; i < std::min(missing.size(), kListed); ++i) message += " " + missing[i];
    if (missing.size() > kListed) message += " ...";
    throw ValidationError(message);
}

RetrievalRun RetrievalRun::truncated(std::size_t depth) const {
    RetrievalRun out(name_);
    for (const auto& [qid, entries] : queries_) {
        auto n = std::min(depth, entries.size());
        out.add_query(qid, std::vector<RunEntry>(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(n)));
    }
    return out;
}

RunFormat parse_run_format(std::string_view name) {
    if (name == "trec") return RunFormat::trec;
    if (name == "jsonl") return RunFormat::jsonl;
    throw ValidationError("unknown run format \"" + std::string(name) + "\" (expected trec or jsonl)");
}

RetrievalRun load_run(const std::filesystem::path& path, RunFormat format, const RunLoadOptions& options) {
    auto in = open_input(path);
    std::vector<std::string> order;
    std::unordered_map<std::string, std::vector<RunEntry>> grouped;
    std::string tag;
    std::string line;
    std::size_t line_no = 0;

    auto push = [&](std::string qid, RunEntry entry) {
        auto [it, inserted] = grouped.try_emplace(qid);
        if (inserted) order.push_back(qid);
        it->second.push_back(std::move(entry));
    };

    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (is_blank(line)) continue;
        RunEntry entry;
        std::string qid;
        if (format == RunFormat::trec) {
            auto f = split_ws(line);
            if (f.size() != 6) {
                throw ValidationError(location(path, line_no) + ": expected 6 fields \"qid Q0 pid rank score tag\"");
            }
            qid = f[0];
            entry.passage_id = f[2];
            if (!parse_number(f[3], entry.rank) || entry.rank < 1) {
                throw ValidationError(location(path, line_no) + ": bad rank \"" + f[3] + "\"");
            }
            try {
                std::size_t used = 0;
                entry.score = std::stod(f[4], &used);
                if (used != f[4].size()) throw std::invalid_argument(f[4]);
            } catch (const std::exception&) {
                throw ValidationError(location(path, line_no) + ": bad score \"" + f[4] + "\"");
            }
            if (tag.empty()) tag = f[5];
        } else {
            nlohmann::json record;
            try {
                record = nlohmann::json::parse(line);
                qid = json_string_field(record, "query_id", true, path, line_no);
                entry.passage_id = json_string_field(record, "passage_id", true, path, line_no);
                entry.rank = record.at("rank").get<int>();
                entry.score = record.at("score").get<double>();
                if (tag.empty() && record.contains("tag")) tag = record["tag"].get<std::string>();
            } catch (const nlohmann::json::exception& e) {
                throw ValidationError(location(path, line_no) + ": malformed run record: " + e.what());
            }
            if (entry.rank < 1) throw ValidationError(location(path, line_no) + ": rank must be positive");
        }
        push(std::move(qid), std::move(entry));
    }

    RetrievalRun run(tag.empty() ? std::string("run") : tag);
    for (const auto& qid : order) {
        auto& entries = grouped[qid];
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (entries[i].rank != static_cast<int>(i + 1)) {
                throw ValidationError(path.string() + ": query \"" + qid +
                                      "\": ranks must be consecutive and increasing from 1; expected " +
                                      std::to_string(i + 1) + ", found " + std::to_string(entries[i].rank));
            }
        }
        bool monotone = std::is_sorted(entries.begin(), entries.end(),
                                       [](const RunEntry& a, const RunEntry& b) { return a.score > b.score; });
        if (!monotone) {
            warn(options, path.string() + ": query \"" + qid +
                              "\": scores not non-increasing with rank; re-sorted by score");
            std::stable_sort(entries.begin(), entries.end(),
                             [](const RunEntry& a, const RunEntry& b) { return a.score > b.score; });
            for (std::size_t i = 0; i < entries.size(); ++i) entries[i].rank = static_cast<int>(i + 1);
        }
        run.add_query(qid, std::move(entries));
    }
    if (options.corpus) run.validate_against(*options.corpus);
    return run;
}

void write_run(const RetrievalRun& run, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write run file " + path.string());
    const std::string tag = run.retriever_name().empty() ? "run" : run.retriever_name();
    char score[64];
    for (const auto& [qid, entries] : run.queries()) {
        for (const auto& e : entries) {
            std::snprintf(score, sizeof score, "%.6f", e.score);
            out << qid << " Q0 " << e.passage_id << ' ' << e.rank << ' ' << score << ' ' << tag << '\n';
        }
    }
    if (!out) throw ValidationError("failed writing run file " + path.string());
}

void QrelSet::add(const std::string& query_id, const std::string& passage_id, int grade) {
    if (grade < 0) {
        throw ValidationError("negative relevance grade for " + query_id + "/" + passage_id);
    }
    judgments_[query_id][passage_id] = grade;
}

int QrelSet::grade(std::string_view query_id, std::string_view passage_id) const {
    auto q = judgments_.find(std::string(query_id));
    if (q == judgments_.end()) return 0;
    auto d = q->second.find(std::string(passage_id));
    return d == q->second.end() ? 0 : d->second;
}

std::vector<int> QrelSet::grades(std::string_view query_id) const {
    std::vector<int> out;
    auto q = judgments_.find(std::string(query_id));
    if (q == judgments_.end()) return out;
    for (const auto& [pid, g] : q->second) out.push_back(g);
    return out;
}

QrelSet load_qrels(const std::filesystem::path& path) {
    auto in = open_input(path);
    QrelSet qrels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        auto f = split_ws(line);
        if (f.size() != 4) throw ValidationError(location(path, line_no) + ": expected \"qid 0 pid grade\"");
        int grade = 0;
        if (!parse_number(f[3], grade)) throw ValidationError(location(path, line_no) + ": bad grade \"" + f[3] + "\"");
        if (grade < 0) throw ValidationError(location(path, line_no) + ": relevance grade must be >= 0");
        qrels.add(f[0], f[2], grade);
    }
    return qrels;
}

}  // namespace scentrank
