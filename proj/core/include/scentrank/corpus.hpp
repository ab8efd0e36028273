#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace scentrank {

struct Passage {
    std::string id;
    std::string title;
    std::string body;

    /// Title and body joined by a single space (just the body when untitled).
    std::string full_text() const;

    bool operator==(const Passage&) const = default;
};

/// Immutable passage collection with id lookup.
class Corpus {
  public:
    Corpus() = default;
    /// Throws ValidationError on an empty or duplicate id, or an empty body.
    explicit Corpus(std::vector<Passage> passages);

    std::size_t size() const noexcept { return passages_.size(); }
    bool empty() const noexcept { return passages_.empty(); }
    std::span<const Passage> passages() const noexcept { return passages_; }

    const Passage* find(std::string_view id) const;
    /// Throws ValidationError for an unknown id.
    const Passage& at(std::string_view id) const;

  private:
    std::vector<Passage> passages_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

enum class PassageFormat { jsonl, tsv };

/// jsonl: {"id", "title"?, "contents"} per line. tsv: header "id\ttext\ttitle".
Corpus load_passages(const std::filesystem::path& path, PassageFormat format);
PassageFormat parse_passage_format(std::string_view name);

struct QAExample {
    std::string query_id;
    std::string question;
    std::vector<std::string> gold_answers;
};

class QADataset {
  public:
    QADataset() = default;
    explicit QADataset(std::vector<QAExample> examples);

    std::size_t size() const noexcept { return examples_.size(); }
    std::span<const QAExample> examples() const noexcept { return examples_; }
    const QAExample* find(std::string_view query_id) const;

  private:
    std::vector<QAExample> examples_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

/// jsonl with "query_id", "question", "answers". File order is preserved.
QADataset load_qa(const std::filesystem::path& path);

struct RunEntry {
    std::string passage_id;
    double score = 0.0;
    int rank = 0;

    bool operator==(const RunEntry&) const = default;
};

/// Ranked candidate lists per query, queries kept in insertion order.
class RetrievalRun {
  public:
    using QueryList = std::pair<std::string, std::vector<RunEntry>>;

    RetrievalRun() = default;
    explicit RetrievalRun(std::string retriever_name) : name_(std::move(retriever_name)) {}

    const std::string& retriever_name() const noexcept { return name_; }
    void set_retriever_name(std::string name) { name_ = std::move(name); }

    /// Validates consecutive ranks 1..n and non-increasing scores.
    void add_query(std::string query_id, std::vector<RunEntry> entries);

    const std::vector<RunEntry>* find(std::string_view query_id) const;
    std::span<const QueryList> queries() const noexcept { return queries_; }
    std::size_t size() const noexcept { return queries_.size(); }
    bool empty() const noexcept { return queries_.empty(); }

    /// Throws ValidationError listing every passage id absent from the corpus.
    void validate_against(const Corpus& corpus) const;

    /// Copy keeping at most `depth` candidates per query.
    RetrievalRun truncated(std::size_t depth) const;

    bool operator==(const RetrievalRun& other) const { return queries_ == other.queries_; }

  private:
    std::string name_;
    std::vector<QueryList> queries_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

enum class RunFormat { trec, jsonl };
RunFormat parse_run_format(std::string_view name);

struct RunLoadOptions {
    /// When set, every passage id must resolve in this corpus.
    const Corpus* corpus = nullptr;
    /// Collects repair warnings (also logged to stderr).
    std::vector<std::string>* warnings = nullptr;
};

RetrievalRun load_run(const std::filesystem::path& path, RunFormat format, const RunLoadOptions& options = {});

/// TREC format, scores with 6 fractional digits, tag = retriever name (or "run").
void write_run(const RetrievalRun& run, const std::filesystem::path& path);

/// Graded judgments; absent pairs have grade 0.
class QrelSet {
  public:
    void add(const std::string& query_id, const std::string& passage_id, int grade);
    int grade(std::string_view query_id, std::string_view passage_id) const;
    /// All judged grades for a query (may include zeros).
    std::vector<int> grades(std::string_view query_id) const;
    std::size_t size() const noexcept { return judgments_.size(); }

  private:
    std::unordered_map<std::string, std::unordered_map<std::string, int>> judgments_;
};

/// "<query_id> 0 <passage_id> <grade>" per line.
QrelSet load_qrels(const std::filesystem::path& path);

}  // namespace scentrank
