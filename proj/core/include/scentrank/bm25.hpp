#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "scentrank/corpus.hpp"

namespace scentrank {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;

    /// Throws ValidationError unless k1 >= 0 and 0 <= b <= 1.
    void validate() const;
};

struct Posting {
    std::uint32_t doc = 0;
    std::uint32_t tf = 0;

    bool operator==(const Posting&) const = default;
};

/// Term -> postings over dense document numbers. Documents are numbered in
/// corpus order; postings are sorted by document number.
class InvertedIndex {
  public:
    static InvertedIndex build(const Corpus& corpus);

    std::size_t doc_count() const noexcept { return doc_ids_.size(); }
    double avg_doc_length() const noexcept { return avg_doc_length_; }
    std::uint32_t doc_length(std::size_t doc) const { return doc_lengths_.at(doc); }
    const std::string& doc_id(std::size_t doc) const { return doc_ids_.at(doc); }
    std::optional<std::size_t> doc_number(std::string_view passage_id) const;

    std::span<const Posting> postings(std::string_view term) const;
    std::size_t document_frequency(std::string_view term) const { return postings(term).size(); }
    std::uint32_t term_frequency(std::string_view term, std::size_t doc) const;
    std::size_t vocabulary_size() const noexcept { return postings_.size(); }
    const std::map<std::string, std::vector<Posting>, std::less<>>& all_postings() const noexcept { return postings_; }

    void save(const std::filesystem::path& path) const;
    static InvertedIndex load(const std::filesystem::path& path);

    bool operator==(const InvertedIndex& other) const;

    template <class Archive>
    void serialize(Archive& ar);

  private:
    void rebuild_lookup();

    std::vector<std::string> doc_ids_;
    std::vector<std::uint32_t> doc_lengths_;
    std::map<std::string, std::vector<Posting>, std::less<>> postings_;
    double avg_doc_length_ = 0.0;
    std::unordered_map<std::string, std::size_t> doc_by_id_;
};

/// Convenience wrapper over InvertedIndex::build. Throws on an empty corpus.
InvertedIndex build_index(const Corpus& corpus);

/// ln(1 + (N - df + 0.5) / (df + 0.5)); always positive.
double bm25_idf(std::size_t doc_count, std::size_t df);

/// Okapi BM25 of one passage for a tokenized query. Repeated query tokens
/// contribute once per occurrence. Throws ValidationError on unknown id.
double bm25_score(const InvertedIndex& index, std::span<const std::string> query_tokens,
                  std::string_view passage_id, const Bm25Params& params = {});

struct ScoredPassage {
    std::string passage_id;
    double score = 0.0;
};

/// Top min(k, N) passages by BM25, ties by ascending passage id.
std::vector<ScoredPassage> retrieve(const InvertedIndex& index, std::string_view query, std::size_t k,
                                    const Bm25Params& params = {});

/// retrieve() for every question; queries are processed on `threads` workers
/// and merged in dataset order.
RetrievalRun retrieve_all(const InvertedIndex& index, const QADataset& qa, std::size_t k,
                          const Bm25Params& params = {}, std::size_t threads = 1);

}  // namespace scentrank
