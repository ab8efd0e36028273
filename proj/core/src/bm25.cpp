#include "scentrank/bm25.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <cereal/archives/portable_binary.hpp>
#include <cereal/types/map.hpp>
#include <cereal/types/string.hpp>
#include <cereal/types/vector.hpp>

#include "scentrank/error.hpp"
#include "scentrank/parallel.hpp"
#include "scentrank/tokenizer.hpp"

namespace scentrank {

template <class Archive>
void serialize(Archive& ar, Posting& p) {
    ar(p.doc, p.tf);
}

namespace {

constexpr std::uint32_t kSnapshotMagic = 0x53524958;  // "SRIX"
constexpr std::uint32_t kSnapshotVersion = 1;

/// Orders (score desc, passage id asc).
struct RankOrder {
    const InvertedIndex& index;
    const std::vector<double>& scores;
    bool operator()(std::uint32_t a, std::uint32_t b) const {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return index.doc_id(a) < index.doc_id(b);
    }
};

double term_weight(double idf, double tf, double doc_len, double avg_len, const Bm25Params& params) {
    double norm = params.k1 * (1.0 - params.b + params.b * doc_len / avg_len);
    return idf * tf * (params.k1 + 1.0) / (tf + norm);
}

}  // namespace

void Bm25Params::validate() const {
    if (!(k1 >= 0.0) || !std::isfinite(k1)) throw ValidationError("bm25 k1 must be >= 0");
    if (!(b >= 0.0 && b <= 1.0)) throw ValidationError("bm25 b must lie in [0, 1]");
}

InvertedIndex InvertedIndex::build(const Corpus& corpus) {
    if (corpus.empty()) throw ValidationError("cannot index an empty corpus");
    InvertedIndex index;
    index.doc_ids_.reserve(corpus.size());
    index.doc_lengths_.reserve(corpus.size());
    std::uint64_t total = 0;
    std::map<std::string, std::uint32_t, std::less<>> counts;
    for (const auto& passage : corpus.passages()) {
        auto doc = static_cast<std::uint32_t>(index.doc_ids_.size());
        auto tokens = tokenize(passage.full_text());
        counts.clear();
        for (auto& t : tokens) ++counts[std::move(t)];
        for (const auto& [term, tf] : counts) index.postings_[term].push_back({doc, tf});
        index.doc_ids_.push_back(passage.id);
        index.doc_lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
        total += tokens.size();
    }
    if (total == 0) throw ValidationError("corpus contains no indexable tokens");
    index.avg_doc_length_ = static_cast<double>(total) / static_cast<double>(index.doc_ids_.size());
    index.rebuild_lookup();
    return index;
}

void InvertedIndex::rebuild_lookup() {
    doc_by_id_.clear();
    doc_by_id_.reserve(doc_ids_.size());
    for (std::size_t i = 0; i < doc_ids_.size(); ++i) doc_by_id_.emplace(doc_ids_[i], i);
}

std::optional<std::size_t> InvertedIndex::doc_number(std::string_view passage_id) const {
    auto it = doc_by_id_.find(std::string(passage_id));
    if (it == doc_by_id_.end()) return std::nullopt;
    return it->second;
}

std::span<const Posting> InvertedIndex::postings(std::string_view term) const {
    auto it = postings_.find(term);
    if (it == postings_.end()) return {};
    return it->second;
}

std::uint32_t InvertedIndex::term_frequency(std::string_view term, std::size_t doc) const {
    auto list = postings(term);
    auto it = std::lower_bound(list.begin(), list.end(), doc,
                               [](const Posting& p, std::size_t d) { return p.doc < d; });
    return (it != list.end() && it->doc == doc) ? it->tf : 0;
}

template <class Archive>
void InvertedIndex::serialize(Archive& ar) {
    ar(doc_ids_, doc_lengths_, postings_, avg_doc_length_);
}

void InvertedIndex::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write index snapshot " + path.string());
    cereal::PortableBinaryOutputArchive ar(out);
    ar(kSnapshotMagic, kSnapshotVersion);
    ar(const_cast<InvertedIndex&>(*this));
}

InvertedIndex InvertedIndex::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open index snapshot " + path.string());
    InvertedIndex index;
    try {
        cereal::PortableBinaryInputArchive ar(in);
        std::uint32_t magic = 0, version = 0;
        ar(magic, version);
        if (magic != kSnapshotMagic || version != kSnapshotVersion) {
            throw ValidationError(path.string() + " is not a scentrank index snapshot");
        }
        ar(index);
    } catch (const cereal::Exception& e) {
        throw ValidationError("corrupt index snapshot " + path.string() + ": " + e.what());
    }
    index.rebuild_lookup();
    return index;
}

bool InvertedIndex::operator==(const InvertedIndex& other) const {
    return doc_ids_ == other.doc_ids_ && doc_lengths_ == other.doc_lengths_ && postings_ == other.postings_ &&
           avg_doc_length_ == other.avg_doc_length_;
}

InvertedIndex build_index(const Corpus& corpus) { return InvertedIndex::build(corpus); }

double bm25_idf(std::size_t doc_count, std::size_t df) {
    auto n = static_cast<double>(doc_count);
    auto d = static_cast<double>(df);
    return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

double bm25_score(const InvertedIndex& index, std::span<const std::string> query_tokens, std::string_view passage_id,
                  const Bm25Params& params) {
    auto doc = index.doc_number(passage_id);
    if (!doc) throw ValidationError("unknown passage id \"" + std::string(passage_id) + "\"");
    double len = index.doc_length(*doc);
    double score = 0.0;
    for (const auto& term : query_tokens) {
        auto tf = index.term_frequency(term, *doc);
        if (tf == 0) continue;
        double idf = bm25_idf(index.doc_count(), index.document_frequency(term));
        score += term_weight(idf, tf, len, index.avg_doc_length(), params);
    }
    return score;
}

std::vector<ScoredPassage> retrieve(const InvertedIndex& index, std::string_view query, std::size_t k,
                                    const Bm25Params& params) {
    if (k == 0) throw ValidationError("retrieve: k must be >= 1");
    params.validate();
    const auto n = index.doc_count();
    std::vector<double> scores(n, 0.0);
    // Term-at-a-time; per-document additions happen in query-token order, the
    // same order bm25_score uses, so both produce identical doubles.
    for (const auto& term : tokenize(query)) {
        auto list = index.postings(term);
        if (list.empty()) continue;
        double idf = bm25_idf(n, list.size());
        for (const auto& p : list) {
            scores[p.doc] += term_weight(idf, p.tf, index.doc_length(p.doc), index.avg_doc_length(), params);
        }
    }
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    auto top = std::min(k, n);
    RankOrder cmp{index, scores};
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top), order.end(), cmp);
    std::vector<ScoredPassage> out;
    out.reserve(top);
    for (std::size_t i = 0; i < top; ++i) out.push_back({index.doc_id(order[i]), scores[order[i]]});
    return out;
}

RetrievalRun retrieve_all(const InvertedIndex& index, const QADataset& qa, std::size_t k, const Bm25Params& params,
                          std::size_t threads) {
    auto examples = qa.examples();
    std::vector<std::vector<ScoredPassage>> results(examples.size());
    parallel_for(examples.size(), threads, [&](std::size_t i) { results[i] = retrieve(index, examples[i].question, k, params); });
    RetrievalRun run("bm25");
    for (std::size_t i = 0; i < examples.size(); ++i) {
        std::vector<RunEntry> entries;
        entries.reserve(results[i].size());
        for (std::size_t r = 0; r < results[i].size(); ++r) {
            entries.push_back({std::move(results[i][r].passage_id), results[i][r].score, static_cast<int>(r + 1)});
        }
        run.add_query(examples[i].query_id, std::move(entries));
    }
    return run;
}

}  // namespace scentrank
