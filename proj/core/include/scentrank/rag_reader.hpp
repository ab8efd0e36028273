#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scentrank/corpus.hpp"
#include "scentrank/evaluator.hpp"
#include "scentrank/reranker.hpp"
#include "scentrank/scent.hpp"

namespace scentrank {

inline constexpr std::string_view kDefaultReaderTemplate =
    "Answer the question using the documents below. Reply with a short answer.\n\n"
    "{documents}\n\nQuestion: {question}\nAnswer:";
inline constexpr std::string_view kQuestionOnlyTemplate = "Answer the question with a short answer.\n\nQuestion: {question}\nAnswer:";

struct ReaderConfig {
    std::size_t top_k_docs = 1;
    std::string prompt_template{kDefaultReaderTemplate};
    std::string question_only_template{kQuestionOnlyTemplate};
    std::size_t max_answer_tokens = 32;
    double temperature = 0.0;
    std::string model_name = "llama-2-7b-chat";
    /// No documents in the prompt ("Question Only" baseline).
    bool question_only = false;

    void validate() const;
};

/// Documents in rank order as "[i] title\nbody" blocks separated by blank lines,
/// then the question. Throws ValidationError on an empty or oversized list.
std::string build_reader_prompt(std::string_view question, std::span<const Passage* const> docs,
                                const ReaderConfig& config);

struct Prediction {
    std::string query_id;
    std::string answer;
    std::vector<std::string> doc_ids;

    bool operator==(const Prediction&) const = default;
};

/// Generates an answer from the top config.top_k_docs candidates of `result`
/// (none in question-only mode), truncated to max_answer_tokens.
Prediction answer(GenerationBackend& backend, std::string_view question, const RerankResult& result,
                  const Corpus& corpus, const ReaderConfig& config, const RetryPolicy& retry = {});

void write_predictions(std::span<const Prediction> predictions, const std::filesystem::path& path);
std::vector<Prediction> load_predictions(const std::filesystem::path& path);

/// Mean EM / recall / containment over predictions; rows "reader_em",
/// "reader_recall", "reader_containment".
EvalReport reader_report(std::span<const Prediction> predictions, const QADataset& qa);

}  // namespace scentrank
