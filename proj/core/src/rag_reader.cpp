#include "scentrank/rag_reader.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "scentrank/error.hpp"
#include "scentrank/tokenizer.hpp"

namespace scentrank {
namespace {

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string_view::npos; pos = text.find(needle, pos + needle.size())) ++n;
    return n;
}

std::string substitute(std::string_view tmpl, std::string_view key, std::string_view value) {
    auto pos = tmpl.find(key);
    std::string out(tmpl.substr(0, pos));
    out.append(value);
    out.append(tmpl.substr(pos + key.size()));
    return out;
}

std::string render(std::string_view tmpl, std::string_view question, std::string_view documents) {
    // {documents} goes in first; the question text may itself contain braces.
    auto doc_pos = tmpl.find("{documents}");
    auto q_pos = tmpl.find("{question}");
    if (doc_pos == std::string_view::npos) return substitute(tmpl, "{question}", question);
    std::string out;
    if (doc_pos < q_pos) {
        out.append(tmpl.substr(0, doc_pos)).append(documents);
        out.append(tmpl.substr(doc_pos + 11, q_pos - doc_pos - 11)).append(question);
        out.append(tmpl.substr(q_pos + 10));
    } else {
        out.append(tmpl.substr(0, q_pos)).append(question);
        out.append(tmpl.substr(q_pos + 10, doc_pos - q_pos - 10)).append(documents);
        out.append(tmpl.substr(doc_pos + 11));
    }
    return out;
}

}  // namespace

void ReaderConfig::validate() const {
    if (top_k_docs < 1) throw ValidationError("reader top_k_docs must be >= 1");
    if (max_answer_tokens < 1) throw ValidationError("reader max_answer_tokens must be >= 1");
    if (count_occurrences(prompt_template, "{question}") != 1 || count_occurrences(prompt_template, "{documents}") != 1) {
        throw ValidationError("reader template must contain {question} and {documents} exactly once");
    }
    if (count_occurrences(question_only_template, "{question}") != 1 ||
        count_occurrences(question_only_template, "{documents}") != 0) {
        throw ValidationError("question-only reader template must contain {question} once and no {documents}");
    }
}

std::string build_reader_prompt(std::string_view question, std::span<const Passage* const> docs,
                                const ReaderConfig& config) {
    config.validate();
    if (docs.empty()) throw ValidationError("reader prompt needs at least one document");
    if (docs.size() > config.top_k_docs) {
        throw ValidationError("reader prompt got " + std::to_string(docs.size()) + " documents, top_k_docs is " +
                              std::to_string(config.top_k_docs));
    }
    std::string block;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (i > 0) block += "\n\n";
        block += "[" + std::to_string(i + 1) + "] " + docs[i]->title + "\n" + docs[i]->body;
    }
    return render(config.prompt_template, question, block);
}

Prediction answer(GenerationBackend& backend, std::string_view question, const RerankResult& result,
                  const Corpus& corpus, const ReaderConfig& config, const RetryPolicy& retry) {
    config.validate();
    if (result.candidates.empty()) throw ValidationError("reader needs a non-empty rerank result");
    Prediction pred;
    pred.query_id = result.query_id;
    std::string prompt;
    if (config.question_only) {
        prompt = render(config.question_only_template, question, "");
    } else {
        std::vector<const Passage*> docs;
        for (std::size_t i = 0; i < std::min(config.top_k_docs, result.candidates.size()); ++i) {
            docs.push_back(&corpus.at(result.candidates[i].passage_id));
            pred.doc_ids.push_back(result.candidates[i].passage_id);
        }
        prompt = build_reader_prompt(question, docs, config);
    }
    GenerationRequest request{config.model_name, std::move(prompt), config.temperature, config.max_answer_tokens};
    auto text = with_retry(retry, [&] { return backend.complete(request); });
    pred.answer = std::string(truncate_tokens(text, config.max_answer_tokens));
    return pred;
}

void write_predictions(std::span<const Prediction> predictions, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write predictions " + path.string());
    for (const auto& p : predictions) {
        out << nlohmann::json{{"query_id", p.query_id}, {"answer", p.answer}, {"doc_ids", p.doc_ids}}.dump() << '\n';
    }
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open predictions " + path.string());
    std::vector<Prediction> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            out.push_back({j.at("query_id").get<std::string>(), j.at("answer").get<std::string>(),
                           j.at("doc_ids").get<std::vector<std::string>>()});
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": bad prediction: " + e.what());
        }
    }
    return out;
}

EvalReport reader_report(std::span<const Prediction> predictions, const QADataset& qa) {
    EvalReport report;
    double em = 0, recall = 0, containment = 0;
    for (const auto& p : predictions) {
        const auto* ex = qa.find(p.query_id);
        if (!ex) throw ValidationError("prediction for unknown query \"" + p.query_id + "\"");
        auto s = reader_metrics(p.answer, ex->gold_answers);
        em += s.em;
        recall += s.recall;
        containment += s.containment;
    }
    auto n = predictions.size();
    double denom = n == 0 ? 1.0 : static_cast<double>(n);
    report.n_queries = n;
    report.rows.push_back({"reader_em", std::nullopt, em / denom, n});
    report.rows.push_back({"reader_recall", std::nullopt, recall / denom, n});
    report.rows.push_back({"reader_containment", std::nullopt, containment / denom, n});
    return report;
}

}  // namespace scentrank
