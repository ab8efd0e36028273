#include <gtest/gtest.h>

#include "scentrank/error.hpp"
#include "scentrank/rag_reader.hpp"
#include "support/fixtures.hpp"

namespace scentrank {
namespace {

/// Replies "ANSWER:<id>" where id is the first "[1] <title>" header's title.
class EchoFirstDoc final : public GenerationBackend {
  public:
    std::string complete(const GenerationRequest& request) override {
        prompts.push_back(request.prompt);
        auto pos = request.prompt.find("[1] ");
        if (pos == std::string::npos) return "no documents";
        auto end = request.prompt.find('\n', pos);
        return "ANSWER:" + request.prompt.substr(pos + 4, end - pos - 4);
    }
    std::vector<std::string> prompts;
};

Corpus small_corpus() {
    return Corpus({{"p1", "p1", "stevie wonder sang the song"}, {"p2", "p2", "the song was long"},
                   {"p3", "p3", "wonder what happened"}});
}

RerankResult ranked(std::vector<std::string> ids) {
    RerankResult r;
    r.query_id = "q1";
    int rank = 1;
    for (auto& id : ids) r.candidates.push_back({id, rank++, 0.0, -1.0, -1.0, 1, -1.0, false, ""});
    r.selected = r.candidates.front().passage_id;
    return r;
}

TEST(ReaderPrompt, DocumentBeforeQuestion) {
    auto corpus = small_corpus();
    const Passage* docs[] = {&corpus.at("p1")};
    auto prompt = build_reader_prompt("who sang", docs, {});
    auto body = prompt.find("stevie wonder sang the song");
    auto question = prompt.find("Question: who sang");
    ASSERT_NE(body, std::string::npos);
    ASSERT_NE(question, std::string::npos);
    EXPECT_LT(body, question);
    EXPECT_NE(prompt.find("[1] p1\nstevie wonder sang the song"), std::string::npos);
}

TEST(ReaderPrompt, HeadersInRankOrderAndLimits) {
    auto corpus = small_corpus();
    ReaderConfig config;
    config.top_k_docs = 2;
    const Passage* docs[] = {&corpus.at("p2"), &corpus.at("p1")};
    auto prompt = build_reader_prompt("q", docs, config);
    EXPECT_LT(prompt.find("[1] p2"), prompt.find("[2] p1"));
    EXPECT_THROW(build_reader_prompt("q", std::span<const Passage* const>{}, config), ValidationError);
    const Passage* three[] = {&corpus.at("p1"), &corpus.at("p2"), &corpus.at("p3")};
    EXPECT_THROW(build_reader_prompt("q", three, config), ValidationError);
    ReaderConfig bad;
    bad.prompt_template = "{question} only";
    EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(Answer, EchoesFirstDocAndRespectsTopK) {
    auto corpus = small_corpus();
    EchoFirstDoc backend;
    ReaderConfig config;
    auto p = answer(backend, "who sang", ranked({"p3", "p1", "p2"}), corpus, config);
    EXPECT_EQ(p.answer, "ANSWER:p3");
    EXPECT_EQ(p.doc_ids, std::vector<std::string>{"p3"});
    config.top_k_docs = 2;
    auto two = answer(backend, "who sang", ranked({"p3", "p1", "p2"}), corpus, config);
    EXPECT_EQ(two.doc_ids, (std::vector<std::string>{"p3", "p1"}));
    EXPECT_NE(backend.prompts.back().find("[2] p1"), std::string::npos);
    EXPECT_EQ(backend.prompts.back().find("[3]"), std::string::npos);
}

TEST(Answer, QuestionOnlyHasNoDocuments) {
    auto corpus = small_corpus();
    EchoFirstDoc backend;
    ReaderConfig config;
    config.question_only = true;
    auto p = answer(backend, "who sang", ranked({"p1"}), corpus, config);
    EXPECT_EQ(p.answer, "no documents");
    EXPECT_TRUE(p.doc_ids.empty());
    EXPECT_EQ(backend.prompts.back().find("stevie"), std::string::npos);
    EXPECT_NE(backend.prompts.back().find("Question: who sang"), std::string::npos);
}

TEST(Answer, OrderChangesPromptAndRunsAreDeterministic) {
    auto corpus = small_corpus();
    EchoFirstDoc backend;
    ReaderConfig config;
    config.top_k_docs = 2;
    answer(backend, "q", ranked({"p1", "p2"}), corpus, config);
    answer(backend, "q", ranked({"p2", "p1"}), corpus, config);
    answer(backend, "q", ranked({"p1", "p2"}), corpus, config);
    EXPECT_NE(backend.prompts[0], backend.prompts[1]);
    EXPECT_EQ(backend.prompts[0], backend.prompts[2]);
}

TEST(Answer, TruncatesToMaxTokens) {
    auto corpus = small_corpus();
    testing::CountingGenerationBackend backend("one two three four five");
    ReaderConfig config;
    config.max_answer_tokens = 3;
    EXPECT_EQ(answer(backend, "q", ranked({"p1"}), corpus, config).answer, "one two three");
}

TEST(Predictions, RoundTripAndReport) {
    testing::TempDir dir;
    std::vector<Prediction> preds{{"q1", "Stevie Wonder", {"p1"}}, {"q2", "It was \"Lionel\"", {"p2", "p3"}}};
    write_predictions(preds, dir / "p.jsonl");
    EXPECT_EQ(load_predictions(dir / "p.jsonl"), preds);
    QADataset qa({{"q1", "x", {"Stevie Wonder"}}, {"q2", "y", {"Stevie Wonder"}}});
    auto report = reader_report(preds, qa);
    EXPECT_DOUBLE_EQ(report.value("reader_em"), 0.5);
    EXPECT_DOUBLE_EQ(report.value("reader_containment"), 0.5);
    EXPECT_DOUBLE_EQ(report.value("reader_recall"), 0.5);
}

}  // namespace
}  // namespace scentrank
