#include <gtest/gtest.h>

#include <random>

#include "scentrank/corpus.hpp"
#include "scentrank/error.hpp"
#include "support/fixtures.hpp"

namespace scentrank {
namespace {

using testing::TempDir;
using testing::read_text;
using testing::write_text;

TEST(LoadPassages, JsonlThreeRecords) {
    TempDir dir;
    write_text(dir / "c.jsonl",
               "{\"id\":\"p1\",\"title\":\"T1\",\"contents\":\"first  body\"}\n"
               "{\"id\":\"p2\",\"contents\":\"second\"}\n"
               "{\"id\":\"p3\",\"title\":\"\",\"contents\":\"third\"}\n");
    auto corpus = load_passages(dir / "c.jsonl", PassageFormat::jsonl);
    ASSERT_EQ(corpus.size(), 3u);
    EXPECT_EQ(corpus.at("p1").title, "T1");
    EXPECT_EQ(corpus.at("p1").body, "first  body");  // whitespace kept
    EXPECT_EQ(corpus.at("p2").title, "");
    EXPECT_EQ(corpus.find("p4"), nullptr);
}

TEST(LoadPassages, DuplicateIdNamesTheId) {
    TempDir dir;
    write_text(dir / "c.jsonl", "{\"id\":\"p1\",\"contents\":\"a\"}\n{\"id\":\"p1\",\"contents\":\"b\"}\n");
    try {
        load_passages(dir / "c.jsonl", PassageFormat::jsonl);
        FAIL() << "expected duplicate-id error";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("\"p1\""), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
    }
}

TEST(LoadPassages, MalformedRecordReportsLine) {
    TempDir dir;
    write_text(dir / "c.jsonl", "{\"id\":\"p1\",\"contents\":\"a\"}\n{\"id\": \n");
    try {
        load_passages(dir / "c.jsonl", PassageFormat::jsonl);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("c.jsonl:2"), std::string::npos) << e.what();
    }
    write_text(dir / "d.jsonl", "{\"id\":\"p1\"}\n");
    EXPECT_THROW(load_passages(dir / "d.jsonl", PassageFormat::jsonl), ValidationError);
}

TEST(LoadPassages, TsvWithDprHeader) {
    TempDir dir;
    write_text(dir / "c.tsv", "id\ttext\ttitle\n1\tAaron is a prophet.\tAaron\n2\tGod at Sinai.\tAaron\n");
    auto corpus = load_passages(dir / "c.tsv", PassageFormat::tsv);
    ASSERT_EQ(corpus.size(), 2u);
    EXPECT_EQ(corpus.at("1"), (Passage{"1", "Aaron", "Aaron is a prophet."}));
    EXPECT_EQ(corpus.at("2"), (Passage{"2", "Aaron", "God at Sinai."}));
}

TEST(LoadPassages, TsvMissingColumn) {
    TempDir dir;
    write_text(dir / "c.tsv", "id\ttext\n1\tbody\n");
    EXPECT_THROW(load_passages(dir / "c.tsv", PassageFormat::tsv), ValidationError);
}

TEST(LoadQa, StevieWonderRecord) {
    TempDir dir;
    write_text(dir / "qa.jsonl",
               "{\"query_id\":\"nq1\",\"question\":\"who sang i just called to say i love you\","
               "\"answers\":[\"Stevie Wonder\"]}\n");
    auto qa = load_qa(dir / "qa.jsonl");
    ASSERT_EQ(qa.size(), 1u);
    EXPECT_EQ(qa.examples()[0].gold_answers, std::vector<std::string>{"Stevie Wonder"});
    EXPECT_EQ(qa.find("nq1")->question, "who sang i just called to say i love you");
}

TEST(LoadQa, EmptyAnswersRejectedWithQueryId) {
    TempDir dir;
    write_text(dir / "qa.jsonl", "{\"query_id\":\"nq7\",\"question\":\"x\",\"answers\":[]}\n");
    try {
        load_qa(dir / "qa.jsonl");
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("nq7"), std::string::npos);
    }
}

TEST(LoadQa, DuplicateQueryId) {
    TempDir dir;
    write_text(dir / "qa.jsonl",
               "{\"query_id\":\"a\",\"question\":\"x\",\"answers\":[\"y\"]}\n"
               "{\"query_id\":\"a\",\"question\":\"z\",\"answers\":[\"w\"]}\n");
    EXPECT_THROW(load_qa(dir / "qa.jsonl"), ValidationError);
}

TEST(LoadRun, TrecLine) {
    TempDir dir;
    write_text(dir / "r.trec", "q1 Q0 p7 1 12.5 bm25\n");
    auto run = load_run(dir / "r.trec", RunFormat::trec);
    ASSERT_NE(run.find("q1"), nullptr);
    EXPECT_EQ(run.find("q1")->front(), (RunEntry{"p7", 12.5, 1}));
    EXPECT_EQ(run.retriever_name(), "bm25");
}

TEST(LoadRun, NonConsecutiveRanksRejected) {
    TempDir dir;
    write_text(dir / "r.trec", "q1 Q0 p1 1 2.0 x\nq1 Q0 p2 3 1.0 x\n");
    EXPECT_THROW(load_run(dir / "r.trec", RunFormat::trec), ValidationError);
}

TEST(LoadRun, ThousandCandidatesAccepted) {
    TempDir dir;
    std::string text;
    for (int r = 1; r <= 1000; ++r) text += "q1 Q0 p" + std::to_string(r) + " " + std::to_string(r) + " " + std::to_string(2000 - r) + " bm25\n";
    write_text(dir / "r.trec", text);
    auto run = load_run(dir / "r.trec", RunFormat::trec);
    EXPECT_EQ(run.find("q1")->size(), 1000u);
}

TEST(LoadRun, NonMonotoneScoresRepairedWithWarning) {
    TempDir dir;
    write_text(dir / "r.trec", "q1 Q0 a 1 1.0 x\nq1 Q0 b 2 3.0 x\nq1 Q0 c 3 3.0 x\nq1 Q0 d 4 0.5 x\n");
    std::vector<std::string> warnings;
    auto run = load_run(dir / "r.trec", RunFormat::trec, {nullptr, &warnings});
    ASSERT_EQ(warnings.size(), 1u);
    const auto& e = *run.find("q1");
    // Stable on input order: b before c.
    EXPECT_EQ(e[0], (RunEntry{"b", 3.0, 1}));
    EXPECT_EQ(e[1], (RunEntry{"c", 3.0, 2}));
    EXPECT_EQ(e[2], (RunEntry{"a", 1.0, 3}));
    EXPECT_EQ(e[3], (RunEntry{"d", 0.5, 4}));
}

TEST(LoadRun, UnresolvablePassageListsMissingIds) {
    TempDir dir;
    Corpus corpus({{"p1", "", "x"}});
    write_text(dir / "r.trec", "q1 Q0 p1 1 2.0 x\nq1 Q0 p9 2 1.0 x\nq2 Q0 p8 1 1.0 x\n");
    try {
        load_run(dir / "r.trec", RunFormat::trec, {&corpus, nullptr});
        FAIL();
    } catch (const ValidationError& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find("p9"), std::string::npos);
        EXPECT_NE(msg.find("p8"), std::string::npos);
    }
}

TEST(LoadRun, JsonlFormat) {
    TempDir dir;
    write_text(dir / "r.jsonl",
               "{\"query_id\":\"q1\",\"passage_id\":\"p1\",\"rank\":1,\"score\":2.5}\n"
               "{\"query_id\":\"q1\",\"passage_id\":\"p2\",\"rank\":2,\"score\":1.5}\n");
    auto run = load_run(dir / "r.jsonl", RunFormat::jsonl);
    EXPECT_EQ(run.find("q1")->size(), 2u);
}

TEST(WriteRun, EmptyRunGivesEmptyFile) {
    TempDir dir;
    write_run(RetrievalRun("x"), dir / "r.trec");
    EXPECT_EQ(read_text(dir / "r.trec"), "");
}

TEST(WriteRun, TiesKeepInputOrderAndSixDecimals) {
    TempDir dir;
    RetrievalRun run("bm25");
    run.add_query("q1", {{"z", 1.0, 1}, {"a", 1.0, 2}, {"m", 0.1234567, 3}});
    write_run(run, dir / "r.trec");
    EXPECT_EQ(read_text(dir / "r.trec"),
              "q1 Q0 z 1 1.000000 bm25\nq1 Q0 a 2 1.000000 bm25\nq1 Q0 m 3 0.123457 bm25\n");
}

TEST(WriteRun, ThreeQueryRoundTrip) {
    TempDir dir;
    RetrievalRun run("bm25");
    run.add_query("q1", {{"p1", 3.5, 1}, {"p2", 1.25, 2}});
    run.add_query("q2", {{"p3", 0.5, 1}});
    run.add_query("q3", {{"p2", 9.0, 1}, {"p1", 9.0, 2}, {"p3", -1.0, 3}});
    write_run(run, dir / "r.trec");
    EXPECT_EQ(load_run(dir / "r.trec", RunFormat::trec), run);
}

// Property: write -> load -> write is byte-identical and preserves ids/ranks
// for random valid runs (scores rounded to 6 places by the format).
TEST(WriteRun, RandomRoundTripProperty) {
    std::mt19937_64 rng(7);
    TempDir dir;
    for (int trial = 0; trial < 25; ++trial) {
        RetrievalRun run("prop");
        std::uniform_int_distribution<int> nq(0, 5), nd(1, 30);
        std::normal_distribution<double> score(0.0, 50.0);
        int queries = nq(rng);
        for (int q = 0; q < queries; ++q) {
            int n = nd(rng);
            std::vector<double> scores(n);
            for (auto& s : scores) s = score(rng);
            if (trial % 3 == 0) std::fill(scores.begin() + n / 2, scores.end(), 4.0);  // ties
            std::sort(scores.begin(), scores.end(), std::greater<>());
            std::vector<RunEntry> entries;
            for (int i = 0; i < n; ++i) entries.push_back({"d" + std::to_string((i * 7919 + q) % 1000), scores[i], i + 1});
            run.add_query("q" + std::to_string(q), std::move(entries));
        }
        auto first = dir / "a.trec";
        auto second = dir / "b.trec";
        write_run(run, first);
        auto loaded = load_run(first, RunFormat::trec);
        write_run(loaded, second);
        ASSERT_EQ(read_text(first), read_text(second));
        ASSERT_EQ(loaded.size(), run.size());
        for (std::size_t q = 0; q < run.size(); ++q) {
            const auto& [qid, entries] = run.queries()[q];
            const auto& got = *loaded.find(qid);
            ASSERT_EQ(got.size(), entries.size());
            for (std::size_t i = 0; i < entries.size(); ++i) {
                EXPECT_EQ(got[i].passage_id, entries[i].passage_id);
                EXPECT_EQ(got[i].rank, entries[i].rank);
                EXPECT_NEAR(got[i].score, entries[i].score, 5e-7);
            }
        }
    }
}

TEST(Qrels, LoadAndDefaultZero) {
    TempDir dir;
    write_text(dir / "q.txt", "q1 0 p1 3\nq1 0 p2 0\nq2 0 p5 1\n");
    auto qrels = load_qrels(dir / "q.txt");
    EXPECT_EQ(qrels.grade("q1", "p1"), 3);
    EXPECT_EQ(qrels.grade("q1", "p3"), 0);
    EXPECT_EQ(qrels.grade("q9", "p1"), 0);
    write_text(dir / "bad.txt", "q1 0 p1 -1\n");
    EXPECT_THROW(load_qrels(dir / "bad.txt"), ValidationError);
}

}  // namespace
}  // namespace scentrank
