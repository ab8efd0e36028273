#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "scentrank/bm25.hpp"
#include "scentrank/error.hpp"
#include "scentrank/reranker.hpp"
#include "support/fixtures.hpp"

namespace scentrank {
namespace {

using testing::ScriptedScoringBackend;

AnswerScent scent_of(const std::string& text) { return {"q", text, "m", "", "d"}; }

std::vector<Candidate> as_candidates(const std::vector<Passage>& passages, std::vector<double> scores = {}) {
    std::vector<Candidate> out;
    for (std::size_t i = 0; i < passages.size(); ++i) {
        double s = scores.empty() ? static_cast<double>(passages.size() - i) : scores[i];
        out.push_back({&passages[i], static_cast<int>(i + 1), s});
    }
    return out;
}

/// Backend whose mean loglik for a candidate is looked up by a marker word in the prefix.
ScriptedScoringBackend by_marker(std::map<std::string, double> table) {
    ScriptedScoringBackend b;
    b.script = [table](const ScoringRequest& r) {
        for (const auto& [marker, value] : table)
            if (r.prefix.find(marker) != std::string::npos) return std::vector<TokenLogProb>{{"t", value}};
        throw BackendError("no marker in prefix");
    };
    return b;
}

TEST(BuildRankInput, DefaultLayout) {
    Passage p{"p1", "Song", "stevie wonder sang it"};
    auto r = build_rank_input(p, "who sang", scent_of("Stevie Wonder"), {});
    EXPECT_EQ(r.prefix, "Document: Song stevie wonder sang it\nQuestion: who sang\nHint: Stevie Wonder\nAnswer:");
    EXPECT_EQ(r.target, "Stevie Wonder");
}

TEST(BuildRankInput, CapsAndTargetSources) {
    RankTemplate t;
    t.layout = "{document}|{question}|{scent}";
    t.doc_token_cap = 2;
    Passage p{"p", "", "a b c d"};
    auto r = build_rank_input(p, "q", scent_of("s"), t);
    EXPECT_EQ(r.prefix, "a b|q|s");

    t.target_token_cap = 2;
    EXPECT_EQ(build_rank_input(p, "q", scent_of("one two three"), t).target, "one two");

    t.target_source = TargetSource::constant;
    t.target_constant = "";
    EXPECT_THROW(build_rank_input(p, "q", scent_of("s"), t), ValidationError);
    t.target_constant = "fixed";
    EXPECT_EQ(build_rank_input(p, "q", scent_of("s"), t).target, "fixed");

    t.target_source = TargetSource::gold_answer;
    std::vector<std::string> golds{"Mobile", "Alabama"};
    EXPECT_EQ(build_rank_input(p, "q", scent_of("s"), t, golds).target, "Mobile");
    EXPECT_THROW(build_rank_input(p, "q", scent_of("s"), t), ValidationError);

    RankTemplate bad;
    bad.layout = "{document} {question}";  // no {scent}
    EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(ScoreCandidate, Arithmetic) {
    ScriptedScoringBackend b;
    b.script = [](const ScoringRequest&) { return std::vector<TokenLogProb>{{"a", -1.0}, {"b", -2.0}, {"c", -3.0}}; };
    auto s = score_candidate(b, {"p", "t"});
    EXPECT_DOUBLE_EQ(s.mean_loglik, -2.0);
    EXPECT_DOUBLE_EQ(s.sum_loglik, -6.0);
    EXPECT_EQ(s.token_count, 3u);

    b.script = [](const ScoringRequest&) { return std::vector<TokenLogProb>{{"a", -0.5}}; };
    EXPECT_DOUBLE_EQ(score_candidate(b, {"p", "t"}).mean_loglik, -0.5);

    UnigramBackend uni;
    auto u = score_candidate(uni, {"stevie wonder sang", "wonder"});
    EXPECT_NEAR(u.mean_loglik, -1.098612, 1e-6);
    EXPECT_EQ(u.token_count, 1u);

    b.script = [](const ScoringRequest&) { return std::vector<TokenLogProb>{}; };
    EXPECT_THROW(score_candidate(b, {"p", "t"}), BackendError);
}

TEST(CombineWithPrior, Examples) {
    std::vector<double> scores{2.0, 1.0};
    EXPECT_EQ(combine_with_prior(-1.234, scores, 0, 0.0), -1.234);
    EXPECT_NEAR(combine_with_prior(-5.0, scores, 0, 1.0), -0.313262, 1e-6);
    EXPECT_NEAR(combine_with_prior(-5.0, scores, 0, 1.0), std::log(std::exp(2.0) / (std::exp(2.0) + std::exp(1.0))), 1e-12);
    std::vector<double> uniform{7.0, 7.0, 7.0};
    for (double lambda : {0.1, 0.5, 0.9})
        EXPECT_NEAR(combine_with_prior(-2.0, uniform, 1, lambda), (1 - lambda) * -2.0 + lambda * std::log(1.0 / 3.0), 1e-12);
    // Large scores must not overflow.
    std::vector<double> big{1000.0, 999.0};
    EXPECT_NEAR(combine_with_prior(0.0, big, 0, 1.0), -0.313262, 1e-6);
    EXPECT_THROW(combine_with_prior(0.0, scores, 2, 0.5), ValidationError);
    EXPECT_THROW(combine_with_prior(0.0, scores, 0, 1.5), ValidationError);
}

TEST(Rerank, OrdersByMeanLoglik) {
    std::vector<Passage> ps{{"first", "", "alpha"}, {"second", "", "beta"}};
    auto backend = by_marker({{"alpha", -1.5}, {"beta", -2.5}});
    auto scent = scent_of("s");
    auto r = rerank(backend, "q", "question", &scent, as_candidates(ps), {});
    EXPECT_EQ(r.selected, "first");
    EXPECT_EQ(r.candidates[1].passage_id, "second");

    auto flipped = by_marker({{"alpha", -2.5}, {"beta", -1.5}});
    EXPECT_EQ(rerank(flipped, "q", "question", &scent, as_candidates(ps), {}).selected, "second");
}

TEST(Rerank, TiesKeepRetrievalOrder) {
    std::vector<Passage> ps{{"z", "", "alpha"}, {"a", "", "beta"}, {"m", "", "gamma"}};
    auto backend = by_marker({{"alpha", -1.0}, {"beta", -1.0}, {"gamma", -1.0}});
    auto scent = scent_of("s");
    auto r = rerank(backend, "q", "question", &scent, as_candidates(ps), {});
    EXPECT_EQ(r.candidates[0].passage_id, "z");
    EXPECT_EQ(r.candidates[1].passage_id, "a");
    EXPECT_EQ(r.candidates[2].passage_id, "m");
}

TEST(Rerank, SumAggregation) {
    std::vector<Passage> ps{{"short", "", "alpha"}, {"long", "", "beta"}};
    ScriptedScoringBackend b;
    b.script = [](const ScoringRequest& r) {
        if (r.prefix.find("alpha") != std::string::npos) return std::vector<TokenLogProb>{{"x", -1.0}};
        return std::vector<TokenLogProb>{{"x", -0.6}, {"y", -0.6}};
    };
    auto scent = scent_of("s");
    EXPECT_EQ(rerank(b, "q", "x", &scent, as_candidates(ps), {}).selected, "long");
    EXPECT_EQ(rerank(b, "q", "x", &scent, as_candidates(ps), {}, {ScoringMode::asrank, 0.0, Aggregation::sum}).selected,
              "short");
}

TEST(Rerank, InvariantsOnRandomInputs) {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 40; ++trial) {
        auto corpus = testing::make_random_corpus(rng, 30, 25, 3, 12);
        std::vector<Passage> ps(corpus.passages().begin(), corpus.passages().end());
        std::vector<double> scores(ps.size());
        std::normal_distribution<double> noise(0, 3);
        for (auto& s : scores) s = noise(rng);
        std::sort(scores.begin(), scores.end(), std::greater<>());
        auto cands = as_candidates(ps, scores);
        auto scent = scent_of(testing::make_random_query(rng, 25, 3));
        UnigramBackend uni;
        auto base = rerank(uni, "q", "w1 w2", &scent, cands, {});

        // Sorted, selected is the head, mean = sum / count.
        EXPECT_EQ(base.selected, base.candidates[0].passage_id);
        for (std::size_t i = 0; i < base.candidates.size(); ++i) {
            const auto& c = base.candidates[i];
            EXPECT_GE(c.token_count, 1u);
            EXPECT_NEAR(c.mean_loglik, c.sum_loglik / c.token_count, 1e-9);
            if (i) {
                const auto& p = base.candidates[i - 1];
                EXPECT_TRUE(p.combined_score > c.combined_score ||
                            (p.combined_score == c.combined_score && p.retrieval_rank < c.retrieval_rank));
            }
        }

        // Permutation invariance.
        auto shuffled = cands;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        auto perm = rerank(uni, "q", "w1 w2", &scent, shuffled, {});
        for (std::size_t i = 0; i < base.candidates.size(); ++i)
            EXPECT_EQ(perm.candidates[i].passage_id, base.candidates[i].passage_id);

        // With lambda = 0 the retrieval scores do not matter.
        auto rescored = cands;
        for (auto& c : rescored) c.retrieval_score = noise(rng);
        auto bayes0 = rerank(uni, "q", "w1 w2", &scent, rescored, {}, {ScoringMode::asrank_bayes, 0.0});
        for (std::size_t i = 0; i < base.candidates.size(); ++i)
            EXPECT_EQ(bayes0.candidates[i].passage_id, base.candidates[i].passage_id);

        // A per-query constant added to every loglik leaves the order unchanged.
        double shift = noise(rng) * 10;
        ScriptedScoringBackend shifted;
        shifted.script = [&](const ScoringRequest& r) {
            auto out = score_unigram(r);
            for (auto& t : out) t.logprob += shift;
            return out;
        };
        auto moved = rerank(shifted, "q", "w1 w2", &scent, cands, {});
        // Shifted scores, position by position, equal the originals plus the
        // shift; candidates set apart by a real gap keep their exact place.
        const auto& bc = base.candidates;
        for (std::size_t i = 0; i < bc.size(); ++i) {
            EXPECT_NEAR(moved.candidates[i].combined_score - shift, bc[i].combined_score, 1e-9);
            bool isolated = (i == 0 || bc[i - 1].combined_score - bc[i].combined_score > 1e-9) &&
                            (i + 1 == bc.size() || bc[i].combined_score - bc[i + 1].combined_score > 1e-9);
            if (isolated) EXPECT_EQ(moved.candidates[i].passage_id, bc[i].passage_id);
        }
        // Bayes shift invariance: prior scores offset by a constant.
        auto offset = cands;
        for (auto& c : offset) c.retrieval_score += 123.0;
        auto b1 = rerank(uni, "q", "w1 w2", &scent, cands, {}, {ScoringMode::asrank_bayes, 0.3});
        auto b2 = rerank(uni, "q", "w1 w2", &scent, offset, {}, {ScoringMode::asrank_bayes, 0.3});
        for (std::size_t i = 0; i < b1.candidates.size(); ++i) {
            EXPECT_EQ(b1.candidates[i].passage_id, b2.candidates[i].passage_id);
            EXPECT_NEAR(b1.candidates[i].combined_score, b2.candidates[i].combined_score, 1e-9);
        }
    }
}

TEST(Rerank, OneScoringCallPerCandidateAndParallelDeterminism) {
    std::mt19937_64 rng(1);
    auto corpus = testing::make_random_corpus(rng, 200);
    std::vector<Passage> ps(corpus.passages().begin(), corpus.passages().end());
    auto cands = as_candidates(ps);
    auto scent = scent_of("w1 w3");
    testing::CountingScoringBackend counting;
    auto serial = rerank(counting, "q", "w0", &scent, cands, {});
    EXPECT_EQ(counting.calls(), 200u);
    auto parallel = rerank(counting, "q", "w0", &scent, cands, {}, {ScoringMode::asrank, 0.0, Aggregation::mean, false, 4});
    EXPECT_EQ(counting.calls(), 400u);
    for (std::size_t i = 0; i < ps.size(); ++i) {
        EXPECT_EQ(serial.candidates[i].passage_id, parallel.candidates[i].passage_id);
        EXPECT_EQ(serial.candidates[i].combined_score, parallel.candidates[i].combined_score);
    }
    auto only = rerank(counting, "q", "w0", nullptr, cands, {}, {ScoringMode::retrieval_only});
    EXPECT_EQ(counting.calls(), 400u);
    for (std::size_t i = 0; i < ps.size(); ++i) EXPECT_EQ(only.candidates[i].passage_id, ps[i].id);
}

TEST(Rerank, FailuresSinkOrAbort) {
    std::vector<Passage> ps{{"good", "", "alpha"}, {"bad", "", "beta"}, {"ok", "", "gamma"}};
    auto backend = by_marker({{"alpha", -3.0}, {"gamma", -1.0}});
    auto scent = scent_of("s");
    auto r = rerank(backend, "q", "x", &scent, as_candidates(ps), {});
    EXPECT_TRUE(r.partial);
    EXPECT_EQ(r.candidates[0].passage_id, "ok");
    EXPECT_EQ(r.candidates[2].passage_id, "bad");
    EXPECT_TRUE(r.candidates[2].failed);
    EXPECT_FALSE(r.candidates[2].diagnostic.empty());
    RerankOptions strict;
    strict.strict = true;
    EXPECT_THROW(rerank(backend, "q", "x", &scent, as_candidates(ps), {}, strict), BackendError);
    auto run = to_run(std::vector<RerankResult>{r});
    EXPECT_EQ(run.find("q")->back().passage_id, "bad");
}

TEST(Rerank, Preconditions) {
    std::vector<Passage> ps{{"p", "", "alpha"}};
    UnigramBackend uni;
    EXPECT_THROW(rerank(uni, "q", "x", nullptr, as_candidates(ps), {}), ValidationError);
    auto scent = scent_of("s");
    EXPECT_THROW(rerank(uni, "q", "x", &scent, std::vector<Candidate>{}, {}), ValidationError);
    EXPECT_NO_THROW(rerank(uni, "q", "x", nullptr, as_candidates(ps), {}, {ScoringMode::upr}));
}

TEST(Upr, ScoresPassageGivenQuestion) {
    UnigramBackend uni;
    Passage overlap{"a", "", "stevie wonder sang"};
    Passage disjoint{"b", "", "rain fell today"};
    std::string q = "did stevie wonder sang a song";
    EXPECT_GT(upr_score(uni, q, overlap, 100), upr_score(uni, q, disjoint, 100));
    EXPECT_EQ(upr_score(uni, q, overlap, 100), upr_score(uni, q, overlap, 100));
    // A bare "{question}" prefix with an empty question leaves V = {token}.
    EXPECT_EQ(upr_score(uni, "", Passage{"x", "", "token"}, 100, "{question}"), 0.0);
    // The default prefix contributes "question" and "passage" to the context.
    EXPECT_NEAR(upr_score(uni, "", Passage{"x", "", "token"}, 100), std::log(1.0 / 5.0), 1e-12);
}

TEST(Rerank, ClosedLoopOnSyntheticFixture) {
    auto fx = testing::make_scent_fixture(20);
    auto index = build_index(fx.corpus);
    auto run = retrieve_all(index, fx.qa, 50);
    UnigramBackend uni;
    auto unk = constant_scent("<UNK>");
    int bm25_top1 = 0, gold_top1 = 0, unk_top1 = 0;
    for (std::size_t i = 0; i < fx.qa.size(); ++i) {
        const auto& ex = fx.qa.examples()[i];
        const auto& entries = *run.find(ex.query_id);
        bm25_top1 += entries[0].passage_id == fx.answer_passage[i];
        EXPECT_EQ(entries[0].passage_id, fx.distractor[i]);
        EXPECT_EQ(entries[1].passage_id, fx.answer_passage[i]);
        auto cands = candidates_from_run(entries, fx.corpus, 50);
        auto gold = gold_scent(ex);
        gold_top1 += rerank(uni, ex.query_id, ex.question, &gold, cands, {}).selected == fx.answer_passage[i];
        unk_top1 += rerank(uni, ex.query_id, ex.question, &unk, cands, {}).selected == fx.answer_passage[i];
    }
    EXPECT_EQ(bm25_top1, 0);
    EXPECT_EQ(gold_top1, 20);
    EXPECT_LT(unk_top1, gold_top1);
}

TEST(RerankFiles, SidecarRoundTrip) {
    testing::TempDir dir;
    std::vector<Passage> ps{{"a", "", "alpha beta"}, {"b", "", "beta gamma"}, {"c", "", "delta"}};
    UnigramBackend uni;
    auto scent = scent_of("beta");
    std::vector<RerankResult> results{rerank(uni, "q1", "x", &scent, as_candidates(ps), {}),
                                      rerank(uni, "q2", "y", &scent, as_candidates(ps, {5, 5, 1}), {})};
    write_rerank_sidecar(results, dir / "s.jsonl");
    auto loaded = load_rerank_sidecar(dir / "s.jsonl");
    ASSERT_EQ(loaded.size(), 2u);
    for (std::size_t q = 0; q < 2; ++q) {
        EXPECT_EQ(loaded[q].query_id, results[q].query_id);
        EXPECT_EQ(loaded[q].selected, results[q].selected);
        ASSERT_EQ(loaded[q].candidates.size(), 3u);
        for (std::size_t i = 0; i < 3; ++i) {
            EXPECT_EQ(loaded[q].candidates[i].passage_id, results[q].candidates[i].passage_id);
            EXPECT_EQ(loaded[q].candidates[i].token_count, results[q].candidates[i].token_count);
            EXPECT_NEAR(loaded[q].candidates[i].mean_loglik, results[q].candidates[i].mean_loglik, 1e-12);
        }
    }
    write_rerank_sidecar(loaded, dir / "t.jsonl");
    EXPECT_EQ(testing::read_text(dir / "s.jsonl"), testing::read_text(dir / "t.jsonl"));
    write_rerank_run(results, dir / "r.trec");
    auto run = load_run(dir / "r.trec", RunFormat::trec);
    EXPECT_EQ(run.retriever_name(), "asrank");
    EXPECT_EQ(run.find("q1")->front().passage_id, results[0].selected);
}

}  // namespace
}  // namespace scentrank
