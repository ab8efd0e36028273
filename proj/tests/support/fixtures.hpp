#pragma once

// Shared test fixtures: temp directories, synthetic corpora and instrumented
// backends. Header-only so every test binary can include it.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <fstream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "scentrank/corpus.hpp"
#include "scentrank/scent.hpp"
#include "scentrank/scoring.hpp"

namespace scentrank::testing {

/// Unique directory removed on destruction.
class TempDir {
  public:
    TempDir() {
        static std::atomic<int> counter{0};
        auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
        path_ = std::filesystem::temp_directory_path() /
                ("scentrank-test-" + std::to_string(stamp) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  private:
    std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Answer-bearing fixture: for each query one passage holds the answer, one
/// "distractor" passage repeats the query terms without it, and ten filler
/// passages cover unrelated topics. With 20 queries that is 50 passages.
struct ScentFixture {
    Corpus corpus;
    QADataset qa;
    std::vector<std::string> answer_passage;  // per query, id of the answer-bearing passage
    std::vector<std::string> distractor;      // per query, id of the keyword-stuffed passage
};

inline ScentFixture make_scent_fixture(std::size_t queries = 20) {
    static const char* kNames[] = {"aurora", "basalt",  "cobalt",   "dynamo",  "ember",  "fjord",  "garnet",
                                   "harbor", "indigo",  "juniper",  "kelvin",  "lumen",  "magnet", "nimbus",
                                   "onyx",   "prairie", "quasar",   "rubicon", "saffron", "tundra", "umber",
                                   "vortex", "willow",  "xenon",    "yarrow",  "zephyr"};
    static const char* kGolds[] = {"kestrel", "falcon",  "osprey",  "heron",   "condor",  "plover",  "merlin",
                                   "harrier", "kite",    "ibis",    "egret",   "curlew",  "petrel",  "gannet",
                                   "puffin",  "tern",    "avocet",  "bittern", "dunlin",  "godwit",  "lapwing",
                                   "shrike",  "siskin",  "linnet",  "bunting", "wagtail"};
    static const char* kFillers[] = {
        "the small harbour town hosted a lively summer festival with music food boats and dancing every evening",
        "heavy rain fell across the northern valley flooding several fields and closing two rural roads overnight",
        "a local bakery introduced sourdough loaves made with ancient grains and sold out before noon each day",
        "engineers replaced the aging railway bridge with a steel arch design that opened to traffic last autumn",
        "the museum exhibit featured pottery shards coins and tools recovered from a coastal excavation site",
        "volunteers planted hundreds of oak saplings along the river bank to slow erosion and shelter wildlife",
        "the chess tournament ended in a tense final round decided by a single endgame blunder under time pressure",
        "a new public library branch offers evening classes in languages painting and basic computer skills",
        "migrating whales were spotted near the cape prompting tour operators to add extra morning departures",
        "the city council approved funding for bicycle lanes connecting the university campus to the old market"};
    ScentFixture f;
    std::vector<Passage> passages;
    std::vector<QAExample> examples;
    for (std::size_t i = 0; i < queries; ++i) {
        std::string name = kNames[i % 26];
        std::string gold = kGolds[i % 26];
        if (i >= 26) {
            name += std::to_string(i);
            gold += std::to_string(i);
        }
        auto qid = "q" + std::to_string(i + 1);
        auto answer_id = "a" + std::to_string(i + 1);
        auto distractor_id = "d" + std::to_string(i + 1);
        passages.push_back({answer_id, "",
                            "after long debate the steering committee gave project " + name + " the codename " + gold +
                                " and " + gold + " it remained for years"});
        passages.push_back({distractor_id, "",
                            "project " + name + " codename " + name + " project " + name + " codename review"});
        examples.push_back({qid, "what codename did project " + name + " receive", {gold}});
        f.answer_passage.push_back(answer_id);
        f.distractor.push_back(distractor_id);
    }
    for (std::size_t j = 0; j < 10; ++j) passages.push_back({"f" + std::to_string(j + 1), "", kFillers[j]});
    f.corpus = Corpus(std::move(passages));
    f.qa = QADataset(std::move(examples));
    return f;
}

/// Random corpus over a Zipf-like vocabulary "w0".."w<vocab-1>".
inline Corpus make_random_corpus(std::mt19937_64& rng, std::size_t docs, std::size_t vocab = 200,
                                 std::size_t min_len = 5, std::size_t max_len = 60) {
    std::vector<double> weights(vocab);
    for (std::size_t i = 0; i < vocab; ++i) weights[i] = 1.0 / static_cast<double>(i + 1);
    std::discrete_distribution<std::size_t> word(weights.begin(), weights.end());
    std::uniform_int_distribution<std::size_t> length(min_len, max_len);
    std::vector<Passage> passages;
    for (std::size_t d = 0; d < docs; ++d) {
        std::string body;
        auto n = length(rng);
        for (std::size_t t = 0; t < n; ++t) {
            if (t) body += ' ';
            body += "w" + std::to_string(word(rng));
        }
        passages.push_back({"doc" + std::to_string(d), "", body});
    }
    return Corpus(std::move(passages));
}

inline std::string make_random_query(std::mt19937_64& rng, std::size_t vocab = 200, std::size_t terms = 4) {
    std::uniform_int_distribution<std::size_t> word(0, vocab - 1);
    std::string q;
    for (std::size_t t = 0; t < terms; ++t) q += (t ? " w" : "w") + std::to_string(word(rng));
    return q;
}

/// Unigram oracle that counts calls.
class CountingScoringBackend final : public ScoringBackend {
  public:
    explicit CountingScoringBackend(UnigramOracleParams params = {}) : inner_(params) {}
    std::vector<TokenLogProb> score(const ScoringRequest& request) override {
        ++calls_;
        return inner_.score(request);
    }
    std::size_t calls() const { return calls_.load(); }

  private:
    UnigramBackend inner_;
    std::atomic<std::size_t> calls_{0};
};

/// Returns fixed logprobs per target text; unknown targets throw BackendError.
class ScriptedScoringBackend final : public ScoringBackend {
  public:
    std::function<std::vector<TokenLogProb>(const ScoringRequest&)> script;
    std::vector<TokenLogProb> score(const ScoringRequest& request) override { return script(request); }
};

/// Completion backend returning a fixed string and counting calls.
class CountingGenerationBackend final : public GenerationBackend {
  public:
    explicit CountingGenerationBackend(std::string text = "mock scent") : text_(std::move(text)) {}
    std::string complete(const GenerationRequest& request) override {
        ++calls_;
        last_prompt_ = request.prompt;
        return text_;
    }
    std::size_t calls() const { return calls_.load(); }
    std::string last_prompt() const { return last_prompt_; }

  private:
    std::string text_;
    std::atomic<std::size_t> calls_{0};
    std::string last_prompt_;
};

/// Sleeps a fixed time per call before delegating to the unigram oracle.
class SleepyScoringBackend final : public ScoringBackend {
  public:
    explicit SleepyScoringBackend(std::chrono::milliseconds delay) : delay_(delay) {}
    std::vector<TokenLogProb> score(const ScoringRequest& request) override {
        std::this_thread::sleep_for(delay_);
        return inner_.score(request);
    }

  private:
    std::chrono::milliseconds delay_;
    UnigramBackend inner_;
};

class SleepyGenerationBackend final : public GenerationBackend {
  public:
    SleepyGenerationBackend(std::chrono::milliseconds delay, std::string text) : delay_(delay), text_(std::move(text)) {}
    std::string complete(const GenerationRequest&) override {
        std::this_thread::sleep_for(delay_);
        return text_;
    }

  private:
    std::chrono::milliseconds delay_;
    std::string text_;
};

}  // namespace scentrank::testing
