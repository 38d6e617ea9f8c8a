#include "ssn/dataset.hpp"
#include "ssn/errors.hpp"
#include "ssn/synthetic.hpp"
#include "ssn/text.hpp"

#include <doctest.h>

#include <numeric>
#include <set>
#include <sstream>

using namespace ssn;

namespace {

Sample make_labeled(std::string id, LabelVector label, std::size_t answers = 2, std::size_t best = 0) {
    Sample s;
    s.id = std::move(id);
    s.question = "How do I cope with stress at work?";
    for (std::size_t i = 0; i < answers; ++i) s.answers.push_back({"answer " + std::to_string(i), i == best});
    s.label = std::move(label);
    return s;
}

}  // namespace

TEST_CASE("label vector basics") {
    LabelVector v{1, 0, 1};
    CHECK(v.size() == 3);
    CHECK(v[0]);
    CHECK_FALSE(v[1]);
    CHECK(v.count() == 2);
    CHECK(v.to_ints() == std::vector<int>{1, 0, 1});
}

TEST_CASE("dataset invariants per kind") {
    SUBCASE("labeled requires a label") {
        auto s = make_labeled("a", {1, 0, 0});
        s.label.reset();
        CHECK_THROWS_AS(Dataset(DatasetKind::Labeled, {s}), DataError);
    }
    SUBCASE("unlabeled rejects labels") {
        auto s = make_labeled("a", {1, 0, 0});
        CHECK_THROWS_AS(Dataset(DatasetKind::Unlabeled, {s}), DataError);
    }
    SUBCASE("two best answers are rejected") {
        auto s = make_labeled("a", {1, 0, 0});
        s.answers[1].is_best = true;
        CHECK_THROWS_AS(Dataset(DatasetKind::Labeled, {s}), DataError);
    }
    SUBCASE("fused samples hold no answers") {
        auto s = make_labeled("a", {1, 0, 0});
        CHECK_THROWS_AS(Dataset(DatasetKind::Fused, {s}), DataError);
        s.answers.clear();
        CHECK_NOTHROW(Dataset(DatasetKind::Fused, {s}));
    }
    SUBCASE("pseudo samples need at least one confident class") {
        auto s = make_labeled("a", {1, 0, 0});
        s.label_mask = std::vector<std::uint8_t>{0, 0, 0};
        CHECK_THROWS_AS(Dataset(DatasetKind::Pseudo, {s}), DataError);
        s.label_mask = std::vector<std::uint8_t>{1, 0, 1};
        CHECK_NOTHROW(Dataset(DatasetKind::Pseudo, {s}));
    }
    SUBCASE("label width must match class count") {
        CHECK_THROWS_AS(Dataset(DatasetKind::Labeled, {make_labeled("a", {1, 0})}), DataError);
    }
}

TEST_CASE("record round trip") {
    auto s = make_labeled("q1", {0, 1, 1}, 3, 2);
    s.origin = "labeled";
    s.provenance["source"] = "unit";
    Dataset d(DatasetKind::Labeled, {s});
    std::stringstream buf;
    write_dataset(buf, d);
    const auto back = parse_dataset(buf, DatasetKind::Labeled);
    REQUIRE(back.dataset.size() == 1);
    CHECK(back.dataset[0] == s);
}

TEST_CASE("parser drops and strips per the documented rules") {
    std::stringstream in;
    in << R"({"id":"a","question":"q a","answers":[{"text":"x","is_best":false}],"labels":[1,0,0]})" << "\n"
       << R"({"id":"b","question":"q b","answers":[{"text":"x","is_best":true}],"labels":[1,0,0]})" << "\n"
       << R"({"id":"c","question":"q c","answers":[],"labels":[0,1,0]})" << "\n";
    SUBCASE("labeled: no best answer dropped, zero answers kept") {
        const auto r = parse_dataset(in, DatasetKind::Labeled);
        CHECK(r.dataset.size() == 2);
        CHECK(r.dropped_no_best == 1);
    }
    SUBCASE("unlabeled: labels stripped, zero answers dropped") {
        const auto r = parse_dataset(in, DatasetKind::Unlabeled);
        CHECK(r.dataset.size() == 1);
        CHECK(r.labels_stripped == 3);
        CHECK(r.dropped_no_answers == 1);
        CHECK_FALSE(r.dataset[0].label.has_value());
    }
}

TEST_CASE("strict parsing reports the line number") {
    std::stringstream in;
    in << R"({"id":"a","question":"q","answers":[],"labels":[1,0,0]})" << "\n"
       << "{not json\n";
    try {
        (void)parse_dataset(in, DatasetKind::Labeled);
        FAIL("expected RecordError");
    } catch (const RecordError& e) {
        CHECK(e.line() == 2);
    }
}

TEST_CASE("lenient parsing skips bad lines") {
    std::stringstream in;
    in << R"({"id":"a","question":"q","answers":[],"labels":[1,0,0]})" << "\n"
       << R"({"id":"b","question":"q","answers":[],"labels":[1,0]})" << "\n";
    ParseOptions opt;
    opt.strict = false;
    const auto r = parse_dataset(in, DatasetKind::Labeled, opt);
    CHECK(r.dataset.size() == 1);
    CHECK(r.diagnostics.size() == 1);
}

TEST_CASE("answers are capped at K keeping the best answer") {
    auto s = make_labeled("a", {1, 0, 0}, 8, 6);
    std::stringstream in;
    in << serialize_sample(s) << "\n";
    ParseOptions opt;
    opt.max_answers = 3;
    const auto r = parse_dataset(in, DatasetKind::Labeled, opt);
    REQUIRE(r.dataset.size() == 1);
    CHECK(r.dataset[0].answers.size() == 3);
    CHECK(r.dataset[0].has_best_answer());
    CHECK(r.answers_truncated == 1);
}

TEST_CASE("k-fold: 1500 samples in 10 folds gives test folds of 150") {
    std::vector<Sample> samples;
    for (int i = 0; i < 1500; ++i) samples.push_back(make_labeled("s" + std::to_string(i), {1, 0, 0}));
    Dataset d(DatasetKind::Labeled, std::move(samples));
    const auto folds = split_kfold(d, 10, 3);
    REQUIRE(folds.size() == 10);
    std::set<std::string> seen;
    std::size_t total = 0;
    for (const auto& f : folds) {
        CHECK(f.test.size() == 150);
        CHECK(f.train.size() == 1350);
        total += f.test.size();
        for (const auto& s : f.test) seen.insert(s.id);
    }
    CHECK(total == 1500);
    CHECK(seen.size() == 1500);
}

TEST_CASE("k-fold sizes differ by at most one") {
    std::vector<Sample> samples;
    for (int i = 0; i < 23; ++i) samples.push_back(make_labeled("s" + std::to_string(i), {0, 1, 0}));
    Dataset d(DatasetKind::Labeled, std::move(samples));
    const auto folds = split_kfold(d, 5, 1);
    std::size_t lo = 100, hi = 0;
    for (const auto& f : folds) {
        lo = std::min(lo, f.test.size());
        hi = std::max(hi, f.test.size());
    }
    CHECK(hi - lo <= 1);
    CHECK_THROWS_AS(split_kfold(d, 1, 1), ConfigError);
    CHECK_THROWS_AS(split_kfold(d, 24, 1), ConfigError);
}

TEST_CASE("fuse excludes partially confident pseudo samples and strips answers") {
    Dataset labeled(DatasetKind::Labeled, {make_labeled("l", {1, 0, 0})});
    auto full = make_labeled("p1", {1, 1, 0});
    full.label_mask = std::vector<std::uint8_t>{1, 1, 1};
    auto partial = make_labeled("p2", {1, 0, 0});
    partial.label_mask = std::vector<std::uint8_t>{1, 0, 1};
    Dataset pseudo(DatasetKind::Pseudo, {full, partial});
    auto aug = make_labeled("a", {0, 0, 1}, 0);
    Dataset selected(DatasetKind::SelectedAugmented, {aug});

    const auto r = fuse(labeled, pseudo, selected);
    CHECK(r.excluded_partial == 1);
    REQUIRE(r.fused.size() == 3);
    CHECK(r.fused.kind() == DatasetKind::Fused);
    for (const auto& s : r.fused) CHECK(s.answers.empty());
    CHECK(r.fused[1].id == "p1");
    CHECK(r.fused[2].origin == "augmented");
}

TEST_CASE("sentence splitter golden paragraph") {
    const auto got = split_sentences(
        "I need advice, e.g. on budgeting. Is that normal?! Dr. Smith said no.\nThanks anyway  ");
    const std::vector<std::string> want = {"I need advice, e.g. on budgeting.", "Is that normal?!",
                                           "Dr. Smith said no.", "Thanks anyway"};
    CHECK(got == want);
    CHECK(split_sentences("no boundary here") == std::vector<std::string>{"no boundary here"});
}

TEST_CASE("tokenizer lowercases and splits on punctuation") {
    CHECK(tokenize("Hello, World! it's 2024") == std::vector<std::string>{"hello", "world", "it", "s", "2024"});
}

TEST_CASE("fnv1a64 reference values") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("synthetic corpus shape") {
    SyntheticConfig cfg;
    const auto corpus = make_synthetic_corpus(cfg);
    CHECK(corpus.labeled.size() == 200);
    CHECK(corpus.unlabeled.size() == 800);
    CHECK(corpus.test.size() == 400);
    std::size_t network = 0;
    for (const auto& s : corpus.labeled) {
        CHECK(s.label->count() >= 1);
        CHECK(s.label->count() <= 2);
        network += (*s.label)[2] ? 1 : 0;
    }
    const double rate = static_cast<double>(network) / 200.0;
    CHECK(rate > 0.03);
    CHECK(rate < 0.2);
    const auto again = make_synthetic_corpus(cfg);
    CHECK(again.labeled[17] == corpus.labeled[17]);
}
