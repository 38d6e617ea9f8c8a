#include "ssn/encoder.hpp"
#include "ssn/errors.hpp"

#include <doctest.h>

#include <set>
#include <string>

using namespace ssn;

TEST_CASE("hashing encoder is deterministic and unit norm") {
    HashingEncoder enc(64);
    const auto a = enc.encode_one("I feel lonely after moving");
    const auto b = enc.encode_one("I feel lonely after moving");
    CHECK(a.size() == 64);
    CHECK(a == b);
    CHECK(a.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(enc.encode_one("!!!"), DataError);
}

TEST_CASE("hashing encoder separates a 1k-text corpus") {
    HashingEncoder enc(128);
    std::set<std::vector<double>> seen;
    for (int i = 0; i < 1000; ++i) {
        const auto v = enc.encode_one("question number " + std::to_string(i) + " about support");
        seen.insert(std::vector<double>(v.data(), v.data() + v.size()));
    }
    CHECK(seen.size() == 1000);
}

TEST_CASE("sentence matrix pads and truncates") {
    HashingEncoder enc(16);
    const auto s = encode_sentences(enc, "One. Two. Three.", 2);
    CHECK(s.count == 2);
    CHECK(s.rows.rows() == 2);
    const auto t = encode_sentences(enc, "Only one", 4);
    CHECK(t.count == 1);
    CHECK(t.rows.row(1).norm() == 0.0);
    CHECK(t.rows.row(3).norm() == 0.0);
}

TEST_CASE("encoded sample pads answers to K") {
    HashingEncoder enc(16);
    Sample s;
    s.id = "x";
    s.question = "How can I find a support group? I moved recently.";
    s.answers = {{"Try a local meetup.", false}, {"Call a helpline. They listen.", true}};
    const auto e = encode_sample(enc, s, {3, 2, 4});
    CHECK(e.answer_count == 2);
    CHECK(e.max_answers() == 4);
    CHECK(e.q_sent.rows() == 3);
    CHECK(e.q_sent_count == 2);
    CHECK(e.a_sent[1].rows() == 2);
    CHECK(e.a_sent_count[1] == 2);
    CHECK(e.best_answer == std::optional<std::size_t>(1));
    CHECK(e.a_doc[3].norm() == 0.0);
    CHECK(e.a_sent[2].norm() == 0.0);
}

TEST_CASE("encoder factory") {
    EncoderConfig cfg;
    cfg.dim = 32;
    CHECK(make_encoder(cfg)->dim() == 32);
    cfg.backend = "nope";
    CHECK_THROWS_AS(make_encoder(cfg), ConfigError);
}
