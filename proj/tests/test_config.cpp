#include "oracles.hpp"

#include "ssn/checkpoint.hpp"
#include "ssn/config.hpp"
#include "ssn/errors.hpp"
#include "ssn/pipeline.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>

using namespace ssn;

namespace {

std::string error_text(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("defaults validate and round trip through JSON") {
    RunConfig c;
    CHECK_NOTHROW(c.validate());
    const auto tree = default_config_json();
    CHECK(tree.contains("seed"));
    CHECK(tree["data"].contains("classes"));
    CHECK(tree["loss"].contains("tau"));
    const auto back = RunConfig::from_json(tree);
    CHECK(back.to_json() == tree);
    CHECK(back.hash() == RunConfig::from_json(tree).hash());
}

TEST_CASE("derived fields follow their sections") {
    auto tree = default_config_json();
    tree["encoder"]["dim"] = 48;
    tree["seed"] = 9;
    tree["data"]["max_answers"] = 3;
    const auto c = RunConfig::from_json(tree);
    CHECK(c.model.dim == 48);
    CHECK(c.model.max_answers == 3);
    CHECK(c.trainer.seed == 9);
    CHECK(c.qtrain.seed == 9);
    CHECK(c.qtrain.prob_clamp == c.trainer.prob_clamp);
}

TEST_CASE("unknown keys and wrong types are rejected") {
    auto tree = default_config_json();
    CHECK_THROWS_AS(merge_config(tree, nlohmann::json::parse(R"({"loss":{"tua":0.8}})")), ConfigError);
    CHECK_THROWS_AS(merge_config(tree, nlohmann::json::parse(R"({"bogus":1})")), ConfigError);
    auto bad = default_config_json();
    bad["encoder"]["dim"] = "wide";
    CHECK(error_text([&] { (void)RunConfig::from_json(bad); }).find("encoder.dim") != std::string::npos);
}

TEST_CASE("tau = 0.4 is a config error naming loss.tau") {
    auto tree = default_config_json();
    apply_override(tree, "loss.tau=0.4");
    const auto msg = error_text([&] { RunConfig::from_json(tree).validate(); });
    CHECK(msg.find("loss.tau") != std::string::npos);
}

TEST_CASE("validation collects every offending field") {
    auto tree = default_config_json();
    apply_override(tree, "loss.tau=0.4");
    apply_override(tree, "eval.folds=1");
    const auto msg = error_text([&] { RunConfig::from_json(tree).validate(); });
    CHECK(msg.find("loss.tau") != std::string::npos);
    CHECK(msg.find("eval.folds") != std::string::npos);
}

TEST_CASE("layering order: file, environment, overrides") {
    const auto dir = oracle::temp_dir("config-layers");
    const auto file = (dir / "c.json").string();
    std::ofstream(file) << R"({"seed": 5, "loss": {"tau": 0.8}, "trainer": {"batch_size": 16}})";
    ::setenv("SSN_LOSS_TAU", "0.85", 1);
    ::setenv("SSN_AUGMENT_BACKEND", "stub", 1);
    ConfigSources src;
    src.file = file;
    src.overrides = {"trainer.batch_size=8"};
    const auto c = load_config(src);
    ::unsetenv("SSN_LOSS_TAU");
    ::unsetenv("SSN_AUGMENT_BACKEND");
    CHECK(c.seed == 5);
    CHECK(c.trainer.tau == doctest::Approx(0.85));
    CHECK(c.trainer.batch_size == 8);

    src.use_environment = false;
    ::setenv("SSN_LOSS_TAU", "0.95", 1);
    CHECK(load_config(src).trainer.tau == doctest::Approx(0.8));
    ::unsetenv("SSN_LOSS_TAU");
}

TEST_CASE("override syntax") {
    auto tree = default_config_json();
    apply_override(tree, "augment.model=gpt-4o-mini");
    CHECK(tree["augment"]["model"] == "gpt-4o-mini");
    apply_override(tree, "data.classes=[\"a\",\"b\"]");
    CHECK(tree["data"]["classes"].size() == 2);
    CHECK_THROWS_AS(apply_override(tree, "no-equals-sign"), ConfigError);
    CHECK_THROWS_AS(apply_override(tree, "loss.missing=1"), ConfigError);
}

TEST_CASE("missing config file is an I/O error") {
    ConfigSources src;
    src.file = "/nonexistent/ssn.json";
    CHECK_THROWS_AS(load_config(src), IoError);
}

TEST_CASE("section hash ignores unrelated sections") {
    RunConfig a, b;
    b.qtrain.learning_rate = 0.5;
    CHECK(a.section_hash({"encoder", "model"}) == b.section_hash({"encoder", "model"}));
    CHECK(a.hash() != b.hash());
    CHECK(qa_config_hash(a) == qa_config_hash(b));
}

TEST_CASE("checkpoint round trip and guards") {
    const auto dir = oracle::temp_dir("checkpoint");
    RunConfig cfg;
    cfg.encoder.dim = 16;
    cfg = RunConfig::from_json(cfg.to_json());
    const auto params = QAModelParams::init(cfg.model, 3);
    save_qa_checkpoint((dir / "qa").string(), params, cfg, {{"generation", 2}});
    const auto back = load_qa_checkpoint((dir / "qa").string(), cfg);
    CHECK(back.head_w == params.head_w);
    CHECK(back.attn_b == params.attn_b);
    CHECK(read_manifest((dir / "qa").string())["metadata"]["generation"] == 2);

    auto other = cfg;
    other.model.filters = 4;
    CHECK_THROWS_AS(load_qa_checkpoint((dir / "qa").string(), other), ConfigError);
    CHECK_THROWS_AS(load_q_checkpoint((dir / "qa").string(), cfg), ConfigError);
    CHECK_THROWS_AS(load_qa_checkpoint((dir / "missing").string(), cfg), IoError);

    {
        std::fstream f(dir / "qa" / "params.bin", std::ios::in | std::ios::out | std::ios::binary);
        f.seekg(8);
        const char byte = static_cast<char>(f.get() ^ 0x5a);
        f.seekp(8);
        f.put(byte);
    }
    CHECK_THROWS_AS(load_qa_checkpoint((dir / "qa").string(), cfg), DataError);

    cfg.qmodel.hidden = 8;
    const auto q = QModelParams::init(cfg.qmodel, 1);
    save_q_checkpoint((dir / "q").string(), q, cfg);
    CHECK(load_q_checkpoint((dir / "q").string(), cfg).head_w == q.head_w);
}
