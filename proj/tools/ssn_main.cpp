// ssn: command-line entry points for every pipeline stage.

#include "CLI11.hpp"

#include "ssn/augmentation.hpp"
#include "ssn/config.hpp"
#include "ssn/dataset.hpp"
#include "ssn/errors.hpp"
#include "ssn/pipeline.hpp"
#include "ssn/synthetic.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using namespace ssn;

namespace {

bool g_quiet = false;

void note(const std::string& msg) {
    if (!g_quiet) std::cerr << "[ssn] " << msg << "\n";
}

struct Common {
    std::string config_path;
    std::uint64_t seed = 0;
    CLI::Option* seed_opt = nullptr;
    std::string out;
    std::vector<std::string> sets;
    bool overwrite = false;
};

// Per-stage input paths given on the command line; they land in data.* so
// the effective config records them.
struct Inputs {
    std::string labeled, unlabeled, test, pseudo, augmented, selected, checkpoint, input;
};

RunConfig resolve(const Common& c, const Inputs& in) {
    ConfigSources src;
    if (!c.config_path.empty()) src.file = c.config_path;
    src.overrides = c.sets;
    if (c.seed_opt != nullptr && c.seed_opt->count() > 0) src.overrides.push_back("seed=" + std::to_string(c.seed));
    if (!c.out.empty()) src.overrides.push_back("output.dir=" + c.out);
    if (!in.labeled.empty()) src.overrides.push_back("data.labeled=" + in.labeled);
    if (!in.unlabeled.empty()) src.overrides.push_back("data.unlabeled=" + in.unlabeled);
    if (!in.test.empty()) src.overrides.push_back("data.test=" + in.test);
    return load_config(src);
}

// Output directory of one command. Every artifact is claimed up front: an
// existing one aborts the command unless --overwrite was given.
class Outputs {
public:
    Outputs(const RunConfig& config, bool overwrite) : dir_(config.output_dir), overwrite_(overwrite) {}

    void claim(const std::vector<std::string>& names) {
        for (const auto& n : names) {
            const auto p = dir_ / n;
            if (!fs::exists(p)) continue;
            if (!overwrite_) throw ConfigError("refusing to overwrite '" + p.string() + "'; pass --overwrite");
            std::error_code ec;
            fs::remove_all(p, ec);
            if (ec) throw IoError("cannot remove '" + p.string() + "': " + ec.message());
        }
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw IoError("cannot create output directory '" + dir_.string() + "': " + ec.message());
    }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    void write(const std::string& name, const std::string& content) const {
        std::ofstream out(path(name), std::ios::trunc);
        out << content;
        if (!out) throw IoError("cannot write '" + path(name) + "'");
    }

private:
    fs::path dir_;
    bool overwrite_;
};

void write_effective(const Outputs& out, const RunConfig& config, const std::string& command) {
    out.write(command + ".config.json", config.to_json().dump(2) + "\n");
}

std::string require_path(const std::string& value, const std::string& key, const std::string& flag) {
    if (value.empty()) throw ConfigError(key + " is required (pass " + flag + " or set it in the config)");
    return value;
}

Dataset load(const std::string& path, DatasetKind kind, const RunConfig& config) {
    ParseOptions opts;
    opts.num_classes = config.num_classes();
    opts.max_answers = config.max_answers;
    auto r = load_dataset(path, kind, opts);
    std::string extra;
    if (r.dropped_no_best) extra += ", " + std::to_string(r.dropped_no_best) + " dropped without a best answer";
    if (r.dropped_no_answers) extra += ", " + std::to_string(r.dropped_no_answers) + " dropped without answers";
    if (r.labels_stripped) extra += ", " + std::to_string(r.labels_stripped) + " labels stripped";
    if (r.answers_truncated) extra += ", " + std::to_string(r.answers_truncated) + " answer lists truncated";
    note("loaded " + std::to_string(r.dataset.size()) + " " + std::string(to_string(kind)) + " samples from " + path +
         extra);
    return std::move(r.dataset);
}

std::unique_ptr<LlmClient> llm_for(RunConfig config, const Outputs& out) {
    if (config.augment.backend == "openai" && config.augment.http.audit_log.empty())
        config.augment.http.audit_log = out.path("llm_audit.jsonl");
    return make_llm_client(config);
}

ordered_json loss_json(const LossBreakdown& l) {
    return {{"total", l.total}, {"label", l.label_term}, {"unlabel", l.unlabel_term}, {"quality", l.quality_term}};
}

ordered_json generation_json(const GenerationRecord& g) {
    ordered_json j;
    j["event"] = "generation";
    j["generation"] = g.generation;
    j["admitted_new"] = g.admitted_new;
    j["admitted_total"] = g.admitted_total;
    j["epochs"] = g.epochs;
    j["loss"] = loss_json(g.loss);
    j["validation_f1"] = g.validation_f1;
    return j;
}

// Log file plus checkpoints for a self-training run.
TrainCallbacks qa_logging(const Outputs& out, const RunConfig& config, std::ofstream& log) {
    TrainCallbacks cb;
    cb.on_epoch = [&log](const EpochRecord& r) {
        ordered_json j;
        j["event"] = "epoch";
        j["generation"] = r.generation;
        j["epoch"] = r.epoch;
        j["learning_rate"] = r.learning_rate;
        j["grad_norm"] = r.grad_norm;
        j["loss"] = loss_json(r.loss);
        log << j.dump() << "\n";
    };
    cb.on_generation = [&out, &config, &log](const GenerationRecord& g, const QAModelParams& params) {
        log << generation_json(g).dump() << "\n";
        log.flush();
        char name[32];
        std::snprintf(name, sizeof name, "qa/gen-%02zu", g.generation);
        save_qa_checkpoint(out.path(name), params, config, generation_json(g));
        note("generation " + std::to_string(g.generation) + ": " + std::to_string(g.admitted_total) +
             " pseudo-labeled, validation micro-F1 " + std::to_string(g.validation_f1));
    };
    return cb;
}

std::function<void(const QEpochRecord&)> q_logging(std::ofstream& log) {
    return [&log](const QEpochRecord& r) {
        ordered_json j;
        j["event"] = "epoch";
        j["epoch"] = r.epoch;
        j["learning_rate"] = r.learning_rate;
        j["loss"] = r.loss;
        log << j.dump() << "\n";
    };
}

std::ofstream open_log(const Outputs& out, const std::string& name) {
    std::ofstream log(out.path(name), std::ios::trunc);
    if (!log) throw IoError("cannot write '" + out.path(name) + "'");
    return log;
}

ordered_json state_summary(const TrainState& s) {
    ordered_json j;
    j["generations"] = s.history.size();
    j["best_generation"] = s.best_generation;
    j["admitted_total"] = s.pseudo.size();
    j["validation_size"] = s.validation_size;
    j["skipped_no_answers"] = s.skipped_no_answers;
    j["history"] = ordered_json::array();
    for (const auto& g : s.history) j["history"].push_back(generation_json(g));
    return j;
}

void write_report(const Outputs& out, const std::string& stem, const MetricsReport& report) {
    out.write(stem + ".json", report.to_json().dump(2) + "\n");
    out.write(stem + ".txt", report.to_table());
}

std::vector<double> sweep_grid() {
    std::vector<double> etas;
    for (int i = 0; i <= 20; ++i) etas.push_back(i / 20.0);
    return etas;
}

// ---------------------------------------------------------------------------

void cmd_synth(const Common& c, const Inputs& in) {
    const auto config = resolve(c, in);
    Outputs out(config, c.overwrite);
    out.claim({"labeled.jsonl", "unlabeled.jsonl", "test.jsonl", "synth.config.json"});
    const auto corpus = make_synthetic_corpus(config.synth);
    save_dataset(out.path("labeled.jsonl"), corpus.labeled);
    save_dataset(out.path("unlabeled.jsonl"), corpus.unlabeled);
    save_dataset(out.path("test.jsonl"), corpus.test);
    write_effective(out, config, "synth");
    note("wrote " + std::to_string(corpus.labeled.size()) + " labeled, " + std::to_string(corpus.unlabeled.size()) +
         " unlabeled and " + std::to_string(corpus.test.size()) + " test samples to " + config.output_dir);
}

void cmd_train_qa(const Common& c, const Inputs& in) {
    const auto config = resolve(c, in);
    const auto labeled = load(require_path(config.data.labeled, "data.labeled", "--labeled"), DatasetKind::Labeled,
                              config);
    const auto unlabeled = load(require_path(config.data.unlabeled, "data.unlabeled", "--unlabeled"),
                                DatasetKind::Unlabeled, config);
    Outputs out(config, c.overwrite);
    out.claim({"qa", "train_qa_log.jsonl", "train_qa_summary.json", "train-qa.config.json"});
    write_effective(out, config, "train-qa");
    const auto encoder = make_encoder(config.encoder);
    const auto shape = config.model.encoding_shape();
    const auto enc_l = encode_dataset(*encoder, labeled, shape);
    const auto enc_u = encode_dataset(*encoder, unlabeled, shape);

    auto log = open_log(out, "train_qa_log.jsonl");
    const auto result = self_train(enc_l, enc_u, config.model, config.trainer, qa_logging(out, config, log));
    auto summary = state_summary(result.state);
    summary["encoder"] = encoder->identity();
    save_qa_checkpoint(out.path("qa/best"), result.params, config, summary);
    out.write("train_qa_summary.json", summary.dump(2) + "\n");
    note("trained " + std::to_string(result.state.history.size()) + " generations; best generation " +
         std::to_string(result.state.best_generation));
}

void cmd_pseudo_label(const Common& c, const Inputs& in) {
    const auto config = resolve(c, in);
    const auto unlabeled = load(require_path(config.data.unlabeled, "data.unlabeled", "--unlabeled"),
                                DatasetKind::Unlabeled, config);
    Outputs out(config, c.overwrite);
    const auto ckpt = in.checkpoint.empty() ? out.path("qa/best") : in.checkpoint;
    const auto params = load_qa_checkpoint(ckpt, config);
    out.claim({"pseudo.jsonl", "pseudo-label.config.json"});
    write_effective(out, config, "pseudo-label");
    const auto encoder = make_encoder(config.encoder);
    const auto enc_u = encode_dataset(*encoder, unlabeled, config.model.encoding_shape());
    const auto pseudo = predict_pseudo(params, config.model, enc_u, config.trainer.tau);
    save_dataset(out.path("pseudo.jsonl"), pseudo.dataset);
    std::size_t full = 0;
    for (const auto& s : pseudo.dataset) full += s.all_confident() ? 1 : 0;
    note("pseudo-labeled " + std::to_string(pseudo.dataset.size()) + " of " + std::to_string(unlabeled.size()) +
         " samples (" + std::to_string(full) + " confident on every class)");
}

void cmd_augment(const Common& c, const Inputs& in) {
    const auto config = resolve(c, in);
    const auto labeled = load(require_path(config.data.labeled, "data.labeled", "--labeled"), DatasetKind::Labeled,
                              config);
    Outputs out(config, c.overwrite);
    auto client = llm_for(config, out);  // credential check before touching outputs
    out.claim({"augmented.jsonl", "augment_batches.json", "augment.config.json"});
    write_effective(out, config, "augment");
    const auto gen = generate_candidates(*client, labeled, config.augment.generation);
    save_dataset(out.path("augmented.jsonl"), candidate_dataset(gen.candidates, config.num_classes()));
    ordered_json batches = ordered_json::array();
    for (const auto& b : gen.batches) {
        batches.push_back({{"batch", b.batch},
                           {"prompt_hash", b.prompt_hash},
                           {"response_id", b.response_id},
                           {"parsed", b.parsed},
                           {"malformed", b.malformed},
                           {"all_labels_true", b.all_labels_true},
                           {"error", b.error}});
        if (!b.error.empty()) note("batch " + std::to_string(b.batch) + " failed: " + b.error);
    }
    out.write("augment_batches.json", ordered_json{{"backend", client->identity()}, {"batches", batches}}.dump(2) +
                                          "\n");
    note("generated " + std::to_string(gen.candidates.size()) + " candidates with " + client->identity());
}

void cmd_select(const Common& c, const Inputs& in, bool sweep) {
    const auto config = resolve(c, in);
    const auto labeled = load(require_path(config.data.labeled, "data.labeled", "--labeled"), DatasetKind::Labeled,
                              config);
    const auto augmented = load(require_path(in.augmented, "augmented input", "--augmented"), DatasetKind::Augmented,
                                config);
    Outputs out(config, c.overwrite);
    std::vector<std::string> claims = {"selected.jsonl", "candidates.jsonl", "select.config.json"};
    if (sweep) claims.push_back("eta_sweep.json");
    out.claim(claims);
    write_effective(out, config, "select");
    const auto encoder = make_encoder(config.encoder);
    auto candidates = candidates_from_dataset(augmented);
    const LabeledIndex index(labeled, *encoder);
    score_candidates(candidates, index, *encoder, config.augment.selection);
    const auto selected = selected_dataset(candidates, config.num_classes());
    save_dataset(out.path("selected.jsonl"), selected);
    std::string archive;
    for (const auto& cand : candidates) archive += archive_record(cand, &labeled) + "\n";
    out.write("candidates.jsonl", archive);
    if (sweep) {
        const auto etas = sweep_grid();
        ordered_json j;
        j["delta"] = config.augment.selection.delta;
        j["k"] = config.augment.selection.k;
        j["candidates"] = candidates.size();
        j["points"] = ordered_json::array();
        for (const auto& p : eta_sweep(candidates, config.augment.selection.delta, etas))
            j["points"].push_back({{"eta", p.eta}, {"kept", p.kept}});
        out.write("eta_sweep.json", j.dump(2) + "\n");
    }
    note("kept " + std::to_string(selected.size()) + " of " + std::to_string(candidates.size()) + " candidates (eta " +
         std::to_string(config.augment.selection.eta) + ")");
}

void cmd_train_q(const Common& c, const Inputs& in) {
    const auto config = resolve(c, in);
    const auto labeled = load(require_path(config.data.labeled, "data.labeled", "--labeled"), DatasetKind::Labeled,
                              config);
    const auto pseudo = in.pseudo.empty() ? Dataset(DatasetKind::Pseudo, {}, config.num_classes())
                                          : load(in.pseudo, DatasetKind::Pseudo, config);
    const auto selected = in.selected.empty() ? Dataset(DatasetKind::SelectedAugmented, {}, config.num_classes())
                                              : load(in.selected, DatasetKind::SelectedAugmented, config);
    Outputs out(config, c.overwrite);
    out.claim({"q", "fused.jsonl", "train_q_log.jsonl", "train-q.config.json"});
    write_effective(out, config, "train-q");
    const auto fused = fuse(labeled, pseudo, selected);
    save_dataset(out.path("fused.jsonl"), fused.fused);
    note("fused set: " + std::to_string(fused.fused.size()) + " questions (" + std::to_string(fused.excluded_partial) +
         " partially confident pseudo samples left out)");
    auto log = open_log(out, "train_q_log.jsonl");
    const auto params = train_q(fused.fused, config.qmodel, config.qtrain, q_logging(log));
    save_q_checkpoint(out.path("q"), params, config,
                      {{"fused", fused.fused.size()}, {"excluded_partial", fused.excluded_partial}});
    note("saved question classifier to " + out.path("q"));
}

void cmd_evaluate(const Common& c, const Inputs& in) {
    const auto config = resolve(c, in);
    const auto test = load(require_path(config.data.test, "data.test", "--test"), DatasetKind::Labeled, config);
    Outputs out(config, c.overwrite);
    const auto params = load_q_checkpoint(in.checkpoint.empty() ? out.path("q") : in.checkpoint, config);
    std::vector<std::string> claims = {"metrics.json", "metrics.txt", "evaluate.config.json"};
    if (config.eval.roc_points) claims.push_back("roc.json");
    out.claim(claims);
    write_effective(out, config, "evaluate");
    MetricsReport report;
    report.class_names = config.classes;
    report.folds.push_back(evaluate_q(params, config, test));
    report.note = "held-out evaluation on " + std::to_string(test.size()) + " samples";
    write_report(out, "metrics", report);
    if (config.eval.roc_points) out.write("roc.json", roc_points_json(params, config, test).dump(2) + "\n");
    std::cout << report.to_table();
}

void cmd_predict(const Common& c, const Inputs& in) {
    const auto config = resolve(c, in);
    Outputs out(config, c.overwrite);
    const auto params = load_q_checkpoint(in.checkpoint.empty() ? out.path("q") : in.checkpoint, config);
    const auto input = require_path(in.input, "input", "--input");
    std::ifstream file(input);
    if (!file) throw IoError("cannot open '" + input + "'");
    std::vector<std::string> ids, texts;
    std::string line;
    for (std::size_t no = 1; std::getline(file, line); ++no) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw RecordError(no, "malformed JSON");
        if (j.contains("schema")) continue;
        if (!j.contains("question") || !j["question"].is_string()) throw RecordError(no, "missing 'question'");
        ids.push_back(j.value("id", std::to_string(no)));
        texts.push_back(j["question"].get<std::string>());
    }
    out.claim({"predictions.jsonl", "predict.config.json"});
    write_effective(out, config, "predict");
    const auto probs = predict_q_batch(params, config.qmodel, texts);
    std::string body;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        ordered_json j;
        j["id"] = ids[i];
        j["probabilities"] = ordered_json::array();
        j["label"] = ordered_json::array();
        for (Eigen::Index k = 0; k < probs.cols(); ++k) {
            const double p = probs(static_cast<Eigen::Index>(i), k);
            j["probabilities"].push_back(p);
            j["label"].push_back(p >= config.qmodel.threshold ? 1 : 0);
        }
        body += j.dump() + "\n";
    }
    out.write("predictions.jsonl", body);
    note("wrote " + std::to_string(ids.size()) + " predictions");
}

void cmd_cv(const Common& c, const Inputs& in, bool compare) {
    const auto config = resolve(c, in);
    const auto labeled = load(require_path(config.data.labeled, "data.labeled", "--labeled"), DatasetKind::Labeled,
                              config);
    std::optional<Dataset> unlabeled;
    if (config.eval.full_pipeline)
        unlabeled = load(require_path(config.data.unlabeled, "data.unlabeled", "--unlabeled"), DatasetKind::Unlabeled,
                         config);
    Outputs out(config, c.overwrite);
    auto client = config.eval.full_pipeline && config.augment.enabled ? llm_for(config, out) : nullptr;
    std::vector<std::string> claims = {"cv_report.json", "cv_report.txt", "cv.config.json"};
    if (compare)
        for (const char* n : {"cv_baseline.json", "cv_baseline.txt", "cv_comparison.json"}) claims.push_back(n);
    out.claim(claims);
    write_effective(out, config, "cv");
    const auto encoder = make_encoder(config.encoder);

    PipelineOptions opts;
    opts.self_training = config.eval.full_pipeline;
    opts.augmentation = config.eval.full_pipeline;
    opts.log = note;
    const auto report = cross_validate(config, labeled, unlabeled ? &*unlabeled : nullptr, *encoder, client.get(),
                                       opts);
    write_report(out, "cv_report", report);
    std::cout << report.to_table();
    if (compare) {
        PipelineOptions base = opts;
        base.self_training = false;
        base.augmentation = false;
        const auto baseline = cross_validate(config, labeled, nullptr, *encoder, nullptr, base);
        write_report(out, "cv_baseline", baseline);
        out.write("cv_comparison.json", compare_reports(report, baseline).dump(2) + "\n");
    }
}

void cmd_run(const Common& c, const Inputs& in) {
    const auto config = resolve(c, in);
    const auto labeled = load(require_path(config.data.labeled, "data.labeled", "--labeled"), DatasetKind::Labeled,
                              config);
    const auto unlabeled = load(require_path(config.data.unlabeled, "data.unlabeled", "--unlabeled"),
                                DatasetKind::Unlabeled, config);
    const auto test = load(require_path(config.data.test, "data.test", "--test"), DatasetKind::Labeled, config);
    Outputs out(config, c.overwrite);
    auto client = config.augment.enabled ? llm_for(config, out) : nullptr;
    out.claim({"qa", "q", "train_qa_log.jsonl", "train_q_log.jsonl", "pseudo.jsonl", "augmented.jsonl",
               "candidates.jsonl", "selected.jsonl", "fused.jsonl", "metrics.json", "metrics.txt", "run.config.json"});
    write_effective(out, config, "run");
    const auto encoder = make_encoder(config.encoder);

    auto qa_log = open_log(out, "train_qa_log.jsonl");
    auto q_log = open_log(out, "train_q_log.jsonl");
    PipelineOptions opts;
    opts.log = note;
    opts.qa_callbacks = qa_logging(out, config, qa_log);
    opts.on_q_epoch = q_logging(q_log);
    const auto result = run_pipeline(config, labeled, &unlabeled, *encoder, client.get(), opts);

    save_qa_checkpoint(out.path("qa/best"), result.ssl->qa.params, config, state_summary(result.ssl->qa.state));
    save_dataset(out.path("pseudo.jsonl"), result.pseudo);
    if (result.augmentation) {
        save_dataset(out.path("augmented.jsonl"),
                     candidate_dataset(result.augmentation->candidates, config.num_classes()));
        std::string archive;
        for (const auto& cand : result.augmentation->candidates) archive += archive_record(cand, &labeled) + "\n";
        out.write("candidates.jsonl", archive);
    }
    save_dataset(out.path("selected.jsonl"), result.selected);
    save_dataset(out.path("fused.jsonl"), result.fused);
    save_q_checkpoint(out.path("q"), result.q, config, {{"fused", result.fused.size()}});

    MetricsReport report;
    report.class_names = config.classes;
    report.folds.push_back(evaluate_q(result.q, config, test));
    report.note = "four-stage pipeline, held-out evaluation on " + std::to_string(test.size()) + " samples";
    write_report(out, "metrics", report);
    std::cout << report.to_table();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semi-supervised multi-label classification of social-support needs"};
    app.require_subcommand(1);
    app.fallthrough();

    Common common;
    Inputs in;
    bool eta_sweep_flag = false;
    bool compare = false;
    app.add_option("--config", common.config_path, "JSON config file");
    common.seed_opt = app.add_option("--seed", common.seed, "Seed for every stochastic choice");
    app.add_option("--out", common.out, "Output directory (output.dir)");
    app.add_option("--set", common.sets, "Override one key, e.g. --set loss.tau=0.8")->take_all();
    app.add_flag("--overwrite", common.overwrite, "Replace existing outputs");
    app.add_flag("-q,--quiet", g_quiet, "No progress messages");

    auto* synth = app.add_subcommand("synth", "Write a seeded synthetic corpus");
    auto* train_qa = app.add_subcommand("train-qa", "Warm-up and self-training of the Q&A model");
    train_qa->add_option("--labeled", in.labeled, "D_l");
    train_qa->add_option("--unlabeled", in.unlabeled, "D_u");
    auto* pseudo = app.add_subcommand("pseudo-label", "Pseudo-label D_u with a Q&A checkpoint");
    pseudo->add_option("--checkpoint", in.checkpoint, "Q&A checkpoint directory (default <out>/qa/best)");
    pseudo->add_option("--unlabeled", in.unlabeled, "D_u");
    auto* augment = app.add_subcommand("augment", "Generate candidate samples with the LLM backend");
    augment->add_option("--labeled", in.labeled, "D_l");
    auto* select = app.add_subcommand("select", "Score candidates and keep those above eta");
    select->add_option("--augmented", in.augmented, "D_a")->required();
    select->add_option("--labeled", in.labeled, "D_l");
    select->add_flag("--eta-sweep", eta_sweep_flag, "Also write kept counts for eta = 0, 0.05, ..., 1");
    auto* train_q = app.add_subcommand("train-q", "Train the question classifier on the fused set");
    train_q->add_option("--labeled", in.labeled, "D_l");
    train_q->add_option("--pseudo", in.pseudo, "D_u*");
    train_q->add_option("--selected", in.selected, "D_a*");
    auto* evaluate = app.add_subcommand("evaluate", "Evaluate a question classifier on labeled data");
    evaluate->add_option("--checkpoint", in.checkpoint, "Q checkpoint directory (default <out>/q)");
    evaluate->add_option("--test", in.test, "Labeled test set");
    auto* predict = app.add_subcommand("predict", "Label questions with a question classifier");
    predict->add_option("--checkpoint", in.checkpoint, "Q checkpoint directory (default <out>/q)");
    predict->add_option("--input", in.input, "JSONL with id and question per line")->required();
    auto* cv = app.add_subcommand("cv", "k-fold cross-validation");
    cv->add_option("--labeled", in.labeled, "D_l");
    cv->add_option("--unlabeled", in.unlabeled, "D_u (shared across folds)");
    cv->add_flag("--compare", compare, "Also run the supervised baseline and a paired Wilcoxon test");
    auto* run = app.add_subcommand("run", "All four stages plus evaluation");
    run->add_option("--labeled", in.labeled, "D_l");
    run->add_option("--unlabeled", in.unlabeled, "D_u");
    run->add_option("--test", in.test, "Labeled test set");

    try {
        app.parse(argc, argv);
        if (*synth) cmd_synth(common, in);
        else if (*train_qa) cmd_train_qa(common, in);
        else if (*pseudo) cmd_pseudo_label(common, in);
        else if (*augment) cmd_augment(common, in);
        else if (*select) cmd_select(common, in, eta_sweep_flag);
        else if (*train_q) cmd_train_q(common, in);
        else if (*evaluate) cmd_evaluate(common, in);
        else if (*predict) cmd_predict(common, in);
        else if (*cv) cmd_cv(common, in, compare);
        else if (*run) cmd_run(common, in);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(ssn::ExitCode::Config);
    } catch (const ssn::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
