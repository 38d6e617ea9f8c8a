#include "ssn/pipeline.hpp"

#include "ssn/checkpoint.hpp"
#include "ssn/errors.hpp"
#include "ssn/text.hpp"

#include <sstream>

namespace ssn {

using ordered_json = nlohmann::ordered_json;

std::string qa_config_hash(const RunConfig& config) {
    auto tree = config.to_json();
    ordered_json shape;
    shape["classes"] = tree["data"]["classes"];
    shape["max_answers"] = tree["data"]["max_answers"];
    shape["encoder"] = tree["encoder"];
    shape["model"] = tree["model"];
    return hex64(fnv1a64(shape.dump()));
}

std::string q_config_hash(const RunConfig& config) {
    auto tree = config.to_json();
    ordered_json shape;
    shape["classes"] = tree["data"]["classes"];
    for (const char* key : {"vocab_buckets", "embed_dim", "hidden", "max_tokens", "dropout", "threshold"})
        shape[key] = tree["qmodel"][key];
    return hex64(fnv1a64(shape.dump()));
}

namespace {

template <class Params>
std::vector<ConstTensorView> const_views(const Params& params) {
    return params.tensors();
}

}  // namespace

void save_qa_checkpoint(const std::string& dir, const QAModelParams& params, const RunConfig& config,
                        const ordered_json& metadata) {
    save_checkpoint(dir, {"qa-model", qa_config_hash(config), metadata}, const_views(params));
}

QAModelParams load_qa_checkpoint(const std::string& dir, const RunConfig& config) {
    auto params = QAModelParams::zeros(config.model);
    load_checkpoint(dir, {"qa-model", qa_config_hash(config), {}}, params.tensors());
    if (!params.all_finite()) throw NumericalError("checkpoint '" + dir + "' holds non-finite parameters");
    return params;
}

void save_q_checkpoint(const std::string& dir, const QModelParams& params, const RunConfig& config,
                       const ordered_json& metadata) {
    save_checkpoint(dir, {"q-model", q_config_hash(config), metadata}, const_views(params));
}

QModelParams load_q_checkpoint(const std::string& dir, const RunConfig& config) {
    auto params = QModelParams::zeros(config.qmodel);
    load_checkpoint(dir, {"q-model", q_config_hash(config), {}}, params.tensors());
    if (!params.all_finite()) throw NumericalError("checkpoint '" + dir + "' holds non-finite parameters");
    return params;
}

std::unique_ptr<LlmClient> make_llm_client(const RunConfig& config) {
    if (config.augment.backend == "stub")
        return std::make_unique<StubLlmClient>(StubLlmConfig{config.augment.stub_noise, config.seed});
    if (config.augment.backend == "openai") return std::make_unique<HttpChatClient>(config.augment.http);
    throw ConfigError("augment.backend: unknown backend '" + config.augment.backend + "'");
}

PseudoStage pseudo_label_stage(const RunConfig& config, const Encoder& encoder, const Dataset& labeled,
                               const Dataset& unlabeled, const TrainCallbacks& callbacks) {
    const auto shape = config.model.encoding_shape();
    const auto enc_l = encode_dataset(encoder, labeled, shape);
    const auto enc_u = encode_dataset(encoder, unlabeled, shape);
    auto qa = self_train(enc_l, enc_u, config.model, config.trainer, callbacks);
    auto pseudo = predict_pseudo(qa.params, config.model, enc_u, config.trainer.tau);
    return {std::move(qa), std::move(pseudo)};
}

GenerationResult augment_stage(const RunConfig& config, const Encoder& encoder, LlmClient& client,
                               const Dataset& labeled) {
    auto gen = generate_candidates(client, labeled, config.augment.generation);
    const LabeledIndex index(labeled, encoder);
    score_candidates(gen.candidates, index, encoder, config.augment.selection);
    return gen;
}

PipelineResult run_pipeline(const RunConfig& config, const Dataset& labeled, const Dataset* unlabeled,
                            const Encoder& encoder, LlmClient* client, const PipelineOptions& options) {
    auto log = [&](const std::string& msg) {
        if (options.log) options.log(msg);
    };
    const std::size_t C = config.num_classes();
    if (labeled.num_classes() != C)
        throw ConfigError("data.classes has " + std::to_string(C) + " entries but D_l has " +
                          std::to_string(labeled.num_classes()) + " classes");

    std::optional<PseudoStage> ssl;
    Dataset pseudo(DatasetKind::Pseudo, {}, C);
    if (options.self_training) {
        if (unlabeled == nullptr) throw ConfigError("self-training needs an unlabeled set (data.unlabeled)");
        log("stage 1-2: self-training on " + std::to_string(labeled.size()) + " labeled and " +
            std::to_string(unlabeled->size()) + " unlabeled samples");
        ssl = pseudo_label_stage(config, encoder, labeled, *unlabeled, options.qa_callbacks);
        pseudo = ssl->pseudo.dataset;
        log("pseudo-labeled " + std::to_string(pseudo.size()) + " samples (best generation " +
            std::to_string(ssl->qa.state.best_generation) + ")");
    }

    std::optional<GenerationResult> aug;
    Dataset selected(DatasetKind::SelectedAugmented, {}, C);
    if (options.augmentation && config.augment.enabled) {
        if (client == nullptr) throw ConfigError("augmentation needs an LLM backend");
        aug = augment_stage(config, encoder, *client, labeled);
        selected = selected_dataset(aug->candidates, C);
        log("augmentation kept " + std::to_string(selected.size()) + " of " + std::to_string(aug->candidates.size()) +
            " candidates");
    }

    auto fused = fuse(labeled, pseudo, selected);
    log("fused set: " + std::to_string(fused.fused.size()) + " questions (" + std::to_string(fused.excluded_partial) +
        " partially confident pseudo samples left out)");
    auto q = train_q(fused.fused, config.qmodel, config.qtrain, options.on_q_epoch);
    return PipelineResult{std::move(ssl),          std::move(aug), std::move(pseudo), std::move(selected),
                          std::move(fused.fused), fused.excluded_partial, std::move(q)};
}

namespace {

struct Scored {
    std::vector<LabelVector> truth;
    Eigen::MatrixXd scores;
};

Scored score_test(const QModelParams& params, const RunConfig& config, const Dataset& test) {
    if (test.empty()) throw DataError("test set is empty");
    Scored out;
    std::vector<std::string> texts;
    for (const auto& s : test) {
        if (!s.label) throw DataError("test sample '" + s.id + "' has no label");
        out.truth.push_back(*s.label);
        texts.push_back(s.question);
    }
    out.scores = predict_q_batch(params, config.qmodel, texts);
    return out;
}

}  // namespace

Metrics evaluate_q(const QModelParams& params, const RunConfig& config, const Dataset& test) {
    const auto s = score_test(params, config, test);
    return evaluate_scores(s.truth, s.scores, config.classes, config.qmodel.threshold);
}

ordered_json roc_points_json(const QModelParams& params, const RunConfig& config, const Dataset& test) {
    const auto s = score_test(params, config, test);
    ordered_json out;
    auto points = [](const std::vector<RocPoint>& roc) {
        auto arr = ordered_json::array();
        for (const auto& p : roc) arr.push_back({{"fpr", p.fpr}, {"tpr", p.tpr}, {"threshold", p.threshold}});
        return arr;
    };
    out["micro"] = points(micro_roc(s.truth, s.scores));
    out["per_class"] = ordered_json::object();
    for (std::size_t c = 0; c < config.num_classes(); ++c) {
        std::vector<int> truth;
        std::vector<double> scores;
        for (std::size_t i = 0; i < s.truth.size(); ++i) {
            truth.push_back(s.truth[i][c] ? 1 : 0);
            scores.push_back(s.scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)));
        }
        try {
            out["per_class"][config.classes[c]] = points(roc_curve(truth, scores));
        } catch (const DataError&) {
            out["per_class"][config.classes[c]] = nullptr;  // one class absent from the test fold
        }
    }
    return out;
}

MetricsReport cross_validate(const RunConfig& config, const Dataset& labeled, const Dataset* unlabeled,
                             const Encoder& encoder, LlmClient* client, const PipelineOptions& options) {
    const auto folds = split_kfold(labeled, config.eval.folds, config.seed);
    MetricsReport report;
    report.class_names = config.classes;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        try {
            if (options.log)
                options.log("fold " + std::to_string(f + 1) + "/" + std::to_string(folds.size()) + ": " +
                            std::to_string(folds[f].train.size()) + " train, " +
                            std::to_string(folds[f].test.size()) + " test");
            const auto result = run_pipeline(config, folds[f].train, unlabeled, encoder, client, options);
            report.folds.push_back(evaluate_q(result.q, config, folds[f].test));
        } catch (const Error& e) {
            throw Error(e.code(), "fold " + std::to_string(f + 1) + ": " + e.what());
        }
    }
    std::ostringstream note;
    note << config.eval.folds << "-fold cross-validation over D_l (seed " << config.seed << ").";
    if (options.self_training)
        note << " D_u is shared by all folds; pseudo-labels come from each fold's own Q&A model.";
    if (options.augmentation && config.augment.enabled)
        note << " Augmentation prompts and neighbor scoring use the fold's training split only.";
    if (!options.self_training && !(options.augmentation && config.augment.enabled))
        note << " Supervised question-only classifier.";
    report.note = note.str();
    return report;
}

ordered_json compare_reports(const MetricsReport& a, const MetricsReport& b) {
    if (a.folds.size() != b.folds.size())
        throw DataError("reports have different fold counts (" + std::to_string(a.folds.size()) + " vs " +
                        std::to_string(b.folds.size()) + ")");
    ordered_json out;
    out["folds"] = a.folds.size();
    const std::pair<const char*, double (*)(const Metrics&)> metrics[] = {
        {"micro_precision", [](const Metrics& m) { return m.micro.precision; }},
        {"micro_recall", [](const Metrics& m) { return m.micro.recall; }},
        {"micro_f1", [](const Metrics& m) { return m.micro.f1; }},
    };
    auto row = [&](std::span<const double> va, std::span<const double> vb) {
        ordered_json r;
        r["mean_a"] = summarize(va).mean;
        r["mean_b"] = summarize(vb).mean;
        r["mean_difference"] = summarize(va).mean - summarize(vb).mean;
        r["wilcoxon_p"] = a.folds.size() <= 20 ? ordered_json(wilcoxon_signed_rank(va, vb)) : ordered_json(nullptr);
        return r;
    };
    for (const auto& [name, get] : metrics) {
        std::vector<double> va, vb;
        for (std::size_t i = 0; i < a.folds.size(); ++i) {
            va.push_back(get(a.folds[i]));
            vb.push_back(get(b.folds[i]));
        }
        out[name] = row(va, vb);
    }
    std::vector<double> va, vb;
    for (std::size_t i = 0; i < a.folds.size(); ++i)
        if (a.folds[i].micro_auc && b.folds[i].micro_auc) {
            va.push_back(*a.folds[i].micro_auc);
            vb.push_back(*b.folds[i].micro_auc);
        }
    out["micro_auc"] = va.empty() ? ordered_json(nullptr) : row(va, vb);
    return out;
}

}  // namespace ssn
