#include "ssn/config.hpp"

#include "ssn/errors.hpp"
#include "ssn/text.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace ssn {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json::json_pointer pointer_of(std::string_view dotted) {
    std::string p = "/";
    for (char ch : dotted) p += ch == '.' ? '/' : ch;
    return ordered_json::json_pointer(p);
}

// Every config leaf, bound to its struct field. The same list drives
// serialization, parsing and environment lookup.
template <class Config, class Visitor>
void visit_fields(Config& c, Visitor&& v) {
    v("seed", c.seed);

    v("data.classes", c.classes);
    v("data.max_answers", c.max_answers);
    v("data.labeled", c.data.labeled);
    v("data.unlabeled", c.data.unlabeled);
    v("data.test", c.data.test);

    v("encoder.backend", c.encoder.backend);
    v("encoder.dim", c.encoder.dim);
    v("encoder.model_id", c.encoder.model_id);
    v("encoder.base_url", c.encoder.base_url);
    v("encoder.max_q_sentences", c.encoder.max_q_sentences);
    v("encoder.max_a_sentences", c.encoder.max_a_sentences);

    v("model.kernels", c.model.kernels);
    v("model.filters", c.model.filters);
    v("model.pool", c.model.pool);
    v("model.dropout", c.model.dropout);

    v("loss.tau", c.trainer.tau);
    v("loss.lambda_label", c.trainer.weights.label);
    v("loss.lambda_unlabel", c.trainer.weights.unlabel);
    v("loss.lambda_quality", c.trainer.weights.quality);
    v("loss.prob_clamp", c.trainer.prob_clamp);

    v("trainer.batch_size", c.trainer.batch_size);
    v("trainer.learning_rate", c.trainer.learning_rate);
    v("trainer.optimizer", c.trainer.optimizer);
    v("trainer.lr_end_factor", c.trainer.lr_end_factor);
    v("trainer.min_epochs", c.trainer.min_epochs);
    v("trainer.max_epochs", c.trainer.max_epochs);
    v("trainer.loss_epsilon", c.trainer.loss_epsilon);
    v("trainer.generation_epsilon", c.trainer.generation_epsilon);
    v("trainer.max_generations", c.trainer.max_generations);
    v("trainer.validation_fraction", c.trainer.validation_fraction);
    v("trainer.grad_clip", c.trainer.grad_clip);

    v("augment.enabled", c.augment.enabled);
    v("augment.backend", c.augment.backend);
    v("augment.model", c.augment.http.model);
    v("augment.base_url", c.augment.http.base_url);
    v("augment.temperature", c.augment.http.temperature);
    v("augment.max_retries", c.augment.http.max_retries);
    v("augment.timeout_ms", c.augment.http.timeout);
    v("augment.backoff_ms", c.augment.http.backoff);
    v("augment.audit_log", c.augment.http.audit_log);
    v("augment.stub_noise", c.augment.stub_noise);
    v("augment.batches", c.augment.generation.batches);
    v("augment.samples_per_batch", c.augment.generation.samples_per_batch);
    v("augment.few_shot", c.augment.generation.few_shot);
    v("augment.max_in_flight", c.augment.generation.max_in_flight);
    v("augment.label_names", c.augment.generation.label_names);
    v("augment.domain", c.augment.generation.domain);
    v("augment.k", c.augment.selection.k);
    v("augment.delta", c.augment.selection.delta);
    v("augment.eta", c.augment.selection.eta);

    v("qmodel.vocab_buckets", c.qmodel.vocab_buckets);
    v("qmodel.embed_dim", c.qmodel.embed_dim);
    v("qmodel.hidden", c.qmodel.hidden);
    v("qmodel.max_tokens", c.qmodel.max_tokens);
    v("qmodel.dropout", c.qmodel.dropout);
    v("qmodel.threshold", c.qmodel.threshold);
    v("qmodel.batch_size", c.qtrain.batch_size);
    v("qmodel.learning_rate", c.qtrain.learning_rate);
    v("qmodel.lr_end_factor", c.qtrain.lr_end_factor);
    v("qmodel.min_epochs", c.qtrain.min_epochs);
    v("qmodel.max_epochs", c.qtrain.max_epochs);
    v("qmodel.loss_epsilon", c.qtrain.loss_epsilon);
    v("qmodel.grad_clip", c.qtrain.grad_clip);

    v("eval.folds", c.eval.folds);
    v("eval.full_pipeline", c.eval.full_pipeline);
    v("eval.roc_points", c.eval.roc_points);

    v("synth.labeled", c.synth.labeled);
    v("synth.unlabeled", c.synth.unlabeled);
    v("synth.test", c.synth.test);
    v("synth.informational_rate", c.synth.informational_rate);
    v("synth.emotional_rate", c.synth.emotional_rate);
    v("synth.network_rate", c.synth.network_rate);
    v("synth.cue_noise", c.synth.cue_noise);
    v("synth.seed", c.synth.seed);

    v("output.dir", c.output_dir);
}

struct Writer {
    ordered_json& tree;

    template <class T>
    void operator()(std::string_view path, const T& value) {
        tree[pointer_of(path)] = value;
    }
    void operator()(std::string_view path, const std::chrono::milliseconds& value) {
        tree[pointer_of(path)] = value.count();
    }
    void operator()(std::string_view path, const std::vector<KernelSize>& kernels) {
        auto arr = ordered_json::array();
        for (const auto& k : kernels) arr.push_back({k.rows, k.cols});
        tree[pointer_of(path)] = arr;
    }
};

struct Reader {
    const ordered_json& tree;
    std::vector<std::string>& errors;

    const ordered_json* find(std::string_view path) {
        const auto ptr = pointer_of(path);
        if (!tree.contains(ptr)) {
            errors.push_back(std::string(path) + ": missing");
            return nullptr;
        }
        return &tree.at(ptr);
    }
    void bad(std::string_view path, const char* expected, const ordered_json& got) {
        errors.push_back(std::string(path) + ": expected " + expected + ", got " + got.dump());
    }

    void operator()(std::string_view path, std::size_t& out) {
        const auto* j = find(path);
        if (j == nullptr) return;
        if (j->is_number_integer() && j->get<std::int64_t>() >= 0) out = j->get<std::size_t>();
        else bad(path, "a non-negative integer", *j);
    }
    void operator()(std::string_view path, double& out) {
        const auto* j = find(path);
        if (j == nullptr) return;
        if (j->is_number() && std::isfinite(j->get<double>())) out = j->get<double>();
        else bad(path, "a finite number", *j);
    }
    void operator()(std::string_view path, bool& out) {
        const auto* j = find(path);
        if (j == nullptr) return;
        if (j->is_boolean()) out = j->get<bool>();
        else bad(path, "true or false", *j);
    }
    void operator()(std::string_view path, std::string& out) {
        const auto* j = find(path);
        if (j == nullptr) return;
        if (j->is_string()) out = j->get<std::string>();
        else bad(path, "a string", *j);
    }
    void operator()(std::string_view path, std::chrono::milliseconds& out) {
        const auto* j = find(path);
        if (j == nullptr) return;
        if (j->is_number_integer() && j->get<std::int64_t>() >= 0) out = std::chrono::milliseconds(j->get<std::int64_t>());
        else bad(path, "a non-negative integer (milliseconds)", *j);
    }
    void operator()(std::string_view path, std::vector<std::string>& out) {
        const auto* j = find(path);
        if (j == nullptr) return;
        const bool ok = j->is_array() && std::all_of(j->begin(), j->end(), [](const auto& e) { return e.is_string(); });
        if (ok) out = j->get<std::vector<std::string>>();
        else bad(path, "an array of strings", *j);
    }
    void operator()(std::string_view path, std::vector<KernelSize>& out) {
        const auto* j = find(path);
        if (j == nullptr) return;
        std::vector<KernelSize> kernels;
        bool ok = j->is_array();
        for (const auto& e : ok ? *j : ordered_json::array()) {
            if (!e.is_array() || e.size() != 2 || !e[0].is_number_unsigned() || !e[1].is_number_unsigned()) {
                ok = false;
                break;
            }
            kernels.push_back({e[0].get<std::size_t>(), e[1].get<std::size_t>()});
        }
        if (ok) out = std::move(kernels);
        else bad(path, "an array of [rows, cols] pairs", *j);
    }
};

void merge_into(ordered_json& tree, const nlohmann::json& layer, const std::string& prefix,
                std::vector<std::string>& errors) {
    for (const auto& [key, value] : layer.items()) {
        const std::string path = prefix.empty() ? key : prefix + "." + key;
        if (!tree.contains(key)) {
            errors.push_back(path + ": unknown key");
            continue;
        }
        auto& slot = tree[key];
        if (slot.is_object()) {
            if (!value.is_object()) {
                errors.push_back(path + ": expected an object, got " + value.dump());
                continue;
            }
            merge_into(slot, value, path, errors);
        } else {
            slot = value;
        }
    }
}

void throw_if(const std::vector<std::string>& errors, const std::string& heading) {
    if (errors.empty()) return;
    std::string msg = heading;
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
}

// Text from the environment or --set becomes the leaf's type: raw text for
// string leaves, JSON for everything else.
ordered_json parse_leaf(const ordered_json& current, const std::string& text, const std::string& where) {
    if (current.is_string()) return text;
    auto parsed = ordered_json::parse(text, nullptr, false);
    if (parsed.is_discarded()) throw ConfigError(where + ": cannot parse '" + text + "'");
    return parsed;
}

void collect_leaves(const ordered_json& node, const std::string& prefix, std::vector<std::string>& out) {
    for (const auto& [key, value] : node.items()) {
        const std::string path = prefix.empty() ? key : prefix + "." + key;
        if (value.is_object()) collect_leaves(value, path, out);
        else out.push_back(path);
    }
}

}  // namespace

ordered_json default_config_json() { return RunConfig{}.to_json(); }

ordered_json RunConfig::to_json() const {
    ordered_json tree = ordered_json::object();
    visit_fields(*this, Writer{tree});
    return tree;
}

RunConfig RunConfig::from_json(const ordered_json& tree) {
    RunConfig c;
    std::vector<std::string> errors;
    if (!tree.is_object()) throw ConfigError("config: expected a JSON object");
    {
        // Unknown keys are rejected even when the tree did not pass through merge_config.
        auto scratch = default_config_json();
        merge_into(scratch, tree, "", errors);
    }
    visit_fields(c, Reader{tree, errors});
    throw_if(errors, "invalid configuration:");

    c.model.dim = c.encoder.dim;
    c.model.max_q_sentences = c.encoder.max_q_sentences;
    c.model.max_a_sentences = c.encoder.max_a_sentences;
    c.model.max_answers = c.max_answers;
    c.model.num_classes = c.classes.size();
    c.trainer.seed = c.seed;
    c.qmodel.num_classes = c.classes.size();
    c.qtrain.prob_clamp = c.trainer.prob_clamp;
    c.qtrain.seed = c.seed;
    c.augment.generation.seed = c.seed;
    c.synth.max_answers = c.max_answers;
    c.validate();
    return c;
}

void RunConfig::validate() const {
    std::vector<std::string> errors;
    auto check = [&](auto&& fn) {
        try {
            fn();
        } catch (const ConfigError& e) {
            errors.push_back(e.what());
        }
    };
    auto require = [&](bool ok, const std::string& what) {
        if (!ok) errors.push_back(what);
    };

    require(!classes.empty(), "data.classes must not be empty");
    require(max_answers >= 1, "data.max_answers must be >= 1");
    require(encoder.backend == "stub" || encoder.backend == "transformer",
            "encoder.backend must be 'stub' or 'transformer'");
    require(encoder.dim >= 1, "encoder.dim must be >= 1");
    check([&] { model.validate(); });
    check([&] { trainer.validate(); });
    require(augment.backend == "stub" || augment.backend == "openai", "augment.backend must be 'stub' or 'openai'");
    require(augment.stub_noise >= 0.0 && augment.stub_noise <= 1.0, "augment.stub_noise must be in [0, 1]");
    require(augment.http.temperature >= 0.0 && augment.http.temperature <= 2.0,
            "augment.temperature must be in [0, 2]");
    require(augment.http.timeout.count() > 0, "augment.timeout_ms must be > 0");
    require(augment.generation.label_names.size() == classes.size(),
            "augment.label_names must have one entry per data.classes entry");
    check([&] { augment.generation.validate(); });
    check([&] { augment.selection.validate(); });
    require(augment.selection.eta >= 0.0 && augment.selection.eta <= 1.0, "augment.eta must be in [0, 1]");
    check([&] { qmodel.validate(); });
    check([&] { qtrain.validate(); });
    require(eval.folds >= 2, "eval.folds must be >= 2");
    for (const auto& [name, rate] : {std::pair{"synth.informational_rate", synth.informational_rate},
                                     std::pair{"synth.emotional_rate", synth.emotional_rate},
                                     std::pair{"synth.network_rate", synth.network_rate},
                                     std::pair{"synth.cue_noise", synth.cue_noise}})
        require(rate >= 0.0 && rate <= 1.0, std::string(name) + " must be in [0, 1]");
    require(!output_dir.empty(), "output.dir must not be empty");
    throw_if(errors, "invalid configuration:");
}

std::string RunConfig::hash() const { return hex64(fnv1a64(to_json().dump())); }

std::string RunConfig::section_hash(std::initializer_list<std::string_view> sections) const {
    const auto tree = to_json();
    ordered_json picked = ordered_json::object();
    for (auto s : sections) {
        const std::string key(s);
        if (!tree.contains(key)) throw ConfigError("unknown config section '" + key + "'");
        picked[key] = tree[key];
    }
    return hex64(fnv1a64(picked.dump()));
}

void merge_config(ordered_json& tree, const nlohmann::json& layer) {
    if (!layer.is_object()) throw ConfigError("config file: expected a JSON object at the top level");
    std::vector<std::string> errors;
    merge_into(tree, layer, "", errors);
    throw_if(errors, "invalid configuration:");
}

void apply_override(ordered_json& tree, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0)
        throw ConfigError("--set expects section.key=value, got '" + std::string(assignment) + "'");
    const std::string path(assignment.substr(0, eq));
    const std::string text(assignment.substr(eq + 1));
    const auto ptr = pointer_of(path);
    if (!tree.contains(ptr) || tree.at(ptr).is_object()) throw ConfigError(path + ": unknown key");
    tree[ptr] = parse_leaf(tree.at(ptr), text, path);
}

void apply_environment(ordered_json& tree) {
    std::vector<std::string> leaves;
    collect_leaves(tree, "", leaves);
    for (const auto& path : leaves) {
        std::string name = "SSN_";
        for (char ch : path) name += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
        const char* value = std::getenv(name.c_str());
        if (value == nullptr) continue;
        const auto ptr = pointer_of(path);
        tree[ptr] = parse_leaf(tree.at(ptr), value, name);
    }
}

RunConfig load_config(const ConfigSources& sources) {
    auto tree = default_config_json();
    if (sources.file) {
        std::ifstream in(*sources.file);
        if (!in) throw IoError("cannot open config file '" + *sources.file + "'");
        const auto layer = nlohmann::json::parse(in, nullptr, false);
        if (layer.is_discarded()) throw ConfigError("config file '" + *sources.file + "' is not valid JSON");
        merge_config(tree, layer);
    }
    if (sources.use_environment) apply_environment(tree);
    for (const auto& o : sources.overrides) apply_override(tree, o);
    return RunConfig::from_json(tree);
}

}  // namespace ssn
