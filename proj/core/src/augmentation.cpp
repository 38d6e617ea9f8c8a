#include "ssn/augmentation.hpp"

#include "ssn/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

namespace ssn {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
using Eigen::Index;

std::string number_word(std::size_t n) {
    static const char* words[] = {"zero", "one", "two", "three", "four", "five",
                                  "six",  "seven", "eight", "nine", "ten"};
    return n < 11 ? words[n] : std::to_string(n);
}

std::string quoted_list(std::span<const std::string> names) {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i > 0) out += (i + 1 == names.size()) ? (names.size() > 2 ? ", and " : " and ") : ", ";
        out += "\"" + names[i] + "\"";
    }
    return out;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

// Body of the first ``` fence, or the whole text.
std::string strip_fence(std::string_view text) {
    const auto open = text.find("```");
    if (open == std::string_view::npos) return std::string(text);
    const auto body = text.find('\n', open);
    if (body == std::string_view::npos) return std::string(text);
    const auto close = text.find("```", body);
    return std::string(text.substr(body + 1, close == std::string_view::npos ? std::string_view::npos : close - body - 1));
}

std::optional<bool> as_flag(const json& v) {
    if (v.is_boolean()) return v.get<bool>();
    if (v.is_number_integer()) {
        const auto i = v.get<long long>();
        if (i == 0 || i == 1) return i == 1;
        return std::nullopt;
    }
    if (v.is_string()) {
        std::string s = v.get<std::string>();
        std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
        if (s == "true") return true;
        if (s == "false") return false;
    }
    return std::nullopt;
}

void take_item(const json& item, std::span<const std::string> label_names, ParsedBatch& out) {
    if (!item.is_object()) {
        ++out.malformed;
        return;
    }
    const auto q = item.find("question");
    if (q == item.end() || !q->is_string() || trim(q->get<std::string>()).empty()) {
        ++out.malformed;
        return;
    }
    LabelVector label(label_names.size());
    for (std::size_t c = 0; c < label_names.size(); ++c) {
        const auto it = item.find(label_names[c]);
        const auto flag = it == item.end() ? std::nullopt : as_flag(*it);
        if (!flag) {
            ++out.malformed;
            return;
        }
        label.set(c, *flag);
    }
    if (label_names.size() > 1 && label.count() == label_names.size()) {
        ++out.all_labels_true;
        return;
    }
    AugCandidate cand;
    cand.question = trim(q->get<std::string>());
    cand.label = std::move(label);
    out.candidates.push_back(std::move(cand));
}

}  // namespace

void GenerationBatchSpec::validate() const {
    if (requested_count < 1) throw ConfigError("augment.samples_per_batch must be >= 1");
    if (few_shot.empty()) throw ConfigError("generation batch needs at least one few-shot sample");
    if (label_names.empty()) throw ConfigError("augment.label_names must not be empty");
    for (const auto& s : few_shot) {
        if (!s.label) throw ConfigError("few-shot sample '" + s.id + "' has no label");
        if (s.label->size() != label_names.size())
            throw ConfigError("few-shot sample '" + s.id + "' does not match augment.label_names");
    }
}

std::string build_prompt(const GenerationBatchSpec& spec) {
    spec.validate();
    const auto names = quoted_list(spec.label_names);
    const auto count = std::to_string(spec.requested_count);
    std::ostringstream p;
    p << "Context\n\n"
      << "You are a data generator capable of producing new samples and corresponding labels based on a few given "
         "examples, i.e., Few-shot Samples. Your data generation focuses on "
      << spec.domain << "-related questions and answers. Each item in the list below contains a question from an online "
      << spec.domain << " community and the corresponding best answer. The labels are " << names
      << ". Each item indicates whether the question reflects a need for one or more types of support.\n\n"
      << "Instruction\n\n"
      << "Please generate " << count
      << " new samples, each consisting of a question and corresponding labels. These samples should meet the "
         "following requirements:\n\n"
      << spec.balance_directive << " All " << number_word(spec.label_names.size()) << " labels (" << names
      << ") should not be True simultaneously in any instance.\n\n"
      << "Ensure the novelty of the generated samples; they should not just rephrase existing ones but instead offer "
         "new perspectives or scenarios.\n\n"
      << "The generated samples must be of high quality, reflecting realistic and relatable situations in online "
      << spec.domain << " discussions.\n\n"
      << "Output format: a JSON array only. Each element is an object with a \"question\" string and one true/false "
         "field per label name.\n\n"
      << "Few-shot Samples\n\n";
    for (const auto& s : spec.few_shot) {
        ordered_json item;
        item["question"] = s.question;
        if (const auto best = s.best_answer()) item["best_answer"] = s.answers[*best].text;
        for (std::size_t c = 0; c < spec.label_names.size(); ++c) item[spec.label_names[c]] = (*s.label)[c];
        p << item.dump() << "\n";
    }
    p << "\n" << count << " new samples:\n";
    return p.str();
}

ParsedBatch parse_generated(std::string_view response, std::span<const std::string> label_names) {
    ParsedBatch out;
    const std::string body = trim(strip_fence(response));
    json doc = json::parse(body, nullptr, false);
    if (!doc.is_discarded() && doc.is_object() && doc.contains("samples")) doc = doc["samples"];
    if (!doc.is_discarded() && doc.is_array()) {
        for (const auto& item : doc) take_item(item, label_names, out);
    } else if (!doc.is_discarded() && doc.is_object()) {
        take_item(doc, label_names, out);
    } else {
        std::istringstream lines(body);
        std::string line;
        while (std::getline(lines, line)) {
            line = trim(line);
            if (!line.empty() && line.back() == ',') line.pop_back();
            if (line.empty() || line == "[" || line == "]") continue;
            const json item = json::parse(line, nullptr, false);
            if (item.is_discarded()) {
                ++out.malformed;
                continue;
            }
            take_item(item, label_names, out);
        }
    }
    if (out.candidates.empty())
        throw GenerationError("generation response held no usable sample (" + std::to_string(out.malformed) +
                                  " malformed, " + std::to_string(out.all_labels_true) + " with every label true)",
                              std::string(response));
    return out;
}

Eigen::VectorXd l2_normalized(Eigen::VectorXd v) {
    const double n = v.norm();
    if (n > 0.0) v /= n;
    return v;
}

LabeledIndex::LabeledIndex(Eigen::MatrixXd embeddings, std::vector<LabelVector> labels)
    : embeddings_(std::move(embeddings)), labels_(std::move(labels)) {
    if (static_cast<std::size_t>(embeddings_.rows()) != labels_.size())
        throw DataError("labeled index: embedding rows and labels differ in count");
    for (Index i = 0; i < embeddings_.rows(); ++i) {
        const double n = embeddings_.row(i).norm();
        if (n > 0.0) embeddings_.row(i) /= n;
    }
}

LabeledIndex::LabeledIndex(const Dataset& labeled, const Encoder& encoder) {
    std::vector<std::string> texts;
    for (const auto& s : labeled) {
        if (!s.label) throw DataError("labeled index: sample '" + s.id + "' has no label");
        texts.push_back(s.question);
        labels_.push_back(*s.label);
    }
    const auto vecs = encoder.encode_batch(texts);
    embeddings_.resize(static_cast<Index>(vecs.size()), static_cast<Index>(encoder.dim()));
    for (std::size_t i = 0; i < vecs.size(); ++i) embeddings_.row(static_cast<Index>(i)) = l2_normalized(vecs[i]).transpose();
}

std::vector<Neighbor> LabeledIndex::nearest(const Eigen::VectorXd& query, std::size_t k) const {
    if (k == 0) throw DataError("neighbor count k must be >= 1");
    if (k > labels_.size())
        throw DataError("need at least k = " + std::to_string(k) + " labeled samples, have " +
                        std::to_string(labels_.size()));
    if (query.size() != embeddings_.cols()) throw DataError("query width does not match the labeled index");
    const Eigen::VectorXd sims = embeddings_ * l2_normalized(query);
    std::vector<std::size_t> order(labels_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          const double sa = sims[static_cast<Index>(a)], sb = sims[static_cast<Index>(b)];
                          return sa != sb ? sa > sb : a < b;
                      });
    std::vector<Neighbor> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back({order[i], sims[static_cast<Index>(order[i])]});
    return out;
}

double consistency(const LabelVector& claimed, std::span<const Neighbor> neighbors, const LabeledIndex& index) {
    if (neighbors.empty()) throw DataError("consistency needs at least one neighbor");
    std::size_t same = 0;
    for (const auto& n : neighbors) same += index.label(n.index) == claimed ? 1 : 0;
    return static_cast<double>(same) / static_cast<double>(neighbors.size());
}

double diversity(std::span<const Neighbor> neighbors) {
    if (neighbors.empty()) throw DataError("diversity needs at least one neighbor");
    double sum = 0.0;
    for (const auto& n : neighbors) sum += n.similarity;
    return 1.0 - sum / static_cast<double>(neighbors.size());
}

void SelectionConfig::validate() const {
    if (k < 1) throw ConfigError("augment.k must be >= 1");
    if (!(delta >= 0.0 && delta <= 1.0)) throw ConfigError("augment.delta must be in [0, 1]");
    if (!std::isfinite(eta)) throw ConfigError("augment.eta must be finite");
}

void apply_selection(std::vector<AugCandidate>& candidates, double delta, double eta) {
    for (auto& c : candidates) {
        c.score = delta * c.consistency + (1.0 - delta) * c.diversity;
        c.kept = c.score > eta;
    }
}

void score_candidates(std::vector<AugCandidate>& candidates, const LabeledIndex& index, const Encoder& encoder,
                      const SelectionConfig& config) {
    config.validate();
    if (candidates.empty()) return;
    std::vector<std::string> texts;
    for (const auto& c : candidates) texts.push_back(c.question);
    const auto vecs = encoder.encode_batch(texts);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        auto& c = candidates[i];
        c.embedding = l2_normalized(vecs[i]);
        c.neighbors = index.nearest(c.embedding, config.k);
        c.consistency = consistency(c.label, c.neighbors, index);
        c.diversity = diversity(c.neighbors);
    }
    apply_selection(candidates, config.delta, config.eta);
}

namespace {

Sample to_sample(const AugCandidate& c) {
    Sample s;
    s.id = c.id;
    s.question = c.question;
    s.label = c.label;
    s.origin = "augmented";
    s.provenance = c.provenance;
    return s;
}

}  // namespace

Dataset selected_dataset(std::span<const AugCandidate> candidates, std::size_t num_classes) {
    std::vector<Sample> out;
    for (const auto& c : candidates)
        if (c.kept) out.push_back(to_sample(c));
    return Dataset(DatasetKind::SelectedAugmented, std::move(out), num_classes);
}

Dataset candidate_dataset(std::span<const AugCandidate> candidates, std::size_t num_classes) {
    std::vector<Sample> out;
    for (const auto& c : candidates) out.push_back(to_sample(c));
    return Dataset(DatasetKind::Augmented, std::move(out), num_classes);
}

std::vector<AugCandidate> candidates_from_dataset(const Dataset& augmented) {
    std::vector<AugCandidate> out;
    for (const auto& s : augmented) {
        if (!s.label) throw DataError("augmented sample '" + s.id + "' has no label");
        AugCandidate c;
        c.id = s.id;
        c.question = s.question;
        c.label = *s.label;
        c.provenance = s.provenance;
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<SweepPoint> eta_sweep(std::span<const AugCandidate> candidates, double delta, std::span<const double> etas) {
    std::vector<SweepPoint> out;
    for (double eta : etas) {
        std::size_t kept = 0;
        for (const auto& c : candidates) kept += (delta * c.consistency + (1.0 - delta) * c.diversity) > eta ? 1 : 0;
        out.push_back({eta, kept});
    }
    return out;
}

std::string archive_record(const AugCandidate& candidate, const Dataset* labeled) {
    auto rec = ordered_json::parse(serialize_sample(to_sample(candidate)));
    rec["consistency"] = candidate.consistency;
    rec["diversity"] = candidate.diversity;
    rec["score"] = candidate.score;
    rec["kept"] = candidate.kept;
    rec["neighbors"] = ordered_json::array();
    for (const auto& n : candidate.neighbors) {
        ordered_json nj;
        nj["id"] = labeled && n.index < labeled->size() ? (*labeled)[n.index].id : std::to_string(n.index);
        nj["similarity"] = n.similarity;
        rec["neighbors"].push_back(std::move(nj));
    }
    return rec.dump();
}

void AugmentConfig::validate() const {
    if (batches < 1) throw ConfigError("augment.batches must be >= 1");
    if (samples_per_batch < 1) throw ConfigError("augment.samples_per_batch must be >= 1");
    if (few_shot < 1) throw ConfigError("augment.few_shot must be >= 1");
    if (max_in_flight < 1) throw ConfigError("augment.max_in_flight must be >= 1");
    if (label_names.empty()) throw ConfigError("augment.label_names must not be empty");
}

std::size_t minority_class(const Dataset& labeled) {
    std::vector<std::size_t> counts(labeled.num_classes(), 0);
    for (const auto& s : labeled)
        if (s.label)
            for (std::size_t c = 0; c < counts.size(); ++c) counts[c] += (*s.label)[c] ? 1 : 0;
    return static_cast<std::size_t>(std::min_element(counts.begin(), counts.end()) - counts.begin());
}

GenerationBatchSpec batch_spec(const Dataset& labeled, const AugmentConfig& config, std::size_t b) {
    if (labeled.empty()) throw DataError("augmentation needs labeled samples for few-shot prompts");
    const auto minority = minority_class(labeled);
    std::vector<std::size_t> rare, rest;
    for (std::size_t i = 0; i < labeled.size(); ++i) {
        const auto& s = labeled[i];
        if (!s.label || s.label->count() == s.label->size()) continue;  // cannot demonstrate the constraint
        ((*s.label)[minority] ? rare : rest).push_back(i);
    }
    std::mt19937_64 rng(config.seed + 0x9e37 * (b + 1));
    std::shuffle(rare.begin(), rare.end(), rng);
    std::shuffle(rest.begin(), rest.end(), rng);
    GenerationBatchSpec spec;
    spec.requested_count = config.samples_per_batch;
    spec.label_names = config.label_names;
    spec.domain = config.domain;
    const std::size_t want_rare = std::min(rare.size(), (config.few_shot + 1) / 2);
    for (std::size_t i = 0; i < want_rare; ++i) spec.few_shot.push_back(labeled[rare[i]]);
    for (std::size_t i = 0; i < rest.size() && spec.few_shot.size() < config.few_shot; ++i)
        spec.few_shot.push_back(labeled[rest[i]]);
    for (std::size_t i = want_rare; i < rare.size() && spec.few_shot.size() < config.few_shot; ++i)
        spec.few_shot.push_back(labeled[rare[i]]);
    return spec;
}

GenerationResult generate_candidates(LlmClient& client, const Dataset& labeled, const AugmentConfig& config) {
    config.validate();
    if (config.label_names.size() != labeled.num_classes())
        throw ConfigError("augment.label_names has " + std::to_string(config.label_names.size()) +
                          " entries but the data has " + std::to_string(labeled.num_classes()) + " classes");
    std::vector<std::string> prompts;
    for (std::size_t b = 0; b < config.batches; ++b) prompts.push_back(build_prompt(batch_spec(labeled, config, b)));
    const auto outcomes = complete_all(client, prompts, config.max_in_flight);

    GenerationResult result;
    std::size_t failed = 0;
    std::string first_error;
    for (std::size_t b = 0; b < outcomes.size(); ++b) {
        BatchReport rep;
        rep.batch = b;
        rep.prompt_hash = hex64(fnv1a64(prompts[b]));
        const auto& o = outcomes[b];
        if (!o.response) {
            rep.error = o.error;
        } else {
            rep.response_id = o.response->id;
            try {
                auto parsed = parse_generated(o.response->content, config.label_names);
                rep.parsed = parsed.candidates.size();
                rep.malformed = parsed.malformed;
                rep.all_labels_true = parsed.all_labels_true;
                for (std::size_t i = 0; i < parsed.candidates.size(); ++i) {
                    auto& c = parsed.candidates[i];
                    char id[48];
                    std::snprintf(id, sizeof id, "aug-b%03zu-%03zu", b, i);
                    c.id = id;
                    c.provenance = {{"backend", client.identity()},
                                    {"batch", std::to_string(b)},
                                    {"prompt_hash", rep.prompt_hash},
                                    {"response_id", rep.response_id}};
                    result.candidates.push_back(std::move(c));
                }
            } catch (const GenerationError& e) {
                rep.error = e.what();
            }
        }
        if (!rep.error.empty() && failed++ == 0) first_error = rep.error;
        result.batches.push_back(std::move(rep));
    }
    if (failed == outcomes.size()) throw BackendError("every generation batch failed; first error: " + first_error);
    return result;
}

}  // namespace ssn
