#include "ssn/dataset.hpp"

#include "ssn/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace ssn {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::string_view kSchemaName = "ssn-dataset";
constexpr int kSchemaVersion = 1;

bool is_full_mask(const std::vector<std::uint8_t>& mask) {
    return std::all_of(mask.begin(), mask.end(), [](std::uint8_t v) { return v == 1; });
}

std::string describe(const Sample& s) { return s.id.empty() ? "<no id>" : "'" + s.id + "'"; }

void check_member(DatasetKind kind, const Sample& s, std::size_t num_classes) {
    auto fail = [&](const std::string& why) {
        throw DataError(std::string(to_string(kind)) + " sample " + describe(s) + ": " + why);
    };
    if (s.question.empty()) fail("empty question text");
    if (s.label && s.label->size() != num_classes) fail("label width does not match class count");
    if (s.label_mask && s.label_mask->size() != num_classes) fail("label mask width does not match class count");
    std::size_t best = 0;
    for (const auto& a : s.answers) {
        if (a.text.empty()) fail("empty answer text");
        best += a.is_best ? 1 : 0;
    }
    if (best > 1) fail("more than one best answer");

    switch (kind) {
        case DatasetKind::Labeled:
            if (!s.label) fail("missing label");
            if (s.label_mask && !is_full_mask(*s.label_mask)) fail("labeled samples carry a full mask");
            break;
        case DatasetKind::Unlabeled:
            if (s.label || s.label_mask) fail("unlabeled samples carry no label");
            break;
        case DatasetKind::Pseudo:
            if (!s.label || !s.label_mask) fail("pseudo samples need label and mask");
            if (std::none_of(s.label_mask->begin(), s.label_mask->end(), [](auto v) { return v == 1; }))
                fail("pseudo sample with no confident class");
            break;
        case DatasetKind::Augmented:
        case DatasetKind::SelectedAugmented:
            if (!s.label) fail("missing label");
            break;
        case DatasetKind::Fused:
            if (!s.label) fail("missing label");
            if (s.label_mask && !is_full_mask(*s.label_mask)) fail("fused samples need complete labels");
            if (!s.answers.empty()) fail("fused samples hold question text only");
            break;
    }
}

std::vector<std::uint8_t> parse_binary_array(const json& j, std::size_t width, const char* field) {
    if (!j.is_array()) throw DataError(std::string("'") + field + "' must be an array");
    if (j.size() != width)
        throw DataError(std::string("'") + field + "' must have " + std::to_string(width) + " entries");
    std::vector<std::uint8_t> out;
    out.reserve(width);
    for (const auto& v : j) {
        if (!v.is_number_integer() || (v.get<long long>() != 0 && v.get<long long>() != 1))
            throw DataError(std::string("'") + field + "' entries must be 0 or 1");
        out.push_back(static_cast<std::uint8_t>(v.get<int>()));
    }
    return out;
}

const std::string& require_string(const json& obj, const char* field) {
    auto it = obj.find(field);
    if (it == obj.end()) throw DataError(std::string("missing field '") + field + "'");
    if (!it->is_string()) throw DataError(std::string("'") + field + "' must be a string");
    return it->get_ref<const std::string&>();
}

Sample sample_from_json(const json& obj, std::size_t num_classes) {
    if (!obj.is_object()) throw DataError("record is not an object");
    Sample s;
    s.id = require_string(obj, "id");
    s.question = require_string(obj, "question");
    if (s.question.empty()) throw DataError("'question' is empty");

    auto answers = obj.find("answers");
    if (answers == obj.end()) throw DataError("missing field 'answers'");
    if (!answers->is_array()) throw DataError("'answers' must be an array");
    for (const auto& a : *answers) {
        if (!a.is_object()) throw DataError("answer entries must be objects");
        AnswerRecord rec;
        rec.text = require_string(a, "text");
        if (rec.text.empty()) throw DataError("answer 'text' is empty");
        auto best = a.find("is_best");
        if (best == a.end() || !best->is_boolean()) throw DataError("answer 'is_best' must be a boolean");
        rec.is_best = best->get<bool>();
        s.answers.push_back(std::move(rec));
    }
    if (std::count_if(s.answers.begin(), s.answers.end(), [](const auto& a) { return a.is_best; }) > 1)
        throw DataError("more than one answer flagged is_best");

    if (auto it = obj.find("labels"); it != obj.end() && !it->is_null()) {
        auto bits = parse_binary_array(*it, num_classes, "labels");
        std::vector<int> ints(bits.begin(), bits.end());
        s.label = LabelVector(std::span<const int>(ints));
    }
    if (auto it = obj.find("label_mask"); it != obj.end() && !it->is_null()) {
        s.label_mask = parse_binary_array(*it, num_classes, "label_mask");
    }
    if (auto it = obj.find("all_confident"); it != obj.end()) {
        if (!it->is_boolean()) throw DataError("'all_confident' must be a boolean");
        if (it->get<bool>() != s.all_confident())
            throw DataError("'all_confident' disagrees with 'label_mask'");
    }
    if (auto it = obj.find("origin"); it != obj.end()) {
        if (!it->is_string()) throw DataError("'origin' must be a string");
        s.origin = it->get<std::string>();
    }
    if (auto it = obj.find("provenance"); it != obj.end()) {
        if (!it->is_object()) throw DataError("'provenance' must be an object");
        for (const auto& [key, value] : it->items()) {
            if (!value.is_string()) throw DataError("'provenance." + key + "' must be a string");
            s.provenance[key] = value.get<std::string>();
        }
    }
    return s;
}

// Keeps the best answer plus the first max_answers-1 others, in original order.
bool cap_answers(Sample& s, std::size_t max_answers) {
    if (s.answers.size() <= max_answers) return false;
    const auto best = s.best_answer();
    std::vector<AnswerRecord> kept;
    kept.reserve(max_answers);
    std::size_t others = 0;
    const std::size_t others_cap = best ? max_answers - 1 : max_answers;
    for (std::size_t i = 0; i < s.answers.size(); ++i) {
        if (best && i == *best) {
            kept.push_back(std::move(s.answers[i]));
        } else if (others < others_cap) {
            kept.push_back(std::move(s.answers[i]));
            ++others;
        }
    }
    s.answers = std::move(kept);
    return true;
}

}  // namespace

// ---------------------------------------------------------------------------

LabelVector::LabelVector(std::initializer_list<int> values)
    : LabelVector(std::span<const int>(values.begin(), values.size())) {}

LabelVector::LabelVector(std::span<const int> values) {
    values_.reserve(values.size());
    for (int v : values) {
        if (v != 0 && v != 1) throw DataError("label entries must be 0 or 1");
        values_.push_back(static_cast<std::uint8_t>(v));
    }
}

std::size_t LabelVector::count() const noexcept {
    return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), 1));
}

std::vector<int> LabelVector::to_ints() const { return {values_.begin(), values_.end()}; }

std::optional<std::size_t> Sample::best_answer() const {
    for (std::size_t i = 0; i < answers.size(); ++i)
        if (answers[i].is_best) return i;
    return std::nullopt;
}

bool Sample::all_confident() const {
    if (!label) return false;
    return !label_mask || is_full_mask(*label_mask);
}

std::string_view to_string(DatasetKind kind) {
    switch (kind) {
        case DatasetKind::Labeled: return "labeled";
        case DatasetKind::Unlabeled: return "unlabeled";
        case DatasetKind::Pseudo: return "pseudo";
        case DatasetKind::Augmented: return "augmented";
        case DatasetKind::SelectedAugmented: return "selected-augmented";
        case DatasetKind::Fused: return "fused";
    }
    return "unknown";
}

DatasetKind dataset_kind_from_string(std::string_view name) {
    for (auto k : {DatasetKind::Labeled, DatasetKind::Unlabeled, DatasetKind::Pseudo, DatasetKind::Augmented,
                   DatasetKind::SelectedAugmented, DatasetKind::Fused})
        if (to_string(k) == name) return k;
    throw DataError("unknown dataset kind '" + std::string(name) + "'");
}

Dataset::Dataset(DatasetKind kind, std::vector<Sample> samples, std::size_t num_classes)
    : kind_(kind), num_classes_(num_classes), samples_(std::move(samples)) {
    if (num_classes_ == 0) throw DataError("class set must be non-empty");
    for (const auto& s : samples_) check_member(kind_, s, num_classes_);
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    std::vector<Sample> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(samples_.at(i));
    return Dataset(kind_, std::move(out), num_classes_);
}

// ---------------------------------------------------------------------------

ParseResult parse_dataset(std::istream& in, DatasetKind kind, const ParseOptions& options) {
    if (options.max_answers == 0) throw ConfigError("max_answers must be >= 1");
    std::vector<Sample> samples;
    ParseResult result{Dataset(kind, {}, options.num_classes), 0, 0, 0, 0, {}};
    std::string line;
    std::size_t line_no = 0;
    std::size_t non_blank = 0;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        ++non_blank;
        try {
            json obj = json::parse(line);
            if (non_blank == 1 && obj.is_object() && obj.contains("schema")) {
                if (obj["schema"] != kSchemaName) throw DataError("unknown schema in header");
                if (obj.value("version", 0) != kSchemaVersion) throw DataError("unsupported schema version");
                continue;
            }
            Sample s = sample_from_json(obj, options.num_classes);

            if (kind == DatasetKind::Labeled || kind == DatasetKind::Unlabeled) {
                if (kind == DatasetKind::Unlabeled && (s.label || s.label_mask)) {
                    s.label.reset();
                    s.label_mask.reset();
                    ++result.labels_stripped;
                }
                if (kind == DatasetKind::Unlabeled && s.answers.empty()) {
                    ++result.dropped_no_answers;
                    continue;
                }
                if (!s.answers.empty() && !s.has_best_answer()) {
                    ++result.dropped_no_best;
                    continue;
                }
            }
            if (cap_answers(s, options.max_answers)) ++result.answers_truncated;
            check_member(kind, s, options.num_classes);
            samples.push_back(std::move(s));
        } catch (const json::exception& e) {
            if (options.strict) throw RecordError(line_no, std::string("malformed JSON: ") + e.what());
            result.diagnostics.push_back("line " + std::to_string(line_no) + ": malformed JSON");
        } catch (const RecordError&) {
            throw;
        } catch (const DataError& e) {
            if (options.strict) throw RecordError(line_no, e.what());
            result.diagnostics.push_back("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (non_blank == 0) throw DataError("empty dataset stream");
    result.dataset = Dataset(kind, std::move(samples), options.num_classes);
    return result;
}

ParseResult load_dataset(const std::string& path, DatasetKind kind, const ParseOptions& options) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset file '" + path + "'");
    try {
        return parse_dataset(in, kind, options);
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

std::string serialize_sample(const Sample& s) {
    ordered_json obj;
    obj["id"] = s.id;
    obj["question"] = s.question;
    obj["answers"] = ordered_json::array();
    for (const auto& a : s.answers) {
        ordered_json ans;
        ans["text"] = a.text;
        ans["is_best"] = a.is_best;
        obj["answers"].push_back(std::move(ans));
    }
    if (s.label) obj["labels"] = s.label->to_ints();
    if (s.label_mask) {
        obj["label_mask"] = std::vector<int>(s.label_mask->begin(), s.label_mask->end());
        obj["all_confident"] = s.all_confident();
    }
    if (!s.origin.empty()) obj["origin"] = s.origin;
    if (!s.provenance.empty()) {
        ordered_json prov = ordered_json::object();
        for (const auto& [key, value] : s.provenance) prov[key] = value;
        obj["provenance"] = std::move(prov);
    }
    return obj.dump();
}

void write_dataset(std::ostream& out, const Dataset& dataset) {
    ordered_json header;
    header["schema"] = kSchemaName;
    header["version"] = kSchemaVersion;
    header["kind"] = to_string(dataset.kind());
    out << header.dump() << '\n';
    for (const auto& s : dataset) out << serialize_sample(s) << '\n';
}

void save_dataset(const std::string& path, const Dataset& dataset) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write dataset file '" + path + "'");
    write_dataset(out, dataset);
    if (!out) throw IoError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------

std::vector<Fold> split_kfold(const Dataset& dataset, std::size_t folds, std::uint64_t seed) {
    if (folds < 2) throw ConfigError("folds must be >= 2");
    if (folds > dataset.size())
        throw ConfigError("folds (" + std::to_string(folds) + ") exceed dataset size (" +
                          std::to_string(dataset.size()) + ")");
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    const std::size_t base = dataset.size() / folds;
    const std::size_t extra = dataset.size() % folds;
    std::vector<Fold> out;
    out.reserve(folds);
    std::size_t begin = 0;
    for (std::size_t f = 0; f < folds; ++f) {
        const std::size_t len = base + (f < extra ? 1 : 0);
        std::vector<std::size_t> test(order.begin() + begin, order.begin() + begin + len);
        std::vector<std::size_t> train;
        train.reserve(dataset.size() - len);
        train.insert(train.end(), order.begin(), order.begin() + begin);
        train.insert(train.end(), order.begin() + begin + len, order.end());
        std::sort(test.begin(), test.end());
        std::sort(train.begin(), train.end());
        out.push_back({dataset.subset(train), dataset.subset(test)});
        begin += len;
    }
    return out;
}

FuseResult fuse(const Dataset& labeled, const Dataset& pseudo, const Dataset& selected) {
    if (labeled.kind() != DatasetKind::Labeled) throw DataError("fuse: first input must be labeled");
    if (!pseudo.empty() && pseudo.kind() != DatasetKind::Pseudo) throw DataError("fuse: second input must be pseudo");
    if (!selected.empty() && selected.kind() != DatasetKind::SelectedAugmented)
        throw DataError("fuse: third input must be selected-augmented");
    const std::size_t classes = labeled.num_classes();
    if (pseudo.num_classes() != classes || selected.num_classes() != classes)
        throw DataError("fuse: class counts differ between inputs");

    std::vector<Sample> out;
    out.reserve(labeled.size() + pseudo.size() + selected.size());
    std::size_t excluded = 0;
    auto push = [&](const Sample& s, const char* origin) {
        if (!s.label) throw DataError("fuse: sample " + describe(s) + " is unlabeled");
        Sample f;
        f.id = s.id;
        f.question = s.question;
        f.label = s.label;
        f.origin = origin;
        f.provenance = s.provenance;
        out.push_back(std::move(f));
    };
    for (const auto& s : labeled) push(s, "labeled");
    for (const auto& s : pseudo) {
        if (!s.label) throw DataError("fuse: sample " + describe(s) + " is unlabeled");
        if (!s.all_confident()) {
            ++excluded;
            continue;
        }
        push(s, "pseudo");
    }
    for (const auto& s : selected) push(s, "augmented");
    return {Dataset(DatasetKind::Fused, std::move(out), classes), excluded};
}

}  // namespace ssn
