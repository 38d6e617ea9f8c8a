#include "ssn/encoder.hpp"

#include "http_util.hpp"
#include "ssn/errors.hpp"
#include "ssn/text.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdlib>

namespace ssn {

namespace {

constexpr std::uint64_t kBigramSeed = 0x9e3779b97f4a7c15ULL;
constexpr double kBigramWeight = 0.5;

void add_feature(Eigen::VectorXd& v, std::uint64_t raw, double weight) {
    const std::uint64_t h = mix64(raw);
    const auto bucket = static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(v.size()));
    v[bucket] += (h >> 63) ? -weight : weight;
}

// Answer slots to keep when a sample carries more than K answers: the best
// answer plus the first K-1 others, in original order.
std::vector<std::size_t> kept_answers(const Sample& s, std::size_t max_answers) {
    std::vector<std::size_t> idx;
    const auto best = s.best_answer();
    std::size_t others = 0;
    const std::size_t cap = best ? max_answers - 1 : max_answers;
    for (std::size_t i = 0; i < s.answers.size() && idx.size() < max_answers; ++i) {
        if (best && i == *best) {
            idx.push_back(i);
        } else if (others < cap) {
            idx.push_back(i);
            ++others;
        }
    }
    return idx;
}

}  // namespace

Eigen::VectorXd Encoder::encode_document(std::string_view text) const {
    std::vector<std::string> one{std::string(text)};
    auto out = encode_batch(one);
    if (out.size() != 1) throw BackendError("encoder returned wrong batch size");
    return std::move(out.front());
}

HashingEncoder::HashingEncoder(std::size_t dim) : dim_(dim) {
    if (dim_ == 0) throw ConfigError("encoder.dim must be positive");
}

std::string HashingEncoder::identity() const { return "hashing-ngram-v1:d=" + std::to_string(dim_); }

Eigen::VectorXd HashingEncoder::encode_one(std::string_view text) const {
    const auto tokens = tokenize(text);
    if (tokens.empty()) throw DataError("text is empty after normalization");
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_));
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        add_feature(v, fnv1a64(tokens[i]), 1.0);
        if (i + 1 < tokens.size()) {
            add_feature(v, fnv1a64(tokens[i] + ' ' + tokens[i + 1], kBigramSeed), kBigramWeight);
        }
    }
    const double norm = v.norm();
    if (norm < 1e-12) {
        // Signed features cancelled out; fall back to a single whole-text feature.
        v.setZero();
        v[static_cast<Eigen::Index>(mix64(fnv1a64(text, kBigramSeed)) % dim_)] = 1.0;
        return v;
    }
    return v / norm;
}

std::vector<Eigen::VectorXd> HashingEncoder::encode_batch(std::span<const std::string> texts) const {
    std::vector<Eigen::VectorXd> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(encode_one(t));
    return out;
}

HttpEmbeddingEncoder::HttpEmbeddingEncoder(std::string base_url, std::string model_id, std::size_t dim)
    : base_url_(std::move(base_url)), model_id_(std::move(model_id)), dim_(dim) {
    if (dim_ == 0) throw ConfigError("encoder.dim must be positive");
    detail::split_url(base_url_);
}

std::string HttpEmbeddingEncoder::identity() const {
    return "http-embeddings:" + model_id_ + ":d=" + std::to_string(dim_);
}

std::vector<Eigen::VectorXd> HttpEmbeddingEncoder::encode_batch(std::span<const std::string> texts) const {
    using json = nlohmann::json;
    for (const auto& t : texts)
        if (tokenize(t).empty()) throw DataError("text is empty after normalization");
    if (texts.empty()) return {};

    json req{{"model", model_id_}, {"input", std::vector<std::string>(texts.begin(), texts.end())}};
    detail::Headers headers;
    if (const char* key = std::getenv("SSN_ENCODER_API_KEY"); key && *key)
        headers.emplace_back("Authorization", std::string("Bearer ") + key);
    auto res = detail::post_json(base_url_, "/embeddings", req.dump(), headers, std::chrono::seconds(60));
    if (res.status == 0) throw BackendError("embedding request failed: " + res.error);
    if (res.status != 200)
        throw BackendError("embedding endpoint returned HTTP " + std::to_string(res.status) + ": " + res.body);

    std::vector<Eigen::VectorXd> out(texts.size());
    try {
        const auto body = json::parse(res.body);
        const auto& data = body.at("data");
        if (data.size() != texts.size()) throw BackendError("embedding response has wrong item count");
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto& item = data[i];
            const auto index = item.contains("index") ? item.at("index").get<std::size_t>() : i;
            if (index >= texts.size()) throw BackendError("embedding response index out of range");
            const auto values = item.at("embedding").get<std::vector<double>>();
            if (values.size() != dim_)
                throw BackendError("embedding width " + std::to_string(values.size()) + " != encoder.dim " +
                                   std::to_string(dim_));
            Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(dim_));
            if (!v.allFinite()) throw BackendError("embedding contains non-finite values");
            out[index] = std::move(v);
        }
    } catch (const json::exception& e) {
        throw BackendError(std::string("malformed embedding response: ") + e.what());
    }
    for (const auto& v : out)
        if (v.size() == 0) throw BackendError("embedding response is missing an index");
    return out;
}

std::unique_ptr<Encoder> make_encoder(const EncoderConfig& config) {
    if (config.backend == "stub") return std::make_unique<HashingEncoder>(config.dim);
    if (config.backend == "transformer")
        return std::make_unique<HttpEmbeddingEncoder>(config.base_url, config.model_id, config.dim);
    throw ConfigError("encoder.backend: unknown backend '" + config.backend + "'");
}

SentenceMatrix encode_sentences(const Encoder& encoder, std::string_view text, std::size_t max_sentences) {
    if (max_sentences == 0) throw ConfigError("max_sentences must be >= 1");
    auto sentences = split_sentences(text);
    if (sentences.empty()) throw DataError("text is empty after normalization");
    if (sentences.size() > max_sentences) sentences.resize(max_sentences);
    SentenceMatrix out;
    out.count = sentences.size();
    out.rows = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(max_sentences), static_cast<Eigen::Index>(encoder.dim()));
    const auto vecs = encoder.encode_batch(sentences);
    for (std::size_t i = 0; i < vecs.size(); ++i) out.rows.row(static_cast<Eigen::Index>(i)) = vecs[i].transpose();
    return out;
}

EncodedSample encode_sample(const Encoder& encoder, const Sample& sample, const EncodingShape& shape) {
    if (shape.max_q_sentences == 0 || shape.max_a_sentences == 0 || shape.max_answers == 0)
        throw ConfigError("encoding shape entries must be >= 1");
    const auto d = static_cast<Eigen::Index>(encoder.dim());
    const auto answers = kept_answers(sample, shape.max_answers);

    // One batched call: question doc, answer docs, question sentences, answer sentences.
    std::vector<std::string> texts;
    texts.push_back(sample.question);
    for (auto a : answers) texts.push_back(sample.answers[a].text);

    auto q_sents = split_sentences(sample.question);
    if (q_sents.size() > shape.max_q_sentences) q_sents.resize(shape.max_q_sentences);
    texts.insert(texts.end(), q_sents.begin(), q_sents.end());
    std::vector<std::vector<std::string>> a_sents;
    for (auto a : answers) {
        auto s = split_sentences(sample.answers[a].text);
        if (s.size() > shape.max_a_sentences) s.resize(shape.max_a_sentences);
        texts.insert(texts.end(), s.begin(), s.end());
        a_sents.push_back(std::move(s));
    }
    if (q_sents.empty()) throw DataError("sample '" + sample.id + "': question is empty after normalization");

    const auto vecs = encoder.encode_batch(texts);
    if (vecs.size() != texts.size()) throw BackendError("encoder returned wrong batch size");

    EncodedSample out;
    std::size_t cursor = 0;
    out.q_doc = vecs[cursor++];
    out.answer_count = answers.size();
    out.a_doc.assign(shape.max_answers, Eigen::VectorXd::Zero(d));
    for (std::size_t k = 0; k < answers.size(); ++k) out.a_doc[k] = vecs[cursor++];

    out.q_sent = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(shape.max_q_sentences), d);
    out.q_sent_count = q_sents.size();
    for (std::size_t i = 0; i < q_sents.size(); ++i) out.q_sent.row(static_cast<Eigen::Index>(i)) = vecs[cursor++].transpose();

    out.a_sent.assign(shape.max_answers, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(shape.max_a_sentences), d));
    out.a_sent_count.assign(shape.max_answers, 0);
    for (std::size_t k = 0; k < answers.size(); ++k) {
        out.a_sent_count[k] = a_sents[k].size();
        for (std::size_t j = 0; j < a_sents[k].size(); ++j)
            out.a_sent[k].row(static_cast<Eigen::Index>(j)) = vecs[cursor++].transpose();
    }
    for (std::size_t k = 0; k < answers.size(); ++k) {
        if (sample.answers[answers[k]].is_best) out.best_answer = k;
    }
    return out;
}

std::vector<EncodedSample> encode_samples(const Encoder& encoder, std::span<const Sample> samples,
                                          const EncodingShape& shape) {
    std::vector<EncodedSample> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(encode_sample(encoder, s, shape));
    return out;
}

}  // namespace ssn
