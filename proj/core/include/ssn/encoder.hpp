#pragma once

#include "ssn/dataset.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ssn {

struct EncoderConfig {
    std::string backend = "stub";  // "stub" | "transformer"
    std::size_t dim = 128;
    std::string model_id = "sentence-transformers/all-MiniLM-L6-v2";
    std::string base_url = "http://127.0.0.1:8080/v1";
    std::size_t max_q_sentences = 8;  // m
    std::size_t max_a_sentences = 6;  // n
};

// Text -> fixed-width vector port. Implementations are read-only after
// construction and may be shared between threads.
class Encoder {
public:
    virtual ~Encoder() = default;

    virtual std::size_t dim() const = 0;
    // Stable description recorded in checkpoint manifests.
    virtual std::string identity() const = 0;
    // One vector per input text; throws EncoderError-class errors
    // (DataError for unusable text, BackendError for transport failures).
    virtual std::vector<Eigen::VectorXd> encode_batch(std::span<const std::string> texts) const = 0;

    Eigen::VectorXd encode_document(std::string_view text) const;
};

// Deterministic bag-of-hashed-ngrams encoder: signed feature hashing of
// unigrams and bigrams into `dim` buckets, L2-normalized. Pure function of the
// input bytes.
class HashingEncoder final : public Encoder {
public:
    explicit HashingEncoder(std::size_t dim);

    std::size_t dim() const override { return dim_; }
    std::string identity() const override;
    std::vector<Eigen::VectorXd> encode_batch(std::span<const std::string> texts) const override;

    Eigen::VectorXd encode_one(std::string_view text) const;

private:
    std::size_t dim_;
};

// Pretrained transformer served behind an OpenAI-compatible `/embeddings`
// endpoint. The API key, when needed, comes from SSN_ENCODER_API_KEY.
class HttpEmbeddingEncoder final : public Encoder {
public:
    HttpEmbeddingEncoder(std::string base_url, std::string model_id, std::size_t dim);

    std::size_t dim() const override { return dim_; }
    std::string identity() const override;
    std::vector<Eigen::VectorXd> encode_batch(std::span<const std::string> texts) const override;

private:
    std::string base_url_;
    std::string model_id_;
    std::size_t dim_;
};

std::unique_ptr<Encoder> make_encoder(const EncoderConfig& config);

struct SentenceMatrix {
    Eigen::MatrixXd rows;  // max_sentences x d, rows past `count` are zero
    std::size_t count = 0;
};

SentenceMatrix encode_sentences(const Encoder& encoder, std::string_view text, std::size_t max_sentences);

// Shape of an encoded sample: m question sentences, n answer sentences, K answers.
struct EncodingShape {
    std::size_t max_q_sentences = 8;
    std::size_t max_a_sentences = 6;
    std::size_t max_answers = 5;
};

// Document- and sentence-level encodings of one question and its answers.
// Answer slots [0, answer_count) are real; the remaining K - answer_count slots
// are zero padding.
struct EncodedSample {
    Eigen::VectorXd q_doc;
    std::vector<Eigen::VectorXd> a_doc;
    Eigen::MatrixXd q_sent;
    std::vector<Eigen::MatrixXd> a_sent;
    std::size_t q_sent_count = 0;
    std::vector<std::size_t> a_sent_count;
    std::size_t answer_count = 0;
    std::optional<std::size_t> best_answer;

    std::size_t max_answers() const noexcept { return a_doc.size(); }
    bool is_real(std::size_t k) const noexcept { return k < answer_count; }
};

EncodedSample encode_sample(const Encoder& encoder, const Sample& sample, const EncodingShape& shape);
std::vector<EncodedSample> encode_samples(const Encoder& encoder, std::span<const Sample> samples,
                                          const EncodingShape& shape);

}  // namespace ssn
