#include "ssn/qa_model.hpp"

#include "ssn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ssn {

namespace {

using Index = Eigen::Index;

Index ix(std::size_t v) { return static_cast<Index>(v); }

void require(bool ok, const std::string& what) {
    if (!ok) throw DataError(what);
}

void check_sample_shape(const EncodedSample& s, const QAModelConfig& c) {
    const auto d = ix(c.dim);
    require(s.q_doc.size() == d, "q_doc width does not match model dim");
    require(s.a_doc.size() == c.max_answers && s.a_sent.size() == c.max_answers,
            "answer slot count does not match max_answers");
    require(s.q_sent.rows() == ix(c.max_q_sentences) && s.q_sent.cols() == d,
            "question sentence matrix does not match m x d");
    for (std::size_t k = 0; k < c.max_answers; ++k) {
        require(s.a_doc[k].size() == d, "a_doc width does not match model dim");
        require(s.a_sent[k].rows() == ix(c.max_a_sentences) && s.a_sent[k].cols() == d,
                "answer sentence matrix does not match n x d");
    }
    if (s.answer_count == 0) throw DataError("sample has zero real answers");
    require(s.answer_count <= c.max_answers, "answer_count exceeds max_answers");
}

Eigen::MatrixXd xavier(std::size_t rows, std::size_t cols, std::size_t fan_in, std::size_t fan_out,
                       std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Eigen::MatrixXd m(ix(rows), ix(cols));
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    return m;
}

// Question-half weights of offset (a, b): F x d block.
auto q_block(const Eigen::MatrixXd& w, const KernelSize& k, std::size_t a, std::size_t b, std::size_t d) {
    return w.block(0, ix((a * k.cols + b) * 2 * d), w.rows(), ix(d));
}
auto q_block(Eigen::MatrixXd& w, const KernelSize& k, std::size_t a, std::size_t b, std::size_t d) {
    return w.block(0, ix((a * k.cols + b) * 2 * d), w.rows(), ix(d));
}
auto a_block(const Eigen::MatrixXd& w, const KernelSize& k, std::size_t a, std::size_t b, std::size_t d) {
    return w.block(0, ix((a * k.cols + b) * 2 * d + d), w.rows(), ix(d));
}
auto a_block(Eigen::MatrixXd& w, const KernelSize& k, std::size_t a, std::size_t b, std::size_t d) {
    return w.block(0, ix((a * k.cols + b) * 2 * d + d), w.rows(), ix(d));
}

}  // namespace

double sigmoid(double z) {
    constexpr double lo = std::numeric_limits<double>::min();
    constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
    const double p = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    return std::clamp(p, lo, hi);
}

void QAModelConfig::validate() const {
    auto fail = [](const std::string& what) { throw ConfigError(what); };
    if (dim == 0) fail("model dim must be >= 1");
    if (max_q_sentences == 0) fail("encoder.max_q_sentences must be >= 1");
    if (max_a_sentences == 0) fail("encoder.max_a_sentences must be >= 1");
    if (max_answers == 0) fail("data.max_answers must be >= 1");
    if (kernels.empty()) fail("model.kernels must be non-empty");
    for (const auto& k : kernels) {
        if (k.rows == 0 || k.cols == 0) fail("model.kernels entries must be >= 1");
        if (k.rows > max_q_sentences || k.cols > max_a_sentences)
            fail("model.kernels: kernel " + std::to_string(k.rows) + "x" + std::to_string(k.cols) +
                 " exceeds the " + std::to_string(max_q_sentences) + "x" + std::to_string(max_a_sentences) +
                 " sentence grid");
    }
    if (filters == 0) fail("model.filters must be >= 1");
    if (pool == 0) fail("model.pool must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) fail("model.dropout must be in [0, 1)");
    if (num_classes == 0) fail("class set must be non-empty");
}

QAModelParams QAModelParams::zeros(const QAModelConfig& c) {
    QAModelParams p;
    for (const auto& k : c.kernels) {
        p.kernels.push_back({k, Eigen::MatrixXd::Zero(ix(c.filters), ix(k.rows * k.cols * 2 * c.dim)),
                             Eigen::VectorXd::Zero(ix(c.filters))});
    }
    p.attn_w = Eigen::MatrixXd::Zero(ix(c.dim), ix(c.dim));
    p.attn_b = 0.0;
    p.head_w = Eigen::MatrixXd::Zero(ix(c.num_classes), ix(c.concat_width()));
    p.head_b = Eigen::VectorXd::Zero(ix(c.num_classes));
    return p;
}

QAModelParams QAModelParams::init(const QAModelConfig& c, std::uint64_t seed) {
    c.validate();
    std::mt19937_64 rng(seed);
    QAModelParams p = zeros(c);
    for (auto& kb : p.kernels) {
        const std::size_t fan_in = kb.size.rows * kb.size.cols * 2 * c.dim;
        kb.weight = xavier(c.filters, fan_in, fan_in, c.filters, rng);
    }
    std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(c.dim)));
    for (Index i = 0; i < p.attn_w.size(); ++i) p.attn_w.data()[i] = gauss(rng);
    p.head_w = xavier(c.num_classes, c.concat_width(), c.concat_width(), c.num_classes, rng);
    return p;
}

std::vector<TensorView> QAModelParams::tensors() {
    std::vector<TensorView> out;
    for (std::size_t i = 0; i < kernels.size(); ++i) {
        const auto prefix = "kernel" + std::to_string(i) + "." + std::to_string(kernels[i].size.rows) + "x" +
                            std::to_string(kernels[i].size.cols);
        out.push_back(view_of(prefix + ".weight", kernels[i].weight));
        out.push_back(view_of(prefix + ".bias", kernels[i].bias));
    }
    out.push_back(view_of("attention.weight", attn_w));
    out.push_back(view_of("attention.bias", attn_b));
    out.push_back(view_of("head.weight", head_w));
    out.push_back(view_of("head.bias", head_b));
    return out;
}

std::vector<ConstTensorView> QAModelParams::tensors() const {
    auto views = const_cast<QAModelParams*>(this)->tensors();
    std::vector<ConstTensorView> out;
    out.reserve(views.size());
    for (const auto& v : views) out.push_back(as_const(v));
    return out;
}

bool QAModelParams::all_finite() const {
    for (const auto& t : tensors())
        for (double v : t.values)
            if (!std::isfinite(v)) return false;
    return true;
}

// ---------------------------------------------------------------------------

InteractionMatrix build_interaction_matrix(const Eigen::MatrixXd& q_sent, const Eigen::MatrixXd& a_sent) {
    if (q_sent.cols() != a_sent.cols())
        throw DataError("interaction matrix: question and answer widths differ (" + std::to_string(q_sent.cols()) +
                        " vs " + std::to_string(a_sent.cols()) + ")");
    const auto m = static_cast<std::size_t>(q_sent.rows());
    const auto n = static_cast<std::size_t>(a_sent.rows());
    const auto d = static_cast<std::size_t>(q_sent.cols());
    InteractionMatrix grid(m, n, 2 * d);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t ch = 0; ch < d; ++ch) {
                grid.at(i, j, ch) = q_sent(ix(i), ix(ch));
                grid.at(i, j, d + ch) = a_sent(ix(j), ix(ch));
            }
    return grid;
}

std::vector<PoolWindow> adaptive_pool_windows(std::size_t input, std::size_t output) {
    std::vector<PoolWindow> out(output);
    for (std::size_t o = 0; o < output; ++o) {
        out[o].begin = (o * input) / output;
        out[o].end = ((o + 1) * input + output - 1) / output;
    }
    return out;
}

Eigen::VectorXd apply_interaction_kernels(const InteractionMatrix& grid, const QAModelParams& params,
                                          const QAModelConfig& config) {
    const std::size_t d = config.dim;
    if (grid.channels() != 2 * d) throw DataError("interaction matrix channel count does not match 2d");
    if (params.kernels.size() != config.kernels.size()) throw DataError("kernel bank count does not match config");
    const std::size_t P = config.pool;
    Eigen::VectorXd out(ix(config.interaction_width()));
    std::size_t cursor = 0;
    for (const auto& kb : params.kernels) {
        const auto kr = kb.size.rows, kc = kb.size.cols;
        if (kr > grid.rows() || kc > grid.cols()) throw DataError("kernel larger than the interaction grid");
        const std::size_t H = grid.rows() - kr + 1, W = grid.cols() - kc + 1;
        const auto rw = adaptive_pool_windows(H, P), cw = adaptive_pool_windows(W, P);
        for (Index f = 0; f < kb.weight.rows(); ++f) {
            Eigen::MatrixXd conv(ix(H), ix(W));
            for (std::size_t r = 0; r < H; ++r)
                for (std::size_t c = 0; c < W; ++c) {
                    double acc = kb.bias[f];
                    for (std::size_t a = 0; a < kr; ++a)
                        for (std::size_t b = 0; b < kc; ++b)
                            for (std::size_t ch = 0; ch < 2 * d; ++ch)
                                acc += kb.weight(f, ix((a * kc + b) * 2 * d + ch)) * grid.at(r + a, c + b, ch);
                    conv(ix(r), ix(c)) = acc;
                }
            for (std::size_t pr = 0; pr < P; ++pr)
                for (std::size_t pc = 0; pc < P; ++pc) {
                    double best = -std::numeric_limits<double>::infinity();
                    for (auto r = rw[pr].begin; r < rw[pr].end; ++r)
                        for (auto c = cw[pc].begin; c < cw[pc].end; ++c) best = std::max(best, conv(ix(r), ix(c)));
                    out[ix(cursor++)] = best;
                }
        }
    }
    return out;
}

Eigen::VectorXd interaction_features(const Eigen::MatrixXd& q_sent, const Eigen::MatrixXd& a_sent,
                                     const QAModelParams& params, const QAModelConfig& config,
                                     InteractionCache* cache) {
    const std::size_t d = config.dim;
    if (q_sent.cols() != ix(d) || a_sent.cols() != ix(d)) throw DataError("sentence width does not match model dim");
    const auto m = static_cast<std::size_t>(q_sent.rows());
    const auto n = static_cast<std::size_t>(a_sent.rows());
    const std::size_t P = config.pool;
    Eigen::VectorXd out(ix(config.interaction_width()));
    if (cache) {
        cache->conv_rows.clear();
        cache->conv_cols.clear();
        cache->argmax.clear();
    }
    std::size_t cursor = 0;
    for (const auto& kb : params.kernels) {
        const auto kr = kb.size.rows, kc = kb.size.cols;
        if (kr > m || kc > n) throw DataError("kernel larger than the interaction grid");
        const std::size_t H = m - kr + 1, W = n - kc + 1;
        const auto F = kb.weight.rows();

        // conv(r, c, f) = bias_f + U(r, f) + V(c, f)
        Eigen::MatrixXd U = Eigen::MatrixXd::Zero(ix(H), F);
        Eigen::MatrixXd V = Eigen::MatrixXd::Zero(ix(W), F);
        for (std::size_t a = 0; a < kr; ++a) {
            Eigen::MatrixXd summed = Eigen::MatrixXd::Zero(F, ix(d));
            for (std::size_t b = 0; b < kc; ++b) summed += q_block(kb.weight, kb.size, a, b, d);
            U.noalias() += q_sent.middleRows(ix(a), ix(H)) * summed.transpose();
        }
        for (std::size_t b = 0; b < kc; ++b) {
            Eigen::MatrixXd summed = Eigen::MatrixXd::Zero(F, ix(d));
            for (std::size_t a = 0; a < kr; ++a) summed += a_block(kb.weight, kb.size, a, b, d);
            V.noalias() += a_sent.middleRows(ix(b), ix(W)) * summed.transpose();
        }

        const auto rw = adaptive_pool_windows(H, P), cw = adaptive_pool_windows(W, P);
        std::vector<std::pair<std::size_t, std::size_t>> arg;
        if (cache) arg.reserve(static_cast<std::size_t>(F) * P * P);
        for (Index f = 0; f < F; ++f)
            for (std::size_t pr = 0; pr < P; ++pr)
                for (std::size_t pc = 0; pc < P; ++pc) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::pair<std::size_t, std::size_t> where{0, 0};
                    for (auto r = rw[pr].begin; r < rw[pr].end; ++r)
                        for (auto c = cw[pc].begin; c < cw[pc].end; ++c) {
                            const double v = U(ix(r), f) + V(ix(c), f);
                            if (v > best) {
                                best = v;
                                where = {r, c};
                            }
                        }
                    out[ix(cursor++)] = best + kb.bias[f];
                    if (cache) arg.push_back(where);
                }
        if (cache) {
            cache->conv_rows.push_back(H);
            cache->conv_cols.push_back(W);
            cache->argmax.push_back(std::move(arg));
        }
    }
    return out;
}

namespace {

void interaction_backward(const Eigen::MatrixXd& q_sent, const Eigen::MatrixXd& a_sent, const QAModelConfig& config,
                          const InteractionCache& cache, const Eigen::VectorXd& dfeat, QAModelParams& grads) {
    const std::size_t d = config.dim;
    const std::size_t P = config.pool;
    std::size_t cursor = 0;
    for (std::size_t kix = 0; kix < grads.kernels.size(); ++kix) {
        auto& gk = grads.kernels[kix];
        const auto kr = gk.size.rows, kc = gk.size.cols;
        const std::size_t H = cache.conv_rows[kix], W = cache.conv_cols[kix];
        const auto F = gk.weight.rows();
        Eigen::MatrixXd dU = Eigen::MatrixXd::Zero(ix(H), F);
        Eigen::MatrixXd dV = Eigen::MatrixXd::Zero(ix(W), F);
        const auto& arg = cache.argmax[kix];
        std::size_t local = 0;
        for (Index f = 0; f < F; ++f)
            for (std::size_t cell = 0; cell < P * P; ++cell, ++local) {
                const double g = dfeat[ix(cursor++)];
                if (g == 0.0) continue;
                const auto [r, c] = arg[local];
                dU(ix(r), f) += g;
                dV(ix(c), f) += g;
                gk.bias[f] += g;
            }
        for (std::size_t a = 0; a < kr; ++a) {
            const Eigen::MatrixXd dq = dU.transpose() * q_sent.middleRows(ix(a), ix(H));
            for (std::size_t b = 0; b < kc; ++b) q_block(gk.weight, gk.size, a, b, d) += dq;
        }
        for (std::size_t b = 0; b < kc; ++b) {
            const Eigen::MatrixXd da = dV.transpose() * a_sent.middleRows(ix(b), ix(W));
            for (std::size_t a = 0; a < kr; ++a) a_block(gk.weight, gk.size, a, b, d) += da;
        }
    }
}

}  // namespace

AttentionResult attention_scores(const Eigen::VectorXd& q_doc, std::span<const Eigen::VectorXd> a_docs,
                                 std::size_t answer_count, const QAModelParams& params) {
    if (answer_count == 0) throw DataError("attention requires at least one real answer");
    if (answer_count > a_docs.size()) throw DataError("answer_count exceeds answer slots");
    const auto K = ix(a_docs.size());
    AttentionResult out{Eigen::VectorXd::Zero(K), Eigen::VectorXd::Zero(K)};
    const Eigen::RowVectorXd qW = q_doc.transpose() * params.attn_w;
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < answer_count; ++k) {
        out.scores[ix(k)] = std::tanh(qW.dot(a_docs[k]) + params.attn_b);
        top = std::max(top, out.scores[ix(k)]);
    }
    double denom = 0.0;
    for (std::size_t k = 0; k < answer_count; ++k) {
        out.weights[ix(k)] = std::exp(out.scores[ix(k)] - top);
        denom += out.weights[ix(k)];
    }
    out.weights.head(ix(answer_count)) /= denom;
    return out;
}

Eigen::VectorXd aggregate_answers(const Eigen::VectorXd& weights, std::span<const Eigen::VectorXd> vectors) {
    if (static_cast<std::size_t>(weights.size()) != vectors.size())
        throw DataError("aggregate_answers: " + std::to_string(weights.size()) + " weights for " +
                        std::to_string(vectors.size()) + " vectors");
    if (vectors.empty()) throw DataError("aggregate_answers: no vectors");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(vectors.front().size());
    for (std::size_t k = 0; k < vectors.size(); ++k) {
        if (vectors[k].size() != out.size()) throw DataError("aggregate_answers: vector widths differ");
        if (weights[ix(k)] != 0.0) out.noalias() += weights[ix(k)] * vectors[k];
    }
    return out;
}

ForwardTrace forward(const EncodedSample& sample, const QAModelParams& params, const QAModelConfig& config,
                     const ForwardOptions& options) {
    check_sample_shape(sample, config);
    const std::size_t K = config.max_answers;
    const bool use_dropout = options.training && config.dropout > 0.0;
    if (use_dropout && options.rng == nullptr) throw ConfigError("training-mode forward needs an RNG for dropout");

    ForwardTrace t;
    t.attention = attention_scores(sample.q_doc, sample.a_doc, sample.answer_count, params);
    t.interaction.assign(K, Eigen::VectorXd::Zero(ix(config.interaction_width())));
    t.caches.resize(K);
    if (use_dropout) t.dropout_masks.assign(K, Eigen::VectorXd());
    std::bernoulli_distribution keep(1.0 - config.dropout);
    const double scale = 1.0 / (1.0 - config.dropout);
    for (std::size_t k = 0; k < sample.answer_count; ++k) {
        t.interaction[k] = interaction_features(sample.q_sent, sample.a_sent[k], params, config, &t.caches[k]);
        if (use_dropout) {
            Eigen::VectorXd mask(t.interaction[k].size());
            for (Index i = 0; i < mask.size(); ++i) mask[i] = keep(*options.rng) ? scale : 0.0;
            t.interaction[k] = t.interaction[k].cwiseProduct(mask);
            t.dropout_masks[k] = std::move(mask);
        }
    }
    t.interaction_agg = aggregate_answers(t.attention.weights, t.interaction);
    t.answer_agg = aggregate_answers(t.attention.weights, sample.a_doc);

    const auto d = ix(config.dim);
    const auto L = ix(config.interaction_width());
    t.concat.resize(2 * d + L);
    t.concat << sample.q_doc, t.interaction_agg, t.answer_agg;
    t.logits = params.head_w * t.concat + params.head_b;
    t.probs = t.logits.unaryExpr([](double z) { return sigmoid(z); });
    return t;
}

void backward(const EncodedSample& sample, const QAModelParams& params, const QAModelConfig& config,
              const ForwardTrace& trace, const Eigen::VectorXd& dlogits, const Eigen::VectorXd& dweights,
              QAModelParams& grads) {
    const auto d = ix(config.dim);
    const auto L = ix(config.interaction_width());
    const std::size_t real = sample.answer_count;

    grads.head_w.noalias() += dlogits * trace.concat.transpose();
    grads.head_b += dlogits;
    const Eigen::VectorXd dconcat = params.head_w.transpose() * dlogits;
    const auto dh_qa = dconcat.segment(d, L);
    const auto dh_a = dconcat.segment(d + L, d);

    const auto& w = trace.attention.weights;
    Eigen::VectorXd dw = Eigen::VectorXd::Zero(w.size());
    for (std::size_t k = 0; k < real; ++k) {
        dw[ix(k)] = dh_qa.dot(trace.interaction[k]) + dh_a.dot(sample.a_doc[k]);
        if (dweights.size() > 0) dw[ix(k)] += dweights[ix(k)];
    }

    for (std::size_t k = 0; k < real; ++k) {
        const double wk = w[ix(k)];
        if (wk == 0.0) continue;
        Eigen::VectorXd dfeat = wk * dh_qa;
        if (!trace.dropout_masks.empty()) dfeat = dfeat.cwiseProduct(trace.dropout_masks[k]);
        interaction_backward(sample.q_sent, sample.a_sent[k], config, trace.caches[k], dfeat, grads);
    }

    double wdw = 0.0;
    for (std::size_t k = 0; k < real; ++k) wdw += w[ix(k)] * dw[ix(k)];
    for (std::size_t k = 0; k < real; ++k) {
        const double ds = w[ix(k)] * (dw[ix(k)] - wdw);
        const double s = trace.attention.scores[ix(k)];
        const double dz = ds * (1.0 - s * s);
        if (dz == 0.0) continue;
        grads.attn_w.noalias() += dz * sample.q_doc * sample.a_doc[k].transpose();
        grads.attn_b += dz;
    }
}

}  // namespace ssn
