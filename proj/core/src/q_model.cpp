#include "ssn/q_model.hpp"

#include "ssn/errors.hpp"
#include "ssn/optim.hpp"
#include "ssn/qa_model.hpp"
#include "ssn/text.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

namespace ssn {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Seqs = std::span<const std::vector<std::size_t>>;

Index ix(std::size_t v) { return static_cast<Index>(v); }

constexpr std::size_t kEvalChunk = 128;

MatrixXd logistic(const MatrixXd& a) {
    return a.unaryExpr([](double z) { return 1.0 / (1.0 + std::exp(-z)); });
}

struct Step {
    MatrixXd h_prev, c_prev, i, f, g, o, tc;  // H x active
};

// Packed layout: sequences sorted by length (longest first) so step t only
// touches the first active[t] columns.
struct Direction {
    std::vector<Index> order;      // packed column -> batch index
    std::vector<Index> active;     // per step
    std::vector<Index> offset;     // per step, first column in `x`
    MatrixXd x;                    // E x total tokens
    std::vector<Step> steps;
    MatrixXd pooled;  // H x B in batch order, mean of h over valid steps
};

Direction pack(Seqs seqs, const MatrixXd& emb) {
    Direction d;
    const Index B = ix(seqs.size());
    d.order.resize(static_cast<std::size_t>(B));
    std::iota(d.order.begin(), d.order.end(), Index{0});
    std::stable_sort(d.order.begin(), d.order.end(),
                     [&](Index l, Index r) { return seqs[l].size() > seqs[r].size(); });
    const std::size_t T = B > 0 ? seqs[d.order.front()].size() : 0;
    Index total = 0;
    for (std::size_t t = 0; t < T; ++t) {
        Index n = 0;
        while (n < B && seqs[d.order[static_cast<std::size_t>(n)]].size() > t) ++n;
        d.offset.push_back(total);
        d.active.push_back(n);
        total += n;
    }
    d.x.resize(emb.rows(), total);
    for (std::size_t t = 0; t < T; ++t)
        for (Index j = 0; j < d.active[t]; ++j)
            d.x.col(d.offset[t] + j) = emb.col(ix(seqs[d.order[static_cast<std::size_t>(j)]][t]));
    return d;
}

// Input projections for all steps are one product; only the recurrent part
// runs step by step.
Direction run_direction(const LstmParams& p, const MatrixXd& emb, Seqs seqs, bool keep) {
    const Index H = p.wh.cols(), B = ix(seqs.size());
    Direction d = pack(seqs, emb);
    MatrixXd xw = p.wx * d.x;
    xw.colwise() += p.b;

    MatrixXd h = MatrixXd::Zero(H, B), c = MatrixXd::Zero(H, B), pooled = MatrixXd::Zero(H, B);
    if (keep) d.steps.reserve(d.active.size());
    for (std::size_t t = 0; t < d.active.size(); ++t) {
        const Index n = d.active[t];
        MatrixXd a = xw.middleCols(d.offset[t], n);
        a.noalias() += p.wh * h.leftCols(n);
        Step st;
        st.i = logistic(a.topRows(H));
        st.f = logistic(a.middleRows(H, H));
        st.g = a.middleRows(2 * H, H).array().tanh().matrix();
        st.o = logistic(a.bottomRows(H));
        if (keep) {
            st.h_prev = h.leftCols(n);
            st.c_prev = c.leftCols(n);
        }
        c.leftCols(n) = st.f.cwiseProduct(c.leftCols(n)) + st.i.cwiseProduct(st.g);
        st.tc = c.leftCols(n).array().tanh().matrix();
        h.leftCols(n) = st.o.cwiseProduct(st.tc);
        pooled.leftCols(n) += h.leftCols(n);
        if (keep) d.steps.push_back(std::move(st));
    }
    d.pooled.resize(H, B);
    for (Index j = 0; j < B; ++j) {
        const auto b = d.order[static_cast<std::size_t>(j)];
        d.pooled.col(b) = pooled.col(j) / static_cast<double>(seqs[b].size());
    }
    if (!keep) d.x.resize(0, 0);
    return d;
}

void backward_direction(const LstmParams& p, LstmParams& gp, MatrixXd& gemb, const Direction& d, Seqs seqs,
                        const MatrixXd& dpooled) {
    const Index H = p.wh.cols(), B = ix(seqs.size());
    // Mean pooling sends dpooled / length to every valid step.
    MatrixXd dpool(H, B);
    for (Index j = 0; j < B; ++j) {
        const auto b = d.order[static_cast<std::size_t>(j)];
        dpool.col(j) = dpooled.col(b) / static_cast<double>(seqs[b].size());
    }
    MatrixXd dh_next = MatrixXd::Zero(H, B), dc_next = MatrixXd::Zero(H, B);
    MatrixXd dA_all(4 * H, d.x.cols());
    const auto one = [](const MatrixXd& s) { return (s.array() * (1.0 - s.array())).matrix(); };
    for (std::size_t t = d.steps.size(); t-- > 0;) {
        const auto& st = d.steps[t];
        const Index n = d.active[t];
        const MatrixXd dh = dh_next.leftCols(n) + dpool.leftCols(n);
        const MatrixXd dc =
            dc_next.leftCols(n) + dh.cwiseProduct(st.o).cwiseProduct((1.0 - st.tc.array().square()).matrix());
        auto dA = dA_all.middleCols(d.offset[t], n);
        dA.topRows(H) = dc.cwiseProduct(st.g).cwiseProduct(one(st.i));
        dA.middleRows(H, H) = dc.cwiseProduct(st.c_prev).cwiseProduct(one(st.f));
        dA.middleRows(2 * H, H) = dc.cwiseProduct(st.i).cwiseProduct((1.0 - st.g.array().square()).matrix());
        dA.bottomRows(H) = dh.cwiseProduct(st.tc).cwiseProduct(one(st.o));
        dc_next.leftCols(n) = dc.cwiseProduct(st.f);
        gp.wh.noalias() += dA * st.h_prev.transpose();
        dh_next.leftCols(n).noalias() = p.wh.transpose() * dA;
    }
    gp.wx.noalias() += dA_all * d.x.transpose();
    gp.b += dA_all.rowwise().sum();
    const MatrixXd dx = p.wx.transpose() * dA_all;
    for (std::size_t t = 0; t < d.active.size(); ++t)
        for (Index j = 0; j < d.active[t]; ++j)
            gemb.col(ix(seqs[d.order[static_cast<std::size_t>(j)]][t])) += dx.col(d.offset[t] + j);
}

std::vector<std::vector<std::size_t>> reversed(Seqs seqs) {
    std::vector<std::vector<std::size_t>> out(seqs.begin(), seqs.end());
    for (auto& s : out) std::reverse(s.begin(), s.end());
    return out;
}

struct Forward {
    Direction fwd, bwd;
    std::vector<std::vector<std::size_t>> rev;
    MatrixXd pooled;  // 2H x B after dropout
    MatrixXd mask;    // dropout multipliers, empty without dropout
    MatrixXd probs;   // |C| x B
};

Forward run_forward(const QModelParams& params, const QModelConfig& config, Seqs seqs, bool keep,
                    std::mt19937_64* rng) {
    Forward f;
    f.rev = reversed(seqs);
    f.fwd = run_direction(params.fwd, params.embedding, seqs, keep);
    f.bwd = run_direction(params.bwd, params.embedding, f.rev, keep);
    const Index H = ix(config.hidden), B = ix(seqs.size());
    f.pooled.resize(2 * H, B);
    f.pooled << f.fwd.pooled, f.bwd.pooled;
    if (rng && config.dropout > 0.0) {
        std::bernoulli_distribution keep_unit(1.0 - config.dropout);
        const double scale = 1.0 / (1.0 - config.dropout);
        f.mask.resize(2 * H, B);
        for (Index i = 0; i < f.mask.size(); ++i) f.mask.data()[i] = keep_unit(*rng) ? scale : 0.0;
        f.pooled = f.pooled.cwiseProduct(f.mask);
    }
    MatrixXd logits = params.head_w * f.pooled;
    logits.colwise() += params.head_b;
    f.probs = logits.unaryExpr([](double z) { return sigmoid(z); });
    return f;
}

void fill_zero(QModelParams& p) {
    for (auto& t : p.tensors()) std::fill(t.values.begin(), t.values.end(), 0.0);
}

MatrixXd uniform(Index rows, Index cols, double limit, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-limit, limit);
    MatrixXd m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    return m;
}

LstmParams init_lstm(Index E, Index H, std::mt19937_64& rng) {
    const double limit = 1.0 / std::sqrt(static_cast<double>(H));
    LstmParams p{uniform(4 * H, E, limit, rng), uniform(4 * H, H, limit, rng), Eigen::VectorXd::Zero(4 * H)};
    p.b.segment(H, H).setOnes();  // forget gate starts open
    return p;
}

void push_lstm(std::vector<TensorView>& out, const std::string& prefix, LstmParams& p) {
    out.push_back(view_of(prefix + ".wx", p.wx));
    out.push_back(view_of(prefix + ".wh", p.wh));
    out.push_back(view_of(prefix + ".b", p.b));
}

}  // namespace

void QModelConfig::validate() const {
    if (vocab_buckets < 1) throw ConfigError("qmodel.vocab_buckets must be >= 1");
    if (embed_dim < 1) throw ConfigError("qmodel.embed_dim must be >= 1");
    if (hidden < 1) throw ConfigError("qmodel.hidden must be >= 1");
    if (max_tokens < 1) throw ConfigError("qmodel.max_tokens must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("qmodel.dropout must be in [0, 1)");
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("qmodel.threshold must be in (0, 1)");
    if (num_classes < 1) throw ConfigError("data.classes must not be empty");
}

void QTrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("qmodel.batch_size must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw ConfigError("qmodel.learning_rate must be a finite value > 0");
    if (!(lr_end_factor > 0.0 && lr_end_factor <= 1.0)) throw ConfigError("qmodel.lr_end_factor must be in (0, 1]");
    if (max_epochs < 1) throw ConfigError("qmodel.max_epochs must be >= 1");
    if (min_epochs > max_epochs) throw ConfigError("qmodel.min_epochs must not exceed qmodel.max_epochs");
    if (!(loss_epsilon > 0.0)) throw ConfigError("qmodel.loss_epsilon must be > 0");
    if (!(prob_clamp > 0.0 && prob_clamp < 0.5)) throw ConfigError("loss.prob_clamp must be in (0, 0.5)");
}

QModelParams QModelParams::zeros(const QModelConfig& c) {
    const Index E = ix(c.embed_dim), H = ix(c.hidden);
    QModelParams p;
    p.embedding = MatrixXd::Zero(E, ix(c.vocab_buckets));
    for (auto* l : {&p.fwd, &p.bwd}) *l = {MatrixXd::Zero(4 * H, E), MatrixXd::Zero(4 * H, H), Eigen::VectorXd::Zero(4 * H)};
    p.head_w = MatrixXd::Zero(ix(c.num_classes), 2 * H);
    p.head_b = Eigen::VectorXd::Zero(ix(c.num_classes));
    return p;
}

QModelParams QModelParams::init(const QModelConfig& c, std::uint64_t seed) {
    c.validate();
    std::mt19937_64 rng(seed);
    const Index E = ix(c.embed_dim), H = ix(c.hidden), C = ix(c.num_classes);
    QModelParams p;
    std::normal_distribution<double> normal(0.0, 0.1);
    p.embedding.resize(E, ix(c.vocab_buckets));
    for (Index i = 0; i < p.embedding.size(); ++i) p.embedding.data()[i] = normal(rng);
    p.fwd = init_lstm(E, H, rng);
    p.bwd = init_lstm(E, H, rng);
    p.head_w = uniform(C, 2 * H, std::sqrt(6.0 / static_cast<double>(C + 2 * H)), rng);
    p.head_b = Eigen::VectorXd::Zero(C);
    return p;
}

std::vector<TensorView> QModelParams::tensors() {
    std::vector<TensorView> out;
    out.push_back(view_of("embedding", embedding));
    push_lstm(out, "lstm.forward", fwd);
    push_lstm(out, "lstm.backward", bwd);
    out.push_back(view_of("head.weight", head_w));
    out.push_back(view_of("head.bias", head_b));
    return out;
}

std::vector<ConstTensorView> QModelParams::tensors() const {
    std::vector<ConstTensorView> out;
    for (const auto& t : const_cast<QModelParams*>(this)->tensors()) out.push_back(as_const(t));
    return out;
}

bool QModelParams::all_finite() const {
    for (const auto& t : tensors())
        for (double v : t.values)
            if (!std::isfinite(v)) return false;
    return true;
}

std::vector<std::size_t> token_ids(std::string_view text, const QModelConfig& config) {
    const auto tokens = tokenize(text);
    if (tokens.empty()) throw DataError("question has no tokens");
    std::vector<std::size_t> ids;
    const std::size_t n = std::min(tokens.size(), config.max_tokens);
    ids.reserve(n);
    for (std::size_t i = 0; i < n; ++i) ids.push_back(mix64(fnv1a64(tokens[i])) % config.vocab_buckets);
    return ids;
}

double q_batch_loss(const QModelParams& params, const QModelConfig& config, Seqs tokens, const MatrixXd& targets,
                    double prob_clamp, QModelParams* grads, std::mt19937_64* rng) {
    if (static_cast<std::size_t>(targets.rows()) != tokens.size() ||
        static_cast<std::size_t>(targets.cols()) != config.num_classes)
        throw DataError("q-model batch: targets do not match the batch");
    if (tokens.empty()) return 0.0;
    for (const auto& s : tokens)
        if (s.empty()) throw DataError("q-model batch: empty token sequence");
    auto f = run_forward(params, config, tokens, grads != nullptr, rng);
    const MatrixXd probs = f.probs.transpose();
    const double loss = label_loss(targets, probs, prob_clamp);
    if (!grads) return loss;

    const MatrixXd dp = label_loss_grad(targets, probs, prob_clamp).transpose();
    const MatrixXd dlogits = dp.cwiseProduct((f.probs.array() * (1.0 - f.probs.array())).matrix());
    grads->head_w.noalias() += dlogits * f.pooled.transpose();
    grads->head_b += dlogits.rowwise().sum();
    MatrixXd dpooled = params.head_w.transpose() * dlogits;
    if (f.mask.size() > 0) dpooled = dpooled.cwiseProduct(f.mask);
    const Index H = ix(config.hidden);
    backward_direction(params.fwd, grads->fwd, grads->embedding, f.fwd, tokens, dpooled.topRows(H));
    backward_direction(params.bwd, grads->bwd, grads->embedding, f.bwd, f.rev, dpooled.bottomRows(H));
    return loss;
}

Eigen::MatrixXd predict_q_batch(const QModelParams& params, const QModelConfig& config,
                                std::span<const std::string> texts) {
    MatrixXd out(ix(texts.size()), ix(config.num_classes));
    for (std::size_t start = 0; start < texts.size(); start += kEvalChunk) {
        const std::size_t stop = std::min(texts.size(), start + kEvalChunk);
        std::vector<std::vector<std::size_t>> seqs;
        for (std::size_t i = start; i < stop; ++i) seqs.push_back(token_ids(texts[i], config));
        const auto f = run_forward(params, config, seqs, false, nullptr);
        out.middleRows(ix(start), ix(stop - start)) = f.probs.transpose();
    }
    return out;
}

QPrediction predict_q(const QModelParams& params, const QModelConfig& config, std::string_view text) {
    std::vector<std::vector<std::size_t>> seqs{token_ids(text, config)};
    const auto f = run_forward(params, config, seqs, false, nullptr);
    QPrediction out{f.probs.col(0), LabelVector(config.num_classes)};
    for (std::size_t c = 0; c < config.num_classes; ++c) out.label.set(c, out.probs[ix(c)] >= config.threshold);
    return out;
}

QModelParams train_q(const Dataset& fused, const QModelConfig& config, const QTrainConfig& train,
                     const std::function<void(const QEpochRecord&)>& on_epoch) {
    if (fused.empty()) throw DataError("question model needs a non-empty fused dataset");
    config.validate();
    train.validate();
    if (fused.num_classes() != config.num_classes) throw DataError("fused dataset class count differs from the model");

    std::vector<std::vector<std::size_t>> seqs;
    MatrixXd targets(ix(fused.size()), ix(config.num_classes));
    for (std::size_t i = 0; i < fused.size(); ++i) {
        const auto& s = fused[i];
        if (!s.label) throw DataError("fused sample '" + s.id + "' has no label");
        if (!s.all_confident()) throw DataError("fused sample '" + s.id + "' is only partially labeled");
        try {
            seqs.push_back(token_ids(s.question, config));
        } catch (const DataError& e) {
            throw DataError("fused sample '" + s.id + "': " + e.what());
        }
        for (std::size_t c = 0; c < config.num_classes; ++c) targets(ix(i), ix(c)) = (*s.label)[c] ? 1.0 : 0.0;
    }

    auto params = QModelParams::init(config, train.seed);
    auto grads = QModelParams::zeros(config);
    std::mt19937_64 rng(train.seed + 1);
    Adam adam(AdamConfig{train.learning_rate});
    const LinearSchedule schedule(train.learning_rate, 1.0, train.lr_end_factor, train.max_epochs);
    std::vector<std::size_t> order(seqs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    auto full_loss = [&] {
        double sum = 0.0;
        for (std::size_t start = 0; start < seqs.size(); start += kEvalChunk) {
            const std::size_t n = std::min(seqs.size() - start, kEvalChunk);
            sum += q_batch_loss(params, config, std::span(seqs).subspan(start, n), targets.middleRows(ix(start), ix(n)),
                                train.prob_clamp) *
                   static_cast<double>(n);
        }
        return sum / static_cast<double>(seqs.size());
    };

    std::optional<double> previous;
    for (std::size_t epoch = 0; epoch < train.max_epochs; ++epoch) {
        const double lr = schedule.at(epoch);
        adam.set_learning_rate(lr);
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += train.batch_size) {
            const std::size_t stop = std::min(order.size(), start + train.batch_size);
            std::vector<std::vector<std::size_t>> batch;
            MatrixXd y(ix(stop - start), targets.cols());
            for (std::size_t i = start; i < stop; ++i) {
                batch.push_back(seqs[order[i]]);
                y.row(ix(i - start)) = targets.row(ix(order[i]));
            }
            fill_zero(grads);
            const double loss = q_batch_loss(params, config, batch, y, train.prob_clamp, &grads, &rng);
            if (!std::isfinite(loss))
                throw NumericalError("non-finite question-model loss at epoch " + std::to_string(epoch));
            auto g = grads.tensors();
            clip_global_norm(g, train.grad_clip);
            std::vector<ConstTensorView> cg;
            for (const auto& t : g) cg.push_back(as_const(t));
            adam.step(params.tensors(), cg);
        }
        if (!params.all_finite())
            throw NumericalError("non-finite question-model parameter after epoch " + std::to_string(epoch));
        const double loss = full_loss();
        if (!std::isfinite(loss)) throw NumericalError("non-finite question-model loss at epoch " + std::to_string(epoch));
        if (on_epoch) on_epoch({epoch + 1, lr, loss});
        if (previous && epoch + 1 >= train.min_epochs && std::abs(*previous - loss) < train.loss_epsilon) break;
        previous = loss;
    }
    return params;
}

}  // namespace ssn
