#include "ssn/ssl_trainer.hpp"

#include "ssn/errors.hpp"
#include "ssn/metrics.hpp"
#include "ssn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace ssn {

namespace {

using Eigen::Index;

Index ix(std::size_t v) { return static_cast<Index>(v); }

void zero_fill(QAModelParams& p) {
    for (auto& t : p.tensors()) std::fill(t.values.begin(), t.values.end(), 0.0);
}

TrainExample labeled_example(const Sample& s, const EncodedSample& e) {
    TrainExample ex;
    ex.sample = &e;
    const auto C = ix(s.label->size());
    ex.targets.resize(C);
    for (Index c = 0; c < C; ++c) ex.targets[c] = (*s.label)[static_cast<std::size_t>(c)] ? 1.0 : 0.0;
    ex.mask = Eigen::VectorXd::Ones(C);
    return ex;
}

TrainExample pseudo_example(const Sample& s, const EncodedSample& e) {
    TrainExample ex = labeled_example(s, e);
    for (Index c = 0; c < ex.mask.size(); ++c) ex.mask[c] = (*s.label_mask)[static_cast<std::size_t>(c)];
    ex.pseudo = true;
    return ex;
}

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
};

// Holds out a seeded fraction of the usable labeled samples. Falls back to
// validating on the training part when the split would be empty.
Split validation_split(const EncodedDataset& labeled, double fraction, std::uint64_t seed) {
    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < labeled.size(); ++i)
        if (labeled.encoded[i].answer_count > 0) usable.push_back(i);
    std::mt19937_64 rng(seed ^ 0x5eedf00dULL);
    std::shuffle(usable.begin(), usable.end(), rng);
    const auto n_val = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(usable.size())));
    Split s;
    if (n_val == 0 || n_val >= usable.size()) {
        s.train = usable;
        s.validation = usable;
    } else {
        s.validation.assign(usable.begin(), usable.begin() + static_cast<std::ptrdiff_t>(n_val));
        s.train.assign(usable.begin() + static_cast<std::ptrdiff_t>(n_val), usable.end());
    }
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.validation.begin(), s.validation.end());
    return s;
}

double validation_f1(const QAModelParams& params, const QAModelConfig& model, const EncodedDataset& labeled,
                     std::span<const std::size_t> indices) {
    if (indices.empty()) return 0.0;
    std::vector<EncodedSample> xs;
    std::vector<LabelVector> truth, pred;
    for (auto i : indices) {
        const auto p = forward(labeled.encoded[i], params, model).probs;
        LabelVector l(static_cast<std::size_t>(p.size()));
        for (Index c = 0; c < p.size(); ++c) l.set(static_cast<std::size_t>(c), p[c] >= 0.5);
        pred.push_back(std::move(l));
        truth.push_back(*labeled.dataset[i].label);
    }
    return micro_prf(confusion(truth, pred)).f1;
}

void check_finite(const LossBreakdown& loss, std::size_t generation, std::size_t epoch) {
    if (!std::isfinite(loss.total))
        throw NumericalError("non-finite training loss at generation " + std::to_string(generation) + ", epoch " +
                             std::to_string(epoch) + " (label " + std::to_string(loss.label_term) + ", unlabel " +
                             std::to_string(loss.unlabel_term) + ", quality " + std::to_string(loss.quality_term) +
                             ")");
}

}  // namespace

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("trainer.batch_size must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw ConfigError("trainer.learning_rate must be a finite value > 0");
    if (optimizer != "adam" && optimizer != "sgd") throw ConfigError("trainer.optimizer must be 'adam' or 'sgd'");
    if (!(lr_end_factor > 0.0 && lr_end_factor <= 1.0)) throw ConfigError("trainer.lr_end_factor must be in (0, 1]");
    if (max_epochs < 1) throw ConfigError("trainer.max_epochs must be >= 1");
    if (min_epochs > max_epochs) throw ConfigError("trainer.min_epochs must not exceed trainer.max_epochs");
    if (!(loss_epsilon > 0.0)) throw ConfigError("trainer.loss_epsilon must be > 0");
    if (!(generation_epsilon > 0.0)) throw ConfigError("trainer.generation_epsilon must be > 0");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
        throw ConfigError("trainer.validation_fraction must be in [0, 1)");
    if (!std::isfinite(grad_clip)) throw ConfigError("trainer.grad_clip must be finite");
    if (!(prob_clamp > 0.0 && prob_clamp < 0.5)) throw ConfigError("loss.prob_clamp must be in (0, 0.5)");
    validate_tau(tau);
    weights.validate();
}

EncodedDataset encode_dataset(const Encoder& encoder, const Dataset& dataset, const EncodingShape& shape) {
    return {dataset, encode_samples(encoder, dataset.samples(), shape)};
}

LossBreakdown batch_loss(std::span<const TrainExample> batch, const QAModelParams& params,
                         const QAModelConfig& model, const TrainConfig& train, QAModelParams* grads,
                         const ForwardOptions& options) {
    LossBreakdown out;
    if (batch.empty()) return out;
    const auto C = ix(model.num_classes);
    std::size_t n_real = 0, n_pseudo = 0;
    for (const auto& ex : batch) (ex.pseudo ? n_pseudo : n_real) += 1;

    std::vector<ForwardTrace> traces;
    traces.reserve(batch.size());
    for (const auto& ex : batch) traces.push_back(forward(*ex.sample, params, model, options));

    Eigen::MatrixXd y_real(ix(n_real), C), z_real(ix(n_real), C);
    Eigen::MatrixXd y_ps(ix(n_pseudo), C), m_ps(ix(n_pseudo), C), z_ps(ix(n_pseudo), C);
    std::vector<Eigen::VectorXd> weights;
    std::vector<std::optional<std::size_t>> best;
    std::vector<Index> row(batch.size());
    Index r = 0, u = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& ex = batch[i];
        if (ex.pseudo) {
            y_ps.row(u) = ex.targets.transpose();
            m_ps.row(u) = ex.mask.transpose();
            z_ps.row(u) = traces[i].logits.transpose();
            row[i] = u++;
        } else {
            y_real.row(r) = ex.targets.transpose();
            z_real.row(r) = traces[i].logits.transpose();
            row[i] = r++;
        }
        weights.push_back(traces[i].attention.weights);
        best.push_back(ex.sample->best_answer);
    }

    const Eigen::MatrixXd all_real = Eigen::MatrixXd::Ones(ix(n_real), C);
    out = total_loss(masked_label_loss_logits(y_real, all_real, z_real, train.prob_clamp),
                     masked_label_loss_logits(y_ps, m_ps, z_ps, train.prob_clamp), quality_loss(weights, best),
                     train.weights);
    out.labeled_samples = n_real;
    out.unlabeled_samples = n_pseudo;
    out.pseudo_classes = static_cast<std::size_t>(m_ps.sum());
    out.quality_samples = static_cast<std::size_t>(std::count_if(best.begin(), best.end(), [](auto& b) { return b.has_value(); }));
    if (!grads) return out;

    const Eigen::MatrixXd g_real =
        masked_label_loss_logits_grad(y_real, all_real, z_real, train.prob_clamp) * train.weights.label;
    const Eigen::MatrixXd g_ps = masked_label_loss_logits_grad(y_ps, m_ps, z_ps, train.prob_clamp) * train.weights.unlabel;
    const auto g_w = quality_loss_grad(weights, best);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Eigen::VectorXd dlogits = batch[i].pseudo ? Eigen::VectorXd(g_ps.row(row[i]).transpose())
                                                        : Eigen::VectorXd(g_real.row(row[i]).transpose());
        backward(*batch[i].sample, params, model, traces[i], dlogits, g_w[i] * train.weights.quality, *grads);
    }
    return out;
}

Eigen::MatrixXd predict_probabilities(const QAModelParams& params, const QAModelConfig& model,
                                      std::span<const EncodedSample> samples) {
    Eigen::MatrixXd out(ix(samples.size()), ix(model.num_classes));
    for (std::size_t i = 0; i < samples.size(); ++i) out.row(ix(i)) = forward(samples[i], params, model).probs.transpose();
    return out;
}

std::size_t fit(QAModelParams& params, std::span<const TrainExample> examples, const QAModelConfig& model,
                const TrainConfig& train, std::uint64_t seed, std::size_t generation,
                const TrainCallbacks& callbacks, LossBreakdown* final_loss) {
    if (examples.empty()) throw DataError("no trainable samples (every sample lacks answers?)");
    std::mt19937_64 rng(seed);
    Adam adam(AdamConfig{train.learning_rate});
    const LinearSchedule schedule(train.learning_rate, 1.0, train.lr_end_factor, train.max_epochs);
    auto grads = QAModelParams::zeros(model);
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<TrainExample> batch;
    const ForwardOptions training{true, &rng};

    std::optional<double> previous;
    std::size_t epoch = 0;
    LossBreakdown loss;
    while (epoch < train.max_epochs) {
        const double lr = schedule.at(epoch);
        adam.set_learning_rate(lr);
        std::shuffle(order.begin(), order.end(), rng);
        double norm_sum = 0.0;
        std::size_t steps = 0;
        for (std::size_t start = 0; start < order.size(); start += train.batch_size) {
            const std::size_t stop = std::min(order.size(), start + train.batch_size);
            batch.clear();
            for (std::size_t i = start; i < stop; ++i) batch.push_back(examples[order[i]]);
            zero_fill(grads);
            const auto step_loss = batch_loss(batch, params, model, train, &grads, training);
            check_finite(step_loss, generation, epoch);
            auto g = grads.tensors();
            norm_sum += clip_global_norm(g, train.grad_clip);
            ++steps;
            if (train.optimizer == "sgd") {
                auto p = params.tensors();
                for (std::size_t t = 0; t < p.size(); ++t)
                    for (std::size_t j = 0; j < p[t].values.size(); ++j) p[t].values[j] -= lr * g[t].values[j];
            } else {
                std::vector<ConstTensorView> cg;
                for (const auto& t : g) cg.push_back(as_const(t));
                adam.step(params.tensors(), cg);
            }
        }
        if (!params.all_finite())
            throw NumericalError("non-finite parameter after generation " + std::to_string(generation) + ", epoch " +
                                 std::to_string(epoch));
        loss = batch_loss(examples, params, model, train);
        check_finite(loss, generation, epoch);
        ++epoch;
        if (callbacks.on_epoch)
            callbacks.on_epoch({generation, epoch, lr, steps ? norm_sum / static_cast<double>(steps) : 0.0, loss});
        if (previous && epoch >= train.min_epochs && std::abs(*previous - loss.total) < train.loss_epsilon) break;
        previous = loss.total;
    }
    if (final_loss) *final_loss = loss;
    return epoch;
}

QAModelParams warmup_train(const EncodedDataset& labeled, const QAModelConfig& model, const TrainConfig& train,
                           const TrainCallbacks& callbacks) {
    if (labeled.dataset.empty()) throw DataError("warm-up needs a non-empty labeled dataset");
    model.validate();
    train.validate();
    std::vector<TrainExample> examples;
    for (std::size_t i = 0; i < labeled.size(); ++i)
        if (labeled.encoded[i].answer_count > 0) examples.push_back(labeled_example(labeled.dataset[i], labeled.encoded[i]));
    auto params = QAModelParams::init(model, train.seed);
    fit(params, examples, model, train, train.seed + 1, 0, callbacks);
    return params;
}

PseudoResult pseudo_from_probabilities(const Dataset& unlabeled, const Eigen::MatrixXd& probs, double tau) {
    validate_tau(tau);
    if (static_cast<std::size_t>(probs.rows()) != unlabeled.size() ||
        static_cast<std::size_t>(probs.cols()) != unlabeled.num_classes())
        throw DataError("pseudo-labeling: probability matrix does not match the unlabeled set");
    const auto gate = pseudo_targets(probs, tau);
    std::vector<Sample> kept;
    std::vector<std::size_t> source;
    for (std::size_t i = 0; i < unlabeled.size(); ++i) {
        if (gate.mask.row(ix(i)).sum() == 0.0) continue;
        Sample s = unlabeled[i];
        LabelVector label(unlabeled.num_classes());
        std::vector<std::uint8_t> mask(unlabeled.num_classes(), 0);
        for (std::size_t c = 0; c < unlabeled.num_classes(); ++c) {
            mask[c] = gate.mask(ix(i), ix(c)) != 0.0 ? 1 : 0;
            label.set(c, mask[c] && gate.targets(ix(i), ix(c)) != 0.0);
        }
        s.label = std::move(label);
        s.label_mask = std::move(mask);
        s.origin = "pseudo";
        kept.push_back(std::move(s));
        source.push_back(i);
    }
    return {Dataset(DatasetKind::Pseudo, std::move(kept), unlabeled.num_classes()), std::move(source)};
}

PseudoResult predict_pseudo(const QAModelParams& params, const QAModelConfig& model, const EncodedDataset& unlabeled,
                            double tau) {
    if (unlabeled.dataset.kind() != DatasetKind::Unlabeled) throw DataError("predict_pseudo expects an unlabeled dataset");
    return pseudo_from_probabilities(unlabeled.dataset, predict_probabilities(params, model, unlabeled.encoded), tau);
}

TrainResult self_train(const EncodedDataset& labeled, const EncodedDataset& unlabeled, const QAModelConfig& model,
                       const TrainConfig& train, const TrainCallbacks& callbacks) {
    if (labeled.dataset.empty()) throw DataError("self-training needs a non-empty labeled dataset");
    if (unlabeled.dataset.kind() != DatasetKind::Unlabeled) throw DataError("self-training expects an unlabeled D_u");
    model.validate();
    train.validate();

    TrainResult result;
    auto& state = result.state;
    const auto split = validation_split(labeled, train.validation_fraction, train.seed);
    state.validation_size = split.validation.size();
    for (const auto& e : labeled.encoded) state.skipped_no_answers += e.answer_count == 0 ? 1 : 0;

    std::vector<TrainExample> examples;
    for (auto i : split.train) examples.push_back(labeled_example(labeled.dataset[i], labeled.encoded[i]));
    if (examples.empty()) throw DataError("no labeled sample has answers; the Q&A model cannot be trained");

    auto params = QAModelParams::init(model, train.seed);
    GenerationRecord rec;
    rec.epochs = fit(params, examples, model, train, train.seed + 1, 0, callbacks, &rec.loss);
    rec.validation_f1 = validation_f1(params, model, labeled, split.validation);
    state.history.push_back(rec);
    state.snapshots.push_back(params);
    if (callbacks.on_generation) callbacks.on_generation(rec, params);

    std::vector<bool> admitted(unlabeled.size(), false);
    // The pseudo rows point into `unlabeled.encoded`, which outlives this call.
    for (std::size_t gen = 1; gen <= train.max_generations && !unlabeled.dataset.empty(); ++gen) {
        std::vector<std::size_t> pending;
        for (std::size_t i = 0; i < unlabeled.size(); ++i)
            if (!admitted[i]) pending.push_back(i);
        if (pending.empty()) break;
        std::vector<EncodedSample> pending_enc;
        for (auto i : pending) pending_enc.push_back(unlabeled.encoded[i]);
        const auto probs = predict_probabilities(params, model, pending_enc);
        const auto fresh = pseudo_from_probabilities(unlabeled.dataset.subset(pending), probs, train.tau);
        if (fresh.dataset.empty()) break;

        for (std::size_t j = 0; j < fresh.dataset.size(); ++j) {
            const auto src = pending[fresh.source[j]];
            admitted[src] = true;
            state.pseudo.push_back(fresh.dataset[j]);
            state.pseudo_source.push_back(src);
            examples.push_back(pseudo_example(state.pseudo.back(), unlabeled.encoded[src]));
        }

        GenerationRecord g;
        g.generation = gen;
        g.admitted_new = fresh.dataset.size();
        g.admitted_total = state.pseudo.size();
        g.epochs = fit(params, examples, model, train, train.seed + 1 + gen, gen, callbacks, &g.loss);
        g.validation_f1 = validation_f1(params, model, labeled, split.validation);
        state.history.push_back(g);
        state.snapshots.push_back(params);
        state.generation = gen;
        if (callbacks.on_generation) callbacks.on_generation(g, params);
        if (std::abs(g.validation_f1 - state.history[gen - 1].validation_f1) < train.generation_epsilon) break;
    }

    for (std::size_t g = 1; g < state.history.size(); ++g)
        if (state.history[g].validation_f1 > state.history[state.best_generation].validation_f1) state.best_generation = g;
    result.params = state.snapshots[state.best_generation];
    return result;
}

Dataset pseudo_dataset(const TrainState& state, std::size_t num_classes) {
    return Dataset(DatasetKind::Pseudo, state.pseudo, num_classes);
}

}  // namespace ssn
