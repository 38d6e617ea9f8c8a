#include "ssn/synthetic.hpp"

#include "ssn/errors.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace ssn {

namespace {

using Pool = std::vector<std::string_view>;

const Pool kTopics = {"depression", "panic attacks", "insomnia",   "grief",         "social anxiety",
                      "burnout",    "mood swings",   "flashbacks", "an eating disorder", "ocd"};
const Pool kContext = {"I am in my twenties and live with my parents.", "This started about a year ago.",
                       "My sister was the first to notice it.", "I work night shifts at a warehouse.",
                       "It gets worse around the holidays.", "I moved to a new city last spring.",
                       "I have tried to deal with it on my own so far."};

// Per class: question templates ({t} = topic, {w} = class word) and class words.
struct ClassLexicon {
    Pool templates;
    Pool words;
    Pool best_answers;
};

const std::array<ClassLexicon, 3> kLexicon = {{
    {{"What {w} would you suggest for {t}?", "Can anyone recommend a {w} that works for {t}?",
      "How should I adjust my {w} when dealing with {t}?", "Is there a reliable {w} that explains {t}?"},
     {"medication", "dosage", "treatment plan", "therapy technique", "guideline", "specialist", "handbook"},
     {"Ask your doctor to review the dosage and keep a symptom diary.",
      "A licensed specialist can explain which treatment plan fits best.",
      "Look for the official guideline, it lists the usual medication options."}},
    {{"I feel so {w} because of {t}.", "Lately I am {w} and cannot stop crying about {t}.",
      "Nobody sees how {w} {t} makes me.", "Every night I lie awake feeling {w}."},
     {"hopeless", "lonely", "scared", "heartbroken", "worthless", "overwhelmed", "ashamed"},
     {"I am so sorry you are hurting, what you feel is valid and you are not alone.",
      "Sending you a hug, it is okay to feel this way and it will get lighter.",
      "You matter, and it takes courage to say how heavy this feels."}},
    {{"Is there a {w} for people living with {t}?", "I want to find a {w} where others with {t} meet.",
      "Would anyone here start a {w} about {t} with me?", "How do I join a local {w} for {t}?"},
     {"support group", "meetup", "peer circle", "buddy network", "community chapter", "companion club"},
     {"Check the community board, there is a peer circle that meets every week.",
      "Try the buddy network, members pair up and message each other daily.",
      "A meetup near you would connect you with people who get it."}},
}};

const Pool kOtherAnswers = {"Drink more water and get some sleep.", "I had something similar once.",
                            "Good luck with everything.",          "Have you tried going for walks?",
                            "Not sure, maybe search online.",      "This happened to my cousin too.",
                            "Keep us posted on how it goes."};

class Generator {
public:
    explicit Generator(const SyntheticConfig& c) : config_(c), rng_(c.seed) {}

    std::vector<Sample> make(std::size_t count, const char* prefix) {
        std::vector<Sample> out;
        out.reserve(count);
        for (std::size_t i = 0; i < count; ++i) out.push_back(make_one(prefix, i));
        return out;
    }

private:
    std::string_view pick(const Pool& pool) {
        return pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng_)];
    }
    bool coin(double p) { return std::bernoulli_distribution(p)(rng_); }

    std::string fill(std::string_view tmpl, std::string_view topic, std::string_view word) {
        std::string out;
        for (std::size_t i = 0; i < tmpl.size(); ++i) {
            if (tmpl.compare(i, 3, "{t}") == 0) {
                out += topic;
                i += 2;
            } else if (tmpl.compare(i, 3, "{w}") == 0) {
                out += word;
                i += 2;
            } else {
                out += tmpl[i];
            }
        }
        return out;
    }

    Sample make_one(const char* prefix, std::size_t index) {
        const std::array<double, 3> rates = {config_.informational_rate, config_.emotional_rate, config_.network_rate};
        LabelVector label(3);
        // Every question asks for at least one kind of support and never all three.
        while (label.count() == 0 || label.count() == 3)
            for (std::size_t c = 0; c < 3; ++c) label.set(c, coin(rates[c]));

        const auto topic = pick(kTopics);
        std::vector<std::string> sentences;
        if (coin(0.6)) sentences.emplace_back(pick(kContext));
        std::vector<std::size_t> positives;
        for (std::size_t c = 0; c < 3; ++c) {
            if (!label[c]) continue;
            positives.push_back(c);
            const auto& lex = kLexicon[c];
            sentences.push_back(fill(pick(lex.templates), topic, pick(lex.words)));
        }
        if (coin(config_.cue_noise)) {
            std::size_t c = std::uniform_int_distribution<std::size_t>(0, 2)(rng_);
            if (!label[c]) sentences.push_back("Someone mentioned " + std::string(pick(kLexicon[c].words)) + " once.");
        }
        std::shuffle(sentences.begin(), sentences.end(), rng_);
        std::string question;
        for (const auto& s : sentences) question += (question.empty() ? "" : " ") + s;

        Sample s;
        char id[48];
        std::snprintf(id, sizeof id, "%s-%05zu", prefix, index);
        s.id = id;
        s.question = std::move(question);
        s.label = std::move(label);

        const std::size_t n_answers =
            std::uniform_int_distribution<std::size_t>(1, std::max<std::size_t>(1, config_.max_answers))(rng_);
        const std::size_t best = std::uniform_int_distribution<std::size_t>(0, n_answers - 1)(rng_);
        // The best answer replies to every need in the question; the others
        // touch one need at most.
        for (std::size_t k = 0; k < n_answers; ++k) {
            AnswerRecord a;
            if (k == best) {
                for (auto c : positives) a.text += std::string(pick(kLexicon[c].best_answers)) + " ";
                a.text += pick(kOtherAnswers);
                a.is_best = true;
            } else if (coin(0.4)) {
                const auto c = positives[std::uniform_int_distribution<std::size_t>(0, positives.size() - 1)(rng_)];
                a.text = std::string(pick(kLexicon[c].best_answers));
            } else {
                a.text = std::string(pick(kOtherAnswers));
            }
            s.answers.push_back(std::move(a));
        }
        return s;
    }

    SyntheticConfig config_;
    std::mt19937_64 rng_;
};

}  // namespace

SyntheticCorpus make_synthetic_corpus(const SyntheticConfig& config) {
    if (config.labeled == 0) throw ConfigError("synthetic corpus needs at least one labeled sample");
    if (config.max_answers == 0) throw ConfigError("synthetic max_answers must be >= 1");
    Generator gen(config);
    auto labeled = gen.make(config.labeled, "syn-l");
    auto unlabeled = gen.make(config.unlabeled, "syn-u");
    for (auto& s : unlabeled) s.label.reset();
    auto test = gen.make(config.test, "syn-t");
    return {Dataset(DatasetKind::Labeled, std::move(labeled)), Dataset(DatasetKind::Unlabeled, std::move(unlabeled)),
            Dataset(DatasetKind::Labeled, std::move(test))};
}

}  // namespace ssn
