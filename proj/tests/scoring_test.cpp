#include <gtest/gtest.h>

#include <algorithm>
#include <cctype>
#include <random>

#include "mapo/scoring.hpp"
#include "test_support.hpp"

using namespace mapo;

namespace {

// Independent label oracle: tokenize into maximal alphanumeric runs and
// return the first run that equals a label (case-insensitive).
std::optional<std::string> token_oracle(const std::string& raw, const std::vector<std::string>& labels) {
    std::string token;
    const auto check = [&]() -> std::optional<std::string> {
        for (const auto& label : labels) {
            std::string a = token, b = label;
            std::transform(a.begin(), a.end(), a.begin(), ::tolower);
            std::transform(b.begin(), b.end(), b.begin(), ::tolower);
            if (!a.empty() && a == b) return label;
        }
        return std::nullopt;
    };
    for (const char c : raw + " ") {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            token.push_back(c);
        } else {
            if (auto hit = check()) return hit;
            token.clear();
        }
    }
    return std::nullopt;
}

std::vector<Example> examples(const std::vector<std::string>& labels) {
    std::vector<Example> out;
    for (std::size_t i = 0; i < labels.size(); ++i) out.push_back({static_cast<int>(i), "x" + std::to_string(i), labels[i]});
    return out;
}

TaskConfig yes_no() { return TaskConfig{TaskType::classification, {"Yes", "No"}, "Yes", 0.0}; }

}  // namespace

TEST(ParseLabel, Examples) {
    const std::vector<std::string> labels{"Yes", "No"};
    EXPECT_EQ(parse_label("Yes", labels), "Yes");
    EXPECT_EQ(parse_label("answer: no.", labels), "No");
    EXPECT_EQ(parse_label("It is not a lie. No.", labels), "No");
    EXPECT_EQ(parse_label("Nobody knows", labels), std::nullopt);
    EXPECT_EQ(parse_label("", labels), std::nullopt);
    EXPECT_EQ(parse_label("No, yes", labels), "No");
}

TEST(ParseLabel, LongerLabelWinsAtSamePosition) {
    const std::vector<std::string> labels{"not", "not entailment"};
    EXPECT_EQ(parse_label("Not entailment here", labels), "not entailment");
}

TEST(ParseLabel, AgreesWithTokenOracleOnSingleWordLabels) {
    const std::vector<std::string> labels{"Yes", "No", "Maybe"};
    const std::vector<std::string> words{"yes", "No", "maybe", "nope", "yesterday", "not", "a", "lie", "NO", "Yes!"};
    std::mt19937 rng(5);
    for (int iter = 0; iter < 2000; ++iter) {
        std::string raw;
        const int n = static_cast<int>(rng() % 6);
        for (int k = 0; k < n; ++k) {
            raw += words[rng() % words.size()];
            raw += " .,\n"[rng() % 4];
        }
        EXPECT_EQ(parse_label(raw, labels), token_oracle(raw, labels)) << raw;
    }
}

TEST(ParseMathAnswer, Examples) {
    EXPECT_EQ(parse_math_answer("so the total is\n#### 42"), "42");
    EXPECT_EQ(parse_math_answer("It costs 1,234."), "1234");
    EXPECT_EQ(parse_math_answer("first 3 then 7.50"), "7.5");
    EXPECT_EQ(parse_math_answer("-12 degrees"), "-12");
    EXPECT_EQ(parse_math_answer("no digits at all"), std::nullopt);
    EXPECT_EQ(parse_math_answer("#### 10 #### 11"), "11");
}

TEST(F1, Examples) {
    EXPECT_DOUBLE_EQ(f1({.tp = 5, .fp = 0, .fn = 0, .tn = 5}), 1.0);
    EXPECT_NEAR(f1({.tp = 1, .fp = 1, .fn = 0, .tn = 0}), 2.0 / 3.0, 1e-12);
    EXPECT_DOUBLE_EQ(f1({.tp = 0, .fp = 3, .fn = 3, .tn = 0}), 0.0);
    EXPECT_DOUBLE_EQ(f1({}), 0.0);
}

TEST(ScorePredictions, UnparsedCountsAsNegative) {
    const auto xs = examples({"Yes", "No", "Yes"});
    const auto task = yes_no();
    std::vector<Prediction> preds{score_output(xs[0], "Yes", task), score_output(xs[1], "gibberish", task),
                                  score_output(xs[2], "???", task)};
    ConfusionCounts cc;
    const double score = score_predictions(xs, preds, task, &cc);
    EXPECT_EQ(cc.tp, 1);
    EXPECT_EQ(cc.fn, 1);
    EXPECT_EQ(cc.tn, 1);
    EXPECT_NEAR(score, 2.0 / 3.0, 1e-12);
    EXPECT_FALSE(preds[1].parsed_label);
}

TEST(ScorePredictions, MathAccuracy) {
    TaskConfig task{TaskType::math, {}, "", 0.0};
    const auto xs = examples({"#### 4", "10", "3"});
    std::vector<Prediction> preds{score_output(xs[0], "The answer is 4", task), score_output(xs[1], "10.0", task),
                                  score_output(xs[2], "5", task)};
    EXPECT_NEAR(score_predictions(xs, preds, task), 2.0 / 3.0, 1e-12);
}

TEST(EvaluatePrompt, OracleBackendScoresOne) {
    const auto split = mapo::testing::synthetic_split(300, 64, 3);
    std::map<std::string, std::string> gold;
    for (const auto& x : split.test) gold[x.input_text] = x.label;
    auto gw = mapo::testing::responder_gateway([&](const LlmRequest& r) -> std::optional<std::string> {
        const auto nl = r.rendered_prompt.find('\n');
        return "Answer: " + gold.at(r.rendered_prompt.substr(nl + 1));
    });
    const auto eval = evaluate_prompt("Decide.", split.test, *gw, TaskConfig::from_split(split, 0.0));
    EXPECT_DOUBLE_EQ(eval.score, 1.0);
    EXPECT_EQ(gw->call_count(), 64);
    ASSERT_EQ(eval.predictions.size(), 64u);
    for (std::size_t i = 0; i < 64; ++i) EXPECT_EQ(eval.predictions[i].example_id, split.test[i].id);
    EXPECT_EQ(gw->transcript().entries[0].request.rendered_prompt, "Decide.\n" + split.test[0].input_text);
}

TEST(EvaluatePrompt, AlwaysNegativeScoresZero) {
    const auto split = mapo::testing::synthetic_split(300, 64, 3);
    auto gw = mapo::testing::responder_gateway([&](const LlmRequest&) -> std::optional<std::string> {
        return split.positive_label == "Yes" ? "No" : "Yes";
    });
    EXPECT_DOUBLE_EQ(evaluate_prompt("p", split.test, *gw, TaskConfig::from_split(split, 0.0)).score, 0.0);
}

TEST(EvaluatePrompt, ScoreIsPermutationInvariant) {
    const auto split = mapo::testing::synthetic_split(300, 64, 3);
    auto gw = mapo::testing::synthetic_gateway(split);
    const auto task = TaskConfig::from_split(split, 0.0);
    auto shuffled = split.test;
    std::mt19937 rng(1);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    EXPECT_DOUBLE_EQ(evaluate_prompt("p", split.test, *gw, task).score, evaluate_prompt("p", shuffled, *gw, task).score);
}

TEST(EvaluatePrompt, GatewayErrorsNameTheExample) {
    const auto split = mapo::testing::synthetic_split(300, 64, 3);
    Gateway gw(std::make_unique<ScriptedBackend>());
    try {
        evaluate_prompt("p", split.test, gw, TaskConfig::from_split(split, 0.0));
        FAIL();
    } catch (const ScriptExhaustedError& e) {
        EXPECT_NE(std::string(e.what()).find("example id " + std::to_string(split.test[0].id)), std::string::npos);
    }
}
