#include <gtest/gtest.h>

#include "mapo/gradient_engine.hpp"
#include "test_support.hpp"

using namespace mapo;

namespace {

struct Harness {
    RunConfig cfg;
    TemplateSet templates;
    ScriptedBackend* backend = nullptr;
    std::unique_ptr<Gateway> gateway;
    IdSequence<PromptId> prompt_ids;
    IdSequence<GradientId> gradient_ids;
    std::vector<Shortfall> shortfalls;

    Harness() {
        auto b = std::make_unique<ScriptedBackend>();
        backend = b.get();
        gateway = std::make_unique<Gateway>(std::move(b));
        prompt_ids.next();  // id 0 is the seed
    }

    ExpansionContext ctx(int round = 0) {
        return ExpansionContext{cfg, templates, *gateway, TaskType::classification, round, prompt_ids, gradient_ids,
                                shortfalls};
    }
};

ExampleSample sample_of(int n) {
    ExampleSample s;
    for (int i = 0; i < n; ++i) s.examples.push_back({i, "input " + std::to_string(i), "Yes"});
    return s;
}

}  // namespace

TEST(Render, SubstitutesSlots) {
    Bindings b{{"task_type", "classification"}, {"prompt", "Say yes."}, {"correct_string", "Input: a\nCorrect answer: Yes"},
               {"positive_gradient_history", std::string(kNoHistory)}, {"num_gradients", "2"}};
    const auto text = render(TemplateSet{}.tau, b);
    EXPECT_NE(text.find("give 2 reasons why the \n"), std::string::npos);
    EXPECT_NE(text.find("iterations of this prompt:\n        (none)\n"), std::string::npos);
    EXPECT_NE(text.find("\"Say yes.\""), std::string::npos);
    EXPECT_EQ(text.find('{'), std::string::npos);
}

TEST(Render, MissingSlotIsAnError) {
    try {
        render(TemplateSet{}.tau, Bindings{{"prompt", "x"}});
        FAIL();
    } catch (const TemplateError& e) {
        EXPECT_NE(std::string(e.what()).find("missing-slot"), std::string::npos);
    }
}

TEST(Render, ValuesAreNotRescannedAndStrayBracesSurvive) {
    const PromptTemplate t{TemplateName::paraphrase, "a {x} {not a slot} {}"};
    EXPECT_EQ(render(t, Bindings{{"x", "{x}"}}), "a {x} {not a slot} {}");
}

TEST(Templates, ShapeOfGradientTemplates) {
    const TemplateSet set;
    EXPECT_EQ(template_slots(set.tau.body),
              (std::set<std::string>{"task_type", "prompt", "correct_string", "positive_gradient_history", "num_gradients"}));
    EXPECT_EQ(template_slots(set.alpha.body), (std::set<std::string>{"task_type", "prompt", "correct_str",
                                                                     "positive_feedback_str", "positive_gradient_history"}));
    EXPECT_EQ(template_slots(set.tau.body), template_slots(set.tau_negative.body));
    EXPECT_EQ(template_slots(set.alpha.body), template_slots(set.alpha_negative.body));
    for (const auto* body : {&set.tau.body, &set.alpha.body}) {
        EXPECT_EQ(body->front(), '\n');
        EXPECT_EQ(body->substr(body->size() - 9), "\n        ");
    }
    EXPECT_NE(set.alpha.body.find("original wording.       \n"), std::string::npos);
    EXPECT_NE(set.tau_negative.body.find("examples wrong"), std::string::npos);
}

TEST(Templates, OverridesFromDirectory) {
    mapo::testing::TempDir dir;
    mapo::testing::write_file(dir / "paraphrase.txt", "Rewrite: {prompt}");
    const auto set = TemplateSet::with_overrides(dir.path());
    EXPECT_EQ(set.paraphrase.body, "Rewrite: {prompt}");
    EXPECT_EQ(set.tau.body, TemplateSet{}.tau.body);
}

TEST(ParseDelimited, Examples) {
    EXPECT_EQ(parse_delimited("<START>a<END> junk <START> b \n<END>"), (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(parse_delimited("<START>x<START>y<END>"), (std::vector<std::string>{"y"}));
    EXPECT_TRUE(parse_delimited("<END><START>z").empty());
    EXPECT_TRUE(parse_delimited("<START>  <END>").empty());
    EXPECT_TRUE(parse_delimited("no delimiters").empty());
    EXPECT_EQ(parse_delimited("<END>stray<START>ok<END><END>"), (std::vector<std::string>{"ok"}));
}

TEST(FormatExamples, Blocks) {
    EXPECT_EQ(format_examples(sample_of(2).examples),
              "Input: input 0\nCorrect answer: Yes\n\nInput: input 1\nCorrect answer: Yes");
    EXPECT_EQ(format_examples({}), "");
}

TEST(GenerateGradients, OneCallTruncatedToCount) {
    Harness h;
    h.backend->enqueue(RoleTag::gradient_gen, "<START>r1<END><START>r2<END><START>r3<END>");
    auto ctx = h.ctx(2);
    const auto parent = new_seed_prompt("Seed", PromptId{0});
    const auto grads = generate_gradients(parent, sample_of(3), "(none)", Polarity::positive, 2, ctx);
    ASSERT_EQ(grads.size(), 2u);
    EXPECT_EQ(grads[0].text, "r1");
    EXPECT_EQ(grads[1].text, "r2");
    EXPECT_EQ(grads[0].round, 2);
    EXPECT_EQ(grads[0].source_prompt_id, parent.id);
    EXPECT_EQ(h.gateway->call_count(), 1);
    const auto req = h.gateway->transcript().entries[0].request;
    EXPECT_EQ(req.role_tag, RoleTag::gradient_gen);
    EXPECT_NE(req.rendered_prompt.find("Input: input 2\nCorrect answer: Yes"), std::string::npos);
}

TEST(GenerateGradients, ShortfallsAreRecorded) {
    Harness h;
    h.backend->enqueue(RoleTag::gradient_gen, "only prose");
    auto ctx = h.ctx();
    const auto parent = new_seed_prompt("Seed");
    EXPECT_TRUE(generate_gradients(parent, sample_of(2), "(none)", Polarity::positive, 2, ctx).empty());
    ASSERT_EQ(h.shortfalls.size(), 1u);
    EXPECT_EQ(h.shortfalls[0].kind, "gradient_parse");

    EXPECT_TRUE(generate_gradients(parent, sample_of(0), "(none)", Polarity::positive, 2, ctx).empty());
    EXPECT_EQ(h.shortfalls.back().kind, "empty_sample");
    EXPECT_EQ(h.gateway->call_count(), 1);
}

TEST(GenerateGradients, NegativePolarityUsesMirroredTemplate) {
    Harness h;
    h.backend->enqueue(RoleTag::gradient_gen, "<START>w<END>");
    auto ctx = h.ctx();
    const auto grads =
        generate_gradients(new_seed_prompt("Seed"), sample_of(1), "(none)", Polarity::negative, 1, ctx);
    ASSERT_EQ(grads.size(), 1u);
    EXPECT_EQ(grads[0].polarity, Polarity::negative);
    EXPECT_NE(h.gateway->transcript().entries[0].request.rendered_prompt.find("examples wrong"), std::string::npos);
}

TEST(ApplyGradient, IssuesEditsPerGradientWithVariants) {
    Harness h;
    for (int i = 0; i < 4; ++i) h.backend->enqueue(RoleTag::prompt_edit, "<START>child " + std::to_string(i) + "<END>");
    auto ctx = h.ctx(1);
    Prompt parent = new_seed_prompt("Seed", PromptId{0});
    const Gradient g{h.gradient_ids.next(), "it is concise", parent.id, 1, Polarity::positive};
    const auto children = apply_gradient(parent, g, sample_of(3), "history text", ctx);
    ASSERT_EQ(children.size(), 4u);
    for (std::size_t j = 0; j < 4; ++j) {
        EXPECT_EQ(children[j].text, "child " + std::to_string(j));
        EXPECT_EQ(children[j].parent_id, parent.id);
        EXPECT_EQ(children[j].gradient_id, g.id);
        EXPECT_EQ(children[j].round, 2);
    }
    EXPECT_LT(children[0].id, children[3].id);
    const auto t = h.gateway->transcript();
    ASSERT_EQ(t.entries.size(), 4u);
    for (int j = 0; j < 4; ++j) {
        const auto& text = t.entries[j].request.rendered_prompt;
        EXPECT_TRUE(text.ends_with(variant_line(j + 1, 4)));
        EXPECT_NE(text.find("are that it is concise\n"), std::string::npos);
        EXPECT_NE(text.find("iterations of this prompt:\n        history text\n"), std::string::npos);
    }
}

TEST(ApplyGradient, UnparsableEditIsSkipped) {
    Harness h;
    h.cfg.candidates_per_parent = 2;
    h.backend->enqueue(RoleTag::prompt_edit, "nothing");
    h.backend->enqueue(RoleTag::prompt_edit, "<START>good<END>");
    auto ctx = h.ctx();
    const auto parent = new_seed_prompt("Seed");
    const Gradient g{GradientId{0}, "x", parent.id, 0, Polarity::positive};
    h.cfg.num_gradients = 1;
    const auto children = apply_gradient(parent, g, sample_of(1), "(none)", ctx);
    ASSERT_EQ(children.size(), 1u);
    EXPECT_EQ(children[0].text, "good");
    EXPECT_EQ(h.shortfalls.back().kind, "edit_parse");
}

TEST(ApplyGradient, RejectsForeignGradient) {
    Harness h;
    auto ctx = h.ctx();
    const Gradient g{GradientId{0}, "x", PromptId{42}, 0, Polarity::positive};
    EXPECT_THROW(apply_gradient(new_seed_prompt("Seed"), g, sample_of(1), "(none)", ctx), Error);
}

TEST(Paraphrase, ChildrenCarryNoGradient) {
    Harness h;
    h.backend->enqueue(RoleTag::paraphrase, "<START>Say it differently.<END>");
    h.backend->enqueue(RoleTag::paraphrase, "<START>Another way.<END>");
    auto ctx = h.ctx();
    const auto children = paraphrase_expand(new_seed_prompt("Seed"), 2, ctx);
    ASSERT_EQ(children.size(), 2u);
    EXPECT_FALSE(children[0].gradient_id);
    EXPECT_EQ(children[0].round, 1);
    EXPECT_NE(h.gateway->transcript().entries[0].request.rendered_prompt.find("Input: Seed\n"), std::string::npos);
    EXPECT_TRUE(paraphrase_expand(new_seed_prompt("Seed"), 0, ctx).empty());
}
