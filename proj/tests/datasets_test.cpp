#include <gtest/gtest.h>

#include <set>

#include "mapo/datasets.hpp"
#include "test_support.hpp"

using namespace mapo;
using mapo::testing::TempDir;
using mapo::testing::write_file;

namespace {

std::vector<Example> numbered(int n) {
    std::vector<Example> out;
    for (int i = 0; i < n; ++i) out.push_back({i, "input " + std::to_string(i), i % 3 == 0 ? "Yes" : "No"});
    return out;
}

std::set<int> ids(const std::vector<Example>& xs) {
    std::set<int> out;
    for (const auto& x : xs) out.insert(x.id);
    return out;
}

}  // namespace

TEST(LoadExamples, Tsv) {
    TempDir dir;
    write_file(dir / "d.tsv", "The sky is green.\tNo\nWater\twet?\tYes\r\n\nFire is hot.\tYes\n");
    const auto xs = load_examples(dir / "d.tsv", DataFormat::tsv);
    ASSERT_EQ(xs.size(), 3u);
    EXPECT_EQ(xs[0].input_text, "The sky is green.");
    EXPECT_EQ(xs[0].label, "No");
    EXPECT_EQ(xs[1].input_text, "Water\twet?");
    EXPECT_EQ(xs[1].label, "Yes");
    EXPECT_EQ(xs[2].id, 2);
    EXPECT_EQ(distinct_labels(xs), (std::vector<std::string>{"No", "Yes"}));
}

TEST(LoadExamples, Jsonl) {
    TempDir dir;
    write_file(dir / "d.jsonl",
               "{\"text\":\"a\",\"label\":\"Yes\"}\n{\"question\":\"2+2?\",\"answer\":4}\n");
    const auto xs = load_examples(dir / "d.jsonl", DataFormat::jsonl);
    ASSERT_EQ(xs.size(), 2u);
    EXPECT_EQ(xs[1].input_text, "2+2?");
    EXPECT_EQ(xs[1].label, "4");
}

TEST(LoadExamples, MalformedInputsNameTheLine) {
    TempDir dir;
    write_file(dir / "bad.tsv", "ok\tYes\nno tab here\n");
    try {
        load_examples(dir / "bad.tsv", DataFormat::tsv);
        FAIL();
    } catch (const DatasetError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
    write_file(dir / "bad.jsonl", "{\"text\":\"a\"}\n");
    EXPECT_THROW(load_examples(dir / "bad.jsonl", DataFormat::jsonl), DatasetError);
    write_file(dir / "empty.tsv", "\n\n");
    EXPECT_THROW(load_examples(dir / "empty.tsv", DataFormat::tsv), DatasetError);
    EXPECT_THROW(load_examples(dir / "missing.tsv", DataFormat::tsv), DatasetError);
}

TEST(MakeSplit, SizesAndDisjointness) {
    const auto split = make_split(numbered(1000), 200, 1);
    EXPECT_EQ(split.test.size(), 200u);
    EXPECT_EQ(split.train.size(), 800u);
    const auto train = ids(split.train);
    const auto test = ids(split.test);
    for (const int id : test) EXPECT_FALSE(train.count(id));
    EXPECT_EQ(train.size() + test.size(), 1000u);
    EXPECT_EQ(split.positive_label, "Yes");
}

TEST(MakeSplit, MinimalAndTooSmall) {
    const auto split = make_split(numbered(201), 200, 1);
    EXPECT_EQ(split.train.size(), 1u);
    try {
        make_split(numbered(100), 200, 1);
        FAIL();
    } catch (const DatasetError& e) {
        EXPECT_NE(std::string(e.what()).find("dataset-too-small"), std::string::npos);
    }
    EXPECT_THROW(make_split(numbered(200), 200, 1), DatasetError);
}

TEST(MakeSplit, DeterministicPerSeed) {
    EXPECT_EQ(make_split(numbered(300), 50, 4).test, make_split(numbered(300), 50, 4).test);
    EXPECT_NE(make_split(numbered(300), 50, 4).test, make_split(numbered(300), 50, 5).test);
}

TEST(LoadSplit, AppliesLabelConfiguration) {
    TempDir dir;
    mapo::testing::write_dataset_tsv(dir / "d.tsv", numbered(50));
    DatasetDescriptor desc{.path = (dir / "d.tsv").string(), .positive_label = "No", .labels = {"Yes", "No", "Maybe"}};
    const auto split = load_split(desc, 10, 3);
    EXPECT_EQ(split.positive_label, "No");
    EXPECT_EQ(split.label_set.size(), 3u);
}

TEST(Minibatch, SizeDistinctnessAndDeterminism) {
    const auto split = make_split(numbered(1000), 200, 1);
    const auto a = sample_minibatch(split, 64, 9, 0);
    EXPECT_EQ(a.size(), 64u);
    EXPECT_EQ(ids(a).size(), 64u);
    const auto train = ids(split.train);
    for (const auto& x : a) EXPECT_TRUE(train.count(x.id));
    EXPECT_EQ(a, sample_minibatch(split, 64, 9, 0));
    EXPECT_NE(a, sample_minibatch(split, 64, 9, 1));
}

TEST(Minibatch, WithReplacementWhenTrainIsSmall) {
    const auto split = make_split(numbered(210), 200, 1);
    const auto mb = sample_minibatch(split, 64, 2, 0);
    EXPECT_EQ(mb.size(), 64u);
    EXPECT_LE(ids(mb).size(), 10u);
}

TEST(CorrectnessSample, PicksMatchingExamples) {
    const auto mb = numbered(20);
    std::vector<bool> correct(20);
    for (int i = 0; i < 20; ++i) correct[i] = i % 2 == 0;
    const auto s = sample_by_correctness(mb, correct, 3, Correctness::correct, 1, 0);
    ASSERT_EQ(s.examples.size(), 3u);
    EXPECT_FALSE(s.shortfall);
    for (const auto& x : s.examples) EXPECT_EQ(x.id % 2, 0);
    EXPECT_EQ(ids(s.examples).size(), 3u);

    const auto wrong = sample_by_correctness(mb, correct, 3, Correctness::incorrect, 1, 0);
    for (const auto& x : wrong.examples) EXPECT_EQ(x.id % 2, 1);
    EXPECT_EQ(s.examples, sample_by_correctness(mb, correct, 3, Correctness::correct, 1, 0).examples);
}

TEST(CorrectnessSample, ShortfallCases) {
    const auto mb = numbered(5);
    const std::vector<bool> one_correct{false, true, false, false, false};
    const auto s = sample_by_correctness(mb, one_correct, 3, Correctness::correct, 1, 0);
    EXPECT_TRUE(s.shortfall);
    ASSERT_EQ(s.examples.size(), 1u);
    EXPECT_EQ(s.examples[0].id, 1);

    const auto none = sample_by_correctness(mb, std::vector<bool>(5, false), 3, Correctness::correct, 1, 0);
    EXPECT_TRUE(none.shortfall);
    EXPECT_TRUE(none.examples.empty());

    const auto exact = sample_by_correctness(mb, std::vector<bool>{true, true, true, false, false}, 3,
                                             Correctness::correct, 1, 0);
    EXPECT_FALSE(exact.shortfall);
    EXPECT_EQ(exact.examples.size(), 3u);

    EXPECT_THROW(sample_by_correctness(mb, std::vector<bool>(4, true), 3, Correctness::correct, 1, 0), Error);
}
