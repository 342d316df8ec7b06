#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "pmr/eval.hpp"

using namespace pmr;

namespace {

using Paragraphs = std::vector<std::vector<std::vector<std::string>>>;

VideoAnnotation make_ann(const std::string& id, double duration,
                         std::vector<std::pair<double, double>> actions) {
    VideoAnnotation ann;
    ann.video_id = id;
    ann.duration_s = duration;
    ann.actions = std::move(actions);
    for (std::size_t i = 0; i < ann.actions.size(); ++i) ann.captions.push_back({"tok"});
    return ann;
}

Proposal prop(double s, double e, double score) {
    Proposal p;
    p.t_start_s = s;
    p.t_end_s = e;
    p.score = score;
    return p;
}

// Nested-loop oracle with no shortcuts: for every AN and threshold, walk
// videos x ground truths x top-AN proposals.
MetricReport oracle_ar(const std::map<std::string, ProposalSet>& by_video,
                       const std::vector<VideoAnnotation>& anns,
                       const std::vector<double>& thresholds, std::size_t an_max) {
    MetricReport r;
    std::size_t total = 0;
    for (const auto& a : anns) total += a.actions.size();
    for (std::size_t an = 1; an <= an_max; ++an) {
        double ar = 0.0;
        for (double th : thresholds) {
            std::size_t hit = 0;
            for (const auto& a : anns) {
                for (const auto& [gs, ge] : a.actions) {
                    bool recalled = false;
                    const auto it = by_video.find(a.video_id);
                    if (it != by_video.end()) {
                        for (std::size_t i = 0; i < std::min(an, it->second.proposals.size()); ++i) {
                            const Proposal& p = it->second.proposals[i];
                            if (tiou(p.t_start_s, p.t_end_s, gs, ge) >= th) recalled = true;
                        }
                    }
                    if (recalled) ++hit;
                }
            }
            ar += static_cast<double>(hit) / static_cast<double>(total);
        }
        r.ar_at.push_back(ar / static_cast<double>(thresholds.size()));
    }
    double area = 0.0;
    for (std::size_t an = 1; an < an_max; ++an) area += 0.5 * (r.ar_at[an - 1] + r.ar_at[an]);
    r.auc_percent = area / static_cast<double>(an_max - 1) * 100.0;
    return r;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST(ArAtAn, PerfectProposalsSaturate) {
    std::vector<VideoAnnotation> anns = {make_ann("a", 20, {{2, 8}}), make_ann("b", 30, {{5, 25}})};
    std::map<std::string, ProposalSet> by_video;
    by_video["a"].proposals = {prop(2, 8, 1.0)};
    by_video["b"].proposals = {prop(5, 25, 1.0)};
    const MetricReport r = ar_at_an(by_video, anns);
    for (double ar : r.ar_at) EXPECT_DOUBLE_EQ(ar, 1.0);
    EXPECT_DOUBLE_EQ(r.auc_percent, 100.0);
}

TEST(ArAtAn, HandThresholdCount) {
    // GT [0,10], proposal [0,7]: tIoU = 0.7, recalled at 0.50..0.70 -> 5/10
    std::vector<VideoAnnotation> anns = {make_ann("v", 12, {{0, 10}})};
    std::map<std::string, ProposalSet> by_video;
    by_video["v"].proposals = {prop(0, 7, 0.9)};
    const MetricReport r = ar_at_an(by_video, anns);
    for (double ar : r.ar_at) EXPECT_NEAR(ar, 0.5, 1e-12);
}

TEST(ArAtAn, MonotoneInAn) {
    Rng rng(1);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<VideoAnnotation> anns = {make_ann("v", 40, {{3, 11}, {15, 30}})};
        std::map<std::string, ProposalSet> by_video;
        std::vector<Proposal>& ps = by_video["v"].proposals;
        for (int i = 0; i < 15; ++i) {
            const double s = 35.0 * rng.uniform();
            ps.push_back(prop(s, s + 1.0 + 8.0 * rng.uniform(), 1.0 - 0.05 * i));
        }
        const MetricReport r = ar_at_an(by_video, anns, default_tiou_thresholds(), 20);
        for (std::size_t an = 1; an < r.ar_at.size(); ++an)
            EXPECT_GE(r.ar_at[an] + 1e-12, r.ar_at[an - 1]);
    }
}

TEST(ArAtAn, AddingProposalNeverHurts) {
    Rng rng(2);
    std::vector<VideoAnnotation> anns = {make_ann("v", 20, {{4, 9}})};
    std::map<std::string, ProposalSet> by_video;
    by_video["v"].proposals = {prop(3, 10, 0.9), prop(12, 15, 0.8)};
    const MetricReport before = ar_at_an(by_video, anns, default_tiou_thresholds(), 10);
    by_video["v"].proposals.push_back(prop(4.2, 8.8, 0.1));
    const MetricReport after = ar_at_an(by_video, anns, default_tiou_thresholds(), 10);
    for (std::size_t an = 0; an < before.ar_at.size(); ++an)
        EXPECT_GE(after.ar_at[an] + 1e-12, before.ar_at[an]);
}

TEST(ArAtAn, MatchesBruteForceOracle) {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<VideoAnnotation> anns;
        std::map<std::string, ProposalSet> by_video;
        const std::size_t n_videos = 1 + rng.index(5);
        for (std::size_t v = 0; v < n_videos; ++v) {
            const std::string id = "v" + std::to_string(v);
            const double duration = 15.0 + 25.0 * rng.uniform();
            std::vector<std::pair<double, double>> actions;
            const std::size_t n_gt = 1 + rng.index(4);
            for (std::size_t g = 0; g < n_gt; ++g) {
                const double s = 0.8 * duration * rng.uniform();
                actions.emplace_back(s, s + 1.0 + (duration - s - 1.0) * rng.uniform());
            }
            anns.push_back(make_ann(id, duration, std::move(actions)));
            std::vector<Proposal>& ps = by_video[id].proposals;
            const std::size_t n_props = rng.index(12);
            for (std::size_t p = 0; p < n_props; ++p) {
                const double s = 0.9 * duration * rng.uniform();
                ps.push_back(prop(s, s + 0.5 + 6.0 * rng.uniform(), 1.0 - 0.01 * static_cast<double>(p)));
            }
        }
        const std::size_t an_max = 1 + rng.index(15);
        const MetricReport got = ar_at_an(by_video, anns, default_tiou_thresholds(), an_max);
        const MetricReport want = oracle_ar(by_video, anns, default_tiou_thresholds(), an_max);
        ASSERT_EQ(got.ar_at.size(), want.ar_at.size());
        for (std::size_t i = 0; i < got.ar_at.size(); ++i)
            EXPECT_NEAR(got.ar_at[i], want.ar_at[i], 1e-12);
        if (an_max > 1) EXPECT_NEAR(got.auc_percent, want.auc_percent, 1e-10);
    }
}

TEST(ArAtAn, UnknownVideoThrows) {
    std::vector<VideoAnnotation> anns = {make_ann("a", 10, {{1, 5}})};
    std::map<std::string, ProposalSet> by_video;
    by_video["ghost"].proposals = {prop(0, 1, 0.5)};
    EXPECT_THROW(ar_at_an(by_video, anns), AnnotationError);
}

TEST(Diversity, HandBigramCase) {
    // a b a b -> bigrams (a b)(b a)(a b) -> 2 distinct of 3
    const Paragraphs p = {{{"a", "b", "a", "b"}}};
    EXPECT_NEAR(diversity_div_n(p, 2), 2.0 / 3.0, 1e-12);
}

TEST(Diversity, AllDistinctIsOne) {
    const Paragraphs p = {{{"a", "b"}, {"c", "d"}}};
    EXPECT_DOUBLE_EQ(diversity_div_n(p, 2), 1.0);
}

TEST(Diversity, RepeatedTokenClosedForm) {
    // one token repeated L times: 1 distinct bigram of L-1
    const Paragraphs p = {{std::vector<std::string>(10, "x")}};
    EXPECT_NEAR(diversity_div_n(p, 2), 1.0 / 9.0, 1e-12);
}

TEST(Diversity, CaseFoldedAndShortParagraphsExcluded) {
    const Paragraphs p = {{{"A", "b", "a", "B"}}, {{"solo"}}};
    EXPECT_NEAR(diversity_div_n(p, 2), 2.0 / 3.0, 1e-12);
    const Paragraphs empty = {{{"solo"}}};
    EXPECT_THROW(diversity_div_n(empty, 2), std::invalid_argument);
}

TEST(Repetition, HandFourGramCase) {
    // a b c d three times: 9 positions, 5 repeats
    const Paragraphs p = {{{"a", "b", "c", "d", "a", "b", "c", "d", "a", "b", "c", "d"}}};
    EXPECT_NEAR(repetition_r_n(p, 4), 5.0 / 9.0, 1e-12);
}

TEST(Repetition, AllIdenticalLengthEight) {
    const Paragraphs p = {{std::vector<std::string>(8, "x")}};
    EXPECT_NEAR(repetition_r_n(p, 4), 0.8, 1e-12);
}

TEST(Repetition, NoRepeatsIsZero) {
    const Paragraphs p = {{{"a", "b", "c", "d", "e", "f"}}};
    EXPECT_DOUBLE_EQ(repetition_r_n(p, 4), 0.0);
}

TEST(Repetition, DuplicateFreeStreamMatchesDiversity) {
    // no duplicate n-grams: Div@n = 1 and R@n = 0
    const Paragraphs p = {{{"q", "w", "e", "r", "t", "y", "u"}}};
    EXPECT_DOUBLE_EQ(diversity_div_n(p, 4), 1.0);
    EXPECT_DOUBLE_EQ(repetition_r_n(p, 4), 0.0);
}

TEST(ExportCurve, FormatContract) {
    MetricReport r;
    r.ar_at.assign(100, 1.0);
    r.auc_percent = 100.0;
    r.div2 = 0.5;
    r.r4 = 0.25;
    const std::string csv = testing::TempDir() + "curve.csv";
    const std::string sum = testing::TempDir() + "summary.txt";
    export_curve(r, csv, sum);

    std::ifstream in(csv);
    std::string line;
    ASSERT_TRUE(std::getline(in, line));
    EXPECT_EQ(line, "an,ar");
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        EXPECT_EQ(line, std::to_string(rows) + ",1.000000");
    }
    EXPECT_EQ(rows, 100u);

    const std::string summary = read_file(sum);
    EXPECT_EQ(summary, "AR@100=1.000000\nAUC=100.000000\nDiv@2=0.500000\nR@4=0.250000\n");
    std::remove(csv.c_str());
    std::remove(sum.c_str());
}

TEST(ExportCurve, CsvRoundTripsAtSixDecimals) {
    Rng rng(4);
    MetricReport r;
    for (int i = 0; i < 20; ++i) r.ar_at.push_back(rng.uniform());
    const std::string csv = testing::TempDir() + "rt.csv";
    const std::string sum = testing::TempDir() + "rt.txt";
    export_curve(r, csv, sum);
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);  // header
    std::size_t an = 0;
    while (std::getline(in, line)) {
        const auto comma = line.find(',');
        ASSERT_NE(comma, std::string::npos);
        EXPECT_EQ(std::stoul(line.substr(0, comma)), an + 1);
        EXPECT_NEAR(std::stod(line.substr(comma + 1)), r.ar_at[an], 5e-7);
        ++an;
    }
    EXPECT_EQ(an, r.ar_at.size());
    std::remove(csv.c_str());
    std::remove(sum.c_str());
}
