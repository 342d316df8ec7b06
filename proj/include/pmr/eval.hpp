#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pmr/bmn.hpp"

namespace pmr {

inline std::vector<double> default_tiou_thresholds() {
    std::vector<double> t;
    for (int i = 0; i <= 9; ++i) t.push_back(0.50 + 0.05 * i);
    return t;
}

struct MetricReport {
    std::vector<double> ar_at;                        // index AN-1, AN in 1..an_max
    std::vector<std::vector<double>> recall_at;       // [threshold][AN-1]
    double auc_percent = 0.0;
    double div2 = 0.0;
    double r4 = 0.0;
};

// AR@AN and AUC. Recall is pooled over ground truth across all videos: a
// GT action counts as recalled at threshold theta if its best tIoU
// against the video's top-AN proposals is >= theta. AR(AN) averages the
// recall over the threshold grid; AUC is the trapezoidal integral of AR
// over AN in [1, an_max], normalized to percent.
inline MetricReport ar_at_an(const std::map<std::string, ProposalSet>& proposals_by_video,
                             const std::vector<VideoAnnotation>& annotations,
                             const std::vector<double>& thresholds = default_tiou_thresholds(),
                             std::size_t an_max = 100) {
    for (const auto& [vid, _] : proposals_by_video) {
        bool found = false;
        for (const auto& a : annotations) found = found || a.video_id == vid;
        if (!found) throw AnnotationError("ar_at_an: proposals for unknown video " + vid);
    }

    std::size_t total_gt = 0;
    for (const auto& a : annotations) total_gt += a.actions.size();
    check_shape(total_gt > 0, "ar_at_an: no ground truth actions");

    MetricReport report;
    report.recall_at.assign(thresholds.size(), std::vector<double>(an_max, 0.0));
    for (std::size_t an = 1; an <= an_max; ++an) {
        std::vector<std::size_t> recalled(thresholds.size(), 0);
        for (const auto& ann : annotations) {
            const auto it = proposals_by_video.find(ann.video_id);
            const std::size_t avail =
                it == proposals_by_video.end() ? 0 : std::min(an, it->second.proposals.size());
            for (const auto& [gs, ge] : ann.actions) {
                double best = 0.0;
                for (std::size_t p = 0; p < avail; ++p) {
                    const Proposal& pr = it->second.proposals[p];
                    best = std::max(best, tiou(pr.t_start_s, pr.t_end_s, gs, ge));
                }
                for (std::size_t k = 0; k < thresholds.size(); ++k)
                    if (best >= thresholds[k]) ++recalled[k];
            }
        }
        double ar = 0.0;
        for (std::size_t k = 0; k < thresholds.size(); ++k) {
            const double rec = static_cast<double>(recalled[k]) / static_cast<double>(total_gt);
            report.recall_at[k][an - 1] = rec;
            ar += rec;
        }
        report.ar_at.push_back(ar / static_cast<double>(thresholds.size()));
    }

    double area = 0.0;
    for (std::size_t an = 1; an < an_max; ++an)
        area += 0.5 * (report.ar_at[an - 1] + report.ar_at[an]);
    report.auc_percent = area / static_cast<double>(an_max - 1) * 100.0;
    return report;
}

namespace detail {

inline std::string fold(const std::string& s) {
    std::string out = s;
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

inline std::vector<std::string> concat_paragraph(const std::vector<std::vector<std::string>>& parts) {
    std::vector<std::string> tokens;
    for (const auto& seq : parts)
        for (const auto& tok : seq) tokens.push_back(fold(tok));
    return tokens;
}

inline std::vector<std::string> ngrams(const std::vector<std::string>& tokens, std::size_t n) {
    std::vector<std::string> grams;
    if (tokens.size() < n) return grams;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string g = tokens[i];
        for (std::size_t k = 1; k < n; ++k) g += " " + tokens[i + k];
        grams.push_back(std::move(g));
    }
    return grams;
}

}  // namespace detail

// Distinct n-grams / total n-grams per paragraph, averaged over
// paragraphs that contain at least one n-gram.
inline double diversity_div_n(const std::vector<std::vector<std::vector<std::string>>>& paragraphs,
                              std::size_t n = 2) {
    double sum = 0.0;
    std::size_t counted = 0;
    for (const auto& para : paragraphs) {
        const auto grams = detail::ngrams(detail::concat_paragraph(para), n);
        if (grams.empty()) continue;
        const std::set<std::string> distinct(grams.begin(), grams.end());
        sum += static_cast<double>(distinct.size()) / static_cast<double>(grams.size());
        ++counted;
    }
    check_shape(counted > 0, "diversity_div_n: no paragraph with an n-gram");
    return sum / static_cast<double>(counted);
}

// Fraction of n-gram positions whose n-gram already occurred earlier in
// the same paragraph, averaged over paragraphs.
inline double repetition_r_n(const std::vector<std::vector<std::vector<std::string>>>& paragraphs,
                             std::size_t n = 4) {
    double sum = 0.0;
    std::size_t counted = 0;
    for (const auto& para : paragraphs) {
        const auto grams = detail::ngrams(detail::concat_paragraph(para), n);
        if (grams.empty()) continue;
        std::set<std::string> seen;
        std::size_t repeats = 0;
        for (const auto& g : grams)
            if (!seen.insert(g).second) ++repeats;
        sum += static_cast<double>(repeats) / static_cast<double>(grams.size());
        ++counted;
    }
    check_shape(counted > 0, "repetition_r_n: no paragraph with an n-gram");
    return sum / static_cast<double>(counted);
}

// CSV curve ("an,ar", 6 decimals) plus a 4-line labeled summary.
inline void export_curve(const MetricReport& report, const std::string& csv_path,
                         const std::string& summary_path) {
    std::ofstream csv(csv_path, std::ios::trunc);
    if (!csv) throw IoError("cannot open for writing: " + csv_path);
    csv << "an,ar\n";
    char buf[64];
    for (std::size_t an = 1; an <= report.ar_at.size(); ++an) {
        std::snprintf(buf, sizeof buf, "%zu,%.6f\n", an, report.ar_at[an - 1]);
        csv << buf;
    }
    if (!csv) throw IoError("write failed: " + csv_path);

    std::ofstream sum(summary_path, std::ios::trunc);
    if (!sum) throw IoError("cannot open for writing: " + summary_path);
    std::snprintf(buf, sizeof buf, "AR@100=%.6f\n", report.ar_at.back());
    sum << buf;
    std::snprintf(buf, sizeof buf, "AUC=%.6f\n", report.auc_percent);
    sum << buf;
    std::snprintf(buf, sizeof buf, "Div@2=%.6f\n", report.div2);
    sum << buf;
    std::snprintf(buf, sizeof buf, "R@4=%.6f\n", report.r4);
    sum << buf;
    if (!sum) throw IoError("write failed: " + summary_path);
}

}  // namespace pmr
