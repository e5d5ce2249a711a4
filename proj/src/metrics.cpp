#include "msfseg/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "msfseg/synthdata.hpp"

namespace msfseg {

namespace {

void check_pair(const Segmentation& pred, const Segmentation& gt) {
    if (!(pred.graph == gt.graph))
        throw std::invalid_argument("metrics: segmentations are over different graphs");
    if (!pred.complete() || !gt.complete())
        throw std::invalid_argument("metrics: segmentations must be complete");
}

double pairs_of(long long n) { return 0.5 * static_cast<double>(n) * (n - 1); }

}  // namespace

Contingency contingency(const Segmentation& pred, const Segmentation& gt,
                        const std::vector<bool>& include) {
    if (include.size() != pred.labels.size())
        throw std::invalid_argument("contingency: mask length != |V|");
    Contingency table;
    for (std::size_t n = 0; n < pred.labels.size(); ++n) {
        if (!include[n]) continue;
        ++table.cells[{pred.labels[n], gt.labels[n]}];
        ++table.pred_sums[pred.labels[n]];
        ++table.gt_sums[gt.labels[n]];
        ++table.total;
    }
    return table;
}

std::vector<bool> tolerance_mask(const Segmentation& gt, double tolerance) {
    if (tolerance < 0.0) throw std::invalid_argument("tolerance must be >= 0");
    std::vector<bool> include(gt.labels.size(), true);
    if (tolerance == 0.0) return include;
    const std::vector<bool> boundary = boundary_mask(gt);
    bool any = false;
    for (bool b : boundary) any = any || b;
    if (!any) return include;  // single region: nothing to exclude
    const std::vector<double> dist = distance_transform(gt.graph, boundary);
    for (std::size_t n = 0; n < include.size(); ++n) include[n] = dist[n] > tolerance;
    return include;
}

double arand(const Segmentation& pred, const Segmentation& gt, double tolerance, bool adapted) {
    check_pair(pred, gt);
    const Contingency t = contingency(pred, gt, tolerance_mask(gt, tolerance));
    if (t.total < 2) throw std::invalid_argument("arand: fewer than 2 scored nodes");

    double same_both = 0.0;
    for (const auto& [cell, n] : t.cells) same_both += pairs_of(n);
    double same_pred = 0.0;
    for (const auto& [l, n] : t.pred_sums) same_pred += pairs_of(n);
    double same_gt = 0.0;
    for (const auto& [l, n] : t.gt_sums) same_gt += pairs_of(n);
    const double total_pairs = pairs_of(t.total);

    if (adapted) {
        // Pair-counting F-score over same-region pairs.
        if (same_pred == 0.0 && same_gt == 0.0) return 0.0;
        if (same_both == 0.0) return 1.0;
        const double precision = same_both / same_pred;
        const double recall = same_both / same_gt;
        return 1.0 - 2.0 * precision * recall / (precision + recall);
    }

    const double diff_both = total_pairs - same_pred - same_gt + same_both;
    const double agree = same_both + diff_both;
    return 1.0 - agree / total_pairs;
}

std::pair<double, double> voi(const Segmentation& pred, const Segmentation& gt,
                              double tolerance) {
    check_pair(pred, gt);
    const Contingency t = contingency(pred, gt, tolerance_mask(gt, tolerance));
    if (t.total < 2) throw std::invalid_argument("voi: fewer than 2 scored nodes");

    const double total = static_cast<double>(t.total);
    double split = 0.0;  // H(pred | gt)
    double merge = 0.0;  // H(gt | pred)
    for (const auto& [cell, n] : t.cells) {
        const double p = n / total;
        const double p_gt = t.gt_sums.at(cell.second) / total;
        const double p_pred = t.pred_sums.at(cell.first) / total;
        split -= p * std::log(p / p_gt);
        merge -= p * std::log(p / p_pred);
    }
    // Clamp the tiny negative residue of p == p_marginal cancellations.
    return {split < 0.0 ? 0.0 : split, merge < 0.0 ? 0.0 : merge};
}

ScoreReport score(const Segmentation& pred, const Segmentation& gt, double tolerance) {
    check_pair(pred, gt);
    const std::vector<bool> include = tolerance_mask(gt, tolerance);
    long long scored = 0;
    for (bool b : include) scored += b ? 1 : 0;
    ScoreReport r;
    r.scored_nodes = scored;
    r.arand = arand(pred, gt, tolerance);
    const auto [s, m] = voi(pred, gt, tolerance);
    r.voi_split = s;
    r.voi_merge = m;
    return r;
}

}  // namespace msfseg
