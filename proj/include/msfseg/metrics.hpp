#pragma once

#include <map>
#include <utility>
#include <vector>

#include "msfseg/grid.hpp"

namespace msfseg {

struct ScoreReport {
    double arand = 0.0;
    double voi_split = 0.0;
    double voi_merge = 0.0;
    long long scored_nodes = 0;
};

/// Joint label counts n(pred, gt) over masked-in nodes; shared kernel for
/// both metrics.
struct Contingency {
    std::map<std::pair<Label, Label>, long long> cells;
    std::map<Label, long long> pred_sums;
    std::map<Label, long long> gt_sums;
    long long total = 0;
};

Contingency contingency(const Segmentation& pred, const Segmentation& gt,
                        const std::vector<bool>& include);

/// Include-mask for scoring: with tolerance > 0, nodes within Euclidean
/// distance <= tolerance of the ground-truth boundary are excluded entirely;
/// tolerance 0 scores every node.
std::vector<bool> tolerance_mask(const Segmentation& gt, double tolerance);

/// Rand error 1 - V^Rand: the fraction of scored node pairs on which the
/// two segmentations disagree about same-region membership. The adapted
/// flag switches to one minus the pair-counting F-score instead.
double arand(const Segmentation& pred, const Segmentation& gt, double tolerance,
             bool adapted = false);

/// Conditional entropies (H(pred|gt), H(gt|pred)) in nats over the masked
/// contingency table; the first summand penalizes splits, the second merges.
std::pair<double, double> voi(const Segmentation& pred, const Segmentation& gt,
                              double tolerance);

ScoreReport score(const Segmentation& pred, const Segmentation& gt, double tolerance);

}  // namespace msfseg
