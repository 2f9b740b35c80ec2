#pragma once

#include "cpo/break_set.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace cpo::setdist {

enum class MeasureKind { MJ, Hausdorff, Wasserstein };

// Which set distance to use and its order: p > 0 for MJ, q >= 1 for
// Wasserstein, ignored for Hausdorff.
struct DistanceMeasure {
    MeasureKind kind = MeasureKind::MJ;
    double order = 0.5;

    static DistanceMeasure mj(double p = 0.5) { return {MeasureKind::MJ, p}; }
    static DistanceMeasure hausdorff() { return {MeasureKind::Hausdorff, 1.0}; }
    static DistanceMeasure wasserstein(double q = 1.0) { return {MeasureKind::Wasserstein, q}; }

    void validate() const;
    std::string name() const;  // e.g. "mj(p=0.5)"
};

// The kernels below treat their inputs as finite sets of reals: order and
// duplicates are irrelevant. Empty input throws DataError("empty break set").

// MJ_p semi-metric: (sum_t d(t,S)^p / 2|T| + sum_s d(s,T)^p / 2|S|)^(1/p).
double mj_distance(std::span<const double> s, std::span<const double> t, double p);

// max(sup_s d(s,T), sup_t d(t,S)).
double hausdorff_distance(std::span<const double> s, std::span<const double> t);

// W_q between the uniform empirical measures on S and T, through the quantile
// representation. Integrated exactly over the merged grid {i/|S|} u {j/|T|}.
double wasserstein_distance(std::span<const double> s, std::span<const double> t, double q);

double distance(const DistanceMeasure& measure, std::span<const double> s, std::span<const double> t);
double distance(const DistanceMeasure& measure, const BreakSet& s, const BreakSet& t);

// Square matrix labelled by asset ids, row-major.
class LabeledMatrix {
public:
    LabeledMatrix() = default;
    LabeledMatrix(std::vector<std::string> ids, std::vector<double> entries);

    std::size_t size() const { return ids_.size(); }
    const std::vector<std::string>& ids() const { return ids_; }
    const std::vector<double>& entries() const { return entries_; }
    double operator()(std::size_t i, std::size_t j) const { return entries_[i * ids_.size() + j]; }
    double max() const;

private:
    std::vector<std::string> ids_;
    std::vector<double> entries_;
};

// Symmetric, zero diagonal, non-negative.
class DistanceMatrix : public LabeledMatrix {
public:
    using LabeledMatrix::LabeledMatrix;
    // Checks the invariants; throws DataError.
    static DistanceMatrix checked(LabeledMatrix m);
};

// A = 1 - D / max(D): symmetric, unit diagonal, entries in [0, 1].
class AffinityMatrix : public LabeledMatrix {
public:
    using LabeledMatrix::LabeledMatrix;
    static AffinityMatrix checked(LabeledMatrix m);
};

// Pairwise distances, each pair computed once. Throws DataError naming the
// first asset with an empty break set, or when fewer than two sets are given.
DistanceMatrix distance_matrix(std::span<const BreakSet> breaks, const DistanceMeasure& measure);

// All-ones when max(D) = 0 (every break set identical).
AffinityMatrix affinity_matrix(const DistanceMatrix& d);

// Square CSV: header "asset_id,<id>...", one row per asset, 17 significant digits.
std::string matrix_csv(const LabeledMatrix& m);
LabeledMatrix read_matrix_csv(const std::filesystem::path& path);

}  // namespace cpo::setdist
