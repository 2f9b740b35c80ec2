#pragma once

#include "cpo/setdist.hpp"

#include <string>
#include <vector>

namespace cpo::cluster {

enum class Linkage { Average, Single, Complete };

std::string to_string(Linkage linkage);
// "average", "single" or "complete"; anything else throws std::invalid_argument.
Linkage parse_linkage(const std::string& name);

// Leaves are 0..n-1; the cluster formed by merge s gets id n + s.
struct Merge {
    std::size_t a = 0;
    std::size_t b = 0;
    double height = 0.0;
    std::size_t size = 0;
};

struct Dendrogram {
    std::vector<std::string> labels;
    std::vector<Merge> merges;  // exactly labels.size() - 1
    Linkage linkage = Linkage::Average;
};

// Naive agglomeration with Lance-Williams updates. The closest pair is
// found scanning clusters ordered by their smallest leaf; the first strict
// minimum wins, so ties go to the smallest (i, j). Needs n >= 2.
Dendrogram hclust(const setdist::DistanceMatrix& d, Linkage linkage = Linkage::Average);

// Groups after applying the first n - k merges, each listed in leaf order and
// the groups ordered by their first leaf. Needs 1 <= k <= n.
std::vector<std::vector<std::string>> cut(const Dendrogram& tree, std::size_t k);

// Ultrametric Newick: a node sits at its merge height, leaves at 0.
std::string newick(const Dendrogram& tree);
std::string dendrogram_json(const Dendrogram& tree);
// "asset_id,cluster", clusters numbered from 1 in cut() order.
std::string partition_csv(const std::vector<std::vector<std::string>>& groups);

}  // namespace cpo::cluster
