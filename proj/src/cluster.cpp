#include "cpo/cluster.hpp"

#include "cpo/csv.hpp"
#include "cpo/errors.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace cpo::cluster {

std::string to_string(Linkage linkage) {
    switch (linkage) {
    case Linkage::Single:
        return "single";
    case Linkage::Complete:
        return "complete";
    case Linkage::Average:
        break;
    }
    return "average";
}

Linkage parse_linkage(const std::string& name) {
    if (name == "average") return Linkage::Average;
    if (name == "single") return Linkage::Single;
    if (name == "complete") return Linkage::Complete;
    throw std::invalid_argument(fmt::format("unknown linkage '{}' (average, single, complete)", name));
}

Dendrogram hclust(const setdist::DistanceMatrix& d, Linkage linkage) {
    const std::size_t n = d.size();
    if (n < 2) throw DataError("hierarchical clustering needs at least two assets");

    struct Active {
        std::size_t id;
        std::size_t size;
    };
    // Slots stay ordered by smallest leaf: a merge keeps the lower slot.
    std::vector<Active> active;
    for (std::size_t i = 0; i < n; ++i) active.push_back({i, 1});
    std::vector<std::vector<double>> dist(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) dist[i][j] = d(i, j);
    }

    Dendrogram tree;
    tree.labels = d.ids();
    tree.linkage = linkage;
    for (std::size_t step = 0; step + 1 < n; ++step) {
        std::size_t bi = 0;
        std::size_t bj = 1;
        for (std::size_t i = 0; i < active.size(); ++i) {
            for (std::size_t j = i + 1; j < active.size(); ++j) {
                if (dist[i][j] < dist[bi][bj]) {
                    bi = i;
                    bj = j;
                }
            }
        }
        const double height = dist[bi][bj];
        const auto ni = static_cast<double>(active[bi].size);
        const auto nj = static_cast<double>(active[bj].size);
        for (std::size_t k = 0; k < active.size(); ++k) {
            if (k == bi || k == bj) continue;
            double v = 0.0;
            switch (linkage) {
            case Linkage::Average:
                v = (ni * dist[k][bi] + nj * dist[k][bj]) / (ni + nj);
                break;
            case Linkage::Single:
                v = std::min(dist[k][bi], dist[k][bj]);
                break;
            case Linkage::Complete:
                v = std::max(dist[k][bi], dist[k][bj]);
                break;
            }
            dist[k][bi] = v;
            dist[bi][k] = v;
        }
        tree.merges.push_back({active[bi].id, active[bj].id, height, active[bi].size + active[bj].size});
        active[bi] = {n + step, active[bi].size + active[bj].size};
        active.erase(active.begin() + static_cast<std::ptrdiff_t>(bj));
        dist.erase(dist.begin() + static_cast<std::ptrdiff_t>(bj));
        for (auto& row : dist) row.erase(row.begin() + static_cast<std::ptrdiff_t>(bj));
    }
    return tree;
}

std::vector<std::vector<std::string>> cut(const Dendrogram& tree, std::size_t k) {
    const std::size_t n = tree.labels.size();
    if (k < 1 || k > n) throw std::invalid_argument(fmt::format("cluster count k must lie in [1, {}]", n));
    // Union-find over leaves; cluster id -> a representative leaf.
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    std::vector<std::size_t> leaf_of(2 * n - 1);
    std::iota(leaf_of.begin(), leaf_of.begin() + static_cast<std::ptrdiff_t>(n), 0);
    for (std::size_t s = 0; s < tree.merges.size(); ++s) {
        const auto& m = tree.merges[s];
        leaf_of[n + s] = leaf_of[m.a];
        if (s < n - k) parent[find(leaf_of[m.b])] = find(leaf_of[m.a]);
    }
    std::vector<std::vector<std::string>> groups;
    std::vector<std::size_t> group_of_root(n, n);
    for (std::size_t leaf = 0; leaf < n; ++leaf) {
        const auto root = find(leaf);
        if (group_of_root[root] == n) {
            group_of_root[root] = groups.size();
            groups.emplace_back();
        }
        groups[group_of_root[root]].push_back(tree.labels[leaf]);
    }
    return groups;
}

namespace {

std::string newick_label(const std::string& label) {
    if (label.find_first_of(" ()[]':;,\t") == std::string::npos && !label.empty()) return label;
    std::string out = "'";
    for (char c : label) {
        if (c == '\'') out += '\'';
        out += c;
    }
    return out + "'";
}

}  // namespace

std::string newick(const Dendrogram& tree) {
    const std::size_t n = tree.labels.size();
    auto height_of = [&](std::size_t id) { return id < n ? 0.0 : tree.merges[id - n].height; };
    auto render = [&](auto& self, std::size_t id) -> std::string {
        if (id < n) return newick_label(tree.labels[id]);
        const auto& m = tree.merges[id - n];
        return fmt::format("({}:{},{}:{})", self(self, m.a), csv::format_double(m.height - height_of(m.a)),
                           self(self, m.b), csv::format_double(m.height - height_of(m.b)));
    };
    return render(render, n + tree.merges.size() - 1) + ";\n";
}

std::string dendrogram_json(const Dendrogram& tree) {
    nlohmann::ordered_json j;
    j["linkage"] = to_string(tree.linkage);
    j["labels"] = tree.labels;
    auto merges = nlohmann::ordered_json::array();
    for (const auto& m : tree.merges) {
        nlohmann::ordered_json row;
        row["a"] = m.a;
        row["b"] = m.b;
        row["height"] = m.height;
        row["size"] = m.size;
        merges.push_back(row);
    }
    j["merges"] = merges;
    return j.dump(2) + "\n";
}

std::string partition_csv(const std::vector<std::vector<std::string>>& groups) {
    std::string out = "asset_id,cluster\n";
    for (std::size_t g = 0; g < groups.size(); ++g) {
        for (const auto& id : groups[g]) out += fmt::format("{},{}\n", csv::escape(id), g + 1);
    }
    return out;
}

}  // namespace cpo::cluster
