#include "cpo/setdist.hpp"

#include "cpo/csv.hpp"
#include "cpo/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <limits>
#include <cmath>
#include <stdexcept>

namespace cpo::setdist {

namespace {

std::vector<double> as_set(std::span<const double> x) {
    if (x.empty()) throw DataError("empty break set");
    std::vector<double> out(x.begin(), x.end());
    for (double v : out) {
        if (!std::isfinite(v)) throw DataError("break set contains a non-finite point");
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// Distance from x to the nearest element of a sorted, non-empty set.
double nearest(double x, const std::vector<double>& sorted) {
    const auto it = std::lower_bound(sorted.begin(), sorted.end(), x);
    double best = std::numeric_limits<double>::infinity();
    if (it != sorted.end()) best = *it - x;
    if (it != sorted.begin()) best = std::min(best, x - *std::prev(it));
    return best;
}

double power(double base, double exponent) {
    return exponent == 1.0 ? base : std::pow(base, exponent);
}

}  // namespace

void DistanceMeasure::validate() const {
    switch (kind) {
    case MeasureKind::MJ:
        if (!(order > 0.0) || !std::isfinite(order)) throw std::invalid_argument("MJ order p must be > 0");
        break;
    case MeasureKind::Wasserstein:
        if (!(order >= 1.0) || !std::isfinite(order)) throw std::invalid_argument("Wasserstein order q must be >= 1");
        break;
    case MeasureKind::Hausdorff:
        break;
    }
}

std::string DistanceMeasure::name() const {
    switch (kind) {
    case MeasureKind::MJ:
        return fmt::format("mj(p={})", order);
    case MeasureKind::Wasserstein:
        return fmt::format("wasserstein(q={})", order);
    case MeasureKind::Hausdorff:
        break;
    }
    return "hausdorff";
}

double mj_distance(std::span<const double> s, std::span<const double> t, double p) {
    DistanceMeasure::mj(p).validate();
    const auto a = as_set(s);
    const auto b = as_set(t);
    double sum_t = 0.0;
    for (double x : b) sum_t += power(nearest(x, a), p);
    double sum_s = 0.0;
    for (double x : a) sum_s += power(nearest(x, b), p);
    const double inner = sum_t / (2.0 * static_cast<double>(b.size())) + sum_s / (2.0 * static_cast<double>(a.size()));
    return power(inner, 1.0 / p);
}

double hausdorff_distance(std::span<const double> s, std::span<const double> t) {
    const auto a = as_set(s);
    const auto b = as_set(t);
    double worst = 0.0;
    for (double x : a) worst = std::max(worst, nearest(x, b));
    for (double x : b) worst = std::max(worst, nearest(x, a));
    return worst;
}

double wasserstein_distance(std::span<const double> s, std::span<const double> t, double q) {
    DistanceMeasure::wasserstein(q).validate();
    const auto a = as_set(s);
    const auto b = as_set(t);
    // Quantile functions are constant on ((i-1)/|S|, i/|S|] and ((j-1)/|T|, j/|T|];
    // measure [0,1] in units of 1/(|S||T|) so every breakpoint is an integer.
    const std::uint64_t na = a.size();
    const std::uint64_t nb = b.size();
    const std::uint64_t total = na * nb;
    std::uint64_t pos = 0;
    std::size_t i = 0;
    std::size_t j = 0;
    double integral = 0.0;
    while (pos < total) {
        const std::uint64_t end_a = (i + 1) * nb;
        const std::uint64_t end_b = (j + 1) * na;
        const std::uint64_t next = std::min(end_a, end_b);
        integral += static_cast<double>(next - pos) * power(std::abs(a[i] - b[j]), q);
        pos = next;
        if (next == end_a) ++i;
        if (next == end_b) ++j;
    }
    return power(integral / static_cast<double>(total), 1.0 / q);
}

double distance(const DistanceMeasure& measure, std::span<const double> s, std::span<const double> t) {
    switch (measure.kind) {
    case MeasureKind::MJ:
        return mj_distance(s, t, measure.order);
    case MeasureKind::Wasserstein:
        return wasserstein_distance(s, t, measure.order);
    case MeasureKind::Hausdorff:
        break;
    }
    return hausdorff_distance(s, t);
}

double distance(const DistanceMeasure& measure, const BreakSet& s, const BreakSet& t) {
    if (s.empty()) throw DataError(fmt::format("empty break set for asset {}", s.asset_id()));
    if (t.empty()) throw DataError(fmt::format("empty break set for asset {}", t.asset_id()));
    return distance(measure, s.points(), t.points());
}

LabeledMatrix::LabeledMatrix(std::vector<std::string> ids, std::vector<double> entries)
    : ids_(std::move(ids)), entries_(std::move(entries)) {
    if (entries_.size() != ids_.size() * ids_.size()) {
        throw DataError(fmt::format("matrix with {} labels needs {} entries, got {}", ids_.size(),
                                    ids_.size() * ids_.size(), entries_.size()));
    }
}

double LabeledMatrix::max() const {
    return entries_.empty() ? 0.0 : *std::max_element(entries_.begin(), entries_.end());
}

namespace {

void check_symmetric(const LabeledMatrix& m, const char* what) {
    for (std::size_t i = 0; i < m.size(); ++i) {
        for (std::size_t j = 0; j < m.size(); ++j) {
            if (!std::isfinite(m(i, j))) throw DataError(fmt::format("{} has a non-finite entry", what));
            if (m(i, j) != m(j, i)) throw DataError(fmt::format("{} is not symmetric at ({}, {})", what, i, j));
        }
    }
}

}  // namespace

DistanceMatrix DistanceMatrix::checked(LabeledMatrix m) {
    check_symmetric(m, "distance matrix");
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (m(i, i) != 0.0) throw DataError("distance matrix diagonal must be zero");
        for (std::size_t j = 0; j < m.size(); ++j) {
            if (m(i, j) < 0.0) throw DataError("distance matrix has a negative entry");
        }
    }
    return DistanceMatrix(m.ids(), m.entries());
}

AffinityMatrix AffinityMatrix::checked(LabeledMatrix m) {
    check_symmetric(m, "affinity matrix");
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (m(i, i) != 1.0) throw DataError("affinity matrix diagonal must be one");
        for (std::size_t j = 0; j < m.size(); ++j) {
            if (m(i, j) < 0.0 || m(i, j) > 1.0) throw DataError("affinity entries must lie in [0, 1]");
        }
    }
    return AffinityMatrix(m.ids(), m.entries());
}

DistanceMatrix distance_matrix(std::span<const BreakSet> breaks, const DistanceMeasure& measure) {
    measure.validate();
    if (breaks.size() < 2) throw DataError("distance matrix needs at least two break sets");
    for (const auto& b : breaks) {
        if (b.empty()) throw DataError(fmt::format("empty break set for asset {}", b.asset_id()));
    }
    const std::size_t n = breaks.size();
    std::vector<std::vector<double>> points;
    points.reserve(n);
    std::vector<std::string> ids;
    for (const auto& b : breaks) {
        points.push_back(b.points());
        ids.push_back(b.asset_id());
    }
    std::vector<double> entries(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = distance(measure, points[i], points[j]);
            entries[i * n + j] = d;
            entries[j * n + i] = d;
        }
    }
    return DistanceMatrix(std::move(ids), std::move(entries));
}

AffinityMatrix affinity_matrix(const DistanceMatrix& d) {
    const double top = d.max();
    std::vector<double> entries(d.entries().size(), 1.0);
    if (top > 0.0) {
        for (std::size_t k = 0; k < entries.size(); ++k) entries[k] = 1.0 - d.entries()[k] / top;
    }
    return AffinityMatrix(d.ids(), std::move(entries));
}

std::string matrix_csv(const LabeledMatrix& m) {
    std::string out = "asset_id";
    for (const auto& id : m.ids()) out += "," + csv::escape(id);
    out += "\n";
    for (std::size_t i = 0; i < m.size(); ++i) {
        out += csv::escape(m.ids()[i]);
        for (std::size_t j = 0; j < m.size(); ++j) out += "," + csv::format_double(m(i, j));
        out += "\n";
    }
    return out;
}

LabeledMatrix read_matrix_csv(const std::filesystem::path& path) {
    const auto table = csv::read(path);
    if (table.header.size() < 2) throw DataError(fmt::format("{}: not a labelled square matrix", path.string()));
    std::vector<std::string> ids(table.header.begin() + 1, table.header.end());
    if (table.rows.size() != ids.size()) {
        throw DataError(fmt::format("{}: {} columns but {} rows", path.string(), ids.size(), table.rows.size()));
    }
    std::vector<double> entries;
    entries.reserve(ids.size() * ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto& row = table.rows[i];
        if (row.size() != ids.size() + 1 || row[0] != ids[i]) {
            throw DataError(fmt::format("{}: row {} does not match the header", path.string(), i + 1));
        }
        for (std::size_t j = 1; j < row.size(); ++j) {
            double v = 0.0;
            const auto& text = row[j];
            auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
            if (ec != std::errc() || ptr != text.data() + text.size()) {
                throw DataError(fmt::format("{}: bad number '{}'", path.string(), text));
            }
            entries.push_back(v);
        }
    }
    return LabeledMatrix(std::move(ids), std::move(entries));
}

}  // namespace cpo::setdist
