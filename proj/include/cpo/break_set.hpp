#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cpo {

// Change-point positions for one asset. Index tau means the new regime starts
// at 0-based observation tau, i.e. x[0..tau) precede the break.
class BreakSet {
public:
    BreakSet() = default;
    // Throws DataError unless indices are strictly increasing and non-negative.
    BreakSet(std::string asset_id, std::vector<std::int64_t> indices);

    const std::string& asset_id() const { return asset_id_; }
    const std::vector<std::int64_t>& indices() const { return indices_; }
    std::size_t size() const { return indices_.size(); }
    bool empty() const { return indices_.empty(); }

    // Break locations as reals, the form the distance kernels consume.
    std::vector<double> points() const;

    friend bool operator==(const BreakSet&, const BreakSet&) = default;

private:
    std::string asset_id_;
    std::vector<std::int64_t> indices_;
};

}  // namespace cpo
