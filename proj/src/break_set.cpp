#include "cpo/break_set.hpp"

#include "cpo/errors.hpp"

#include <fmt/format.h>

namespace cpo {

BreakSet::BreakSet(std::string asset_id, std::vector<std::int64_t> indices)
    : asset_id_(std::move(asset_id)), indices_(std::move(indices)) {
    for (std::size_t i = 0; i < indices_.size(); ++i) {
        if (indices_[i] < 0) throw DataError(fmt::format("asset {}: negative break index", asset_id_));
        if (i > 0 && indices_[i] <= indices_[i - 1]) {
            throw DataError(fmt::format("asset {}: break indices must be strictly increasing", asset_id_));
        }
    }
}

std::vector<double> BreakSet::points() const {
    return {indices_.begin(), indices_.end()};
}

}  // namespace cpo
