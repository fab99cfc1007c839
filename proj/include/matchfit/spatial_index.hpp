#pragma once

#include <matchfit/geom.hpp>

#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

namespace matchfit {

/// Uniform grid over bounding boxes; query returns candidate indices (superset).
class SpatialGrid {
public:
    explicit SpatialGrid(double cell_size = 50.0) : cell_(cell_size) {}

    void insert(size_t idx, const BoundingBox& b) {
        for_cells(b, [&](int64_t key) { cells_[key].push_back(idx); });
    }

    std::vector<size_t> query(const BoundingBox& b) const {
        std::vector<size_t> out;
        for_cells(b, [&](int64_t key) {
            auto it = cells_.find(key);
            if (it != cells_.end()) out.insert(out.end(), it->second.begin(), it->second.end());
        });
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

private:
    template <class Fn>
    void for_cells(const BoundingBox& b, Fn&& fn) const {
        const int64_t x0 = static_cast<int64_t>(std::floor(b.min_x / cell_));
        const int64_t x1 = static_cast<int64_t>(std::floor(b.max_x / cell_));
        const int64_t y0 = static_cast<int64_t>(std::floor(b.min_y / cell_));
        const int64_t y1 = static_cast<int64_t>(std::floor(b.max_y / cell_));
        for (int64_t ix = x0; ix <= x1; ++ix)
            for (int64_t iy = y0; iy <= y1; ++iy) fn((ix << 21) ^ (iy & ((1 << 21) - 1)));
    }

    double cell_;
    std::unordered_map<int64_t, std::vector<size_t>> cells_;
};

}  // namespace matchfit
