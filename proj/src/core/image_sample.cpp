#include "puseg/core/image_sample.hpp"

#include <map>
#include <numeric>
#include <set>

#include "puseg/errors.hpp"

namespace puseg {

std::string_view to_string(Role role) {
    switch (role) {
        case Role::labeled: return "labeled";
        case Role::unlabeled: return "unlabeled";
        case Role::test: return "test";
    }
    return "unknown";
}

void validate(const ImageSample& sample) {
    for (double v : sample.pixels.values()) {
        if (!(v >= 0.0 && v <= 1.0))
            throw ShapeError("sample '" + sample.id + "': pixel value outside [0,1]");
    }
    if (sample.mask) {
        if (sample.mask->shape() != sample.pixels.shape())
            throw ShapeError("sample '" + sample.id + "': mask shape differs from image shape");
        for (auto v : sample.mask->values()) {
            if (v > 1) throw ShapeError("sample '" + sample.id + "': mask value not in {0,1}");
        }
    }
    if (sample.centerline) {
        for (const auto& p : *sample.centerline) {
            if (!sample.pixels.shape().contains(p.row, p.col))
                throw ShapeError("sample '" + sample.id + "': centerline point out of bounds");
        }
    }
    if (sample.role == Role::labeled && !sample.mask && !sample.centerline)
        throw MissingAnnotation("labeled sample '" + sample.id + "' has neither mask nor centerline");
}

void validate(const DatasetSplit& split) {
    if (split.labeled.empty()) throw SplitError("split has no labeled samples");
    std::set<std::string> seen;
    for (const auto* list : {&split.labeled, &split.unlabeled, &split.test}) {
        for (const auto& s : *list) {
            if (!seen.insert(s.id).second) throw SplitError("sample id '" + s.id + "' appears twice in split");
        }
    }
}

std::vector<std::vector<PixelIndex>> centerline_branches(const std::vector<PixelIndex>& centerline) {
    const std::size_t n = centerline.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };

    std::map<PixelIndex, std::size_t> where;
    for (std::size_t i = 0; i < n; ++i) where.emplace(centerline[i], i);
    for (std::size_t i = 0; i < n; ++i) {
        for (int dr = -1; dr <= 1; ++dr) {
            for (int dc = -1; dc <= 1; ++dc) {
                auto it = where.find({centerline[i].row + dr, centerline[i].col + dc});
                if (it != where.end()) parent[find(i)] = find(it->second);
            }
        }
    }

    std::map<std::size_t, std::size_t> slot;
    std::vector<std::vector<PixelIndex>> branches;
    std::set<PixelIndex> emitted;
    for (std::size_t i = 0; i < n; ++i) {
        if (!emitted.insert(centerline[i]).second) continue;
        auto [it, fresh] = slot.emplace(find(i), branches.size());
        if (fresh) branches.emplace_back();
        branches[it->second].push_back(centerline[i]);
    }
    return branches;
}

}  // namespace puseg
