#include "puseg/pseudo/pseudo_labels.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "puseg/errors.hpp"

namespace puseg {

void validate_thresholds(double th_p, double th_n) {
    if (!(th_p > 0.0 && th_p < 1.0) || !(th_n > 0.0 && th_n < 1.0))
        throw ConfigError("pseudo-label thresholds must lie in (0,1)");
    if (!(th_n < th_p)) throw ConfigError("th_n must be strictly below th_p");
}

PseudoLabelSet select_by_confidence(const ConfidenceMap& conf, double th_p, double th_n) {
    validate_thresholds(th_p, th_n);
    PseudoLabelSet out{conf.image_id, conf.values.shape(), {}, {}, {}};
    for (int r = 0; r < conf.values.rows(); ++r)
        for (int c = 0; c < conf.values.cols(); ++c) {
            const double v = conf.values(r, c);
            if (v > th_p) out.positives.push_back({r, c});
            else if (v < th_n) out.negatives.push_back({r, c});
        }
    return out;
}

std::vector<PixelIndex> unlabeled_indices(Shape shape, const PseudoLabelSet& labels) {
    Grid<std::uint8_t> taken(shape, 0);
    for (const auto* list : {&labels.positives, &labels.negatives}) {
        for (const auto& p : *list) {
            if (!shape.contains(p.row, p.col)) throw ShapeError("pseudo-label index out of bounds");
            taken[p] = 1;
        }
    }
    std::vector<PixelIndex> out;
    for (int r = 0; r < shape.rows; ++r)
        for (int c = 0; c < shape.cols; ++c)
            if (!taken(r, c)) out.push_back({r, c});
    return out;
}

void validate(const PseudoLabelSet& labels) {
    Grid<std::uint8_t> owner(labels.shape, 0);
    std::uint8_t tag = 0;
    for (const auto* list : {&labels.positives, &labels.negatives, &labels.pu_negatives}) {
        ++tag;
        for (const auto& p : *list) {
            if (!labels.shape.contains(p.row, p.col))
                throw ShapeError("pseudo-label index out of bounds in '" + labels.image_id + "'");
            if (owner[p] != 0 && owner[p] != tag)
                throw ShapeError("pseudo-label sets overlap in '" + labels.image_id + "'");
            owner[p] = tag;
        }
    }
}

Grid<std::int8_t> to_label_grid(const PseudoLabelSet& labels) {
    validate(labels);
    Grid<std::int8_t> g(labels.shape, -1);
    for (const auto& p : labels.positives) g[p] = 1;
    for (const auto& p : labels.negatives) g[p] = 0;
    for (const auto& p : labels.pu_negatives) g[p] = 0;
    return g;
}

void save_pseudo_labels(const std::filesystem::path& path, const PseudoLabelSet& labels) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << "PSEUDO1 " << labels.image_id << ' ' << labels.shape.rows << ' ' << labels.shape.cols << '\n';
    auto section = [&](const char* name, const std::vector<PixelIndex>& pts) {
        out << name << '\n';
        for (const auto& p : pts) out << p.row << ',' << p.col << '\n';
    };
    section("POS", labels.positives);
    section("NEG", labels.negatives);
    section("PUNEG", labels.pu_negatives);
}

PseudoLabelSet load_pseudo_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    PseudoLabelSet out;
    std::string line, magic;
    if (!std::getline(in, line)) throw IoError("empty pseudo-label file '" + path.string() + "'");
    {
        std::istringstream ss(line);
        if (!(ss >> magic >> out.image_id >> out.shape.rows >> out.shape.cols) || magic != "PSEUDO1")
            throw IoError("'" + path.string() + "' is not a pseudo-label cache");
    }
    std::vector<PixelIndex>* current = nullptr;
    while (std::getline(in, line)) {
        if (line == "POS") current = &out.positives;
        else if (line == "NEG") current = &out.negatives;
        else if (line == "PUNEG") current = &out.pu_negatives;
        else if (!line.empty()) {
            PixelIndex p;
            char comma = 0;
            std::istringstream ss(line);
            if (!current || !(ss >> p.row >> comma >> p.col) || comma != ',')
                throw IoError("malformed pseudo-label line in '" + path.string() + "': " + line);
            current->push_back(p);
        }
    }
    validate(out);
    return out;
}

}  // namespace puseg
