#include "puseg/core/dataset.hpp"

#include <algorithm>
#include <string>

#include "puseg/core/image_io.hpp"
#include "puseg/errors.hpp"

namespace puseg {

namespace fs = std::filesystem;

DatasetLayout parse_dataset_layout(std::string_view text) {
    if (text == "fundus_folder") return DatasetLayout::fundus_folder;
    if (text == "flat_folder") return DatasetLayout::flat_folder;
    throw ConfigError("unknown dataset layout '" + std::string(text) + "'");
}

std::string_view to_string(DatasetLayout layout) {
    return layout == DatasetLayout::fundus_folder ? "fundus_folder" : "flat_folder";
}

namespace {

bool is_png(const fs::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png";
}

bool ends_with(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

std::vector<ImageSample> load_samples(const fs::path& root, DatasetLayout layout) {
    if (!fs::is_directory(root)) throw IoError("dataset root '" + root.string() + "' is not a directory");
    const fs::path image_dir = layout == DatasetLayout::fundus_folder ? root / "images" : root;
    if (!fs::is_directory(image_dir)) throw IoError("missing image directory '" + image_dir.string() + "'");

    std::vector<ImageSample> samples;
    for (const auto& entry : fs::directory_iterator(image_dir)) {
        if (!entry.is_regular_file() || !is_png(entry.path())) continue;
        const std::string stem = entry.path().stem().string();
        if (layout == DatasetLayout::flat_folder && ends_with(stem, "_mask")) continue;

        ImageSample s;
        s.id = stem;
        s.pixels = read_png(entry.path());

        const fs::path mask_path = layout == DatasetLayout::fundus_folder
                                       ? root / "masks" / (stem + entry.path().extension().string())
                                       : root / (stem + "_mask" + entry.path().extension().string());
        if (fs::exists(mask_path)) s.mask = read_mask_png(mask_path);

        const fs::path csv_path =
            layout == DatasetLayout::fundus_folder ? root / "centerlines" / (stem + ".csv") : root / (stem + ".csv");
        if (fs::exists(csv_path)) s.centerline = read_centerline_csv(csv_path);

        samples.push_back(std::move(s));
    }
    std::sort(samples.begin(), samples.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return samples;
}

DatasetSplit split_samples(std::vector<ImageSample> samples, int fold, int n_labeled, int n_unlabeled) {
    if (fold < 0 || n_labeled < 1 || n_unlabeled < 0) throw SplitError("invalid split parameters");
    const auto n = static_cast<int>(samples.size());
    if (n_labeled + n_unlabeled > n)
        throw SplitError("requested " + std::to_string(n_labeled + n_unlabeled) + " training samples but dataset has " +
                         std::to_string(n));

    std::sort(samples.begin(), samples.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    std::rotate(samples.begin(), samples.begin() + (fold % n), samples.end());

    DatasetSplit split;
    split.fold_index = fold;
    for (int i = 0; i < n; ++i) {
        auto& s = samples[static_cast<std::size_t>(i)];
        if (i < n_labeled) {
            s.role = Role::labeled;
            if (!s.mask && !s.centerline) throw MissingAnnotation("labeled sample '" + s.id + "' has no mask");
            split.labeled.push_back(std::move(s));
        } else if (i < n_labeled + n_unlabeled) {
            s.role = Role::unlabeled;
            split.unlabeled.push_back(std::move(s));
        } else {
            s.role = Role::test;
            split.test.push_back(std::move(s));
        }
    }
    for (const auto* list : {&split.labeled, &split.unlabeled, &split.test})
        for (const auto& s : *list) validate(s);
    validate(split);
    return split;
}

DatasetSplit load_dataset(const fs::path& root, DatasetLayout layout, int fold, int n_labeled, int n_unlabeled) {
    return split_samples(load_samples(root, layout), fold, n_labeled, n_unlabeled);
}

void save_samples(const fs::path& root, const std::vector<ImageSample>& samples) {
    fs::create_directories(root / "images");
    fs::create_directories(root / "masks");
    for (const auto& s : samples) {
        write_png(root / "images" / (s.id + ".png"), s.pixels);
        if (s.mask) write_mask_png(root / "masks" / (s.id + ".png"), *s.mask);
        if (s.centerline) {
            fs::create_directories(root / "centerlines");
            write_centerline_csv(root / "centerlines" / (s.id + ".csv"), *s.centerline);
        }
    }
}

}  // namespace puseg
