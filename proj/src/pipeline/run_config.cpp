#include "puseg/pipeline/run_config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

#include "puseg/errors.hpp"
#include "puseg/rng.hpp"

namespace puseg {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::string fmt_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

double parse_double(const std::string& key, const std::string& text) {
    auto one = [&](std::string_view s) {
        double v = 0.0;
        const auto t = trim(s);
        auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
            throw ConfigError("key '" + key + "': '" + text + "' is not a number");
        return v;
    };
    if (const auto slash = text.find('/'); slash != std::string::npos) {
        const double den = one(std::string_view(text).substr(slash + 1));
        if (den == 0.0) throw ConfigError("key '" + key + "': division by zero");
        return one(std::string_view(text).substr(0, slash)) / den;
    }
    return one(text);
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& text) {
    Int v{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
        throw ConfigError("key '" + key + "': '" + text + "' is not an integer");
    return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw ConfigError("key '" + key + "': '" + text + "' is not a boolean");
}

DataSource parse_source(const std::string& text) {
    if (text == "synthetic") return DataSource::synthetic;
    if (text == "fundus_folder") return DataSource::fundus_folder;
    if (text == "flat_folder") return DataSource::flat_folder;
    throw ConfigError("unknown data source '" + text + "'");
}

std::string source_name(DataSource s) {
    switch (s) {
        case DataSource::synthetic: return "synthetic";
        case DataSource::fundus_folder: return "fundus_folder";
        case DataSource::flat_folder: return "flat_folder";
    }
    return "unknown";
}

struct Field {
    std::string key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
        std::vector<Field> f;
        auto real = [&](std::string key, double RunConfig::*m) {
            f.push_back({key, [m](const RunConfig& c) { return fmt_double(c.*m); },
                         [m, key](RunConfig& c, const std::string& v) { c.*m = parse_double(key, v); }});
        };
        auto integer = [&](std::string key, int RunConfig::*m) {
            f.push_back({key, [m](const RunConfig& c) { return std::to_string(c.*m); },
                         [m, key](RunConfig& c, const std::string& v) { c.*m = parse_int<int>(key, v); }});
        };
        auto flag = [&](std::string key, bool RunConfig::*m) {
            f.push_back({key, [m](const RunConfig& c) { return std::string(c.*m ? "true" : "false"); },
                         [m, key](RunConfig& c, const std::string& v) { c.*m = parse_bool(key, v); }});
        };
        auto data_int = [&](std::string key, int DataConfig::*m) {
            f.push_back({key, [m](const RunConfig& c) { return std::to_string(c.data.*m); },
                         [m, key](RunConfig& c, const std::string& v) { c.data.*m = parse_int<int>(key, v); }});
        };

        f.push_back({"task", [](const RunConfig& c) { return std::string(to_string(c.task)); },
                     [](RunConfig& c, const std::string& v) { c.task = parse_task(v); }});
        real("th_p", &RunConfig::th_p);
        real("th_n", &RunConfig::th_n);
        real("alpha", &RunConfig::alpha);
        f.push_back({"pu_mode", [](const RunConfig& c) { return std::string(to_string(c.pu_mode)); },
                     [](RunConfig& c, const std::string& v) { c.pu_mode = parse_pu_mode(v); }});
        flag("pseudo_labeling", &RunConfig::pseudo_labeling);
        f.push_back({"seed", [](const RunConfig& c) { return std::to_string(c.seed); },
                     [](RunConfig& c, const std::string& v) { c.seed = parse_int<std::uint64_t>("seed", v); }});
        f.push_back({"backbone", [](const RunConfig& c) { return c.backbone; },
                     [](RunConfig& c, const std::string& v) { c.backbone = v; }});
        integer("epochs_pretrain", &RunConfig::epochs_pretrain);
        integer("epochs_pu", &RunConfig::epochs_pu);
        integer("epochs_retrain", &RunConfig::epochs_retrain);
        real("learning_rate", &RunConfig::learning_rate);
        real("pu_learning_rate", &RunConfig::pu_learning_rate);
        f.push_back({"pu_max_samples", [](const RunConfig& c) { return std::to_string(c.pu_max_samples); },
                     [](RunConfig& c, const std::string& v) {
                         c.pu_max_samples = parse_int<std::size_t>("pu_max_samples", v);
                     }});
        flag("pu_include_pseudo_positives", &RunConfig::pu_include_pseudo_positives);
        integer("crop_size", &RunConfig::crop_size);
        integer("crops_per_step", &RunConfig::crops_per_step);
        real("heatmap_sigma", &RunConfig::heatmap_sigma);
        f.push_back({"retrain_init", [](const RunConfig& c) { return std::string(to_string(c.retrain_init)); },
                     [](RunConfig& c, const std::string& v) { c.retrain_init = parse_retrain_init(v); }});
        real("binarize_threshold", &RunConfig::binarize_threshold);
        real("trace_seed_threshold", &RunConfig::trace_seed_threshold);
        real("trace_step_threshold", &RunConfig::trace_step_threshold);
        integer("workers", &RunConfig::workers);
        f.push_back({"output_dir", [](const RunConfig& c) { return c.output_dir.string(); },
                     [](RunConfig& c, const std::string& v) { c.output_dir = v; }});
        f.push_back({"cache_dir", [](const RunConfig& c) { return c.cache_dir.string(); },
                     [](RunConfig& c, const std::string& v) { c.cache_dir = v; }});
        f.push_back({"method_name", [](const RunConfig& c) { return c.method_name; },
                     [](RunConfig& c, const std::string& v) { c.method_name = v; }});

        f.push_back({"data.source", [](const RunConfig& c) { return source_name(c.data.source); },
                     [](RunConfig& c, const std::string& v) { c.data.source = parse_source(v); }});
        f.push_back({"data.root", [](const RunConfig& c) { return c.data.root.string(); },
                     [](RunConfig& c, const std::string& v) { c.data.root = v; }});
        data_int("data.fold", &DataConfig::fold);
        data_int("data.n_labeled", &DataConfig::n_labeled);
        data_int("data.n_unlabeled", &DataConfig::n_unlabeled);
        data_int("data.synthetic.n_images", &DataConfig::n_images);
        data_int("data.synthetic.rows", &DataConfig::rows);
        data_int("data.synthetic.cols", &DataConfig::cols);
        f.push_back({"data.synthetic.noise", [](const RunConfig& c) { return std::string(to_string(c.data.noise)); },
                     [](RunConfig& c, const std::string& v) { c.data.noise = parse_noise_profile(v); }});
        f.push_back({"data.synthetic.vessel_blur", [](const RunConfig& c) { return fmt_double(c.data.vessel_blur); },
                     [](RunConfig& c, const std::string& v) {
                         c.data.vessel_blur = parse_double("data.synthetic.vessel_blur", v);
                     }});
        f.push_back({"data.synthetic.seed",
                     [](const RunConfig& c) {
                         return c.data.synthetic_seed ? std::to_string(*c.data.synthetic_seed) : std::string();
                     },
                     [](RunConfig& c, const std::string& v) {
                         if (v.empty()) c.data.synthetic_seed.reset();
                         else c.data.synthetic_seed = parse_int<std::uint64_t>("data.synthetic.seed", v);
                     }});
        return f;
    }();
    return table;
}

}  // namespace

void validate(const RunConfig& c) {
    validate_thresholds(c.th_p, c.th_n);
    if (!(c.alpha > 0.0 && c.alpha < 100.0)) throw ConfigError("alpha must lie in (0,100)");
    if (c.epochs_pretrain < 1 || c.epochs_pu < 1 || c.epochs_retrain < 1)
        throw ConfigError("all epoch counts must be >= 1");
    if (!(c.learning_rate > 0.0) || !(c.pu_learning_rate > 0.0)) throw ConfigError("learning rates must be positive");
    if (c.pu_max_samples < 1) throw ConfigError("pu_max_samples must be >= 1");
    if (c.crop_size < 4 || c.crops_per_step < 1) throw ConfigError("invalid crop settings");
    if (!(c.heatmap_sigma > 0.0)) throw ConfigError("heatmap_sigma must be positive");
    if (!(c.binarize_threshold > 0.0 && c.binarize_threshold < 1.0))
        throw ConfigError("binarize_threshold must lie in (0,1)");
    if (!(c.trace_step_threshold > 0.0 && c.trace_step_threshold < c.trace_seed_threshold &&
          c.trace_seed_threshold < 1.0))
        throw ConfigError("tracing needs 0 < trace_step_threshold < trace_seed_threshold < 1");
    if (c.workers < 1) throw ConfigError("workers must be >= 1");
    if (c.data.n_labeled < 1 || c.data.n_unlabeled < 0 || c.data.fold < 0) throw ConfigError("invalid split sizes");
    if (c.pseudo_labeling && c.data.n_unlabeled < 1) throw ConfigError("pseudo-labeling needs unlabeled images");
    if (c.data.source == DataSource::synthetic) {
        if (c.data.rows < 32 || c.data.cols < 32) throw ConfigError("synthetic images must be at least 32x32");
        if (!(c.data.vessel_blur >= 0.0)) throw ConfigError("data.synthetic.vessel_blur must be >= 0");
        if (c.data.n_images < c.data.n_labeled + c.data.n_unlabeled + 1)
            throw ConfigError("synthetic dataset leaves no test images");
    } else if (c.data.root.empty()) {
        throw ConfigError("data.root is required for folder datasets");
    }
}

RunConfig parse_run_config(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(std::string_view(t).substr(0, eq));
        if (kv.contains(key)) throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
        kv[key] = trim(std::string_view(t).substr(eq + 1));
    }

    RunConfig c;
    std::set<std::string> known;
    for (const auto& f : fields()) known.insert(f.key);
    for (const auto& [k, v] : kv)
        if (!known.contains(k)) throw ConfigError("unknown config key '" + k + "'");

    if (auto it = kv.find("task"); it != kv.end()) c.task = parse_task(it->second);
    if (c.task == Task::heatmap_tracing) {
        c.th_p = kHeatmapThPositive;
        c.th_n = kHeatmapThNegative;
    }
    for (const auto& f : fields()) {
        auto it = kv.find(f.key);
        if (it != kv.end()) f.set(c, it->second);
    }
    validate(c);
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str());
}

std::map<std::string, std::string> to_key_values(const RunConfig& config) {
    std::map<std::string, std::string> out;
    for (const auto& f : fields()) out[f.key] = f.get(config);
    return out;
}

std::string to_text(const RunConfig& config) {
    std::ostringstream ss;
    for (const auto& [k, v] : to_key_values(config)) ss << k << " = " << v << '\n';
    return ss.str();
}

std::string method_label(const RunConfig& config) {
    if (!config.method_name.empty()) return config.method_name;
    if (!config.pseudo_labeling) return "Baseline";
    switch (config.pu_mode) {
        case PuMode::off: return "Pseudo w/o pu";
        case PuMode::batch: return "Ours (batch)";
        case PuMode::individual: return "Ours";
    }
    return "unknown";
}

std::filesystem::path cache_root(const RunConfig& config) {
    if (const char* env = std::getenv("PUSEG_CACHE_DIR"); env && *env) return env;
    if (!config.cache_dir.empty()) return config.cache_dir;
    return config.output_dir / "cache";
}

TrainConfig pretrain_config(const RunConfig& c) {
    TrainConfig t;
    t.epochs = c.epochs_pretrain;
    t.learning_rate = c.learning_rate;
    t.crop_size = c.crop_size;
    t.crops_per_step = c.crops_per_step;
    t.seed = derive_seed(c.seed, "pretrain");
    t.target = c.task == Task::segmentation ? TargetKind::mask : TargetKind::heatmap;
    t.heatmap_sigma = c.heatmap_sigma;
    t.backbone = c.backbone;
    return t;
}

TrainConfig retrain_config(const RunConfig& c) {
    TrainConfig t = pretrain_config(c);
    t.epochs = c.epochs_retrain;
    t.seed = derive_seed(c.seed, "retrain");
    return t;
}

PuStageOptions pu_options(const RunConfig& c) {
    PuStageOptions o;
    o.mode = c.pu_mode;
    o.alpha = c.alpha;
    o.train.epochs = c.epochs_pu;
    o.train.learning_rate = c.pu_learning_rate;
    o.train.max_samples = c.pu_max_samples;
    o.train.seed = derive_seed(c.seed, "pu");
    o.target = c.task == Task::segmentation ? TargetKind::mask : TargetKind::heatmap;
    o.include_pseudo_positives = c.pu_include_pseudo_positives;
    o.workers = c.workers;
    return o;
}

EvalOptions eval_options(const RunConfig& c) {
    EvalOptions o;
    o.binarize_threshold = c.binarize_threshold;
    o.trace.seed_threshold = c.trace_seed_threshold;
    o.trace.step_threshold = c.trace_step_threshold;
    o.workers = c.workers;
    return o;
}

DatasetSplit load_split(const RunConfig& c) {
    const auto& d = c.data;
    if (d.source == DataSource::synthetic) {
        SyntheticOptions opt;
        opt.noise = d.noise;
        opt.vessel_blur = d.vessel_blur;
        auto samples = generate_synthetic(d.synthetic_seed.value_or(c.seed), d.n_images, {d.rows, d.cols}, opt);
        return split_samples(std::move(samples), d.fold, d.n_labeled, d.n_unlabeled);
    }
    const auto layout = d.source == DataSource::fundus_folder ? DatasetLayout::fundus_folder : DatasetLayout::flat_folder;
    return load_dataset(d.root, layout, d.fold, d.n_labeled, d.n_unlabeled);
}

}  // namespace puseg
