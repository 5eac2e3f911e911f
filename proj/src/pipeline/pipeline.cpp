#include "puseg/pipeline/pipeline.hpp"

#include <cctype>
#include <cinttypes>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <spdlog/spdlog.h>

#include "puseg/errors.hpp"
#include "puseg/net/checkpoint.hpp"
#include "puseg/rng.hpp"

namespace puseg {

namespace fs = std::filesystem;

std::string_view to_string(Stage stage) {
    switch (stage) {
        case Stage::data: return "data";
        case Stage::pretrain: return "pretrain";
        case Stage::pseudolabel: return "pseudolabel";
        case Stage::pu: return "pu";
        case Stage::retrain: return "retrain";
        case Stage::evaluate: return "evaluate";
    }
    return "unknown";
}

const StageRecord* RunManifest::stage(std::string_view name) const {
    for (const auto& s : stages)
        if (s.name == name) return &s;
    return nullptr;
}

namespace {

std::string now_utc() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string hex(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
    return buf;
}

std::string keyed(const std::map<std::string, std::string>& kv, std::initializer_list<const char*> keys) {
    std::string out;
    for (const char* k : keys) out += std::string(k) + "=" + kv.at(k) + ";";
    return out;
}

// Fingerprints chain: each stage's key contains its parent's key, so a change
// upstream invalidates everything below it.
struct Fingerprints {
    std::string data, pretrain, pseudo, pu, retrain;
};

Fingerprints fingerprints(const RunConfig& c) {
    auto kv = to_key_values(c);
    kv["data.synthetic.seed"] = std::to_string(c.data.synthetic_seed.value_or(c.seed));
    Fingerprints f;
    f.data = keyed(kv, {"data.source", "data.root", "data.fold", "data.n_labeled", "data.n_unlabeled",
                        "data.synthetic.n_images", "data.synthetic.rows", "data.synthetic.cols",
                        "data.synthetic.noise", "data.synthetic.vessel_blur", "data.synthetic.seed"});
    f.pretrain = f.data + keyed(kv, {"task", "backbone", "seed", "epochs_pretrain", "learning_rate", "crop_size",
                                     "crops_per_step", "heatmap_sigma"});
    f.pseudo = f.pretrain + keyed(kv, {"th_p", "th_n"});
    f.pu = f.pseudo + keyed(kv, {"pu_mode"});
    if (c.pu_mode != PuMode::off)
        f.pu += keyed(kv, {"alpha", "epochs_pu", "pu_learning_rate", "pu_max_samples", "pu_include_pseudo_positives"});
    f.retrain = f.pu + keyed(kv, {"epochs_retrain", "retrain_init"});
    return f;
}

class StageCache {
public:
    StageCache(fs::path root, const std::string& stage, const std::string& key)
        : fingerprint_(hex(derive_seed(0, key))), dir_(std::move(root) / (stage + "-" + fingerprint_)) {}

    const fs::path& dir() const { return dir_; }
    const std::string& fingerprint() const { return fingerprint_; }

    bool complete(const std::vector<fs::path>& files) const {
        if (!fs::exists(dir_ / "DONE")) return false;
        for (const auto& f : files)
            if (!fs::exists(f)) return false;
        return true;
    }
    void reset() const {
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void mark_done() const { std::ofstream(dir_ / "DONE") << fingerprint_ << '\n'; }

private:
    std::string fingerprint_;
    fs::path dir_;
};

fs::path pseudo_file(const fs::path& dir, const std::string& id) { return dir / "pseudo" / (id + ".txt"); }

std::vector<fs::path> pseudo_files(const fs::path& dir, const DatasetSplit& split) {
    std::vector<fs::path> out;
    for (const auto& u : split.unlabeled) out.push_back(pseudo_file(dir, u.id));
    return out;
}

void save_all(const fs::path& dir, const std::map<std::string, PseudoLabelSet>& labels) {
    fs::create_directories(dir / "pseudo");
    for (const auto& [id, set] : labels) save_pseudo_labels(pseudo_file(dir, id), set);
}

std::map<std::string, PseudoLabelSet> load_all(const fs::path& dir, const DatasetSplit& split) {
    std::map<std::string, PseudoLabelSet> out;
    for (const auto& u : split.unlabeled) out[u.id] = load_pseudo_labels(pseudo_file(dir, u.id));
    return out;
}

std::optional<double> precision(std::size_t hits, std::size_t total) {
    if (total == 0) return std::nullopt;
    return static_cast<double>(hits) / static_cast<double>(total);
}

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

PseudoQuality pseudo_quality(const DatasetSplit& split, const std::map<std::string, PseudoLabelSet>& labels) {
    PseudoQuality q;
    std::size_t pos_hit = 0, neg_hit = 0, pu_hit = 0;
    std::size_t pos_n = 0, neg_n = 0, pu_n = 0;
    bool have_truth = true;
    for (const auto& u : split.unlabeled) {
        const auto it = labels.find(u.id);
        if (it == labels.end()) continue;
        const auto& set = it->second;
        q.n_positives += set.positives.size();
        q.n_negatives += set.negatives.size();
        q.n_pu_negatives += set.pu_negatives.size();
        if (!u.mask) {
            have_truth = false;
            continue;
        }
        const Mask& gt = *u.mask;
        for (const auto& p : set.positives) pos_hit += gt[p] == 1;
        for (const auto& p : set.negatives) neg_hit += gt[p] == 0;
        for (const auto& p : set.pu_negatives) pu_hit += gt[p] == 0;
        pos_n += set.positives.size();
        neg_n += set.negatives.size();
        pu_n += set.pu_negatives.size();
    }
    if (have_truth) {
        q.positive_precision = precision(pos_hit, pos_n);
        q.negative_precision = precision(neg_hit, neg_n);
        q.pu_negative_precision = precision(pu_hit, pu_n);
    }
    return q;
}

void write_manifest(const fs::path& path, const RunManifest& m) {
    nlohmann::ordered_json j;
    j["version"] = m.version;
    j["method"] = m.method;
    j["status"] = m.status;
    if (!m.failed_stage.empty()) {
        j["failed_stage"] = m.failed_stage;
        j["error"] = m.error;
    }
    j["config"] = m.config;
    auto& stages = j["stages"] = nlohmann::ordered_json::array();
    for (const auto& s : m.stages)
        stages.push_back({{"name", s.name},
                          {"fingerprint", s.fingerprint},
                          {"dir", s.dir.string()},
                          {"reused", s.reused},
                          {"started", s.started},
                          {"finished", s.finished}});
    auto paths = [](const std::vector<fs::path>& v) {
        std::vector<std::string> out;
        for (const auto& p : v) out.push_back(p.string());
        return out;
    };
    j["checkpoints"] = paths(m.checkpoints);
    j["pseudo_label_files"] = paths(m.pseudo_label_files);
    j["pu_report"] = m.pu_report.string();
    j["metrics_jsonl"] = m.metrics_jsonl.string();
    j["summary"] = m.summary.string();
    j["test_ids"] = m.test_ids;
    if (m.metrics) {
        j["headline"] = headline(*m.metrics);
        if (m.metrics->task == Task::heatmap_tracing) {
            nlohmann::ordered_json cov;
            for (const auto& [t, v] : m.metrics->mean_coverage.per_tolerance) cov[std::to_string(t)] = v;
            j["coverage"] = cov;
        }
    }
    if (m.pseudo_quality) {
        const auto& q = *m.pseudo_quality;
        j["pseudo_quality"] = {{"n_positives", q.n_positives},
                               {"n_negatives", q.n_negatives},
                               {"n_pu_negatives", q.n_pu_negatives},
                               {"positive_precision", optional_json(q.positive_precision)},
                               {"negative_precision", optional_json(q.negative_precision)},
                               {"pu_negative_precision", optional_json(q.pu_negative_precision)}};
    }
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest '" + path.string() + "'");
    out << j.dump(2) << '\n';
}

RunManifest run_pipeline(const RunConfig& config, const PipelineOptions& options) {
    validate(config);
    RunManifest m;
    m.config = to_key_values(config);
    m.method = method_label(config);
    const fs::path out_dir = config.output_dir;
    const fs::path manifest_path = out_dir / "manifest.json";
    fs::create_directories(out_dir);
    const fs::path root = cache_root(config);
    const Fingerprints fp = fingerprints(config);

    std::string current = "data";
    auto begin = [&](Stage s) {
        current = to_string(s);
        m.stages.push_back({current, {}, {}, false, now_utc(), {}});
        return &m.stages.back();
    };
    auto finish = [&](StageRecord* r) { r->finished = now_utc(); };
    auto stop_after = [&](Stage s) {
        if (options.until != s) return false;
        m.status = "complete";
        write_manifest(manifest_path, m);
        return true;
    };

    try {
        auto* rec = begin(Stage::data);
        const DatasetSplit split = load_split(config);
        validate(split);
        for (const auto& t : split.test) m.test_ids.push_back(t.id);
        finish(rec);
        if (stop_after(Stage::data)) return m;

        SegModel model;
        if (options.checkpoint) {
            rec = begin(Stage::evaluate);
            model = load_model(*options.checkpoint);
            m.checkpoints.push_back(*options.checkpoint);
        } else {
            auto model_stage = [&](Stage s, const std::string& key, auto&& train) {
                auto* r = begin(s);
                const StageCache cache(root, std::string(to_string(s)), key);
                r->fingerprint = cache.fingerprint();
                r->dir = cache.dir();
                const fs::path ckpt = cache.dir() / "model.ckpt";
                SegModel out;
                if (cache.complete({ckpt})) {
                    spdlog::info("{}: reusing {}", to_string(s), cache.dir().string());
                    out = load_model(ckpt);
                    r->reused = true;
                } else {
                    spdlog::info("{}: training", to_string(s));
                    cache.reset();
                    out = train();
                    save_model(ckpt, out);
                    cache.mark_done();
                }
                m.checkpoints.push_back(ckpt);
                finish(r);
                return out;
            };

            model = model_stage(Stage::pretrain, fp.pretrain,
                                [&] { return train_supervised(split.labeled, pretrain_config(config)); });
            if (stop_after(Stage::pretrain)) return m;

            if (config.pseudo_labeling) {
                rec = begin(Stage::pseudolabel);
                std::map<std::string, PseudoLabelSet> labels;
                {
                    const StageCache cache(root, "pseudolabel", fp.pseudo);
                    rec->fingerprint = cache.fingerprint();
                    rec->dir = cache.dir();
                    const auto files = pseudo_files(cache.dir(), split);
                    if (cache.complete(files)) {
                        labels = load_all(cache.dir(), split);
                        rec->reused = true;
                    } else {
                        cache.reset();
                        for (const auto& u : split.unlabeled)
                            labels[u.id] = select_by_confidence(model.predict(u), config.th_p, config.th_n);
                        save_all(cache.dir(), labels);
                        cache.mark_done();
                    }
                    m.pseudo_label_files = files;
                }
                finish(rec);
                m.pseudo_quality = pseudo_quality(split, labels);
                if (stop_after(Stage::pseudolabel)) return m;

                if (config.pu_mode != PuMode::off) {
                    rec = begin(Stage::pu);
                    const StageCache cache(root, "pu", fp.pu);
                    rec->fingerprint = cache.fingerprint();
                    rec->dir = cache.dir();
                    auto files = pseudo_files(cache.dir(), split);
                    const fs::path report = cache.dir() / "pu_report.jsonl";
                    files.push_back(report);
                    if (cache.complete(files)) {
                        labels = load_all(cache.dir(), split);
                        rec->reused = true;
                    } else {
                        cache.reset();
                        auto result = run_pu_stage(model, split, labels, pu_options(config));
                        labels = std::move(result.labels);
                        save_all(cache.dir(), labels);
                        write_pu_report(report, result.reports);
                        cache.mark_done();
                    }
                    files.pop_back();
                    m.pseudo_label_files = files;
                    m.pu_report = report;
                    finish(rec);
                    m.pseudo_quality = pseudo_quality(split, labels);
                }
                if (stop_after(Stage::pu)) return m;

                model = model_stage(Stage::retrain, fp.retrain, [&] {
                    return retrain(config.retrain_init, &model, split.labeled, split.unlabeled, labels,
                                   retrain_config(config));
                });
                if (stop_after(Stage::retrain)) return m;
            } else if (options.until != Stage::evaluate) {
                m.status = "complete";
                write_manifest(manifest_path, m);
                return m;
            }
            rec = begin(Stage::evaluate);
        }

        const RunMetrics metrics = evaluate_run(model, split, config.task, eval_options(config));
        m.metrics_jsonl = out_dir / "metrics.jsonl";
        m.summary = out_dir / "summary.txt";
        write_metrics_jsonl(m.metrics_jsonl, metrics);
        {
            std::ofstream s(m.summary);
            if (!s) throw IoError("cannot write '" + m.summary.string() + "'");
            s << format_summary(metrics, m.method);
        }
        if (options.visualize)
            write_visualizations(out_dir / "visualizations", model, split.test, config.task, eval_options(config));
        m.metrics = metrics;
        finish(rec);
        m.status = "complete";
        write_manifest(manifest_path, m);
        return m;
    } catch (const std::exception& e) {
        m.status = "failed";
        m.failed_stage = current;
        m.error = e.what();
        try {
            write_manifest(manifest_path, m);
        } catch (const std::exception& inner) {
            spdlog::error("could not write manifest: {}", inner.what());
        }
        throw StageError(current, e.what());
    }
}

namespace {

std::string slug(const std::string& method) {
    std::string out;
    for (char ch : method) {
        if (std::isalnum(static_cast<unsigned char>(ch))) out += static_cast<char>(std::tolower(ch));
        else if (!out.empty() && out.back() != '_') out += '_';
    }
    while (!out.empty() && out.back() == '_') out.pop_back();
    return out.empty() ? "run" : out;
}

}  // namespace

ComparisonTable compare_methods(const std::vector<RunConfig>& configs) {
    if (configs.empty()) throw ComparisonError("no methods to compare");
    ComparisonTable table;
    table.task = configs.front().task;

    std::vector<std::string> reference;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        if (configs[i].task != table.task) throw ComparisonError("methods use different tasks");
        validate(configs[i]);
        const DatasetSplit split = load_split(configs[i]);
        std::vector<std::string> ids;
        for (const auto& t : split.test) ids.push_back(t.id);
        if (i == 0) reference = ids;
        else if (ids != reference)
            throw ComparisonError("method '" + method_label(configs[i]) + "' uses a different test split");
    }

    const fs::path shared_cache = cache_root(configs.front());
    std::set<std::string> used;
    for (RunConfig c : configs) {
        std::string name = slug(method_label(c));
        for (int k = 2; used.contains(name); ++k) name = slug(method_label(c)) + "_" + std::to_string(k);
        used.insert(name);
        if (c.cache_dir.empty()) c.cache_dir = shared_cache;
        c.output_dir = c.output_dir / name;
        table.runs.push_back(run_pipeline(c));
    }

    if (table.task == Task::segmentation) {
        table.columns = reference;
    } else {
        for (double t : kDefaultTolerances) table.columns.push_back(std::to_string(static_cast<int>(t)) + "px");
    }
    for (const auto& run : table.runs) {
        ComparisonRow row;
        row.method = run.method;
        const RunMetrics& metrics = *run.metrics;
        if (table.task == Task::segmentation) {
            for (const auto& im : metrics.per_image) row.values.push_back(im.dice);
            row.average = metrics.mean_dice;
        } else {
            for (double t : kDefaultTolerances) row.values.push_back(metrics.mean_coverage.per_tolerance.at(t));
            row.average = metrics.mean_coverage.average;
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::string format_table(const ComparisonTable& table) {
    std::size_t method_w = 6;
    for (const auto& r : table.rows) method_w = std::max(method_w, r.method.size());
    std::vector<std::size_t> widths;
    for (const auto& c : table.columns) widths.push_back(std::max<std::size_t>(6, c.size()));

    std::string out;
    char buf[64];
    auto cell = [&](const std::string& text, std::size_t w, bool left) {
        std::snprintf(buf, sizeof buf, left ? "%-*s" : "%*s", static_cast<int>(w), text.c_str());
        out += buf;
    };
    cell("Method", method_w, true);
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
        out += "  ";
        cell(table.columns[i], widths[i], false);
    }
    out += "  ";
    cell("Avg.", 6, false);
    out += '\n';
    for (const auto& r : table.rows) {
        cell(r.method, method_w, true);
        for (std::size_t i = 0; i < r.values.size(); ++i) {
            out += "  ";
            std::snprintf(buf, sizeof buf, "%.3f", r.values[i]);
            cell(buf, widths[i], false);
        }
        out += "  ";
        std::snprintf(buf, sizeof buf, "%.3f", r.average);
        cell(buf, 6, false);
        out += '\n';
    }
    return out;
}

}  // namespace puseg
