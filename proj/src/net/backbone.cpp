#include "puseg/net/backbone.hpp"

#include <map>
#include <mutex>

#include "puseg/errors.hpp"
#include "puseg/net/mini_unet.hpp"

namespace puseg {

namespace {

class MiniUNetBackbone final : public Backbone {
public:
    explicit MiniUNetBackbone(int base) : net_(base) {}

    std::string kind() const override { return "mini_unet"; }
    int feature_dim() const override { return net_.feature_dim(); }
    int size_multiple() const override { return MiniUNetNet<float>::kSizeMultiple; }
    std::unique_ptr<Backbone> clone() const override { return std::make_unique<MiniUNetBackbone>(*this); }

    void initialize(std::uint64_t seed) override {
        Rng rng(seed);
        net_.initialize(rng);
    }

    std::unique_ptr<BackboneTape> make_tape() const override { return std::make_unique<Tape>(); }

    Tensor<float> forward(const Tensor<float>& input, BackboneTape* tape) const override {
        return net_.forward(input, tape ? &static_cast<Tape*>(tape)->inner : nullptr);
    }

    void backward(const BackboneTape& tape, Tensor<float> grad_features) override {
        net_.backward(static_cast<const Tape&>(tape).inner, std::move(grad_features));
    }

    std::vector<ParamView<float>> parameters() override { return net_.parameters(); }

private:
    struct Tape final : BackboneTape {
        MiniUNetNet<float>::Tape inner;
    };

    MiniUNetNet<float> net_;
};

struct Registry {
    std::mutex mutex;
    std::map<std::string, BackboneFactory> factories{
        {"mini_unet", [] { return make_mini_unet(); }},
    };
};

Registry& registry() {
    static Registry r;
    return r;
}

}  // namespace

std::unique_ptr<Backbone> make_mini_unet(int base_width) { return std::make_unique<MiniUNetBackbone>(base_width); }

void register_backbone(const std::string& kind, BackboneFactory factory) {
    auto& r = registry();
    std::lock_guard lock(r.mutex);
    r.factories[kind] = std::move(factory);
}

std::unique_ptr<Backbone> make_backbone(const std::string& kind) {
    auto& r = registry();
    std::lock_guard lock(r.mutex);
    auto it = r.factories.find(kind);
    if (it == r.factories.end()) throw ConfigError("unknown backbone '" + kind + "'");
    return it->second();
}

std::vector<std::string> registered_backbones() {
    auto& r = registry();
    std::lock_guard lock(r.mutex);
    std::vector<std::string> out;
    for (const auto& [k, _] : r.factories) out.push_back(k);
    return out;
}

}  // namespace puseg
