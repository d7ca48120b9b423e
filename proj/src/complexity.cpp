#include "biceph/complexity.hpp"

#include <cstdio>

#include "biceph/model.hpp"
#include "json.hpp"

namespace biceph {

void ModelDescription::validate() const {
    for (const SegmentSpec& seg : segments) {
        for (std::size_t i = 0; i < seg.layers.size(); ++i) {
            const LayerSpec& l = seg.layers[i];
            if (l.in == 0 || l.out == 0)
                throw ValidationError("model description: zero-width layer in " + seg.name);
            if (l.kind == LayerSpec::Kind::L2Norm && l.in != l.out)
                throw ValidationError("model description: L2 norm must preserve width");
            if (i > 0 && seg.layers[i - 1].out != l.in)
                throw ValidationError("model description: dimension chain broken in " +
                                      seg.name);
        }
    }
}

ModelDescription describe_model(const BicephConfig& config) {
    config.validate();
    ModelDescription desc;

    SegmentSpec backbone{"backbone", {}};
    std::size_t prev = config.input_dim;
    for (std::size_t w : config.backbone_hidden) {
        backbone.layers.push_back(LayerSpec::dense(prev, w, Activation::ReLU));
        prev = w;
    }
    backbone.layers.push_back(LayerSpec::dense(prev, config.flat_dim, Activation::ReLU));
    desc.segments.push_back(std::move(backbone));

    SegmentSpec triplet{"triplet_branch", {}};
    triplet.layers.push_back(
        LayerSpec::dense(config.flat_dim, config.embed_dim, Activation::Identity));
    triplet.layers.push_back(LayerSpec::l2norm(config.embed_dim));
    desc.segments.push_back(std::move(triplet));

    const Activation head_act =
        config.num_classes == 2 ? Activation::Sigmoid : Activation::Softmax;

    SegmentSpec prior{"prior_branch", {}};
    prior.layers.push_back(LayerSpec::dense(config.flat_dim, config.prior_out(), head_act));
    desc.segments.push_back(std::move(prior));

    SegmentSpec concat{"concat_head", {}};
    prev = config.embed_dim + config.prior_out();
    for (std::size_t w : config.concat_hidden) {
        concat.layers.push_back(LayerSpec::dense(prev, w, Activation::ReLU));
        prev = w;
    }
    concat.layers.push_back(LayerSpec::dense(prev, config.class_out(), head_act));
    desc.segments.push_back(std::move(concat));

    desc.validate();
    return desc;
}

namespace {

std::uint64_t layer_params(const LayerSpec& l) {
    if (l.kind == LayerSpec::Kind::Dense)
        return static_cast<std::uint64_t>(l.out) * (l.in + 1);
    return 0;
}

std::uint64_t layer_flops(const LayerSpec& l) {
    if (l.kind == LayerSpec::Kind::L2Norm) return 3ULL * l.in;
    std::uint64_t flops = 2ULL * l.in * l.out + l.out;
    switch (l.activation) {
        case Activation::Identity: break;
        case Activation::ReLU:
        case Activation::Sigmoid: flops += l.out; break;
        case Activation::Softmax: flops += 3ULL * l.out; break;
    }
    return flops;
}

}  // namespace

std::uint64_t count_params(const ModelDescription& desc) {
    desc.validate();
    std::uint64_t total = 0;
    for (const SegmentSpec& seg : desc.segments)
        for (const LayerSpec& l : seg.layers) total += layer_params(l);
    return total;
}

std::uint64_t estimate_flops(const ModelDescription& desc, std::size_t input_width) {
    desc.validate();
    if (!desc.segments.empty() && !desc.segments[0].layers.empty() &&
        desc.segments[0].layers[0].in != input_width)
        throw ValidationError("estimate_flops: input width does not match the first layer");
    std::uint64_t total = 0;
    for (const SegmentSpec& seg : desc.segments)
        for (const LayerSpec& l : seg.layers) total += layer_flops(l);
    return total;
}

std::uint64_t estimate_size(const ModelDescription& desc, double bytes_per_param,
                            std::uint64_t envelope_bytes) {
    const double raw = static_cast<double>(count_params(desc)) * bytes_per_param;
    return static_cast<std::uint64_t>(raw + 0.5) + envelope_bytes;
}

CostReport cost_report(const BicephConfig& config, std::uint64_t envelope_bytes) {
    const ModelDescription desc = describe_model(config);
    CostReport report;
    report.total_params = count_params(desc);
    for (const SegmentSpec& seg : desc.segments) {
        for (std::size_t i = 0; i < seg.layers.size(); ++i) {
            const std::uint64_t p = layer_params(seg.layers[i]);
            report.per_layer_params.emplace_back(seg.name + "." + std::to_string(i), p);
        }
    }
    report.flops_forward = estimate_flops(desc, config.input_dim);
    report.size_bytes = estimate_size(desc, 8, envelope_bytes);
    report.flop_convention =
        "2 FLOPs per multiply-add; dense = 2*in*out + out, relu/sigmoid = out, "
        "softmax = 3*out, l2norm = 3*dim; one input row";
    return report;
}

std::string cost_report_text(const CostReport& report) {
    std::string out;
    char line[160];
    std::snprintf(line, sizeof(line), "%-24s %12s\n", "layer", "params");
    out += line;
    for (const auto& [name, params] : report.per_layer_params) {
        std::snprintf(line, sizeof(line), "%-24s %12llu\n", name.c_str(),
                      static_cast<unsigned long long>(params));
        out += line;
    }
    std::snprintf(line, sizeof(line), "%-24s %12llu\n", "total",
                  static_cast<unsigned long long>(report.total_params));
    out += line;
    std::snprintf(line, sizeof(line), "forward FLOPs (1 row):   %12llu\n",
                  static_cast<unsigned long long>(report.flops_forward));
    out += line;
    std::snprintf(line, sizeof(line), "estimated size (bytes):  %12llu\n",
                  static_cast<unsigned long long>(report.size_bytes));
    out += line;
    out += "convention: " + report.flop_convention + "\n";
    return out;
}

std::string cost_report_json(const CostReport& report) {
    nlohmann::json j;
    j["total_params"] = report.total_params;
    j["flops_forward"] = report.flops_forward;
    j["size_bytes"] = report.size_bytes;
    j["flop_convention"] = report.flop_convention;
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& [name, params] : report.per_layer_params)
        layers.push_back({{"name", name}, {"params", params}});
    j["per_layer_params"] = layers;
    return j.dump(2) + "\n";
}

}  // namespace biceph
