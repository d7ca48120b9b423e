#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "biceph/nn.hpp"

namespace biceph {

struct BicephConfig;

struct LayerSpec {
    enum class Kind { Dense, L2Norm };

    Kind kind = Kind::Dense;
    std::size_t in = 0;
    std::size_t out = 0;
    Activation activation = Activation::Identity;

    static LayerSpec dense(std::size_t in, std::size_t out, Activation act) {
        return {Kind::Dense, in, out, act};
    }
    static LayerSpec l2norm(std::size_t dim) {
        return {Kind::L2Norm, dim, dim, Activation::Identity};
    }
};

struct SegmentSpec {
    std::string name;
    std::vector<LayerSpec> layers;
};

// Branching models are described as named layer chains; segment totals are
// additive and the concatenation junction carries no parameters.
struct ModelDescription {
    std::vector<SegmentSpec> segments;

    void validate() const;  // dims chain within each segment
};

ModelDescription describe_model(const BicephConfig& config);

struct CostReport {
    std::uint64_t total_params = 0;
    std::vector<std::pair<std::string, std::uint64_t>> per_layer_params;
    std::uint64_t flops_forward = 0;  // one input row
    std::uint64_t size_bytes = 0;
    std::string flop_convention;
};

// Dense layers contribute out x (in + 1); normalization and activations
// contribute nothing.
std::uint64_t count_params(const ModelDescription& desc);

// Per input row: dense = 2*in*out + out; ReLU/Sigmoid = out; Softmax =
// 3*out; L2-norm = 3*dim; Identity free. 2 FLOPs per multiply-add.
std::uint64_t estimate_flops(const ModelDescription& desc, std::size_t input_width);

// Raw parameter bytes plus the serialization overhead of the checkpoint
// envelope (measured by the caller, zero when sizing bare weights).
std::uint64_t estimate_size(const ModelDescription& desc, double bytes_per_param = 8.0,
                            std::uint64_t envelope_bytes = 0);

CostReport cost_report(const BicephConfig& config, std::uint64_t envelope_bytes);

std::string cost_report_text(const CostReport& report);
std::string cost_report_json(const CostReport& report);

}  // namespace biceph
