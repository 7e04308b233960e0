#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "posekernel/geometry.hpp"
#include "posekernel/voxel.hpp"

namespace pk::net {

/// Dense C x nx x ny x nz activation block, x-fastest within a channel.
struct Tensor4 {
    std::size_t channels = 0;
    std::array<std::size_t, 3> dims{0, 0, 0};
    std::vector<double> values;

    static Tensor4 zeros(std::size_t channels, std::array<std::size_t, 3> dims) {
        Tensor4 t;
        t.channels = channels;
        t.dims = dims;
        t.values.assign(channels * dims[0] * dims[1] * dims[2], 0.0);
        return t;
    }

    std::size_t voxels() const { return dims[0] * dims[1] * dims[2]; }

    std::size_t offset(std::size_t c, std::size_t x, std::size_t y, std::size_t z) const {
        return c * voxels() + x + dims[0] * (y + dims[1] * z);
    }

    double at(std::size_t c, std::size_t x, std::size_t y, std::size_t z) const {
        return values[offset(c, x, y, z)];
    }
    double& at(std::size_t c, std::size_t x, std::size_t y, std::size_t z) {
        return values[offset(c, x, y, z)];
    }
};

inline Tensor4 to_tensor(const VoxelField& f) {
    Tensor4 t;
    t.channels = f.channels;
    t.dims = f.grid.dims;
    t.values = f.values;
    return t;
}

inline VoxelField to_field(const Tensor4& t, const VoxelGrid& grid) {
    if (t.dims != grid.dims) throw std::invalid_argument("to_field: dims mismatch");
    VoxelField f;
    f.grid = grid;
    f.channels = t.channels;
    f.values = t.values;
    return f;
}

enum class Activation { rectifier, identity };

/// 3D convolution layer, kernel 3x3x3 or 1x1x1, stride 1, zero same-padding.
/// Weight order is out x in x kx x ky x kz.
struct Conv3Layer {
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    std::size_t kernel = 3;
    std::vector<double> weights;
    std::vector<double> bias;
    Activation activation = Activation::rectifier;

    std::size_t weight_index(std::size_t o, std::size_t ci, std::size_t ax, std::size_t ay,
                             std::size_t az) const {
        return (((o * in_channels + ci) * kernel + ax) * kernel + ay) * kernel + az;
    }
};

namespace detail {

inline void check_layer(const Conv3Layer& layer, const Tensor4& input) {
    if (layer.kernel != 1 && layer.kernel != 3) {
        throw std::invalid_argument("conv3: kernel must be 1x1x1 or 3x3x3");
    }
    const std::size_t k3 = layer.kernel * layer.kernel * layer.kernel;
    if (layer.weights.size() != layer.out_channels * layer.in_channels * k3) {
        throw std::invalid_argument("conv3: weight count does not match layer shape");
    }
    if (layer.bias.size() != layer.out_channels) {
        throw std::invalid_argument("conv3: bias count does not match out_channels");
    }
    if (input.channels != layer.in_channels) {
        throw std::invalid_argument("conv3: input channel mismatch");
    }
}

/// Shared bounds for a shifted accumulation pass: out(x,y,z) pairs with
/// in(x+dx, y+dy, z+dz); lo/hi are the valid out ranges per axis.
struct ShiftRange {
    std::size_t x_lo, x_hi, y_lo, y_hi, z_lo, z_hi;
    long long dx, dy, dz;
    bool empty;
};

inline ShiftRange shift_range(const std::array<std::size_t, 3>& dims, long long dx, long long dy,
                              long long dz) {
    auto clamp_axis = [](std::size_t n, long long d, std::size_t& lo, std::size_t& hi) {
        const long long l = std::max<long long>(0, -d);
        const long long h = std::min<long long>(static_cast<long long>(n), static_cast<long long>(n) - d);
        lo = static_cast<std::size_t>(std::max<long long>(l, 0));
        hi = static_cast<std::size_t>(std::max<long long>(h, l));
    };
    ShiftRange r{};
    r.dx = dx;
    r.dy = dy;
    r.dz = dz;
    clamp_axis(dims[0], dx, r.x_lo, r.x_hi);
    clamp_axis(dims[1], dy, r.y_lo, r.y_hi);
    clamp_axis(dims[2], dz, r.z_lo, r.z_hi);
    r.empty = r.x_lo >= r.x_hi || r.y_lo >= r.y_hi || r.z_lo >= r.z_hi;
    return r;
}

inline Tensor4 conv3_raw(const Conv3Layer& layer, const Tensor4& input) {
    check_layer(layer, input);
    Tensor4 out = Tensor4::zeros(layer.out_channels, input.dims);
    const std::size_t voxels = out.voxels();
    for (std::size_t o = 0; o < layer.out_channels; ++o) {
        std::fill_n(out.values.begin() + static_cast<std::ptrdiff_t>(o * voxels), voxels, layer.bias[o]);
    }
    const long long p = static_cast<long long>(layer.kernel / 2);
    for (std::size_t o = 0; o < layer.out_channels; ++o) {
        for (std::size_t ci = 0; ci < layer.in_channels; ++ci) {
            for (std::size_t ax = 0; ax < layer.kernel; ++ax) {
                for (std::size_t ay = 0; ay < layer.kernel; ++ay) {
                    for (std::size_t az = 0; az < layer.kernel; ++az) {
                        const double w = layer.weights[layer.weight_index(o, ci, ax, ay, az)];
                        if (w == 0.0) continue;
                        const ShiftRange r = shift_range(input.dims, static_cast<long long>(ax) - p,
                                                         static_cast<long long>(ay) - p,
                                                         static_cast<long long>(az) - p);
                        if (r.empty) continue;
                        for (std::size_t z = r.z_lo; z < r.z_hi; ++z) {
                            for (std::size_t y = r.y_lo; y < r.y_hi; ++y) {
                                const double* in_row =
                                    input.values.data() +
                                    input.offset(ci, static_cast<std::size_t>(r.x_lo + r.dx),
                                                 static_cast<std::size_t>(y + r.dy),
                                                 static_cast<std::size_t>(z + r.dz));
                                double* out_row = out.values.data() + out.offset(o, r.x_lo, y, z);
                                const std::size_t count = r.x_hi - r.x_lo;
                                for (std::size_t x = 0; x < count; ++x) out_row[x] += w * in_row[x];
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

}  // namespace detail

struct Conv3Grads {
    Tensor4 grad_input;
    std::vector<double> grad_weights;
    std::vector<double> grad_bias;
};

/// Cross-correlation with stride 1 and zero same-padding, then activation.
inline Tensor4 conv3_forward(const Conv3Layer& layer, const Tensor4& input) {
    Tensor4 out = detail::conv3_raw(layer, input);
    if (layer.activation == Activation::rectifier) {
        for (double& v : out.values) v = std::max(v, 0.0);
    }
    return out;
}

namespace detail {

/// Backward pass given the layer's forward output (used for the rectifier
/// mask; a rectifier output is positive exactly where its preactivation is).
inline Conv3Grads conv3_backward_from_output(const Conv3Layer& layer, const Tensor4& input,
                                             const Tensor4& output, const Tensor4& grad_out) {
    check_layer(layer, input);
    if (grad_out.channels != layer.out_channels || grad_out.dims != input.dims) {
        throw std::invalid_argument("conv3_backward: grad_out shape mismatch");
    }

    Tensor4 g = grad_out;
    if (layer.activation == Activation::rectifier) {
        for (std::size_t i = 0; i < g.values.size(); ++i) {
            if (!(output.values[i] > 0.0)) g.values[i] = 0.0;
        }
    }

    Conv3Grads grads;
    grads.grad_input = Tensor4::zeros(layer.in_channels, input.dims);
    grads.grad_weights.assign(layer.weights.size(), 0.0);
    grads.grad_bias.assign(layer.out_channels, 0.0);

    const std::size_t voxels = input.voxels();
    for (std::size_t o = 0; o < layer.out_channels; ++o) {
        double acc = 0.0;
        const double* go = g.values.data() + o * voxels;
        for (std::size_t i = 0; i < voxels; ++i) acc += go[i];
        grads.grad_bias[o] = acc;
    }

    const long long p = static_cast<long long>(layer.kernel / 2);
    for (std::size_t o = 0; o < layer.out_channels; ++o) {
        for (std::size_t ci = 0; ci < layer.in_channels; ++ci) {
            for (std::size_t ax = 0; ax < layer.kernel; ++ax) {
                for (std::size_t ay = 0; ay < layer.kernel; ++ay) {
                    for (std::size_t az = 0; az < layer.kernel; ++az) {
                        const ShiftRange r = shift_range(input.dims, static_cast<long long>(ax) - p,
                                                         static_cast<long long>(ay) - p,
                                                         static_cast<long long>(az) - p);
                        if (r.empty) continue;
                        const double w = layer.weights[layer.weight_index(o, ci, ax, ay, az)];
                        double w_acc = 0.0;
                        for (std::size_t z = r.z_lo; z < r.z_hi; ++z) {
                            for (std::size_t y = r.y_lo; y < r.y_hi; ++y) {
                                const std::size_t in_off =
                                    input.offset(ci, static_cast<std::size_t>(r.x_lo + r.dx),
                                                 static_cast<std::size_t>(y + r.dy),
                                                 static_cast<std::size_t>(z + r.dz));
                                const std::size_t g_off = g.offset(o, r.x_lo, y, z);
                                const double* in_row = input.values.data() + in_off;
                                const double* g_row = g.values.data() + g_off;
                                double* gin_row = grads.grad_input.values.data() + in_off;
                                const std::size_t count = r.x_hi - r.x_lo;
                                for (std::size_t x = 0; x < count; ++x) {
                                    w_acc += g_row[x] * in_row[x];
                                    gin_row[x] += w * g_row[x];
                                }
                            }
                        }
                        grads.grad_weights[layer.weight_index(o, ci, ax, ay, az)] = w_acc;
                    }
                }
            }
        }
    }
    return grads;
}

}  // namespace detail

/// Exact analytic gradients of the layer wrt input, weights, and bias.
inline Conv3Grads conv3_backward(const Conv3Layer& layer, const Tensor4& input,
                                 const Tensor4& grad_out) {
    const Tensor4 output = conv3_forward(layer, input);
    return detail::conv3_backward_from_output(layer, input, output, grad_out);
}

/// Per-landmark 3D likelihood heatmaps over a voxel grid. Raw network
/// outputs are stored as-is; values are clamped to [0, 1] at readout.
struct PoseHeatmaps3D {
    VoxelField heatmaps;
};

struct PoseNetConfig {
    std::vector<std::size_t> stem_channels{8, 8, 8};  // per-microphone audio stem widths
    std::size_t stage_hidden_channels = 16;
    std::size_t stage_hidden_layers = 2;  // 3x3x3 layers per stage before the 1x1x1 head
    std::size_t stages = 6;
    std::size_t landmarks = 1;
    bool use_visual = true;
    std::uint64_t rng_seed = 0;
};

/// Multi-stage 3D CNN: a shared audio stem per microphone, channel-max
/// fusion across microphones, visual channels concatenated, then S heatmap
/// stages where each later stage also consumes the previous prediction.
struct PoseNet {
    PoseNetConfig config;
    std::vector<Conv3Layer> stem;
    std::vector<std::vector<Conv3Layer>> stages;

    std::size_t audio_channels() const { return stem.empty() ? 1 : stem.back().out_channels; }
    std::size_t feature_channels() const {
        return audio_channels() + (config.use_visual ? config.landmarks : 0);
    }
};

namespace detail {

inline Conv3Layer init_layer(std::size_t in_c, std::size_t out_c, std::size_t kernel,
                             Activation act, std::mt19937_64& rng) {
    Conv3Layer layer;
    layer.in_channels = in_c;
    layer.out_channels = out_c;
    layer.kernel = kernel;
    layer.activation = act;
    const std::size_t k3 = kernel * kernel * kernel;
    const double fan_in = static_cast<double>(in_c * k3);
    const double fan_out = static_cast<double>(out_c * k3);
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    layer.weights.resize(out_c * in_c * k3);
    for (double& w : layer.weights) w = dist(rng);
    layer.bias.assign(out_c, 0.0);
    return layer;
}

}  // namespace detail

inline PoseNet make_pose_net(const PoseNetConfig& config) {
    if (config.stem_channels.empty()) throw std::invalid_argument("make_pose_net: stem must have layers");
    if (config.stages < 1) throw std::invalid_argument("make_pose_net: need at least one stage");
    if (config.landmarks < 1) throw std::invalid_argument("make_pose_net: need at least one landmark");

    PoseNet net;
    net.config = config;
    std::mt19937_64 rng(config.rng_seed);

    std::size_t in_c = 1;
    for (std::size_t width : config.stem_channels) {
        net.stem.push_back(detail::init_layer(in_c, width, 3, Activation::rectifier, rng));
        in_c = width;
    }

    const std::size_t features = in_c + (config.use_visual ? config.landmarks : 0);
    for (std::size_t s = 0; s < config.stages; ++s) {
        const std::size_t stage_in = features + (s > 0 ? config.landmarks : 0);
        std::vector<Conv3Layer> block;
        std::size_t c = stage_in;
        for (std::size_t l = 0; l < config.stage_hidden_layers; ++l) {
            block.push_back(detail::init_layer(c, config.stage_hidden_channels, 3,
                                               Activation::rectifier, rng));
            c = config.stage_hidden_channels;
        }
        block.push_back(detail::init_layer(c, config.landmarks, 1, Activation::identity, rng));
        net.stages.push_back(std::move(block));
    }
    return net;
}

namespace detail {

inline Tensor4 concat_channels(const Tensor4& a, const Tensor4& b) {
    if (a.dims != b.dims) throw std::invalid_argument("concat: dims mismatch");
    Tensor4 out;
    out.channels = a.channels + b.channels;
    out.dims = a.dims;
    out.values.reserve(a.values.size() + b.values.size());
    out.values.insert(out.values.end(), a.values.begin(), a.values.end());
    out.values.insert(out.values.end(), b.values.begin(), b.values.end());
    return out;
}

struct ForwardCache {
    std::vector<Tensor4> stem_inputs;             // [mic] raw encoded audio
    std::vector<std::vector<Tensor4>> stem_acts;  // [mic][layer]
    Tensor4 fused;
    std::vector<std::uint32_t> winner;  // per fused element: first mic attaining the max
    Tensor4 features;
    std::vector<Tensor4> stage_inputs;
    std::vector<std::vector<Tensor4>> stage_acts;  // [stage][layer]
};

inline ForwardCache forward_cached(const PoseNet& net, const std::vector<Tensor4>& audio,
                                   const Tensor4& visual) {
    if (audio.empty()) throw std::invalid_argument("forward: need at least one audio field");
    for (const Tensor4& t : audio) {
        if (t.channels != 1) throw std::invalid_argument("forward: audio fields must be single-channel");
        if (t.dims != audio.front().dims) throw std::invalid_argument("forward: grid mismatch");
    }
    if (net.config.use_visual) {
        if (visual.channels != net.config.landmarks) {
            throw std::invalid_argument("forward: visual channel count must equal landmark count");
        }
        if (visual.dims != audio.front().dims) throw std::invalid_argument("forward: grid mismatch");
    }

    ForwardCache cache;
    cache.stem_inputs = audio;
    for (const Tensor4& field : audio) {
        std::vector<Tensor4> acts;
        const Tensor4* x = &field;
        for (const Conv3Layer& layer : net.stem) {
            acts.push_back(conv3_forward(layer, *x));
            x = &acts.back();
        }
        cache.stem_acts.push_back(std::move(acts));
    }

    cache.fused = cache.stem_acts.front().back();
    cache.winner.assign(cache.fused.values.size(), 0);
    for (std::uint32_t m = 1; m < cache.stem_acts.size(); ++m) {
        const Tensor4& cand = cache.stem_acts[m].back();
        for (std::size_t i = 0; i < cache.fused.values.size(); ++i) {
            if (cand.values[i] > cache.fused.values[i]) {
                cache.fused.values[i] = cand.values[i];
                cache.winner[i] = m;
            }
        }
    }

    cache.features = net.config.use_visual ? concat_channels(cache.fused, visual) : cache.fused;

    const Tensor4* prev = nullptr;
    for (std::size_t s = 0; s < net.stages.size(); ++s) {
        cache.stage_inputs.push_back(s == 0 ? cache.features
                                            : concat_channels(cache.features, *prev));
        std::vector<Tensor4> acts;
        const Tensor4* x = &cache.stage_inputs.back();
        for (const Conv3Layer& layer : net.stages[s]) {
            acts.push_back(conv3_forward(layer, *x));
            x = &acts.back();
        }
        cache.stage_acts.push_back(std::move(acts));
        prev = &cache.stage_acts.back().back();
    }
    return cache;
}

}  // namespace detail

/// Runs the full net; returns one heatmap set per stage for supervision.
/// Audio fields may be given in any order; max fusion makes the result
/// independent of it.
inline std::vector<PoseHeatmaps3D> forward(const PoseNet& net,
                                           const std::vector<VoxelField>& audio_fields,
                                           const VoxelField& visual) {
    std::vector<Tensor4> audio;
    audio.reserve(audio_fields.size());
    for (const VoxelField& f : audio_fields) audio.push_back(to_tensor(f));
    const Tensor4 vis = net.config.use_visual ? to_tensor(visual) : Tensor4{};
    const detail::ForwardCache cache = detail::forward_cached(net, audio, vis);

    std::vector<PoseHeatmaps3D> out;
    const VoxelGrid& grid = audio_fields.front().grid;
    out.reserve(cache.stage_acts.size());
    for (const auto& acts : cache.stage_acts) {
        out.push_back(PoseHeatmaps3D{to_field(acts.back(), grid)});
    }
    return out;
}

/// Sum over stages of the mean squared error against the target heatmaps.
inline double loss(const std::vector<PoseHeatmaps3D>& predictions, const PoseHeatmaps3D& target) {
    if (predictions.empty()) throw std::invalid_argument("loss: no predictions");
    double total = 0.0;
    for (const PoseHeatmaps3D& pred : predictions) {
        if (pred.heatmaps.channels != target.heatmaps.channels ||
            pred.heatmaps.values.size() != target.heatmaps.values.size()) {
            throw std::invalid_argument("loss: shape mismatch");
        }
        double acc = 0.0;
        for (std::size_t i = 0; i < pred.heatmaps.values.size(); ++i) {
            const double d = pred.heatmaps.values[i] - target.heatmaps.values[i];
            acc += d * d;
        }
        total += acc / static_cast<double>(pred.heatmaps.values.size());
    }
    return total;
}

/// Ground-truth heatmaps: channel i is exp(-|X - landmark_i|^2 / (2 sigma^2))
/// at voxel centers.
inline PoseHeatmaps3D make_target(const std::vector<Vec3>& landmarks3d, const VoxelGrid& grid,
                                  double sigma_m) {
    if (!(sigma_m > 0.0)) throw std::invalid_argument("make_target: sigma must be positive");
    if (landmarks3d.empty()) throw std::invalid_argument("make_target: need at least one landmark");
    VoxelField field = VoxelField::zeros(grid, landmarks3d.size());
    const double inv_two_sigma2 = 1.0 / (2.0 * sigma_m * sigma_m);
    const std::size_t voxels = grid.voxel_count();
    for (std::size_t c = 0; c < landmarks3d.size(); ++c) {
        std::size_t idx = 0;
        for (std::size_t k = 0; k < grid.dims[2]; ++k) {
            for (std::size_t j = 0; j < grid.dims[1]; ++j) {
                for (std::size_t i = 0; i < grid.dims[0]; ++i, ++idx) {
                    const Vec3 d = grid.center(i, j, k) - landmarks3d[c];
                    field.values[c * voxels + idx] = std::exp(-dot(d, d) * inv_two_sigma2);
                }
            }
        }
    }
    return PoseHeatmaps3D{std::move(field)};
}

/// Per-channel argmax voxel centers, on values clamped into [0, 1].
inline std::vector<Vec3> readout(const PoseHeatmaps3D& pred) {
    VoxelField clamped = pred.heatmaps;
    for (double& v : clamped.values) v = std::clamp(v, 0.0, 1.0);
    std::vector<Vec3> out;
    out.reserve(clamped.channels);
    for (std::size_t c = 0; c < clamped.channels; ++c) {
        out.push_back(grid_argmax(clamped, c).position);
    }
    return out;
}

struct TrainingSample {
    std::vector<VoxelField> audio_fields;
    VoxelField visual;
    PoseHeatmaps3D target;
};

struct TrainLog {
    std::vector<double> epoch_loss;
};

namespace detail {

struct LayerGrads {
    std::vector<double> weights;
    std::vector<double> bias;
};

struct NetGrads {
    std::vector<LayerGrads> stem;
    std::vector<std::vector<LayerGrads>> stages;
};

inline NetGrads zero_grads(const PoseNet& net) {
    NetGrads g;
    for (const Conv3Layer& l : net.stem) {
        g.stem.push_back({std::vector<double>(l.weights.size(), 0.0),
                          std::vector<double>(l.bias.size(), 0.0)});
    }
    for (const auto& block : net.stages) {
        std::vector<LayerGrads> bg;
        for (const Conv3Layer& l : block) {
            bg.push_back({std::vector<double>(l.weights.size(), 0.0),
                          std::vector<double>(l.bias.size(), 0.0)});
        }
        g.stages.push_back(std::move(bg));
    }
    return g;
}

inline void add_scaled(std::vector<double>& dst, const std::vector<double>& src, double s) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += s * src[i];
}

/// Backprops a layer block in reverse; accumulates into block_grads and
/// returns the gradient wrt the block input.
inline Tensor4 backprop_block(const std::vector<Conv3Layer>& block, const Tensor4& block_input,
                              const std::vector<Tensor4>& acts, Tensor4 grad,
                              std::vector<LayerGrads>& block_grads) {
    for (std::size_t l = block.size(); l-- > 0;) {
        const Tensor4& input = (l == 0) ? block_input : acts[l - 1];
        Conv3Grads g = conv3_backward_from_output(block[l], input, acts[l], grad);
        add_scaled(block_grads[l].weights, g.grad_weights, 1.0);
        add_scaled(block_grads[l].bias, g.grad_bias, 1.0);
        grad = std::move(g.grad_input);
    }
    return grad;
}

inline Tensor4 slice_channels(const Tensor4& t, std::size_t first, std::size_t count) {
    Tensor4 out = Tensor4::zeros(count, t.dims);
    const std::size_t voxels = t.voxels();
    std::copy_n(t.values.begin() + static_cast<std::ptrdiff_t>(first * voxels), count * voxels,
                out.values.begin());
    return out;
}

/// Full backward pass for one sample. Returns the summed per-stage MSE loss
/// and accumulates parameter gradients into `grads`.
inline double backward_sample(const PoseNet& net, const ForwardCache& cache, const Tensor4& target,
                              NetGrads& grads) {
    const std::size_t stage_count = net.stages.size();
    const std::size_t feature_ch = cache.features.channels;
    const std::size_t n_landmarks = net.config.landmarks;
    const double numel = static_cast<double>(target.values.size());

    double total_loss = 0.0;
    Tensor4 grad_features = Tensor4::zeros(feature_ch, cache.features.dims);
    Tensor4 carry;  // gradient flowing into the previous stage's output
    for (std::size_t s = stage_count; s-- > 0;) {
        const Tensor4& out = cache.stage_acts[s].back();
        Tensor4 grad_out = Tensor4::zeros(out.channels, out.dims);
        double acc = 0.0;
        for (std::size_t i = 0; i < out.values.size(); ++i) {
            const double d = out.values[i] - target.values[i];
            acc += d * d;
            grad_out.values[i] = 2.0 * d / numel;
        }
        total_loss += acc / numel;
        if (s + 1 < stage_count) {
            for (std::size_t i = 0; i < grad_out.values.size(); ++i) {
                grad_out.values[i] += carry.values[i];
            }
        }

        Tensor4 grad_in = backprop_block(net.stages[s], cache.stage_inputs[s], cache.stage_acts[s],
                                         std::move(grad_out), grads.stages[s]);

        for (std::size_t i = 0; i < grad_features.values.size(); ++i) {
            grad_features.values[i] += grad_in.values[i];
        }
        if (s > 0) carry = slice_channels(grad_in, feature_ch, n_landmarks);
    }

    // Visual channels are a passthrough; only the fused audio slice carries
    // parameters. Max fusion routes each element to its winning microphone.
    const std::size_t audio_ch = net.audio_channels();
    const Tensor4 grad_fused = slice_channels(grad_features, 0, audio_ch);
    for (std::size_t m = 0; m < cache.stem_acts.size(); ++m) {
        Tensor4 grad_mic = Tensor4::zeros(audio_ch, grad_fused.dims);
        bool any = false;
        for (std::size_t i = 0; i < grad_fused.values.size(); ++i) {
            if (cache.winner[i] == m) {
                grad_mic.values[i] = grad_fused.values[i];
                any = true;
            }
        }
        if (!any) continue;
        backprop_block(net.stem, cache.stem_inputs[m], cache.stem_acts[m], std::move(grad_mic),
                       grads.stem);
    }
    return total_loss;
}

inline void apply_sgd(PoseNet& net, const NetGrads& grads, double lr) {
    for (std::size_t l = 0; l < net.stem.size(); ++l) {
        add_scaled(net.stem[l].weights, grads.stem[l].weights, -lr);
        add_scaled(net.stem[l].bias, grads.stem[l].bias, -lr);
    }
    for (std::size_t s = 0; s < net.stages.size(); ++s) {
        for (std::size_t l = 0; l < net.stages[s].size(); ++l) {
            add_scaled(net.stages[s][l].weights, grads.stages[s][l].weights, -lr);
            add_scaled(net.stages[s][l].bias, grads.stages[s][l].bias, -lr);
        }
    }
}

}  // namespace detail

/// Plain per-sample SGD over the summed per-stage loss. Sample order is the
/// dataset order; the run is deterministic for a fixed net seed. Throws if
/// the loss stops being finite.
inline TrainLog train_sgd(PoseNet& net, const std::vector<TrainingSample>& dataset,
                          std::size_t epochs, double lr) {
    if (dataset.empty()) throw std::invalid_argument("train_sgd: empty dataset");
    if (!(lr >= 0.0)) throw std::invalid_argument("train_sgd: learning rate must be nonnegative");

    TrainLog log;
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        double epoch_sum = 0.0;
        for (std::size_t si = 0; si < dataset.size(); ++si) {
            const TrainingSample& sample = dataset[si];
            std::vector<Tensor4> audio;
            audio.reserve(sample.audio_fields.size());
            for (const VoxelField& f : sample.audio_fields) audio.push_back(to_tensor(f));
            const Tensor4 vis = net.config.use_visual ? to_tensor(sample.visual) : Tensor4{};

            detail::ForwardCache cache = detail::forward_cached(net, audio, vis);
            detail::NetGrads grads = detail::zero_grads(net);
            const double sample_loss =
                detail::backward_sample(net, cache, to_tensor(sample.target.heatmaps), grads);
            if (!std::isfinite(sample_loss)) {
                throw std::runtime_error("train_sgd: loss diverged at epoch " + std::to_string(epoch) +
                                         ", sample " + std::to_string(si));
            }
            epoch_sum += sample_loss;
            detail::apply_sgd(net, grads, lr);
        }
        log.epoch_loss.push_back(epoch_sum / static_cast<double>(dataset.size()));
    }
    return log;
}

}  // namespace pk::net
