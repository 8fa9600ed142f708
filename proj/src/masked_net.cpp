#include "fpe/masked_net.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "fpe/core_math.hpp"
#include "fpe/errors.hpp"
#include "fpe/rng.hpp"
#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are written as host-order little-endian");

namespace fpe {

std::size_t MaskedLayer::nnz() const {
    std::size_t count = 0;
    for (double m : mask.data) count += (m != 0.0);
    return count;
}

void MaskedLayer::apply_mask() {
    for (std::size_t i = 0; i < weights.data.size(); ++i)
        if (mask.data[i] == 0.0) weights.data[i] = 0.0;
}

std::vector<std::size_t> MlpModel::dims() const {
    std::vector<std::size_t> d;
    d.push_back(input_dim());
    for (const auto& layer : layers) d.push_back(layer.out_dim());
    return d;
}

MlpModel init_model(const std::vector<std::size_t>& layer_dims, std::uint64_t seed,
                    const InitOptions& options) {
    if (layer_dims.size() < 3)
        throw std::invalid_argument("init_model: need at least [in, hidden, out] dims");
    for (std::size_t d : layer_dims)
        if (d == 0) throw std::invalid_argument("init_model: zero dimension");

    MlpModel model;
    model.use_layer_norm = options.layer_norm;
    model.output_kind = options.output_kind;
    model.seed = seed;
    auto rng = make_rng(seed);
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        const std::size_t in = layer_dims[l];
        const std::size_t out = layer_dims[l + 1];
        MaskedLayer layer;
        layer.weights = Matrix(out, in);
        layer.mask = Matrix(out, in, 1.0);
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& w : layer.weights.data) w = dist(rng);
        if (options.biases) layer.bias.assign(out, 0.0);
        model.layers.push_back(std::move(layer));
    }
    if (options.layer_norm) {
        for (std::size_t l = 0; l + 2 < layer_dims.size(); ++l) {
            model.ln_gain.emplace_back(layer_dims[l + 1], 1.0);
            model.ln_shift.emplace_back(layer_dims[l + 1], 0.0);
        }
    }
    return model;
}

namespace {

Matrix affine_forward(const Matrix& x, const MaskedLayer& layer) {
    Matrix z = matmul_bt(x, layer.weights);
    if (layer.has_bias()) {
        for (std::size_t i = 0; i < z.rows; ++i)
            for (std::size_t j = 0; j < z.cols; ++j) z(i, j) += layer.bias[j];
    }
    return z;
}

}  // namespace

Matrix forward(const MlpModel& model, const Matrix& x, ForwardCache* cache) {
    if (x.cols != model.input_dim())
        throw std::invalid_argument("forward: input has " + std::to_string(x.cols) +
                                    " features, model expects " +
                                    std::to_string(model.input_dim()));
    if (cache) {
        *cache = ForwardCache{};
        cache->input = x;
    }
    Matrix h = x;
    const std::size_t last = model.layers.size() - 1;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        Matrix z = affine_forward(h, model.layers[l]);
        if (l == last) {
            Matrix out = (model.output_kind == OutputKind::BinarySigmoid) ? sigmoid(z) : z;
            if (cache) {
                cache->pre_act.push_back(std::move(z));
                cache->output = out;
            }
            return out;
        }
        Matrix act_in;
        if (model.use_layer_norm) {
            // Store x-hat (pre-affine) and 1/std per row for backward.
            const std::size_t cols = z.cols;
            Matrix xhat(z.rows, cols);
            std::vector<double> inv_stds(z.rows);
            const double inv_n = 1.0 / static_cast<double>(cols);
            for (std::size_t i = 0; i < z.rows; ++i) {
                const double* row = &z.data[i * cols];
                double mean = 0.0;
                for (std::size_t j = 0; j < cols; ++j) mean += row[j];
                mean *= inv_n;
                double var = 0.0;
                for (std::size_t j = 0; j < cols; ++j) {
                    const double d = row[j] - mean;
                    var += d * d;
                }
                var *= inv_n;
                const double inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
                inv_stds[i] = inv_std;
                double* xrow = &xhat.data[i * cols];
                for (std::size_t j = 0; j < cols; ++j) xrow[j] = (row[j] - mean) * inv_std;
            }
            act_in = Matrix(z.rows, cols);
            const auto& gain = model.ln_gain[l];
            const auto& shift = model.ln_shift[l];
            for (std::size_t i = 0; i < z.rows; ++i)
                for (std::size_t j = 0; j < cols; ++j)
                    act_in(i, j) = xhat(i, j) * gain[j] + shift[j];
            if (cache) {
                cache->normed.push_back(std::move(xhat));
                cache->ln_inv_std.push_back(std::move(inv_stds));
            }
        } else {
            act_in = z;
        }
        Matrix hidden = relu(act_in);
        if (cache) {
            cache->pre_act.push_back(std::move(z));
            cache->post_act.push_back(hidden);
        }
        h = std::move(hidden);
    }
    return h;  // unreachable
}

ModelGrads zero_grads(const MlpModel& model) {
    ModelGrads g;
    for (const auto& layer : model.layers) {
        LayerGrads lg;
        lg.d_weights = Matrix(layer.out_dim(), layer.in_dim());
        if (layer.has_bias()) lg.d_bias.assign(layer.out_dim(), 0.0);
        g.layers.push_back(std::move(lg));
    }
    for (const auto& gain : model.ln_gain) g.d_ln_gain.emplace_back(gain.size(), 0.0);
    for (const auto& shift : model.ln_shift) g.d_ln_shift.emplace_back(shift.size(), 0.0);
    return g;
}

ModelGrads backward(const MlpModel& model, const ForwardCache& cache,
                    const std::vector<int>& y) {
    const std::size_t batch = cache.input.rows;
    if (cache.pre_act.size() != model.layers.size() || cache.output.rows != batch)
        throw std::runtime_error("backward: cache does not match model");
    if (y.size() != batch) throw std::invalid_argument("backward: label count mismatch");

    ModelGrads grads = zero_grads(model);
    const double inv_batch = 1.0 / static_cast<double>(batch);

    // dL/dz at the output layer; BCE+sigmoid and CE+softmax share the form.
    Matrix delta(batch, model.output_dim());
    if (model.output_kind == OutputKind::BinarySigmoid) {
        for (std::size_t i = 0; i < batch; ++i)
            delta(i, 0) = (cache.output(i, 0) - static_cast<double>(y[i])) * inv_batch;
    } else {
        Matrix probs = stable_softmax(cache.output);
        for (std::size_t i = 0; i < batch; ++i) {
            for (std::size_t j = 0; j < probs.cols; ++j)
                delta(i, j) = probs(i, j) * inv_batch;
            delta(i, static_cast<std::size_t>(y[i])) -= inv_batch;
        }
    }

    for (std::size_t l = model.layers.size(); l-- > 0;) {
        const MaskedLayer& layer = model.layers[l];
        const Matrix& layer_input = (l == 0) ? cache.input : cache.post_act[l - 1];
        grads.layers[l].d_weights = matmul_at(delta, layer_input);
        if (layer.has_bias()) {
            for (std::size_t i = 0; i < delta.rows; ++i)
                for (std::size_t j = 0; j < delta.cols; ++j)
                    grads.layers[l].d_bias[j] += delta(i, j);
        }
        // Masked weights never move.
        for (std::size_t i = 0; i < layer.mask.data.size(); ++i)
            if (layer.mask.data[i] == 0.0) grads.layers[l].d_weights.data[i] = 0.0;

        if (l == 0) break;

        Matrix dh = matmul(delta, layer.weights);  // grad wrt previous activation
        const Matrix& h = cache.post_act[l - 1];
        for (std::size_t i = 0; i < dh.data.size(); ++i)
            if (h.data[i] <= 0.0) dh.data[i] = 0.0;

        if (model.use_layer_norm) {
            const std::size_t hl = l - 1;  // hidden layer index
            const Matrix& xhat = cache.normed[hl];
            const auto& inv_std = cache.ln_inv_std[hl];
            const auto& gain = model.ln_gain[hl];
            const std::size_t cols = dh.cols;
            Matrix dz(dh.rows, cols);
            for (std::size_t i = 0; i < dh.rows; ++i) {
                const double* da = &dh.data[i * cols];
                const double* xh = &xhat.data[i * cols];
                for (std::size_t j = 0; j < cols; ++j) {
                    grads.d_ln_gain[hl][j] += da[j] * xh[j];
                    grads.d_ln_shift[hl][j] += da[j];
                }
                double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                for (std::size_t j = 0; j < cols; ++j) {
                    const double dxh = da[j] * gain[j];
                    mean_dxhat += dxh;
                    mean_dxhat_xhat += dxh * xh[j];
                }
                mean_dxhat /= static_cast<double>(cols);
                mean_dxhat_xhat /= static_cast<double>(cols);
                double* out = &dz.data[i * cols];
                for (std::size_t j = 0; j < cols; ++j) {
                    const double dxh = da[j] * gain[j];
                    out[j] = inv_std[i] * (dxh - mean_dxhat - xh[j] * mean_dxhat_xhat);
                }
            }
            delta = std::move(dz);
        } else {
            delta = std::move(dh);
        }
    }
    return grads;
}

std::size_t nonzero_weight_count(const MlpModel& model) {
    std::size_t total = 0;
    for (const auto& layer : model.layers) total += layer.nnz();
    return total;
}

std::size_t nonzero_param_count(const MlpModel& model) {
    std::size_t total = nonzero_weight_count(model);
    for (const auto& layer : model.layers) total += layer.bias.size();
    return total;
}

void apply_masks(MlpModel& model) {
    for (auto& layer : model.layers) layer.apply_mask();
}

bool masks_consistent(const MlpModel& model) {
    for (const auto& layer : model.layers) {
        for (std::size_t i = 0; i < layer.mask.data.size(); ++i) {
            const double m = layer.mask.data[i];
            if (m != 0.0 && m != 1.0) return false;
            if (m == 0.0 && layer.weights.data[i] != 0.0) return false;
        }
    }
    return true;
}

namespace {

void write_block(std::ofstream& out, const std::vector<double>& values) {
    const std::uint64_t count = values.size();
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(count * sizeof(double)));
}

std::vector<double> read_block(std::ifstream& in, std::uint64_t expected,
                               const std::string& what) {
    std::uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&count), sizeof(count));
    if (!in || count != expected)
        throw FormatError("model checkpoint: bad " + what + " block length");
    std::vector<double> values(count);
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw FormatError("model checkpoint: truncated " + what + " payload");
    return values;
}

}  // namespace

void save_model(const MlpModel& model, const std::string& path) {
    nlohmann::json header;
    header["format"] = "fpe-model";
    header["version"] = 1;
    header["dims"] = model.dims();
    header["use_layer_norm"] = model.use_layer_norm;
    header["output_kind"] =
        model.output_kind == OutputKind::BinarySigmoid ? "binary" : "multiclass";
    header["seed"] = model.seed;
    header["nnz_weights"] = nonzero_weight_count(model);
    std::vector<bool> biases;
    for (const auto& layer : model.layers) biases.push_back(layer.has_bias());
    header["has_bias"] = biases;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open for writing: " + path);
    const std::string head = header.dump();
    const std::uint32_t head_len = static_cast<std::uint32_t>(head.size());
    out.write(reinterpret_cast<const char*>(&head_len), sizeof(head_len));
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    for (const auto& layer : model.layers) {
        write_block(out, layer.weights.data);
        write_block(out, layer.bias);
        write_block(out, layer.mask.data);
    }
    for (std::size_t l = 0; l < model.ln_gain.size(); ++l) {
        write_block(out, model.ln_gain[l]);
        write_block(out, model.ln_shift[l]);
    }
    if (!out) throw FormatError("write failed: " + path);
}

MlpModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open: " + path);
    std::uint32_t head_len = 0;
    in.read(reinterpret_cast<char*>(&head_len), sizeof(head_len));
    if (!in || head_len == 0 || head_len > (1u << 20))
        throw FormatError("model checkpoint: bad header length");
    std::string head(head_len, '\0');
    in.read(head.data(), head_len);
    if (!in) throw FormatError("model checkpoint: truncated header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(head);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("model checkpoint: header is not JSON: ") + e.what());
    }
    if (header.value("format", "") != "fpe-model" || header.value("version", 0) != 1)
        throw FormatError("model checkpoint: unknown format or version");

    const std::vector<std::size_t> dims = header.at("dims").get<std::vector<std::size_t>>();
    if (dims.size() < 2) throw FormatError("model checkpoint: bad dims");
    const std::vector<bool> biases = header.at("has_bias").get<std::vector<bool>>();
    if (biases.size() + 1 != dims.size())
        throw FormatError("model checkpoint: has_bias length mismatch");

    MlpModel model;
    model.use_layer_norm = header.at("use_layer_norm").get<bool>();
    model.output_kind = header.at("output_kind").get<std::string>() == "binary"
                            ? OutputKind::BinarySigmoid
                            : OutputKind::MulticlassLogits;
    model.seed = header.value("seed", 0ull);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const std::size_t in_dim = dims[l], out_dim = dims[l + 1];
        MaskedLayer layer;
        layer.weights = Matrix(out_dim, in_dim);
        layer.weights.data = read_block(in, out_dim * in_dim, "weights");
        layer.bias = read_block(in, biases[l] ? out_dim : 0, "bias");
        layer.mask = Matrix(out_dim, in_dim);
        layer.mask.data = read_block(in, out_dim * in_dim, "mask");
        model.layers.push_back(std::move(layer));
    }
    if (model.use_layer_norm) {
        for (std::size_t l = 0; l + 2 < dims.size(); ++l) {
            model.ln_gain.push_back(read_block(in, dims[l + 1], "ln gain"));
            model.ln_shift.push_back(read_block(in, dims[l + 1], "ln shift"));
        }
    }
    if (!masks_consistent(model))
        throw FormatError("model checkpoint: mask/weight consistency violated");
    if (nonzero_weight_count(model) != header.at("nnz_weights").get<std::size_t>())
        throw FormatError("model checkpoint: nnz does not match header");
    return model;
}

}  // namespace fpe
