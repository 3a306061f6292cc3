#include "tdsearch/distill.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tds {

namespace {

void check_same_shape(const DenseTensor& a, const DenseTensor& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw std::invalid_argument(std::string(what) + ": shape mismatch");
    }
}

std::size_t row_count(const DenseTensor& t) {
    return t.order() == 0 ? 1 : t.extent(0);
}

std::size_t row_width(const DenseTensor& t) {
    return t.size() / row_count(t);
}

}  // namespace

double cos_embed_loss(const DenseTensor& a, const DenseTensor& b) {
    check_same_shape(a, b, "cos_embed_loss");
    const std::size_t rows = row_count(a);
    const std::size_t width = row_width(a);
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* pa = a.data() + r * width;
        const double* pb = b.data() + r * width;
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (std::size_t k = 0; k < width; ++k) {
            dot += pa[k] * pb[k];
            na += pa[k] * pa[k];
            nb += pb[k] * pb[k];
        }
        if (na == 0.0 || nb == 0.0) {
            total += 1.0;
        } else {
            total += 1.0 - dot / std::sqrt(na * nb);
        }
    }
    return total / static_cast<double>(rows);
}

DenseTensor cos_embed_loss_grad(const DenseTensor& a, const DenseTensor& b) {
    check_same_shape(a, b, "cos_embed_loss_grad");
    const std::size_t rows = row_count(a);
    const std::size_t width = row_width(a);
    DenseTensor grad(b.shape());
    const double inv_rows = 1.0 / static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* pa = a.data() + r * width;
        const double* pb = b.data() + r * width;
        double* pg = grad.data() + r * width;
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (std::size_t k = 0; k < width; ++k) {
            dot += pa[k] * pb[k];
            na += pa[k] * pa[k];
            nb += pb[k] * pb[k];
        }
        if (na == 0.0 || nb == 0.0) continue;  // flat region, zero gradient
        const double norm_a = std::sqrt(na);
        const double norm_b = std::sqrt(nb);
        // d(1 - cos)/db = -a/(|a||b|) + (a.b) b / (|a| |b|^3)
        const double c1 = -1.0 / (norm_a * norm_b);
        const double c2 = dot / (norm_a * norm_b * nb);
        for (std::size_t k = 0; k < width; ++k) {
            pg[k] = inv_rows * (c1 * pa[k] + c2 * pb[k]);
        }
    }
    return grad;
}

namespace {

// Row-wise stable softmax of logits/tau.
std::vector<double> softmax_row(const double* logits, std::size_t n, double tau) {
    std::vector<double> p(n);
    double peak = logits[0];
    for (std::size_t k = 1; k < n; ++k) peak = std::max(peak, logits[k]);
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        p[k] = std::exp((logits[k] - peak) / tau);
        total += p[k];
    }
    for (std::size_t k = 0; k < n; ++k) p[k] /= total;
    return p;
}

std::size_t argmax_row(const double* logits, std::size_t n) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < n; ++k) {
        if (logits[k] > logits[best]) best = k;
    }
    return best;
}

}  // namespace

double logit_loss(const DenseTensor& y_s, const DenseTensor& y_t, double tau) {
    check_same_shape(y_s, y_t, "logit_loss");
    if (tau <= 0.0) throw std::invalid_argument("temperature must be positive");
    const std::size_t rows = row_count(y_s);
    const std::size_t classes = row_width(y_s);
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* ps = y_s.data() + r * classes;
        const double* pt = y_t.data() + r * classes;
        const auto soft_s = softmax_row(ps, classes, tau);
        const auto soft_t = softmax_row(pt, classes, tau);
        double kl = 0.0;
        for (std::size_t k = 0; k < classes; ++k) {
            if (soft_t[k] > 0.0) kl += soft_t[k] * (std::log(soft_t[k]) - std::log(soft_s[k]));
        }
        const auto hard_s = softmax_row(ps, classes, 1.0);
        const std::size_t label = argmax_row(pt, classes);
        const double ce = -std::log(std::max(hard_s[label], 1e-300));
        total += 0.5 * kl + 0.5 * ce;
    }
    return total / static_cast<double>(rows);
}

DenseTensor logit_loss_grad(const DenseTensor& y_s, const DenseTensor& y_t, double tau) {
    check_same_shape(y_s, y_t, "logit_loss_grad");
    const std::size_t rows = row_count(y_s);
    const std::size_t classes = row_width(y_s);
    DenseTensor grad(y_s.shape());
    const double inv_rows = 1.0 / static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* ps = y_s.data() + r * classes;
        const double* pt = y_t.data() + r * classes;
        double* pg = grad.data() + r * classes;
        const auto soft_s = softmax_row(ps, classes, tau);
        const auto soft_t = softmax_row(pt, classes, tau);
        const auto hard_s = softmax_row(ps, classes, 1.0);
        const std::size_t label = argmax_row(pt, classes);
        for (std::size_t k = 0; k < classes; ++k) {
            const double kl_term = (soft_s[k] - soft_t[k]) / tau;
            const double ce_term = hard_s[k] - (k == label ? 1.0 : 0.0);
            pg[k] = inv_rows * 0.5 * (kl_term + ce_term);
        }
    }
    return grad;
}

double cross_entropy_loss(const DenseTensor& logits, std::span<const std::size_t> labels) {
    const std::size_t rows = row_count(logits);
    const std::size_t classes = row_width(logits);
    if (labels.size() != rows) throw std::invalid_argument("cross_entropy: label count");
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        const auto p = softmax_row(logits.data() + r * classes, classes, 1.0);
        total += -std::log(std::max(p[labels[r]], 1e-300));
    }
    return total / static_cast<double>(rows);
}

DenseTensor cross_entropy_grad(const DenseTensor& logits, std::span<const std::size_t> labels) {
    const std::size_t rows = row_count(logits);
    const std::size_t classes = row_width(logits);
    DenseTensor grad(logits.shape());
    const double inv_rows = 1.0 / static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const auto p = softmax_row(logits.data() + r * classes, classes, 1.0);
        double* pg = grad.data() + r * classes;
        for (std::size_t k = 0; k < classes; ++k) {
            pg[k] = inv_rows * (p[k] - (k == labels[r] ? 1.0 : 0.0));
        }
    }
    return grad;
}

namespace {

struct LayerSpec {
    EinsumSpec spec;
    std::vector<DenseTensor> operands;       // operand 0 = tensorized x
    std::vector<std::ptrdiff_t> core_index;  // -1 for x, else index into f.cores
};

LayerSpec layer_einsum(const FactorizedLinear& f, const DenseTensor& x) {
    if (x.order() != 2 || x.extent(1) != f.shape.rows()) {
        throw std::invalid_argument("layer input must be (batch, rows)");
    }
    const std::size_t batch = x.extent(0);
    LayerEinsum le = build_einsum(f, batch);

    LayerSpec ls;
    ls.spec = le.spec;
    ls.operands = std::move(le.operands);
    ls.core_index = std::move(le.core_index);

    std::vector<std::size_t> x_shape{batch};
    for (std::size_t e : f.shape.row_factors) x_shape.push_back(e);
    ls.operands[0] = reshape(x, x_shape);
    return ls;
}

}  // namespace

DenseTensor layer_forward(const FactorizedLinear& f, const DenseTensor& x) {
    LayerSpec ls = layer_einsum(f, x);
    DenseTensor y = einsum_apply(ls.spec, ls.operands);
    if (f.scale != 1.0) {
        for (double& v : y.values()) v *= f.scale;
    }
    return reshape(y, {x.extent(0), f.shape.cols()});
}

LayerGrads layer_backward(const FactorizedLinear& f, const DenseTensor& x,
                          const DenseTensor& upstream) {
    if (upstream.order() != 2 || upstream.extent(0) != x.extent(0) ||
        upstream.extent(1) != f.shape.cols()) {
        throw std::invalid_argument("upstream gradient must be (batch, cols)");
    }
    LayerSpec ls = layer_einsum(f, x);
    const DenseTensor g = reshape(upstream, ls.spec.output_shape());

    LayerGrads grads;
    grads.core_grads.resize(f.cores.size());

    for (std::size_t k = 0; k < ls.operands.size(); ++k) {
        std::vector<std::string> inputs;
        std::vector<DenseTensor> operands;
        for (std::size_t j = 0; j < ls.operands.size(); ++j) {
            if (j == k) continue;
            inputs.push_back(ls.spec.inputs[j]);
            operands.push_back(ls.operands[j]);
        }
        inputs.push_back(ls.spec.output);
        operands.push_back(g);
        const EinsumSpec grad_spec =
            EinsumSpec::from_subscripts(std::move(inputs), ls.spec.inputs[k], operands);
        DenseTensor grad = einsum_apply(grad_spec, operands);
        if (f.scale != 1.0) {
            for (double& v : grad.values()) v *= f.scale;
        }
        if (ls.core_index[k] < 0) {
            grads.input_grad = reshape(grad, {x.extent(0), f.shape.rows()});
        } else {
            const auto core = static_cast<std::size_t>(ls.core_index[k]);
            grads.core_grads[core] = reshape(grad, f.cores[core].shape());
        }
    }
    return grads;
}

ClusterTask make_cluster_task(const ClusterTaskConfig& config) {
    if (config.classes < 2) throw std::invalid_argument("need at least 2 classes");
    Rng rng = make_rng(derive_seed(config.seed, 0x7a5c));

    std::vector<std::vector<double>> means(config.classes, std::vector<double>(config.dim));
    for (auto& mean : means) {
        double norm = 0.0;
        for (double& v : mean) {
            v = normal(rng);
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (double& v : mean) v = config.separation * v / (norm > 0 ? norm : 1.0);
    }

    const auto fill = [&](std::size_t count) {
        Dataset data;
        data.inputs = DenseTensor({count, config.dim});
        data.labels.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t label = i % config.classes;
            data.labels[i] = label;
            double* row = data.inputs.data() + i * config.dim;
            for (std::size_t k = 0; k < config.dim; ++k) {
                row[k] = means[label][k] + config.noise * normal(rng);
            }
        }
        return data;
    };
    ClusterTask task;
    task.train = fill(config.train_count);
    task.test = fill(config.test_count);
    return task;
}

ToyNet make_dense_net(std::span<const std::size_t> layer_dims, std::size_t classes,
                      std::uint64_t seed) {
    if (layer_dims.size() < 2) throw std::invalid_argument("need at least one hidden layer");
    Rng rng = make_rng(derive_seed(seed, 0x9d6e));
    ToyNet net;
    for (std::size_t i = 0; i + 1 < layer_dims.size(); ++i) {
        ToyNet::Layer layer;
        layer.dense = random_normal({layer_dims[i], layer_dims[i + 1]}, rng,
                                    1.0 / std::sqrt(static_cast<double>(layer_dims[i])));
        net.hidden.push_back(std::move(layer));
    }
    net.head = random_normal({layer_dims.back(), classes}, rng,
                             1.0 / std::sqrt(static_cast<double>(layer_dims.back())));
    return net;
}

ToyNet factorize_net(const ToyNet& teacher, Format format,
                     const std::vector<TensorizationShape>& shapes,
                     const std::vector<RankSpec>& ranks, const ProjectOptions& options) {
    if (shapes.size() != teacher.hidden.size() || ranks.size() != teacher.hidden.size()) {
        throw std::invalid_argument("factorize_net: one shape and rank per hidden layer");
    }
    ToyNet student;
    student.head = teacher.head;
    for (std::size_t l = 0; l < teacher.hidden.size(); ++l) {
        if (teacher.hidden[l].factorized) {
            throw std::invalid_argument("factorize_net expects a dense teacher");
        }
        ToyNet::Layer layer;
        layer.factorized = true;
        layer.factor = project(teacher.hidden[l].dense, format, shapes[l], ranks[l], options)
                           .factorized;
        student.hidden.push_back(std::move(layer));
    }
    return student;
}

namespace {

DenseTensor dense_forward(const DenseTensor& w, const DenseTensor& x) {
    return contract_pair(x, "bi", w, "io", "bo");
}

DenseTensor tanh_of(const DenseTensor& z) {
    DenseTensor h = z;
    for (double& v : h.values()) v = std::tanh(v);
    return h;
}

}  // namespace

ForwardTrace net_forward(const ToyNet& net, const DenseTensor& x) {
    ForwardTrace trace;
    DenseTensor h = x;
    for (const auto& layer : net.hidden) {
        DenseTensor z = layer.factorized ? layer_forward(layer.factor, h)
                                         : dense_forward(layer.dense, h);
        trace.pre.push_back(z);
        h = tanh_of(z);
        trace.post.push_back(h);
    }
    trace.logits = dense_forward(net.head, h);
    return trace;
}

double net_accuracy(const ToyNet& net, const Dataset& data) {
    const ForwardTrace trace = net_forward(net, data.inputs);
    const std::size_t classes = trace.logits.extent(1);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.count(); ++i) {
        if (argmax_row(trace.logits.data() + i * classes, classes) == data.labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.count());
}

namespace {

struct NetGrads {
    std::vector<LayerGrads> factor;      // per hidden layer (unused slots empty)
    std::vector<DenseTensor> dense;      // per hidden layer
    DenseTensor head;
};

// Backpropagate: dlogits plus optional per-layer extra gradients on the
// pre-activation (dz) and post-activation (dh) signals.
NetGrads net_backward(const ToyNet& net, const DenseTensor& x, const ForwardTrace& trace,
                      const DenseTensor& dlogits, const std::vector<DenseTensor>* dz_extra,
                      const std::vector<DenseTensor>* dh_extra) {
    NetGrads grads;
    grads.factor.resize(net.hidden.size());
    grads.dense.resize(net.hidden.size());

    const DenseTensor& last_h = trace.post.back();
    grads.head = contract_pair(last_h, "bi", dlogits, "bo", "io");
    DenseTensor g_h = contract_pair(dlogits, "bo", net.head, "io", "bi");

    for (std::size_t l = net.hidden.size(); l-- > 0;) {
        if (dh_extra && (*dh_extra)[l].shape() == g_h.shape()) {
            for (std::size_t i = 0; i < g_h.size(); ++i) g_h[i] += (*dh_extra)[l][i];
        }
        // dL/dz = dL/dh * (1 - h^2) + direct dz terms
        DenseTensor g_z = g_h;
        const DenseTensor& h = trace.post[l];
        for (std::size_t i = 0; i < g_z.size(); ++i) g_z[i] *= 1.0 - h[i] * h[i];
        if (dz_extra && (*dz_extra)[l].shape() == g_z.shape()) {
            for (std::size_t i = 0; i < g_z.size(); ++i) g_z[i] += (*dz_extra)[l][i];
        }

        const DenseTensor& input = l == 0 ? x : trace.post[l - 1];
        if (net.hidden[l].factorized) {
            grads.factor[l] = layer_backward(net.hidden[l].factor, input, g_z);
            g_h = grads.factor[l].input_grad;
        } else {
            grads.dense[l] = contract_pair(input, "bi", g_z, "bo", "io");
            g_h = contract_pair(g_z, "bo", net.hidden[l].dense, "io", "bi");
        }
    }
    return grads;
}

void apply_grads(ToyNet& net, const NetGrads& grads, double lr) {
    for (std::size_t l = 0; l < net.hidden.size(); ++l) {
        if (net.hidden[l].factorized) {
            auto& cores = net.hidden[l].factor.cores;
            for (std::size_t c = 0; c < cores.size(); ++c) {
                const DenseTensor& g = grads.factor[l].core_grads[c];
                for (std::size_t i = 0; i < cores[c].size(); ++i) {
                    cores[c][i] -= lr * g[i];
                }
            }
        } else {
            auto& w = net.hidden[l].dense;
            for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * grads.dense[l][i];
        }
    }
    for (std::size_t i = 0; i < net.head.size(); ++i) net.head[i] -= lr * grads.head[i];
}

DenseTensor gather_rows(const DenseTensor& inputs, std::span<const std::size_t> rows) {
    const std::size_t dim = inputs.extent(1);
    DenseTensor out({rows.size(), dim});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::copy_n(inputs.data() + rows[i] * dim, dim, out.data() + i * dim);
    }
    return out;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t count, std::size_t batch_size,
                                                   Rng& rng) {
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = count; i > 1; --i) {
        std::swap(order[i - 1], order[uniform_below(rng, i)]);
    }
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t at = 0; at < count; at += batch_size) {
        const std::size_t end = std::min(count, at + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(at),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

void check_finite(double loss, const char* stage) {
    if (!std::isfinite(loss)) {
        throw std::runtime_error(std::string(stage) + ": training diverged (non-finite loss)");
    }
}

}  // namespace

TrainResult train_two_stage(const ToyNet& teacher, ToyNet student, const Dataset& data,
                            const DistillConfig& config) {
    if (config.temperature <= 0.0) throw std::invalid_argument("temperature must be positive");
    if (teacher.hidden.size() != student.hidden.size()) {
        throw std::invalid_argument("teacher/student topology mismatch");
    }
    TrainResult result;
    Rng rng = make_rng(derive_seed(config.seed, 0x57a9e));

    // Stage 1: layer-wise alignment of pre- and post-activation signals.
    for (std::size_t epoch = 0; epoch < config.stage1_epochs; ++epoch) {
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (const auto& batch : make_batches(data.count(), config.batch_size, rng)) {
            const DenseTensor x = gather_rows(data.inputs, batch);
            const ForwardTrace t_trace = net_forward(teacher, x);
            const ForwardTrace s_trace = net_forward(student, x);

            double loss = 0.0;
            std::vector<DenseTensor> dz(student.hidden.size()), dh(student.hidden.size());
            for (std::size_t l = 0; l < student.hidden.size(); ++l) {
                loss += cos_embed_loss(t_trace.pre[l], s_trace.pre[l]) +
                        cos_embed_loss(t_trace.post[l], s_trace.post[l]);
                dz[l] = cos_embed_loss_grad(t_trace.pre[l], s_trace.pre[l]);
                dh[l] = cos_embed_loss_grad(t_trace.post[l], s_trace.post[l]);
            }
            check_finite(loss, "stage1");
            const DenseTensor dlogits(
                std::vector<std::size_t>{x.extent(0), s_trace.logits.extent(1)});
            const NetGrads grads = net_backward(student, x, s_trace, dlogits, &dz, &dh);
            apply_grads(student, grads, config.learning_rate);
            epoch_loss += loss;
            ++batches;
        }
        result.stage1_curve.push_back(epoch_loss / static_cast<double>(batches));
    }

    // Stage 2: last-layer logit distillation only.
    for (std::size_t epoch = 0; epoch < config.stage2_epochs; ++epoch) {
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (const auto& batch : make_batches(data.count(), config.batch_size, rng)) {
            const DenseTensor x = gather_rows(data.inputs, batch);
            const ForwardTrace t_trace = net_forward(teacher, x);
            const ForwardTrace s_trace = net_forward(student, x);
            const double loss = logit_loss(s_trace.logits, t_trace.logits, config.temperature);
            check_finite(loss, "stage2");
            const DenseTensor dlogits =
                logit_loss_grad(s_trace.logits, t_trace.logits, config.temperature);
            const NetGrads grads = net_backward(student, x, s_trace, dlogits, nullptr, nullptr);
            apply_grads(student, grads, config.learning_rate);
            epoch_loss += loss;
            ++batches;
        }
        result.stage2_curve.push_back(epoch_loss / static_cast<double>(batches));
    }

    result.net = std::move(student);
    return result;
}

TrainResult train_finetune(ToyNet net, const Dataset& data, std::size_t epochs,
                           double learning_rate, std::size_t batch_size, std::uint64_t seed) {
    TrainResult result;
    Rng rng = make_rng(derive_seed(seed, 0xf17e));
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (const auto& batch : make_batches(data.count(), batch_size, rng)) {
            const DenseTensor x = gather_rows(data.inputs, batch);
            std::vector<std::size_t> labels;
            labels.reserve(batch.size());
            for (std::size_t row : batch) labels.push_back(data.labels[row]);

            const ForwardTrace trace = net_forward(net, x);
            const double loss = cross_entropy_loss(trace.logits, labels);
            check_finite(loss, "finetune");
            const DenseTensor dlogits = cross_entropy_grad(trace.logits, labels);
            const NetGrads grads = net_backward(net, x, trace, dlogits, nullptr, nullptr);
            apply_grads(net, grads, learning_rate);
            epoch_loss += loss;
            ++batches;
        }
        result.stage2_curve.push_back(epoch_loss / static_cast<double>(batches));
    }
    result.net = std::move(net);
    return result;
}

}  // namespace tds
