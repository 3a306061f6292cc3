#include "tdsearch/einsum.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace tds {

namespace {

void collect_extents(std::map<char, std::size_t>& extents, std::string_view subs,
                     const DenseTensor& t) {
    if (subs.size() != t.order()) {
        throw std::invalid_argument("operand order does not match subscript \"" +
                                    std::string(subs) + "\"");
    }
    for (std::size_t k = 0; k < subs.size(); ++k) {
        auto [it, inserted] = extents.emplace(subs[k], t.extent(k));
        if (!inserted && it->second != t.extent(k)) {
            throw std::invalid_argument(std::string("index '") + subs[k] +
                                        "' has conflicting extents");
        }
    }
}

}  // namespace

EinsumSpec EinsumSpec::from_equation(const std::string& equation,
                                     const std::vector<DenseTensor>& operands) {
    const auto arrow = equation.find("->");
    if (arrow == std::string::npos) throw std::invalid_argument("einsum equation missing ->");
    std::vector<std::string> inputs;
    std::string current;
    for (char c : equation.substr(0, arrow)) {
        if (c == ',') {
            inputs.push_back(current);
            current.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            current.push_back(c);
        }
    }
    inputs.push_back(current);
    return from_subscripts(std::move(inputs), equation.substr(arrow + 2), operands);
}

EinsumSpec EinsumSpec::from_subscripts(std::vector<std::string> inputs, std::string output,
                                       const std::vector<DenseTensor>& operands) {
    if (inputs.size() != operands.size()) {
        throw std::invalid_argument("operand count does not match subscripts");
    }
    EinsumSpec spec;
    spec.inputs = std::move(inputs);
    spec.output = std::move(output);
    for (std::size_t i = 0; i < operands.size(); ++i) {
        collect_extents(spec.extents, spec.inputs[i], operands[i]);
    }
    spec.validate();
    return spec;
}

void EinsumSpec::validate() const {
    for (char c : output) {
        bool found = false;
        for (const auto& in : inputs) {
            found = found || in.find(c) != std::string::npos;
        }
        if (!found) {
            throw std::invalid_argument(std::string("output index '") + c +
                                        "' appears in no input");
        }
        if (std::count(output.begin(), output.end(), c) != 1) {
            throw std::invalid_argument("repeated output index");
        }
    }
    for (const auto& in : inputs) {
        for (char c : in) {
            if (!extents.count(c)) {
                throw std::invalid_argument(std::string("index '") + c + "' has no extent");
            }
        }
    }
}

std::string EinsumSpec::equation() const {
    std::string eq;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (i) eq.push_back(',');
        eq += inputs[i];
    }
    eq += "->";
    eq += output;
    return eq;
}

std::size_t EinsumSpec::extent(char letter) const {
    const auto it = extents.find(letter);
    if (it == extents.end()) {
        throw std::invalid_argument(std::string("unknown index '") + letter + "'");
    }
    return it->second;
}

std::vector<std::size_t> EinsumSpec::output_shape() const {
    std::vector<std::size_t> shape;
    shape.reserve(output.size());
    for (char c : output) shape.push_back(extent(c));
    return shape;
}

std::vector<std::size_t> EinsumSpec::input_shape(std::size_t operand) const {
    std::vector<std::size_t> shape;
    for (char c : inputs[operand]) shape.push_back(extent(c));
    return shape;
}

DenseTensor einsum_naive(const EinsumSpec& spec, const std::vector<DenseTensor>& operands) {
    if (spec.inputs.size() != operands.size()) {
        throw std::invalid_argument("einsum operand count mismatch");
    }
    for (std::size_t i = 0; i < operands.size(); ++i) {
        if (operands[i].shape() != spec.input_shape(i)) {
            throw std::invalid_argument("operand " + std::to_string(i) +
                                        " shape does not match subscript");
        }
    }

    // Loop letters: output letters first (in output order), then the summed
    // letters in sorted order.
    std::string letters = spec.output;
    for (const auto& [letter, extent] : spec.extents) {
        if (spec.output.find(letter) == std::string::npos) letters.push_back(letter);
    }

    std::vector<std::size_t> letter_extent(letters.size());
    for (std::size_t k = 0; k < letters.size(); ++k) letter_extent[k] = spec.extent(letters[k]);

    // Per-operand flat stride contributed by each loop letter. Repeated
    // letters within an operand accumulate (diagonal access).
    std::vector<std::vector<std::size_t>> op_stride(operands.size(),
                                                    std::vector<std::size_t>(letters.size(), 0));
    for (std::size_t i = 0; i < operands.size(); ++i) {
        const auto strides = operands[i].strides();
        for (std::size_t axis = 0; axis < spec.inputs[i].size(); ++axis) {
            const auto pos = letters.find(spec.inputs[i][axis]);
            op_stride[i][pos] += strides[axis];
        }
    }

    DenseTensor out(spec.output_shape());
    const std::size_t out_letters = spec.output.size();

    std::vector<std::size_t> idx(letters.size(), 0);
    std::vector<std::size_t> op_flat(operands.size(), 0);
    const std::size_t total = shape_product(letter_extent);
    std::size_t out_flat = 0;
    const auto out_strides = out.strides();

    for (std::size_t step = 0; step < total; ++step) {
        double term = 1.0;
        for (std::size_t i = 0; i < operands.size(); ++i) term *= operands[i][op_flat[i]];
        out[out_flat] += term;

        for (std::size_t k = letters.size(); k-- > 0;) {
            ++idx[k];
            for (std::size_t i = 0; i < operands.size(); ++i) op_flat[i] += op_stride[i][k];
            if (k < out_letters) out_flat += out_strides[k];
            if (idx[k] < letter_extent[k]) break;
            idx[k] = 0;
            for (std::size_t i = 0; i < operands.size(); ++i) {
                op_flat[i] -= op_stride[i][k] * letter_extent[k];
            }
            if (k < out_letters) out_flat -= out_strides[k] * letter_extent[k];
        }
    }
    return out;
}

namespace {

// Sum a tensor over the subscript letters in `drop`, keeping the rest in
// their original order.
DenseTensor sum_out(const DenseTensor& t, std::string& subs, const std::string& drop) {
    if (drop.empty()) return t;
    std::vector<std::size_t> kept, dropped;
    std::string kept_subs;
    for (std::size_t k = 0; k < subs.size(); ++k) {
        if (drop.find(subs[k]) == std::string::npos) {
            kept.push_back(k);
            kept_subs.push_back(subs[k]);
        } else {
            dropped.push_back(k);
        }
    }
    std::vector<std::size_t> order = kept;
    order.insert(order.end(), dropped.begin(), dropped.end());
    DenseTensor moved = permute(t, order);

    std::size_t keep_n = 1, drop_n = 1;
    for (std::size_t k : kept) keep_n *= t.extent(k);
    for (std::size_t k : dropped) drop_n *= t.extent(k);

    std::vector<std::size_t> out_shape;
    for (std::size_t k : kept) out_shape.push_back(t.extent(k));
    if (out_shape.empty()) out_shape = {};
    DenseTensor out = kept.empty() ? DenseTensor() : DenseTensor(out_shape);
    for (std::size_t i = 0; i < keep_n; ++i) {
        double acc = 0.0;
        const double* row = moved.data() + i * drop_n;
        for (std::size_t j = 0; j < drop_n; ++j) acc += row[j];
        out[i] = acc;
    }
    subs = kept_subs;
    return out;
}

}  // namespace

DenseTensor contract_pair(const DenseTensor& a, std::string_view a_subs,
                          const DenseTensor& b, std::string_view b_subs,
                          std::string_view out_subs) {
    if (a_subs.size() != a.order() || b_subs.size() != b.order()) {
        throw std::invalid_argument("contract_pair subscript order mismatch");
    }
    for (std::string_view subs : {a_subs, b_subs}) {
        for (char c : subs) {
            if (std::count(subs.begin(), subs.end(), c) != 1) {
                throw std::invalid_argument("contract_pair: repeated index within one operand");
            }
        }
    }
    std::map<char, std::size_t> extents;
    for (std::size_t k = 0; k < a_subs.size(); ++k) {
        extents.emplace(a_subs[k], a.extent(k));
    }
    for (std::size_t k = 0; k < b_subs.size(); ++k) {
        auto [it, inserted] = extents.emplace(b_subs[k], b.extent(k));
        if (!inserted && it->second != b.extent(k)) {
            throw std::invalid_argument("contract_pair: extent conflict");
        }
    }
    for (char c : out_subs) {
        if (!extents.count(c)) {
            throw std::invalid_argument("contract_pair: output index not in inputs");
        }
    }

    const auto in_a = [&](char c) { return a_subs.find(c) != std::string_view::npos; };
    const auto in_b = [&](char c) { return b_subs.find(c) != std::string_view::npos; };
    const auto in_out = [&](char c) { return out_subs.find(c) != std::string_view::npos; };

    // Letters appearing in only one operand and not in the output are summed
    // out of that operand before the pair contraction.
    std::string a_drop, b_drop;
    for (char c : a_subs) {
        if (!in_b(c) && !in_out(c)) a_drop.push_back(c);
    }
    for (char c : b_subs) {
        if (!in_a(c) && !in_out(c)) b_drop.push_back(c);
    }
    std::string as(a_subs), bs(b_subs);
    DenseTensor ar = sum_out(a, as, a_drop);
    DenseTensor br = sum_out(b, bs, b_drop);

    std::string batch, contract, afree, bfree;
    for (char c : as) {
        if (bs.find(c) != std::string::npos) {
            (in_out(c) ? batch : contract).push_back(c);
        } else {
            afree.push_back(c);
        }
    }
    for (char c : bs) {
        if (as.find(c) == std::string::npos) bfree.push_back(c);
    }

    const auto axis_order = [&](const std::string& subs, const std::string& grouped) {
        std::vector<std::size_t> order;
        for (char c : grouped) order.push_back(subs.find(c));
        return order;
    };
    DenseTensor am = permute(ar, axis_order(as, batch + afree + contract));
    DenseTensor bm = permute(br, axis_order(bs, batch + contract + bfree));

    std::size_t nb = 1, nf = 1, nk = 1, ng = 1;
    for (char c : batch) nb *= extents[c];
    for (char c : afree) nf *= extents[c];
    for (char c : contract) nk *= extents[c];
    for (char c : bfree) ng *= extents[c];

    // Batched (nf x nk) * (nk x ng) with an i-k-j loop.
    std::vector<double> out_data(nb * nf * ng, 0.0);
    for (std::size_t batch_i = 0; batch_i < nb; ++batch_i) {
        const double* ap = am.data() + batch_i * nf * nk;
        const double* bp = bm.data() + batch_i * nk * ng;
        double* op = out_data.data() + batch_i * nf * ng;
        for (std::size_t i = 0; i < nf; ++i) {
            for (std::size_t k = 0; k < nk; ++k) {
                const double av = ap[i * nk + k];
                if (av == 0.0) continue;
                const double* brow = bp + k * ng;
                double* orow = op + i * ng;
                for (std::size_t j = 0; j < ng; ++j) orow[j] += av * brow[j];
            }
        }
    }

    const std::string grouped = batch + afree + bfree;
    std::vector<std::size_t> grouped_shape;
    for (char c : grouped) grouped_shape.push_back(extents[c]);
    if (grouped.empty()) return DenseTensor::scalar(out_data[0]);

    DenseTensor grouped_tensor(grouped_shape, std::move(out_data));
    std::vector<std::size_t> to_out;
    for (char c : out_subs) to_out.push_back(grouped.find(c));
    return permute(grouped_tensor, to_out);
}

}  // namespace tds
