#include "tdsearch/contraction.hpp"

#include <algorithm>
#include <bit>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace tds {

namespace {

constexpr std::size_t kMaxExactOperands = 8;

struct LetterTable {
    std::string letters;                   // distinct letters, sorted
    std::vector<std::uint64_t> extents;    // per letter

    std::size_t index(char c) const { return letters.find(c); }

    std::uint32_t mask_of(std::string_view subs) const {
        std::uint32_t m = 0;
        for (char c : subs) m |= 1u << index(c);
        return m;
    }

    std::string subs_of(std::uint32_t mask) const {
        std::string s;
        for (std::size_t k = 0; k < letters.size(); ++k) {
            if (mask & (1u << k)) s.push_back(letters[k]);
        }
        return s;
    }

    std::uint64_t size_of(std::uint32_t mask) const {
        std::uint64_t n = 1;
        for (std::size_t k = 0; k < letters.size(); ++k) {
            if (mask & (1u << k)) n *= extents[k];
        }
        return n;
    }
};

LetterTable make_letter_table(const EinsumSpec& spec) {
    LetterTable table;
    for (const auto& [letter, extent] : spec.extents) {
        table.letters.push_back(letter);
        table.extents.push_back(extent);
    }
    if (table.letters.size() > 26) {
        throw std::invalid_argument("too many distinct indices (>26)");
    }
    return table;
}

struct PlanBuilder {
    const EinsumSpec& spec;
    LetterTable table;
    std::vector<std::uint32_t> operand_mask;  // full letters per operand
    std::uint32_t output_mask = 0;

    explicit PlanBuilder(const EinsumSpec& s) : spec(s), table(make_letter_table(s)) {
        for (const auto& in : s.inputs) {
            for (char c : in) {
                if (std::count(in.begin(), in.end(), c) != 1) {
                    throw std::invalid_argument(
                        "contraction planning requires distinct indices per operand");
                }
            }
            operand_mask.push_back(table.mask_of(in));
        }
        output_mask = table.mask_of(s.output);
    }

    std::uint32_t letters_in(std::uint64_t set) const {
        std::uint32_t m = 0;
        for (std::size_t i = 0; i < operand_mask.size(); ++i) {
            if (set & (std::uint64_t{1} << i)) m |= operand_mask[i];
        }
        return m;
    }

    // Letters the contraction of `set` must keep: those also needed by
    // operands outside the set or by the final output.
    std::uint32_t out_mask(std::uint64_t set) const {
        const std::uint64_t all = (std::uint64_t{1} << operand_mask.size()) - 1;
        return letters_in(set) & (letters_in(all & ~set) | output_mask);
    }

    ContractionPlan start_plan() const {
        ContractionPlan plan;
        plan.spec = spec;
        for (std::size_t i = 0; i < spec.inputs.size(); ++i) {
            PlanLeaf leaf;
            leaf.subs = spec.inputs[i];
            leaf.operand = static_cast<std::ptrdiff_t>(i);
            plan.leaves.push_back(std::move(leaf));
        }
        return plan;
    }

    // Append the node contracting ids (left,right) with operand subscripts
    // (ls,rs) into out_subs; returns the node's operand id.
    std::size_t emit(ContractionPlan& plan, std::size_t left, std::size_t right,
                     const std::string& ls, const std::string& rs,
                     const std::string& out_subs) const {
        PlanNode node;
        node.left = left;
        node.right = right;
        node.left_subs = ls;
        node.right_subs = rs;
        node.out_subs = out_subs;
        for (char c : out_subs) node.out_extents.push_back(spec.extent(c));
        const std::uint32_t lm = table.mask_of(ls);
        const std::uint32_t rm = table.mask_of(rs);
        const std::uint32_t om = table.mask_of(out_subs);
        node.mac_count = table.size_of(lm | rm);
        node.summed_extent = table.size_of((lm | rm) & ~om);
        node.is_contracting =
            table.size_of(om) <= std::max(table.size_of(lm), table.size_of(rm));
        plan.nodes.push_back(std::move(node));
        plan.total_macs += plan.nodes.back().mac_count;
        return plan.leaves.size() + plan.nodes.size() - 1;
    }
};

int popcount64(std::uint64_t v) {
    int n = 0;
    while (v) {
        v &= v - 1;
        ++n;
    }
    return n;
}

ContractionPlan exact_plan(const PlanBuilder& builder) {
    const std::size_t n = builder.operand_mask.size();
    const std::uint64_t full = (std::uint64_t{1} << n) - 1;

    struct Best {
        std::uint64_t macs = std::numeric_limits<std::uint64_t>::max();
        std::uint64_t max_intermediate = std::numeric_limits<std::uint64_t>::max();
        std::uint64_t left = 0, right = 0;
    };
    std::vector<Best> best(full + 1);
    for (std::size_t i = 0; i < n; ++i) {
        best[std::uint64_t{1} << i] = {0, 0, 0, 0};
    }

    for (std::uint64_t set = 1; set <= full; ++set) {
        if (popcount64(set) < 2) continue;
        const std::uint64_t low = set & (~set + 1);
        const std::uint32_t out = builder.out_mask(set);
        const std::uint64_t out_size = builder.table.size_of(out);
        Best& slot = best[set];
        // Enumerate splits with the lowest operand on the left.
        for (std::uint64_t left = (set - 1) & set; left; left = (left - 1) & set) {
            if (!(left & low)) continue;
            const std::uint64_t right = set & ~left;
            const Best& lb = best[left];
            const Best& rb = best[right];
            const std::uint32_t left_subs_mask =
                popcount64(left) == 1 ? builder.operand_mask[std::countr_zero(left)]
                                      : builder.out_mask(left);
            const std::uint32_t right_subs_mask =
                popcount64(right) == 1 ? builder.operand_mask[std::countr_zero(right)]
                                       : builder.out_mask(right);
            const std::uint64_t node_macs = builder.table.size_of(left_subs_mask | right_subs_mask);
            const std::uint64_t macs = lb.macs + rb.macs + node_macs;
            const std::uint64_t max_inter =
                std::max({lb.max_intermediate, rb.max_intermediate, out_size});
            if (macs < slot.macs ||
                (macs == slot.macs && max_inter < slot.max_intermediate)) {
                slot = {macs, max_inter, left, right};
            }
        }
    }

    ContractionPlan plan = builder.start_plan();
    // Bottom-up emission.
    struct Frame {
        std::uint64_t set;
        std::size_t id = 0;
        std::string subs;
    };
    const std::function<Frame(std::uint64_t)> emit_set = [&](std::uint64_t set) -> Frame {
        if (popcount64(set) == 1) {
            const std::size_t op = static_cast<std::size_t>(std::countr_zero(set));
            return {set, op, builder.spec.inputs[op]};
        }
        const Best& b = best[set];
        Frame lf = emit_set(b.left);
        Frame rf = emit_set(b.right);
        const std::string out_subs = set == full
                                         ? builder.spec.output
                                         : builder.table.subs_of(builder.out_mask(set));
        const std::size_t id = builder.emit(plan, lf.id, rf.id, lf.subs, rf.subs, out_subs);
        return {set, id, out_subs};
    };
    emit_set(full);
    plan.dynamic_macs = plan.total_macs;
    return plan;
}

ContractionPlan greedy_plan(const PlanBuilder& builder) {
    const std::size_t n = builder.operand_mask.size();
    ContractionPlan plan = builder.start_plan();
    plan.mac_optimal = false;

    struct Item {
        std::size_t id;
        std::string subs;
        std::uint32_t mask;
    };
    std::vector<Item> items;
    for (std::size_t i = 0; i < n; ++i) {
        items.push_back({i, builder.spec.inputs[i], builder.operand_mask[i]});
    }

    while (items.size() > 1) {
        std::uint32_t others_all = 0;
        for (const auto& item : items) others_all |= item.mask;

        std::size_t best_i = 0, best_j = 1;
        std::uint64_t best_out = std::numeric_limits<std::uint64_t>::max();
        std::uint64_t best_macs = best_out;
        std::uint32_t best_out_mask = 0;
        for (std::size_t i = 0; i < items.size(); ++i) {
            for (std::size_t j = i + 1; j < items.size(); ++j) {
                std::uint32_t rest = builder.output_mask;
                for (std::size_t k = 0; k < items.size(); ++k) {
                    if (k != i && k != j) rest |= items[k].mask;
                }
                const std::uint32_t pair = items[i].mask | items[j].mask;
                const std::uint32_t out = pair & rest;
                const std::uint64_t out_size = builder.table.size_of(out);
                const std::uint64_t macs = builder.table.size_of(pair);
                if (out_size < best_out || (out_size == best_out && macs < best_macs)) {
                    best_i = i;
                    best_j = j;
                    best_out = out_size;
                    best_macs = macs;
                    best_out_mask = out;
                }
            }
        }
        const bool last = items.size() == 2;
        const std::string out_subs =
            last ? builder.spec.output : builder.table.subs_of(best_out_mask);
        const std::size_t id = builder.emit(plan, items[best_i].id, items[best_j].id,
                                            items[best_i].subs, items[best_j].subs, out_subs);
        items[best_i] = {id, out_subs, builder.table.mask_of(out_subs)};
        items.erase(items.begin() + static_cast<std::ptrdiff_t>(best_j));
    }
    plan.dynamic_macs = plan.total_macs;
    return plan;
}

}  // namespace

std::string mem_type_name(MemType t) {
    switch (t) {
        case MemType::unset: return "unset";
        case MemType::type1: return "Type1";
        case MemType::type2: return "Type2";
        case MemType::type3: return "Type3";
        case MemType::type4: return "Type4";
    }
    return "?";
}

ContractionPlan optimal_path(const EinsumSpec& spec) {
    spec.validate();
    if (spec.inputs.size() < 2) {
        throw std::invalid_argument("contraction paths need at least 2 operands");
    }
    PlanBuilder builder(spec);
    if (spec.inputs.size() <= kMaxExactOperands) return exact_plan(builder);
    return greedy_plan(builder);
}

ContractionPlan naive_path(const EinsumSpec& spec) {
    spec.validate();
    if (spec.inputs.size() < 2) {
        throw std::invalid_argument("contraction paths need at least 2 operands");
    }
    PlanBuilder builder(spec);
    ContractionPlan plan = builder.start_plan();
    const std::size_t n = spec.inputs.size();

    std::size_t acc_id = 0;
    std::string acc_subs = spec.inputs[0];
    for (std::size_t k = 1; k < n; ++k) {
        std::uint64_t set = 0;
        for (std::size_t i = 0; i <= k; ++i) set |= std::uint64_t{1} << i;
        const std::string out_subs =
            k + 1 == n ? spec.output : builder.table.subs_of(builder.out_mask(set));
        acc_id = builder.emit(plan, acc_id, k, acc_subs, spec.inputs[k], out_subs);
        acc_subs = out_subs;
    }
    plan.dynamic_macs = plan.total_macs;
    return plan;
}

void set_staticness(ContractionPlan& plan, const std::vector<bool>& leaf_static) {
    if (leaf_static.size() != plan.leaves.size()) {
        throw std::invalid_argument("staticness flags do not match leaf count");
    }
    for (std::size_t i = 0; i < plan.leaves.size(); ++i) {
        plan.leaves[i].is_static = leaf_static[i];
    }
    const auto id_static = [&](std::size_t id) {
        return id < plan.leaves.size() ? plan.leaves[id].is_static
                                       : plan.nodes[id - plan.leaves.size()].is_static;
    };
    for (auto& node : plan.nodes) {
        node.is_static = id_static(node.left) && id_static(node.right);
    }
}

namespace {

DenseTensor resolve_leaf(const ContractionPlan& plan, std::size_t leaf,
                         const std::vector<DenseTensor>& operands) {
    const PlanLeaf& l = plan.leaves[leaf];
    if (l.operand < 0) return l.constant;
    const auto idx = static_cast<std::size_t>(l.operand);
    if (idx >= operands.size()) throw std::invalid_argument("missing plan operand");
    return operands[idx];
}

DenseTensor evaluate_id(const ContractionPlan& plan, std::size_t id,
                        const std::vector<DenseTensor>& operands,
                        std::vector<DenseTensor>& node_values,
                        std::vector<bool>& computed) {
    if (id < plan.leaves.size()) return resolve_leaf(plan, id, operands);
    const std::size_t node_idx = id - plan.leaves.size();
    if (computed[node_idx]) return node_values[node_idx];
    const PlanNode& node = plan.nodes[node_idx];
    DenseTensor left = evaluate_id(plan, node.left, operands, node_values, computed);
    DenseTensor right = evaluate_id(plan, node.right, operands, node_values, computed);
    node_values[node_idx] =
        contract_pair(left, node.left_subs, right, node.right_subs, node.out_subs);
    computed[node_idx] = true;
    return node_values[node_idx];
}

}  // namespace

ContractionPlan fold_static(const ContractionPlan& plan, const std::vector<bool>& leaf_static,
                            const std::vector<DenseTensor>& operands) {
    ContractionPlan marked = plan;
    set_staticness(marked, leaf_static);

    const std::size_t leaf_count = marked.leaves.size();
    // Fold roots: static nodes whose parent is dynamic (or that are the root).
    std::vector<bool> is_fold_root(marked.nodes.size(), false);
    std::vector<bool> has_parent_static(leaf_count + marked.nodes.size(), false);
    for (const auto& node : marked.nodes) {
        if (node.is_static) {
            has_parent_static[node.left] = true;
            has_parent_static[node.right] = true;
        }
    }
    for (std::size_t i = 0; i < marked.nodes.size(); ++i) {
        is_fold_root[i] = marked.nodes[i].is_static && !has_parent_static[leaf_count + i];
    }

    std::vector<DenseTensor> node_values(marked.nodes.size());
    std::vector<bool> computed(marked.nodes.size(), false);

    ContractionPlan folded;
    folded.spec = marked.spec;
    folded.total_macs = marked.total_macs;
    folded.mac_optimal = marked.mac_optimal;

    std::vector<std::size_t> remap(leaf_count + marked.nodes.size(),
                                   std::numeric_limits<std::size_t>::max());
    // Leaves outside folded subtrees survive unchanged.
    for (std::size_t i = 0; i < leaf_count; ++i) {
        if (has_parent_static[i]) continue;
        remap[i] = folded.leaves.size();
        folded.leaves.push_back(marked.leaves[i]);
    }
    // Each fold root becomes one precomputed constant leaf.
    for (std::size_t i = 0; i < marked.nodes.size(); ++i) {
        if (!is_fold_root[i]) continue;
        PlanLeaf leaf;
        leaf.subs = marked.nodes[i].out_subs;
        leaf.is_static = true;
        leaf.operand = -1;
        leaf.constant =
            evaluate_id(marked, leaf_count + i, operands, node_values, computed);
        remap[leaf_count + i] = folded.leaves.size();
        folded.leaves.push_back(std::move(leaf));
    }
    for (std::size_t i = 0; i < marked.nodes.size(); ++i) {
        const PlanNode& node = marked.nodes[i];
        if (node.is_static) continue;
        PlanNode copy = node;
        copy.left = remap[node.left];
        copy.right = remap[node.right];
        if (copy.left == std::numeric_limits<std::size_t>::max() ||
            copy.right == std::numeric_limits<std::size_t>::max()) {
            throw std::logic_error("fold_static: operand folded away unexpectedly");
        }
        remap[leaf_count + i] = folded.leaves.size() + folded.nodes.size();
        folded.dynamic_macs += copy.mac_count;
        folded.nodes.push_back(std::move(copy));
    }
    return folded;
}

DenseTensor execute_plan(const ContractionPlan& plan, const std::vector<DenseTensor>& operands) {
    if (operands.size() != plan.spec.inputs.size()) {
        throw std::invalid_argument("execute_plan operand count mismatch");
    }
    for (const auto& leaf : plan.leaves) {
        if (leaf.operand < 0) continue;
        const auto idx = static_cast<std::size_t>(leaf.operand);
        if (operands[idx].shape() != plan.spec.input_shape(idx)) {
            throw std::invalid_argument("execute_plan operand shape mismatch");
        }
    }
    if (plan.nodes.empty()) {
        if (plan.leaves.size() != 1) {
            throw std::invalid_argument("plan without nodes must have one leaf");
        }
        return resolve_leaf(plan, 0, operands);
    }
    std::vector<DenseTensor> node_values(plan.nodes.size());
    std::vector<bool> computed(plan.nodes.size(), false);
    return evaluate_id(plan, plan.leaves.size() + plan.nodes.size() - 1, operands, node_values,
                       computed);
}

std::string render_plan(const ContractionPlan& plan) {
    std::ostringstream out;
    out << "einsum " << plan.spec.equation() << "  total_macs=" << plan.total_macs
        << " dynamic_macs=" << plan.dynamic_macs
        << (plan.mac_optimal ? "" : "  (heuristic path)") << "\n";
    const auto name = [&](std::size_t id) {
        std::ostringstream s;
        if (id < plan.leaves.size()) {
            if (plan.leaves[id].operand >= 0) {
                s << "op" << plan.leaves[id].operand;
            } else {
                s << "const" << id;
            }
        } else {
            s << "t" << id - plan.leaves.size();
        }
        return s.str();
    };
    for (std::size_t i = 0; i < plan.nodes.size(); ++i) {
        const PlanNode& n = plan.nodes[i];
        out << "  t" << i << " = " << name(n.left) << " * " << name(n.right) << " : "
            << n.left_subs << "," << n.right_subs << "->" << n.out_subs
            << "  macs=" << n.mac_count << (n.is_static ? " static" : "")
            << (n.is_contracting ? " contracting" : "");
        if (n.mem_type != MemType::unset) out << " " << mem_type_name(n.mem_type);
        out << "\n";
    }
    return out.str();
}

namespace {

char next_free_letter(std::string& used) {
    for (char c = 'a'; c <= 'z'; ++c) {
        if (used.find(c) == std::string::npos) {
            used.push_back(c);
            return c;
        }
    }
    throw std::invalid_argument("too many distinct indices (>26)");
}

}  // namespace

LayerEinsum build_einsum(const FactorizedLinear& f, std::size_t batch_extent,
                         const std::string& batch_letters) {
    LayerEinsum layer;
    layer.batch_letters = batch_letters;
    std::string used = batch_letters;

    const std::size_t p = f.shape.row_factors.size();
    const std::size_t q = f.shape.col_factors.size();
    const auto extents = f.shape.axis_extents();

    std::vector<std::string> inputs;
    std::vector<DenseTensor> operands;
    std::vector<bool> is_static;
    std::vector<std::ptrdiff_t> core_index;
    std::string output = batch_letters;

    // Activation placeholder: batch axes then the row factor extents.
    std::vector<std::size_t> x_shape;
    for (std::size_t k = 0; k < batch_letters.size(); ++k) x_shape.push_back(batch_extent);

    switch (f.format) {
        case Format::cp: {
            const char rank_letter = next_free_letter(used);
            std::string axis_letters;
            for (std::size_t k = 0; k < p + q; ++k) axis_letters.push_back(next_free_letter(used));

            std::string x_subs = batch_letters;
            for (std::size_t k = 0; k < p; ++k) {
                x_subs.push_back(axis_letters[k]);
                x_shape.push_back(extents[k]);
            }
            inputs.push_back(x_subs);
            operands.emplace_back(x_shape);
            is_static.push_back(false);
            core_index.push_back(-1);

            inputs.emplace_back(1, rank_letter);
            operands.push_back(f.cores[0]);
            is_static.push_back(true);
            core_index.push_back(0);

            // Column-axis factors first, then row-axis factors.
            for (std::size_t k = p; k < p + q; ++k) {
                inputs.push_back(std::string{axis_letters[k], rank_letter});
                operands.push_back(f.cores[1 + k]);
                is_static.push_back(true);
                core_index.push_back(static_cast<std::ptrdiff_t>(1 + k));
            }
            for (std::size_t k = 0; k < p; ++k) {
                inputs.push_back(std::string{axis_letters[k], rank_letter});
                operands.push_back(f.cores[1 + k]);
                is_static.push_back(true);
                core_index.push_back(static_cast<std::ptrdiff_t>(1 + k));
            }
            for (std::size_t k = p; k < p + q; ++k) output.push_back(axis_letters[k]);
            break;
        }
        case Format::tucker: {
            std::string axis_letters, rank_letters;
            for (std::size_t k = 0; k < p + q; ++k) axis_letters.push_back(next_free_letter(used));
            for (std::size_t k = 0; k < p + q; ++k) rank_letters.push_back(next_free_letter(used));

            std::string x_subs = batch_letters;
            for (std::size_t k = 0; k < p; ++k) {
                x_subs.push_back(axis_letters[k]);
                x_shape.push_back(extents[k]);
            }
            inputs.push_back(x_subs);
            operands.emplace_back(x_shape);
            is_static.push_back(false);
            core_index.push_back(-1);

            for (std::size_t k = 0; k < p + q; ++k) {
                inputs.push_back(std::string{axis_letters[k], rank_letters[k]});
                operands.push_back(f.cores[1 + k]);
                is_static.push_back(true);
                core_index.push_back(static_cast<std::ptrdiff_t>(1 + k));
            }
            inputs.push_back(rank_letters);
            operands.push_back(f.cores[0]);
            is_static.push_back(true);
            core_index.push_back(0);

            for (std::size_t k = p; k < p + q; ++k) output.push_back(axis_letters[k]);
            break;
        }
        case Format::ttm: {
            std::string row_letters, col_letters, bond_letters;
            for (std::size_t k = 0; k < p; ++k) row_letters.push_back(next_free_letter(used));
            for (std::size_t k = 0; k < q; ++k) col_letters.push_back(next_free_letter(used));
            for (std::size_t k = 0; k + 1 < p; ++k) bond_letters.push_back(next_free_letter(used));

            std::string x_subs = batch_letters;
            for (std::size_t k = 0; k < p; ++k) {
                x_subs.push_back(row_letters[k]);
                x_shape.push_back(f.shape.row_factors[k]);
            }
            inputs.push_back(x_subs);
            operands.emplace_back(x_shape);
            is_static.push_back(false);
            core_index.push_back(-1);

            const auto& bonds = f.ranks.ranks;
            for (std::size_t k = 0; k < p; ++k) {
                std::string subs;
                std::vector<std::size_t> core_shape;
                if (k > 0) {
                    subs.push_back(bond_letters[k - 1]);
                    core_shape.push_back(bonds[k]);
                }
                subs.push_back(row_letters[k]);
                subs.push_back(col_letters[k]);
                core_shape.push_back(f.shape.row_factors[k]);
                core_shape.push_back(f.shape.col_factors[k]);
                if (k + 1 < p) {
                    subs.push_back(bond_letters[k]);
                    core_shape.push_back(bonds[k + 1]);
                }
                inputs.push_back(subs);
                operands.push_back(reshape(f.cores[k], core_shape));
                is_static.push_back(true);
                core_index.push_back(static_cast<std::ptrdiff_t>(k));
            }
            for (std::size_t k = 0; k < q; ++k) output.push_back(col_letters[k]);
            break;
        }
    }

    layer.spec = EinsumSpec::from_subscripts(std::move(inputs), std::move(output), operands);
    layer.operands = std::move(operands);
    layer.is_static = std::move(is_static);
    layer.core_index = std::move(core_index);
    return layer;
}

DenseTensor einsum_apply(const EinsumSpec& spec, const std::vector<DenseTensor>& operands) {
    if (operands.size() == 1) return einsum_naive(spec, operands);
    return execute_plan(optimal_path(spec), operands);
}

}  // namespace tds
