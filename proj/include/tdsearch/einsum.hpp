#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tdsearch/tensor.hpp"

namespace tds {

/// Symbolic einsum description. Indices are single letters; every output
/// letter must appear in at least one input, and a letter has one extent
/// everywhere it occurs.
struct EinsumSpec {
    std::vector<std::string> inputs;
    std::string output;
    std::map<char, std::size_t> extents;

    /// Parse "ij,jk->ik" and take extents from the operands.
    static EinsumSpec from_equation(const std::string& equation,
                                    const std::vector<DenseTensor>& operands);
    static EinsumSpec from_subscripts(std::vector<std::string> inputs, std::string output,
                                      const std::vector<DenseTensor>& operands);

    void validate() const;
    std::string equation() const;
    std::size_t extent(char letter) const;
    std::vector<std::size_t> output_shape() const;
    std::vector<std::size_t> input_shape(std::size_t operand) const;
};

/// Reference oracle: direct nested summation over every index value.
/// Exact by construction; other evaluation paths are validated against it.
DenseTensor einsum_naive(const EinsumSpec& spec, const std::vector<DenseTensor>& operands);

/// Two-operand contraction, equal to einsum_naive on the corresponding
/// 2-operand spec. Letters must be distinct within each operand; letters
/// absent from out_subs are summed.
DenseTensor contract_pair(const DenseTensor& a, std::string_view a_subs,
                          const DenseTensor& b, std::string_view b_subs,
                          std::string_view out_subs);

}  // namespace tds
