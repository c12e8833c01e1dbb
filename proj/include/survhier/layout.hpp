#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace survhier {

enum class EffectKind : std::uint8_t { main_effect, interaction };

// Address of one model coefficient. Pathway ids k, kp are 1..K with kp >= k
// (kp == k for main effects and within-pathway interactions); j, l are
// 1-based positions inside pathways k and kp. Main effects use l == 0.
struct CoefficientIndex {
    EffectKind kind = EffectKind::main_effect;
    int k = 0;
    int kp = 0;
    int j = 0;
    int l = 0;
};

bool operator==(const CoefficientIndex& a, const CoefficientIndex& b);

// Pathway membership: (pathway_id, gene_id) pairs. Row order fixes the
// within-pathway positions; gene ids are 1-based indices into the distinct-
// gene covariate table and may appear in several pathways (duplicated genes).
struct PathwayLayout {
    std::vector<std::pair<int, int>> membership;
    int K = 0;
    int n_distinct = 0;
    std::vector<int> sizes;   // p_k, size K
    std::vector<int> offsets; // 0-based design-column offset per pathway, size K+1

    // Per pathway-aligned design column (size p = sum of sizes):
    std::vector<int> col_gene;    // 1-based gene id
    std::vector<int> col_pathway; // 1-based pathway id
    std::vector<int> col_pos;     // 1-based within-pathway position

    int p() const { return static_cast<int>(col_gene.size()); }

    // Validates and derives everything from the membership list.
    static PathwayLayout from_membership(std::vector<std::pair<int, int>> rows);

    // How many pathways contain each gene (index 0 unused).
    std::vector<int> gene_multiplicity() const;
};

// Bijection between coefficient addresses and flat indices 0..p(p+1)/2-1.
// Flat order: all main effects grouped by pathway, then interaction blocks in
// (k, kp) lexicographic order, (j, l) lexicographic inside a block (j < l for
// within-pathway blocks). A main effect's flat index equals its design column.
class IndexMap {
  public:
    explicit IndexMap(const PathwayLayout& layout);

    const PathwayLayout& layout() const { return *layout_; }
    long n_coefficients() const { return n_coef_; }
    int n_mains() const { return p_; }
    int n_blocks() const { return n_blocks_; }

    long flatten(const CoefficientIndex& ci) const;
    const CoefficientIndex& unflatten(long flat) const;

    bool is_main(long flat) const { return flat < p_; }

    // Design columns backing a coefficient; second == -1 for main effects.
    std::pair<int, int> columns_of(long flat) const;

    // Higher-level block bookkeeping (0-based block ids, (k,kp) lex order).
    int block_id(int k, int kp) const;
    int block_of(long flat) const { return block_of_[static_cast<size_t>(flat)]; }
    std::pair<int, int> block_pathways(int block) const;

    struct BlockRange {
        long main_begin = 0, main_end = 0;   // flat range of member main effects
        long inter_begin = 0, inter_end = 0; // flat range of member interactions
        long size() const { return (main_end - main_begin) + (inter_end - inter_begin); }
    };
    const BlockRange& block_range(int block) const;

    // Parent main effects (flat indices) of an interaction coefficient.
    std::pair<long, long> parents_of(long flat) const;

    // Interactions incident to a main effect, as (interaction flat, partner
    // main flat) pairs sorted by interaction flat index.
    struct IncidenceSpan {
        const std::pair<long, long>* first;
        const std::pair<long, long>* last;
        const std::pair<long, long>* begin() const { return first; }
        const std::pair<long, long>* end() const { return last; }
    };
    IncidenceSpan interactions_of_main(long main_flat) const;

  private:
    const PathwayLayout* layout_;
    int p_ = 0;
    long n_coef_ = 0;
    int n_blocks_ = 0;
    std::vector<CoefficientIndex> idx_of_;
    std::vector<int> col_a_, col_b_;
    std::vector<int> block_of_;
    std::vector<BlockRange> block_ranges_;
    std::vector<long> inter_offset_; // flat offset of each block's interactions
    std::vector<long> parent_a_, parent_b_;
    std::vector<long> incidence_offsets_;
    std::vector<std::pair<long, long>> incidence_;
};

// Materializes the design column of one coefficient: the covariate column for
// a main effect, the elementwise product of the two parent columns for an
// interaction. Columns are computed on demand; nothing at the p(p+1)/2 scale
// is ever stored.
void coefficient_column(const Eigen::MatrixXd& X, const IndexMap& map, long flat,
                        Eigen::VectorXd& out);
Eigen::VectorXd coefficient_column(const Eigen::MatrixXd& X, const IndexMap& map, long flat);

// Squared norms of every coefficient column (one pass over the lazy columns).
Eigen::VectorXd gram_diagonal(const Eigen::MatrixXd& X, const IndexMap& map);

} // namespace survhier
