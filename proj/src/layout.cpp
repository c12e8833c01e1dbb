#include "survhier/layout.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <string>

#include "survhier/errors.hpp"

namespace survhier {

bool operator==(const CoefficientIndex& a, const CoefficientIndex& b) {
    return a.kind == b.kind && a.k == b.k && a.kp == b.kp && a.j == b.j && a.l == b.l;
}

PathwayLayout PathwayLayout::from_membership(std::vector<std::pair<int, int>> rows) {
    if (rows.empty()) throw structural_error("membership is empty");
    int K = 0;
    for (const auto& [k, g] : rows) {
        if (k < 1) throw structural_error("pathway id " + std::to_string(k) + " is not >= 1");
        if (g < 1) throw structural_error("gene id " + std::to_string(g) + " is not >= 1");
        K = std::max(K, k);
    }
    PathwayLayout lay;
    lay.K = K;
    lay.sizes.assign(K, 0);
    std::set<std::pair<int, int>> seen;
    for (const auto& r : rows) {
        if (!seen.insert(r).second)
            throw structural_error("gene " + std::to_string(r.second) + " listed twice in pathway " +
                                   std::to_string(r.first));
        lay.sizes[r.first - 1] += 1;
        lay.n_distinct = std::max(lay.n_distinct, r.second);
    }
    for (int k = 1; k <= K; ++k) {
        if (lay.sizes[k - 1] == 0)
            throw structural_error("pathway ids are not contiguous: pathway " + std::to_string(k) +
                                   " is empty");
    }
    lay.offsets.assign(K + 1, 0);
    for (int k = 0; k < K; ++k) lay.offsets[k + 1] = lay.offsets[k] + lay.sizes[k];

    const int p = lay.offsets[K];
    lay.col_gene.assign(p, 0);
    lay.col_pathway.assign(p, 0);
    lay.col_pos.assign(p, 0);
    std::vector<int> fill(K, 0);
    for (const auto& [k, g] : rows) {
        const int pos = ++fill[k - 1];
        const int col = lay.offsets[k - 1] + pos - 1;
        lay.col_gene[col] = g;
        lay.col_pathway[col] = k;
        lay.col_pos[col] = pos;
        lay.membership.emplace_back(k, g);
    }
    // Keep membership pathway-major in position order regardless of row order.
    std::vector<std::pair<int, int>> ordered(p);
    for (int col = 0; col < p; ++col) ordered[col] = {lay.col_pathway[col], lay.col_gene[col]};
    lay.membership = std::move(ordered);
    return lay;
}

std::vector<int> PathwayLayout::gene_multiplicity() const {
    std::vector<int> mult(n_distinct + 1, 0);
    for (const auto& [k, g] : membership) mult[g] += 1;
    return mult;
}

IndexMap::IndexMap(const PathwayLayout& layout) : layout_(&layout) {
    const int K = layout.K;
    p_ = layout.p();
    n_blocks_ = K * (K + 1) / 2;
    block_ranges_.resize(n_blocks_);
    inter_offset_.resize(n_blocks_);

    long flat = p_;
    int b = 0;
    for (int k = 1; k <= K; ++k) {
        for (int kp = k; kp <= K; ++kp, ++b) {
            const long pk = layout.sizes[k - 1];
            const long pkp = layout.sizes[kp - 1];
            const long count = (k == kp) ? pk * (pk - 1) / 2 : pk * pkp;
            BlockRange& r = block_ranges_[b];
            if (k == kp) {
                r.main_begin = layout.offsets[k - 1];
                r.main_end = layout.offsets[k];
            } else {
                r.main_begin = r.main_end = 0;
            }
            r.inter_begin = flat;
            r.inter_end = flat + count;
            inter_offset_[b] = flat;
            flat += count;
        }
    }
    n_coef_ = flat;

    idx_of_.resize(n_coef_);
    col_a_.resize(n_coef_);
    col_b_.assign(n_coef_, -1);
    block_of_.resize(n_coef_);
    parent_a_.assign(n_coef_, -1);
    parent_b_.assign(n_coef_, -1);

    for (int col = 0; col < p_; ++col) {
        CoefficientIndex ci;
        ci.kind = EffectKind::main_effect;
        ci.k = ci.kp = layout.col_pathway[col];
        ci.j = layout.col_pos[col];
        ci.l = 0;
        idx_of_[col] = ci;
        col_a_[col] = col;
        block_of_[col] = block_id(ci.k, ci.k);
    }

    std::vector<long> degree(p_, 0);
    b = 0;
    flat = p_;
    for (int k = 1; k <= K; ++k) {
        for (int kp = k; kp <= K; ++kp, ++b) {
            const int pk = layout.sizes[k - 1];
            const int pkp = layout.sizes[kp - 1];
            const int off_k = layout.offsets[k - 1];
            const int off_kp = layout.offsets[kp - 1];
            if (k == kp) {
                for (int j = 1; j <= pk; ++j)
                    for (int l = j + 1; l <= pk; ++l, ++flat) {
                        idx_of_[flat] = {EffectKind::interaction, k, kp, j, l};
                        col_a_[flat] = off_k + j - 1;
                        col_b_[flat] = off_k + l - 1;
                        block_of_[flat] = b;
                        parent_a_[flat] = off_k + j - 1;
                        parent_b_[flat] = off_k + l - 1;
                        ++degree[parent_a_[flat]];
                        ++degree[parent_b_[flat]];
                    }
            } else {
                for (int j = 1; j <= pk; ++j)
                    for (int l = 1; l <= pkp; ++l, ++flat) {
                        idx_of_[flat] = {EffectKind::interaction, k, kp, j, l};
                        col_a_[flat] = off_k + j - 1;
                        col_b_[flat] = off_kp + l - 1;
                        block_of_[flat] = b;
                        parent_a_[flat] = off_k + j - 1;
                        parent_b_[flat] = off_kp + l - 1;
                        ++degree[parent_a_[flat]];
                        ++degree[parent_b_[flat]];
                    }
            }
        }
    }

    incidence_offsets_.assign(p_ + 1, 0);
    for (int m = 0; m < p_; ++m) incidence_offsets_[m + 1] = incidence_offsets_[m] + degree[m];
    incidence_.resize(incidence_offsets_[p_]);
    std::vector<long> cursor(incidence_offsets_.begin(), incidence_offsets_.end() - 1);
    for (long f = p_; f < n_coef_; ++f) {
        const long a = parent_a_[f];
        const long bb = parent_b_[f];
        incidence_[cursor[a]++] = {f, bb};
        incidence_[cursor[bb]++] = {f, a};
    }
}

long IndexMap::flatten(const CoefficientIndex& ci) const {
    const auto& lay = *layout_;
    if (ci.k < 1 || ci.k > lay.K || ci.kp < ci.k || ci.kp > lay.K)
        throw structural_error("flatten: pathway ids out of range");
    const int pk = lay.sizes[ci.k - 1];
    const int pkp = lay.sizes[ci.kp - 1];
    if (ci.kind == EffectKind::main_effect) {
        if (ci.kp != ci.k || ci.l != 0 || ci.j < 1 || ci.j > pk)
            throw structural_error("flatten: malformed main-effect index");
        return lay.offsets[ci.k - 1] + ci.j - 1;
    }
    if (ci.j < 1 || ci.j > pk || ci.l < 1 || ci.l > pkp)
        throw structural_error("flatten: interaction position out of range");
    const int b = block_id(ci.k, ci.kp);
    if (ci.k == ci.kp) {
        if (ci.j >= ci.l)
            throw structural_error("flatten: within-pathway interaction requires j < l");
        const long j0 = ci.j - 1, l0 = ci.l - 1;
        return inter_offset_[b] + j0 * (2L * pk - j0 - 1) / 2 + (l0 - j0 - 1);
    }
    return inter_offset_[b] + static_cast<long>(ci.j - 1) * pkp + (ci.l - 1);
}

const CoefficientIndex& IndexMap::unflatten(long flat) const {
    if (flat < 0 || flat >= n_coef_)
        throw structural_error("unflatten: flat index " + std::to_string(flat) + " out of range");
    return idx_of_[static_cast<size_t>(flat)];
}

std::pair<int, int> IndexMap::columns_of(long flat) const {
    if (flat < 0 || flat >= n_coef_)
        throw structural_error("columns_of: flat index out of range");
    return {col_a_[flat], col_b_[flat]};
}

int IndexMap::block_id(int k, int kp) const {
    const int K = layout_->K;
    if (k < 1 || kp < k || kp > K) throw structural_error("block_id: bad pathway pair");
    const long k0 = k - 1;
    return static_cast<int>(k0 * K - k0 * (k0 - 1) / 2 + (kp - k));
}

std::pair<int, int> IndexMap::block_pathways(int block) const {
    if (block < 0 || block >= n_blocks_) throw structural_error("block_pathways: bad block id");
    // Invert the lexicographic enumeration (small K; scan is fine).
    int b = block;
    for (int k = 1; k <= layout_->K; ++k) {
        const int row = layout_->K - k + 1;
        if (b < row) return {k, k + b};
        b -= row;
    }
    throw structural_error("block_pathways: bad block id");
}

const IndexMap::BlockRange& IndexMap::block_range(int block) const {
    if (block < 0 || block >= n_blocks_) throw structural_error("block_range: bad block id");
    return block_ranges_[block];
}

std::pair<long, long> IndexMap::parents_of(long flat) const {
    if (flat < p_ || flat >= n_coef_)
        throw structural_error("parents_of: not an interaction coefficient");
    return {parent_a_[flat], parent_b_[flat]};
}

IndexMap::IncidenceSpan IndexMap::interactions_of_main(long main_flat) const {
    if (main_flat < 0 || main_flat >= p_)
        throw structural_error("interactions_of_main: not a main effect");
    const auto* base = incidence_.data();
    return {base + incidence_offsets_[main_flat], base + incidence_offsets_[main_flat + 1]};
}

void coefficient_column(const Eigen::MatrixXd& X, const IndexMap& map, long flat,
                        Eigen::VectorXd& out) {
    if (X.cols() != map.layout().p())
        throw structural_error("coefficient_column: X has wrong number of columns");
    const auto [a, b] = map.columns_of(flat);
    if (b < 0) {
        out = X.col(a);
    } else {
        out = X.col(a).cwiseProduct(X.col(b));
    }
}

Eigen::VectorXd coefficient_column(const Eigen::MatrixXd& X, const IndexMap& map, long flat) {
    Eigen::VectorXd out(X.rows());
    coefficient_column(X, map, flat, out);
    return out;
}

Eigen::VectorXd gram_diagonal(const Eigen::MatrixXd& X, const IndexMap& map) {
    if (X.cols() != map.layout().p())
        throw structural_error("gram_diagonal: X has wrong number of columns");
    const long N = map.n_coefficients();
    Eigen::VectorXd g(N);
    for (int c = 0; c < map.n_mains(); ++c) g[c] = X.col(c).squaredNorm();
    for (long f = map.n_mains(); f < N; ++f) {
        const auto [a, b] = map.columns_of(f);
        g[f] = X.col(a).cwiseProduct(X.col(b)).squaredNorm();
    }
    return g;
}

} // namespace survhier
