#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "survhier/data.hpp"
#include "survhier/layout.hpp"
#include "survhier/selection.hpp"
#include "survhier/simgen.hpp"
#include "survhier/vbem.hpp"

namespace survhier {

// ---------------------------------------------------------------------------
// Delimited text formats (tab-separated, numeric fields written with 17
// significant digits so write-then-read reproduces every double exactly).
//
//   covariates: header = distinct gene ids; one row per subject.
//   membership: header "pathway_id<TAB>gene_id"; one row per membership pair.
//   outcomes:   header "subject_id<TAB>time<TAB>status"; times on the
//               original scale (> 0), status 1 = event observed; subject ids
//               must be 1..n in row order so rows align with the covariates.
//
// All writers are atomic (temp file + rename), and none emit timestamps.
// ---------------------------------------------------------------------------

struct RawCovariates {
    std::vector<int> gene_ids; // header order
    Eigen::MatrixXd values;    // n x |gene_ids|
};

void write_covariates_tsv(const std::string& path, const SurvivalDataset& data);
void write_covariates_tsv(const std::string& path, const RawCovariates& raw);
void write_outcomes_tsv(const std::string& path, const SurvivalDataset& data);
void write_membership_tsv(const std::string& path, const PathwayLayout& layout);

RawCovariates read_covariates_tsv(const std::string& path);

std::vector<std::pair<int, int>> read_membership_tsv(const std::string& path);

struct RawOutcomes {
    Eigen::VectorXd time; // original scale
    std::vector<std::uint8_t> status;
};
RawOutcomes read_outcomes_tsv(const std::string& path);

// Assembles the model-ready dataset: builds the pathway layout, duplicates
// each gene column into its pathway-aligned design columns, and moves times
// to the log scale. Genes named in the membership must exist in the
// covariates header; covariate columns outside every pathway are ignored.
SurvivalDataset assemble_dataset(const RawCovariates& cov,
                                 const std::vector<std::pair<int, int>>& membership,
                                 const RawOutcomes& outcomes);
SurvivalDataset load_dataset(const std::string& covariates_path,
                             const std::string& membership_path,
                             const std::string& outcomes_path);

// ---------------------------------------------------------------------------
// Structured (JSON) documents. Every document embeds the tool version, the
// command, the effective configuration, the seed, and the content hashes of
// the command's file inputs.
// ---------------------------------------------------------------------------

struct DocumentMeta {
    std::string command;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> config; // echoed flags
    std::vector<std::pair<std::string, std::string>> inputs; // (name, hash)
};

// FNV-1a 64-bit hash of a file's bytes, rendered as "fnv1a64:<16 hex>".
std::string file_hash_hex(const std::string& path);

// Atomic text write (temp + rename).
void write_text_atomic(const std::string& path, const std::string& text);

void write_truth_json(const std::string& path, const DocumentMeta& meta,
                      const SimulatedData& sim);
GroundTruth read_truth_json(const std::string& path);

// Fitted-model document: variational state, parameters, trace, and the
// threshold-0.5 selection. `tune` is optional (empty table = plain fit).
void write_fit_json(const std::string& path, const DocumentMeta& meta, const FitResult& fit,
                    const SelectionSets& selected, const TuneOutcome* tune);

struct LoadedFit {
    Eigen::VectorXd m, sigma2, eta, r_hl;
    ModelParams params;
    std::vector<double> elbo_trace;
    long iterations = 0;
    bool converged = false;
    SelectionSets selected;
};
LoadedFit read_fit_json(const std::string& path);

} // namespace survhier
