#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "randcore.hpp"
#include "topics.hpp"

namespace grassmix {

struct LabeledDataset {
    Matrix X;                // n x m
    Eigen::VectorXi labels;  // length n, or empty when unlabeled
    Eigen::VectorXi holdout; // length n 0/1 mask, or empty

    int n() const { return static_cast<int>(X.rows()); }
    int m() const { return static_cast<int>(X.cols()); }
    bool has_labels() const { return labels.size() == X.rows(); }
};

struct GeneratorSpec {
    double nu = 1.0;
    int n_per_component = 500;
    int holdout_per_component = 50;
    std::uint64_t seed = 0;

    /// How nu parameterizes the gamma draws of the precisions.
    ///   PrecisionFloor: every precision ~ Ga(1,1) left-truncated at nu.
    ///   NoiseScale:     noise precision ~ Ga(1,1) left-truncated at 1/nu
    ///                   (noise variance at most nu) and subspace-axis
    ///                   precisions ~ Ga(1,1) right-truncated at nu (axis
    ///                   variance at least 1/nu); nu is then the noise
    ///                   variance scale a la the reported accuracy table.
    enum class NuMode { PrecisionFloor, NoiseScale };
    NuMode mode = NuMode::PrecisionFloor;

    void validate() const;
};

/// Line plus plane in R^3: Haar-uniform bases, Gaussian means, gamma-law
/// precisions, offsets drawn in the null spaces. Labels are 0 (line) and
/// 1 (plane); the last holdout_per_component rows of each component carry
/// holdout = 1.
LabeledDataset simulate_line_plane(const GeneratorSpec& spec);

/// Train/holdout partition by the holdout mask.
std::pair<LabeledDataset, LabeledDataset> split_by_holdout(const LabeledDataset& ds);

/// CSV with a required header row; a final integer column named "label" is
/// read into labels. Throws IoError with the offending line number on
/// ragged rows or non-numeric cells.
LabeledDataset load_csv(const std::string& path);
void save_csv(const LabeledDataset& ds, const std::string& path);

/// Line-oriented `doc_id <TAB> term <TAB> count` triplets, count a positive
/// integer; duplicate pairs accumulate. Document and term order follow first
/// appearance.
Corpus load_corpus(const std::string& path);

/// Keeps terms with document frequency >= min_doc_freq whose tf-idf score
/// (total count times log(D / doc frequency)) lies within the top `top_frac`
/// of the score range, then drops documents left empty or constant; iterated
/// to a fixed point, so re-trimming with the same parameters is a no-op.
Corpus trim_vocabulary(const Corpus& corpus, double top_frac, int min_doc_freq);

/// Best label-permutation agreement in [0, 1]; brute force up to 10 classes,
/// Hungarian assignment on the confusion matrix beyond.
double clustering_accuracy(const Eigen::VectorXi& pred, const Eigen::VectorXi& truth);

} // namespace grassmix
