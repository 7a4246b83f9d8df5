#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mixture.hpp"
#include "topics.hpp"

namespace grassmix {

/// Versioned JSON document for a fit: per-chain dimension histograms, losses,
/// tuned temperature and proposal scales, acceptance rates, and the global
/// minimum-loss draw with full component parameters.
std::string fit_summary_json(const std::vector<ChainResult>& chains, const GibbsConfig& cfg,
                             const std::string& input_path);

/// The part of a fit summary needed to classify new points.
struct Predictor {
    int m = 0;
    std::vector<ComponentDraw> components;

    /// Minimum-residual component; ties resolve to the lowest index.
    int classify(const Vector& x) const;
};

Predictor predictor_from_json_text(const std::string& json_text);
Predictor predictor_from_json_file(const std::string& path);

std::string topic_summary_json(const TopicDraws& draws, const TopicConfig& cfg,
                               const std::string& corpus_path,
                               const std::vector<std::string>& vocabulary,
                               const std::vector<std::string>& doc_ids);

} // namespace grassmix
