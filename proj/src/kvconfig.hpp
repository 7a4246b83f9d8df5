#pragma once

#include <string>

#include "dataio.hpp"
#include "mixture.hpp"
#include "topics.hpp"

namespace grassmix {

/// Parses `key = value` lines ('#' comments, blank lines allowed) into a
/// GibbsConfig; unknown keys throw ValidationError.
GibbsConfig gibbs_config_from_text(const std::string& text);

/// Same format for the topic sampler.
TopicConfig topic_config_from_text(const std::string& text);

} // namespace grassmix
