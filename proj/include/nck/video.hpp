#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nck/graph.hpp"

namespace nck {

// A video and its snippet features. The observable label Y is video-level;
// ground_truth carries per-snippet labels for evaluation only and must never
// leak into training targets. An empty ground_truth means "not available"
// (externally ingested features may omit it).
struct VideoBag {
    std::string id;
    int label = 0;
    FeatureMatrix features;
    std::vector<int> ground_truth;

    VideoBag(std::string id_in, int label_in, FeatureMatrix features_in,
             std::vector<int> ground_truth_in)
        : id(std::move(id_in)),
          label(label_in),
          features(std::move(features_in)),
          ground_truth(std::move(ground_truth_in)) {
        if (id.empty()) throw std::invalid_argument("VideoBag: empty id");
        if (label != 0 && label != 1) throw std::invalid_argument("VideoBag: label must be 0 or 1");
        if (ground_truth.empty()) return;
        if (ground_truth.size() != features.n_snippets())
            throw std::invalid_argument("VideoBag: ground truth length mismatch");
        bool any_anomalous = false;
        for (int g : ground_truth) {
            if (g != 0 && g != 1)
                throw std::invalid_argument("VideoBag: ground truth entries must be 0 or 1");
            any_anomalous = any_anomalous || g == 1;
        }
        if (label == 0 && any_anomalous)
            throw std::invalid_argument("VideoBag: normal video with anomalous ground truth");
        if (label == 1 && !any_anomalous)
            throw std::invalid_argument("VideoBag: anomalous video without anomalous snippet");
    }

    std::size_t snippet_count() const { return features.n_snippets(); }
    bool has_ground_truth() const { return !ground_truth.empty(); }
};

using Dataset = std::vector<VideoBag>;

}  // namespace nck
