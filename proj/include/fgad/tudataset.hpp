#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>

#include "fgad/graph.hpp"

namespace fgad {

enum class FeatureStrategy { ConstantOne, DegreeOneHot };

struct FeatureSpec {
  FeatureStrategy strategy = FeatureStrategy::DegreeOneHot;
  std::size_t degree_cap = 64;
};

std::string_view to_string(FeatureStrategy s);
FeatureStrategy feature_strategy_from_string(std::string_view s);

/// n x (cap+1) one-hot of min(degree, cap) per node.
Matrix degree_onehot(const Matrix& adjacency, std::size_t cap);

/// Replaces every graph's features according to spec.
GraphDataset synthesize_features(GraphDataset dataset, const FeatureSpec& spec);

struct LoadOptions {
  // Used only when the dataset ships neither node labels nor attributes,
  // unless force_synthetic is set.
  FeatureSpec fallback_features;
  bool force_synthetic = false;
};

/// Reads a dataset in the TUDataset text layout. `directory` may be the
/// dataset folder itself or its parent (`<root>/<DS>/<DS>_A.txt`).
/// The normal class is the smallest graph label.
GraphDataset load_tudataset(const std::filesystem::path& directory, std::string_view name,
                            const LoadOptions& options = {});

}  // namespace fgad
