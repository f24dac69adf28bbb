#pragma once

#include "echomi/ml.hpp"

namespace echomi::ml::detail {

void check_training_data(const FeatureMatrix& X, std::span<const Label> y);

DecisionTree fit_decision_tree(const FeatureMatrix& X, std::span<const Label> y, const TreeParams& params,
                               std::uint64_t seed);
RandomForest fit_random_forest(const FeatureMatrix& X, std::span<const Label> y, const ForestParams& params,
                               std::uint64_t seed);
SvmModel fit_svm(const FeatureMatrix& X, std::span<const Label> y, const SvmParams& params);
KnnModel fit_knn(const FeatureMatrix& X, std::span<const Label> y, const KnnParams& params);
CnnModel fit_cnn(const FeatureMatrix& X, std::span<const Label> y, const CnnParams& params, std::uint64_t seed);

}  // namespace echomi::ml::detail
