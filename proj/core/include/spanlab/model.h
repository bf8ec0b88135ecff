// Copyright 2026 The spanlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Pluggable end model: instance featurizers, a multinomial logistic
// regression classifier and a 2-D PCA projection for the scatter view.

#ifndef SPANLAB_MODEL_H_
#define SPANLAB_MODEL_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "spanlab/engine.h"
#include "spanlab/error.h"

namespace spanlab {

// Sparse vector with strictly increasing indices < dim.
struct FeatureVector {
  std::size_t dim = 0;
  std::vector<std::uint32_t> indices;
  std::vector<double> values;

  double Norm() const;
  bool operator==(const FeatureVector&) const = default;
};

// Builds a FeatureVector from unsorted (index, weight) pairs, summing
// duplicates.
FeatureVector MakeFeatureVector(std::size_t dim,
                                std::vector<std::pair<std::uint32_t, double>> entries);

class Featurizer {
 public:
  virtual ~Featurizer() = default;
  virtual std::size_t dimension() const = 0;
  virtual FeatureVector Featurize(const Instance& instance,
                                  const Document& doc) const = 0;
};

// Hashed, L2-normalized unigram + bigram counts. Target-specific instances
// also get features for tokens within `target_window` tokens of each target
// occurrence, in a separate hash namespace.
class HashedNgramFeaturizer : public Featurizer {
 public:
  static constexpr std::size_t kDefaultDimension = std::size_t{1} << 18;
  static constexpr std::size_t kDefaultTargetWindow = 5;

  explicit HashedNgramFeaturizer(std::size_t dim = kDefaultDimension,
                                 std::size_t target_window = kDefaultTargetWindow)
      : dim_(dim), target_window_(target_window) {}

  std::size_t dimension() const override { return dim_; }
  FeatureVector Featurize(const Instance& instance,
                          const Document& doc) const override;
  // Raw counts before normalization.
  FeatureVector Counts(const Instance& instance, const Document& doc) const;

 private:
  std::size_t dim_;
  std::size_t target_window_;
};

// Vectors supplied per instance key, e.g. sentence embeddings computed by an
// external model. JSONL: {"id": instance key, "vector": [float, ...]}.
class ExternalEmbeddingFeaturizer : public Featurizer {
 public:
  explicit ExternalEmbeddingFeaturizer(
      std::map<std::string, std::vector<double>> vectors);
  static ExternalEmbeddingFeaturizer FromJsonl(std::string_view content);
  static ExternalEmbeddingFeaturizer Load(const std::filesystem::path& path);

  std::size_t dimension() const override { return dim_; }
  // Throws Error("MissingEmbedding") for unknown keys.
  FeatureVector Featurize(const Instance& instance,
                          const Document& doc) const override;

 private:
  std::map<std::string, std::vector<double>> vectors_;
  std::size_t dim_ = 0;
};

// Stable 64-bit FNV-1a.
std::uint64_t Fnv1a64(std::string_view data,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);

struct ClassifierConfig {
  double learning_rate = 0.5;
  int epochs = 30;
  double l2 = 1e-5;
  std::size_t batch_size = 32;
  std::uint64_t seed = 7;
  // Training stops after `patience` consecutive epochs without a lower
  // full-batch loss; the best epoch's parameters are kept.
  int patience = 3;
};

struct ClassifierParams {
  std::vector<std::string> categories;
  std::size_t dim = 0;
  std::vector<double> weights;  // categories.size() x dim, row-major
  std::vector<double> bias;
  ClassifierConfig config;
  // Full-batch training objective after each epoch (index 0 = before
  // training).
  std::vector<double> loss_history;
  int best_epoch = 0;

  static ClassifierParams Zero(std::vector<std::string> categories,
                               std::size_t dim);
};

class NoLabeledDataError : public Error {
 public:
  NoLabeledDataError()
      : Error("NoLabeledData", "no labeled instances to train on") {}
};

// `targets[i]` is a distribution over categories (one-hot for hard labels,
// posteriors for soft labels); an empty row excludes the instance.
ClassifierParams TrainClassifier(const std::vector<FeatureVector>& features,
                                 const std::vector<std::vector<double>>& targets,
                                 const std::vector<std::string>& categories,
                                 const ClassifierConfig& config = {});

std::vector<double> PredictProba(const ClassifierParams& params,
                                 const FeatureVector& x);

// Mean cross-entropy over labeled rows plus (l2 / 2) * ||W||^2.
double ClassifierLoss(const ClassifierParams& params,
                      const std::vector<FeatureVector>& features,
                      const std::vector<std::vector<double>>& targets);

struct ClassifierGradient {
  std::vector<double> weights;
  std::vector<double> bias;
};
ClassifierGradient ComputeClassifierGradient(
    const ClassifierParams& params, const std::vector<FeatureVector>& features,
    const std::vector<std::vector<double>>& targets);

struct Projection2D {
  std::vector<std::array<double, 2>> coords;
  std::array<double, 2> explained_variance{0.0, 0.0};  // variance ratios

  bool operator==(const Projection2D&) const = default;
};

struct PcaResult {
  std::vector<std::vector<double>> components;  // k dense unit vectors
  std::vector<double> eigenvalues;              // sums of squares, descending
  double total_variance = 0.0;                  // sum of squared deviations
  std::vector<std::vector<double>> coords;      // n x k
};

class TooFewInstancesError : public Error {
 public:
  TooFewInstancesError()
      : Error("TooFewInstances", "projection needs at least two instances") {}
};

// Top-k principal components of the mean-centred rows. Exact (dense
// eigendecomposition) when at most 1024 dimensions are active, otherwise
// randomized subspace iteration seeded by `seed`. Each component's
// largest-magnitude loading is made positive.
PcaResult RunPca(const std::vector<FeatureVector>& vectors, std::size_t k,
                 std::uint64_t seed = 0);

Projection2D Project2D(const std::vector<FeatureVector>& vectors,
                       std::uint64_t seed = 0);

}  // namespace spanlab

#endif  // SPANLAB_MODEL_H_
