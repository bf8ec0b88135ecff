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

#include "spanlab/model.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace spanlab {
namespace {

constexpr std::size_t kExactPcaMaxDims = 1024;
constexpr int kSubspaceIterations = 30;
constexpr std::size_t kOversampling = 8;

std::uint32_t Bucket(std::string_view ns, std::string_view feature,
                     std::size_t dim) {
  std::uint64_t h = Fnv1a64(ns);
  h = Fnv1a64("\x1f", h);
  h = Fnv1a64(feature, h);
  return static_cast<std::uint32_t>(h % dim);
}

// Uniform integer in [0, n) from raw engine output; identical on every
// standard library, unlike std::uniform_int_distribution.
std::size_t UniformIndex(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(rng() % n);
}

double UniformSigned(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

void Softmax(std::vector<double>& z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

void Logits(const ClassifierParams& p, const FeatureVector& x, double scale,
            const std::vector<double>& weights, std::vector<double>& z) {
  const std::size_t k_count = p.categories.size();
  z.assign(k_count, 0.0);
  for (std::size_t k = 0; k < k_count; ++k) {
    const double* row = &weights[k * p.dim];
    double dot = 0.0;
    for (std::size_t n = 0; n < x.indices.size(); ++n) {
      dot += row[x.indices[n]] * x.values[n];
    }
    z[k] = scale * dot + p.bias[k];
  }
}

}  // namespace

std::uint64_t Fnv1a64(std::string_view data, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double FeatureVector::Norm() const {
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s);
}

FeatureVector MakeFeatureVector(
    std::size_t dim, std::vector<std::pair<std::uint32_t, double>> entries) {
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  FeatureVector fv;
  fv.dim = dim;
  for (const auto& [idx, w] : entries) {
    if (!fv.indices.empty() && fv.indices.back() == idx) {
      fv.values.back() += w;
    } else {
      fv.indices.push_back(idx);
      fv.values.push_back(w);
    }
  }
  return fv;
}

FeatureVector HashedNgramFeaturizer::Counts(const Instance& instance,
                                            const Document& doc) const {
  std::vector<std::pair<std::uint32_t, double>> entries;
  const auto& tokens = doc.tokens;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    entries.emplace_back(Bucket("u", tokens[i].norm, dim_), 1.0);
    if (i + 1 < tokens.size()) {
      entries.emplace_back(
          Bucket("b", tokens[i].norm + " " + tokens[i + 1].norm, dim_), 1.0);
    }
  }
  for (const TargetOccurrence& occ : instance.occurrences) {
    const std::size_t first = occ.token_range.first;
    const std::size_t last = occ.token_range.last;
    const std::size_t lo = first > target_window_ + 1 ? first - target_window_ - 1 : 0;
    const std::size_t hi = std::min(tokens.size(), last + target_window_ + 2);
    for (std::size_t p = lo; p < hi; ++p) {
      if (p >= first && p <= last) continue;
      entries.emplace_back(Bucket("t", tokens[p].norm, dim_), 1.0);
    }
  }
  return MakeFeatureVector(dim_, std::move(entries));
}

FeatureVector HashedNgramFeaturizer::Featurize(const Instance& instance,
                                               const Document& doc) const {
  FeatureVector fv = Counts(instance, doc);
  const double norm = fv.Norm();
  if (norm > 0.0) {
    for (double& v : fv.values) v /= norm;
  }
  return fv;
}

ExternalEmbeddingFeaturizer::ExternalEmbeddingFeaturizer(
    std::map<std::string, std::vector<double>> vectors)
    : vectors_(std::move(vectors)) {
  for (const auto& [key, v] : vectors_) {
    if (dim_ == 0) dim_ = v.size();
    if (v.size() != dim_) {
      throw Error("SchemaError", "embedding for '" + key +
                                     "' has a different length");
    }
    for (double x : v) {
      if (!std::isfinite(x)) {
        throw Error("SchemaError", "non-finite embedding value for '" + key + "'");
      }
    }
  }
}

ExternalEmbeddingFeaturizer ExternalEmbeddingFeaturizer::FromJsonl(
    std::string_view content) {
  std::map<std::string, std::vector<double>> vectors;
  std::size_t line_no = 0;
  std::istringstream in{std::string(content)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      vectors[j.at("id").get<std::string>()] =
          j.at("vector").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return ExternalEmbeddingFeaturizer(std::move(vectors));
}

ExternalEmbeddingFeaturizer ExternalEmbeddingFeaturizer::Load(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("IoError", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return FromJsonl(ss.str());
}

FeatureVector ExternalEmbeddingFeaturizer::Featurize(
    const Instance& instance, const Document& /*doc*/) const {
  const std::string key = instance.key.ToString();
  auto it = vectors_.find(key);
  if (it == vectors_.end()) {
    throw Error("MissingEmbedding", "no embedding for instance '" + key + "'");
  }
  FeatureVector fv;
  fv.dim = dim_;
  for (std::size_t i = 0; i < it->second.size(); ++i) {
    if (it->second[i] == 0.0) continue;
    fv.indices.push_back(static_cast<std::uint32_t>(i));
    fv.values.push_back(it->second[i]);
  }
  return fv;
}

ClassifierParams ClassifierParams::Zero(std::vector<std::string> categories,
                                        std::size_t dim) {
  ClassifierParams p;
  p.dim = dim;
  p.weights.assign(categories.size() * dim, 0.0);
  p.bias.assign(categories.size(), 0.0);
  p.categories = std::move(categories);
  return p;
}

std::vector<double> PredictProba(const ClassifierParams& params,
                                 const FeatureVector& x) {
  std::vector<double> z;
  Logits(params, x, 1.0, params.weights, z);
  Softmax(z);
  return z;
}

double ClassifierLoss(const ClassifierParams& params,
                      const std::vector<FeatureVector>& features,
                      const std::vector<std::vector<double>>& targets) {
  double total = 0.0;
  std::size_t count = 0;
  std::vector<double> z;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (targets[i].empty()) continue;
    Logits(params, features[i], 1.0, params.weights, z);
    const double mx = *std::max_element(z.begin(), z.end());
    double lse = 0.0;
    for (double v : z) lse += std::exp(v - mx);
    lse = mx + std::log(lse);
    for (std::size_t k = 0; k < z.size(); ++k) {
      if (targets[i][k] != 0.0) total -= targets[i][k] * (z[k] - lse);
    }
    ++count;
  }
  double sq = 0.0;
  for (double w : params.weights) sq += w * w;
  return (count ? total / static_cast<double>(count) : 0.0) +
         0.5 * params.config.l2 * sq;
}

ClassifierGradient ComputeClassifierGradient(
    const ClassifierParams& params, const std::vector<FeatureVector>& features,
    const std::vector<std::vector<double>>& targets) {
  const std::size_t k_count = params.categories.size();
  ClassifierGradient g;
  g.weights.assign(params.weights.size(), 0.0);
  g.bias.assign(k_count, 0.0);
  std::size_t count = 0;
  std::vector<double> p;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (targets[i].empty()) continue;
    ++count;
    p = PredictProba(params, features[i]);
    for (std::size_t k = 0; k < k_count; ++k) {
      const double r = p[k] - targets[i][k];
      g.bias[k] += r;
      for (std::size_t n = 0; n < features[i].indices.size(); ++n) {
        g.weights[k * params.dim + features[i].indices[n]] +=
            r * features[i].values[n];
      }
    }
  }
  const double inv = count ? 1.0 / static_cast<double>(count) : 0.0;
  for (double& v : g.bias) v *= inv;
  for (std::size_t w = 0; w < g.weights.size(); ++w) {
    g.weights[w] = g.weights[w] * inv + params.config.l2 * params.weights[w];
  }
  return g;
}

ClassifierParams TrainClassifier(
    const std::vector<FeatureVector>& features,
    const std::vector<std::vector<double>>& targets,
    const std::vector<std::string>& categories,
    const ClassifierConfig& config) {
  std::vector<std::size_t> labeled;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (!targets[i].empty()) labeled.push_back(i);
  }
  if (labeled.empty()) throw NoLabeledDataError();
  const std::size_t dim = features.empty() ? 0 : features.front().dim;
  const std::size_t k_count = categories.size();

  ClassifierParams params = ClassifierParams::Zero(categories, dim);
  params.config = config;
  params.loss_history.push_back(ClassifierLoss(params, features, targets));

  ClassifierParams best = params;
  double best_loss = params.loss_history.back();
  int since_best = 0;

  std::mt19937_64 rng(config.seed);
  std::vector<double>& v = params.weights;  // weights = scale * v
  double scale = 1.0;
  const double lr = config.learning_rate;
  const double decay = 1.0 - lr * config.l2;
  const std::size_t batch = std::max<std::size_t>(1, config.batch_size);
  std::vector<double> z;
  std::vector<std::vector<double>> residuals;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = labeled.size(); i > 1; --i) {
      std::swap(labeled[i - 1], labeled[UniformIndex(rng, i)]);
    }
    for (std::size_t start = 0; start < labeled.size(); start += batch) {
      const std::size_t end = std::min(labeled.size(), start + batch);
      const double inv_b = 1.0 / static_cast<double>(end - start);
      residuals.assign(end - start, {});
      for (std::size_t b = start; b < end; ++b) {
        Logits(params, features[labeled[b]], scale, v, z);
        Softmax(z);
        for (std::size_t k = 0; k < k_count; ++k) {
          z[k] -= targets[labeled[b]][k];
        }
        residuals[b - start] = z;
      }
      scale *= decay;
      const double step = lr * inv_b / scale;
      for (std::size_t b = start; b < end; ++b) {
        const FeatureVector& x = features[labeled[b]];
        const auto& r = residuals[b - start];
        for (std::size_t k = 0; k < k_count; ++k) {
          params.bias[k] -= lr * inv_b * r[k];
          double* row = &v[k * dim];
          for (std::size_t n = 0; n < x.indices.size(); ++n) {
            row[x.indices[n]] -= step * r[k] * x.values[n];
          }
        }
      }
      if (scale < 1e-6) {
        for (double& w : v) w *= scale;
        scale = 1.0;
      }
    }
    if (scale != 1.0) {
      for (double& w : v) w *= scale;
      scale = 1.0;
    }
    const double loss = ClassifierLoss(params, features, targets);
    params.loss_history.push_back(loss);
    if (loss < best_loss) {
      best_loss = loss;
      best.weights = params.weights;
      best.bias = params.bias;
      best.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  best.loss_history = std::move(params.loss_history);
  return best;
}

PcaResult RunPca(const std::vector<FeatureVector>& vectors, std::size_t k,
                 std::uint64_t seed) {
  if (vectors.size() < 2) throw TooFewInstancesError();
  const std::size_t n = vectors.size();
  const std::size_t full_dim = vectors.front().dim;

  // Compact onto the active coordinates.
  std::vector<std::uint32_t> active;
  for (const FeatureVector& fv : vectors) {
    active.insert(active.end(), fv.indices.begin(), fv.indices.end());
  }
  std::sort(active.begin(), active.end());
  active.erase(std::unique(active.begin(), active.end()), active.end());
  const std::size_t m = active.size();
  std::vector<std::vector<std::pair<std::size_t, double>>> rows(n);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const FeatureVector& fv = vectors[i];
    for (std::size_t t = 0; t < fv.indices.size(); ++t) {
      const auto c = static_cast<std::size_t>(
          std::lower_bound(active.begin(), active.end(), fv.indices[t]) -
          active.begin());
      rows[i].emplace_back(c, fv.values[t]);
      mean[static_cast<Eigen::Index>(c)] += fv.values[t];
      sum_sq += fv.values[t] * fv.values[t];
    }
  }
  mean /= static_cast<double>(n);

  PcaResult result;
  result.total_variance =
      std::max(0.0, sum_sq - static_cast<double>(n) * mean.squaredNorm());
  result.coords.assign(n, std::vector<double>(k, 0.0));
  result.eigenvalues.assign(k, 0.0);
  result.components.assign(k, std::vector<double>(full_dim, 0.0));
  if (m == 0) return result;

  const auto mi = static_cast<Eigen::Index>(m);
  Eigen::MatrixXd basis;       // m x k components
  Eigen::VectorXd eigenvalues;  // k

  auto apply_c = [&](const Eigen::MatrixXd& q) {  // (n x b) = C q
    Eigen::MatrixXd y(static_cast<Eigen::Index>(n), q.cols());
    const Eigen::RowVectorXd mean_q = mean.transpose() * q;
    for (std::size_t i = 0; i < n; ++i) {
      Eigen::RowVectorXd acc = -mean_q;
      for (const auto& [c, val] : rows[i]) {
        acc += val * q.row(static_cast<Eigen::Index>(c));
      }
      y.row(static_cast<Eigen::Index>(i)) = acc;
    }
    return y;
  };

  if (m <= kExactPcaMaxDims) {
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(mi, mi);
    for (const auto& row : rows) {
      for (const auto& [a, va] : row) {
        for (const auto& [b, vb] : row) {
          cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) +=
              va * vb;
        }
      }
    }
    cov -= static_cast<double>(n) * mean * mean.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    const Eigen::Index kk = std::min<Eigen::Index>(static_cast<Eigen::Index>(k), mi);
    basis = solver.eigenvectors().rightCols(kk).rowwise().reverse();
    eigenvalues = solver.eigenvalues().tail(kk).reverse();
  } else {
    const Eigen::Index b = std::min<Eigen::Index>(
        static_cast<Eigen::Index>(k + kOversampling), mi);
    std::mt19937_64 rng(seed);
    Eigen::MatrixXd q(mi, b);
    for (Eigen::Index c = 0; c < b; ++c) {
      for (Eigen::Index r = 0; r < mi; ++r) q(r, c) = UniformSigned(rng);
    }
    auto orthonormalize = [&](const Eigen::MatrixXd& a) {
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
      return Eigen::MatrixXd(qr.householderQ() *
                             Eigen::MatrixXd::Identity(a.rows(), a.cols()));
    };
    q = orthonormalize(q);
    for (int it = 0; it < kSubspaceIterations; ++it) {
      const Eigen::MatrixXd y = apply_c(q);
      // z = C^T y = X^T y - mean * (1^T y)
      Eigen::MatrixXd z = -mean * y.colwise().sum();
      for (std::size_t i = 0; i < n; ++i) {
        for (const auto& [c, val] : rows[i]) {
          z.row(static_cast<Eigen::Index>(c)) +=
              val * y.row(static_cast<Eigen::Index>(i));
        }
      }
      q = orthonormalize(z);
    }
    const Eigen::MatrixXd y = apply_c(q);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(y.transpose() * y);
    const Eigen::Index kk = std::min<Eigen::Index>(static_cast<Eigen::Index>(k), b);
    const Eigen::MatrixXd w = solver.eigenvectors().rightCols(kk).rowwise().reverse();
    basis = q * w;
    eigenvalues = solver.eigenvalues().tail(kk).reverse();
  }

  // Sign convention: the largest-magnitude loading of each component is
  // positive.
  for (Eigen::Index c = 0; c < basis.cols(); ++c) {
    Eigen::Index arg = 0;
    for (Eigen::Index r = 1; r < basis.rows(); ++r) {
      if (std::abs(basis(r, c)) > std::abs(basis(arg, c))) arg = r;
    }
    if (basis(arg, c) < 0) basis.col(c) = -basis.col(c);
  }

  const Eigen::MatrixXd projected = apply_c(basis);
  for (Eigen::Index c = 0; c < basis.cols(); ++c) {
    result.eigenvalues[static_cast<std::size_t>(c)] = std::max(0.0, eigenvalues[c]);
    for (Eigen::Index r = 0; r < mi; ++r) {
      result.components[static_cast<std::size_t>(c)]
                       [active[static_cast<std::size_t>(r)]] = basis(r, c);
    }
    for (std::size_t i = 0; i < n; ++i) {
      result.coords[i][static_cast<std::size_t>(c)] =
          projected(static_cast<Eigen::Index>(i), c);
    }
  }
  return result;
}

Projection2D Project2D(const std::vector<FeatureVector>& vectors,
                       std::uint64_t seed) {
  const PcaResult pca = RunPca(vectors, 2, seed);
  Projection2D proj;
  proj.coords.reserve(pca.coords.size());
  for (const auto& c : pca.coords) proj.coords.push_back({c[0], c[1]});
  if (pca.total_variance > 0.0) {
    proj.explained_variance = {pca.eigenvalues[0] / pca.total_variance,
                               pca.eigenvalues[1] / pca.total_variance};
  }
  return proj;
}

}  // namespace spanlab
