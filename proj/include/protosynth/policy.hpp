#pragma once

#include <array>
#include <cstddef>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "protosynth/core_model.hpp"
#include "protosynth/scenario_gen.hpp"

namespace protosynth {

/// Probability vector over the whole state alphabet (zero on illegal outputs).
using Distribution = std::vector<double>;

struct TrainingPair {
  std::size_t key_index = 0;
  Distribution target;
};

/// Bounded FIFO of (key, visit distribution) pairs.
class TrainingBuffer {
 public:
  explicit TrainingBuffer(std::size_t capacity = 20000) : capacity_(capacity) {}

  void push(TrainingPair pair);
  void append(std::span<const TrainingPair> pairs);

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }
  const TrainingPair& operator[](std::size_t i) const { return items_[i]; }

  /// Most recent target recorded for each key index (absent keys are empty).
  std::vector<const Distribution*> latest_by_key(std::size_t num_keys) const;

 private:
  std::size_t capacity_;
  std::deque<TrainingPair> items_;
};

struct TrainOptions {
  int epochs = 10;
  int batch_size = 32;
  double learning_rate = 1e-3;
};

/// Maps a transition key to a distribution over its legal outputs.
///
/// The tabular form keeps one logit row per key. The MLP form one-hot encodes
/// round, optional process id, own state and every other slot, then applies
/// three ReLU layers (128, 64, 32) and a linear output over the alphabet.
/// Both apply a soft-max restricted to the outputs legal in the key's round.
/// Parameters are trained with Adam on cross-entropy.
class PolicyModel {
 public:
  enum class Kind { tabular, mlp };

  static PolicyModel tabular(const KeyIndexer& indexer);
  static PolicyModel mlp(const KeyIndexer& indexer, Rng& rng);

  Kind kind() const { return kind_; }
  const KeyIndexer& indexer() const { return indexer_; }
  int alphabet() const { return indexer_.space().size(); }

  Distribution predict(const TransitionKey& key) const;
  Distribution predict_index(std::size_t key_index) const;
  /// Row-major [num_keys x alphabet] table of predictions.
  std::vector<double> predict_all() const;

  /// Mean cross-entropy of the batch.
  double loss(std::span<const TrainingPair* const> batch) const;
  /// Mean cross-entropy and its gradient with respect to parameters().
  double loss_and_gradient(std::span<const TrainingPair* const> batch,
                           std::vector<double>& grad) const;

  /// One Adam step with the given gradient.
  void apply_gradient(std::span<const double> grad, double learning_rate);

  std::vector<double>& parameters() { return params_; }
  const std::vector<double>& parameters() const { return params_; }

  /// Versioned checkpoint: implementation tag, encoding metadata, parameters.
  nlohmann::json to_json() const;
  static PolicyModel from_json(const nlohmann::json& j, const KeyIndexer& indexer);

  static constexpr int kCheckpointVersion = 1;
  static constexpr std::array<int, 3> kHidden{128, 64, 32};

 private:
  PolicyModel(Kind kind, const KeyIndexer& indexer);

  struct Activations;
  void encode(std::size_t key_index, std::vector<int>& active) const;
  void forward(const std::vector<int>& active, Activations& act) const;
  void masked_softmax(int round, const double* logits, double* out) const;
  std::size_t layer_offset(int layer) const;
  int layer_in(int layer) const;
  int layer_out(int layer) const;

  Kind kind_;
  KeyIndexer indexer_;
  int input_dim_ = 0;
  std::vector<double> params_;
  // Adam moments.
  std::vector<double> m_;
  std::vector<double> v_;
  long step_ = 0;
};

/// Mini-batch training over the whole buffer for `epochs` passes.
/// Returns the mean loss of each epoch.
std::vector<double> train(PolicyModel& model, const TrainingBuffer& buffer,
                          const TrainOptions& options, Rng& rng);

/// Highest-probability legal output for a key (ties resolve to the lowest id).
StateId argmax_output(std::span<const double> dist, std::span<const StateId> legal);

}  // namespace protosynth
