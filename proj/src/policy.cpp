#include "protosynth/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace protosynth {

void TrainingBuffer::push(TrainingPair pair) {
  if (capacity_ == 0) return;
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back(std::move(pair));
}

void TrainingBuffer::append(std::span<const TrainingPair> pairs) {
  for (const auto& p : pairs) push(p);
}

std::vector<const Distribution*> TrainingBuffer::latest_by_key(std::size_t num_keys) const {
  std::vector<const Distribution*> latest(num_keys, nullptr);
  for (auto it = items_.rbegin(); it != items_.rend(); ++it) {
    if (it->key_index < num_keys && latest[it->key_index] == nullptr) latest[it->key_index] = &it->target;
  }
  return latest;
}

struct PolicyModel::Activations {
  std::array<std::vector<double>, 3> hidden;
  std::vector<double> logits;
  std::vector<double> probs;
};

PolicyModel::PolicyModel(Kind kind, const KeyIndexer& indexer) : kind_(kind), indexer_(indexer) {
  const auto& s = indexer.setting();
  const int a = indexer.space().size();
  input_dim_ = s.rounds + (s.use_proc_id ? s.n : 0) + a * s.n;
}

int PolicyModel::layer_in(int layer) const { return layer == 0 ? input_dim_ : kHidden[static_cast<std::size_t>(layer - 1)]; }
int PolicyModel::layer_out(int layer) const { return layer == 3 ? alphabet() : kHidden[static_cast<std::size_t>(layer)]; }

std::size_t PolicyModel::layer_offset(int layer) const {
  std::size_t off = 0;
  for (int l = 0; l < layer; ++l) {
    off += static_cast<std::size_t>(layer_in(l) + 1) * static_cast<std::size_t>(layer_out(l));
  }
  return off;
}

PolicyModel PolicyModel::tabular(const KeyIndexer& indexer) {
  PolicyModel m(Kind::tabular, indexer);
  m.params_.assign(indexer.size() * static_cast<std::size_t>(indexer.space().size()), 0.0);
  m.m_.assign(m.params_.size(), 0.0);
  m.v_.assign(m.params_.size(), 0.0);
  return m;
}

PolicyModel PolicyModel::mlp(const KeyIndexer& indexer, Rng& rng) {
  PolicyModel m(Kind::mlp, indexer);
  m.params_.assign(m.layer_offset(4), 0.0);
  // Glorot-uniform weights, zero biases.
  for (int l = 0; l < 4; ++l) {
    const int in = m.layer_in(l);
    const int out = m.layer_out(l);
    const double limit = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> u(-limit, limit);
    double* w = m.params_.data() + m.layer_offset(l);
    for (int i = 0; i < in * out; ++i) w[i] = u(rng);
  }
  m.m_.assign(m.params_.size(), 0.0);
  m.v_.assign(m.params_.size(), 0.0);
  return m;
}

void PolicyModel::encode(std::size_t key_index, std::vector<int>& active) const {
  const auto key = indexer_.key(key_index);
  const auto& s = indexer_.setting();
  const int a = alphabet();
  active.clear();
  int base = 0;
  active.push_back(base + key.round - 1);
  base += s.rounds;
  if (s.use_proc_id) {
    active.push_back(base + *key.proc_id);
    base += s.n;
  }
  active.push_back(base + key.own);
  base += a;
  for (StateId o : key.others) {
    active.push_back(base + o);
    base += a;
  }
}

void PolicyModel::masked_softmax(int round, const double* logits, double* out) const {
  const int a = alphabet();
  const auto legal = indexer_.legal_outputs(round);
  std::fill(out, out + a, 0.0);
  double mx = -INFINITY;
  for (StateId s : legal) mx = std::max(mx, logits[s]);
  double z = 0.0;
  for (StateId s : legal) {
    out[s] = std::exp(logits[s] - mx);
    z += out[s];
  }
  for (StateId s : legal) out[s] /= z;
}

void PolicyModel::forward(const std::vector<int>& active, Activations& act) const {
  const double* p = params_.data();
  // Layer 0: the input is one-hot, so only active columns contribute.
  {
    const int in = layer_in(0);
    const int out = layer_out(0);
    const double* w = p + layer_offset(0);
    const double* b = w + static_cast<std::ptrdiff_t>(in) * out;
    auto& h = act.hidden[0];
    h.assign(static_cast<std::size_t>(out), 0.0);
    for (int o = 0; o < out; ++o) {
      double sum = b[o];
      const double* row = w + static_cast<std::ptrdiff_t>(o) * in;
      for (int i : active) sum += row[i];
      h[static_cast<std::size_t>(o)] = sum > 0.0 ? sum : 0.0;
    }
  }
  for (int l = 1; l < 4; ++l) {
    const int in = layer_in(l);
    const int out = layer_out(l);
    const double* w = p + layer_offset(l);
    const double* b = w + static_cast<std::ptrdiff_t>(in) * out;
    const auto& x = act.hidden[static_cast<std::size_t>(l - 1)];
    std::vector<double>& y = l < 3 ? act.hidden[static_cast<std::size_t>(l)] : act.logits;
    y.assign(static_cast<std::size_t>(out), 0.0);
    for (int o = 0; o < out; ++o) {
      const double* row = w + static_cast<std::ptrdiff_t>(o) * in;
      double sum = b[o];
      for (int i = 0; i < in; ++i) sum += row[i] * x[static_cast<std::size_t>(i)];
      y[static_cast<std::size_t>(o)] = (l < 3 && sum < 0.0) ? 0.0 : sum;
    }
  }
}

Distribution PolicyModel::predict_index(std::size_t key_index) const {
  const int a = alphabet();
  const int round = indexer_.round_of(key_index);
  Distribution out(static_cast<std::size_t>(a), 0.0);
  if (kind_ == Kind::tabular) {
    masked_softmax(round, params_.data() + key_index * static_cast<std::size_t>(a), out.data());
    return out;
  }
  std::vector<int> active;
  Activations act;
  encode(key_index, active);
  forward(active, act);
  masked_softmax(round, act.logits.data(), out.data());
  return out;
}

Distribution PolicyModel::predict(const TransitionKey& key) const {
  const auto i = indexer_.index(key);
  if (i == KeyIndexer::npos) throw ConfigError("predict on an illegal key");
  return predict_index(i);
}

std::vector<double> PolicyModel::predict_all() const {
  const auto a = static_cast<std::size_t>(alphabet());
  std::vector<double> table(indexer_.size() * a);
  for (std::size_t i = 0; i < indexer_.size(); ++i) {
    const auto d = predict_index(i);
    std::copy(d.begin(), d.end(), table.begin() + static_cast<std::ptrdiff_t>(i * a));
  }
  return table;
}

namespace {

double cross_entropy(const Distribution& target, const Distribution& probs) {
  double l = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] > 0.0) l -= target[i] * std::log(std::max(probs[i], 1e-300));
  }
  return l;
}

}  // namespace

double PolicyModel::loss(std::span<const TrainingPair* const> batch) const {
  if (batch.empty()) return 0.0;
  double total = 0.0;
  for (const auto* pair : batch) total += cross_entropy(pair->target, predict_index(pair->key_index));
  return total / static_cast<double>(batch.size());
}

double PolicyModel::loss_and_gradient(std::span<const TrainingPair* const> batch,
                                      std::vector<double>& grad) const {
  grad.assign(params_.size(), 0.0);
  if (batch.empty()) return 0.0;
  const int a = alphabet();
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;

  if (kind_ == Kind::tabular) {
    for (const auto* pair : batch) {
      const auto probs = predict_index(pair->key_index);
      total += cross_entropy(pair->target, probs);
      double* g = grad.data() + pair->key_index * static_cast<std::size_t>(a);
      for (StateId s : indexer_.legal_outputs(indexer_.round_of(pair->key_index))) {
        g[s] += scale * (probs[static_cast<std::size_t>(s)] - pair->target[static_cast<std::size_t>(s)]);
      }
    }
    return total * scale;
  }

  std::vector<int> active;
  Activations act;
  act.probs.resize(static_cast<std::size_t>(a));
  std::array<std::vector<double>, 4> delta;  // d loss / d pre-activation per layer
  for (const auto* pair : batch) {
    encode(pair->key_index, active);
    forward(active, act);
    const int round = indexer_.round_of(pair->key_index);
    masked_softmax(round, act.logits.data(), act.probs.data());
    total += cross_entropy(pair->target, act.probs);

    delta[3].assign(static_cast<std::size_t>(a), 0.0);
    for (StateId s : indexer_.legal_outputs(round)) {
      const auto us = static_cast<std::size_t>(s);
      delta[3][us] = scale * (act.probs[us] - pair->target[us]);
    }
    for (int l = 3; l >= 1; --l) {
      const int in = layer_in(l);
      const int out = layer_out(l);
      const std::size_t off = layer_offset(l);
      const double* w = params_.data() + off;
      double* gw = grad.data() + off;
      double* gb = gw + static_cast<std::ptrdiff_t>(in) * out;
      const auto& x = act.hidden[static_cast<std::size_t>(l - 1)];
      auto& dprev = delta[static_cast<std::size_t>(l - 1)];
      dprev.assign(static_cast<std::size_t>(in), 0.0);
      const auto& d = delta[static_cast<std::size_t>(l)];
      for (int o = 0; o < out; ++o) {
        const double dv = d[static_cast<std::size_t>(o)];
        if (dv == 0.0) continue;
        gb[o] += dv;
        const double* row = w + static_cast<std::ptrdiff_t>(o) * in;
        double* grow = gw + static_cast<std::ptrdiff_t>(o) * in;
        for (int i = 0; i < in; ++i) {
          grow[i] += dv * x[static_cast<std::size_t>(i)];
          dprev[static_cast<std::size_t>(i)] += dv * row[i];
        }
      }
      // ReLU derivative of the layer feeding this one.
      for (int i = 0; i < in; ++i) {
        if (x[static_cast<std::size_t>(i)] <= 0.0) dprev[static_cast<std::size_t>(i)] = 0.0;
      }
    }
    {
      const int in = layer_in(0);
      const int out = layer_out(0);
      double* gw = grad.data() + layer_offset(0);
      double* gb = gw + static_cast<std::ptrdiff_t>(in) * out;
      for (int o = 0; o < out; ++o) {
        const double dv = delta[0][static_cast<std::size_t>(o)];
        if (dv == 0.0) continue;
        gb[o] += dv;
        double* grow = gw + static_cast<std::ptrdiff_t>(o) * in;
        for (int i : active) grow[i] += dv;
      }
    }
  }
  return total * scale;
}

void PolicyModel::apply_gradient(std::span<const double> grad, double learning_rate) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-7;
  ++step_;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const double g = grad[i];
    if (g == 0.0 && m_[i] == 0.0 && v_[i] == 0.0) continue;
    m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * g;
    v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * g * g;
    const double mhat = m_[i] / c1;
    const double vhat = v_[i] / c2;
    params_[i] -= learning_rate * mhat / (std::sqrt(vhat) + kEps);
  }
}

nlohmann::json PolicyModel::to_json() const {
  const auto& s = indexer_.setting();
  nlohmann::json j;
  j["format"] = "protosynth-policy";
  j["version"] = kCheckpointVersion;
  j["implementation"] = kind_ == Kind::mlp ? "mlp" : "tabular";
  j["encoding"] = {{"n", s.n},
                   {"rounds", s.rounds},
                   {"f", s.f},
                   {"k", s.k},
                   {"use_proc_id", s.use_proc_id},
                   {"alphabet", alphabet()},
                   {"input_dim", input_dim_},
                   {"num_keys", indexer_.size()},
                   {"hidden", kHidden}};
  j["params"] = params_;
  return j;
}

PolicyModel PolicyModel::from_json(const nlohmann::json& j, const KeyIndexer& indexer) {
  try {
    if (j.at("format").get<std::string>() != "protosynth-policy") throw ConfigError("not a policy checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion) throw ConfigError("unsupported checkpoint version");
    const auto impl = j.at("implementation").get<std::string>();
    const auto& enc = j.at("encoding");
    const auto& s = indexer.setting();
    if (enc.at("n").get<int>() != s.n || enc.at("rounds").get<int>() != s.rounds ||
        enc.at("k").get<int>() != s.k || enc.at("use_proc_id").get<bool>() != s.use_proc_id ||
        enc.at("alphabet").get<int>() != indexer.space().size()) {
      throw ConfigError("checkpoint encoding does not match the setting");
    }
    Rng rng(0);
    PolicyModel m = impl == "mlp" ? mlp(indexer, rng) : tabular(indexer);
    auto params = j.at("params").get<std::vector<double>>();
    if (params.size() != m.params_.size()) throw ConfigError("checkpoint parameter count mismatch");
    m.params_ = std::move(params);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
}

std::vector<double> train(PolicyModel& model, const TrainingBuffer& buffer,
                          const TrainOptions& options, Rng& rng) {
  std::vector<double> history;
  if (buffer.empty()) return history;
  std::vector<std::size_t> order(buffer.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<const TrainingPair*> batch;
  std::vector<double> grad;
  const auto bs = static_cast<std::size_t>(std::max(1, options.batch_size));
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + bs); ++i) batch.push_back(&buffer[order[i]]);
      const double l = model.loss_and_gradient(batch, grad);
      model.apply_gradient(grad, options.learning_rate);
      total += l * static_cast<double>(batch.size());
    }
    history.push_back(total / static_cast<double>(order.size()));
  }
  return history;
}

StateId argmax_output(std::span<const double> dist, std::span<const StateId> legal) {
  StateId best = legal.front();
  for (StateId s : legal) {
    if (dist[static_cast<std::size_t>(s)] > dist[static_cast<std::size_t>(best)]) best = s;
  }
  return best;
}

}  // namespace protosynth
