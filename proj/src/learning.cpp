#include "learning.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "prng.hpp"

namespace eel {
namespace {

constexpr double kUnitScale = 0x1.0p-53;

double to_unit(std::uint64_t u) { return static_cast<double>(u >> 11) * kUnitScale; }

double unit_draw(std::uint64_t value, std::uint64_t seed) {
  return to_unit(hash64(value, seed));
}

// Deterministic wrong answer that is never the true label.
int wrong_label(int truth, int num_classes, std::uint64_t value, std::uint64_t seed) {
  if (num_classes < 2) return truth;
  auto shift = 1 + static_cast<int>(hash64(value ^ 0xa5a5a5a5ULL, seed) %
                                    static_cast<std::uint64_t>(num_classes - 1));
  return (truth + shift) % num_classes;
}

}  // namespace

void ConvergenceTracker::observe(double accuracy) {
  history_.push_back(accuracy);
  if (latched_) return;
  auto n = history_.size();
  if (n < static_cast<std::size_t>(window_) + 1) return;
  double gain = history_[n - 1] - history_[n - 1 - static_cast<std::size_t>(window_)];
  if (gain < epsilon_) latched_ = true;
}

SyntheticLearner::SyntheticLearner(const SyntheticCfg& cfg, double epsilon, int window)
    : SubModel(epsilon, window), cfg_(cfg) {
  if (cfg_.num_classes < 2) throw std::invalid_argument("SyntheticLearner: num_classes");
}

void SyntheticLearner::train(const std::vector<TrainSample>& batch) {
  for (const auto& s : batch) {
    if (seen_.insert(s.uid).second) digest_ ^= hash64(s.uid, 0xd16e57ULL);
  }
}

double SyntheticLearner::accuracy_at(std::uint64_t items) const {
  double u = static_cast<double>(items);
  return cfg_.ceil_acc - (cfg_.ceil_acc - cfg_.floor_acc) * std::exp(-u / cfg_.tau);
}

double SyntheticLearner::validation_accuracy() const {
  return accuracy_at(seen_.size());
}

std::uint64_t SyntheticLearner::stream_seed_for(const EvalInput& x) const {
  double coin = unit_draw(x.id, derive_seed(cfg_.shared_seed, "coin"));
  if (coin < cfg_.rho) return derive_seed(cfg_.shared_seed, "draw");
  return hash64(digest_, cfg_.private_seed);
}

bool SyntheticLearner::errs_on(const EvalInput& x) const {
  double err = 1.0 - accuracy_at(seen_.size());
  return unit_draw(x.id, stream_seed_for(x)) < err;
}

int SyntheticLearner::predict_label(const EvalInput& x) const {
  if (!errs_on(x)) return x.label;
  return wrong_label(x.label, cfg_.num_classes, x.id, stream_seed_for(x));
}

double SyntheticLearner::predict_value(const EvalInput& x) const {
  double err = 1.0 - accuracy_at(seen_.size());
  std::uint64_t stream = stream_seed_for(x);
  double sign = (hash64(x.id ^ 0x5167ULL, stream) & 1u) ? 1.0 : -1.0;
  return std::sqrt(err) * sign;
}

CoverageLearner::CoverageLearner(const CoverageCfg& cfg, double epsilon, int window)
    : SubModel(epsilon, window), cfg_(cfg) {
  if (cfg_.class_universe.empty()) throw std::invalid_argument("CoverageLearner: class_universe");
  if (cfg_.class_shares.size() != cfg_.class_universe.size())
    throw std::invalid_argument("CoverageLearner: class_shares");
  if (cfg_.explain_k < 1) throw std::invalid_argument("CoverageLearner: explain_k");
  class_offset_.resize(cfg_.class_universe.size() + 1, 0);
  for (std::size_t c = 0; c < cfg_.class_universe.size(); ++c)
    class_offset_[c + 1] = class_offset_[c] + cfg_.class_universe[c];
  per_class_.assign(cfg_.class_universe.size(), 0);
}

void CoverageLearner::train(const std::vector<TrainSample>& batch) {
  for (const auto& s : batch) {
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= per_class_.size()) continue;
    if (trained_.insert(s.uid).second) {
      ++per_class_[static_cast<std::size_t>(s.label)];
      digest_ ^= hash64(s.uid, 0xc0ffeeULL);
    }
  }
}

void CoverageLearner::sync_to(const std::vector<TrainSample>& items) {
  trained_.clear();
  per_class_.assign(cfg_.class_universe.size(), 0);
  digest_ = 0;
  train(items);
}

bool CoverageLearner::covering_explainer(const EvalInput& x, std::uint64_t& eid_out) const {
  if (x.label < 0 || static_cast<std::size_t>(x.label) >= cfg_.class_universe.size()) return false;
  auto c = static_cast<std::size_t>(x.label);
  std::uint64_t size = cfg_.class_universe[c];
  if (size == 0) return false;
  std::uint64_t base = class_offset_[c];
  std::uint64_t eseed = derive_seed(cfg_.shared_seed, "explain");
  for (int j = 0; j < cfg_.explain_k; ++j) {
    std::uint64_t eid = base + hash64(x.id ^ mix64(static_cast<std::uint64_t>(j) + 1), eseed) % size;
    if (trained_.count(eid)) {
      eid_out = eid;
      return true;
    }
  }
  return false;
}

bool CoverageLearner::covered(const EvalInput& x) const {
  std::uint64_t eid;
  return covering_explainer(x, eid);
}

bool CoverageLearner::correct(const EvalInput& x) const {
  std::uint64_t eid;
  if (covering_explainer(x, eid)) {
    // Residual coin keyed by the item that provides the coverage: models that
    // learned the same explainer agree exactly, models covering x through
    // different explainers err independently. Error correlation across models
    // therefore tracks training-set overlap.
    return unit_draw(x.id ^ mix64(eid), derive_seed(cfg_.shared_seed, "resid")) < cfg_.ceil_acc;
  }
  return unit_draw(x.id, hash64(digest_, cfg_.private_seed)) < cfg_.floor_acc;
}

int CoverageLearner::predict_label(const EvalInput& x) const {
  if (correct(x)) return x.label;
  auto k = static_cast<int>(cfg_.class_universe.size());
  std::uint64_t eid;
  std::uint64_t seed = covering_explainer(x, eid)
                           ? hash64(eid, derive_seed(cfg_.shared_seed, "resid"))
                           : hash64(digest_, cfg_.private_seed);
  return wrong_label(x.label, k, x.id, seed);
}

double CoverageLearner::predict_value(const EvalInput& x) const {
  return correct(x) ? 1.0 : 0.0;
}

double CoverageLearner::validation_accuracy() const {
  // P(covered) has closed form: explaining items are iid uniform over the
  // class slice, so coverage misses with probability (1 - u_c/U_c)^k.
  double acc = 0.0;
  for (std::size_t c = 0; c < cfg_.class_universe.size(); ++c) {
    double share = cfg_.class_shares[c];
    if (share <= 0.0) continue;
    double u_c = static_cast<double>(per_class_[c]);
    double cap = static_cast<double>(cfg_.class_universe[c]);
    double p_cov = 0.0;
    if (cap > 0.0) {
      double miss = 1.0 - std::min(u_c, cap) / cap;
      p_cov = 1.0 - std::pow(miss, cfg_.explain_k);
    }
    acc += share * (cfg_.floor_acc + (cfg_.ceil_acc - cfg_.floor_acc) * p_cov);
  }
  return acc;
}

std::vector<double> blob_features(std::uint64_t uid, int label, int dim,
                                  std::uint64_t feature_seed) {
  std::uint64_t center_seed = derive_seed(feature_seed, "center");
  std::uint64_t noise_seed = derive_seed(feature_seed, "noise");
  std::vector<double> x(static_cast<std::size_t>(dim));
  for (int d = 0; d < dim; ++d) {
    std::uint64_t cd = (static_cast<std::uint64_t>(label) << 16) |
                       static_cast<std::uint64_t>(d);
    double center = 2.0 * unit_draw(cd, center_seed) - 1.0;
    double noise = 0.4 * (2.0 * unit_draw(uid ^ mix64(static_cast<std::uint64_t>(d) + 1),
                                          noise_seed) -
                          1.0);
    x[static_cast<std::size_t>(d)] = center + noise;
  }
  return x;
}

TinyMlp::TinyMlp(const MlpCfg& cfg, double epsilon, int window)
    : SubModel(epsilon, window), cfg_(cfg) {
  if (cfg_.class_shares.size() != static_cast<std::size_t>(cfg_.num_classes))
    throw std::invalid_argument("TinyMlp: class_shares");
  auto h = static_cast<std::size_t>(cfg_.hidden);
  auto in = static_cast<std::size_t>(cfg_.input_dim);
  auto out = static_cast<std::size_t>(cfg_.num_classes);
  w1_.resize(h * in);
  b1_.assign(h, 0.0);
  w2_.resize(out * h);
  b2_.assign(out, 0.0);
  Rng rng(derive_seed(cfg_.seed, "init"));
  double s1 = 1.0 / std::sqrt(static_cast<double>(in));
  for (auto& w : w1_) w = s1 * (2.0 * rng.next_double() - 1.0);
  double s2 = 1.0 / std::sqrt(static_cast<double>(h));
  for (auto& w : w2_) w = s2 * (2.0 * rng.next_double() - 1.0);

  // Fixed validation set drawn once from the class mix.
  std::uint64_t vseed = derive_seed(cfg_.seed, "val");
  val_.reserve(static_cast<std::size_t>(cfg_.val_draws));
  for (int i = 0; i < cfg_.val_draws; ++i) {
    double u = unit_draw(static_cast<std::uint64_t>(i), vseed);
    int label = cfg_.num_classes - 1;
    double acc = 0.0;
    for (int c = 0; c < cfg_.num_classes; ++c) {
      acc += cfg_.class_shares[static_cast<std::size_t>(c)];
      if (u < acc) {
        label = c;
        break;
      }
    }
    val_.push_back(EvalInput{0x100000000ULL + static_cast<std::uint64_t>(i), label});
  }
}

std::vector<double> TinyMlp::forward(const std::vector<double>& x) const {
  auto h = static_cast<std::size_t>(cfg_.hidden);
  auto in = static_cast<std::size_t>(cfg_.input_dim);
  auto out = static_cast<std::size_t>(cfg_.num_classes);
  std::vector<double> hid(h);
  for (std::size_t i = 0; i < h; ++i) {
    double z = b1_[i];
    for (std::size_t j = 0; j < in; ++j) z += w1_[i * in + j] * x[j];
    hid[i] = std::tanh(z);
  }
  std::vector<double> logits(out);
  for (std::size_t k = 0; k < out; ++k) {
    double z = b2_[k];
    for (std::size_t i = 0; i < h; ++i) z += w2_[k * h + i] * hid[i];
    logits[k] = z;
  }
  return logits;
}

void TinyMlp::step(const std::vector<TrainSample>& chunk) {
  auto h = static_cast<std::size_t>(cfg_.hidden);
  auto in = static_cast<std::size_t>(cfg_.input_dim);
  auto out = static_cast<std::size_t>(cfg_.num_classes);
  std::vector<double> gw1(w1_.size(), 0.0), gb1(b1_.size(), 0.0);
  std::vector<double> gw2(w2_.size(), 0.0), gb2(b2_.size(), 0.0);
  for (const auto& s : chunk) {
    auto x = blob_features(s.uid, s.label, cfg_.input_dim, derive_seed(cfg_.seed, "feat"));
    std::vector<double> hid(h), hraw(h);
    for (std::size_t i = 0; i < h; ++i) {
      double z = b1_[i];
      for (std::size_t j = 0; j < in; ++j) z += w1_[i * in + j] * x[j];
      hraw[i] = z;
      hid[i] = std::tanh(z);
    }
    std::vector<double> logits(out);
    double maxv = -1e300;
    for (std::size_t k = 0; k < out; ++k) {
      double z = b2_[k];
      for (std::size_t i = 0; i < h; ++i) z += w2_[k * h + i] * hid[i];
      logits[k] = z;
      maxv = std::max(maxv, z);
    }
    double denom = 0.0;
    for (auto& z : logits) denom += std::exp(z - maxv);
    std::vector<double> dlogit(out);
    for (std::size_t k = 0; k < out; ++k) {
      double p = std::exp(logits[k] - maxv) / denom;
      dlogit[k] = p - (static_cast<int>(k) == s.label ? 1.0 : 0.0);
    }
    std::vector<double> dhid(h, 0.0);
    for (std::size_t k = 0; k < out; ++k) {
      gb2[k] += dlogit[k];
      for (std::size_t i = 0; i < h; ++i) {
        gw2[k * h + i] += dlogit[k] * hid[i];
        dhid[i] += w2_[k * h + i] * dlogit[k];
      }
    }
    for (std::size_t i = 0; i < h; ++i) {
      double dz = dhid[i] * (1.0 - hid[i] * hid[i]);
      gb1[i] += dz;
      for (std::size_t j = 0; j < in; ++j) gw1[i * in + j] += dz * x[j];
    }
  }
  double scale = cfg_.learn_rate / static_cast<double>(chunk.size());
  for (std::size_t i = 0; i < w1_.size(); ++i) w1_[i] -= scale * gw1[i];
  for (std::size_t i = 0; i < b1_.size(); ++i) b1_[i] -= scale * gb1[i];
  for (std::size_t i = 0; i < w2_.size(); ++i) w2_[i] -= scale * gw2[i];
  for (std::size_t i = 0; i < b2_.size(); ++i) b2_[i] -= scale * gb2[i];
}

void TinyMlp::train(const std::vector<TrainSample>& batch) {
  for (const auto& s : batch) seen_.insert(s.uid);
  for (std::size_t off = 0; off < batch.size(); off += static_cast<std::size_t>(cfg_.batch_size)) {
    auto end = std::min(batch.size(), off + static_cast<std::size_t>(cfg_.batch_size));
    step(std::vector<TrainSample>(batch.begin() + static_cast<std::ptrdiff_t>(off),
                                  batch.begin() + static_cast<std::ptrdiff_t>(end)));
  }
}

int TinyMlp::predict_label(const EvalInput& x) const {
  auto logits = forward(blob_features(x.id, x.label, cfg_.input_dim, derive_seed(cfg_.seed, "feat")));
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

double TinyMlp::predict_value(const EvalInput& x) const {
  return predict_label(x) == x.label ? 1.0 : 0.0;
}

double TinyMlp::validation_accuracy() const {
  if (val_.empty()) return 0.0;
  int hits = 0;
  for (const auto& v : val_)
    if (predict_label(v) == v.label) ++hits;
  return static_cast<double>(hits) / static_cast<double>(val_.size());
}

double CovMatrix::trace() const {
  double t = 0.0;
  for (int i = 0; i < n; ++i) t += at(i, i);
  return t;
}

CovMatrix estimate_covariance(const std::vector<const SubModel*>& models,
                              const std::vector<EvalInput>& val,
                              const std::function<double(const EvalInput&)>& truth) {
  auto n = static_cast<int>(models.size());
  CovMatrix c(n);
  if (val.empty()) return c;
  std::vector<double> resid(static_cast<std::size_t>(n));
  for (const auto& x : val) {
    double f = truth(x);
    for (int i = 0; i < n; ++i)
      resid[static_cast<std::size_t>(i)] = models[static_cast<std::size_t>(i)]->predict_value(x) - f;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j)
        c.at(i, j) += resid[static_cast<std::size_t>(i)] * resid[static_cast<std::size_t>(j)];
  }
  double inv = 1.0 / static_cast<double>(val.size());
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      c.at(i, j) *= inv;
      c.at(j, i) = c.at(i, j);
    }
  return c;
}

double expected_ensemble_error(double err, int n, double theta) {
  return err * (1.0 + theta * (n - 1)) / static_cast<double>(n);
}

double soft_vote(const std::vector<double>& weights, const std::vector<double>& outputs) {
  double v = 0.0;
  for (std::size_t i = 0; i < weights.size() && i < outputs.size(); ++i)
    v += weights[i] * outputs[i];
  return v;
}

namespace {

// Gaussian elimination with partial pivoting on a dense symmetric system.
// Returns false when a pivot falls below the relative tolerance.
bool solve_ones(std::vector<double> a, int n, std::vector<double>& x) {
  x.assign(static_cast<std::size_t>(n), 1.0);
  double scale = 0.0;
  for (const auto& v : a) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return false;
  double tol = scale * 1e-12;
  auto idx = [n](int i, int j) { return static_cast<std::size_t>(i) * n + j; };
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a[idx(r, col)]) > std::abs(a[idx(piv, col)])) piv = r;
    if (std::abs(a[idx(piv, col)]) < tol) return false;
    if (piv != col) {
      for (int j = 0; j < n; ++j) std::swap(a[idx(piv, j)], a[idx(col, j)]);
      std::swap(x[static_cast<std::size_t>(piv)], x[static_cast<std::size_t>(col)]);
    }
    double d = a[idx(col, col)];
    for (int r = col + 1; r < n; ++r) {
      double f = a[idx(r, col)] / d;
      if (f == 0.0) continue;
      for (int j = col; j < n; ++j) a[idx(r, j)] -= f * a[idx(col, j)];
      x[static_cast<std::size_t>(r)] -= f * x[static_cast<std::size_t>(col)];
    }
  }
  for (int r = n - 1; r >= 0; --r) {
    double v = x[static_cast<std::size_t>(r)];
    for (int j = r + 1; j < n; ++j) v -= a[idx(r, j)] * x[static_cast<std::size_t>(j)];
    x[static_cast<std::size_t>(r)] = v / a[idx(r, r)];
  }
  return true;
}

}  // namespace

std::vector<double> optimal_weights(const CovMatrix& c, double ridge_scale) {
  int n = c.n;
  std::vector<double> uniform(static_cast<std::size_t>(n),
                              n > 0 ? 1.0 / static_cast<double>(n) : 0.0);
  if (n == 0) return {};
  if (n == 1) return {1.0};

  std::vector<int> free_idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) free_idx[static_cast<std::size_t>(i)] = i;

  // Ridge is a rescue for singular systems, not a default: it would bias the
  // exact solutions the clean path produces.
  double ridge = ridge_scale * c.trace() / static_cast<double>(n);

  for (int pass = 0; pass <= n; ++pass) {
    auto m = static_cast<int>(free_idx.size());
    if (m == 0) return uniform;
    std::vector<double> sub(static_cast<std::size_t>(m) * m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        sub[static_cast<std::size_t>(i) * m + j] =
            c.at(free_idx[static_cast<std::size_t>(i)], free_idx[static_cast<std::size_t>(j)]);
    std::vector<double> x;
    bool ok = solve_ones(sub, m, x);
    if (!ok && ridge > 0.0) {
      for (int i = 0; i < m; ++i) sub[static_cast<std::size_t>(i) * m + i] += ridge;
      ok = solve_ones(sub, m, x);
    }
    if (!ok) return uniform;
    double sum = 0.0;
    for (const auto& v : x) sum += v;
    if (!(sum > 0.0)) return uniform;
    for (auto& v : x) v /= sum;

    int worst = -1;
    double worst_val = -1e-10;
    for (int i = 0; i < m; ++i)
      if (x[static_cast<std::size_t>(i)] < worst_val) {
        worst_val = x[static_cast<std::size_t>(i)];
        worst = i;
      }
    if (worst < 0) {
      std::vector<double> w(static_cast<std::size_t>(n), 0.0);
      double clamped_sum = 0.0;
      for (int i = 0; i < m; ++i) {
        double v = std::max(0.0, x[static_cast<std::size_t>(i)]);
        w[static_cast<std::size_t>(free_idx[static_cast<std::size_t>(i)])] = v;
        clamped_sum += v;
      }
      if (!(clamped_sum > 0.0)) return uniform;
      for (auto& v : w) v /= clamped_sum;
      return w;
    }
    free_idx.erase(free_idx.begin() + worst);
  }
  return uniform;
}

double ensemble_error(const CovMatrix& c, const std::vector<double>& w) {
  double e = 0.0;
  for (int i = 0; i < c.n; ++i)
    for (int j = 0; j < c.n; ++j)
      e += w[static_cast<std::size_t>(i)] * c.at(i, j) * w[static_cast<std::size_t>(j)];
  return e;
}

}  // namespace eel
