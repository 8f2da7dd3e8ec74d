#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

namespace eel {

// One labeled item fed to a model. uid identifies the underlying datum, so
// re-training on a duplicate does not count as new knowledge.
struct TrainSample {
  std::uint64_t uid = 0;
  int label = 0;
};

// A point the model is asked about. id seeds the per-input draws.
struct EvalInput {
  std::uint64_t id = 0;
  int label = 0;
};

// Plateau detector: latches once validation accuracy improves by less than
// epsilon over the last `window` training rounds. Never unlatches.
class ConvergenceTracker {
 public:
  ConvergenceTracker(double epsilon, int window)
      : epsilon_(epsilon), window_(window) {}

  void observe(double accuracy);
  bool latched() const { return latched_; }
  int rounds() const { return static_cast<int>(history_.size()); }

 private:
  double epsilon_;
  int window_;
  std::vector<double> history_;
  bool latched_ = false;
};

class SubModel {
 public:
  SubModel(double epsilon, int window) : tracker_(epsilon, window) {}
  virtual ~SubModel() = default;

  virtual void train(const std::vector<TrainSample>& batch) = 0;
  virtual double validation_accuracy() const = 0;
  virtual int predict_label(const EvalInput& x) const = 0;
  // Regression-view output; each implementation documents its ground truth
  // convention for covariance estimation.
  virtual double predict_value(const EvalInput& x) const = 0;
  virtual std::uint64_t distinct_items_seen() const = 0;

  // One training round has completed; feeds the plateau detector.
  void record_round() { tracker_.observe(validation_accuracy()); }
  bool converged() const { return tracker_.latched(); }
  int rounds() const { return tracker_.rounds(); }

 protected:
  ConvergenceTracker tracker_;
};

// Closed-curve stand-in model. Accuracy follows
//   a(u) = ceil - (ceil - floor) * exp(-u / tau)
// over u distinct items seen. Error draws per input come from either a draw
// shared by every model (probability rho, same coin for all models) or a
// stream keyed by (private_seed, digest of the trained set), so models with
// the same seed and the same training history err identically while models
// with different histories err independently. predict_value returns
// sqrt(err) * sign, ground truth 0.
struct SyntheticCfg {
  double floor_acc = 0.5;
  double ceil_acc = 0.95;
  double tau = 500.0;
  double rho = 0.0;
  int num_classes = 6;
  std::uint64_t shared_seed = 1;
  std::uint64_t private_seed = 2;
};

class SyntheticLearner : public SubModel {
 public:
  SyntheticLearner(const SyntheticCfg& cfg, double epsilon, int window);

  void train(const std::vector<TrainSample>& batch) override;
  double validation_accuracy() const override;
  int predict_label(const EvalInput& x) const override;
  double predict_value(const EvalInput& x) const override;
  std::uint64_t distinct_items_seen() const override { return seen_.size(); }

  double accuracy_at(std::uint64_t items) const;

 private:
  bool errs_on(const EvalInput& x) const;
  std::uint64_t stream_seed_for(const EvalInput& x) const;

  SyntheticCfg cfg_;
  std::unordered_set<std::uint64_t> seen_;
  std::uint64_t digest_ = 0;
};

// Coverage model: an input is answered well only if the model has trained on
// at least one of the input's explaining items, a small set drawn from the
// input's class slice of the item universe. Knowledge generalizes per class;
// mistakes correlate exactly as far as training sets overlap. predict_value
// returns 1 for a correct answer and 0 otherwise, ground truth 1.
struct CoverageCfg {
  std::vector<std::uint64_t> class_universe;  // items per class, uid-banded
  std::vector<double> class_shares;           // validation mix over classes
  int explain_k = 3;
  double floor_acc = 1.0 / 6.0;
  double ceil_acc = 0.95;
  std::uint64_t shared_seed = 1;
  std::uint64_t private_seed = 2;
};

class CoverageLearner : public SubModel {
 public:
  CoverageLearner(const CoverageCfg& cfg, double epsilon, int window);

  void train(const std::vector<TrainSample>& batch) override;
  // Replaces the knowledge set wholesale. Models whose training data lives in
  // a bounded cache forget what the cache evicts; call this with the cache's
  // current learning items each round.
  void sync_to(const std::vector<TrainSample>& items);
  double validation_accuracy() const override;
  int predict_label(const EvalInput& x) const override;
  double predict_value(const EvalInput& x) const override;
  std::uint64_t distinct_items_seen() const override { return trained_.size(); }

  std::uint64_t distinct_in_class(int c) const { return per_class_[c]; }

 private:
  bool covering_explainer(const EvalInput& x, std::uint64_t& eid_out) const;
  bool covered(const EvalInput& x) const;
  bool correct(const EvalInput& x) const;

  CoverageCfg cfg_;
  std::vector<std::uint64_t> class_offset_;
  std::unordered_set<std::uint64_t> trained_;
  std::vector<std::uint64_t> per_class_;
  std::uint64_t digest_ = 0;
};

// Single-hidden-layer softmax classifier trained with plain mini-batch
// gradient descent. Features are deterministic class blobs derived from the
// sample uid. Small on purpose; exists to show a gradient-trained model drops
// into the same SubModel seam. predict_value is correctness, ground truth 1.
struct MlpCfg {
  int input_dim = 8;
  int hidden = 16;
  int num_classes = 6;
  double learn_rate = 0.05;
  int batch_size = 32;
  int val_draws = 400;
  std::vector<double> class_shares;
  std::uint64_t seed = 7;
};

std::vector<double> blob_features(std::uint64_t uid, int label, int dim,
                                  std::uint64_t feature_seed);

class TinyMlp : public SubModel {
 public:
  TinyMlp(const MlpCfg& cfg, double epsilon, int window);

  void train(const std::vector<TrainSample>& batch) override;
  double validation_accuracy() const override;
  int predict_label(const EvalInput& x) const override;
  double predict_value(const EvalInput& x) const override;
  std::uint64_t distinct_items_seen() const override { return seen_.size(); }

 private:
  std::vector<double> forward(const std::vector<double>& x) const;  // logits
  void step(const std::vector<TrainSample>& chunk);

  MlpCfg cfg_;
  std::vector<double> w1_, b1_, w2_, b2_;  // hidden x in, hidden, out x hidden, out
  std::unordered_set<std::uint64_t> seen_;
  std::vector<EvalInput> val_;
};

// Dense symmetric error-covariance estimate over a validation set.
struct CovMatrix {
  int n = 0;
  std::vector<double> a;  // row-major n*n

  explicit CovMatrix(int size) : n(size), a(static_cast<std::size_t>(size) * size, 0.0) {}
  double& at(int i, int j) { return a[static_cast<std::size_t>(i) * n + j]; }
  double at(int i, int j) const { return a[static_cast<std::size_t>(i) * n + j]; }
  double trace() const;
};

// Mean over the validation set of (h_i - f)(h_j - f).
CovMatrix estimate_covariance(const std::vector<const SubModel*>& models,
                              const std::vector<EvalInput>& val,
                              const std::function<double(const EvalInput&)>& truth);

// Average error of an n-model ensemble whose members all carry error `err`
// with pairwise correlation theta.
double expected_ensemble_error(double err, int n, double theta);

double soft_vote(const std::vector<double>& weights, const std::vector<double>& outputs);

// Minimum-variance weights on the simplex: solve (C + ridge I) w = 1,
// normalize, then clamp-and-resolve until no weight is negative. Falls back
// to uniform weights when the system is too ill-conditioned to solve.
std::vector<double> optimal_weights(const CovMatrix& c, double ridge_scale = 1e-8);

double ensemble_error(const CovMatrix& c, const std::vector<double>& w);

}  // namespace eel
