#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "cocreate/rng.hpp"

namespace cocreate::nn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Named parameter tensors in stable registration order.  Vectors are stored
// as single-column matrices.  Gradients live in a parallel buffer and are
// accumulated by Tape::backward.
class ParamStore {
 public:
  enum class Init { Zero, One, FanInUniform };

  // fan_in controls the FanInUniform bound U(-1/sqrt(fan_in), +1/sqrt(fan_in)).
  int add(const std::string& name, int rows, int cols, Init init, int fan_in = 1);

  int count() const { return static_cast<int>(values_.size()); }
  const std::string& name(int id) const { return names_[id]; }
  Mat& value(int id) { return values_[id]; }
  const Mat& value(int id) const { return values_[id]; }
  Mat& grad(int id) { return grads_[id]; }
  const Mat& grad(int id) const { return grads_[id]; }

  void zero_grad();
  // (Re)draws every FanInUniform tensor; Zero/One tensors are reset to their
  // constants.  Same seed, same shapes -> identical values.
  void init_params(Rng& rng);

  std::size_t flat_size() const;
  void get_flat(std::vector<double>& out) const;
  void set_flat(const std::vector<double>& in);
  void get_grad_flat(std::vector<double>& out) const;

  // Throws if any gradient entry is non-finite.
  void check_grads_finite() const;

 private:
  struct Meta {
    Init init;
    int fan_in;
  };
  std::vector<std::string> names_;
  std::vector<Mat> values_;
  std::vector<Mat> grads_;
  std::vector<Meta> meta_;
};

// Define-by-run reverse-mode tape over vector-valued nodes.  Scalars are
// size-1 vectors.  Nodes are created by the factory methods; backward()
// walks the tape in reverse and accumulates parameter gradients into the
// ParamStore.
class Tape {
 public:
  explicit Tape(ParamStore* params) : params_(params) {}

  // Leaf holding a constant (no gradient flows into it).
  int input(const Vec& v);
  int input(Vec&& v);

  // W x (+ b).  pass b = -1 for no bias.
  int affine(int W, int b, int x);
  int add(int a, int b);
  int sub(int a, int b);
  int cmul(int a, int b);          // elementwise product
  int scale(int a, double c);
  int add_const(int a, double c);
  int slice(int a, int offset, int len);
  int sigmoid(int a);
  int tanh_(int a);
  int relu(int a);
  int exp_(int a);
  int min2(int a, int b);          // elementwise min; ties take a's branch
  int clip(int a, double lo, double hi);
  int layer_norm(int x, int gain, int bias, double epsilon);
  int pick(int a, int k);          // scalar a[k]
  int sum(int a);                  // scalar sum of entries
  int list_sum(const std::vector<int>& scalars);

  // Log-probability of category k under a feasibility-masked softmax of the
  // logits; masked-out categories have probability exactly 0.
  int masked_categorical_logprob(int logits, const std::vector<std::uint8_t>& mask, int k);
  int masked_categorical_entropy(int logits, const std::vector<std::uint8_t>& mask);
  // Joint log-probability / entropy of independent Bernoulli bits with the
  // given logits (numerically stable softplus form).
  int bernoulli_logprob(int logits, const std::vector<std::uint8_t>& bits);
  int bernoulli_entropy(int logits);

  const Vec& val(int id) const { return nodes_[id].val; }
  double scalar(int id) const { return nodes_[id].val[0]; }
  int size() const { return static_cast<int>(nodes_.size()); }

  // Reverse sweep from a scalar loss node.  Node gradients are local to the
  // call; parameter gradients accumulate into the ParamStore.  Throws on a
  // non-finite loss value.
  void backward(int loss);

  // Drop all nodes, keep capacity.
  void clear();

 private:
  enum class Op {
    Input, Affine, Add, Sub, CMul, Scale, AddConst, Slice, Sigmoid, Tanh, Relu,
    Exp, Min2, Clip, LayerNorm, Pick, Sum, ListSum, MaskedCatLogProb,
    MaskedCatEntropy, BernoulliLogProb, BernoulliEntropy,
  };
  struct Node {
    Op op;
    int a = -1, b = -1;   // operand node ids
    int pa = -1, pb = -1; // parameter ids
    int k = 0, len = 0;   // pick index / slice window
    double c0 = 0.0, c1 = 0.0;
    Vec val;
    Vec grad;
    Vec cache;            // op-specific forward cache (softmax probs, x-hat, ...)
    std::vector<std::uint8_t> mask;
    std::vector<int> list;
  };

  int push(Node&& n);
  ParamStore* params_;
  std::vector<Node> nodes_;
};

// One LSTM layer with the standard gate equations; gates are stacked
// [input, forget, candidate, output] in the fused weight matrices.
struct LstmCell {
  int wx = -1;  // 4h x in
  int uh = -1;  // 4h x h
  int b = -1;   // 4h
  int hidden = 0;

  static LstmCell create(ParamStore& ps, const std::string& prefix, int input, int hidden);
  // Returns {h', c'}.
  std::pair<int, int> step(Tape& t, int x, int h, int c) const;
};

struct LayerNormLayer {
  int gain = -1;
  int bias = -1;
  double epsilon = 1e-5;

  static LayerNormLayer create(ParamStore& ps, const std::string& prefix, int width,
                               double epsilon);
  int apply(Tape& t, int x) const;
};

// Dense stack: hidden layers with ReLU, then an output layer that is linear
// by default (logits/value) or ReLU when the stack is itself a trunk.
struct Mlp {
  std::vector<int> ws;
  std::vector<int> bs;
  std::vector<bool> relu_after;

  static Mlp create(ParamStore& ps, const std::string& prefix, int input,
                    const std::vector<int>& hidden, int output, bool relu_output = false);
  int apply(Tape& t, int x) const;
};

// Shared-trunk actor-critic: one LSTM layer, layer normalization, then an
// actor branch (two ReLU dense layers + linear capacity/provision heads) and
// a critic branch (three ReLU dense layers + linear value head).
struct NetConfig {
  int obs_dim = 98;
  int capacity_levels = 16;
  int n_users = 16;
  int lstm_hidden = 64;
  std::vector<int> actor_hidden = {64, 64};    // exactly two layers
  std::vector<int> critic_hidden = {64, 64, 64};  // exactly three layers
  double ln_epsilon = 1e-5;

  void validate() const;
};

class HybridNet {
 public:
  HybridNet(NetConfig cfg, std::uint64_t seed);

  struct StepIds {
    int h;
    int c;
    int capacity_logits;
    int provision_logits;
    int value;  // scalar node
  };

  // Zero recurrent state as tape leaves.
  std::pair<int, int> initial_state(Tape& t) const;
  StepIds forward_step(Tape& t, int obs, int h, int c) const;

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const NetConfig& config() const { return cfg_; }

 private:
  NetConfig cfg_;
  ParamStore params_;
  LstmCell lstm_;
  LayerNormLayer norm_;
  Mlp actor_trunk_;   // two ReLU layers
  Mlp critic_;        // three ReLU layers + linear value
  int cap_w_ = -1, cap_b_ = -1;
  int prov_w_ = -1, prov_b_ = -1;
};

// Versioned JSON checkpoint: config echo, parameter shapes and flat values.
// Doubles round-trip exactly.  save_checkpoint writes atomically
// (temp file + rename).
std::string checkpoint_to_json(const HybridNet& net);
HybridNet checkpoint_from_json(const std::string& text);
void save_checkpoint(const HybridNet& net, const std::string& path);
HybridNet load_checkpoint(const std::string& path);

struct OptimConfig {
  enum class Kind { Sgd, Adam };
  Kind kind = Kind::Adam;
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First-order optimizer over a ParamStore's flat parameter space.  Supports
// a per-tensor learning-rate multiplier (actor/critic groups) and a global
// factor for schedules.  Plain Sgd applies params -= lr * grads exactly.
class Optimizer {
 public:
  Optimizer(const ParamStore& ps, OptimConfig cfg);

  void set_tensor_lr_scale(int param_id, double scale);
  // Applies one update from the gradients currently in the store.
  // Throws on non-finite gradients.
  void step(ParamStore& ps, double lr_factor = 1.0);

  const OptimConfig& config() const { return cfg_; }

 private:
  OptimConfig cfg_;
  std::vector<double> m_, v_;
  std::vector<double> tensor_scale_;
  long steps_ = 0;
};

// Central-difference gradient check.  `eval(true)` must compute the loss and
// leave fresh gradients in `params` (zeroing them first); `eval(false)` must
// compute the loss without touching gradients.  Returns the worst relative
// error max(|g_ad - g_fd|) / max(1, |g_ad|, |g_fd|) over every parameter.
// epsilon must lie in [1e-6, 1e-4].
double gradient_check(const std::function<double(bool)>& eval, ParamStore& params,
                      double epsilon = 1e-5);

}  // namespace cocreate::nn
