#include "cocreate/neural.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace cocreate::nn {

namespace {

double softplus(double z) {
  // Stable for large |z|.
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid_s(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

// ---- ParamStore ----

int ParamStore::add(const std::string& name, int rows, int cols, Init init, int fan_in) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("parameter '" + name + "' has empty shape");
  if (fan_in < 1) throw std::invalid_argument("parameter '" + name + "' has fan_in < 1");
  names_.push_back(name);
  values_.emplace_back(Mat::Zero(rows, cols));
  grads_.emplace_back(Mat::Zero(rows, cols));
  meta_.push_back({init, fan_in});
  return static_cast<int>(values_.size()) - 1;
}

void ParamStore::zero_grad() {
  for (auto& g : grads_) g.setZero();
}

void ParamStore::init_params(Rng& rng) {
  for (int i = 0; i < count(); ++i) {
    Mat& m = values_[i];
    switch (meta_[i].init) {
      case Init::Zero: m.setZero(); break;
      case Init::One: m.setOnes(); break;
      case Init::FanInUniform: {
        double bound = 1.0 / std::sqrt(static_cast<double>(meta_[i].fan_in));
        for (Eigen::Index c = 0; c < m.cols(); ++c)
          for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = rng.uniform(-bound, bound);
        break;
      }
    }
  }
}

std::size_t ParamStore::flat_size() const {
  std::size_t n = 0;
  for (const auto& m : values_) n += static_cast<std::size_t>(m.size());
  return n;
}

void ParamStore::get_flat(std::vector<double>& out) const {
  out.resize(flat_size());
  std::size_t k = 0;
  for (const auto& m : values_)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) out[k++] = m(r, c);
}

void ParamStore::set_flat(const std::vector<double>& in) {
  if (in.size() != flat_size()) throw std::invalid_argument("flat parameter size mismatch");
  std::size_t k = 0;
  for (auto& m : values_)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = in[k++];
}

void ParamStore::get_grad_flat(std::vector<double>& out) const {
  out.resize(flat_size());
  std::size_t k = 0;
  for (const auto& m : grads_)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) out[k++] = m(r, c);
}

void ParamStore::check_grads_finite() const {
  for (int i = 0; i < count(); ++i)
    if (!grads_[i].allFinite())
      throw std::runtime_error("non-finite gradient in parameter '" + names_[i] + "'");
}

// ---- Tape ----

int Tape::push(Node&& n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::clear() { nodes_.clear(); }

int Tape::input(const Vec& v) {
  Node n;
  n.op = Op::Input;
  n.val = v;
  return push(std::move(n));
}

int Tape::input(Vec&& v) {
  Node n;
  n.op = Op::Input;
  n.val = std::move(v);
  return push(std::move(n));
}

int Tape::affine(int W, int b, int x) {
  Node n;
  n.op = Op::Affine;
  n.a = x;
  n.pa = W;
  n.pb = b;
  const Mat& w = params_->value(W);
  if (w.cols() != nodes_[x].val.size())
    throw std::invalid_argument("affine: weight cols " + std::to_string(w.cols()) +
                                " vs input size " + std::to_string(nodes_[x].val.size()));
  n.val.noalias() = w * nodes_[x].val;
  if (b >= 0) {
    const Mat& bias = params_->value(b);
    if (bias.rows() != n.val.size() || bias.cols() != 1)
      throw std::invalid_argument("affine: bias shape mismatch");
    n.val += bias.col(0);
  }
  return push(std::move(n));
}

int Tape::add(int a, int b) {
  if (nodes_[a].val.size() != nodes_[b].val.size())
    throw std::invalid_argument("add: size mismatch");
  Node n;
  n.op = Op::Add;
  n.a = a;
  n.b = b;
  n.val = nodes_[a].val + nodes_[b].val;
  return push(std::move(n));
}

int Tape::sub(int a, int b) {
  if (nodes_[a].val.size() != nodes_[b].val.size())
    throw std::invalid_argument("sub: size mismatch");
  Node n;
  n.op = Op::Sub;
  n.a = a;
  n.b = b;
  n.val = nodes_[a].val - nodes_[b].val;
  return push(std::move(n));
}

int Tape::cmul(int a, int b) {
  if (nodes_[a].val.size() != nodes_[b].val.size())
    throw std::invalid_argument("cmul: size mismatch");
  Node n;
  n.op = Op::CMul;
  n.a = a;
  n.b = b;
  n.val = nodes_[a].val.cwiseProduct(nodes_[b].val);
  return push(std::move(n));
}

int Tape::scale(int a, double c) {
  Node n;
  n.op = Op::Scale;
  n.a = a;
  n.c0 = c;
  n.val = c * nodes_[a].val;
  return push(std::move(n));
}

int Tape::add_const(int a, double c) {
  Node n;
  n.op = Op::AddConst;
  n.a = a;
  n.c0 = c;
  n.val = nodes_[a].val.array() + c;
  return push(std::move(n));
}

int Tape::slice(int a, int offset, int len) {
  if (offset < 0 || len < 1 || offset + len > nodes_[a].val.size())
    throw std::invalid_argument("slice: window out of range");
  Node n;
  n.op = Op::Slice;
  n.a = a;
  n.k = offset;
  n.len = len;
  n.val = nodes_[a].val.segment(offset, len);
  return push(std::move(n));
}

int Tape::sigmoid(int a) {
  Node n;
  n.op = Op::Sigmoid;
  n.a = a;
  n.val = nodes_[a].val.unaryExpr([](double z) { return sigmoid_s(z); });
  return push(std::move(n));
}

int Tape::tanh_(int a) {
  Node n;
  n.op = Op::Tanh;
  n.a = a;
  n.val = nodes_[a].val.array().tanh();
  return push(std::move(n));
}

int Tape::relu(int a) {
  Node n;
  n.op = Op::Relu;
  n.a = a;
  n.val = nodes_[a].val.cwiseMax(0.0);
  return push(std::move(n));
}

int Tape::exp_(int a) {
  Node n;
  n.op = Op::Exp;
  n.a = a;
  n.val = nodes_[a].val.array().exp();
  return push(std::move(n));
}

int Tape::min2(int a, int b) {
  if (nodes_[a].val.size() != nodes_[b].val.size())
    throw std::invalid_argument("min2: size mismatch");
  Node n;
  n.op = Op::Min2;
  n.a = a;
  n.b = b;
  n.val = nodes_[a].val.cwiseMin(nodes_[b].val);
  return push(std::move(n));
}

int Tape::clip(int a, double lo, double hi) {
  Node n;
  n.op = Op::Clip;
  n.a = a;
  n.c0 = lo;
  n.c1 = hi;
  n.val = nodes_[a].val.cwiseMax(lo).cwiseMin(hi);
  return push(std::move(n));
}

int Tape::layer_norm(int x, int gain, int bias, double epsilon) {
  const Vec& v = nodes_[x].val;
  const Mat& g = params_->value(gain);
  const Mat& b = params_->value(bias);
  if (g.rows() != v.size() || b.rows() != v.size())
    throw std::invalid_argument("layer_norm: gain/bias length mismatch");
  if (!(epsilon > 0.0)) throw std::invalid_argument("layer_norm: epsilon must be positive");
  Node n;
  n.op = Op::LayerNorm;
  n.a = x;
  n.pa = gain;
  n.pb = bias;
  n.c0 = epsilon;
  const double mean = v.mean();
  const double var = (v.array() - mean).square().mean();
  const double inv_std = 1.0 / std::sqrt(var + epsilon);
  n.cache = (v.array() - mean) * inv_std;  // x-hat, reused in backward
  n.c1 = inv_std;
  n.val = g.col(0).cwiseProduct(n.cache) + b.col(0);
  return push(std::move(n));
}

int Tape::pick(int a, int k) {
  if (k < 0 || k >= nodes_[a].val.size()) throw std::invalid_argument("pick: index out of range");
  Node n;
  n.op = Op::Pick;
  n.a = a;
  n.k = k;
  n.val = Vec::Constant(1, nodes_[a].val[k]);
  return push(std::move(n));
}

int Tape::sum(int a) {
  Node n;
  n.op = Op::Sum;
  n.a = a;
  n.val = Vec::Constant(1, nodes_[a].val.sum());
  return push(std::move(n));
}

int Tape::list_sum(const std::vector<int>& scalars) {
  double s = 0.0;
  for (int id : scalars) {
    if (nodes_[id].val.size() != 1) throw std::invalid_argument("list_sum: non-scalar input");
    s += nodes_[id].val[0];
  }
  Node n;
  n.op = Op::ListSum;
  n.list = scalars;
  n.val = Vec::Constant(1, s);
  return push(std::move(n));
}

int Tape::masked_categorical_logprob(int logits, const std::vector<std::uint8_t>& mask, int k) {
  const Vec& z = nodes_[logits].val;
  if (static_cast<int>(mask.size()) != z.size())
    throw std::invalid_argument("masked_categorical_logprob: mask size mismatch");
  if (k < 0 || k >= z.size() || !mask[k])
    throw std::invalid_argument("masked_categorical_logprob: picked category not feasible");
  double zmax = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < z.size(); ++j)
    if (mask[j]) zmax = std::max(zmax, z[j]);
  double lse = 0.0;
  for (int j = 0; j < z.size(); ++j)
    if (mask[j]) lse += std::exp(z[j] - zmax);
  lse = zmax + std::log(lse);
  Node n;
  n.op = Op::MaskedCatLogProb;
  n.a = logits;
  n.k = k;
  n.mask = mask;
  n.cache = Vec::Zero(z.size());  // masked softmax probabilities
  for (int j = 0; j < z.size(); ++j)
    if (mask[j]) n.cache[j] = std::exp(z[j] - lse);
  n.val = Vec::Constant(1, z[k] - lse);
  return push(std::move(n));
}

int Tape::masked_categorical_entropy(int logits, const std::vector<std::uint8_t>& mask) {
  const Vec& z = nodes_[logits].val;
  if (static_cast<int>(mask.size()) != z.size())
    throw std::invalid_argument("masked_categorical_entropy: mask size mismatch");
  bool any = false;
  double zmax = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < z.size(); ++j)
    if (mask[j]) {
      any = true;
      zmax = std::max(zmax, z[j]);
    }
  if (!any) throw std::invalid_argument("masked_categorical_entropy: empty mask");
  double lse = 0.0;
  for (int j = 0; j < z.size(); ++j)
    if (mask[j]) lse += std::exp(z[j] - zmax);
  lse = zmax + std::log(lse);
  Node n;
  n.op = Op::MaskedCatEntropy;
  n.a = logits;
  n.mask = mask;
  n.cache = Vec::Zero(z.size());
  double h = 0.0;
  for (int j = 0; j < z.size(); ++j)
    if (mask[j]) {
      double lp = z[j] - lse;
      double p = std::exp(lp);
      n.cache[j] = p;
      if (p > 0.0) h -= p * lp;
    }
  n.val = Vec::Constant(1, h);
  return push(std::move(n));
}

int Tape::bernoulli_logprob(int logits, const std::vector<std::uint8_t>& bits) {
  const Vec& z = nodes_[logits].val;
  if (static_cast<int>(bits.size()) != z.size())
    throw std::invalid_argument("bernoulli_logprob: bits size mismatch");
  double lp = 0.0;
  for (int i = 0; i < z.size(); ++i) lp += (bits[i] ? z[i] : 0.0) - softplus(z[i]);
  Node n;
  n.op = Op::BernoulliLogProb;
  n.a = logits;
  n.mask = bits;
  n.val = Vec::Constant(1, lp);
  return push(std::move(n));
}

int Tape::bernoulli_entropy(int logits) {
  const Vec& z = nodes_[logits].val;
  double h = 0.0;
  for (int i = 0; i < z.size(); ++i) h += softplus(z[i]) - z[i] * sigmoid_s(z[i]);
  Node n;
  n.op = Op::BernoulliEntropy;
  n.a = logits;
  n.val = Vec::Constant(1, h);
  return push(std::move(n));
}

void Tape::backward(int loss) {
  if (loss < 0 || loss >= size()) throw std::invalid_argument("backward: bad loss node");
  if (nodes_[loss].val.size() != 1) throw std::invalid_argument("backward: loss must be scalar");
  if (!std::isfinite(nodes_[loss].val[0]))
    throw std::runtime_error("backward: loss is non-finite");

  for (auto& n : nodes_) {
    if (n.grad.size() != n.val.size()) n.grad = Vec::Zero(n.val.size());
    else n.grad.setZero();
  }
  nodes_[loss].grad[0] = 1.0;

  for (int id = loss; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.grad.isZero(0.0)) continue;
    const Vec& go = n.grad;
    switch (n.op) {
      case Op::Input:
        break;
      case Op::Affine: {
        const Mat& w = params_->value(n.pa);
        params_->grad(n.pa).noalias() += go * nodes_[n.a].val.transpose();
        if (n.pb >= 0) params_->grad(n.pb).col(0) += go;
        nodes_[n.a].grad.noalias() += w.transpose() * go;
        break;
      }
      case Op::Add:
        nodes_[n.a].grad += go;
        nodes_[n.b].grad += go;
        break;
      case Op::Sub:
        nodes_[n.a].grad += go;
        nodes_[n.b].grad -= go;
        break;
      case Op::CMul:
        nodes_[n.a].grad += go.cwiseProduct(nodes_[n.b].val);
        nodes_[n.b].grad += go.cwiseProduct(nodes_[n.a].val);
        break;
      case Op::Scale:
        nodes_[n.a].grad += n.c0 * go;
        break;
      case Op::AddConst:
        nodes_[n.a].grad += go;
        break;
      case Op::Slice:
        nodes_[n.a].grad.segment(n.k, n.len) += go;
        break;
      case Op::Sigmoid:
        nodes_[n.a].grad += go.cwiseProduct(
            n.val.cwiseProduct(Vec::Ones(n.val.size()) - n.val));
        break;
      case Op::Tanh:
        nodes_[n.a].grad +=
            go.cwiseProduct(Vec::Ones(n.val.size()) - n.val.cwiseProduct(n.val));
        break;
      case Op::Relu:
        for (int i = 0; i < n.val.size(); ++i)
          if (nodes_[n.a].val[i] > 0.0) nodes_[n.a].grad[i] += go[i];
        break;
      case Op::Exp:
        nodes_[n.a].grad += go.cwiseProduct(n.val);
        break;
      case Op::Min2:
        for (int i = 0; i < n.val.size(); ++i) {
          if (nodes_[n.a].val[i] <= nodes_[n.b].val[i]) nodes_[n.a].grad[i] += go[i];
          else nodes_[n.b].grad[i] += go[i];
        }
        break;
      case Op::Clip:
        for (int i = 0; i < n.val.size(); ++i) {
          double x = nodes_[n.a].val[i];
          if (x > n.c0 && x < n.c1) nodes_[n.a].grad[i] += go[i];
        }
        break;
      case Op::LayerNorm: {
        const Mat& g = params_->value(n.pa);
        const Vec gdy = g.col(0).cwiseProduct(go);
        params_->grad(n.pa).col(0) += go.cwiseProduct(n.cache);
        params_->grad(n.pb).col(0) += go;
        const double m1 = gdy.mean();
        const double m2 = gdy.cwiseProduct(n.cache).mean();
        nodes_[n.a].grad +=
            n.c1 * (gdy.array() - m1 - n.cache.array() * m2).matrix();
        break;
      }
      case Op::Pick:
        nodes_[n.a].grad[n.k] += go[0];
        break;
      case Op::Sum:
        nodes_[n.a].grad.array() += go[0];
        break;
      case Op::ListSum:
        for (int id2 : n.list) nodes_[id2].grad[0] += go[0];
        break;
      case Op::MaskedCatLogProb: {
        Vec& ga = nodes_[n.a].grad;
        for (int j = 0; j < ga.size(); ++j)
          if (n.mask[j]) ga[j] += go[0] * ((j == n.k ? 1.0 : 0.0) - n.cache[j]);
        break;
      }
      case Op::MaskedCatEntropy: {
        // dH/dz_j = -p_j (log p_j + H) over the mask.
        Vec& ga = nodes_[n.a].grad;
        const double h = n.val[0];
        for (int j = 0; j < ga.size(); ++j) {
          if (!n.mask[j]) continue;
          double p = n.cache[j];
          if (p > 0.0) ga[j] += go[0] * (-p * (std::log(p) + h));
        }
        break;
      }
      case Op::BernoulliLogProb: {
        Vec& ga = nodes_[n.a].grad;
        const Vec& z = nodes_[n.a].val;
        for (int i = 0; i < ga.size(); ++i)
          ga[i] += go[0] * ((n.mask[i] ? 1.0 : 0.0) - sigmoid_s(z[i]));
        break;
      }
      case Op::BernoulliEntropy: {
        Vec& ga = nodes_[n.a].grad;
        const Vec& z = nodes_[n.a].val;
        for (int i = 0; i < ga.size(); ++i) {
          double s = sigmoid_s(z[i]);
          ga[i] += go[0] * (-z[i] * s * (1.0 - s));
        }
        break;
      }
    }
  }
}

// ---- layers ----

LstmCell LstmCell::create(ParamStore& ps, const std::string& prefix, int input, int hidden) {
  LstmCell c;
  c.hidden = hidden;
  c.wx = ps.add(prefix + ".wx", 4 * hidden, input, ParamStore::Init::FanInUniform, input);
  c.uh = ps.add(prefix + ".uh", 4 * hidden, hidden, ParamStore::Init::FanInUniform, hidden);
  c.b = ps.add(prefix + ".b", 4 * hidden, 1, ParamStore::Init::Zero);
  return c;
}

std::pair<int, int> LstmCell::step(Tape& t, int x, int h, int c) const {
  int pre = t.add(t.affine(wx, b, x), t.affine(uh, -1, h));
  int i = t.sigmoid(t.slice(pre, 0, hidden));
  int f = t.sigmoid(t.slice(pre, hidden, hidden));
  int g = t.tanh_(t.slice(pre, 2 * hidden, hidden));
  int o = t.sigmoid(t.slice(pre, 3 * hidden, hidden));
  int c2 = t.add(t.cmul(f, c), t.cmul(i, g));
  int h2 = t.cmul(o, t.tanh_(c2));
  return {h2, c2};
}

LayerNormLayer LayerNormLayer::create(ParamStore& ps, const std::string& prefix, int width,
                                      double epsilon) {
  LayerNormLayer l;
  l.gain = ps.add(prefix + ".gain", width, 1, ParamStore::Init::One);
  l.bias = ps.add(prefix + ".bias", width, 1, ParamStore::Init::Zero);
  l.epsilon = epsilon;
  return l;
}

int LayerNormLayer::apply(Tape& t, int x) const { return t.layer_norm(x, gain, bias, epsilon); }

Mlp Mlp::create(ParamStore& ps, const std::string& prefix, int input,
                const std::vector<int>& hidden, int output, bool relu_output) {
  Mlp m;
  int in = input;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    m.ws.push_back(ps.add(prefix + ".w" + std::to_string(i), hidden[i], in,
                          ParamStore::Init::FanInUniform, in));
    m.bs.push_back(ps.add(prefix + ".b" + std::to_string(i), hidden[i], 1, ParamStore::Init::Zero));
    m.relu_after.push_back(true);
    in = hidden[i];
  }
  m.ws.push_back(ps.add(prefix + ".w_out", output, in, ParamStore::Init::FanInUniform, in));
  m.bs.push_back(ps.add(prefix + ".b_out", output, 1, ParamStore::Init::Zero));
  m.relu_after.push_back(relu_output);
  return m;
}

int Mlp::apply(Tape& t, int x) const {
  int cur = x;
  for (std::size_t i = 0; i < ws.size(); ++i) {
    cur = t.affine(ws[i], bs[i], cur);
    if (relu_after[i]) cur = t.relu(cur);
  }
  return cur;
}

// ---- hybrid network ----

void NetConfig::validate() const {
  if (obs_dim < 1) throw std::invalid_argument("net.obs_dim must be at least 1");
  if (capacity_levels < 2) throw std::invalid_argument("net.capacity_levels must be at least 2");
  if (n_users < 1) throw std::invalid_argument("net.n_users must be at least 1");
  if (lstm_hidden < 1) throw std::invalid_argument("net.lstm_hidden must be at least 1");
  if (actor_hidden.size() != 2)
    throw std::invalid_argument("net.actor_hidden must list exactly two layer widths");
  if (critic_hidden.size() != 3)
    throw std::invalid_argument("net.critic_hidden must list exactly three layer widths");
  for (int w : actor_hidden)
    if (w < 1) throw std::invalid_argument("net.actor_hidden widths must be positive");
  for (int w : critic_hidden)
    if (w < 1) throw std::invalid_argument("net.critic_hidden widths must be positive");
  if (!(ln_epsilon > 0.0)) throw std::invalid_argument("net.ln_epsilon must be positive");
}

HybridNet::HybridNet(NetConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  lstm_ = LstmCell::create(params_, "lstm", cfg_.obs_dim, cfg_.lstm_hidden);
  norm_ = LayerNormLayer::create(params_, "norm", cfg_.lstm_hidden, cfg_.ln_epsilon);
  // Actor branch: two ReLU layers, then linear capacity/provision heads.
  actor_trunk_ = Mlp::create(params_, "actor", cfg_.lstm_hidden, {cfg_.actor_hidden[0]},
                             cfg_.actor_hidden[1], /*relu_output=*/true);
  cap_w_ = params_.add("actor.cap_w", cfg_.capacity_levels, cfg_.actor_hidden[1],
                       ParamStore::Init::FanInUniform, cfg_.actor_hidden[1]);
  cap_b_ = params_.add("actor.cap_b", cfg_.capacity_levels, 1, ParamStore::Init::Zero);
  prov_w_ = params_.add("actor.prov_w", cfg_.n_users, cfg_.actor_hidden[1],
                        ParamStore::Init::FanInUniform, cfg_.actor_hidden[1]);
  prov_b_ = params_.add("actor.prov_b", cfg_.n_users, 1, ParamStore::Init::Zero);
  // Critic branch: three ReLU layers + linear value.
  critic_ = Mlp::create(params_, "critic", cfg_.lstm_hidden,
                        {cfg_.critic_hidden[0], cfg_.critic_hidden[1], cfg_.critic_hidden[2]}, 1,
                        /*relu_output=*/false);
  Rng rng(mix_seed(seed, 0x1217ULL));
  params_.init_params(rng);
}

std::pair<int, int> HybridNet::initial_state(Tape& t) const {
  return {t.input(Vec::Zero(cfg_.lstm_hidden)), t.input(Vec::Zero(cfg_.lstm_hidden))};
}

HybridNet::StepIds HybridNet::forward_step(Tape& t, int obs, int h, int c) const {
  auto [h2, c2] = lstm_.step(t, obs, h, c);
  int trunk = norm_.apply(t, h2);
  int a = actor_trunk_.apply(t, trunk);
  StepIds out;
  out.h = h2;
  out.c = c2;
  out.capacity_logits = t.affine(cap_w_, cap_b_, a);
  out.provision_logits = t.affine(prov_w_, prov_b_, a);
  out.value = critic_.apply(t, trunk);
  return out;
}

// ---- optimizer ----

Optimizer::Optimizer(const ParamStore& ps, OptimConfig cfg) : cfg_(cfg) {
  m_.assign(ps.flat_size(), 0.0);
  v_.assign(ps.flat_size(), 0.0);
  tensor_scale_.assign(ps.count(), 1.0);
}

void Optimizer::set_tensor_lr_scale(int param_id, double scale) {
  tensor_scale_.at(param_id) = scale;
}

void Optimizer::step(ParamStore& ps, double lr_factor) {
  ps.check_grads_finite();
  ++steps_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
  std::size_t k = 0;
  for (int id = 0; id < ps.count(); ++id) {
    Mat& p = ps.value(id);
    const Mat& g = ps.grad(id);
    const double lr = cfg_.lr * tensor_scale_[id] * lr_factor;
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
      for (Eigen::Index r = 0; r < p.rows(); ++r, ++k) {
        const double gi = g(r, c);
        if (cfg_.kind == OptimConfig::Kind::Sgd) {
          p(r, c) -= lr * gi;
        } else {
          m_[k] = cfg_.beta1 * m_[k] + (1.0 - cfg_.beta1) * gi;
          v_[k] = cfg_.beta2 * v_[k] + (1.0 - cfg_.beta2) * gi * gi;
          const double mhat = m_[k] / bc1;
          const double vhat = v_[k] / bc2;
          p(r, c) -= lr * mhat / (std::sqrt(vhat) + cfg_.epsilon);
        }
      }
    }
  }
}

// ---- checkpoints ----

namespace {

nlohmann::json net_config_to_json(const NetConfig& c) {
  return nlohmann::json{{"obs_dim", c.obs_dim},
                        {"capacity_levels", c.capacity_levels},
                        {"n_users", c.n_users},
                        {"lstm_hidden", c.lstm_hidden},
                        {"actor_hidden", c.actor_hidden},
                        {"critic_hidden", c.critic_hidden},
                        {"ln_epsilon", c.ln_epsilon}};
}

NetConfig net_config_from_json(const nlohmann::json& j) {
  NetConfig c;
  c.obs_dim = j.at("obs_dim").get<int>();
  c.capacity_levels = j.at("capacity_levels").get<int>();
  c.n_users = j.at("n_users").get<int>();
  c.lstm_hidden = j.at("lstm_hidden").get<int>();
  c.actor_hidden = j.at("actor_hidden").get<std::vector<int>>();
  c.critic_hidden = j.at("critic_hidden").get<std::vector<int>>();
  c.ln_epsilon = j.at("ln_epsilon").get<double>();
  return c;
}

}  // namespace

std::string checkpoint_to_json(const HybridNet& net) {
  nlohmann::json j;
  j["format"] = "cocreate-checkpoint";
  j["version"] = 1;
  j["net"] = net_config_to_json(net.config());
  nlohmann::json params = nlohmann::json::array();
  const ParamStore& ps = net.params();
  for (int i = 0; i < ps.count(); ++i) {
    const Mat& m = ps.value(i);
    std::vector<double> flat(static_cast<std::size_t>(m.size()));
    std::size_t k = 0;
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) flat[k++] = m(r, c);
    params.push_back({{"name", ps.name(i)},
                      {"rows", static_cast<int>(m.rows())},
                      {"cols", static_cast<int>(m.cols())},
                      {"values", flat}});
  }
  j["params"] = std::move(params);
  return j.dump();
}

HybridNet checkpoint_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.value("format", "") != "cocreate-checkpoint")
    throw std::runtime_error("checkpoint: unrecognized format field");
  if (j.value("version", 0) != 1)
    throw std::runtime_error("checkpoint: unsupported version");
  HybridNet net(net_config_from_json(j.at("net")), 0);
  ParamStore& ps = net.params();
  const auto& params = j.at("params");
  if (static_cast<int>(params.size()) != ps.count())
    throw std::runtime_error("checkpoint: parameter count mismatch");
  for (int i = 0; i < ps.count(); ++i) {
    const auto& e = params[i];
    if (e.at("name").get<std::string>() != ps.name(i))
      throw std::runtime_error("checkpoint: parameter order mismatch at '" + ps.name(i) + "'");
    Mat& m = ps.value(i);
    if (e.at("rows").get<int>() != m.rows() || e.at("cols").get<int>() != m.cols())
      throw std::runtime_error("checkpoint: shape mismatch for '" + ps.name(i) + "'");
    auto flat = e.at("values").get<std::vector<double>>();
    if (flat.size() != static_cast<std::size_t>(m.size()))
      throw std::runtime_error("checkpoint: value count mismatch for '" + ps.name(i) + "'");
    std::size_t k = 0;
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = flat[k++];
  }
  return net;
}

void save_checkpoint(const HybridNet& net, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + tmp + "' for writing");
    f << checkpoint_to_json(net);
    if (!f.good()) throw std::runtime_error("write failed for '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("cannot rename '" + tmp + "' to '" + path + "'");
}

HybridNet load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  std::ostringstream buf;
  buf << f.rdbuf();
  return checkpoint_from_json(buf.str());
}

// ---- gradient check ----

double gradient_check(const std::function<double(bool)>& eval, ParamStore& params,
                      double epsilon) {
  if (!(epsilon >= 1e-6 && epsilon <= 1e-4))
    throw std::invalid_argument("gradient_check: epsilon must be in [1e-6, 1e-4]");

  double loss0 = eval(true);
  if (!std::isfinite(loss0)) throw std::runtime_error("gradient_check: non-finite loss");
  std::vector<double> analytic;
  params.get_grad_flat(analytic);

  std::vector<double> theta;
  params.get_flat(theta);
  double worst = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double orig = theta[i];
    theta[i] = orig + epsilon;
    params.set_flat(theta);
    const double fp = eval(false);
    theta[i] = orig - epsilon;
    params.set_flat(theta);
    const double fm = eval(false);
    theta[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw std::runtime_error("gradient_check: non-finite perturbed loss");
    const double fd = (fp - fm) / (2.0 * epsilon);
    const double err = std::abs(analytic[i] - fd) /
                       std::max({1.0, std::abs(analytic[i]), std::abs(fd)});
    worst = std::max(worst, err);
  }
  params.set_flat(theta);
  return worst;
}

}  // namespace cocreate::nn
