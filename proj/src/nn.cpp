#include "uavsec/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace uavsec::nn {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Linear: return "linear";
  }
  return "linear";
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  if (s == "linear") return Activation::Linear;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

Matrix xavier_uniform(int rows, int cols, int fan_in, int fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(rows, cols);
  // Row-major fill order keeps draws independent of Eigen's storage order.
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = dist(rng);
  return m;
}

namespace {

void apply(Activation a, Matrix& z) {
  switch (a) {
    case Activation::Relu: z = z.cwiseMax(0.0); break;
    case Activation::Tanh: z = z.array().tanh().matrix(); break;
    case Activation::Linear: break;
  }
}

// grad wrt pre-activation given grad wrt activation output.
Matrix differentiate(Activation a, const Matrix& pre, const Matrix& grad) {
  switch (a) {
    case Activation::Relu: return (pre.array() > 0.0).select(grad, 0.0);
    case Activation::Tanh: {
      const auto t = pre.array().tanh();
      return (grad.array() * (1.0 - t * t)).matrix();
    }
    case Activation::Linear: return grad;
  }
  return grad;
}

}  // namespace

Mlp::Mlp(std::vector<int> dims, Activation output, std::mt19937_64& rng)
    : dims_(std::move(dims)), output_(output) {
  if (dims_.size() < 2) throw std::invalid_argument("Mlp: need input and output dims");
  for (int d : dims_)
    if (d < 1) throw std::invalid_argument("Mlp: layer widths must be positive");
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    weights_.push_back(xavier_uniform(dims_[l + 1], dims_[l], dims_[l], dims_[l + 1], rng));
    biases_.push_back(Matrix::Zero(dims_[l + 1], 1));
  }
}

Matrix Mlp::forward(const Matrix& x, Cache* cache) const {
  if (x.rows() != input_dim())
    throw std::invalid_argument("Mlp::forward: input has " + std::to_string(x.rows()) +
                                " rows, expected " + std::to_string(input_dim()));
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  Matrix a = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Matrix z = weights_[l] * a;
    z.colwise() += biases_[l].col(0);
    if (cache) {
      cache->inputs.push_back(std::move(a));
      cache->pre.push_back(z);
    }
    apply(l + 1 == weights_.size() ? output_ : Activation::Relu, z);
    a = std::move(z);
  }
  if (cache) cache->output = a;
  return a;
}

Matrix Mlp::backward(const Cache& cache, const Matrix& grad_out, std::span<Matrix> grads) const {
  if (cache.pre.size() != weights_.size()) throw std::logic_error("Mlp::backward: cache does not match network");
  if (grads.size() != parameter_count()) throw std::invalid_argument("Mlp::backward: wrong gradient count");
  if (grad_out.rows() != output_dim() || grad_out.cols() != cache.output.cols())
    throw std::invalid_argument("Mlp::backward: output gradient shape mismatch");
  Matrix g = grad_out;
  for (std::size_t l = weights_.size(); l-- > 0;) {
    const Matrix dz = differentiate(l + 1 == weights_.size() ? output_ : Activation::Relu, cache.pre[l], g);
    grads[2 * l] = dz * cache.inputs[l].transpose();
    grads[2 * l + 1] = dz.rowwise().sum();
    g = weights_[l].transpose() * dz;
  }
  return g;
}

std::vector<Matrix*> Mlp::parameters() {
  std::vector<Matrix*> p;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    p.push_back(&weights_[l]);
    p.push_back(&biases_[l]);
  }
  return p;
}

std::vector<const Matrix*> Mlp::parameters() const {
  std::vector<const Matrix*> p;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    p.push_back(&weights_[l]);
    p.push_back(&biases_[l]);
  }
  return p;
}

// ---------------------------------------------------------------------------

ExpansionLayer::ExpansionLayer(int block_length, int width, std::mt19937_64& rng)
    : block_length_(block_length), width_(width) {
  if (block_length < kScalars || width < 1) throw std::invalid_argument("ExpansionLayer: bad shape");
  weight_ = xavier_uniform(kScalars, width, 1, width, rng);
  bias_ = Matrix::Zero(kScalars, width);
}

Matrix ExpansionLayer::forward(const Matrix& x, Matrix* pre) const {
  const int keep = block_length_ - kScalars;
  const Eigen::Index batch = x.cols();
  Matrix out(output_dim(), batch);
  out.topRows(keep) = x.topRows(keep);
  Matrix z(kScalars * width_, batch);
  for (int j = 0; j < kScalars; ++j) {
    const auto s = x.row(keep + j);
    for (int k = 0; k < width_; ++k)
      z.row(j * width_ + k) = (s.array() * weight_(j, k) + bias_(j, k)).matrix();
  }
  out.bottomRows(kScalars * width_) = z.cwiseMax(0.0);
  if (pre) *pre = std::move(z);
  return out;
}

Matrix ExpansionLayer::backward(const Matrix& x, const Matrix& pre, const Matrix& grad_out,
                                Matrix& grad_w, Matrix& grad_b) const {
  const int keep = block_length_ - kScalars;
  Matrix gx = Matrix::Zero(block_length_, x.cols());
  gx.topRows(keep) = grad_out.topRows(keep);
  const Matrix dz = (pre.array() > 0.0).select(grad_out.bottomRows(kScalars * width_), 0.0);
  grad_w.resize(kScalars, width_);
  grad_b.resize(kScalars, width_);
  for (int j = 0; j < kScalars; ++j) {
    const auto s = x.row(keep + j);
    for (int k = 0; k < width_; ++k) {
      const auto d = dz.row(j * width_ + k);
      grad_w(j, k) = d.dot(s);
      grad_b(j, k) = d.sum();
      gx.row(keep + j) += weight_(j, k) * d;
    }
  }
  return gx;
}

// ---------------------------------------------------------------------------

int NetworkSpec::input_dim() const {
  int d = tail_dim;
  for (int b : block_lengths) d += b;
  return d;
}

int NetworkSpec::expanded_dim() const {
  int d = tail_dim;
  for (int b : block_lengths)
    d += expansion_width > 0 ? b - ExpansionLayer::kScalars + ExpansionLayer::kScalars * expansion_width : b;
  return d;
}

Network::Network(NetworkSpec spec, std::mt19937_64& rng) : spec_(std::move(spec)) {
  if (spec_.tail_dim < 0 || spec_.expansion_width < 0) throw std::invalid_argument("Network: bad spec");
  if (spec_.expansion_width > 0)
    for (int b : spec_.block_lengths) expansions_.emplace_back(b, spec_.expansion_width, rng);
  std::vector<int> dims{spec_.expanded_dim()};
  dims.insert(dims.end(), spec_.hidden.begin(), spec_.hidden.end());
  dims.push_back(spec_.output_dim);
  mlp_ = Mlp(dims, spec_.output, rng);
}

Matrix Network::forward(const Matrix& x, Cache* cache) const {
  if (x.rows() != input_dim())
    throw std::invalid_argument("Network::forward: input has " + std::to_string(x.rows()) +
                                " rows, expected " + std::to_string(input_dim()));
  if (expansions_.empty()) {
    if (cache) {
      cache->input = x;
      cache->block_pre.clear();
      cache->generation = generation_;
      return mlp_.forward(x, &cache->mlp);
    }
    return mlp_.forward(x, nullptr);
  }
  Matrix expanded(spec_.expanded_dim(), x.cols());
  if (cache) cache->block_pre.resize(expansions_.size());
  Eigen::Index in_off = 0, out_off = 0;
  for (std::size_t b = 0; b < expansions_.size(); ++b) {
    const auto& e = expansions_[b];
    expanded.middleRows(out_off, e.output_dim()) =
        e.forward(x.middleRows(in_off, e.input_dim()), cache ? &cache->block_pre[b] : nullptr);
    in_off += e.input_dim();
    out_off += e.output_dim();
  }
  expanded.bottomRows(spec_.tail_dim) = x.bottomRows(spec_.tail_dim);
  if (cache) {
    cache->input = x;
    cache->generation = generation_;
    return mlp_.forward(expanded, &cache->mlp);
  }
  return mlp_.forward(expanded, nullptr);
}

Matrix Network::backward(const Cache& cache, const Matrix& grad_out, std::vector<Matrix>& grads) const {
  if (cache.generation != generation_) throw std::logic_error("Network::backward: stale cache");
  const std::size_t n_exp = 2 * expansions_.size();
  grads.resize(n_exp + mlp_.parameter_count());
  const Matrix g_expanded = mlp_.backward(cache.mlp, grad_out, std::span<Matrix>(grads).subspan(n_exp));
  if (expansions_.empty()) return g_expanded;

  Matrix gx(input_dim(), cache.input.cols());
  Eigen::Index in_off = 0, out_off = 0;
  for (std::size_t b = 0; b < expansions_.size(); ++b) {
    const auto& e = expansions_[b];
    gx.middleRows(in_off, e.input_dim()) =
        e.backward(cache.input.middleRows(in_off, e.input_dim()), cache.block_pre[b],
                   g_expanded.middleRows(out_off, e.output_dim()), grads[2 * b], grads[2 * b + 1]);
    in_off += e.input_dim();
    out_off += e.output_dim();
  }
  gx.bottomRows(spec_.tail_dim) = g_expanded.bottomRows(spec_.tail_dim);
  return gx;
}

std::vector<Matrix*> Network::mutable_parameters() {
  ++generation_;
  std::vector<Matrix*> p;
  for (auto& e : expansions_) {
    p.push_back(&e.weight());
    p.push_back(&e.bias());
  }
  for (Matrix* m : mlp_.parameters()) p.push_back(m);
  return p;
}

std::vector<const Matrix*> Network::parameters() const {
  std::vector<const Matrix*> p;
  for (const auto& e : expansions_) {
    p.push_back(&e.weight());
    p.push_back(&e.bias());
  }
  for (const Matrix* m : mlp_.parameters()) p.push_back(m);
  return p;
}

std::vector<Matrix> Network::zero_gradients() const {
  std::vector<Matrix> g;
  for (const Matrix* p : parameters()) g.push_back(Matrix::Zero(p->rows(), p->cols()));
  return g;
}

std::size_t Network::scalar_count() const {
  std::size_t n = 0;
  for (const Matrix* p : parameters()) n += static_cast<std::size_t>(p->size());
  return n;
}

// ---------------------------------------------------------------------------

Adam::Adam(const std::vector<const Matrix*>& params, AdamConfig cfg) : cfg_(cfg) {
  for (const Matrix* p : params) {
    m_.push_back(Matrix::Zero(p->rows(), p->cols()));
    v_.push_back(Matrix::Zero(p->rows(), p->cols()));
  }
}

void Adam::step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw std::invalid_argument("Adam::step: parameter count mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].rows() != m_[i].rows() || grads[i].cols() != m_[i].cols())
      throw std::invalid_argument("Adam::step: gradient shape mismatch");
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grads[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i].cwiseProduct(grads[i]);
    params[i]->array() -=
        cfg_.learning_rate * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + cfg_.epsilon);
  }
}

void soft_update(Network& target, const Network& online, double tau) {
  if (!(target.spec() == online.spec())) throw std::invalid_argument("soft_update: architecture mismatch");
  auto dst = target.mutable_parameters();
  auto src = online.parameters();
  for (std::size_t i = 0; i < dst.size(); ++i) *dst[i] = tau * *src[i] + (1.0 - tau) * *dst[i];
}

}  // namespace uavsec::nn
