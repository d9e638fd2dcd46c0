#include "mzi/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace mzi::nn {
namespace {

template <typename Scalar>
using MatrixMap = Eigen::Map<Matrix<Scalar>>;
template <typename Scalar>
using ConstMatrixMap = Eigen::Map<const Matrix<Scalar>>;
template <typename Scalar>
using VectorMap = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>;
template <typename Scalar>
using ConstVectorMap = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>;

constexpr int kKernel = 3;
constexpr int kTaps = kKernel * kKernel;

// col(p, c*9 + ky*3 + kx) = x[c, y + ky - 1, x + kx - 1] with zero padding.
template <typename Scalar>
void im2col(const Scalar* x, int channels, int size, Matrix<Scalar>& col) {
  const int hw = size * size;
  col.resize(hw, channels * kTaps);
  for (int c = 0; c < channels; ++c) {
    const Scalar* plane = x + static_cast<std::ptrdiff_t>(c) * hw;
    for (int ky = 0; ky < kKernel; ++ky) {
      for (int kx = 0; kx < kKernel; ++kx) {
        Scalar* dst = col.col(c * kTaps + ky * kKernel + kx).data();
        for (int y = 0; y < size; ++y) {
          const int sy = y + ky - 1;
          for (int xx = 0; xx < size; ++xx) {
            const int sx = xx + kx - 1;
            dst[y * size + xx] =
                (sy >= 0 && sy < size && sx >= 0 && sx < size) ? plane[sy * size + sx] : Scalar(0);
          }
        }
      }
    }
  }
}

template <typename Scalar>
void col2im_add(const Matrix<Scalar>& col, int channels, int size, Scalar* x) {
  const int hw = size * size;
  for (int c = 0; c < channels; ++c) {
    Scalar* plane = x + static_cast<std::ptrdiff_t>(c) * hw;
    for (int ky = 0; ky < kKernel; ++ky) {
      for (int kx = 0; kx < kKernel; ++kx) {
        const Scalar* src = col.col(c * kTaps + ky * kKernel + kx).data();
        for (int y = 0; y < size; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= size) continue;
          for (int xx = 0; xx < size; ++xx) {
            const int sx = xx + kx - 1;
            if (sx < 0 || sx >= size) continue;
            plane[sy * size + sx] += src[y * size + xx];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename Scalar>
Network<Scalar>::Network(NetworkSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::size_t cursor = 0;
  int channels = spec_.input_channels;
  int size = spec_.input_size;
  for (std::size_t i = 0; i < spec_.conv_channels.size(); ++i) {
    Stage st{Kind::kConv};
    st.in_channels = channels;
    st.out_channels = spec_.conv_channels[i];
    st.size = size;
    st.in_features = channels * size * size;
    st.out_features = st.out_channels * size * size;
    st.relu = true;
    const std::string name = "conv" + std::to_string(i);
    st.weight = cursor;
    add_tensor(name + ".weight", {st.out_channels, channels, kKernel, kKernel}, cursor);
    st.bias = cursor;
    add_tensor(name + ".bias", {st.out_channels}, cursor);
    stages_.push_back(st);
    channels = st.out_channels;

    if ((i + 1) % static_cast<std::size_t>(spec_.pool_every) == 0) {
      Stage pool{Kind::kPool};
      pool.in_channels = pool.out_channels = channels;
      pool.size = size;
      pool.in_features = channels * size * size;
      size /= 2;
      pool.out_features = channels * size * size;
      stages_.push_back(pool);
    }
  }

  first_dense_ = stages_.size();
  const int widths[] = {spec_.encoded_features() + spec_.action_inputs, spec_.hidden[0],
                        spec_.hidden[1], spec_.output};
  for (int i = 0; i < 3; ++i) {
    Stage st{Kind::kDense};
    st.in_features = widths[i];
    st.out_features = widths[i + 1];
    st.relu = i < 2;
    const std::string name = "fc" + std::to_string(i);
    st.weight = cursor;
    add_tensor(name + ".weight", {st.out_features, st.in_features}, cursor);
    st.bias = cursor;
    add_tensor(name + ".bias", {st.out_features}, cursor);
    stages_.push_back(st);
  }
  params_.assign(cursor, Scalar(0));
}

template <typename Scalar>
void Network<Scalar>::add_tensor(const std::string& name, std::vector<int> shape, std::size_t& cursor) {
  std::size_t count = 1;
  for (int d : shape) count *= static_cast<std::size_t>(d);
  tensors_.push_back({name, std::move(shape), cursor, count});
  cursor += count;
}

template <typename Scalar>
void Network<Scalar>::init_orthogonal(std::uint64_t seed, double gain) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::fill(params_.begin(), params_.end(), Scalar(0));
  for (const Stage& st : stages_) {
    if (st.kind == Kind::kPool) continue;
    const int rows = st.kind == Kind::kConv ? st.out_channels : st.out_features;
    const int cols = st.kind == Kind::kConv ? st.in_channels * kTaps : st.in_features;
    const int tall = std::max(rows, cols);
    const int wide = std::min(rows, cols);
    Eigen::MatrixXd a(tall, wide);
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, j) = gauss(rng);
    }
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(tall, wide);
    const Eigen::VectorXd diag = qr.matrixQR().diagonal();
    for (int j = 0; j < wide; ++j) {
      if (diag(j) < 0) q.col(j) = -q.col(j);
    }
    MatrixMap<Scalar> w(params_.data() + st.weight, rows, cols);
    if (rows <= cols) {
      w = (gain * q.transpose()).template cast<Scalar>();
    } else {
      w = (gain * q).template cast<Scalar>();
    }
  }
}

template <typename Scalar>
void Network<Scalar>::copy_parameters_from(const Network& other) {
  if (other.spec_.describe() != spec_.describe()) {
    throw ShapeError("cannot copy parameters between different layouts");
  }
  params_ = other.params_;
}

template <typename Scalar>
void Network<Scalar>::conv_forward(const Stage& st, const Matrix<Scalar>& in, Matrix<Scalar>& out) const {
  const int hw = st.size * st.size;
  const ConstMatrixMap<Scalar> w(params_.data() + st.weight, st.out_channels, st.in_channels * kTaps);
  const ConstVectorMap<Scalar> b(params_.data() + st.bias, st.out_channels);
  out.resize(st.out_features, in.cols());
  Matrix<Scalar> col;
  for (Eigen::Index s = 0; s < in.cols(); ++s) {
    im2col(in.col(s).data(), st.in_channels, st.size, col);
    MatrixMap<Scalar> o(out.col(s).data(), hw, st.out_channels);
    o.noalias() = col * w.transpose();
    o.rowwise() += b.transpose();
    o = o.cwiseMax(Scalar(0));
  }
}

template <typename Scalar>
void Network<Scalar>::conv_backward(const Stage& st, const Matrix<Scalar>& in, const Matrix<Scalar>& out,
                                    const Matrix<Scalar>& grad_out, std::span<Scalar> grads,
                                    Matrix<Scalar>* grad_in) const {
  const int hw = st.size * st.size;
  const int taps = st.in_channels * kTaps;
  const ConstMatrixMap<Scalar> w(params_.data() + st.weight, st.out_channels, taps);
  if (grad_in) grad_in->setZero(st.in_features, in.cols());
  Matrix<Scalar> col;
  Matrix<Scalar> dz(hw, st.out_channels);
  Matrix<Scalar> dcol;
  for (Eigen::Index s = 0; s < in.cols(); ++s) {
    const ConstMatrixMap<Scalar> o(out.col(s).data(), hw, st.out_channels);
    const ConstMatrixMap<Scalar> go(grad_out.col(s).data(), hw, st.out_channels);
    dz = (o.array() > Scalar(0)).select(go, Scalar(0));
    if (!grads.empty() || grad_in) im2col(in.col(s).data(), st.in_channels, st.size, col);
    if (!grads.empty()) {
      MatrixMap<Scalar> dw(grads.data() + st.weight, st.out_channels, taps);
      VectorMap<Scalar> db(grads.data() + st.bias, st.out_channels);
      dw.noalias() += dz.transpose() * col;
      db += dz.colwise().sum().transpose();
    }
    if (grad_in) {
      dcol.noalias() = dz * w;
      col2im_add(dcol, st.in_channels, st.size, grad_in->col(s).data());
    }
  }
}

template <typename Scalar>
void Network<Scalar>::pool_forward(const Stage& st, const Matrix<Scalar>& in, Matrix<Scalar>& out,
                                   std::vector<int>& argmax) const {
  const int size = st.size;
  const int half = size / 2;
  out.resize(st.out_features, in.cols());
  argmax.resize(static_cast<std::size_t>(st.out_features) * in.cols());
  for (Eigen::Index s = 0; s < in.cols(); ++s) {
    const Scalar* x = in.col(s).data();
    Scalar* y = out.col(s).data();
    int* idx = argmax.data() + static_cast<std::ptrdiff_t>(s) * st.out_features;
    for (int c = 0; c < st.in_channels; ++c) {
      const int plane = c * size * size;
      for (int oy = 0; oy < half; ++oy) {
        for (int ox = 0; ox < half; ++ox) {
          int best = plane + (2 * oy) * size + 2 * ox;
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              const int at = plane + (2 * oy + dy) * size + 2 * ox + dx;
              if (x[at] > x[best]) best = at;
            }
          }
          const int o = c * half * half + oy * half + ox;
          y[o] = x[best];
          idx[o] = best;
        }
      }
    }
  }
}

template <typename Scalar>
const Matrix<Scalar>& Network<Scalar>::forward(Workspace<Scalar>& ws, const Matrix<Scalar>& input,
                                               const Matrix<Scalar>* extra) const {
  if (input.rows() != spec_.input_features() || input.cols() < 1) {
    throw ShapeError("network input has " + std::to_string(input.rows()) + " rows, expected " +
                     std::to_string(spec_.input_features()));
  }
  if ((spec_.action_inputs > 0) != (extra != nullptr)) {
    throw ShapeError("action input must be given exactly for critics");
  }
  if (extra && (extra->rows() != spec_.action_inputs || extra->cols() != input.cols())) {
    throw ShapeError("action batch shape mismatch");
  }

  ws.batch = static_cast<int>(input.cols());
  ws.activations.resize(stages_.size() + 1);
  ws.pool_argmax.resize(stages_.size());
  ws.activations[0] = input;

  for (std::size_t s = 0; s < stages_.size(); ++s) {
    const Stage& st = stages_[s];
    Matrix<Scalar>& out = ws.activations[s + 1];
    switch (st.kind) {
      case Kind::kConv:
        conv_forward(st, ws.activations[s], out);
        break;
      case Kind::kPool:
        pool_forward(st, ws.activations[s], out, ws.pool_argmax[s]);
        break;
      case Kind::kDense: {
        const Matrix<Scalar>* x = &ws.activations[s];
        if (s == first_dense_ && extra) {
          ws.head_input.resize(st.in_features, input.cols());
          ws.head_input.topRows(x->rows()) = *x;
          ws.head_input.bottomRows(extra->rows()) = *extra;
          x = &ws.head_input;
        }
        const ConstMatrixMap<Scalar> w(params_.data() + st.weight, st.out_features, st.in_features);
        const ConstVectorMap<Scalar> b(params_.data() + st.bias, st.out_features);
        out.noalias() = w * *x;
        out.colwise() += b;
        if (st.relu) {
          out = out.cwiseMax(Scalar(0));
        } else if (s + 1 == stages_.size() && spec_.squash_output) {
          out = out.array().tanh().matrix();
        }
        break;
      }
    }
  }
  return ws.activations.back();
}

template <typename Scalar>
void Network<Scalar>::backward(Workspace<Scalar>& ws, const Matrix<Scalar>& grad_output,
                               std::span<Scalar> grads, Matrix<Scalar>* grad_extra) const {
  if (ws.activations.size() != stages_.size() + 1) throw ShapeError("backward without forward");
  if (grad_output.rows() != spec_.output || grad_output.cols() != ws.batch) {
    throw ShapeError("output gradient shape mismatch");
  }
  if (!grads.empty() && grads.size() != params_.size()) throw ShapeError("gradient buffer size mismatch");
  if (grad_extra && spec_.action_inputs == 0) throw ShapeError("network has no action input");

  Matrix<Scalar> g = grad_output;
  Matrix<Scalar> gin;
  for (std::size_t s = stages_.size(); s-- > 0;) {
    const Stage& st = stages_[s];
    const Matrix<Scalar>& out = ws.activations[s + 1];
    switch (st.kind) {
      case Kind::kDense: {
        const bool has_extra = s == first_dense_ && spec_.action_inputs > 0;
        const Matrix<Scalar>& in = has_extra ? ws.head_input : ws.activations[s];
        if (st.relu) {
          g = (out.array() > Scalar(0)).select(g, Scalar(0));
        } else if (s + 1 == stages_.size() && spec_.squash_output) {
          g = (g.array() * (Scalar(1) - out.array().square())).matrix();
        }
        if (!grads.empty()) {
          MatrixMap<Scalar> dw(grads.data() + st.weight, st.out_features, st.in_features);
          VectorMap<Scalar> db(grads.data() + st.bias, st.out_features);
          dw.noalias() += g * in.transpose();
          db += g.rowwise().sum();
        }
        const bool input_grad_needed =
            (s > 0 && (!grads.empty() || s > first_dense_)) || (has_extra && grad_extra);
        if (!input_grad_needed) return;
        const ConstMatrixMap<Scalar> w(params_.data() + st.weight, st.out_features, st.in_features);
        gin.noalias() = w.transpose() * g;
        if (has_extra) {
          if (grad_extra) *grad_extra = gin.bottomRows(spec_.action_inputs);
          if (grads.empty() || s == 0) return;
          g = gin.topRows(st.in_features - spec_.action_inputs);
        } else {
          g.swap(gin);
        }
        break;
      }
      case Kind::kPool: {
        gin.setZero(st.in_features, g.cols());
        const auto& idx = ws.pool_argmax[s];
        for (Eigen::Index c = 0; c < g.cols(); ++c) {
          const int* at = idx.data() + c * st.out_features;
          for (int o = 0; o < st.out_features; ++o) gin(at[o], c) += g(o, c);
        }
        g.swap(gin);
        break;
      }
      case Kind::kConv:
        conv_backward(st, ws.activations[s], out, g, grads, s > 0 ? &gin : nullptr);
        if (s == 0) return;
        g.swap(gin);
        break;
    }
  }
}

template class Network<float>;
template class Network<double>;

}  // namespace mzi::nn
