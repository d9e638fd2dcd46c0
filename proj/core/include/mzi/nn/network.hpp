#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mzi/nn/network_spec.hpp"

namespace mzi::nn {

/// Input or gradient shapes do not match the network layout.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// A named slice of the flat parameter vector.
struct TensorInfo {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t count = 0;
};

/// Activations cached by a forward pass for the matching backward pass.
/// Keeping them outside the network lets one parameter set serve several
/// concurrent forward passes.
template <typename Scalar>
struct Workspace {
  std::vector<Matrix<Scalar>> activations;
  std::vector<std::vector<int>> pool_argmax;
  Matrix<Scalar> head_input;
  int batch = 0;
};

/// Parameters of one actor or critic plus forward/backward passes. Samples are
/// matrix columns; a frame observation is flattened channel-major.
template <typename Scalar>
class Network {
 public:
  explicit Network(NetworkSpec spec);

  const NetworkSpec& spec() const { return spec_; }
  std::size_t parameter_count() const { return params_.size(); }
  std::span<Scalar> parameters() { return params_; }
  std::span<const Scalar> parameters() const { return params_; }
  const std::vector<TensorInfo>& tensors() const { return tensors_; }

  /// Orthonormal rows or columns for every weight matrix (convolutions
  /// reshaped to out x in*9), zero biases.
  void init_orthogonal(std::uint64_t seed, double gain = 1.0);
  void copy_parameters_from(const Network& other);

  /// `extra` carries the action batch for critics and must be null for
  /// actors. Returns output x batch; actor outputs are squashed to (-1, 1).
  const Matrix<Scalar>& forward(Workspace<Scalar>& ws, const Matrix<Scalar>& input,
                                const Matrix<Scalar>* extra = nullptr) const;

  /// Backpropagates d(loss)/d(output) from the last forward on `ws`.
  /// Parameter gradients are added into `grads` (skipped if empty); the
  /// gradient with respect to `extra` is written to `grad_extra` if non-null.
  void backward(Workspace<Scalar>& ws, const Matrix<Scalar>& grad_output, std::span<Scalar> grads,
                Matrix<Scalar>* grad_extra = nullptr) const;

 private:
  enum class Kind { kConv, kPool, kDense };
  struct Stage {
    Kind kind;
    int in_channels = 0;
    int out_channels = 0;
    int size = 0;  ///< input spatial side (conv/pool)
    int in_features = 0;
    int out_features = 0;
    std::size_t weight = 0;
    std::size_t bias = 0;
    bool relu = false;
  };

  void add_tensor(const std::string& name, std::vector<int> shape, std::size_t& cursor);

  void conv_forward(const Stage& st, const Matrix<Scalar>& in, Matrix<Scalar>& out) const;
  void conv_backward(const Stage& st, const Matrix<Scalar>& in, const Matrix<Scalar>& out,
                     const Matrix<Scalar>& grad_out, std::span<Scalar> grads, Matrix<Scalar>* grad_in) const;
  void pool_forward(const Stage& st, const Matrix<Scalar>& in, Matrix<Scalar>& out,
                    std::vector<int>& argmax) const;

  NetworkSpec spec_;
  std::vector<Stage> stages_;
  std::vector<TensorInfo> tensors_;
  std::vector<Scalar> params_;
  std::size_t first_dense_ = 0;
};

extern template class Network<float>;
extern template class Network<double>;

}  // namespace mzi::nn
