#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "seqtag/nncore.hpp"

namespace seqtag {

enum class CellKind { rnn, lstm };
enum class RunMode { train, eval };

// Simple recurrent cell: h_t = sigmoid(U x_t + V h_prev + b).
struct RnnCellParams {
  Param u;  // H x d
  Param v;  // H x H
  Param b;  // H x 1

  RnnCellParams(const std::string& prefix, std::size_t input_dim, std::size_t hidden);
  std::size_t hidden() const { return u.value.rows(); }
  std::size_t input_dim() const { return u.value.cols(); }
  void init_weights(Rng& rng);
  std::vector<Param*> params();
};

Vector rnn_step(const RnnCellParams& cell, std::span<const double> x,
                std::span<const double> h_prev);

// Standard four-gate LSTM without peepholes. Gate order everywhere (draws,
// params, serialization) is input, forget, output, candidate. The forget
// bias initializes to 1.
struct LstmCellParams {
  struct Gate {
    Param wx;  // H x d
    Param wh;  // H x H
    Param b;   // H x 1
  };
  Gate input, forget, output, candidate;

  LstmCellParams(const std::string& prefix, std::size_t input_dim, std::size_t hidden);
  std::size_t hidden() const { return input.wx.value.rows(); }
  std::size_t input_dim() const { return input.wx.value.cols(); }
  void init_weights(Rng& rng);
  std::vector<Param*> params();
};

struct LstmState {
  Vector h;
  Vector c;
};

LstmState lstm_step(const LstmCellParams& cell, std::span<const double> x,
                    std::span<const double> h_prev, std::span<const double> c_prev);

// Cached activations of one direction, indexed by token position.
struct DirectionCache {
  std::vector<Vector> h;
  // LSTM only:
  std::vector<Vector> c, gate_i, gate_f, gate_o, gate_g, tanh_c;
};

struct EncoderOutput {
  Matrix emissions;  // T x K, unnormalized scores
  RunMode mode = RunMode::eval;
  std::size_t length() const { return emissions.rows(); }

  // Backward-pass caches.
  std::vector<Vector> inputs;
  DirectionCache fwd;
  DirectionCache bwd;
  Matrix mask;     // T x 2H inverted-dropout mask (train mode only)
  Matrix dropped;  // T x 2H concatenated states after dropout
};

// Bidirectional recurrent encoder with a linear projection to per-tag
// emission scores. Forward and backward directions run from zero initial
// states; their states concatenate to a 2H vector per token, dropout applies
// to that vector in train mode, and emissions stay unnormalized (the CRF or a
// per-token softmax normalizes downstream).
class Encoder {
 public:
  Encoder(CellKind kind, std::size_t input_dim, std::size_t hidden, std::size_t num_tags);

  CellKind kind() const { return kind_; }
  std::size_t input_dim() const { return input_dim_; }
  std::size_t hidden() const { return hidden_; }
  std::size_t num_tags() const { return num_tags_; }

  // Weight matrices uniform on [-1, 1]; biases zero except the LSTM forget
  // bias. Draw order: forward cell, backward cell, projection.
  void init_weights(Rng& rng);

  EncoderOutput encode(const std::vector<Vector>& inputs, double dropout_rate, Rng& rng,
                       RunMode mode) const;

  // Exact gradients for the scalar loss whose emission gradient is
  // d_emissions: accumulates into this encoder's parameter grads and returns
  // the T x d gradient with respect to the input vectors. Requires a
  // train-mode output (dropout masks are replayed from the cache).
  Matrix backward(const EncoderOutput& output, const Matrix& d_emissions);

  std::vector<Param*> params();

 private:
  template <typename CellVec>
  void run_direction(const CellVec& cell, const std::vector<Vector>& inputs, bool reversed,
                     DirectionCache& cache) const;

  CellKind kind_;
  std::size_t input_dim_;
  std::size_t hidden_;
  std::size_t num_tags_;
  std::vector<RnnCellParams> rnn_cells_;    // fwd, bwd when kind == rnn
  std::vector<LstmCellParams> lstm_cells_;  // fwd, bwd when kind == lstm
  Param proj_w_;  // K x 2H
  Param proj_b_;  // K x 1
};

// Per-token softmax over the emission rows; the non-CRF baseline output.
Matrix softmax_output(const EncoderOutput& output);

}  // namespace seqtag
