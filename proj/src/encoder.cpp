#include "seqtag/encoder.hpp"

#include <cmath>

namespace seqtag {

namespace {

void init_uniform(Matrix& m, Rng& rng) {
  for (double& v : m.data()) v = rng.uniform(-1.0, 1.0);
}

Vector gate_preactivation(const Param& wx, const Param& wh, const Param& b,
                          std::span<const double> x, std::span<const double> h_prev) {
  Vector a = affine(wx.value, x, b.value.data());
  const Vector rec = affine(wh.value, h_prev, Vector(wh.value.rows(), 0.0));
  for (std::size_t k = 0; k < a.size(); ++k) a[k] += rec[k];
  return a;
}

}  // namespace

RnnCellParams::RnnCellParams(const std::string& prefix, std::size_t input_dim,
                             std::size_t hidden)
    : u(prefix + ".u", hidden, input_dim),
      v(prefix + ".v", hidden, hidden),
      b(prefix + ".b", hidden, 1) {}

void RnnCellParams::init_weights(Rng& rng) {
  init_uniform(u.value, rng);
  init_uniform(v.value, rng);
  b.value.fill(0.0);
}

std::vector<Param*> RnnCellParams::params() { return {&u, &v, &b}; }

Vector rnn_step(const RnnCellParams& cell, std::span<const double> x,
                std::span<const double> h_prev) {
  if (x.size() != cell.input_dim() || h_prev.size() != cell.hidden()) {
    throw dimension_error("rnn_step: input or state size does not match the cell");
  }
  Vector z = affine(cell.u.value, x, cell.b.value.data());
  const Vector rec = affine(cell.v.value, h_prev, Vector(cell.hidden(), 0.0));
  for (std::size_t k = 0; k < z.size(); ++k) z[k] += rec[k];
  return sigmoid(z);
}

LstmCellParams::LstmCellParams(const std::string& prefix, std::size_t input_dim,
                               std::size_t hidden)
    : input{Param(prefix + ".i.wx", hidden, input_dim), Param(prefix + ".i.wh", hidden, hidden),
            Param(prefix + ".i.b", hidden, 1)},
      forget{Param(prefix + ".f.wx", hidden, input_dim), Param(prefix + ".f.wh", hidden, hidden),
             Param(prefix + ".f.b", hidden, 1)},
      output{Param(prefix + ".o.wx", hidden, input_dim), Param(prefix + ".o.wh", hidden, hidden),
             Param(prefix + ".o.b", hidden, 1)},
      candidate{Param(prefix + ".g.wx", hidden, input_dim),
                Param(prefix + ".g.wh", hidden, hidden), Param(prefix + ".g.b", hidden, 1)} {}

void LstmCellParams::init_weights(Rng& rng) {
  for (Gate* g : {&input, &forget, &output, &candidate}) {
    init_uniform(g->wx.value, rng);
    init_uniform(g->wh.value, rng);
    g->b.value.fill(0.0);
  }
  forget.b.value.fill(1.0);
}

std::vector<Param*> LstmCellParams::params() {
  std::vector<Param*> out;
  for (Gate* g : {&input, &forget, &output, &candidate}) {
    out.push_back(&g->wx);
    out.push_back(&g->wh);
    out.push_back(&g->b);
  }
  return out;
}

LstmState lstm_step(const LstmCellParams& cell, std::span<const double> x,
                    std::span<const double> h_prev, std::span<const double> c_prev) {
  if (x.size() != cell.input_dim() || h_prev.size() != cell.hidden() ||
      c_prev.size() != cell.hidden()) {
    throw dimension_error("lstm_step: input or state size does not match the cell");
  }
  const Vector i = sigmoid(gate_preactivation(cell.input.wx, cell.input.wh, cell.input.b, x, h_prev));
  const Vector f = sigmoid(gate_preactivation(cell.forget.wx, cell.forget.wh, cell.forget.b, x, h_prev));
  const Vector o = sigmoid(gate_preactivation(cell.output.wx, cell.output.wh, cell.output.b, x, h_prev));
  const Vector g = tanh_vec(
      gate_preactivation(cell.candidate.wx, cell.candidate.wh, cell.candidate.b, x, h_prev));
  LstmState s;
  s.c.resize(cell.hidden());
  s.h.resize(cell.hidden());
  for (std::size_t k = 0; k < cell.hidden(); ++k) {
    s.c[k] = f[k] * c_prev[k] + i[k] * g[k];
    s.h[k] = o[k] * std::tanh(s.c[k]);
  }
  return s;
}

Encoder::Encoder(CellKind kind, std::size_t input_dim, std::size_t hidden, std::size_t num_tags)
    : kind_(kind),
      input_dim_(input_dim),
      hidden_(hidden),
      num_tags_(num_tags),
      proj_w_("proj.w", num_tags, 2 * hidden),
      proj_b_("proj.b", num_tags, 1) {
  if (input_dim == 0 || hidden == 0 || num_tags == 0) {
    throw config_error("encoder dimensions must be positive");
  }
  if (kind == CellKind::rnn) {
    rnn_cells_.emplace_back("fwd", input_dim, hidden);
    rnn_cells_.emplace_back("bwd", input_dim, hidden);
  } else {
    lstm_cells_.emplace_back("fwd", input_dim, hidden);
    lstm_cells_.emplace_back("bwd", input_dim, hidden);
  }
}

void Encoder::init_weights(Rng& rng) {
  if (kind_ == CellKind::rnn) {
    rnn_cells_[0].init_weights(rng);
    rnn_cells_[1].init_weights(rng);
  } else {
    lstm_cells_[0].init_weights(rng);
    lstm_cells_[1].init_weights(rng);
  }
  init_uniform(proj_w_.value, rng);
  proj_b_.value.fill(0.0);
}

std::vector<Param*> Encoder::params() {
  std::vector<Param*> out;
  if (kind_ == CellKind::rnn) {
    for (auto& cell : rnn_cells_) {
      for (Param* p : cell.params()) out.push_back(p);
    }
  } else {
    for (auto& cell : lstm_cells_) {
      for (Param* p : cell.params()) out.push_back(p);
    }
  }
  out.push_back(&proj_w_);
  out.push_back(&proj_b_);
  return out;
}

template <typename CellVec>
void Encoder::run_direction(const CellVec& cell, const std::vector<Vector>& inputs,
                            bool reversed, DirectionCache& cache) const {
  const std::size_t len = inputs.size();
  cache.h.assign(len, {});
  Vector h_prev(hidden_, 0.0);
  if constexpr (std::is_same_v<CellVec, RnnCellParams>) {
    for (std::size_t s = 0; s < len; ++s) {
      const std::size_t pos = reversed ? len - 1 - s : s;
      cache.h[pos] = rnn_step(cell, inputs[pos], h_prev);
      h_prev = cache.h[pos];
    }
  } else {
    cache.c.assign(len, {});
    cache.gate_i.assign(len, {});
    cache.gate_f.assign(len, {});
    cache.gate_o.assign(len, {});
    cache.gate_g.assign(len, {});
    cache.tanh_c.assign(len, {});
    Vector c_prev(hidden_, 0.0);
    for (std::size_t s = 0; s < len; ++s) {
      const std::size_t pos = reversed ? len - 1 - s : s;
      const auto& x = inputs[pos];
      Vector i = sigmoid(gate_preactivation(cell.input.wx, cell.input.wh, cell.input.b, x, h_prev));
      Vector f = sigmoid(gate_preactivation(cell.forget.wx, cell.forget.wh, cell.forget.b, x, h_prev));
      Vector o = sigmoid(gate_preactivation(cell.output.wx, cell.output.wh, cell.output.b, x, h_prev));
      Vector g = tanh_vec(
          gate_preactivation(cell.candidate.wx, cell.candidate.wh, cell.candidate.b, x, h_prev));
      Vector c(hidden_), tc(hidden_), h(hidden_);
      for (std::size_t k = 0; k < hidden_; ++k) {
        c[k] = f[k] * c_prev[k] + i[k] * g[k];
        tc[k] = std::tanh(c[k]);
        h[k] = o[k] * tc[k];
      }
      cache.gate_i[pos] = std::move(i);
      cache.gate_f[pos] = std::move(f);
      cache.gate_o[pos] = std::move(o);
      cache.gate_g[pos] = std::move(g);
      cache.tanh_c[pos] = std::move(tc);
      cache.c[pos] = c;
      cache.h[pos] = h;
      h_prev = std::move(h);
      c_prev = std::move(c);
    }
  }
}

EncoderOutput Encoder::encode(const std::vector<Vector>& inputs, double dropout_rate, Rng& rng,
                              RunMode mode) const {
  if (inputs.empty()) throw input_error("cannot encode an empty sentence");
  for (const auto& x : inputs) {
    if (x.size() != input_dim_) {
      throw dimension_error("input vector has " + std::to_string(x.size()) +
                            " components, encoder expects " + std::to_string(input_dim_));
    }
  }
  const std::size_t len = inputs.size();

  EncoderOutput out;
  out.mode = mode;
  out.inputs = inputs;
  if (kind_ == CellKind::rnn) {
    run_direction(rnn_cells_[0], inputs, false, out.fwd);
    run_direction(rnn_cells_[1], inputs, true, out.bwd);
  } else {
    run_direction(lstm_cells_[0], inputs, false, out.fwd);
    run_direction(lstm_cells_[1], inputs, true, out.bwd);
  }

  out.dropped = Matrix(len, 2 * hidden_);
  if (mode == RunMode::train) out.mask = Matrix(len, 2 * hidden_);
  for (std::size_t t = 0; t < len; ++t) {
    auto row = out.dropped.row(t);
    for (std::size_t k = 0; k < hidden_; ++k) {
      row[k] = out.fwd.h[t][k];
      row[hidden_ + k] = out.bwd.h[t][k];
    }
    if (mode == RunMode::train) {
      const Vector mask = dropout_mask(2 * hidden_, dropout_rate, rng);
      auto mrow = out.mask.row(t);
      for (std::size_t k = 0; k < 2 * hidden_; ++k) {
        mrow[k] = mask[k];
        row[k] *= mask[k];
      }
    }
  }

  out.emissions = Matrix(len, num_tags_);
  for (std::size_t t = 0; t < len; ++t) {
    const Vector scores = affine(proj_w_.value, out.dropped.row(t), proj_b_.value.data());
    auto erow = out.emissions.row(t);
    for (std::size_t k = 0; k < num_tags_; ++k) erow[k] = scores[k];
  }
  return out;
}

Matrix Encoder::backward(const EncoderOutput& out, const Matrix& d_emissions) {
  if (out.mode != RunMode::train) {
    throw usage_error("backward requires a train-mode forward pass");
  }
  const std::size_t len = out.length();
  if (d_emissions.rows() != len || d_emissions.cols() != num_tags_) {
    throw dimension_error("emission gradient shape does not match the output");
  }

  Matrix d_inputs(len, input_dim_);
  std::vector<Vector> d_h_fwd(len, Vector(hidden_, 0.0));
  std::vector<Vector> d_h_bwd(len, Vector(hidden_, 0.0));

  // Projection layer, then split the concatenated-state gradient.
  for (std::size_t t = 0; t < len; ++t) {
    const auto d_em = d_emissions.row(t);
    add_outer(proj_w_.grad, d_em, out.dropped.row(t));
    for (std::size_t k = 0; k < num_tags_; ++k) proj_b_.grad(k, 0) += d_em[k];
    Vector d_dropped = matvec_transposed(proj_w_.value, d_em);
    const auto mrow = out.mask.row(t);
    for (std::size_t k = 0; k < hidden_; ++k) {
      d_h_fwd[t][k] = d_dropped[k] * mrow[k];
      d_h_bwd[t][k] = d_dropped[hidden_ + k] * mrow[hidden_ + k];
    }
  }

  // BPTT per direction, visiting positions in reverse processing order.
  auto run_rnn = [&](RnnCellParams& cell, const DirectionCache& cache, bool reversed,
                     std::vector<Vector>& d_h) {
    Vector carry(hidden_, 0.0);
    const Vector zeros(hidden_, 0.0);
    for (std::size_t s = len; s-- > 0;) {
      const std::size_t pos = reversed ? len - 1 - s : s;
      const bool has_prev = s > 0;
      const std::size_t prev_pos = reversed ? pos + 1 : pos - 1;
      const Vector& h = cache.h[pos];
      std::span<const double> h_prev = has_prev ? std::span<const double>(cache.h[prev_pos])
                                                : std::span<const double>(zeros);
      Vector dz(hidden_);
      for (std::size_t k = 0; k < hidden_; ++k) {
        dz[k] = (d_h[pos][k] + carry[k]) * h[k] * (1.0 - h[k]);
      }
      add_outer(cell.u.grad, dz, out.inputs[pos]);
      add_outer(cell.v.grad, dz, h_prev);
      for (std::size_t k = 0; k < hidden_; ++k) cell.b.grad(k, 0) += dz[k];
      const Vector dx = matvec_transposed(cell.u.value, dz);
      auto drow = d_inputs.row(pos);
      for (std::size_t k = 0; k < input_dim_; ++k) drow[k] += dx[k];
      carry = matvec_transposed(cell.v.value, dz);
    }
  };

  auto run_lstm = [&](LstmCellParams& cell, const DirectionCache& cache, bool reversed,
                      std::vector<Vector>& d_h) {
    Vector carry_h(hidden_, 0.0), carry_c(hidden_, 0.0);
    const Vector zeros(hidden_, 0.0);
    for (std::size_t s = len; s-- > 0;) {
      const std::size_t pos = reversed ? len - 1 - s : s;
      const bool has_prev = s > 0;
      const std::size_t prev_pos = reversed ? pos + 1 : pos - 1;
      std::span<const double> h_prev = has_prev ? std::span<const double>(cache.h[prev_pos])
                                                : std::span<const double>(zeros);
      std::span<const double> c_prev = has_prev ? std::span<const double>(cache.c[prev_pos])
                                                : std::span<const double>(zeros);
      const Vector& gi = cache.gate_i[pos];
      const Vector& gf = cache.gate_f[pos];
      const Vector& go = cache.gate_o[pos];
      const Vector& gg = cache.gate_g[pos];
      const Vector& tc = cache.tanh_c[pos];

      Vector da_i(hidden_), da_f(hidden_), da_o(hidden_), da_g(hidden_);
      Vector next_carry_c(hidden_);
      for (std::size_t k = 0; k < hidden_; ++k) {
        const double dh = d_h[pos][k] + carry_h[k];
        const double dc = dh * go[k] * (1.0 - tc[k] * tc[k]) + carry_c[k];
        const double d_o = dh * tc[k];
        const double d_f = dc * c_prev[k];
        const double d_i = dc * gg[k];
        const double d_g = dc * gi[k];
        next_carry_c[k] = dc * gf[k];
        da_i[k] = d_i * gi[k] * (1.0 - gi[k]);
        da_f[k] = d_f * gf[k] * (1.0 - gf[k]);
        da_o[k] = d_o * go[k] * (1.0 - go[k]);
        da_g[k] = d_g * (1.0 - gg[k] * gg[k]);
      }
      carry_c = std::move(next_carry_c);

      carry_h.assign(hidden_, 0.0);
      auto drow = d_inputs.row(pos);
      const std::pair<LstmCellParams::Gate*, Vector*> gates[4] = {
          {&cell.input, &da_i}, {&cell.forget, &da_f}, {&cell.output, &da_o},
          {&cell.candidate, &da_g}};
      for (auto& [gate, da] : gates) {
        add_outer(gate->wx.grad, *da, out.inputs[pos]);
        add_outer(gate->wh.grad, *da, h_prev);
        for (std::size_t k = 0; k < hidden_; ++k) gate->b.grad(k, 0) += (*da)[k];
        const Vector dx = matvec_transposed(gate->wx.value, *da);
        for (std::size_t k = 0; k < input_dim_; ++k) drow[k] += dx[k];
        const Vector dh_prev = matvec_transposed(gate->wh.value, *da);
        for (std::size_t k = 0; k < hidden_; ++k) carry_h[k] += dh_prev[k];
      }
    }
  };

  if (kind_ == CellKind::rnn) {
    run_rnn(rnn_cells_[0], out.fwd, false, d_h_fwd);
    run_rnn(rnn_cells_[1], out.bwd, true, d_h_bwd);
  } else {
    run_lstm(lstm_cells_[0], out.fwd, false, d_h_fwd);
    run_lstm(lstm_cells_[1], out.bwd, true, d_h_bwd);
  }
  return d_inputs;
}

Matrix softmax_output(const EncoderOutput& output) {
  Matrix probs(output.emissions.rows(), output.emissions.cols());
  for (std::size_t t = 0; t < output.emissions.rows(); ++t) {
    const Vector p = softmax(output.emissions.row(t));
    auto row = probs.row(t);
    for (std::size_t k = 0; k < p.size(); ++k) row[k] = p[k];
  }
  return probs;
}

}  // namespace seqtag
