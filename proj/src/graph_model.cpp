#include "sumgraph/graph_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sumgraph/errors.hpp"
#include "sumgraph/random.hpp"

namespace sumgraph {

// ---------------------------------------------------------------------------
// Types

FeatureMatrix::FeatureMatrix(Matrix values) : values_(std::move(values)) {
  if (values_.rows() < 2) {
    throw DegenerateInputError("feature matrix needs at least 2 frames, got " +
                               std::to_string(values_.rows()));
  }
  if (values_.cols() == 0) throw DegenerateInputError("feature matrix has zero dimensions");
  if (!values_.all_finite()) throw DegenerateInputError("feature matrix has non-finite entries");
  for (std::size_t i = 0; i < values_.rows(); ++i) {
    const auto r = values_.row(i);
    if (std::all_of(r.begin(), r.end(), [](double x) { return x == 0.0; })) {
      throw DegenerateInputError("feature row " + std::to_string(i) + " has zero norm");
    }
  }
}

namespace {

Matrix glorot(std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (double& x : m.data()) x = rng.uniform(-limit, limit);
  return m;
}

void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, std::string_view name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError(std::string(name) + " is " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
}

}  // namespace

ModelParams ModelParams::init(const ModelDims& dims, std::uint64_t seed) {
  if (dims.input == 0 || dims.hidden == 0 || dims.embedding == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  Rng rng(seed);
  ModelParams p;
  p.w_c = glorot(dims.input, dims.hidden, rng);
  p.w_r = glorot(dims.hidden, dims.hidden, rng);
  p.w_theta = glorot(dims.hidden, dims.embedding, rng);
  p.w_phi = glorot(dims.hidden, dims.embedding, rng);
  p.w_s = glorot(dims.hidden, 1, rng);
  p.w_d1 = glorot(dims.hidden, dims.hidden, rng);
  p.w_d2 = glorot(dims.hidden, dims.input, rng);
  return p;
}

ModelParams ModelParams::zeros_like(const ModelParams& other) {
  ModelParams p;
  auto dst = p.tensors();
  auto src = other.tensors();
  for (std::size_t i = 0; i < kCount; ++i) *dst[i] = Matrix(src[i]->rows(), src[i]->cols());
  return p;
}

void ModelParams::validate() const {
  const ModelDims d = dims();
  require_shape(w_c, d.input, d.hidden, "W_C");
  require_shape(w_r, d.hidden, d.hidden, "W_R");
  require_shape(w_theta, d.hidden, d.embedding, "W_theta");
  require_shape(w_phi, d.hidden, d.embedding, "W_phi");
  require_shape(w_s, d.hidden, 1, "W_S");
  require_shape(w_d1, d.hidden, d.hidden, "W_D1");
  require_shape(w_d2, d.hidden, d.input, "W_D2");
}

std::array<Matrix*, ModelParams::kCount> ModelParams::tensors() {
  return {&w_c, &w_r, &w_theta, &w_phi, &w_s, &w_d1, &w_d2};
}

std::array<const Matrix*, ModelParams::kCount> ModelParams::tensors() const {
  return {&w_c, &w_r, &w_theta, &w_phi, &w_s, &w_d1, &w_d2};
}

SummaryScores SummaryScores::from_scores(std::vector<double> y) {
  SummaryScores s;
  s.selected.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) s.selected[i] = y[i] > 0.5;
  s.y = std::move(y);
  return s;
}

std::vector<std::size_t> SummaryScores::selected_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < selected.size(); ++i)
    if (selected[i]) out.push_back(i);
  return out;
}

// ---------------------------------------------------------------------------
// Tape operations

ParamVars bind_parameters(Tape& tape, const ModelParams& p, bool trainable) {
  p.validate();
  auto bind = [&](const Matrix& m) { return trainable ? tape.parameter(m) : tape.constant(m); };
  return {bind(p.w_c), bind(p.w_r),  bind(p.w_theta), bind(p.w_phi),
          bind(p.w_s), bind(p.w_d1), bind(p.w_d2)};
}

ModelParams collect_gradients(const Tape& tape, const ParamVars& vars) {
  ModelParams g;
  auto dst = g.tensors();
  const auto src = vars.all();
  for (std::size_t i = 0; i < ModelParams::kCount; ++i) *dst[i] = tape.grad(src[i]);
  return g;
}

namespace ad {

Var normalize_adjacency(Tape& t, Var a) {
  const Matrix& v = t.value(a);
  if (v.rows() != v.cols()) throw ShapeError("adjacency must be square");
  Var guarded = add_identity(t, relu(t, a));
  Var degree = row_sum(t, guarded);
  // Diagonal of relu(A) + I is >= 1, so degrees are >= 1.
  Var inv_sqrt = rsqrt(t, degree);
  return scale_cols(t, scale_rows(t, guarded, inv_sqrt), inv_sqrt);
}

Var normalize_rows(Tape& t, Var a) {
  return scale_rows(t, a, reciprocal(t, row_norms(t, a, kNormEps)));
}

Var gcn(Tape& t, Var features, Var adjacency, Var weight, Activation activation) {
  const Matrix& f = t.value(features);
  const Matrix& a = t.value(adjacency);
  if (a.rows() != f.rows()) {
    throw ShapeError("gcn: adjacency is " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " but features have " + std::to_string(f.rows()) +
                     " rows");
  }
  Var out = matmul(t, normalize_adjacency(t, adjacency), matmul(t, features, weight));
  return activation == Activation::kRelu ? relu(t, out) : out;
}

Var residual(Tape& t, Var z, const ParamVars& p) {
  Var left = normalize_rows(t, matmul(t, z, p.w_theta));
  Var right = normalize_rows(t, matmul(t, z, p.w_phi));
  Var raw = matmul(t, left, transpose(t, right));
  return scale(t, add(t, raw, transpose(t, raw)), 0.5);
}

}  // namespace ad

namespace {

struct TapeRefine {
  std::vector<Var> adjacency;
  std::vector<Var> residuals;
  std::vector<Var> z;
};

TapeRefine refine_on_tape(Tape& t, Var a0, Var x0, std::size_t k, const ParamVars& p) {
  if (k < 1) throw ConfigError("refinement needs K >= 1");
  TapeRefine r;
  r.adjacency.push_back(a0);
  Var z = x0;
  Var residual_sum;
  for (std::size_t step = 1; step <= k; ++step) {
    z = ad::gcn(t, z, r.adjacency.back(), p.w_r, Activation::kRelu);
    Var da = ad::residual(t, z, p);
    residual_sum = step == 1 ? da : ad::add(t, residual_sum, da);
    r.adjacency.push_back(ad::add(t, a0, residual_sum));
    r.residuals.push_back(da);
    r.z.push_back(z);
  }
  return r;
}

Var head_on_tape(Tape& t, Var z_k, Var a_k, const ParamVars& p) {
  return ad::sigmoid(t, ad::gcn(t, z_k, a_k, p.w_s, Activation::kIdentity));
}

std::vector<Matrix> values_of(const Tape& t, std::span<const Var> vars) {
  std::vector<Matrix> out;
  out.reserve(vars.size());
  for (Var v : vars) out.push_back(t.value(v));
  return out;
}

std::vector<double> column_values(const Matrix& m) {
  return std::vector<double>(m.data().begin(), m.data().end());
}

}  // namespace

void check_refinement_invariants(std::span<const Matrix> adjacency,
                                 std::span<const Matrix> residuals) {
  if (adjacency.size() != residuals.size() + 1) {
    throw InvariantError("adjacency list must be one longer than the residual list");
  }
  Matrix running;
  for (std::size_t k = 0; k < residuals.size(); ++k) {
    if (k == 0) {
      running = residuals[0];
    } else {
      running += residuals[k];
    }
    if (!(adjacency[k + 1] == adjacency[0] + running)) {
      throw InvariantError("telescoping identity broken at step " + std::to_string(k + 1));
    }
  }
  for (std::size_t k = 0; k < adjacency.size(); ++k) {
    const Matrix& a = adjacency[k];
    if (max_abs_diff(a, transpose(a)) > 1e-9) {
      throw InvariantError("adjacency A^" + std::to_string(k) + " is not symmetric");
    }
  }
}

TapeForward forward(Tape& tape, const ParamVars& p, const FeatureMatrix& x, std::size_t k) {
  TapeForward f;
  Var features = tape.constant(x.values());
  Var a0 = tape.constant(cosine_affinity(x.values()));
  f.x0 = ad::gcn(tape, features, a0, p.w_c, Activation::kRelu);
  TapeRefine r = refine_on_tape(tape, a0, f.x0, k, p);
  f.scores = head_on_tape(tape, r.z.back(), r.adjacency.back(), p);
  f.adjacency = std::move(r.adjacency);
  f.residuals = std::move(r.residuals);
  f.z = std::move(r.z);
#ifdef SUMGRAPH_INVARIANT_CHECKS
  check_refinement_invariants(values_of(tape, f.adjacency), values_of(tape, f.residuals));
#endif
  return f;
}

// ---------------------------------------------------------------------------
// Plain operations

Matrix cosine_affinity(const Matrix& x) {
  const std::size_t n = x.rows();
  std::vector<double> sq_norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (double v : x.row(i)) acc += v * v;
    sq_norms[i] = acc;
    if (!(acc > 0.0)) {
      throw DegenerateInputError("cosine affinity: row " + std::to_string(i) + " has zero norm");
    }
  }
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    a(i, i) = 1.0;
    const auto xi = x.row(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto xj = x.row(j);
      double dot = 0.0;
      for (std::size_t c = 0; c < xi.size(); ++c) dot += xi[c] * xj[c];
      // sqrt(s * s) == s exactly, so identical rows give exactly 1.
      const double cos = std::clamp(dot / std::sqrt(sq_norms[i] * sq_norms[j]), -1.0, 1.0);
      a(i, j) = cos;
      a(j, i) = cos;
    }
  }
  return a;
}

Adjacency cosine_affinity(const FeatureMatrix& x) {
  return {cosine_affinity(x.values()), 0};
}

Matrix normalize_adjacency(const Matrix& a) {
  Tape t;
  return t.value(ad::normalize_adjacency(t, t.constant(a)));
}

Matrix gcn_forward(const Matrix& features, const Matrix& adjacency, const Matrix& weight,
                   Activation activation) {
  Tape t;
  return t.value(ad::gcn(t, t.constant(features), t.constant(adjacency), t.constant(weight),
                         activation));
}

std::pair<Adjacency, Matrix> initial_construction(const FeatureMatrix& x, const ModelParams& p) {
  Adjacency a0 = cosine_affinity(x);
  Matrix x0 = gcn_forward(x.values(), a0.values, p.w_c, Activation::kRelu);
  return {std::move(a0), std::move(x0)};
}

RefineStep refine_step(const Matrix& z_prev, const Adjacency& a_prev, const ModelParams& p) {
  Tape t;
  const ParamVars pv = bind_parameters(t, p, false);
  Var a = t.constant(a_prev.values);
  Var z = ad::gcn(t, t.constant(z_prev), a, pv.w_r, Activation::kRelu);
  Var da = ad::residual(t, z, pv);
  Var next = ad::add(t, a, da);
  return {t.value(z), t.value(da), Adjacency{t.value(next), a_prev.iteration + 1}};
}

RefineResult refine(const Adjacency& a0, const Matrix& x0, std::size_t k, const ModelParams& p) {
  Tape t;
  const ParamVars pv = bind_parameters(t, p, false);
  TapeRefine r = refine_on_tape(t, t.constant(a0.values), t.constant(x0), k, pv);
  RefineResult out;
  for (std::size_t i = 0; i < r.adjacency.size(); ++i) {
    out.adjacency.push_back(Adjacency{t.value(r.adjacency[i]), a0.iteration + i});
  }
  out.residuals = values_of(t, r.residuals);
  out.z = values_of(t, r.z);
  return out;
}

SummaryScores summarize_head(const Matrix& z_k, const Adjacency& a_k, const ModelParams& p) {
  Tape t;
  const ParamVars pv = bind_parameters(t, p, false);
  Var y = head_on_tape(t, t.constant(z_k), t.constant(a_k.values), pv);
  return SummaryScores::from_scores(column_values(t.value(y)));
}

ForwardTrace forward(const FeatureMatrix& x, const ModelParams& p, std::size_t k) {
  Tape t;
  const ParamVars pv = bind_parameters(t, p, false);
  const TapeForward f = forward(t, pv, x, k);
  ForwardTrace trace;
  for (std::size_t i = 0; i < f.adjacency.size(); ++i) {
    trace.adjacency.push_back(Adjacency{t.value(f.adjacency[i]), i});
  }
  trace.residuals = values_of(t, f.residuals);
  trace.x0 = t.value(f.x0);
  trace.z = values_of(t, f.z);
  trace.scores = SummaryScores::from_scores(column_values(t.value(f.scores)));
  return trace;
}

}  // namespace sumgraph
