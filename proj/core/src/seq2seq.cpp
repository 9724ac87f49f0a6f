#include "octopath/seq2seq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "binary_io.hpp"
#include "octopath/error.hpp"
#include "octopath/random.hpp"

namespace octopath {

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

constexpr std::uint8_t kCheckpointVersion = 1;

// Tensor offsets inside one encoder (9 tensors) or decoder (12 tensors) layer.
enum EncSlot { kEWz, kEWr, kEWh, kEUz, kEUr, kEUh, kEbz, kEbr, kEbh, kEncSlots };
enum DecSlot { kDWz, kDWr, kDWs, kDUz, kDUr, kDUs, kDCz, kDCr, kDCs, kDbz, kDbr, kDbs, kDecSlots };

struct Layout {
  explicit Layout(const ModelSpec& s) : layers(static_cast<std::size_t>(s.n_layers)) {}
  std::size_t layers;
  [[nodiscard]] std::size_t enc(int l, int slot) const { return static_cast<std::size_t>(l) * kEncSlots + slot; }
  [[nodiscard]] std::size_t dec(int l, int slot) const {
    return layers * kEncSlots + static_cast<std::size_t>(l) * kDecSlots + slot;
  }
  [[nodiscard]] std::size_t embed() const {
    return layers * (static_cast<std::size_t>(kEncSlots) + static_cast<std::size_t>(kDecSlots));
  }
  [[nodiscard]] std::size_t us_out() const { return embed() + 1; }
  [[nodiscard]] std::size_t uc_out() const { return embed() + 2; }
  [[nodiscard]] std::size_t uo() const { return embed() + 3; }
  [[nodiscard]] std::size_t bo() const { return embed() + 4; }
  [[nodiscard]] std::size_t count() const { return embed() + 5; }
};

std::vector<std::pair<int, int>> tensor_shapes(const ModelSpec& spec) {
  const Layout lay(spec);
  std::vector<std::pair<int, int>> shapes(lay.count());
  const int h = spec.hidden_dim;
  for (int l = 0; l < spec.n_layers; ++l) {
    const int in = l == 0 ? spec.input_dim() : h;
    for (int k = kEWz; k <= kEWh; ++k) shapes[lay.enc(l, k)] = {h, in};
    for (int k = kEUz; k <= kEUh; ++k) shapes[lay.enc(l, k)] = {h, h};
    for (int k = kEbz; k <= kEbh; ++k) shapes[lay.enc(l, k)] = {h, 1};
  }
  for (int l = 0; l < spec.n_layers; ++l) {
    const int in = l == 0 ? spec.embed_dim : h;
    for (int k = kDWz; k <= kDWs; ++k) shapes[lay.dec(l, k)] = {h, in};
    for (int k = kDUz; k <= kDCs; ++k) shapes[lay.dec(l, k)] = {h, h};
    for (int k = kDbz; k <= kDbs; ++k) shapes[lay.dec(l, k)] = {h, 1};
  }
  const int e_cols = spec.head == Head::Classification ? spec.n_classes() + 1 : 3;
  shapes[lay.embed()] = {spec.embed_dim, e_cols};
  shapes[lay.us_out()] = {spec.embed_dim, h};
  shapes[lay.uc_out()] = {spec.embed_dim, h};
  shapes[lay.uo()] = {spec.output_dim(), spec.embed_dim};
  shapes[lay.bo()] = {spec.output_dim(), 1};
  return shapes;
}

bool is_bias(const std::pair<int, int>& shape, std::size_t index, const Layout& lay) {
  if (index == lay.bo()) return true;
  if (index >= lay.embed()) return false;
  const std::size_t enc_end = lay.layers * kEncSlots;
  if (index < enc_end) return index % kEncSlots >= kEbz;
  return (index - enc_end) % kDecSlots >= kDbz && shape.second == 1;
}

Mat sigmoid(const Mat& a) {
  return a.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

Mat tanh_of(const Mat& a) {
  return a.unaryExpr([](double v) { return std::tanh(v); });
}

void softmax_columns(Mat& logits) {
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    auto col = logits.col(c);
    const double m = col.maxCoeff();
    col = (col.array() - m).exp();
    col /= col.sum();
  }
}

/// One recurrent layer over T steps of B columns each (column t*B + b).
struct LayerTrace {
  Mat x;      // in x TB
  Mat s_prev;
  Mat z;
  Mat r;
  Mat g;
  Mat s_out;
};

struct GateWeights {
  const Mat* wz;
  const Mat* wr;
  const Mat* wh;
  const Mat* uz;
  const Mat* ur;
  const Mat* uh;
  const Mat* cz;  // nullptr for the encoder
  const Mat* cr;
  const Mat* ch;
  const Mat* bz;
  const Mat* br;
  const Mat* bh;
};

GateWeights encoder_gates(const ModelParams& p, int l) {
  const Layout lay(p.spec);
  const auto& t = p.tensors;
  return {&t[lay.enc(l, kEWz)], &t[lay.enc(l, kEWr)], &t[lay.enc(l, kEWh)], &t[lay.enc(l, kEUz)],
          &t[lay.enc(l, kEUr)], &t[lay.enc(l, kEUh)], nullptr, nullptr, nullptr,
          &t[lay.enc(l, kEbz)], &t[lay.enc(l, kEbr)], &t[lay.enc(l, kEbh)]};
}

GateWeights decoder_gates(const ModelParams& p, int l) {
  const Layout lay(p.spec);
  const auto& t = p.tensors;
  return {&t[lay.dec(l, kDWz)], &t[lay.dec(l, kDWr)], &t[lay.dec(l, kDWs)], &t[lay.dec(l, kDUz)],
          &t[lay.dec(l, kDUr)], &t[lay.dec(l, kDUs)], &t[lay.dec(l, kDCz)], &t[lay.dec(l, kDCr)],
          &t[lay.dec(l, kDCs)], &t[lay.dec(l, kDbz)], &t[lay.dec(l, kDbr)], &t[lay.dec(l, kDbs)]};
}

/// Gate pre-activations that do not depend on the recurrent state.
struct Drive {
  Mat az;
  Mat ar;
  Mat ah;
};

/// h' = (1 - z) h + z g with z, r, g from the pre-activations plus the recurrent terms.
void gru_cell(const GateWeights& w, const Eigen::Ref<const Mat>& az_in, const Eigen::Ref<const Mat>& ar_in,
              const Eigen::Ref<const Mat>& ah_in, const Mat& h, Mat& z, Mat& r, Mat& g, Mat& h_new) {
  Mat az = az_in;
  az.noalias() += *w.uz * h;
  Mat ar = ar_in;
  ar.noalias() += *w.ur * h;
  z = sigmoid(az);
  r = sigmoid(ar);
  const Mat rh = r.cwiseProduct(h);
  Mat ah = ah_in;
  ah.noalias() += *w.uh * rh;
  g = tanh_of(ah);
  h_new = h + z.cwiseProduct(g - h);
}

Drive input_drive(const GateWeights& w, const Mat& x) {
  Drive d;
  d.az.noalias() = *w.wz * x;
  d.ar.noalias() = *w.wr * x;
  d.ah.noalias() = *w.wh * x;
  d.az.colwise() += w.bz->col(0);
  d.ar.colwise() += w.br->col(0);
  d.ah.colwise() += w.bh->col(0);
  return d;
}

/// Full-sequence encoder layer.
void encoder_layer_forward(const GateWeights& w, const Mat& x, int steps, int batch, LayerTrace& tr) {
  const Eigen::Index h_dim = w.uz->rows();
  const Drive d = input_drive(w, x);
  const Eigen::Index tb = static_cast<Eigen::Index>(steps) * batch;
  tr.x = x;
  tr.s_prev.resize(h_dim, tb);
  tr.z.resize(h_dim, tb);
  tr.r.resize(h_dim, tb);
  tr.g.resize(h_dim, tb);
  tr.s_out.resize(h_dim, tb);
  Mat h = Mat::Zero(h_dim, batch);
  Mat z, r, g, hn;
  for (int t = 0; t < steps; ++t) {
    const Eigen::Index c0 = static_cast<Eigen::Index>(t) * batch;
    gru_cell(w, d.az.middleCols(c0, batch), d.ar.middleCols(c0, batch), d.ah.middleCols(c0, batch), h, z, r, g, hn);
    tr.s_prev.middleCols(c0, batch) = h;
    tr.z.middleCols(c0, batch) = z;
    tr.r.middleCols(c0, batch) = r;
    tr.g.middleCols(c0, batch) = g;
    tr.s_out.middleCols(c0, batch) = hn;
    h = hn;
  }
}

struct GateGrads {
  Mat* wz;
  Mat* wr;
  Mat* wh;
  Mat* uz;
  Mat* ur;
  Mat* uh;
  Mat* cz;
  Mat* cr;
  Mat* ch;
  Mat* bz;
  Mat* br;
  Mat* bh;
};

GateGrads encoder_grads(Gradients& g, const ModelSpec& spec, int l) {
  const Layout lay(spec);
  return {&g[lay.enc(l, kEWz)], &g[lay.enc(l, kEWr)], &g[lay.enc(l, kEWh)], &g[lay.enc(l, kEUz)],
          &g[lay.enc(l, kEUr)], &g[lay.enc(l, kEUh)], nullptr, nullptr, nullptr,
          &g[lay.enc(l, kEbz)], &g[lay.enc(l, kEbr)], &g[lay.enc(l, kEbh)]};
}

GateGrads decoder_grads(Gradients& g, const ModelSpec& spec, int l) {
  const Layout lay(spec);
  return {&g[lay.dec(l, kDWz)], &g[lay.dec(l, kDWr)], &g[lay.dec(l, kDWs)], &g[lay.dec(l, kDUz)],
          &g[lay.dec(l, kDUr)], &g[lay.dec(l, kDUs)], &g[lay.dec(l, kDCz)], &g[lay.dec(l, kDCr)],
          &g[lay.dec(l, kDCs)], &g[lay.dec(l, kDbz)], &g[lay.dec(l, kDbr)], &g[lay.dec(l, kDbs)]};
}

/// Backward through one cell step. dh_new in, returns the pre-activation
/// gradients and adds the recurrent contribution to dh_prev.
void gru_cell_backward(const GateWeights& w, const Mat& dh_new, const Eigen::Ref<const Mat>& h,
                       const Eigen::Ref<const Mat>& z, const Eigen::Ref<const Mat>& r,
                       const Eigen::Ref<const Mat>& g, Mat& daz, Mat& dar, Mat& dah, Mat& dh_prev) {
  const Mat dz = dh_new.cwiseProduct(g - h);
  const Mat dg = dh_new.cwiseProduct(z);
  dh_prev = dh_new - dh_new.cwiseProduct(z);
  dah = dg.cwiseProduct((1.0 - g.array().square()).matrix());
  Mat drh;
  drh.noalias() = w.uh->transpose() * dah;
  const Mat dr = drh.cwiseProduct(h);
  dh_prev += drh.cwiseProduct(r);
  daz = dz.cwiseProduct(z.cwiseProduct((1.0 - z.array()).matrix()));
  dar = dr.cwiseProduct(r.cwiseProduct((1.0 - r.array()).matrix()));
  dh_prev.noalias() += w.uz->transpose() * daz;
  dh_prev.noalias() += w.ur->transpose() * dar;
}

/// Weight gradients of a layer from the stacked pre-activation gradients.
void accumulate_layer_grads(const GateGrads& gg, const LayerTrace& tr, const Mat& daz, const Mat& dar,
                            const Mat& dah) {
  gg.wz->noalias() += daz * tr.x.transpose();
  gg.wr->noalias() += dar * tr.x.transpose();
  gg.wh->noalias() += dah * tr.x.transpose();
  gg.uz->noalias() += daz * tr.s_prev.transpose();
  gg.ur->noalias() += dar * tr.s_prev.transpose();
  gg.uh->noalias() += dah * tr.r.cwiseProduct(tr.s_prev).transpose();
  *gg.bz += daz.rowwise().sum();
  *gg.br += dar.rowwise().sum();
  *gg.bh += dah.rowwise().sum();
}

/// Backward through a full encoder layer; returns d(input) when wanted.
Mat encoder_layer_backward(const GateWeights& w, const GateGrads& gg, const LayerTrace& tr, const Mat& d_out,
                           int steps, int batch, bool want_dx) {
  const Eigen::Index h_dim = w.uz->rows();
  const Eigen::Index tb = static_cast<Eigen::Index>(steps) * batch;
  Mat daz_all(h_dim, tb), dar_all(h_dim, tb), dah_all(h_dim, tb);
  Mat dh = Mat::Zero(h_dim, batch);
  Mat daz, dar, dah, dh_prev;
  for (int t = steps - 1; t >= 0; --t) {
    const Eigen::Index c0 = static_cast<Eigen::Index>(t) * batch;
    const Mat dh_new = d_out.middleCols(c0, batch) + dh;
    gru_cell_backward(w, dh_new, tr.s_prev.middleCols(c0, batch), tr.z.middleCols(c0, batch),
                      tr.r.middleCols(c0, batch), tr.g.middleCols(c0, batch), daz, dar, dah, dh_prev);
    daz_all.middleCols(c0, batch) = daz;
    dar_all.middleCols(c0, batch) = dar;
    dah_all.middleCols(c0, batch) = dah;
    dh = dh_prev;
  }
  accumulate_layer_grads(gg, tr, daz_all, dar_all, dah_all);
  Mat dx;
  if (want_dx) {
    dx.noalias() = w.wz->transpose() * daz_all;
    dx.noalias() += w.wr->transpose() * dar_all;
    dx.noalias() += w.wh->transpose() * dah_all;
  }
  return dx;
}

/// Stacked encoder over a batch; returns the top layer's final hidden state.
Mat run_encoder(const ModelParams& p, const Mat& x, int steps, int batch, std::vector<LayerTrace>* traces) {
  std::vector<LayerTrace> local(static_cast<std::size_t>(p.spec.n_layers));
  auto& tr = traces != nullptr ? *traces : local;
  tr.resize(static_cast<std::size_t>(p.spec.n_layers));
  for (int l = 0; l < p.spec.n_layers; ++l) {
    const Mat& in = l == 0 ? x : tr[static_cast<std::size_t>(l - 1)].s_out;
    encoder_layer_forward(encoder_gates(p, l), in, steps, batch, tr[static_cast<std::size_t>(l)]);
  }
  const auto& top = tr.back().s_out;
  return top.middleCols(static_cast<Eigen::Index>(steps - 1) * batch, batch);
}

Mat stack_inputs(const ModelSpec& spec, std::span<const SampleSequence* const> batch) {
  const int steps = spec.tau_i + 1;
  const auto b = static_cast<Eigen::Index>(batch.size());
  Mat x(spec.input_dim(), steps * b);
  for (Eigen::Index k = 0; k < b; ++k) {
    const Mat xi = encoder_inputs(spec, *batch[static_cast<std::size_t>(k)]);
    for (int t = 0; t < steps; ++t) x.col(t * b + k) = xi.col(t);
  }
  return x;
}

/// Context-dependent gate terms C c + b, constant over decoder steps.
Drive context_drive(const GateWeights& w, const Mat& c) {
  Drive d;
  d.az.noalias() = *w.cz * c;
  d.ar.noalias() = *w.cr * c;
  d.ah.noalias() = *w.ch * c;
  d.az.colwise() += w.bz->col(0);
  d.ar.colwise() += w.br->col(0);
  d.ah.colwise() += w.bh->col(0);
  return d;
}

/// Embedding of the previous output. Classification: E column; regression:
/// E (x, y, 0) or E (0, 0, 1) for the start token.
struct PrevInput {
  std::vector<std::uint32_t> classes;
  Mat coords;  // 3 x B for regression
};

Mat embed(const ModelParams& p, const PrevInput& prev, Eigen::Index batch) {
  const Mat& e = p.tensors[Layout(p.spec).embed()];
  if (p.spec.head == Head::Classification) {
    Mat out(e.rows(), batch);
    for (Eigen::Index k = 0; k < batch; ++k) out.col(k) = e.col(prev.classes[static_cast<std::size_t>(k)]);
    return out;
  }
  return e * prev.coords;
}

/// Single decoder step for a batch, optionally recording traces at step t.
struct DecoderTraces {
  std::vector<LayerTrace> layers;
  Mat q;         // embed x TB
  Mat prev_cols; // 3 x TB (regression inputs)
  std::vector<std::uint32_t> prev_classes;
  Mat d_out;     // output_dim x TB loss gradient wrt logits / outputs
};

struct DecoderContext {
  std::vector<Drive> ctx;  // per layer
  Mat uc_c;                // Uc_out c
};

DecoderContext prepare_context(const ModelParams& p, const Mat& c) {
  DecoderContext dc;
  for (int l = 0; l < p.spec.n_layers; ++l) dc.ctx.push_back(context_drive(decoder_gates(p, l), c));
  dc.uc_c.noalias() = p.tensors[Layout(p.spec).uc_out()] * c;
  return dc;
}

/// Advances all decoder layers one step; returns the output-layer values
/// (logits or regression outputs) and the embedding-space vector q.
Mat decoder_step(const ModelParams& p, const DecoderContext& dc, const Mat& e, std::vector<Mat>& states,
                 Mat* q_out, DecoderTraces* tr, int t) {
  const Layout lay(p.spec);
  const Eigen::Index b = e.cols();
  Mat x = e;
  Mat z, r, g, hn;
  for (int l = 0; l < p.spec.n_layers; ++l) {
    const GateWeights w = decoder_gates(p, l);
    const auto& cd = dc.ctx[static_cast<std::size_t>(l)];
    Mat az = cd.az;
    az.noalias() += *w.wz * x;
    Mat ar = cd.ar;
    ar.noalias() += *w.wr * x;
    Mat ah = cd.ah;
    ah.noalias() += *w.wh * x;
    Mat& s = states[static_cast<std::size_t>(l)];
    gru_cell(w, az, ar, ah, s, z, r, g, hn);
    if (tr != nullptr) {
      auto& lt = tr->layers[static_cast<std::size_t>(l)];
      const Eigen::Index c0 = static_cast<Eigen::Index>(t) * b;
      lt.x.middleCols(c0, b) = x;
      lt.s_prev.middleCols(c0, b) = s;
      lt.z.middleCols(c0, b) = z;
      lt.r.middleCols(c0, b) = r;
      lt.g.middleCols(c0, b) = g;
      lt.s_out.middleCols(c0, b) = hn;
    }
    s = hn;
    x = hn;
  }
  Mat q = e + dc.uc_c;
  q.noalias() += p.tensors[lay.us_out()] * states.back();
  Mat out = p.tensors[lay.uo()] * q;
  out.colwise() += p.tensors[lay.bo()].col(0);
  if (q_out != nullptr) *q_out = std::move(q);
  return out;
}

std::uint32_t argmax(const Eigen::Ref<const Vec>& v) {
  Eigen::Index k = 0;
  v.maxCoeff(&k);
  return static_cast<std::uint32_t>(k);
}

void check_sample(const ModelSpec& spec, const SampleSequence& s, bool need_labels) {
  const auto cells = static_cast<std::size_t>(spec.grid.n_classes());
  if (s.windows.size() != static_cast<std::size_t>(spec.tau_i + 1) ||
      s.ref_window.size() != static_cast<std::size_t>(spec.tau_i + spec.tau_o + 1)) {
    throw Error(ErrorCode::ShapeError, "sample horizons do not match the model spec");
  }
  for (const auto& w : s.windows) {
    if (w.size() != cells) throw Error(ErrorCode::ShapeError, "window size does not match the model grid");
  }
  if (need_labels) {
    const bool ok = spec.head == Head::Classification ? s.labels.size() == static_cast<std::size_t>(spec.tau_o)
                                                      : s.future.size() == static_cast<std::size_t>(spec.tau_o);
    if (!ok) throw Error(ErrorCode::ShapeError, "sample targets do not match tau_o");
  }
}

void require_head(const ModelSpec& spec, Head head) {
  if (spec.head != head) throw Error(ErrorCode::HeadMismatch, "operation does not match the model head");
}

}  // namespace

void ModelSpec::validate() const {
  if (grid.width < 1 || grid.height < 1 || !(grid.resolution > 0.0) || hidden_dim < 1 || n_layers < 1 ||
      embed_dim < 1 || tau_i < 0 || tau_o < 1) {
    throw Error(ErrorCode::InvalidSpec, "model dimensions must be positive");
  }
}

std::size_t tensor_count(const ModelSpec& spec) { return Layout(spec).count(); }

std::string tensor_name(const ModelSpec& spec, std::size_t index) {
  static const char* enc_names[] = {"Wz", "Wr", "Wh", "Uz", "Ur", "Uh", "bz", "br", "bh"};
  static const char* dec_names[] = {"Wz", "Wr", "Ws", "Uz", "Ur", "Us", "Cz", "Cr", "Cs", "bz", "br", "bs"};
  const Layout lay(spec);
  if (index < lay.layers * kEncSlots) {
    return "enc" + std::to_string(index / kEncSlots) + "." + enc_names[index % kEncSlots];
  }
  if (index < lay.embed()) {
    const std::size_t k = index - lay.layers * kEncSlots;
    return "dec" + std::to_string(k / kDecSlots) + "." + dec_names[k % kDecSlots];
  }
  static const char* tail[] = {"E", "Us_out", "Uc_out", "Uo", "bo"};
  if (index < lay.count()) return tail[index - lay.embed()];
  throw Error(ErrorCode::InvalidArgument, "tensor index out of range");
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += static_cast<std::size_t>(t.size());
  return n;
}

bool operator==(const ModelParams& a, const ModelParams& b) {
  if (!(a.spec == b.spec) || a.tensors.size() != b.tensors.size()) return false;
  for (std::size_t i = 0; i < a.tensors.size(); ++i) {
    if (a.tensors[i].rows() != b.tensors[i].rows() || a.tensors[i].cols() != b.tensors[i].cols() ||
        a.tensors[i] != b.tensors[i]) {
      return false;
    }
  }
  return true;
}

bool operator==(const AdamState& a, const AdamState& b) {
  if (a.step != b.step || a.m.size() != b.m.size() || a.v.size() != b.v.size()) return false;
  for (std::size_t i = 0; i < a.m.size(); ++i) {
    if (a.m[i] != b.m[i] || a.v[i] != b.v[i]) return false;
  }
  return true;
}

ModelParams zero_params(const ModelSpec& spec) {
  spec.validate();
  ModelParams p;
  p.spec = spec;
  for (const auto& [r, c] : tensor_shapes(spec)) p.tensors.push_back(Mat::Zero(r, c));
  return p;
}

ModelParams init_params(const ModelSpec& spec, std::uint64_t seed) {
  ModelParams p = zero_params(spec);
  const Layout lay(spec);
  const auto shapes = tensor_shapes(spec);
  Rng rng(seed);
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    if (is_bias(shapes[i], i, lay)) continue;
    Mat& t = p.tensors[i];
    const double bound = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
    for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = rng.uniform(-bound, bound);
  }
  return p;
}

Tensor encoder_inputs(const ModelSpec& spec, const SampleSequence& sample) {
  check_sample(spec, sample, false);
  const int steps = spec.tau_i + 1;
  const int cells = spec.grid.n_classes();
  Mat x = Mat::Zero(spec.input_dim(), steps);
  for (int t = 0; t < steps; ++t) {
    const auto& w = sample.windows[static_cast<std::size_t>(t)];
    for (int k = 0; k < cells; ++k) x(k, t) = static_cast<double>(w[static_cast<std::size_t>(k)]);
    const Vec2 ref = sample.ref_window[static_cast<std::size_t>(t)];
    x(cells, t) = ref.x;
    x(cells + 1, t) = ref.y;
  }
  for (int k = 0; k < spec.tau_o; ++k) {
    const Vec2 ref = sample.ref_window[static_cast<std::size_t>(spec.tau_i + 1 + k)];
    x(cells + 2 + 2 * k, steps - 1) = ref.x;
    x(cells + 3 + 2 * k, steps - 1) = ref.y;
  }
  return x;
}

Encoding encode(const ModelParams& params, const Tensor& inputs) {
  if (inputs.rows() != params.spec.input_dim() || inputs.cols() < 1) {
    throw Error(ErrorCode::ShapeError, "encoder input has " + std::to_string(inputs.rows()) + " rows, expected " +
                                           std::to_string(params.spec.input_dim()));
  }
  std::vector<LayerTrace> traces;
  const int steps = static_cast<int>(inputs.cols());
  Encoding enc;
  enc.context = run_encoder(params, inputs, steps, 1, &traces).col(0);
  for (int t = 0; t < steps; ++t) enc.hidden.push_back(traces.back().s_out.col(t));
  return enc;
}

DecoderState initial_decoder_state(const ModelSpec& spec) {
  return DecoderState(static_cast<std::size_t>(spec.n_layers), Vec::Zero(spec.hidden_dim));
}

StepOutput decode_step(const ModelParams& params, std::uint32_t y_prev, const DecoderState& s_prev,
                       const Eigen::VectorXd& context) {
  require_head(params.spec, Head::Classification);
  if (y_prev > start_token(params.spec)) {
    throw Error(ErrorCode::InvalidClass, "previous class " + std::to_string(y_prev) + " out of range");
  }
  if (s_prev.size() != static_cast<std::size_t>(params.spec.n_layers) ||
      context.size() != params.spec.hidden_dim) {
    throw Error(ErrorCode::ShapeError, "decoder state does not match the model spec");
  }
  const DecoderContext dc = prepare_context(params, context);
  std::vector<Mat> states(s_prev.begin(), s_prev.end());
  PrevInput prev;
  prev.classes = {y_prev};
  Mat logits = decoder_step(params, dc, embed(params, prev, 1), states, nullptr, nullptr, 0);
  softmax_columns(logits);
  StepOutput out;
  out.probabilities = logits.col(0);
  for (const auto& s : states) out.state.push_back(s.col(0));
  return out;
}

PredictionResult forward(const ModelParams& params, const SampleSequence& sample, bool teacher_forcing) {
  require_head(params.spec, Head::Classification);
  check_sample(params.spec, sample, teacher_forcing);
  const ModelSpec& spec = params.spec;
  const Encoding enc = encode(params, encoder_inputs(spec, sample));
  PredictionResult res;
  DecoderState s = initial_decoder_state(spec);
  std::uint32_t prev = start_token(spec);
  for (int t = 0; t < spec.tau_o; ++t) {
    StepOutput step = decode_step(params, prev, s, enc.context);
    const std::uint32_t cls = argmax(step.probabilities);
    res.classes.push_back(cls);
    res.log_probability += std::log(std::max(step.probabilities(cls), kProbabilityFloor));
    res.distributions.push_back(std::move(step.probabilities));
    s = std::move(step.state);
    prev = teacher_forcing ? sample.labels[static_cast<std::size_t>(t)] : cls;
  }
  for (auto c : res.classes) {
    res.points.push_back(position_of_cell(c, sample.anchor, spec.grid));
    res.ego_points.push_back(to_ego(sample.anchor, res.points.back()));
  }
  return res;
}

std::vector<Vec2> forward_regression(const ModelParams& params, const SampleSequence& sample, bool teacher_forcing) {
  require_head(params.spec, Head::Regression);
  check_sample(params.spec, sample, teacher_forcing);
  const ModelSpec& spec = params.spec;
  const Encoding enc = encode(params, encoder_inputs(spec, sample));
  const DecoderContext dc = prepare_context(params, enc.context);
  std::vector<Mat> states(static_cast<std::size_t>(spec.n_layers), Mat::Zero(spec.hidden_dim, 1));
  PrevInput prev;
  prev.coords = Mat::Zero(3, 1);
  prev.coords(2, 0) = 1.0;
  std::vector<Vec2> out;
  for (int t = 0; t < spec.tau_o; ++t) {
    const Mat y = decoder_step(params, dc, embed(params, prev, 1), states, nullptr, nullptr, t);
    out.push_back({y(0, 0), y(1, 0)});
    const Vec2 fed = teacher_forcing ? sample.future[static_cast<std::size_t>(t)] : out.back();
    prev.coords << fed.x, fed.y, 0.0;
  }
  return out;
}

double nll_loss(const PredictionResult& result, std::span<const std::uint32_t> labels) {
  if (labels.size() != result.distributions.size() || labels.empty()) {
    throw Error(ErrorCode::ShapeError, "label count does not match the prediction");
  }
  double sum = 0.0;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    const auto& d = result.distributions[t];
    if (labels[t] >= static_cast<std::uint32_t>(d.size())) throw Error(ErrorCode::InvalidClass, "label out of range");
    sum += -std::log(std::max(d(labels[t]), kProbabilityFloor));
  }
  return sum / static_cast<double>(labels.size());
}

double mse_loss(std::span<const Vec2> predicted, std::span<const Vec2> target) {
  if (predicted.size() != target.size() || predicted.empty()) {
    throw Error(ErrorCode::ShapeError, "prediction and target lengths differ");
  }
  double sum = 0.0;
  for (std::size_t t = 0; t < predicted.size(); ++t) {
    const Vec2 d = predicted[t] - target[t];
    sum += dot(d, d);
  }
  return sum / static_cast<double>(predicted.size());
}

double loss_and_gradients(const ModelParams& params, std::span<const SampleSequence* const> batch,
                          bool teacher_forcing, Gradients* grads) {
  if (batch.empty()) throw Error(ErrorCode::EmptyDataset, "empty batch");
  const ModelSpec& spec = params.spec;
  const Layout lay(spec);
  for (const auto* s : batch) check_sample(spec, *s, true);
  const int t_in = spec.tau_i + 1;
  const int t_out = spec.tau_o;
  const int b = static_cast<int>(batch.size());
  const Eigen::Index tb_out = static_cast<Eigen::Index>(t_out) * b;
  const bool classify = spec.head == Head::Classification;
  const double scale = 1.0 / (static_cast<double>(b) * t_out);
  const bool want = grads != nullptr;

  std::vector<LayerTrace> enc_traces;
  const Mat x = stack_inputs(spec, batch);
  const Mat c = run_encoder(params, x, t_in, b, want ? &enc_traces : nullptr);
  const DecoderContext dc = prepare_context(params, c);

  DecoderTraces tr;
  if (want) {
    tr.layers.resize(static_cast<std::size_t>(spec.n_layers));
    for (int l = 0; l < spec.n_layers; ++l) {
      auto& lt = tr.layers[static_cast<std::size_t>(l)];
      const Eigen::Index in = l == 0 ? spec.embed_dim : spec.hidden_dim;
      lt.x.resize(in, tb_out);
      for (Mat* m : {&lt.s_prev, &lt.z, &lt.r, &lt.g, &lt.s_out}) m->resize(spec.hidden_dim, tb_out);
    }
    tr.q.resize(spec.embed_dim, tb_out);
    tr.d_out.resize(spec.output_dim(), tb_out);
    if (classify) tr.prev_classes.resize(static_cast<std::size_t>(tb_out));
    else tr.prev_cols.resize(3, tb_out);
  }

  std::vector<Mat> states(static_cast<std::size_t>(spec.n_layers), Mat::Zero(spec.hidden_dim, b));
  PrevInput prev;
  if (classify) {
    prev.classes.assign(static_cast<std::size_t>(b), start_token(spec));
  } else {
    prev.coords = Mat::Zero(3, b);
    prev.coords.row(2).setOnes();
  }
  double loss = 0.0;
  Mat q;
  for (int t = 0; t < t_out; ++t) {
    const Eigen::Index c0 = static_cast<Eigen::Index>(t) * b;
    if (want) {
      if (classify) std::copy(prev.classes.begin(), prev.classes.end(), tr.prev_classes.begin() + c0);
      else tr.prev_cols.middleCols(c0, b) = prev.coords;
    }
    Mat out = decoder_step(params, dc, embed(params, prev, b), states, &q, want ? &tr : nullptr, t);
    if (want) tr.q.middleCols(c0, b) = q;
    if (classify) {
      Mat p = out;
      softmax_columns(p);
      for (int k = 0; k < b; ++k) {
        const std::uint32_t y = batch[static_cast<std::size_t>(k)]->labels[static_cast<std::size_t>(t)];
        const double py = p(y, k);
        loss += -std::log(std::max(py, kProbabilityFloor));
        if (want) {
          auto col = tr.d_out.col(c0 + k);
          if (py >= kProbabilityFloor) {
            col = p.col(k) * scale;
            col(y) -= scale;
          } else {
            col.setZero();
          }
        }
        prev.classes[static_cast<std::size_t>(k)] = teacher_forcing ? y : argmax(p.col(k));
      }
    } else {
      for (int k = 0; k < b; ++k) {
        const Vec2 target = batch[static_cast<std::size_t>(k)]->future[static_cast<std::size_t>(t)];
        const double ex = out(0, k) - target.x;
        const double ey = out(1, k) - target.y;
        loss += ex * ex + ey * ey;
        if (want) {
          tr.d_out(0, c0 + k) = 2.0 * ex * scale;
          tr.d_out(1, c0 + k) = 2.0 * ey * scale;
        }
        const Vec2 fed = teacher_forcing ? target : Vec2{out(0, k), out(1, k)};
        prev.coords(0, k) = fed.x;
        prev.coords(1, k) = fed.y;
        prev.coords(2, k) = 0.0;
      }
    }
  }
  loss *= scale;
  if (!want) return loss;

  Gradients& g = *grads;
  g.resize(params.tensors.size());
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    g[i] = Mat::Zero(params.tensors[i].rows(), params.tensors[i].cols());
  }

  // Output layer: out = Uo q + bo, q = e + Us_out s_top + Uc_out c.
  // A free-running regression decoder feeds out(t) into the embedding at t + 1.
  const bool feed_back = !classify && !teacher_forcing;
  const Mat& uo = params.tensors[lay.uo()];
  const Mat& us_out = params.tensors[lay.us_out()];
  const int top = spec.n_layers - 1;
  Mat dq(spec.embed_dim, tb_out);
  Mat dq_sum = Mat::Zero(spec.embed_dim, b);

  // Decoder layers, backward in time; the layer below receives dx at the same step.
  const auto n_layers = static_cast<std::size_t>(spec.n_layers);
  std::vector<Mat> carry(n_layers, Mat::Zero(spec.hidden_dim, b));
  std::vector<Mat> daz_all(n_layers, Mat(spec.hidden_dim, tb_out));
  std::vector<Mat> dar_all(n_layers, Mat(spec.hidden_dim, tb_out));
  std::vector<Mat> dah_all(n_layers, Mat(spec.hidden_dim, tb_out));
  Mat de(spec.embed_dim, tb_out);
  Mat daz, dar, dah, dh_prev, dx;
  for (int t = t_out - 1; t >= 0; --t) {
    const Eigen::Index c0 = static_cast<Eigen::Index>(t) * b;
    if (feed_back && t + 1 < t_out) {
      tr.d_out.middleCols(c0, b).noalias() +=
          params.tensors[lay.embed()].leftCols(2).transpose() * de.middleCols(c0 + b, b);
    }
    dq.middleCols(c0, b).noalias() = uo.transpose() * tr.d_out.middleCols(c0, b);
    dq_sum += dq.middleCols(c0, b);
    Mat from_above = us_out.transpose() * dq.middleCols(c0, b);
    for (int l = top; l >= 0; --l) {
      const auto li = static_cast<std::size_t>(l);
      const GateWeights w = decoder_gates(params, l);
      const LayerTrace& lt = tr.layers[li];
      const Mat dh_new = from_above + carry[li];
      gru_cell_backward(w, dh_new, lt.s_prev.middleCols(c0, b), lt.z.middleCols(c0, b), lt.r.middleCols(c0, b),
                        lt.g.middleCols(c0, b), daz, dar, dah, dh_prev);
      carry[li] = dh_prev;
      daz_all[li].middleCols(c0, b) = daz;
      dar_all[li].middleCols(c0, b) = dar;
      dah_all[li].middleCols(c0, b) = dah;
      dx.noalias() = w.wz->transpose() * daz;
      dx.noalias() += w.wr->transpose() * dar;
      dx.noalias() += w.wh->transpose() * dah;
      from_above = dx;
    }
    de.middleCols(c0, b) = from_above + dq.middleCols(c0, b);
  }
  g[lay.uo()].noalias() += tr.d_out * tr.q.transpose();
  g[lay.bo()] += tr.d_out.rowwise().sum();
  g[lay.us_out()].noalias() += dq * tr.layers[static_cast<std::size_t>(top)].s_out.transpose();
  g[lay.uc_out()].noalias() += dq_sum * c.transpose();
  Mat dc_total;
  dc_total.noalias() = params.tensors[lay.uc_out()].transpose() * dq_sum;
  for (int l = 0; l < spec.n_layers; ++l) {
    const auto li = static_cast<std::size_t>(l);
    const GateWeights w = decoder_gates(params, l);
    const GateGrads gg = decoder_grads(g, spec, l);
    accumulate_layer_grads(gg, tr.layers[li], daz_all[li], dar_all[li], dah_all[li]);
    Mat dz_sum = Mat::Zero(spec.hidden_dim, b), dr_sum = dz_sum, dh_sum = dz_sum;
    for (int t = 0; t < t_out; ++t) {
      const Eigen::Index c0 = static_cast<Eigen::Index>(t) * b;
      dz_sum += daz_all[li].middleCols(c0, b);
      dr_sum += dar_all[li].middleCols(c0, b);
      dh_sum += dah_all[li].middleCols(c0, b);
    }
    gg.cz->noalias() += dz_sum * c.transpose();
    gg.cr->noalias() += dr_sum * c.transpose();
    gg.ch->noalias() += dh_sum * c.transpose();
    dc_total.noalias() += w.cz->transpose() * dz_sum;
    dc_total.noalias() += w.cr->transpose() * dr_sum;
    dc_total.noalias() += w.ch->transpose() * dh_sum;
  }
  Mat& g_e = g[lay.embed()];
  if (classify) {
    for (Eigen::Index k = 0; k < tb_out; ++k) g_e.col(tr.prev_classes[static_cast<std::size_t>(k)]) += de.col(k);
  } else {
    g_e.noalias() += de * tr.prev_cols.transpose();
  }

  // Encoder: only the top layer's last step feeds the context.
  Mat d_top = Mat::Zero(spec.hidden_dim, static_cast<Eigen::Index>(t_in) * b);
  d_top.middleCols(static_cast<Eigen::Index>(t_in - 1) * b, b) = dc_total;
  for (int l = top; l >= 0; --l) {
    const auto li = static_cast<std::size_t>(l);
    d_top = encoder_layer_backward(encoder_gates(params, l), encoder_grads(g, spec, l), enc_traces[li], d_top, t_in,
                                   b, l > 0);
  }
  return loss;
}

AdamState adam_init(const ModelParams& params) {
  AdamState s;
  for (const auto& t : params.tensors) {
    s.m.push_back(Mat::Zero(t.rows(), t.cols()));
    s.v.push_back(Mat::Zero(t.rows(), t.cols()));
  }
  return s;
}

void adam_step(ModelParams& params, const Gradients& grads, AdamState& state, const AdamConfig& cfg) {
  if (grads.size() != params.tensors.size() || state.m.size() != params.tensors.size()) {
    throw Error(ErrorCode::ShapeError, "gradient and parameter lists differ");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].rows() != params.tensors[i].rows() || grads[i].cols() != params.tensors[i].cols()) {
      throw Error(ErrorCode::ShapeError, "gradient shape mismatch for " + tensor_name(params.spec, i));
    }
    auto m = state.m[i].array();
    auto v = state.v[i].array();
    const auto gr = grads[i].array();
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * gr;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * gr.square();
    params.tensors[i].array() -= cfg.learning_rate * (m / c1) / ((v / c2).sqrt() + cfg.epsilon);
  }
}

double evaluate_loss(const ModelParams& params, std::span<const SampleSequence* const> samples,
                     bool teacher_forcing) {
  if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
  constexpr std::size_t kChunk = 64;
  double sum = 0.0;
  for (std::size_t i = 0; i < samples.size(); i += kChunk) {
    const auto n = std::min(kChunk, samples.size() - i);
    sum += loss_and_gradients(params, samples.subspan(i, n), teacher_forcing, nullptr) * static_cast<double>(n);
  }
  return sum / static_cast<double>(samples.size());
}

TrainResult train(const Dataset& data, const ModelSpec& spec, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  spec.validate();
  if (!(spec.grid == data.spec) || spec.tau_i != data.tau_i || spec.tau_o != data.tau_o) {
    throw Error(ErrorCode::ConfigError, "model spec does not match the dataset grid or horizons");
  }
  if (!(config.adam.learning_rate > 0.0) || config.epochs < 1 || config.batch_size < 1) {
    throw Error(ErrorCode::ConfigError, "learning rate, epochs and batch size must be positive");
  }
  const auto train_set = data.subset(Split::Train);
  const auto val_set = data.subset(Split::Validation);
  if (train_set.empty()) throw Error(ErrorCode::EmptyDataset, "training split is empty");

  TrainResult result;
  ModelParams params = init_params(spec, derive_seed(config.seed, "init"));
  AdamState adam = adam_init(params);
  Rng rng(derive_seed(config.seed, "shuffle"));
  std::vector<const SampleSequence*> order = train_set;
  Gradients grads;
  double best = std::numeric_limits<double>::infinity();
  result.params = params;
  const auto bs = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    for (std::size_t i = 0; i < order.size(); i += bs) {
      const auto n = std::min(bs, order.size() - i);
      (void)loss_and_gradients(params, std::span<const SampleSequence* const>(order).subspan(i, n),
                               config.teacher_forcing, &grads);
      adam_step(params, grads, adam, config.adam);
    }
    CurvePoint cp;
    cp.epoch = epoch;
    cp.train_loss = evaluate_loss(params, train_set, config.teacher_forcing);
    cp.val_loss = evaluate_loss(params, val_set, config.teacher_forcing);
    const double score = val_set.empty() ? cp.train_loss : cp.val_loss;
    if (score < best) {
      best = score;
      result.params = params;
      result.best_epoch = epoch;
    }
    result.curve.push_back(cp);
    if (on_epoch) on_epoch(cp);
    if (config.target_train_loss > 0.0 && cp.train_loss < config.target_train_loss) break;
  }
  result.optimizer = std::move(adam);
  return result;
}

std::string curve_to_csv(const std::vector<CurvePoint>& curve) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,train_nll,val_nll\n";
  for (const auto& c : curve) out << c.epoch << ',' << c.train_loss << ',' << c.val_loss << '\n';
  return out.str();
}

namespace {

struct Hypothesis {
  double log_p = 0.0;
  std::vector<std::uint32_t> seq;
  std::vector<Vec> dists;
  DecoderState state;
};

Hypothesis beam_search(const ModelParams& params, const Vec& context, int width) {
  const ModelSpec& spec = params.spec;
  std::vector<Hypothesis> beams(1);
  beams[0].state = initial_decoder_state(spec);
  struct Candidate {
    double log_p;
    std::size_t beam;
    std::uint32_t cls;
  };
  for (int t = 0; t < spec.tau_o; ++t) {
    std::vector<StepOutput> outs;
    std::vector<Candidate> cand;
    for (std::size_t bi = 0; bi < beams.size(); ++bi) {
      const std::uint32_t prev = beams[bi].seq.empty() ? start_token(spec) : beams[bi].seq.back();
      outs.push_back(decode_step(params, prev, beams[bi].state, context));
      const Vec& p = outs.back().probabilities;
      for (Eigen::Index k = 0; k < p.size(); ++k) {
        cand.push_back({beams[bi].log_p + std::log(std::max(p(k), kProbabilityFloor)), bi,
                        static_cast<std::uint32_t>(k)});
      }
    }
    const auto keep = std::min(cand.size(), static_cast<std::size_t>(width));
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keep), cand.end(),
                      [](const Candidate& a, const Candidate& b) {
                        if (a.log_p != b.log_p) return a.log_p > b.log_p;
                        if (a.beam != b.beam) return a.beam < b.beam;
                        return a.cls < b.cls;
                      });
    std::vector<Hypothesis> next;
    for (std::size_t k = 0; k < keep; ++k) {
      const auto& c = cand[k];
      Hypothesis h;
      h.log_p = c.log_p;
      h.seq = beams[c.beam].seq;
      h.seq.push_back(c.cls);
      h.dists = beams[c.beam].dists;
      h.dists.push_back(outs[c.beam].probabilities);
      h.state = outs[c.beam].state;
      next.push_back(std::move(h));
    }
    beams = std::move(next);
  }
  return beams.front();
}

}  // namespace

PredictionResult predict(const ModelParams& params, const SampleSequence& sample, const DecodeOptions& options) {
  if (options.beam_width < 1) throw Error(ErrorCode::InvalidArgument, "beam width must be >= 1");
  if (params.spec.head == Head::Regression) {
    PredictionResult res;
    res.ego_points = forward_regression(params, sample, false);
    for (const auto& p : res.ego_points) res.points.push_back(to_global(sample.anchor, p));
    return res;
  }
  if (options.beam_width == 1) return forward(params, sample, false);
  check_sample(params.spec, sample, false);
  const Encoding enc = encode(params, encoder_inputs(params.spec, sample));
  Hypothesis best;
  best.log_p = -std::numeric_limits<double>::infinity();
  for (int w = 1; w <= options.beam_width; ++w) {
    Hypothesis h = beam_search(params, enc.context, w);
    if (h.log_p > best.log_p) best = std::move(h);
  }
  PredictionResult res;
  res.classes = best.seq;
  res.distributions = std::move(best.dists);
  res.log_probability = best.log_p;
  for (auto c : res.classes) {
    res.points.push_back(position_of_cell(c, sample.anchor, params.spec.grid));
    res.ego_points.push_back(to_ego(sample.anchor, res.points.back()));
  }
  return res;
}

std::vector<std::uint8_t> serialize_checkpoint(const ModelParams& params, const AdamState* optimizer) {
  const ModelSpec& s = params.spec;
  detail::ByteWriter w;
  w.magic("OPM1");
  w.put<std::uint8_t>(kCheckpointVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(s.head));
  w.put<std::uint8_t>(optimizer != nullptr ? 1 : 0);
  w.put<std::int32_t>(s.grid.width);
  w.put<std::int32_t>(s.grid.height);
  w.put<double>(s.grid.resolution);
  w.put<std::int32_t>(s.hidden_dim);
  w.put<std::int32_t>(s.n_layers);
  w.put<std::int32_t>(s.embed_dim);
  w.put<std::int32_t>(s.tau_i);
  w.put<std::int32_t>(s.tau_o);
  const auto shapes = tensor_shapes(s);
  if (params.tensors.size() != shapes.size()) throw Error(ErrorCode::ShapeError, "tensor count mismatch");
  auto put_tensors = [&](const std::vector<Mat>& ts) {
    for (std::size_t i = 0; i < ts.size(); ++i) {
      if (ts[i].rows() != shapes[i].first || ts[i].cols() != shapes[i].second) {
        throw Error(ErrorCode::ShapeError, "tensor " + tensor_name(s, i) + " has the wrong shape");
      }
      w.put_span(std::span<const double>(ts[i].data(), static_cast<std::size_t>(ts[i].size())));
    }
  };
  put_tensors(params.tensors);
  if (optimizer != nullptr) {
    w.put<std::uint64_t>(optimizer->step);
    put_tensors(optimizer->m);
    put_tensors(optimizer->v);
  }
  return w.take();
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "checkpoint");
  r.expect_magic("OPM1");
  const auto version = r.get<std::uint8_t>();
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::FormatError, "checkpoint version " + std::to_string(version) + " is not supported");
  }
  const auto head = r.get<std::uint8_t>();
  const auto has_opt = r.get<std::uint8_t>();
  if (head > 1 || has_opt > 1) throw Error(ErrorCode::FormatError, "checkpoint header flags out of range");
  ModelSpec s;
  s.head = static_cast<Head>(head);
  s.grid.width = r.get<std::int32_t>();
  s.grid.height = r.get<std::int32_t>();
  s.grid.resolution = r.get<double>();
  s.hidden_dim = r.get<std::int32_t>();
  s.n_layers = r.get<std::int32_t>();
  s.embed_dim = r.get<std::int32_t>();
  s.tau_i = r.get<std::int32_t>();
  s.tau_o = r.get<std::int32_t>();
  try {
    s.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::FormatError, std::string("checkpoint spec: ") + e.what());
  }
  const auto shapes = tensor_shapes(s);
  std::size_t total = 0;
  for (const auto& [rows, cols] : shapes) total += static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  if (total > bytes.size() / sizeof(double)) throw Error(ErrorCode::FormatError, "checkpoint: truncated stream");
  auto get_tensors = [&](std::vector<Mat>& ts) {
    ts.clear();
    for (const auto& [rows, cols] : shapes) {
      Mat m(rows, cols);
      r.get_span(std::span<double>(m.data(), static_cast<std::size_t>(m.size())));
      ts.push_back(std::move(m));
    }
  };
  Checkpoint ck;
  ck.params.spec = s;
  get_tensors(ck.params.tensors);
  ck.has_optimizer = has_opt == 1;
  if (ck.has_optimizer) {
    ck.optimizer.step = r.get<std::uint64_t>();
    get_tensors(ck.optimizer.m);
    get_tensors(ck.optimizer.v);
  }
  r.expect_end();
  return ck;
}

void save_checkpoint(const std::string& path, const ModelParams& params, const AdamState* optimizer) {
  detail::write_file(path, serialize_checkpoint(params, optimizer));
}

Checkpoint load_checkpoint(const std::string& path) { return deserialize_checkpoint(detail::read_file(path)); }

}  // namespace octopath
