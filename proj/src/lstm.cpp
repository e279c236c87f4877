#include <cmath>

#include "kurel/bilstm.hpp"

namespace kurel::bilstm {

namespace {

VectorXd sigmoid(const VectorXd& z) {
  return z.unaryExpr([](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); });
}

}  // namespace

LstmParams LstmParams::zeros(int input_dim, int hidden) {
  LstmParams p;
  for (MatrixXd* w : {&p.w_ix, &p.w_fx, &p.w_ox, &p.w_cx}) *w = MatrixXd::Zero(hidden, input_dim + hidden);
  for (MatrixXd* w : {&p.w_ic, &p.w_fc, &p.w_oc}) *w = MatrixXd::Zero(hidden, hidden);
  for (VectorXd* b : {&p.b_i, &p.b_f, &p.b_o, &p.b_c}) *b = VectorXd::Zero(hidden);
  return p;
}

LstmState lstm_step(const LstmParams& p, const VectorXd& x, const LstmState& prev, StepCache* cache) {
  const int d = p.input_dim();
  const int h = p.hidden();
  if (x.size() != d || prev.h.size() != h || prev.c.size() != h) throw Error("lstm_step: shape mismatch");
  if (!x.allFinite() || !prev.h.allFinite() || !prev.c.allFinite()) throw Error("lstm_step: non-finite input");
  VectorXd xc(d + h);
  xc << x, prev.h;
  VectorXd i = sigmoid(p.w_ix * xc + p.w_ic * prev.c + p.b_i);
  VectorXd f = sigmoid(p.w_fx * xc + p.w_fc * prev.c + p.b_f);
  VectorXd o = sigmoid(p.w_ox * xc + p.w_oc * prev.c + p.b_o);
  VectorXd g = (p.w_cx * xc + p.b_c).array().tanh().matrix();
  VectorXd c = f.cwiseProduct(prev.c) + i.cwiseProduct(g);
  VectorXd tc = c.array().tanh().matrix();
  LstmState next{o.cwiseProduct(tc), c};
  if (cache) {
    cache->x_concat = std::move(xc);
    cache->c_prev = prev.c;
    cache->i = std::move(i);
    cache->f = std::move(f);
    cache->o = std::move(o);
    cache->g = std::move(g);
    cache->c = std::move(c);
    cache->tanh_c = std::move(tc);
  }
  return next;
}

void lstm_step_backward(const LstmParams& p, const StepCache& k, const VectorXd& dh, const VectorXd& dc, LstmParams& grad,
                        VectorXd& dx, VectorXd& dh_prev, VectorXd& dc_prev) {
  const int d = p.input_dim();
  const int h = p.hidden();
  const VectorXd d_o = dh.cwiseProduct(k.tanh_c);
  const VectorXd dc_total = dc + dh.cwiseProduct(k.o).cwiseProduct((1.0 - k.tanh_c.array().square()).matrix());
  const VectorXd d_f = dc_total.cwiseProduct(k.c_prev);
  const VectorXd d_i = dc_total.cwiseProduct(k.g);
  const VectorXd d_g = dc_total.cwiseProduct(k.i);

  // Gradients w.r.t. gate pre-activations.
  const VectorXd z_i = d_i.cwiseProduct(k.i.cwiseProduct((1.0 - k.i.array()).matrix()));
  const VectorXd z_f = d_f.cwiseProduct(k.f.cwiseProduct((1.0 - k.f.array()).matrix()));
  const VectorXd z_o = d_o.cwiseProduct(k.o.cwiseProduct((1.0 - k.o.array()).matrix()));
  const VectorXd z_g = d_g.cwiseProduct((1.0 - k.g.array().square()).matrix());

  grad.w_ix.noalias() += z_i * k.x_concat.transpose();
  grad.w_fx.noalias() += z_f * k.x_concat.transpose();
  grad.w_ox.noalias() += z_o * k.x_concat.transpose();
  grad.w_cx.noalias() += z_g * k.x_concat.transpose();
  grad.w_ic.noalias() += z_i * k.c_prev.transpose();
  grad.w_fc.noalias() += z_f * k.c_prev.transpose();
  grad.w_oc.noalias() += z_o * k.c_prev.transpose();
  grad.b_i += z_i;
  grad.b_f += z_f;
  grad.b_o += z_o;
  grad.b_c += z_g;

  VectorXd dxc = p.w_ix.transpose() * z_i;
  dxc.noalias() += p.w_fx.transpose() * z_f;
  dxc.noalias() += p.w_ox.transpose() * z_o;
  dxc.noalias() += p.w_cx.transpose() * z_g;
  dx = dxc.head(d);
  dh_prev = dxc.tail(h);
  dc_prev = dc_total.cwiseProduct(k.f);
  dc_prev.noalias() += p.w_ic.transpose() * z_i;
  dc_prev.noalias() += p.w_fc.transpose() * z_f;
  dc_prev.noalias() += p.w_oc.transpose() * z_o;
}

VectorXd bilstm_encode(const LstmParams& fwd, const LstmParams& bwd, const MatrixXd& sequence,
                       const std::vector<bool>& mask) {
  const int h = fwd.hidden();
  if (bwd.hidden() != h) throw Error("bilstm_encode: direction sizes differ");
  if (static_cast<std::size_t>(sequence.rows()) != mask.size()) throw Error("bilstm_encode: mask length mismatch");
  LstmState sf{VectorXd::Zero(h), VectorXd::Zero(h)};
  LstmState sb{VectorXd::Zero(h), VectorXd::Zero(h)};
  const auto n = sequence.rows();
  for (Eigen::Index t = 0; t < n; ++t) {
    if (mask[static_cast<std::size_t>(t)]) sf = lstm_step(fwd, sequence.row(t).transpose(), sf);
  }
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    if (mask[static_cast<std::size_t>(t)]) sb = lstm_step(bwd, sequence.row(t).transpose(), sb);
  }
  VectorXd out(2 * h);
  out << sf.h, sb.h;
  return out;
}

}  // namespace kurel::bilstm
