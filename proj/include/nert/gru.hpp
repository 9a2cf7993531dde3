#pragma once

// Gated recurrent cell with hand-written reverse-mode gradients.
//   z  = sigmoid(Wz x + Uz h + bz)
//   r  = sigmoid(Wr x + Ur h + br)
//   c  = tanh(Wn x + Un (r.h) + bn)
//   h' = z.h + (1-z).c

#include <Eigen/Dense>
#include <string>

#include "nert/params.hpp"

namespace nert {

inline Eigen::ArrayXd sigmoid(const Eigen::ArrayXd& a) {
  return 1.0 / (1.0 + (-a).exp());
}

struct GruCache {
  Eigen::VectorXd x, h_prev;
  Eigen::ArrayXd z, r, c;
};

class GruCell {
 public:
  GruCell(ParamStore& store, const std::string& prefix, int in, int hid)
      : in_(in), hid_(hid) {
    Wz_ = &store.add(prefix + ".Wz", hid, in);
    Uz_ = &store.add(prefix + ".Uz", hid, hid);
    bz_ = &store.add(prefix + ".bz", hid, 1);
    Wr_ = &store.add(prefix + ".Wr", hid, in);
    Ur_ = &store.add(prefix + ".Ur", hid, hid);
    br_ = &store.add(prefix + ".br", hid, 1);
    Wn_ = &store.add(prefix + ".Wn", hid, in);
    Un_ = &store.add(prefix + ".Un", hid, hid);
    bn_ = &store.add(prefix + ".bn", hid, 1);
  }

  int input_dim() const { return in_; }
  int hidden_dim() const { return hid_; }

  Eigen::VectorXd forward(const Eigen::VectorXd& x, const Eigen::VectorXd& h,
                          GruCache* cache = nullptr) const {
    const Eigen::ArrayXd z =
        sigmoid((Wz_->value * x + Uz_->value * h + bz_->value).array());
    const Eigen::ArrayXd r =
        sigmoid((Wr_->value * x + Ur_->value * h + br_->value).array());
    const Eigen::VectorXd rh = (r * h.array()).matrix();
    const Eigen::ArrayXd c =
        (Wn_->value * x + Un_->value * rh + bn_->value).array().tanh();
    Eigen::VectorXd h_new = (z * h.array() + (1.0 - z) * c).matrix();
    if (cache) *cache = GruCache{x, h, z, r, c};
    return h_new;
  }

  // Accumulates parameter gradients; adds the input gradient into dx and
  // returns the gradient w.r.t. the previous hidden state.
  Eigen::VectorXd backward(const GruCache& k, const Eigen::VectorXd& dh_new,
                           Eigen::VectorXd& dx) const {
    const Eigen::ArrayXd dh_arr = dh_new.array();
    const Eigen::ArrayXd h = k.h_prev.array();
    const Eigen::ArrayXd dz = dh_arr * (h - k.c);
    const Eigen::ArrayXd dc = dh_arr * (1.0 - k.z);
    Eigen::ArrayXd dh = dh_arr * k.z;

    const Eigen::VectorXd dan = (dc * (1.0 - k.c.square())).matrix();
    const Eigen::VectorXd rh = (k.r * h).matrix();
    Wn_->grad += dan * k.x.transpose();
    Un_->grad += dan * rh.transpose();
    bn_->grad += dan;
    const Eigen::ArrayXd drh = (Un_->value.transpose() * dan).array();
    const Eigen::ArrayXd dr = drh * h;
    dh += drh * k.r;

    const Eigen::VectorXd daz = (dz * k.z * (1.0 - k.z)).matrix();
    const Eigen::VectorXd dar = (dr * k.r * (1.0 - k.r)).matrix();
    Wz_->grad += daz * k.x.transpose();
    Uz_->grad += daz * k.h_prev.transpose();
    bz_->grad += daz;
    Wr_->grad += dar * k.x.transpose();
    Ur_->grad += dar * k.h_prev.transpose();
    br_->grad += dar;

    dx += Wz_->value.transpose() * daz + Wr_->value.transpose() * dar +
          Wn_->value.transpose() * dan;
    dh += (Uz_->value.transpose() * daz + Ur_->value.transpose() * dar).array();
    return dh.matrix();
  }

 private:
  int in_, hid_;
  Tensor *Wz_, *Uz_, *bz_, *Wr_, *Ur_, *br_, *Wn_, *Un_, *bn_;
};

}  // namespace nert
