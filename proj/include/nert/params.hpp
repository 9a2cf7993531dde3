#pragma once

// Named-tensor parameter store with paired gradients, Adam updates, and a
// versioned binary checkpoint format (shape manifest + row-major doubles).

#include <Eigen/Dense>
#include <cstdint>
#include <cstring>
#include <deque>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "nert/errors.hpp"

namespace nert {

struct Tensor {
  std::string name;
  Eigen::MatrixXd value;
  Eigen::MatrixXd grad;
};

class ParamStore {
 public:
  Tensor& add(const std::string& name, int rows, int cols) {
    for (const Tensor& t : tensors_)
      if (t.name == name) throw ContractViolation("duplicate tensor: " + name);
    tensors_.push_back(Tensor{name, Eigen::MatrixXd::Zero(rows, cols),
                              Eigen::MatrixXd::Zero(rows, cols)});
    return tensors_.back();
  }

  void init_uniform(std::uint64_t seed, double scale = 0.1) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    for (Tensor& t : tensors_)
      for (Eigen::Index i = 0; i < t.value.size(); ++i) t.value.data()[i] = u(rng);
  }

  void zero_grads() {
    for (Tensor& t : tensors_) t.grad.setZero();
  }

  std::size_t size() const {
    std::size_t n = 0;
    for (const Tensor& t : tensors_) n += t.value.size();
    return n;
  }

  // flat views, used by finite-difference checks and the optimizer
  double get_flat(std::size_t i) const { return *locate(i).first; }
  void set_flat(std::size_t i, double v) { *const_cast<double*>(locate(i).first) = v; }
  double grad_flat(std::size_t i) const { return *locate(i).second; }

  double grad_norm() const {
    double s = 0;
    for (const Tensor& t : tensors_) s += t.grad.squaredNorm();
    return std::sqrt(s);
  }

  void scale_grads(double f) {
    for (Tensor& t : tensors_) t.grad *= f;
  }

  std::deque<Tensor>& tensors() { return tensors_; }
  const std::deque<Tensor>& tensors() const { return tensors_; }

  void save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ParseError("cannot open for write: " + path);
    os.write(kMagic, 8);
    write_u32(os, kVersion);
    write_u32(os, static_cast<std::uint32_t>(tensors_.size()));
    for (const Tensor& t : tensors_) {
      write_u32(os, static_cast<std::uint32_t>(t.name.size()));
      os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
      write_u32(os, static_cast<std::uint32_t>(t.value.rows()));
      write_u32(os, static_cast<std::uint32_t>(t.value.cols()));
      for (Eigen::Index r = 0; r < t.value.rows(); ++r)
        for (Eigen::Index c = 0; c < t.value.cols(); ++c) {
          const double d = t.value(r, c);
          os.write(reinterpret_cast<const char*>(&d), sizeof d);
        }
    }
  }

  // Loads into the already-registered tensors; names and shapes must match.
  void load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError("cannot open: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
      throw ParseError("bad checkpoint magic: " + path);
    if (read_u32(is) != kVersion) throw ParseError("unsupported checkpoint version");
    const std::uint32_t n = read_u32(is);
    if (n != tensors_.size()) throw ParseError("checkpoint tensor count mismatch");
    for (Tensor& t : tensors_) {
      const std::uint32_t len = read_u32(is);
      std::string name(len, '\0');
      is.read(name.data(), len);
      if (!is || name != t.name) throw ParseError("checkpoint tensor name mismatch");
      const int rows = static_cast<int>(read_u32(is));
      const int cols = static_cast<int>(read_u32(is));
      if (rows != t.value.rows() || cols != t.value.cols())
        throw ParseError("checkpoint shape mismatch for " + t.name);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
          double d = 0;
          is.read(reinterpret_cast<char*>(&d), sizeof d);
          if (!is) throw ParseError("checkpoint truncated");
          t.value(r, c) = d;
        }
    }
  }

 private:
  static constexpr char kMagic[8] = {'N', 'R', 'T', 'C', 'K', 'P', 'T', '\0'};
  static constexpr std::uint32_t kVersion = 1;

  static void write_u32(std::ofstream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  static std::uint32_t read_u32(std::ifstream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw ParseError("checkpoint truncated");
    return v;
  }

  std::pair<const double*, const double*> locate(std::size_t i) const {
    for (const Tensor& t : tensors_) {
      const std::size_t n = t.value.size();
      if (i < n) return {t.value.data() + i, t.grad.data() + i};
      i -= n;
    }
    throw ContractViolation("flat index out of range");
  }

  std::deque<Tensor> tensors_;  // deque: Tensor addresses stay stable
};

// Adaptive moment estimation with global-norm gradient clipping.
class Adam {
 public:
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip = 5.0;

  void step(ParamStore& params) {
    if (m_.empty()) {
      for (const Tensor& t : params.tensors()) {
        m_.push_back(Eigen::MatrixXd::Zero(t.value.rows(), t.value.cols()));
        v_.push_back(Eigen::MatrixXd::Zero(t.value.rows(), t.value.cols()));
      }
    }
    const double norm = params.grad_norm();
    const double scale = (clip > 0 && norm > clip) ? clip / norm : 1.0;
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1, t_);
    const double bc2 = 1.0 - std::pow(beta2, t_);
    std::size_t i = 0;
    for (Tensor& t : params.tensors()) {
      const Eigen::MatrixXd g = t.grad * scale;
      m_[i] = beta1 * m_[i] + (1 - beta1) * g;
      v_[i] = beta2 * v_[i] + (1 - beta2) * g.array().square().matrix();
      const Eigen::ArrayXXd mhat = m_[i].array() / bc1;
      const Eigen::ArrayXXd vhat = v_[i].array() / bc2;
      t.value.array() -= lr * mhat / (vhat.sqrt() + eps);
      ++i;
    }
  }

 private:
  std::vector<Eigen::MatrixXd> m_, v_;
  int t_ = 0;
};

}  // namespace nert
