#pragma once

#include <cmath>

#include "omt/model.hpp"

namespace omt::test {

// dX = (0.05 - X) ds + 0.1 dW, r = X
inline AffineModelSpec vasicek() {
  AffineModelSpec m;
  m.A = Matrix::Constant(1, 1, -1.0);
  m.B = Vector::Constant(1, 0.05);
  m.S = Matrix::Constant(1, 1, 0.1);
  m.alpha = Vector::Constant(1, 1.0);
  m.beta = Matrix::Zero(1, 1);
  m.R = Vector::Constant(1, 1.0);
  m.k = 0.0;
  return m;
}

inline AffineModelSpec cir(double sigma = 0.1) {
  AffineModelSpec m = vasicek();
  m.S(0, 0) = sigma;
  m.alpha(0) = 0.0;
  m.beta(0, 0) = 1.0;
  return m;
}

// Constant short rate k, no randomness in r.
inline AffineModelSpec deterministic_rate(double k) {
  AffineModelSpec m = vasicek();
  m.R(0) = 0.0;
  m.k = k;
  return m;
}

inline AffineModelSpec vasicek_with_jump(double L = 0.2, double l = 0.1, double z = 0.1,
                                         double w = 0.5) {
  AffineModelSpec m = vasicek();
  JumpSpecAffine j;
  j.L = Vector::Constant(1, L);
  j.l = l;
  j.measure.atoms = {Vector::Constant(1, z)};
  j.measure.weights = {w};
  m.jump = j;
  return m;
}

inline QuadraticModelSpec qtsm2() {
  QuadraticModelSpec m;
  m.A.resize(2, 2);
  m.A << -0.5, 0.1, 0.0, -0.8;
  m.B.resize(2);
  m.B << 0.01, 0.02;
  m.Sigma.resize(2, 2);
  m.Sigma << 0.1, 0.0, 0.02, 0.08;
  m.Q.resize(2, 2);
  m.Q << 0.5, 0.1, 0.1, 0.3;
  m.R.resize(2);
  m.R << 0.02, 0.01;
  m.k = 0.02;
  return m;
}

inline Vector qtsm2_x0() {
  Vector x(2);
  x << 0.1, -0.05;
  return x;
}

// A = -1, B = 0, Sigma = 0.1, Q = 1, R = 0, k = 0
inline QuadraticModelSpec qtsm1() {
  QuadraticModelSpec m;
  m.A = Matrix::Constant(1, 1, -1.0);
  m.B = Vector::Zero(1);
  m.Sigma = Matrix::Constant(1, 1, 0.1);
  m.Q = Matrix::Constant(1, 1, 1.0);
  m.R = Vector::Zero(1);
  m.k = 0.0;
  return m;
}

inline Vector scalar(double v) { return Vector::Constant(1, v); }

}  // namespace omt::test
