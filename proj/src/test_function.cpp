#include "jdfilter/test_function.hpp"

#include <cmath>
#include <stdexcept>

namespace jdf {

namespace {

TestFunction coordinate_sin(int dim, int axis, double freq) {
  TestFunction f;
  f.name = "sin_" + std::to_string(freq) + "x" + std::to_string(axis + 1);
  f.bound = std::max(1.0, std::max(freq, freq * freq));
  f.value = [axis, freq](const Eigen::VectorXd& x) {
    return std::sin(freq * x[axis]);
  };
  f.gradient = [dim, axis, freq](const Eigen::VectorXd& x) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
    g[axis] = freq * std::cos(freq * x[axis]);
    return g;
  };
  f.hessian = [dim, axis, freq](const Eigen::VectorXd& x) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
    h(axis, axis) = -freq * freq * std::sin(freq * x[axis]);
    return h;
  };
  return f;
}

TestFunction coordinate_cos(int dim, int axis, double freq) {
  TestFunction f;
  f.name = "cos_" + std::to_string(freq) + "x" + std::to_string(axis + 1);
  f.bound = std::max(1.0, std::max(freq, freq * freq));
  f.value = [axis, freq](const Eigen::VectorXd& x) {
    return std::cos(freq * x[axis]);
  };
  f.gradient = [dim, axis, freq](const Eigen::VectorXd& x) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
    g[axis] = -freq * std::sin(freq * x[axis]);
    return g;
  };
  f.hessian = [dim, axis, freq](const Eigen::VectorXd& x) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
    h(axis, axis) = -freq * freq * std::cos(freq * x[axis]);
    return h;
  };
  return f;
}

TestFunction logistic(int dim, const Eigen::VectorXd& a, double b,
                      const std::string& tag) {
  TestFunction f;
  f.name = "logistic_" + tag;
  const double an = a.lpNorm<Eigen::Infinity>();
  f.bound = std::max(1.0, std::max(0.25 * an, 0.1 * an * an));
  f.value = [a, b](const Eigen::VectorXd& x) {
    return 1.0 / (1.0 + std::exp(-(a.dot(x) + b)));
  };
  f.gradient = [a, b](const Eigen::VectorXd& x) {
    const double g = 1.0 / (1.0 + std::exp(-(a.dot(x) + b)));
    return Eigen::VectorXd(g * (1.0 - g) * a);
  };
  f.hessian = [dim, a, b](const Eigen::VectorXd& x) {
    const double g = 1.0 / (1.0 + std::exp(-(a.dot(x) + b)));
    Eigen::MatrixXd h(dim, dim);
    h = g * (1.0 - g) * (1.0 - 2.0 * g) * (a * a.transpose());
    return h;
  };
  return f;
}

TestFunction gaussian(int dim, const Eigen::VectorXd& center, double s,
                      const std::string& tag) {
  TestFunction f;
  f.name = "gauss_" + tag;
  const double s2 = s * s;
  f.bound = std::max(1.0, std::max(1.0 / s, 1.0 / s2));
  f.value = [center, s2](const Eigen::VectorXd& x) {
    return std::exp(-(x - center).squaredNorm() / (2.0 * s2));
  };
  f.gradient = [center, s2](const Eigen::VectorXd& x) {
    const Eigen::VectorXd r = x - center;
    const double v = std::exp(-r.squaredNorm() / (2.0 * s2));
    return Eigen::VectorXd(-v / s2 * r);
  };
  f.hessian = [dim, center, s2](const Eigen::VectorXd& x) {
    const Eigen::VectorXd r = x - center;
    const double v = std::exp(-r.squaredNorm() / (2.0 * s2));
    Eigen::MatrixXd h(dim, dim);
    h = v * (r * r.transpose() / (s2 * s2) -
             Eigen::MatrixXd::Identity(dim, dim) / s2);
    return h;
  };
  return f;
}

}  // namespace

TestFunction constant_one(int dim) {
  TestFunction f;
  f.name = "one";
  f.bound = 1.0;
  f.value = [](const Eigen::VectorXd&) { return 1.0; };
  f.gradient = [dim](const Eigen::VectorXd&) {
    return Eigen::VectorXd(Eigen::VectorXd::Zero(dim));
  };
  f.hessian = [dim](const Eigen::VectorXd&) {
    return Eigen::MatrixXd(Eigen::MatrixXd::Zero(dim, dim));
  };
  return f;
}

std::vector<TestFunction> builtin_test_functions(int dim) {
  if (dim < 1) throw std::invalid_argument("builtin_test_functions: dim < 1");
  std::vector<TestFunction> out;
  out.push_back(constant_one(dim));
  out.push_back(coordinate_sin(dim, 0, 1.0));
  out.push_back(coordinate_cos(dim, 0, 1.0));
  out.push_back(coordinate_sin(dim, 0, 0.5));
  out.push_back(coordinate_cos(dim, dim - 1, 2.0));

  Eigen::VectorXd a = Eigen::VectorXd::Constant(dim, 1.0 / std::sqrt(double(dim)));
  out.push_back(logistic(dim, a, 0.3, "sym"));
  Eigen::VectorXd a2 = Eigen::VectorXd::Zero(dim);
  a2[0] = 0.8;
  out.push_back(logistic(dim, a2, -0.5, "x1"));

  out.push_back(gaussian(dim, Eigen::VectorXd::Zero(dim), 1.0, "origin"));
  Eigen::VectorXd c = Eigen::VectorXd::Zero(dim);
  c[0] = 1.0;
  out.push_back(gaussian(dim, c, 0.8, "offset"));
  return out;
}

}  // namespace jdf
