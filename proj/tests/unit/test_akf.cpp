/* Copyright 2026 The AoIFuse Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <cmath>

#include "../common/oracles.hpp"
#include "aoifuse/akf.hpp"
#include "aoifuse/imuprep.hpp"
#include "aoifuse/sim.hpp"
#include "doctest.h"

using namespace aoif;
using namespace aoif::akf;

namespace {

double min_eig(const Mat9& p) { return Eigen::SelfAdjointEigenSolver<Mat9>(p).eigenvalues().minCoeff(); }

AkfState bare_state() {
  AkfState s;
  s.q0 = 0.0;
  return s;
}

}  // namespace

TEST_CASE("predict propagates the constant-acceleration model") {
  auto s = bare_state();
  s.x << 0, 0, 0, 1, 0, 0, 0, 0, 0;
  predict(s, 1.0);
  CHECK((s.x.head<3>() - Vec3(1, 0, 0)).norm() < 1e-15);

  auto t = bare_state();
  t.x << 0, 0, 0, 0, 0, 0, 0, 0, 2;
  predict(t, 1.0);
  CHECK(t.x(2) == 1.0);
  CHECK(t.x(5) == 2.0);
}

TEST_CASE("predicted covariance matches a hand matrix product") {
  auto s = bare_state();
  predict(s, 1.0);
  const Mat9 f = transition(1.0);
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 9; ++k) acc += f(i, k) * f(j, k);
      CHECK(std::abs(s.P(i, j) - acc) < 1e-12);
    }
}

TEST_CASE("process noise has the G Q0 G^T structure") {
  const Mat9 q = process_noise(0.1, 0.5);
  CHECK(q(0, 0) == doctest::Approx(0.5 * 0.25 * 1e-4));
  CHECK(q(0, 3) == doctest::Approx(0.5 * 0.5 * 0.01 * 0.1));
  CHECK(q(6, 6) == doctest::Approx(0.5));
  CHECK(q(0, 1) == 0.0);
  CHECK((q - q.transpose()).norm() == 0.0);
}

TEST_CASE("update limits") {
  Rng rng(3);
  auto s = bare_state();
  for (int i = 0; i < 9; ++i) s.x(i) = gauss(rng);
  const Vec3 z(5, -3, 2);
  auto big = s;
  update(big, z, position_selector(), 1e12 * Mat3::Identity());
  CHECK((big.x - s.x).norm() < 1e-6);

  auto exact = s;
  update(exact, z, position_selector(), Mat3::Zero());
  CHECK((exact.x.head<3>() - z).norm() < 1e-12);
  CHECK(exact.innovations.size() == 1);
}

TEST_CASE("update equals the conjugate Gaussian posterior") {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    auto s = bare_state();
    Eigen::Matrix<double, 9, 9> a;
    for (int i = 0; i < 81; ++i) a(i) = gauss(rng);
    s.P = a * a.transpose() / 9.0 + 0.1 * Mat9::Identity();
    for (int i = 0; i < 9; ++i) s.x(i) = gauss(rng);
    Eigen::Matrix<double, 3, 9> h;
    for (int i = 0; i < 27; ++i) h(i) = gauss(rng);
    Mat3 b;
    for (int i = 0; i < 9; ++i) b(i) = gauss(rng);
    const Mat3 r = b * b.transpose() + 0.2 * Mat3::Identity();
    const Vec3 z(gauss(rng), gauss(rng), gauss(rng));

    // Information form: P+ = (P^-1 + H^T R^-1 H)^-1, x+ = P+ (P^-1 x + H^T R^-1 z).
    auto inv9 = [](const Mat9& m) {
      std::array<std::array<double, 9>, 9> arr{};
      for (int i = 0; i < 9; ++i)
        for (int j = 0; j < 9; ++j) arr[i][j] = m(i, j);
      const auto v = oracle::gauss_jordan_inverse<9>(arr);
      Mat9 out;
      for (int i = 0; i < 9; ++i)
        for (int j = 0; j < 9; ++j) out(i, j) = v[i][j];
      return out;
    };
    std::array<std::array<double, 3>, 3> r_arr{};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r_arr[i][j] = r(i, j);
    const auto ri = oracle::gauss_jordan_inverse<3>(r_arr);
    Mat3 r_inv;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r_inv(i, j) = ri[i][j];
    const Mat9 p_inv = inv9(s.P);
    const Mat9 post_p = inv9(p_inv + h.transpose() * r_inv * h);
    const Vec9 post_x = post_p * (p_inv * s.x + h.transpose() * r_inv * z);

    update(s, z, h, r);
    CHECK((s.x - post_x).norm() < 1e-9);
    CHECK((s.P - post_p).norm() < 1e-9);
  }
}

TEST_CASE("singular innovation covariance is reported") {
  auto s = bare_state();
  s.P.setZero();
  auto agree = s;
  CHECK_NOTHROW(update(agree, Vec3::Zero(), position_selector(), Mat3::Zero()));
  try {
    update(s, Vec3(1, 0, 0), position_selector(), Mat3::Zero());
    FAIL("expected singular innovation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kSingularInnovation);
  }
}

TEST_CASE("adapt_r window statistics") {
  auto s = bare_state();
  for (int i = 0; i < 5; ++i) s.innovations.push_back(Vec3(0.3, -0.1, 0.2));
  adapt_r(s, 1e-6);
  CHECK((s.R_uwb - 1e-6 * Mat3::Identity()).norm() < 1e-15);

  std::deque<Vec3> two{Vec3(1, 0, 0), Vec3(-1, 0, 0)};
  const Mat3 c = innovation_covariance(two);
  CHECK((c - Vec3(2, 0, 0).asDiagonal().toDenseMatrix()).norm() < 1e-15);

  auto lonely = bare_state();
  lonely.innovations.push_back(Vec3::Zero());
  try {
    adapt_r(lonely);
    FAIL("expected insufficient window");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInsufficientWindow);
  }
}

TEST_CASE("adapt_r recovers an i.i.d. innovation variance") {
  Rng rng(21);
  const double sigma = 0.7;
  auto s = bare_state();
  s.capacity = 200;
  for (int i = 0; i < 200; ++i) s.innovations.push_back(sigma * Vec3(gauss(rng), gauss(rng), gauss(rng)));
  adapt_r(s);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(s.R_uwb(i, i) / (sigma * sigma) - 1.0) < 0.3);
}

TEST_CASE("adapted R respects the eigenvalue floor") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    auto s = bare_state();
    for (int i = 0; i < 10; ++i) s.innovations.push_back(0.1 * Vec3(gauss(rng), gauss(rng), gauss(rng)));
    s.last_hph = Vec3(gauss(rng), gauss(rng), gauss(rng)).cwiseAbs().asDiagonal();
    adapt_r(s, 1e-6);
    CHECK(Eigen::SelfAdjointEigenSolver<Mat3>(s.R_uwb).eigenvalues().minCoeff() >= 1e-6 * (1 - 1e-9));
  }
}

TEST_CASE("GDOP scaling") {
  const Mat3 r = Vec3(0.1, 0.2, 0.3).asDiagonal();
  CHECK(scale_r_by_gdop(r, 1.5) == r);
  CHECK(scale_r_by_gdop(r, 2.0) == r);
  CHECK((scale_r_by_gdop(r, 4.0) - 4.0 * r).norm() < 1e-15);

  std::vector<Vec3> cube;
  for (int i = 0; i < 8; ++i) cube.push_back(Vec3(i & 1, (i >> 1) & 1, (i >> 2) & 1));
  const double g = oracle::gdop(cube, Vec3(0.5, 0.5, 0.5));
  CHECK(scale_r_by_gdop(r, g) == r);  // g ~ 1.118 below the knee
  const double alpha = g / 0.5;
  CHECK((scale_r_by_gdop(r, g, 0.5) - alpha * alpha * r).norm() < 1e-12);
}

TEST_CASE("perfect measurements reproduce the truth and keep P PSD") {
  auto s = bare_state();
  s.P = 10.0 * Mat9::Identity();
  Vec9 truth;
  truth << 1, 2, 3, 0.5, -0.2, 0.1, 0.05, 0.02, -0.03;
  const double dt = 0.05;
  const Mat9 f = transition(dt);
  for (int k = 0; k < 200; ++k) {
    truth = f * truth;
    predict(s, dt);
    update(s, truth.head<3>(), position_selector(), Mat3::Zero());
    CHECK((s.x.head<3>() - truth.head<3>()).norm() < 1e-9);
    CHECK(min_eig(s.P) >= -1e-9);
    CHECK((s.P - s.P.transpose()).norm() == 0.0);
  }
}

TEST_CASE("filter run on the reference log tracks the truth") {
  const auto sc = sim::reference_scenario(1);
  const auto log = sim::generate(sc);
  const auto fixes = trilat::trilaterate_log(log);
  std::vector<double> t;
  for (const auto& m : log.imu) t.push_back(m.t);
  const std::vector<Mat3> mount{log.mount};
  const auto global = imuprep::to_global(imuprep::accel_of(log), mount);
  const auto est = run(t, global, fixes, AkfConfig{}, 20);
  REQUIRE(est.size() > 1000);
  const sim::Trajectory traj(sc.trajectory);
  double se = 0.0;
  for (const auto& e : est) se += (e.p - traj.at(e.t).p).squaredNorm();
  const double rmse = std::sqrt(se / static_cast<double>(est.size()));
  MESSAGE("AKF rmse on reference seed 1: " << rmse);
  CHECK(std::isfinite(rmse));
  CHECK(rmse < 100.0);
}
