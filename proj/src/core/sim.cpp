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

#include "aoifuse/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "aoifuse/jsonutil.hpp"

namespace aoif::sim {
namespace {

constexpr int kArcTableSize = 8192;

Rng stream(std::uint64_t seed, const char* tag) {
  const std::uint64_t h = fnv1a64(tag, std::char_traits<char>::length(tag), seed ^ 0x9e3779b97f4a7c15ULL);
  return Rng(h);
}

// Natural cubic spline second derivatives for one coordinate.
std::vector<double> spline_m2(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  std::vector<double> m(n, 0.0);
  if (n < 3) return m;
  std::vector<double> a(n, 0.0), b(n, 0.0), c(n, 0.0), r(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = x[i] - x[i - 1];
    const double h1 = x[i + 1] - x[i];
    a[i] = h0;
    b[i] = 2.0 * (h0 + h1);
    c[i] = h1;
    r[i] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
  }
  // Thomas algorithm on the interior rows.
  for (std::size_t i = 2; i + 1 < n; ++i) {
    const double w = a[i] / b[i - 1];
    b[i] -= w * c[i - 1];
    r[i] -= w * r[i - 1];
  }
  for (std::size_t i = n - 2; i >= 1; --i) {
    m[i] = (r[i] - c[i] * m[i + 1]) / b[i];
    if (i == 1) break;
  }
  return m;
}

}  // namespace

double MeasurementLog::t_end() const {
  double t = 0.0;
  if (!imu.empty()) t = std::max(t, imu.back().t);
  if (!uwb.empty()) t = std::max(t, uwb.back().t);
  if (!ref.empty()) t = std::max(t, ref.back().t);
  if (!truth.empty()) t = std::max(t, truth.back().t);
  return t;
}

Trajectory::Trajectory(const TrajectorySpec& spec) {
  require(!spec.waypoints.empty(), ErrorCode::kInvalidArgument, "trajectory needs at least one waypoint");
  for (const auto& w : spec.waypoints)
    require(w.allFinite(), ErrorCode::kInvalidArgument, "non-finite waypoint");
  pts_ = spec.waypoints;
  knots_.assign(pts_.size(), 0.0);
  for (std::size_t i = 1; i < pts_.size(); ++i) {
    const double h = (pts_[i] - pts_[i - 1]).norm();
    require(h > 0.0, ErrorCode::kInvalidArgument, "coincident consecutive waypoints");
    knots_[i] = knots_[i - 1] + h;
  }

  m2_.assign(pts_.size(), Vec3::Zero());
  for (int k = 0; k < 3; ++k) {
    std::vector<double> y(pts_.size());
    for (std::size_t i = 0; i < pts_.size(); ++i) y[i] = pts_[i][k];
    const auto m = spline_m2(knots_, y);
    for (std::size_t i = 0; i < pts_.size(); ++i) m2_[i][k] = m[i];
  }

  const bool is_static = pts_.size() == 1;
  if (!is_static) {
    // Arc length table: Simpson on a uniform grid in u.
    const double umax = knots_.back();
    table_u_.resize(kArcTableSize + 1);
    table_s_.resize(kArcTableSize + 1);
    table_u_[0] = 0.0;
    table_s_[0] = 0.0;
    auto speed = [this](double u) {
      Vec3 c, d1, d2;
      eval_curve(u, c, d1, d2);
      return d1.norm();
    };
    for (int i = 1; i <= kArcTableSize; ++i) {
      const double u0 = umax * (i - 1) / kArcTableSize;
      const double u1 = (i == kArcTableSize) ? umax : umax * i / kArcTableSize;
      table_u_[i] = u1;
      table_s_[i] = table_s_[i - 1] + (u1 - u0) / 6.0 * (speed(u0) + 4.0 * speed(0.5 * (u0 + u1)) + speed(u1));
    }
    length_ = table_s_.back();
  }

  // Speed profile.
  if (is_static || length_ <= 0.0) {
    require(spec.static_duration > 0.0 && std::isfinite(spec.static_duration), ErrorCode::kInvalidArgument,
            "static trajectory needs a positive static_duration");
    phases_.push_back({0.0, 0.0, 0.0, 0.0, spec.static_duration});
    duration_ = spec.static_duration;
    return;
  }
  require(!spec.plateaus.empty(), ErrorCode::kInvalidArgument, "moving trajectory needs a speed profile");
  require(std::isfinite(spec.accel) && spec.accel >= 0.0, ErrorCode::kInvalidArgument, "non-finite ramp acceleration");
  double t = 0.0, s = 0.0, v = 0.0;
  auto push = [&](double acc, double dur) {
    if (dur <= 0.0) return;
    phases_.push_back({t, s, v, acc, dur});
    s += v * dur + 0.5 * acc * dur * dur;
    v += acc * dur;
    t += dur;
  };
  auto ramp_to = [&](double target) {
    if (spec.accel == 0.0) {
      v = target;
      return;
    }
    const double dv = target - v;
    if (dv == 0.0) return;
    const double acc = dv > 0 ? spec.accel : -spec.accel;
    push(acc, std::abs(dv) / spec.accel);
    v = target;
  };
  for (std::size_t i = 0; i < spec.plateaus.size(); ++i) {
    const auto& pl = spec.plateaus[i];
    require(std::isfinite(pl.speed) && pl.speed > 0.0, ErrorCode::kInvalidArgument, "plateau speed must be finite and > 0");
    require(std::isfinite(pl.duration) && pl.duration >= 0.0, ErrorCode::kInvalidArgument, "non-finite plateau duration");
    ramp_to(pl.speed);
    if (i + 1 < spec.plateaus.size()) {
      push(0.0, pl.duration);
    } else {
      const double down = spec.accel > 0.0 ? v * v / (2.0 * spec.accel) : 0.0;
      const double hold = (length_ - s - down) / v;
      require(hold >= -1e-9, ErrorCode::kInvalidArgument, "speed profile overshoots the path length");
      push(0.0, std::max(hold, 0.0));
      if (spec.accel > 0.0) {
        push(-spec.accel, v / spec.accel);
      } else {
        // Instant stop: the last phase already ends at the path end.
      }
      v = 0.0;
    }
  }
  duration_ = t;
}

void Trajectory::eval_curve(double u, Vec3& c, Vec3& d1, Vec3& d2) const {
  const std::size_t n = pts_.size();
  if (n == 1) {
    c = pts_[0];
    d1 = Vec3::Zero();
    d2 = Vec3::Zero();
    return;
  }
  u = std::clamp(u, knots_.front(), knots_.back());
  std::size_t i = std::upper_bound(knots_.begin(), knots_.end(), u) - knots_.begin();
  i = std::clamp<std::size_t>(i, 1, n - 1) - 1;
  const double h = knots_[i + 1] - knots_[i];
  const double A = (knots_[i + 1] - u) / h;
  const double B = (u - knots_[i]) / h;
  const Vec3& y0 = pts_[i];
  const Vec3& y1 = pts_[i + 1];
  const Vec3& m0 = m2_[i];
  const Vec3& m1 = m2_[i + 1];
  c = A * y0 + B * y1 + ((A * A * A - A) * m0 + (B * B * B - B) * m1) * (h * h / 6.0);
  d1 = (y1 - y0) / h - (3.0 * A * A - 1.0) / 6.0 * h * m0 + (3.0 * B * B - 1.0) / 6.0 * h * m1;
  d2 = A * m0 + B * m1;
}

double Trajectory::u_of_s(double s) const {
  if (s <= 0.0) return 0.0;
  if (s >= length_) return knots_.back();
  std::size_t i = std::upper_bound(table_s_.begin(), table_s_.end(), s) - table_s_.begin();
  i = std::clamp<std::size_t>(i, 1, table_s_.size() - 1) - 1;
  const double ua = table_u_[i];
  const double sa = table_s_[i];
  const double ub = table_u_[i + 1];
  const double sb = table_s_[i + 1];
  double u = ua + (s - sa) / (sb - sa) * (ub - ua);
  auto speed = [this](double x) {
    Vec3 c, d1, d2;
    eval_curve(x, c, d1, d2);
    return d1.norm();
  };
  for (int it = 0; it < 4; ++it) {
    // Three-point Gauss-Legendre for the arc length on [ua, u].
    const double half = 0.5 * (u - ua), mid = 0.5 * (u + ua);
    const double g = std::sqrt(0.6);
    const double len = half * (5.0 / 9.0 * speed(mid - g * half) + 8.0 / 9.0 * speed(mid) + 5.0 / 9.0 * speed(mid + g * half));
    const double f = sa + len - s;
    const double d = speed(u);
    if (d <= 0.0) break;
    const double step = f / d;
    u -= step;
    if (std::abs(step) < 1e-15 * (1.0 + std::abs(u))) break;
  }
  return std::clamp(u, ua, ub);
}

void Trajectory::speed_at(double t, double& s, double& sd, double& sdd) const {
  for (const auto& ph : phases_) {
    if (t <= ph.t0 + ph.dur) {
      const double tau = std::max(0.0, t - ph.t0);
      s = ph.s0 + ph.v0 * tau + 0.5 * ph.acc * tau * tau;
      sd = ph.v0 + ph.acc * tau;
      sdd = ph.acc;
      return;
    }
  }
  s = length_;
  sd = 0.0;
  sdd = 0.0;
}

Trajectory::State Trajectory::at(double t) const {
  State st;
  if (pts_.size() == 1 || length_ <= 0.0) {
    st.p = pts_[0];
    return st;
  }
  double s, sd, sdd;
  speed_at(t, s, sd, sdd);
  const double u = u_of_s(s);
  Vec3 c, d1, d2;
  eval_curve(u, c, d1, d2);
  const double n = d1.norm();
  const Vec3 tan = d1 / n;
  const Vec3 curv = (d2 - d2.dot(tan) * tan) / (n * n);
  st.p = c;
  st.v = tan * sd;
  st.a = curv * sd * sd + tan * sdd;
  return st;
}

Mat3 rotation_from_rpy(const Vec3& rpy) {
  return (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
      .toRotationMatrix();
}

void validate(const Scenario& sc) {
  require(!sc.anchors.empty() && sc.anchors.size() <= 16, ErrorCode::kInvalidArgument, "scenario needs 1..16 anchors");
  for (const auto& a : sc.anchors) require(a.allFinite(), ErrorCode::kInvalidArgument, "non-finite anchor position");
  require(std::isfinite(sc.imu_rate) && std::isfinite(sc.uwb_rate) && std::isfinite(sc.ref_rate),
          ErrorCode::kInvalidArgument, "non-finite sensor rate");
  require(sc.ref_rate > 0.0 && sc.uwb_rate >= sc.ref_rate && sc.imu_rate >= sc.uwb_rate, ErrorCode::kInvalidArgument,
          "rates must satisfy imu_rate >= uwb_rate >= ref_rate > 0");
  require(sc.uwb_slot_offset >= 0.0 && sc.uwb_slot_offset * static_cast<double>(sc.anchors.size()) < 1.0 / sc.uwb_rate,
          ErrorCode::kInvalidArgument, "anchor slot offsets must fit in one UWB period");
  const auto& ch = sc.channel;
  require(ch.los_range_sigma >= 0.0 && ch.nlos_bias_sigma >= 0.0 && ch.nlos_bias_mean >= 0.0,
          ErrorCode::kInvalidArgument, "channel sigmas and NLOS bias mean must be >= 0");
  require(ch.timestamp_quantum > 0.0, ErrorCode::kInvalidArgument, "timestamp quantum must be > 0");
  require(ch.nlos_mean_dwell > 0.0, ErrorCode::kInvalidArgument, "NLOS dwell must be > 0");
  require(ch.nlos_prob_schedule.size() <= sc.anchors.size() && ch.outage_schedule.size() <= sc.anchors.size(),
          ErrorCode::kInvalidArgument, "channel schedules list more anchors than the scenario");
  for (const auto& sched : ch.nlos_prob_schedule)
    for (const auto& st : sched)
      require(st.p >= 0.0 && st.p <= 1.0, ErrorCode::kInvalidArgument, "NLOS probability outside [0,1]");
  if (ch.bursty) {
    require(ch.bursty->on_mean > 0.0 && ch.bursty->off_mean > 0.0 && ch.bursty->max_visible >= 1 &&
                ch.bursty->coverage_radius > 0.0,
            ErrorCode::kInvalidArgument, "invalid bursty visibility parameters");
  }
  require(sc.imu.accel_noise_sigma >= 0.0 && sc.imu.gyro_noise_sigma >= 0.0, ErrorCode::kInvalidArgument,
          "IMU noise sigmas must be >= 0");
}

ChannelModel resolve_channel(const Scenario& sc) {
  ChannelModel ch = sc.channel;
  const std::size_t na = sc.anchors.size();
  ch.outage_schedule.resize(na);
  ch.nlos_prob_schedule.resize(na);
  if (!ch.bursty) return ch;
  const auto cfg = *ch.bursty;
  ch.bursty.reset();

  const Trajectory traj(sc.trajectory);
  const double period = 1.0 / sc.uwb_rate;
  const auto epochs = static_cast<std::size_t>(std::floor(traj.duration() * sc.uwb_rate + 1e-9)) + 1;
  std::vector<std::vector<char>> vis(na, std::vector<char>(epochs, 0));
  Rng rng = stream(sc.seed, "bursty");
  for (std::size_t a = 0; a < na; ++a) {
    bool on = uniform01(rng) < cfg.on_mean / (cfg.on_mean + cfg.off_mean);
    auto draw = [&](bool state) { return -std::log(1.0 - uniform01(rng)) * (state ? cfg.on_mean : cfg.off_mean); };
    double next = draw(on);
    for (std::size_t k = 0; k < epochs; ++k) {
      const double t = static_cast<double>(k) * period;
      while (t >= next) {
        on = !on;
        next += draw(on);
      }
      const double dist = (traj.at(t).p - sc.anchors[a]).norm();
      vis[a][k] = (on && dist <= cfg.coverage_radius) ? 1 : 0;
    }
  }
  // Cap simultaneous visibility, dropping the farthest anchors first.
  for (std::size_t k = 0; k < epochs; ++k) {
    std::vector<std::pair<double, std::size_t>> on;
    const Vec3 p = traj.at(static_cast<double>(k) * period).p;
    for (std::size_t a = 0; a < na; ++a)
      if (vis[a][k]) on.emplace_back((p - sc.anchors[a]).norm(), a);
    if (static_cast<int>(on.size()) <= cfg.max_visible) continue;
    std::sort(on.begin(), on.end());
    for (std::size_t j = static_cast<std::size_t>(cfg.max_visible); j < on.size(); ++j) vis[on[j].second][k] = 0;
  }
  for (std::size_t a = 0; a < na; ++a) {
    std::size_t k = 0;
    while (k < epochs) {
      if (vis[a][k]) {
        ++k;
        continue;
      }
      std::size_t k1 = k;
      while (k1 + 1 < epochs && !vis[a][k1 + 1]) ++k1;
      const double t0 = static_cast<double>(k) * period;
      const double t1 = static_cast<double>(k1 + 1) * period - 1e-9;
      ch.outage_schedule[a].push_back({t0, t1});
      k = k1 + 1;
    }
  }
  return ch;
}

namespace {

double prob_at(const std::vector<ProbStep>& sched, double t) {
  double p = 0.0;
  for (const auto& st : sched) {
    if (st.t0 <= t) p = st.p;
    else break;
  }
  return p;
}

bool covered(const std::vector<Interval>& sched, double t) {
  return std::any_of(sched.begin(), sched.end(), [t](const Interval& iv) { return iv.contains(t); });
}

void check_bounds(const Scenario& sc, const Trajectory& traj) {
  const int n = 2000;
  for (int i = 0; i <= n; ++i) {
    const auto st = traj.at(traj.duration() * i / n);
    require(st.p.allFinite() && st.v.allFinite() && st.a.allFinite(), ErrorCode::kInvalidArgument,
            "trajectory produced non-finite state");
    for (int k = 0; k < 3; ++k)
      if (st.p[k] < sc.bounds.lo[k] || st.p[k] > sc.bounds.hi[k])
        fail(ErrorCode::kOutOfBounds, "trajectory leaves the scenario bounding box");
  }
}

}  // namespace

MeasurementLog generate(const Scenario& sc) {
  validate(sc);
  const Trajectory traj(sc.trajectory);
  check_bounds(sc, traj);
  const ChannelModel ch = resolve_channel(sc);
  const std::size_t na = sc.anchors.size();

  MeasurementLog log;
  log.anchors = sc.anchors;
  log.imu_rate = sc.imu_rate;
  log.uwb_rate = sc.uwb_rate;
  log.ref_rate = sc.ref_rate;
  log.seed = sc.seed;
  log.mount = rotation_from_rpy(sc.imu.mount_rpy);
  const Mat3 body_from_global = log.mount.transpose();
  const Vec3 g(0.0, 0.0, -kGravity);
  const double T = traj.duration();

  // IMU and dense truth share the IMU clock.
  Rng imu_rng = stream(sc.seed, "imu");
  const auto n_imu = static_cast<std::size_t>(std::floor(T * sc.imu_rate + 1e-9)) + 1;
  log.imu.reserve(n_imu);
  log.truth.reserve(n_imu);
  for (std::size_t k = 0; k < n_imu; ++k) {
    const double t = static_cast<double>(k) / sc.imu_rate;
    const auto st = traj.at(t);
    ImuSample s;
    s.t = t;
    const Vec3 bias = sc.imu.bias0 + sc.imu.bias1 * t;
    Vec3 noise_a, noise_g;
    for (int i = 0; i < 3; ++i) noise_a[i] = gauss(imu_rng);
    for (int i = 0; i < 3; ++i) noise_g[i] = gauss(imu_rng);
    s.accel = body_from_global * (st.a + g) + bias + sc.imu.accel_noise_sigma * noise_a;
    s.gyro = sc.imu.gyro_noise_sigma * noise_g;
    log.imu.push_back(s);
    log.truth.push_back({t, st.p, st.v, st.a});
  }

  // UWB: one slot per period, anchors staggered inside the slot.
  Rng los_rng = stream(sc.seed, "uwb-los");
  Rng nlos_rng = stream(sc.seed, "uwb-nlos");
  const double period = 1.0 / sc.uwb_rate;
  const auto epochs = static_cast<std::size_t>(std::floor(T * sc.uwb_rate + 1e-9)) + 1;
  const double q = ch.timestamp_quantum * kSpeedOfLight;
  const double beta_exit = std::min(1.0, period / ch.nlos_mean_dwell);
  std::vector<char> nlos(na, 0);
  std::vector<double> bias(na, 0.0);
  auto draw_bias = [&]() { return std::max(0.0, ch.nlos_bias_mean + ch.nlos_bias_sigma * gauss(nlos_rng)); };
  log.uwb.reserve(epochs * na);
  for (std::size_t k = 0; k < epochs; ++k) {
    for (std::size_t a = 0; a < na; ++a) {
      const double t = static_cast<double>(k) * period + static_cast<double>(a) * sc.uwb_slot_offset;
      // NLOS state evolves every slot so its draws do not depend on outages.
      const double p = prob_at(ch.nlos_prob_schedule[a], t);
      const double u = uniform01(nlos_rng);
      if (k == 0) {
        nlos[a] = u < p;
        if (nlos[a]) bias[a] = draw_bias();
      } else if (nlos[a]) {
        if (p < 1.0 && u < beta_exit) nlos[a] = 0;
      } else {
        const double enter = p >= 1.0 ? 1.0 : std::min(1.0, beta_exit * p / (1.0 - p));
        if (u < enter) {
          nlos[a] = 1;
          bias[a] = draw_bias();
        }
      }
      const double n0 = gauss(los_rng);
      if (t > T + 1e-12) continue;
      UwbRecord r;
      r.t = t;
      r.anchor = static_cast<int>(a);
      r.valid = !covered(ch.outage_schedule[a], t);
      if (r.valid) {
        double d = (traj.at(t).p - sc.anchors[a]).norm() + ch.los_range_sigma * n0;
        if (nlos[a]) d += bias[a];
        if (ch.quantize) d = std::round(d / q) * q;
        r.range = std::max(0.0, d);
      }
      log.uwb.push_back(r);
    }
  }

  Rng ref_rng = stream(sc.seed, "ref");
  const auto n_ref = static_cast<std::size_t>(std::floor(T * sc.ref_rate + 1e-9)) + 1;
  log.ref.reserve(n_ref);
  for (std::size_t k = 0; k < n_ref; ++k) {
    const double t = static_cast<double>(k) / sc.ref_rate;
    Vec3 n;
    for (int i = 0; i < 3; ++i) n[i] = gauss(ref_rng);
    log.ref.push_back({t, traj.at(t).p + sc.ref_sigma * n});
  }
  return log;
}

std::vector<VisibilityBin> visibility_series(const MeasurementLog& log, double dt) {
  require(dt > 0.0, ErrorCode::kInvalidArgument, "visibility bin width must be > 0");
  std::vector<VisibilityBin> out;
  if (log.uwb.empty()) return out;
  const double t_end = log.uwb.back().t;
  const auto nbins = static_cast<std::size_t>(std::floor(t_end / dt + 1e-9)) + 1;
  std::vector<std::set<int>> seen(nbins);
  for (const auto& r : log.uwb) {
    if (!r.valid) continue;
    const auto b = std::min(nbins - 1, static_cast<std::size_t>(std::floor(r.t / dt + 1e-9)));
    seen[b].insert(r.anchor);
  }
  out.reserve(nbins);
  for (std::size_t b = 0; b < nbins; ++b) out.push_back({static_cast<double>(b) * dt, static_cast<int>(seen[b].size())});
  return out;
}

Scenario reference_scenario(std::uint64_t seed) {
  Scenario sc;
  sc.seed = seed;
  const Vec3 start(0.0, 0.0, 343.0);
  const Vec3 end(590.0, 190.0, 0.0);
  const Vec3 horiz(end.x() - start.x(), end.y() - start.y(), 0.0);
  const Vec3 perp = Vec3(-horiz.y(), horiz.x(), 0.0).normalized();
  const double sag = 20.0;
  const double wiggle[] = {0.0, 6.0, -4.0, 5.0, -3.0, 0.0};
  for (int i = 0; i <= 5; ++i) {
    const double f = i / 5.0;
    Vec3 p = start + f * (end - start) + wiggle[i] * perp;
    p.z() -= sag * 4.0 * f * (1.0 - f);
    sc.trajectory.waypoints.push_back(p);
  }
  sc.trajectory.accel = 0.5;
  sc.trajectory.plateaus = {{6.0, 20.0}, {7.5, 25.0}, {5.5, 20.0}, {7.0, 0.0}};

  // Pairs of anchors share a side of the line, alternating low and high, so
  // any four consecutive anchors span both sides and both heights.
  const double fr[] = {0.08, 0.25, 0.42, 0.58, 0.75, 0.92};
  const double lateral[] = {60.0, 60.0, -70.0, -70.0, 60.0, 60.0};
  const double below[] = {40.0, -40.0, 40.0, -40.0, 40.0, -40.0};
  for (int i = 0; i < 6; ++i) {
    Vec3 a = start + fr[i] * (end - start) + lateral[i] * perp;
    a.z() -= below[i];
    sc.anchors.push_back(a);
  }

  sc.channel.los_range_sigma = 0.08;
  sc.channel.nlos_bias_mean = 0.5;
  sc.channel.nlos_bias_sigma = 0.3;
  sc.channel.nlos_mean_dwell = 1.0;
  sc.channel.nlos_prob_schedule.assign(6, {{0.0, 0.15}});
  sc.channel.nlos_prob_schedule[2] = {{0.0, 0.15}, {40.0, 0.4}, {80.0, 0.15}};
  sc.channel.nlos_prob_schedule[4] = {{0.0, 0.15}, {40.0, 0.4}, {80.0, 0.15}};
  sc.channel.bursty = BurstyVisibility{400.0, 2.0, 1.0, 4};
  // Two full outages.
  sc.channel.outage_schedule.assign(6, {{30.0, 33.0}, {86.0, 89.5}});

  sc.imu.accel_noise_sigma = 0.05;
  sc.imu.gyro_noise_sigma = 0.002;
  sc.imu.bias0 = Vec3(0.04, -0.03, 0.06);
  sc.imu.bias1 = Vec3(3e-4, -2e-4, 1e-4);
  sc.bounds.lo = Vec3(-200.0, -200.0, -200.0);
  sc.bounds.hi = Vec3(900.0, 500.0, 600.0);
  return sc;
}

// --- JSON -------------------------------------------------------------------

namespace {

using json::Json;

std::vector<Interval> intervals_from(const Json& j) {
  std::vector<Interval> out;
  for (const auto& iv : j) {
    require(iv.is_array() && iv.size() == 2, ErrorCode::kParse, "interval must be [t0, t1]");
    out.push_back({iv[0].get<double>(), iv[1].get<double>()});
  }
  return out;
}

}  // namespace

Scenario scenario_from_json(const std::string& text) {
  const Json j = json::parse(text);
  json::check_keys(j, {"anchors", "trajectory", "imu_rate", "uwb_rate", "ref_rate", "ref_sigma", "uwb_slot_offset",
                       "seed", "channel", "imu", "bounds"},
                   "scenario");
  Scenario sc;
  for (const auto& a : j.at("anchors")) sc.anchors.push_back(json::vec3(a));
  const auto& tj = j.at("trajectory");
  json::check_keys(tj, {"waypoints", "accel", "plateaus", "static_duration"}, "trajectory");
  for (const auto& w : tj.at("waypoints")) sc.trajectory.waypoints.push_back(json::vec3(w));
  sc.trajectory.accel = tj.value("accel", sc.trajectory.accel);
  sc.trajectory.static_duration = tj.value("static_duration", sc.trajectory.static_duration);
  if (tj.contains("plateaus")) {
    for (const auto& p : tj.at("plateaus")) {
      json::check_keys(p, {"speed", "duration"}, "plateau");
      sc.trajectory.plateaus.push_back({p.at("speed").get<double>(), p.value("duration", 0.0)});
    }
  }
  sc.imu_rate = j.value("imu_rate", sc.imu_rate);
  sc.uwb_rate = j.value("uwb_rate", sc.uwb_rate);
  sc.ref_rate = j.value("ref_rate", sc.ref_rate);
  sc.ref_sigma = j.value("ref_sigma", sc.ref_sigma);
  sc.uwb_slot_offset = j.value("uwb_slot_offset", sc.uwb_slot_offset);
  sc.seed = j.value("seed", sc.seed);
  if (j.contains("channel")) {
    const auto& cj = j.at("channel");
    json::check_keys(cj, {"los_range_sigma", "nlos_bias_mean", "nlos_bias_sigma", "nlos_mean_dwell",
                          "nlos_prob_schedule", "outage_schedule", "timestamp_quantum", "quantize", "bursty"},
                     "channel");
    auto& ch = sc.channel;
    ch.los_range_sigma = cj.value("los_range_sigma", ch.los_range_sigma);
    ch.nlos_bias_mean = cj.value("nlos_bias_mean", ch.nlos_bias_mean);
    ch.nlos_bias_sigma = cj.value("nlos_bias_sigma", ch.nlos_bias_sigma);
    ch.nlos_mean_dwell = cj.value("nlos_mean_dwell", ch.nlos_mean_dwell);
    ch.timestamp_quantum = cj.value("timestamp_quantum", ch.timestamp_quantum);
    ch.quantize = cj.value("quantize", ch.quantize);
    if (cj.contains("nlos_prob_schedule")) {
      for (const auto& sched : cj.at("nlos_prob_schedule")) {
        std::vector<ProbStep> steps;
        for (const auto& st : sched) {
          require(st.is_array() && st.size() == 2, ErrorCode::kParse, "NLOS step must be [t0, p]");
          steps.push_back({st[0].get<double>(), st[1].get<double>()});
        }
        ch.nlos_prob_schedule.push_back(std::move(steps));
      }
    }
    if (cj.contains("outage_schedule"))
      for (const auto& sched : cj.at("outage_schedule")) ch.outage_schedule.push_back(intervals_from(sched));
    if (cj.contains("bursty") && !cj.at("bursty").is_null()) {
      const auto& bj = cj.at("bursty");
      json::check_keys(bj, {"coverage_radius", "on_mean", "off_mean", "max_visible"}, "bursty");
      BurstyVisibility b;
      b.coverage_radius = bj.value("coverage_radius", b.coverage_radius);
      b.on_mean = bj.value("on_mean", b.on_mean);
      b.off_mean = bj.value("off_mean", b.off_mean);
      b.max_visible = bj.value("max_visible", b.max_visible);
      ch.bursty = b;
    }
  }
  if (j.contains("imu")) {
    const auto& ij = j.at("imu");
    json::check_keys(ij, {"accel_noise_sigma", "gyro_noise_sigma", "bias0", "bias1", "mount_rpy"}, "imu");
    sc.imu.accel_noise_sigma = ij.value("accel_noise_sigma", sc.imu.accel_noise_sigma);
    sc.imu.gyro_noise_sigma = ij.value("gyro_noise_sigma", sc.imu.gyro_noise_sigma);
    if (ij.contains("bias0")) sc.imu.bias0 = json::vec3(ij.at("bias0"));
    if (ij.contains("bias1")) sc.imu.bias1 = json::vec3(ij.at("bias1"));
    if (ij.contains("mount_rpy")) sc.imu.mount_rpy = json::vec3(ij.at("mount_rpy"));
  }
  if (j.contains("bounds")) {
    const auto& bj = j.at("bounds");
    json::check_keys(bj, {"lo", "hi"}, "bounds");
    sc.bounds.lo = json::vec3(bj.at("lo"));
    sc.bounds.hi = json::vec3(bj.at("hi"));
  }
  validate(sc);
  return sc;
}

std::string scenario_to_json(const Scenario& sc) {
  Json j;
  j["anchors"] = Json::array();
  for (const auto& a : sc.anchors) j["anchors"].push_back(json::from_vec3(a));
  Json tj;
  tj["waypoints"] = Json::array();
  for (const auto& w : sc.trajectory.waypoints) tj["waypoints"].push_back(json::from_vec3(w));
  tj["accel"] = sc.trajectory.accel;
  tj["static_duration"] = sc.trajectory.static_duration;
  tj["plateaus"] = Json::array();
  for (const auto& p : sc.trajectory.plateaus) tj["plateaus"].push_back({{"speed", p.speed}, {"duration", p.duration}});
  j["trajectory"] = tj;
  j["imu_rate"] = sc.imu_rate;
  j["uwb_rate"] = sc.uwb_rate;
  j["ref_rate"] = sc.ref_rate;
  j["ref_sigma"] = sc.ref_sigma;
  j["uwb_slot_offset"] = sc.uwb_slot_offset;
  j["seed"] = sc.seed;
  const auto& ch = sc.channel;
  Json cj;
  cj["los_range_sigma"] = ch.los_range_sigma;
  cj["nlos_bias_mean"] = ch.nlos_bias_mean;
  cj["nlos_bias_sigma"] = ch.nlos_bias_sigma;
  cj["nlos_mean_dwell"] = ch.nlos_mean_dwell;
  cj["timestamp_quantum"] = ch.timestamp_quantum;
  cj["quantize"] = ch.quantize;
  cj["nlos_prob_schedule"] = Json::array();
  for (const auto& sched : ch.nlos_prob_schedule) {
    Json s = Json::array();
    for (const auto& st : sched) s.push_back({st.t0, st.p});
    cj["nlos_prob_schedule"].push_back(s);
  }
  cj["outage_schedule"] = Json::array();
  for (const auto& sched : ch.outage_schedule) {
    Json s = Json::array();
    for (const auto& iv : sched) s.push_back({iv.t0, iv.t1});
    cj["outage_schedule"].push_back(s);
  }
  if (ch.bursty) {
    cj["bursty"] = {{"coverage_radius", ch.bursty->coverage_radius},
                    {"on_mean", ch.bursty->on_mean},
                    {"off_mean", ch.bursty->off_mean},
                    {"max_visible", ch.bursty->max_visible}};
  }
  j["channel"] = cj;
  j["imu"] = {{"accel_noise_sigma", sc.imu.accel_noise_sigma},
              {"gyro_noise_sigma", sc.imu.gyro_noise_sigma},
              {"bias0", json::from_vec3(sc.imu.bias0)},
              {"bias1", json::from_vec3(sc.imu.bias1)},
              {"mount_rpy", json::from_vec3(sc.imu.mount_rpy)}};
  j["bounds"] = {{"lo", json::from_vec3(sc.bounds.lo)}, {"hi", json::from_vec3(sc.bounds.hi)}};
  return j.dump(2);
}

}  // namespace aoif::sim
