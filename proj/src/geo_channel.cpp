#include "mecsim/geo_channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mecsim/error.hpp"

namespace mecsim::geo {

void ChannelParams::validate() const {
  if (!(carrier_hz > 0.0)) throw Error(ErrorCode::kConfig, "channel: carrier frequency must be > 0");
  if (!(light_speed > 0.0)) throw Error(ErrorCode::kConfig, "channel: propagation speed must be > 0");
  if (eta_los_db > eta_nlos_db) throw Error(ErrorCode::kConfig, "channel: eta_los must not exceed eta_nlos");
  if (!(alpha > 0.0)) throw Error(ErrorCode::kConfig, "channel: alpha must be > 0");
  if (beta < 0.0) throw Error(ErrorCode::kConfig, "channel: beta must be >= 0");
}

double ObstructionModel::g(double height) const {
  if (ccdf) return ccdf(height);
  if (height <= 0.0) return 1.0;
  return std::exp(-height / height_mean);
}

double distance(const Position3D& a, const Position3D& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

double elevation_deg(const Position3D& m, const Position3D& n) {
  const double d = distance(m, n);
  if (!(d > 0.0)) {
    throw Error(ErrorCode::kDegenerateGeometry, "elevation of coincident points");
  }
  const double s = std::clamp((m.z - n.z) / d, -1.0, 1.0);
  return (180.0 / std::numbers::pi) * std::asin(s);
}

double p_los_aerial(const Position3D& m, const Position3D& n,
                    const ChannelParams& p) {
  const double theta = elevation_deg(m, n);
  return 1.0 / (1.0 + p.alpha * std::exp(-p.beta * (theta - p.alpha)));
}

double obstruction_integral_unit(double z_from, double z_to,
                                 const ObstructionModel& o) {
  const int n = std::max(1, o.panels);
  const double step = 1.0 / n;
  double sum = 0.5 * (o.g(z_from) + o.g(z_to));
  for (int i = 1; i < n; ++i) {
    const double t = i * step;
    sum += o.g(z_from + t * (z_to - z_from));
  }
  return sum * step;
}

double obstruction_upper_limit(double d, const ObstructionModel& o) {
  switch (o.upper_limit) {
    case IntegralUpperLimit::kHalfDistanceOverRadius:
      return d / (2.0 * o.radius);
    case IntegralUpperLimit::kHalfDistanceTimesRadius:
      return 0.5 * d * o.radius;
  }
  return 0.0;
}

double p_los_ground(const Position3D& m, const Position3D& n,
                    const ObstructionModel& o) {
  if (o.density <= 0.0 || o.radius <= 0.0) return 1.0;
  const double d = distance(m, n);
  if (d <= 0.0) return 1.0;
  const double upper = obstruction_upper_limit(d, o);
  // x in [0, upper] maps onto t = x / upper, so the integral is
  // upper * integral_0^1 G(h(t)) dt.
  const double integral = upper * obstruction_integral_unit(n.z, m.z, o);
  return std::clamp(std::exp(-2.0 * o.radius * o.density * integral), 0.0, 1.0);
}

double mean_excess_loss(double p_los, const ChannelParams& p) {
  return p_los * p.eta_los_db + (1.0 - p_los) * p.eta_nlos_db;
}

double path_loss_db(double d, const ChannelParams& p, double excess_loss_db) {
  if (!(d > 0.0)) {
    throw Error(ErrorCode::kDegenerateGeometry, "path loss at zero distance");
  }
  return 20.0 * std::log10(4.0 * std::numbers::pi * p.carrier_hz / p.light_speed) +
         20.0 * std::log10(d) + excess_loss_db;
}

double path_loss_db(const Position3D& m, const Position3D& n,
                    const ChannelParams& p, double excess_loss_db) {
  return path_loss_db(distance(m, n), p, excess_loss_db);
}

double channel_gain(double d, double path_loss_linear,
                    const FadingState& fading) {
  const double denom = d * path_loss_linear;
  if (!(denom > 0.0) || !std::isfinite(denom)) {
    throw Error(ErrorCode::kDegenerateChannel, "channel gain with non-positive D*PL");
  }
  const double num = fading.g * fading.rd;
  if (num <= 0.0) return 0.0;
  return std::sqrt(num / denom);
}

double data_rate(double gain, double tx_power, double noise, double bandwidth) {
  if (tx_power <= 0.0 || gain <= 0.0) return 0.0;
  const double snr = tx_power * gain * gain / noise;
  return bandwidth * std::log2(1.0 + snr);
}

std::size_t associate(std::span<const double> gains) {
  if (gains.empty()) {
    throw Error(ErrorCode::kNoAssociation, "no MEC to associate with");
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < gains.size(); ++i) {
    if (gains[i] > gains[best]) best = i;
  }
  return best;
}

FadingState sample_fading(Rng& rng, double rician_k) {
  FadingState f;
  f.g = std::abs(standard_normal(rng));
  const double los = std::sqrt(rician_k / (rician_k + 1.0));
  const double sigma = std::sqrt(1.0 / (2.0 * (rician_k + 1.0)));
  const double re = los + sigma * standard_normal(rng);
  const double im = sigma * standard_normal(rng);
  f.rd = std::hypot(re, im);
  return f;
}

MobilityModel::MobilityModel(Arena arena, std::vector<double> vx,
                             std::vector<double> vy)
    : arena_(arena), vx_(std::move(vx)), vy_(std::move(vy)) {}

MobilityModel MobilityModel::random(Arena arena,
                                    std::span<const double> max_speeds,
                                    Rng& rng) {
  std::vector<double> vx(max_speeds.size());
  std::vector<double> vy(max_speeds.size());
  for (std::size_t i = 0; i < max_speeds.size(); ++i) {
    const double heading = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double speed = uniform(rng, 0.0, max_speeds[i]);
    vx[i] = speed * std::cos(heading);
    vy[i] = speed * std::sin(heading);
  }
  return MobilityModel(arena, std::move(vx), std::move(vy));
}

namespace {

// Reflects a coordinate into [0, size], flipping the velocity on a bounce.
void reflect(double& x, double& v, double size) {
  if (size <= 0.0) return;
  for (int guard = 0; guard < 4 && (x < 0.0 || x > size); ++guard) {
    if (x < 0.0) x = -x;
    if (x > size) x = 2.0 * size - x;
    v = -v;
  }
  x = std::clamp(x, 0.0, size);
}

}  // namespace

void MobilityModel::step(std::span<Position3D> positions) {
  if (positions.size() != vx_.size()) {
    throw Error(ErrorCode::kShape, "mobility: position count mismatch");
  }
  for (std::size_t i = 0; i < positions.size(); ++i) {
    positions[i].x += vx_[i];
    positions[i].y += vy_[i];
    reflect(positions[i].x, vx_[i], arena_.size_x);
    reflect(positions[i].y, vy_[i], arena_.size_y);
  }
}

}  // namespace mecsim::geo
