#ifndef MECSIM_GEO_CHANNEL_HPP_
#define MECSIM_GEO_CHANNEL_HPP_

// Geometry, air-to-ground / ground LoS probability, path loss, fading and
// MEC association. Everything here is a pure function of its inputs; mutable
// channel state (positions, fading draws) is owned by the environment.

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "mecsim/rng.hpp"

namespace mecsim::geo {

struct Position3D {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  bool operator==(const Position3D&) const = default;
};

struct ChannelParams {
  double carrier_hz = 2.0e9;
  double light_speed = 3.0e8;
  double eta_los_db = 1.0;
  double eta_nlos_db = 20.0;
  double alpha = 9.61;
  double beta = 0.16;

  /// Throws kConfig when an invariant (f_c > 0, c > 0, eta_los <= eta_nlos,
  /// alpha > 0, beta >= 0) does not hold.
  void validate() const;
};

// Upper limit of the obstruction integral. The printed formula can be read
// either way; the quotient is the default.
enum class IntegralUpperLimit {
  kHalfDistanceOverRadius,   // D / (2 r_o)
  kHalfDistanceTimesRadius,  // (D / 2) * r_o
};

struct ObstructionModel {
  double radius = 10.0;          // r_o
  double density = 3.0e-4;       // lambda_o, per unit area
  std::function<double(double)> ccdf;  // G(h); empty means exp(-h / height_mean)
  double height_mean = 15.0;
  IntegralUpperLimit upper_limit = IntegralUpperLimit::kHalfDistanceOverRadius;
  int panels = 400;

  double g(double height) const;
};

struct FadingState {
  double g = 1.0;   // small-scale gain, |N(0,1)|
  double rd = 1.0;  // Rician amplitude
};

struct ChannelState {
  double gain = 0.0;
  double path_loss_db = 0.0;
  double p_los = 0.0;
  double rate = 0.0;
};

double distance(const Position3D& a, const Position3D& b);

/// Elevation angle in degrees of `m` as seen from `n`.
double elevation_deg(const Position3D& m, const Position3D& n);

/// Sigmoid LoS probability for an aerial MEC:
/// 1 / (1 + alpha * exp(-beta * (theta - alpha))), theta in degrees.
double p_los_aerial(const Position3D& m, const Position3D& n,
                    const ChannelParams& p);

/// Integral of G along the straight ray from n to m, with the horizontal
/// variable rescaled to [0, 1]. Trapezoid rule with `o.panels` panels.
double obstruction_integral_unit(double z_from, double z_to,
                                 const ObstructionModel& o);

double obstruction_upper_limit(double d, const ObstructionModel& o);

/// Ground LoS probability exp(-2 r_o lambda_o * integral_0^U G(h(x)) dx).
double p_los_ground(const Position3D& m, const Position3D& n,
                    const ObstructionModel& o);

double mean_excess_loss(double p_los, const ChannelParams& p);

/// Path loss in dB with the excess loss added (not multiplied) to the
/// free-space distance term.
double path_loss_db(double d, const ChannelParams& p, double excess_loss_db);
double path_loss_db(const Position3D& m, const Position3D& n,
                    const ChannelParams& p, double excess_loss_db);

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

/// h = sqrt(g * rd / (D * PL)). PL is taken in the linear domain.
double channel_gain(double d, double path_loss_linear,
                    const FadingState& fading);

/// Shannon rate B * log2(1 + tx_power * gain^2 / noise). Returns 0 for zero
/// transmit power or zero gain; callers apply their own floor.
double data_rate(double gain, double tx_power, double noise, double bandwidth);

/// Index of the MEC with the largest gain; the lowest index wins a tie.
std::size_t associate(std::span<const double> gains);

/// Draws g ~ |N(0,1)| and a unit-power Rician amplitude with factor K.
FadingState sample_fading(Rng& rng, double rician_k);

struct Arena {
  double size_x = 1000.0;
  double size_y = 1000.0;
};

// Constant-velocity motion in the horizontal plane, reflected at the arena
// boundary.
class MobilityModel {
 public:
  MobilityModel() = default;
  MobilityModel(Arena arena, std::vector<double> vx, std::vector<double> vy);

  /// Draws a velocity with uniform heading and speed in [0, max_speed] for
  /// each entry of max_speeds.
  static MobilityModel random(Arena arena, std::span<const double> max_speeds,
                              Rng& rng);

  /// Advances every position by one step; positions.size() must match.
  void step(std::span<Position3D> positions);

  std::size_t size() const { return vx_.size(); }

 private:
  Arena arena_;
  std::vector<double> vx_;
  std::vector<double> vy_;
};

}  // namespace mecsim::geo

#endif  // MECSIM_GEO_CHANNEL_HPP_
