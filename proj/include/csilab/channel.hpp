#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csilab/types.hpp"

namespace csilab::channel {

/// Synthetic sparse multipath OFDM MIMO channel. Each sample is a sum of
/// rays g_p * a(theta_p) * f(tau_p)^H with delay taps confined to
/// [0, max_delay_tap], plus an optional `leakage` energy fraction placed on
/// taps in [n_t, n_f) and per-entry complex Gaussian observation noise.
/// Timeslots evolve as an AR(1) process with coefficient `ar`.
struct ChannelConfig {
  Index n_b = 32;            // gNB antennas
  Index n_f = 256;           // subcarriers
  Index n_t = 32;            // delay truncation length
  Index n_paths = 6;         // rays inside the truncation window
  Index max_delay_tap = 24;  // largest in-window tap (< n_t)
  double ar = 0.9;           // AR(1) coefficient in [0, 1]
  double leakage = 0.0;      // energy fraction beyond tap n_t, in [0, 1)
  double noise_std = 0.0;    // per-entry observation noise std
  std::uint64_t seed = 0;

  void validate() const;
};

struct ChannelSequence {
  std::vector<CMat> timeslots; // each n_b x n_f spatial-frequency CSI
};

/// Sample list with a contiguous train/validation split: samples
/// [0, n_train) are training, the remainder validation.
struct Dataset {
  std::vector<ChannelSequence> samples;
  std::size_t n_train = 0;

  std::size_t size() const { return samples.size(); }
  std::size_t n_val() const { return samples.size() - n_train; }
};

Dataset generate(const ChannelConfig& cfg, std::size_t n_samples, std::size_t n_timeslots,
                 double train_fraction = 0.75);

/// One AR(1) step a*H + sqrt(1-a^2)*W with W entrywise complex Gaussian
/// matched to H's per-entry variance; energy-stationary in expectation.
CMat evolve(const CMat& h, double a, std::uint64_t seed);

/// Spatial-frequency -> angular-delay: inverse unitary DFT along frequency,
/// truncation to the first n_t delay taps, forward unitary DFT across antennas.
CMat to_angular_delay(const CMat& h, Index n_t);

/// Inverse of to_angular_delay on truncation-supported signals (zero-pads the
/// delay axis back to n_f).
CMat from_angular_delay(const CMat& h_ang, Index n_f);

/// Enlarges the training partition n_phase-fold by rotating every entry of a
/// copied sample with one shared unit-modulus factor e^{-i theta},
/// theta ~ U(-pi, pi) per copy. The validation partition is untouched.
Dataset phase_augment(const Dataset& d, std::size_t n_phase, std::uint64_t seed);

/// Binary dataset file, all integers little-endian:
///   magic "DCST" | u16 version | u32 n_samples | u32 n_timeslots |
///   u32 n_b | u32 n_f | u32 n_train | payload of row-major (re, im) f64 pairs.
void save(const Dataset& d, const std::string& path);
Dataset load(const std::string& path);

} // namespace csilab::channel
