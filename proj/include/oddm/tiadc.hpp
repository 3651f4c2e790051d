#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "oddm/ann.hpp"

namespace oddm {

/// Behavioral interleaved sampler: sin transfer, causal inter-sample leakage, additive noise.
struct FrontEndConfig {
  int n_channels = 6;
  double channel_rate = 25e9;
  double aggregate_rate = 150e9;
  double bandwidth_hz = 75e9;
  double drive_fraction = 0.8;
  std::vector<double> leakage_kernel = {0.05, 0.01};  // from samples n-1, n-2, ...
  double frontend_noise_std = 1e-3;

  void validate() const;
};

/// Pure tone x(t) = sin(2 pi f t + phase), |x| <= 1.
struct Tone {
  double freq_hz = 0.0;
  double phase = 0.0;
  double operator()(double t) const;
};

/// Aggregate sample stream, time n / aggregate_rate; channel = n mod n_channels.
std::vector<double> sample_frontend(const FrontEndConfig& cfg, const Tone& x, std::size_t n_samples,
                                    std::uint64_t seed);
/// Split an aggregate stream into per-channel streams.
std::vector<std::vector<double>> deinterleave(const std::vector<double>& aggregate, int n_channels);

struct TapRow {
  double freq_hz = 0.0;
  int sample_index = 0;
  std::vector<double> taps;  // 11 voltages in [0, v_pi]
  double target = 0.0;       // ideal input at the center tap time
  bool edge = false;
};

inline constexpr int kTaps = 11;

/// Taps s(n-5) .. s(n+5) of the aggregate stream, mapped onto [0, v_pi].
/// Out-of-range neighbors are zero-padded (mid-scale) and the row is flagged.
std::vector<double> assemble_taps(const std::vector<double>& aggregate, long center, double v_pi,
                                  double full_scale, bool* edge = nullptr);

struct EqualizerDataset {
  std::vector<double> frequencies;
  int samples_per_waveform = 97;
  int channel = 0;
  std::vector<TapRow> rows;

  std::size_t size() const { return rows.size(); }
};

struct DatasetConfig {
  int n_freqs = 57;
  double f_lo = 5e9;
  double f_hi = 75e9;
  int samples_per_waveform = 97;
  int channel = 0;
  double v_pi = 2.0;
  double full_scale = 1.2;
  bool validation_grid = false;  // midpoints of the training grid instead of the grid itself
};

std::vector<double> frequency_grid(const DatasetConfig& d);
EqualizerDataset build_dataset(const FrontEndConfig& cfg, const DatasetConfig& d, std::uint64_t seed);

void write_dataset_csv(const std::string& path, const EqualizerDataset& ds);
EqualizerDataset read_dataset_csv(const std::string& path);

/// Flash thermometer: 31 comparator levels -A + c 2A/31, thresholds at (p + 0.5) LSB.
struct FlashCode {
  int levels = 31;
  double amplitude = 1.0;
  double lsb() const { return 2.0 * amplitude / levels; }
  double threshold(int p) const { return -amplitude + (p + 0.5) * lsb(); }
  double level(int code) const { return -amplitude + code * lsb(); }
};
int flash_decode(const std::vector<bool>& outputs);
/// Count of positions where a true sits directly above a false.
int bubble_errors(const std::vector<bool>& outputs);
std::vector<double> flash_targets(double x, const FlashCode& fc);

struct EnobReport {
  std::string scenario;
  std::vector<double> freq_hz;
  std::vector<double> snr_db;
  std::vector<double> enob;
  double mean_snr_db = 0.0;
  double mean_enob = 0.0;
  double bubble_rate = 0.0;
};

inline constexpr double kSnrCapDb = 200.0;

/// Per-frequency SNR after gain/offset/integer-delay alignment; mean SNR from averaged variances.
EnobReport evaluate_enob(const std::vector<std::vector<double>>& outputs,
                         const std::vector<std::vector<double>>& ideal,
                         const std::vector<double>& freqs, const std::string& scenario,
                         int max_delay = 1);
void write_enob_csv(const std::string& path, const std::vector<EnobReport>& reports);

/// Dataset split per frequency: inputs grouped by frequency and ideal targets.
struct GroupedInputs {
  std::vector<double> freqs;
  std::vector<std::vector<std::vector<double>>> inputs;
  std::vector<std::vector<double>> ideal;
  std::vector<std::vector<double>> raw_center;  // unequalized channel samples
};
GroupedInputs group_by_frequency(const EqualizerDataset& ds, double v_pi, double full_scale);

enum class EqualizerKind { Analog, Digital };

struct EqualizerConfig {
  EqualizerKind kind = EqualizerKind::Analog;
  int hidden = 31;
  double noise_scale = 1.0;  // link noise relative to nominal
  TrainConfig train;
  std::uint64_t init_seed = 7;
};

/// 11 -> hidden -> 1 (analog, identity) or 11 -> hidden -> 31 (digital thresholds).
Network make_equalizer_net(const EqualizerConfig& ec);
Dataset to_training_set(const EqualizerDataset& ds, EqualizerKind kind);
Readout equalizer_readout(EqualizerKind kind, double target_scale);

/// Validation ENOB of a trained equalizer; noise_scale 0 disables link noise.
EnobReport evaluate_equalizer(const Network& net, const GroupedInputs& g, EqualizerKind kind,
                              double target_scale, double noise_scale, std::uint64_t seed,
                              const std::string& scenario);
EnobReport evaluate_unequalized(const GroupedInputs& g);

/// Training grid, held-out validation grid and its per-frequency grouping.
struct EqualizerBench {
  DatasetConfig dataset;
  EqualizerDataset train;
  EqualizerDataset valid;
  GroupedInputs grouped;
};
EqualizerBench make_bench(const FrontEndConfig& fe, const DatasetConfig& d, std::uint64_t seed);

struct TrainedEqualizer {
  EqualizerConfig cfg;
  Network net;
  TrainResult history;
};
TrainedEqualizer train_equalizer(const EqualizerBench& bench, const EqualizerConfig& ec);

/// Mean per-frequency ENOB over frequencies at or above f_from_hz.
double band_mean_enob(const EnobReport& r, double f_from_hz);

}  // namespace oddm
