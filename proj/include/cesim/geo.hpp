#pragma once

#include <vector>

namespace cesim {

struct GeoPosition {
    double lat_deg = 0.0;
    double lon_deg = 0.0;
};

// Throws std::invalid_argument if lat/lon are outside [-90,90] / [-180,180].
void validate_position(const GeoPosition& p);

enum class HaversineMode {
    Canonical,  // great-circle distance, R = 6371 km
    Literal,    // R*hav(dlat/2) + cos(lat_a)*cos(lat_b)*hav(dlon/2), kept for
                // comparison runs; output units are not meters
};

// Surface distance between two coordinates. Canonical mode is the standard
// great-circle formula; Literal mode evaluates an alternative alias of it
// that skips the final arcsine (selectable so both variants can be compared).
double haversine_distance(const GeoPosition& a, const GeoPosition& b,
                          HaversineMode mode = HaversineMode::Canonical);

struct WirelessParams {
    double bandwidth_bps = 300e6;   // channel bandwidth B
    double noise_w = 1e-9;          // noise floor N0
    double path_loss_exp = 2.5;     // path-loss exponent
    double min_distance_m = 1.0;    // clamp below this before applying path loss
};

enum class ShannonMode {
    Physical,  // SNR = min(p_a,p_b) * dist^(-path_loss_exp) / N0
    Literal,   // SNR = min(p_a,p_b) * path_loss_exp * dist / N0 (alias form)
};

// Achievable rate in bit/s of a D2D hop between transmit powers p_a/p_b (W)
// at the given distance.
double shannon_rate(const WirelessParams& w, double p_a_w, double p_b_w,
                    double dist_m, ShannonMode mode = ShannonMode::Physical);

// Store-and-forward time across a multi-hop wireless path: the payload is
// fully received at each relay before the next hop starts, plus any injected
// per-hop delay (seconds). Infinite delay on any hop yields +inf.
double mesh_transfer_time_s(double payload_bits,
                            const std::vector<double>& hop_rates_bps,
                            const std::vector<double>& hop_delays_s);

// Round-trip time of the wired backhaul over the given distance; signal
// speed v_tran (m/s) scaled by the medium attenuation factor in (0,1].
double backhaul_rtt_s(double dist_m, double v_tran_mps, double attenuation);

}  // namespace cesim
