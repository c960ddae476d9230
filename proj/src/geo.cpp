#include "cesim/geo.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace cesim {

namespace {
constexpr double kEarthRadiusM = 6371000.0;
constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

double hav(double theta) {
    const double s = std::sin(theta / 2.0);
    return s * s;
}
}  // namespace

void validate_position(const GeoPosition& p) {
    if (!(p.lat_deg >= -90.0 && p.lat_deg <= 90.0))
        throw std::invalid_argument("latitude out of range [-90, 90]: " +
                                    std::to_string(p.lat_deg));
    if (!(p.lon_deg >= -180.0 && p.lon_deg <= 180.0))
        throw std::invalid_argument("longitude out of range [-180, 180]: " +
                                    std::to_string(p.lon_deg));
}

double haversine_distance(const GeoPosition& a, const GeoPosition& b,
                          HaversineMode mode) {
    const double lat_a = a.lat_deg * kDegToRad;
    const double lat_b = b.lat_deg * kDegToRad;
    const double dlat = (b.lat_deg - a.lat_deg) * kDegToRad;
    const double dlon = (b.lon_deg - a.lon_deg) * kDegToRad;
    if (mode == HaversineMode::Literal) {
        return kEarthRadiusM * hav(dlat / 2.0) +
               std::cos(lat_a) * std::cos(lat_b) * hav(dlon / 2.0);
    }
    const double h = hav(dlat) + std::cos(lat_a) * std::cos(lat_b) * hav(dlon);
    return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

double shannon_rate(const WirelessParams& w, double p_a_w, double p_b_w,
                    double dist_m, ShannonMode mode) {
    if (w.bandwidth_bps <= 0.0) throw std::invalid_argument("bandwidth must be > 0");
    if (w.noise_w <= 0.0) throw std::invalid_argument("noise floor must be > 0");
    if (p_a_w < 0.0 || p_b_w < 0.0)
        throw std::invalid_argument("transmit power must be >= 0");
    const double d = std::max(dist_m, w.min_distance_m);
    const double p = std::min(p_a_w, p_b_w);
    double snr;
    if (mode == ShannonMode::Literal) {
        snr = p * w.path_loss_exp * d / w.noise_w;
    } else {
        snr = p * std::pow(d, -w.path_loss_exp) / w.noise_w;
    }
    return w.bandwidth_bps * std::log2(1.0 + snr);
}

double mesh_transfer_time_s(double payload_bits,
                            const std::vector<double>& hop_rates_bps,
                            const std::vector<double>& hop_delays_s) {
    if (payload_bits < 0.0) throw std::invalid_argument("payload must be >= 0");
    if (hop_delays_s.size() != hop_rates_bps.size())
        throw std::invalid_argument("hop rate/delay lists differ in length");
    double t = 0.0;
    for (std::size_t i = 0; i < hop_rates_bps.size(); ++i) {
        if (std::isinf(hop_delays_s[i]))
            return std::numeric_limits<double>::infinity();
        if (hop_rates_bps[i] <= 0.0)
            return std::numeric_limits<double>::infinity();
        t += payload_bits / hop_rates_bps[i] + hop_delays_s[i];
    }
    return t;
}

double backhaul_rtt_s(double dist_m, double v_tran_mps, double attenuation) {
    if (v_tran_mps <= 0.0) throw std::invalid_argument("v_tran must be > 0");
    if (attenuation <= 0.0 || attenuation > 1.0)
        throw std::invalid_argument("attenuation must be in (0, 1]");
    return 2.0 * dist_m / (v_tran_mps * attenuation);
}

}  // namespace cesim
