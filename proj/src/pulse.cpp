#include "latgate/pulse.hpp"

#include <stdexcept>

namespace latgate {

double blackman_amplitude(double t, double total) {
    if (total <= 0.0) throw std::domain_error("blackman_amplitude: non-positive duration");
    if (t < 0.0 || t > total) throw std::domain_error("blackman_amplitude: t outside [0,T]");
    const double x = kTwoPi * t / total;
    return kBlackmanA0 - kBlackmanA1 * std::cos(x) + kBlackmanA2 * std::cos(2.0 * x);
}

double pi_pulse_peak_rabi(double t_pi) {
    if (t_pi <= 0.0) throw std::domain_error("pi_pulse_peak_rabi: non-positive duration");
    return kPi / (kBlackmanArea * t_pi);
}

double Pulse::envelope_value(double t) const {
    if (envelope == Envelope::Rectangular) {
        if (t < 0.0 || t > duration) throw std::domain_error("envelope_value: t outside [0,T]");
        return 1.0;
    }
    return blackman_amplitude(t, duration);
}

double Pulse::area() const {
    return peak_rabi * duration * (envelope == Envelope::Blackman ? kBlackmanArea : 1.0);
}

}  // namespace latgate
