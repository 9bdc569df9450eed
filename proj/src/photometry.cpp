#include "vlp/photometry.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "vlp/errors.hpp"

namespace vlp::render {

PolarCurve::PolarCurve(std::vector<PolarSample> samples) : samples_(std::move(samples)) {
    if (samples_.size() < 2) throw std::invalid_argument("polar curve needs at least two samples");
    if (samples_.front().angle_deg != 0.0) throw std::invalid_argument("polar curve must start at 0 degrees");
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        const auto& s = samples_[i];
        if (!std::isfinite(s.angle_deg) || !std::isfinite(s.intensity_cd))
            throw std::invalid_argument("polar curve values must be finite");
        if (s.angle_deg > 90.0) throw std::invalid_argument("polar curve angle above 90 degrees");
        if (s.intensity_cd < 0.0) throw std::invalid_argument("negative intensity");
        if (i > 0 && !(s.angle_deg > samples_[i - 1].angle_deg))
            throw std::invalid_argument("polar curve angles must increase strictly");
    }
}

double PolarCurve::intensity_at(double angle_deg) const {
    if (samples_.empty() || angle_deg < 0.0) return 0.0;
    if (angle_deg > samples_.back().angle_deg) return 0.0;
    for (std::size_t i = 1; i < samples_.size(); ++i) {
        const auto& a = samples_[i - 1];
        const auto& b = samples_[i];
        if (angle_deg <= b.angle_deg) {
            const double t = (angle_deg - a.angle_deg) / (b.angle_deg - a.angle_deg);
            return a.intensity_cd + t * (b.intensity_cd - a.intensity_cd);
        }
    }
    return samples_.back().intensity_cd;
}

namespace {

class Tokens {
public:
    explicit Tokens(std::string_view text) : text_(text) {}

    bool next(std::string_view& out) {
        while (pos_ < text_.size() && (std::isspace(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == ','))
            ++pos_;
        if (pos_ >= text_.size()) return false;
        const std::size_t start = pos_;
        while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) && text_[pos_] != ',')
            ++pos_;
        out = text_.substr(start, pos_ - start);
        return true;
    }

    double number(const char* what) {
        std::string_view tok;
        if (!next(tok)) throw MalformedIes(std::string("missing ") + what);
        double value = 0.0;
        const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), value);
        if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
            throw MalformedIes(std::string("non-numeric ") + what + ": '" + std::string(tok) + "'");
        return value;
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
};

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

}  // namespace

PolarCurve parse_ies(std::string_view text) {
    // Header: everything up to and including the TILT= line.
    std::size_t pos = 0;
    std::string tilt;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const std::string_view line = trim(text.substr(pos, end - pos));
        pos = end + 1;
        if (line.rfind("TILT=", 0) == 0) {
            tilt = std::string(line.substr(5));
            break;
        }
    }
    if (tilt.empty()) throw MalformedIes("missing TILT line");

    Tokens tok(pos < text.size() ? text.substr(pos) : std::string_view{});
    if (tilt == "INCLUDE") {
        tok.number("tilt geometry");
        const int pairs = static_cast<int>(tok.number("tilt pair count"));
        if (pairs < 0) throw MalformedIes("negative tilt pair count");
        for (int i = 0; i < 2 * pairs; ++i) tok.number("tilt table value");
    } else if (tilt != "NONE") {
        // External tilt files only scale by lamp tilt; ignored.
    }

    tok.number("lamp count");
    tok.number("lumens per lamp");
    const double multiplier = tok.number("candela multiplier");
    const double n_vertical = tok.number("vertical angle count");
    const double n_horizontal = tok.number("horizontal angle count");
    if (n_vertical < 2 || n_horizontal < 1 || n_vertical != std::floor(n_vertical) ||
        n_horizontal != std::floor(n_horizontal))
        throw MalformedIes("invalid angle counts");
    tok.number("photometric type");
    tok.number("units type");
    tok.number("width");
    tok.number("length");
    tok.number("height");
    tok.number("ballast factor");
    tok.number("future use");
    tok.number("input watts");

    const auto nv = static_cast<std::size_t>(n_vertical);
    const auto nh = static_cast<std::size_t>(n_horizontal);
    std::vector<double> vertical(nv);
    for (auto& a : vertical) a = tok.number("vertical angle");
    for (std::size_t i = 1; i < nv; ++i)
        if (!(vertical[i] > vertical[i - 1])) throw MalformedIes("vertical angles not increasing");
    for (std::size_t i = 0; i < nh; ++i) tok.number("horizontal angle");
    std::vector<double> candela(nv);
    for (auto& c : candela) c = tok.number("candela value") * multiplier;
    for (std::size_t i = nv; i < nv * nh; ++i) tok.number("candela value");

    std::vector<PolarSample> samples;
    for (std::size_t i = 0; i < nv; ++i)
        if (vertical[i] >= 0.0 && vertical[i] <= 90.0) samples.push_back({vertical[i], candela[i]});
    try {
        return PolarCurve(std::move(samples));
    } catch (const std::invalid_argument& e) {
        throw MalformedIes(e.what());
    }
}

std::string write_ies(const PolarCurve& curve, double lumens) {
    std::ostringstream out;
    out.precision(17);
    const auto& s = curve.samples();
    out << "IESNA:LM-63-2002\n[TEST] synthetic\n[MANUFAC] vlp\nTILT=NONE\n";
    out << "1 " << lumens << " 1 " << s.size() << " 1 1 2 0.595 0.595 0\n";
    out << "1 1 0\n";
    for (std::size_t i = 0; i < s.size(); ++i) out << (i ? " " : "") << s[i].angle_deg;
    out << "\n0\n";
    for (std::size_t i = 0; i < s.size(); ++i) out << (i ? " " : "") << s[i].intensity_cd;
    out << "\n";
    return out.str();
}

PolarCurve lambertian_default(double flux_lm) {
    if (!(flux_lm > 0.0)) throw std::invalid_argument("flux must be positive");
    std::vector<PolarSample> samples;
    const double peak = flux_lm / std::numbers::pi;
    for (int deg = 0; deg <= 90; deg += 5) {
        const double value = deg == 90 ? 0.0 : peak * std::cos(deg * std::numbers::pi / 180.0);
        samples.push_back({static_cast<double>(deg), value});
    }
    return PolarCurve(std::move(samples));
}

double hemisphere_flux(const PolarCurve& curve) {
    const auto& s = curve.samples();
    const double k = std::numbers::pi / 180.0;
    double total = 0.0;
    for (std::size_t i = 1; i < s.size(); ++i) {
        const double a = s[i - 1].angle_deg * k, b = s[i].angle_deg * k;
        const double fa = s[i - 1].intensity_cd * 2.0 * std::numbers::pi * std::sin(a);
        const double fb = s[i].intensity_cd * 2.0 * std::numbers::pi * std::sin(b);
        total += 0.5 * (fa + fb) * (b - a);
    }
    return total;
}

}  // namespace vlp::render
