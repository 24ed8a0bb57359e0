#pragma once

// One-sided alpha-stable space-time white noise.
//
// The noise has Levy measure m(dz) = c0 z^{-1-alpha} dz on z > 0 per unit of
// space-time, compensated so that every cell increment has mean zero. Three
// sampling routes are offered:
//
//   exact_stable        one exact stable draw per dt x dx cell
//   jump_decomposition  Poisson atoms with z > epsilon, plus the compensating
//                       drift and an optional Gaussian stand-in for z <= epsilon
//   thinned             atoms (s, z, u, v) of the marked measure N0 with
//                       intensity ds m(dz) du dv, accepted when v <= |H|^alpha

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "spde/grid.hpp"
#include "spde/rng.hpp"

namespace spde {

enum class NoiseMode { exact_stable, jump_decomposition, thinned };

inline const char* to_string(NoiseMode m) {
    switch (m) {
        case NoiseMode::exact_stable: return "exact_stable";
        case NoiseMode::jump_decomposition: return "jump_decomposition";
        case NoiseMode::thinned: return "thinned";
    }
    return "?";
}

inline NoiseMode noise_mode_from_string(const std::string& s) {
    if (s == "exact_stable") return NoiseMode::exact_stable;
    if (s == "jump_decomposition") return NoiseMode::jump_decomposition;
    if (s == "thinned") return NoiseMode::thinned;
    throw std::invalid_argument("unknown noise mode '" + s + "'");
}

inline void check_alpha(double alpha) {
    if (!(alpha > 1.0 && alpha < 2.0))
        throw std::domain_error("stability index alpha must lie in (1,2), got " +
                                std::to_string(alpha));
}

/// c0 = alpha (alpha - 1) / Gamma(2 - alpha).
///
/// With this normalisation the Levy-Khintchine exponent of the compensated
/// measure is exactly (-iu)^alpha per unit space-time.
inline double levy_constant(double alpha) {
    check_alpha(alpha);
    return alpha * (alpha - 1.0) / std::tgamma(2.0 - alpha);
}

struct NoiseModel {
    double alpha = 1.5;
    double epsilon = 1e-3;
    double dt = 2.5e-4;
    double dx = 20.0 / 512;
    double half_width = 10.0;
    std::uint64_t seed = 1;
    NoiseMode mode = NoiseMode::exact_stable;
    /// Replace the discarded jumps z <= epsilon by a Gaussian of equal variance
    /// (jump_decomposition and thinned modes only).
    bool gaussian_small_jumps = true;

    void validate() const {
        check_alpha(alpha);
        if (!(epsilon > 0.0)) throw std::domain_error("noise: epsilon must be positive");
        if (!(dt > 0.0)) throw std::domain_error("noise: dt must be positive");
        if (!(dx > 0.0)) throw std::domain_error("noise: dx must be positive");
        if (!(half_width > 0.0)) throw std::domain_error("noise: half width must be positive");
    }

    double c0() const { return levy_constant(alpha); }
    double cell_area() const { return dt * dx; }
    double domain_length() const { return 2.0 * half_width; }
};

struct JumpEvent {
    double s = 0.0;
    double z = 0.0;
    double u = 0.0;
    std::optional<double> v;

    friend bool operator==(const JumpEvent&, const JumpEvent&) = default;
};

struct JumpStream {
    std::vector<JumpEvent> events;
    double t0 = 0.0;
    double t1 = 0.0;
    double truncation = 0.0;
    bool thinned = false;

    friend bool operator==(const JumpStream&, const JumpStream&) = default;
};

/// Lexicographic (s, u, z) order used for every stream.
inline void sort_events(std::vector<JumpEvent>& events) {
    std::sort(events.begin(), events.end(), [](const JumpEvent& a, const JumpEvent& b) {
        return std::tie(a.s, a.u, a.z) < std::tie(b.s, b.u, b.z);
    });
}

/// Mean number of atoms with z > epsilon in a window x region.
inline double large_jump_rate(const NoiseModel& model, double window_length, double region_length) {
    if (!(window_length > 0.0) || !(region_length > 0.0))
        throw std::domain_error("large_jump_rate: window and region must be positive");
    const double a = model.alpha;
    return window_length * region_length * model.c0() * std::pow(model.epsilon, -a) / a;
}

/// -int_{epsilon}^inf z m(dz): drift per unit space-time re-centring the
/// truncated jump sum.
inline double small_jump_compensation(const NoiseModel& model) {
    const double a = model.alpha;
    return -model.c0() * std::pow(model.epsilon, 1.0 - a) / (a - 1.0);
}

/// int_0^{epsilon} z^2 m(dz): variance per unit space-time of the jumps below
/// the truncation.
inline double small_jump_variance(const NoiseModel& model) {
    const double a = model.alpha;
    return model.c0() * std::pow(model.epsilon, 2.0 - a) / (2.0 - a);
}

/// Jump size above epsilon by inversion of 1 - (epsilon/z)^alpha.
inline double sample_pareto_jump(double alpha, double epsilon, Rng& rng) {
    return epsilon * std::pow(rng.uniform(), -1.0 / alpha);
}

inline JumpStream sample_large_jumps(const NoiseModel& model, double t0, double t1, Rng& rng) {
    model.validate();
    if (!(t1 > t0)) throw std::domain_error("sample_large_jumps: empty window");
    JumpStream out;
    out.t0 = t0;
    out.t1 = t1;
    out.truncation = model.epsilon;
    const auto count = rng.poisson(large_jump_rate(model, t1 - t0, model.domain_length()));
    out.events.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        JumpEvent e;
        e.s = rng.uniform(t0, t1);
        e.u = rng.uniform(-model.half_width, model.half_width);
        e.z = sample_pareto_jump(model.alpha, model.epsilon, rng);
        out.events.push_back(e);
    }
    sort_events(out.events);
    return out;
}

inline JumpStream sample_large_jumps(const NoiseModel& model, double t0, double t1) {
    Rng rng(model.seed);
    return sample_large_jumps(model, t0, t1, rng);
}

/// Atoms of N0 with z > epsilon and marks v in (0, v_max).
inline JumpStream sample_marked_jumps(const NoiseModel& model, double t0, double t1,
                                      double v_max, Rng& rng) {
    model.validate();
    if (!(t1 > t0)) throw std::domain_error("sample_marked_jumps: empty window");
    JumpStream out;
    out.t0 = t0;
    out.t1 = t1;
    out.truncation = model.epsilon;
    out.thinned = true;
    if (!(v_max > 0.0)) return out;
    const double rate = large_jump_rate(model, t1 - t0, model.domain_length()) * v_max;
    const auto count = rng.poisson(rate);
    out.events.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        JumpEvent e;
        e.s = rng.uniform(t0, t1);
        e.u = rng.uniform(-model.half_width, model.half_width);
        e.z = sample_pareto_jump(model.alpha, model.epsilon, rng);
        e.v = rng.uniform(0.0, v_max);
        out.events.push_back(e);
    }
    sort_events(out.events);
    return out;
}

// ---------------------------------------------------------------------------
// Exact stable cell increments

/// Scale sigma of the S(alpha, beta = 1, sigma, 0) law whose characteristic
/// function is exp{area * (-iu)^alpha}.
inline double stable_scale(double alpha, double area) {
    return std::pow(-area * std::cos(0.5 * M_PI * alpha), 1.0 / alpha);
}

/// Closed-form characteristic function of the compensated noise over a region
/// of the given space-time area.
inline std::complex<double> stable_cf(double alpha, double area, double u) {
    if (u == 0.0) return {1.0, 0.0};
    const double mag = area * std::pow(std::abs(u), alpha);
    const double phase = -0.5 * M_PI * alpha * (u > 0.0 ? 1.0 : -1.0);
    return std::exp(std::complex<double>(mag * std::cos(phase), mag * std::sin(phase)));
}

/// Standard totally skewed (beta = 1) strictly stable variate, unit scale,
/// zero mean, via the Chambers-Mallows-Stuck representation.
inline double sample_standard_skewed_stable(double alpha, Rng& rng) {
    const double half_pi = 0.5 * M_PI;
    const double tan_term = std::tan(half_pi * alpha);
    const double shift = std::atan(tan_term) / alpha;
    const double scale = std::pow(1.0 + tan_term * tan_term, 0.5 / alpha);
    const double v = rng.uniform(-half_pi, half_pi);
    const double w = rng.exponential();
    const double av = alpha * (v + shift);
    return scale * std::sin(av) / std::pow(std::cos(v), 1.0 / alpha) *
           std::pow(std::cos(v - av) / w, (1.0 - alpha) / alpha);
}

inline double sample_stable(double alpha, double area, Rng& rng) {
    return stable_scale(alpha, area) * sample_standard_skewed_stable(alpha, rng);
}

/// One increment of L over a dt x dx cell.
inline double sample_stable_cell(const NoiseModel& model, Rng& rng) {
    if (model.mode != NoiseMode::exact_stable)
        throw std::logic_error("sample_stable_cell requires exact_stable mode");
    return sample_stable(model.alpha, model.cell_area(), rng);
}

// ---------------------------------------------------------------------------
// Thinning between N and the marked measure N0

/// Noise coefficient evaluated on the frozen field at each atom's cell.
inline double coefficient_at(const JumpEvent& e, const FieldState& field,
                             const std::function<double(double)>& h) {
    return h(field.values[static_cast<std::size_t>(field.grid.cell_of(e.u))]);
}

/// N -> N0. An atom (s, z, u) with h = H(X_{s-}(u)) != 0 becomes
/// (s, z|h|, u, v) with v uniform on (0, |h|^alpha); at zeros of H it is
/// re-emitted unchanged with v uniform on (0, 1). Applying the map theta to
/// the output returns the input atoms.
inline JumpStream thinning_transform(const JumpStream& stream, const FieldState& field,
                                     const std::function<double(double)>& h, double alpha,
                                     Rng& rng) {
    if (stream.thinned) throw std::invalid_argument("thinning_transform: stream is already thinned");
    check_alpha(alpha);
    JumpStream out;
    out.t0 = stream.t0;
    out.t1 = stream.t1;
    out.truncation = stream.truncation;
    out.thinned = true;
    out.events.reserve(stream.events.size());
    for (const auto& e : stream.events) {
        const double hv = coefficient_at(e, field, h);
        JumpEvent m = e;
        if (hv != 0.0) {
            const double ah = std::abs(hv);
            m.z = e.z * ah;
            m.v = rng.uniform() * std::pow(ah, alpha);
        } else {
            m.v = rng.uniform();
        }
        out.events.push_back(m);
    }
    sort_events(out.events);
    return out;
}

/// N0 -> N through theta: accepted atoms map to (s, z/|h|, u); atoms at zeros
/// of H are kept when v lies in (0, 1); everything else is sent to infinity
/// (dropped).
inline JumpStream inverse_thinning(const JumpStream& marked, const FieldState& field,
                                   const std::function<double(double)>& h, double alpha) {
    if (!marked.thinned) throw std::invalid_argument("inverse_thinning: stream carries no marks");
    check_alpha(alpha);
    JumpStream out;
    out.t0 = marked.t0;
    out.t1 = marked.t1;
    out.truncation = marked.truncation;
    for (const auto& e : marked.events) {
        const double hv = coefficient_at(e, field, h);
        const double v = e.v.value_or(std::numeric_limits<double>::quiet_NaN());
        if (hv != 0.0) {
            const double ah = std::abs(hv);
            if (v <= std::pow(ah, alpha)) out.events.push_back({e.s, e.z / ah, e.u, std::nullopt});
        } else if (v > 0.0 && v < 1.0) {
            out.events.push_back({e.s, e.z, e.u, std::nullopt});
        }
    }
    sort_events(out.events);
    return out;
}

/// sum over atoms of z H(X(u)) f(u): the uncompensated jump part of the
/// noise integral for an unmarked stream.
inline double noise_functional(const JumpStream& stream, const FieldState& field,
                               const std::function<double(double)>& h,
                               const std::function<double(double)>& f) {
    double acc = 0.0;
    for (const auto& e : stream.events) acc += e.z * coefficient_at(e, field, h) * f(e.u);
    return acc;
}

/// sum over atoms of z sgn(H) f(u) 1{v <= |H|^alpha} for a marked stream.
inline double marked_noise_functional(const JumpStream& stream, const FieldState& field,
                                      const std::function<double(double)>& h,
                                      const std::function<double(double)>& f, double alpha) {
    double acc = 0.0;
    for (const auto& e : stream.events) {
        const double hv = coefficient_at(e, field, h);
        if (hv == 0.0) continue;
        const double ah = std::abs(hv);
        if (*e.v <= std::pow(ah, alpha)) acc += e.z * (hv > 0.0 ? 1.0 : -1.0) * f(e.u);
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Per-step noise slices handed to the integrator

/// Increment of L in every grid cell over one time step.
struct CellIncrements {
    std::vector<double> dL;
};

/// Marked atoms for one step plus the per-cell normals standing in for the
/// small marked jumps. `v_max` bounds the marks that were sampled.
struct MarkedSlice {
    JumpStream atoms;
    std::vector<double> small_jump_normals;
    double v_max = 0.0;
};

using NoiseSlice = std::variant<CellIncrements, MarkedSlice>;

/// Effective H(X_j) dL_j in every cell for a marked slice, given H evaluated
/// on the pre-jump field.
inline std::vector<double> marked_cell_increments(const MarkedSlice& slice,
                                                  std::span<const double> h_values,
                                                  const Grid1D& grid, const NoiseModel& model) {
    const auto n = static_cast<std::size_t>(grid.size());
    std::vector<double> out(n, 0.0);
    for (double hv : h_values) {
        if (std::pow(std::abs(hv), model.alpha) > slice.v_max * (1.0 + 1e-12))
            throw std::logic_error("marked slice sampled with v_max below |H|^alpha");
    }
    for (const auto& e : slice.atoms.events) {
        const auto j = static_cast<std::size_t>(grid.cell_of(e.u));
        const double hv = h_values[j];
        if (hv == 0.0) continue;
        if (*e.v <= std::pow(std::abs(hv), model.alpha)) out[j] += e.z * (hv > 0.0 ? 1.0 : -1.0);
    }
    const double area = model.cell_area();
    const double comp = small_jump_compensation(model) * area;
    const double small_sd = std::sqrt(small_jump_variance(model) * area);
    for (std::size_t j = 0; j < n; ++j) {
        const double hv = h_values[j];
        if (hv == 0.0) continue;
        const double sgn = hv > 0.0 ? 1.0 : -1.0;
        const double weight = std::pow(std::abs(hv), model.alpha);
        out[j] += sgn * weight * comp;
        if (!slice.small_jump_normals.empty())
            out[j] += sgn * std::sqrt(weight) * small_sd * slice.small_jump_normals[j];
    }
    return out;
}

/// Draws the per-step noise for a grid. One source owns one RNG stream; a
/// run is reproducible from (model.seed, grid).
class NoiseSource {
public:
    NoiseSource(NoiseModel model, Grid1D grid) : model_(model), grid_(grid), rng_(model.seed) {
        model_.validate();
        if (std::abs(model_.dx - grid_.dx()) > 1e-12 * grid_.dx())
            throw std::invalid_argument("NoiseSource: model dx does not match grid");
        if (std::abs(model_.half_width - grid_.half_width()) > 1e-12 * grid_.half_width())
            throw std::invalid_argument("NoiseSource: model half width does not match grid");
    }

    const NoiseModel& model() const { return model_; }

    /// Unmarked increments for the step [t, t + dt].
    CellIncrements increments(double t) {
        const auto n = static_cast<std::size_t>(grid_.size());
        CellIncrements out{std::vector<double>(n, 0.0)};
        switch (model_.mode) {
            case NoiseMode::exact_stable: {
                const double sigma = stable_scale(model_.alpha, model_.cell_area());
                for (auto& d : out.dL) d = sigma * sample_standard_skewed_stable(model_.alpha, rng_);
                break;
            }
            case NoiseMode::jump_decomposition: {
                const auto stream = sample_large_jumps(model_, t, t + model_.dt, rng_);
                for (const auto& e : stream.events)
                    out.dL[static_cast<std::size_t>(grid_.cell_of(e.u))] += e.z;
                const double comp = small_jump_compensation(model_) * model_.cell_area();
                const double sd = std::sqrt(small_jump_variance(model_) * model_.cell_area());
                for (auto& d : out.dL) {
                    d += comp;
                    if (model_.gaussian_small_jumps) d += sd * rng_.normal();
                }
                break;
            }
            case NoiseMode::thinned:
                throw std::logic_error("NoiseSource: thinned mode draws marked slices");
        }
        return out;
    }

    MarkedSlice marked(double t, double v_max) {
        MarkedSlice out;
        out.v_max = v_max;
        out.atoms = sample_marked_jumps(model_, t, t + model_.dt, v_max, rng_);
        if (model_.gaussian_small_jumps) {
            out.small_jump_normals.resize(static_cast<std::size_t>(grid_.size()));
            for (auto& g : out.small_jump_normals) g = rng_.normal();
        }
        return out;
    }

private:
    NoiseModel model_;
    Grid1D grid_;
    Rng rng_;
};

// ---------------------------------------------------------------------------
// Binary dump: 16-byte header ("SPDEJMP1", u32 count, u32 reserved) followed
// by little-endian f64 records (s, z, u, v-or-NaN).

namespace detail {
inline void put_u32(std::string& buf, std::uint32_t x) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((x >> (8 * i)) & 0xFF));
}
inline void put_f64(std::string& buf, double d) {
    const auto x = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((x >> (8 * i)) & 0xFF));
}
inline std::uint32_t get_u32(const unsigned char* p) {
    std::uint32_t x = 0;
    for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return x;
}
inline double get_f64(const unsigned char* p) {
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return std::bit_cast<double>(x);
}
}  // namespace detail

inline constexpr char kJumpMagic[8] = {'S', 'P', 'D', 'E', 'J', 'M', 'P', '1'};

inline std::string encode_jump_stream(const JumpStream& stream) {
    if (stream.events.size() > std::numeric_limits<std::uint32_t>::max())
        throw std::length_error("jump stream too long for binary dump");
    std::string buf(kJumpMagic, kJumpMagic + 8);
    detail::put_u32(buf, static_cast<std::uint32_t>(stream.events.size()));
    detail::put_u32(buf, 0);
    for (const auto& e : stream.events) {
        detail::put_f64(buf, e.s);
        detail::put_f64(buf, e.z);
        detail::put_f64(buf, e.u);
        detail::put_f64(buf, e.v.value_or(std::numeric_limits<double>::quiet_NaN()));
    }
    return buf;
}

/// Inverse of encode_jump_stream. Window and truncation are not stored; the
/// stream counts as marked when any record carries a v.
inline JumpStream decode_jump_stream(std::string_view bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kJumpMagic, 8) != 0)
        throw std::runtime_error("jump dump: bad header");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::uint32_t count = detail::get_u32(p + 8);
    if (bytes.size() != 16 + 32 * static_cast<std::size_t>(count))
        throw std::runtime_error("jump dump: size does not match record count");
    JumpStream out;
    out.events.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto* r = p + 16 + 32 * static_cast<std::size_t>(i);
        JumpEvent e{detail::get_f64(r), detail::get_f64(r + 8), detail::get_f64(r + 16), std::nullopt};
        const double v = detail::get_f64(r + 24);
        if (!std::isnan(v)) {
            e.v = v;
            out.thinned = true;
        }
        out.events.push_back(e);
    }
    if (!out.events.empty()) {
        out.t0 = out.events.front().s;
        out.t1 = out.events.back().s;
    }
    return out;
}

inline void write_jump_stream(const std::string& path, const JumpStream& stream) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    const auto buf = encode_jump_stream(stream);
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!os) throw std::runtime_error("write failed for '" + path + "'");
}

inline JumpStream read_jump_stream(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open '" + path + "' for reading");
    std::string buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return decode_jump_stream(buf);
}

}  // namespace spde
