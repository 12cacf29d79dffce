#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <vector>

#include "core.hpp"

namespace qcs {

// Cell-centred lattice over [x0,x1] x [y0,y1]; value (i, j) sits at the centre of cell column i, row j.
struct GridSpec {
    double x0 = -1, x1 = 1, y0 = -1, y1 = 1;
    int nx = 0, ny = 0;

    static GridSpec square(cplx center, double half_width, int n) {
        return {center.real() - half_width, center.real() + half_width, center.imag() - half_width,
                center.imag() + half_width, n, n};
    }
    double hx() const { return (x1 - x0) / nx; }
    double hy() const { return (y1 - y0) / ny; }
    double h() const { return std::max(hx(), hy()); }
    std::size_t size() const { return static_cast<std::size_t>(nx) * ny; }
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx + i; }
    cplx center(int i, int j) const { return {x0 + (i + 0.5) * hx(), y0 + (j + 0.5) * hy()}; }
    cplx center(std::size_t k) const { return center(static_cast<int>(k % nx), static_cast<int>(k / nx)); }
    bool contains(cplx z) const { return z.real() >= x0 && z.real() <= x1 && z.imag() >= y0 && z.imag() <= y1; }
    // cell holding z, or -1
    long cell_of(cplx z) const {
        if (!contains(z)) return -1;
        int i = std::min(nx - 1, static_cast<int>((z.real() - x0) / hx()));
        int j = std::min(ny - 1, static_cast<int>((z.imag() - y0) / hy()));
        return static_cast<long>(index(i, j));
    }
    bool operator==(const GridSpec&) const = default;
    void validate() const {
        if (nx < 1 || ny < 1 || !(x1 > x0) || !(y1 > y0)) throw Error("invalid-grid", "empty lattice");
    }
};

class GridField {
public:
    GridField() = default;
    explicit GridField(GridSpec s) : spec_(s), v_(s.size(), cplx(0)) { s.validate(); }
    GridField(GridSpec s, std::vector<cplx> v) : spec_(s), v_(std::move(v)) {
        s.validate();
        if (v_.size() != s.size()) throw Error("invalid-grid", "value count does not match the lattice");
        for (auto& z : v_)
            if (!is_finite(z)) throw Error("invalid-grid", "non-finite value");
    }

    const GridSpec& spec() const { return spec_; }
    std::vector<cplx>& values() { return v_; }
    const std::vector<cplx>& values() const { return v_; }
    cplx& operator()(int i, int j) { return v_[spec_.index(i, j)]; }
    cplx operator()(int i, int j) const { return v_[spec_.index(i, j)]; }
    cplx& operator[](std::size_t k) { return v_[k]; }
    cplx operator[](std::size_t k) const { return v_[k]; }

    double sup_norm() const {
        double s = 0;
        for (auto& z : v_) s = std::max(s, std::abs(z));
        return s;
    }
    double l2_norm() const {
        double s = 0;
        for (auto& z : v_) s += std::norm(z);
        return std::sqrt(s * spec_.hx() * spec_.hy());
    }

    // bilinear between cell centres, zero beyond the outer half cell
    cplx interpolate(cplx z) const {
        double u = (z.real() - spec_.x0) / spec_.hx() - 0.5, w = (z.imag() - spec_.y0) / spec_.hy() - 0.5;
        int i = static_cast<int>(std::floor(u)), j = static_cast<int>(std::floor(w));
        double fu = u - i, fw = w - j;
        auto at = [&](int a, int b) -> cplx {
            if (a < 0 || b < 0 || a >= spec_.nx || b >= spec_.ny) return 0.0;
            return (*this)(a, b);
        };
        return (1 - fu) * (1 - fw) * at(i, j) + fu * (1 - fw) * at(i + 1, j) + (1 - fu) * fw * at(i, j + 1) +
               fu * fw * at(i + 1, j + 1);
    }

    // true when the four interpolation nodes around z agree on being zero or non-zero
    bool smooth_at(cplx z) const {
        double u = (z.real() - spec_.x0) / spec_.hx() - 0.5, w = (z.imag() - spec_.y0) / spec_.hy() - 0.5;
        int i = static_cast<int>(std::floor(u)), j = static_cast<int>(std::floor(w));
        int nz = 0;
        for (int b = j; b <= j + 1; ++b)
            for (int a = i; a <= i + 1; ++a) {
                bool in = a >= 0 && b >= 0 && a < spec_.nx && b < spec_.ny;
                nz += (in && (*this)(a, b) != cplx(0)) ? 1 : 0;
            }
        return nz == 0 || nz == 4;
    }

    // largest difference between the four interpolation nodes around z
    double local_spread(cplx z) const {
        double u = (z.real() - spec_.x0) / spec_.hx() - 0.5, w = (z.imag() - spec_.y0) / spec_.hy() - 0.5;
        int i = static_cast<int>(std::floor(u)), j = static_cast<int>(std::floor(w));
        cplx n[4];
        int c = 0;
        for (int b = j; b <= j + 1; ++b)
            for (int a = i; a <= i + 1; ++a)
                n[c++] = (a >= 0 && b >= 0 && a < spec_.nx && b < spec_.ny) ? (*this)(a, b) : cplx(0);
        double s = 0;
        for (int x = 0; x < 4; ++x)
            for (int y = x + 1; y < 4; ++y) s = std::max(s, std::abs(n[x] - n[y]));
        return s;
    }

private:
    GridSpec spec_;
    std::vector<cplx> v_;
};

// Beltrami coefficients on a lattice; sup-norm must stay below 1
class BeltramiField : public GridField {
public:
    BeltramiField() = default;
    explicit BeltramiField(GridSpec s) : GridField(s) {}
    BeltramiField(GridSpec s, std::vector<cplx> v) : GridField(s, std::move(v)) {
        if (sup_norm() >= 1.0) throw Error("invalid-beltrami", "sup-norm must be below 1");
    }
    std::size_t support_size() const {
        std::size_t n = 0;
        for (auto& z : values()) n += z != cplx(0);
        return n;
    }
};

// ---------------------------------------------------------------------------
// little-endian binary grid files: [kind byte] u32 width, u32 height, f64 x0 x1 y0 y1, then (re, im) f64 row-major

namespace io {

template <class T>
void put_le(std::ostream& os, T x) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &x, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
    unsigned char b[sizeof(T)];
    if (!is.read(reinterpret_cast<char*>(b), sizeof(T))) throw Error("io-error", "truncated grid file");
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    T x;
    std::memcpy(&x, b, sizeof(T));
    return x;
}

inline void write_grid(std::ostream& os, const GridField& f) {
    const GridSpec& s = f.spec();
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.nx));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.ny));
    for (double b : {s.x0, s.x1, s.y0, s.y1}) put_le<double>(os, b);
    for (auto& z : f.values()) {
        put_le<double>(os, z.real());
        put_le<double>(os, z.imag());
    }
}

inline GridField read_grid(std::istream& is) {
    GridSpec s;
    s.nx = static_cast<int>(get_le<std::uint32_t>(is));
    s.ny = static_cast<int>(get_le<std::uint32_t>(is));
    s.x0 = get_le<double>(is);
    s.x1 = get_le<double>(is);
    s.y0 = get_le<double>(is);
    s.y1 = get_le<double>(is);
    s.validate();
    std::vector<cplx> v(s.size());
    for (auto& z : v) {
        double re = get_le<double>(is);
        double im = get_le<double>(is);
        z = {re, im};
    }
    return GridField(s, std::move(v));
}

inline void write_beltrami(const std::string& path, const BeltramiField& f) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("io-error", "cannot open " + path);
    write_grid(os, f);
}

inline BeltramiField read_beltrami(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("io-error", "cannot open " + path);
    GridField g = read_grid(is);
    return BeltramiField(g.spec(), g.values());
}

// binary P6; rgb holds 3 bytes per cell in grid order, rows are flipped so +imag is up
inline void write_ppm(const std::string& path, const GridSpec& g, const std::vector<std::uint8_t>& rgb) {
    if (rgb.size() != 3 * g.size()) throw Error("invalid-argument", "pixel count does not match the lattice");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("io-error", "cannot open " + path);
    os << "P6\n" << g.nx << " " << g.ny << "\n255\n";
    for (int j = g.ny - 1; j >= 0; --j)
        os.write(reinterpret_cast<const char*>(rgb.data() + 3 * g.index(0, j)), 3 * static_cast<std::streamsize>(g.nx));
}

}  // namespace io
}  // namespace qcs
