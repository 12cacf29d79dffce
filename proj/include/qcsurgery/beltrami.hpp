#pragma once

#include <fftw3.h>

#include <Eigen/Dense>
#include <memory>
#include <sstream>

#include "surgery.hpp"

namespace qcs {

namespace detail {

// in-place 2-D complex transform on an owned buffer; rows = ny, cols = nx
class Fft2d {
public:
    Fft2d(int nx, int ny) : nx_(nx), ny_(ny) {
        buf_ = static_cast<cplx*>(fftw_malloc(sizeof(cplx) * size()));
        if (!buf_) throw std::bad_alloc();
        auto* b = reinterpret_cast<fftw_complex*>(buf_);
        fwd_ = fftw_plan_dft_2d(ny, nx, b, b, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_2d(ny, nx, b, b, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    ~Fft2d() {
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_free(buf_);
    }
    Fft2d(const Fft2d&) = delete;
    Fft2d& operator=(const Fft2d&) = delete;

    std::size_t size() const { return static_cast<std::size_t>(nx_) * ny_; }
    cplx* data() { return buf_; }
    cplx& at(int i, int j) { return buf_[static_cast<std::size_t>(j) * nx_ + i]; }
    void forward() { fftw_execute(fwd_); }
    void backward() { fftw_execute(bwd_); }

    // zero-padded copy of an nx/2 x ny/2 block into the lower-left corner
    void load(const std::vector<cplx>& v, int w, int h) {
        std::fill(buf_, buf_ + size(), cplx(0));
        for (int j = 0; j < h; ++j)
            for (int i = 0; i < w; ++i) at(i, j) = v[static_cast<std::size_t>(j) * w + i];
    }
    void store(std::vector<cplx>& v, int w, int h) {
        const double s = 1.0 / size();
        v.resize(static_cast<std::size_t>(w) * h);
        for (int j = 0; j < h; ++j)
            for (int i = 0; i < w; ++i) v[static_cast<std::size_t>(j) * w + i] = at(i, j) * s;
    }

private:
    int nx_, ny_;
    cplx* buf_;
    fftw_plan fwd_, bwd_;
};

inline int wrapped_frequency(int k, int n) { return k <= n / 2 ? k : k - n; }

// integral of 1/w over [x0,x1] x [y0,y1]
inline cplx cell_integral(double x0, double x1, double y0, double y1) {
    auto F = [](double x, double y) {
        double r2 = x * x + y * y;
        double L = r2 > 0 ? std::log(r2) : 0.0;
        double ax = x == 0 ? 0.0 : x * std::atan(y / x);
        double ay = y == 0 ? 0.0 : y * std::atan(x / y);
        // d2/dxdy of re = x/(x^2+y^2), of im = y/(x^2+y^2); the linear terms cancel in differences
        return cplx(0.5 * y * L + ax, -(0.5 * x * L + ay));
    };
    return F(x1, y1) - F(x0, y1) - F(x1, y0) + F(x0, y0);
}

inline void require_interior_support(const GridField& f) {
    const GridSpec& g = f.spec();
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            bool edge = i == 0 || j == 0 || i == g.nx - 1 || j == g.ny - 1;
            if (edge && f(i, j) != cplx(0))
                throw Error("wraparound-contamination", "support touches the lattice boundary");
        }
}

}  // namespace detail

// S on a lattice: Fourier multiplier conj(xi)/xi on a twice padded copy
class BeurlingOperator {
public:
    explicit BeurlingOperator(const GridSpec& g) : g_(g), fft_(2 * g.nx, 2 * g.ny) {
        g.validate();
        int NX = 2 * g.nx, NY = 2 * g.ny;
        m_.resize(fft_.size());
        for (int j = 0; j < NY; ++j)
            for (int i = 0; i < NX; ++i) {
                cplx xi(detail::wrapped_frequency(i, NX) / (NX * g.hx()), detail::wrapped_frequency(j, NY) / (NY * g.hy()));
                m_[static_cast<std::size_t>(j) * NX + i] = xi == cplx(0) ? cplx(0) : std::conj(xi) / xi;
            }
    }
    const GridSpec& spec() const { return g_; }

    void apply(const std::vector<cplx>& in, std::vector<cplx>& out) {
        fft_.load(in, g_.nx, g_.ny);
        fft_.forward();
        cplx* b = fft_.data();
        for (std::size_t k = 0; k < m_.size(); ++k) b[k] *= m_[k];
        fft_.backward();
        fft_.store(out, g_.nx, g_.ny);
    }

private:
    GridSpec g_;
    detail::Fft2d fft_;
    std::vector<cplx> m_;
};

// Ch(z) = -(1/pi) int h(w) / (w - z) dA(w) for h constant on cells, integrated exactly over each cell
class CauchyOperator {
public:
    explicit CauchyOperator(const GridSpec& g) : g_(g), fft_(2 * g.nx, 2 * g.ny) {
        g.validate();
        int NX = 2 * g.nx, NY = 2 * g.ny;
        double hx = g.hx(), hy = g.hy();
        k_.resize(fft_.size());
        for (int j = 0; j < NY; ++j)
            for (int i = 0; i < NX; ++i) {
                double dx = detail::wrapped_frequency(i, NX) * hx, dy = detail::wrapped_frequency(j, NY) * hy;
                // (Ch)(m) = sum_k h_k I(m - k) / pi with I the cell integral of 1/w centred at the offset
                fft_.at(i, j) = detail::cell_integral(dx - hx / 2, dx + hx / 2, dy - hy / 2, dy + hy / 2) / pi;
            }
        fft_.forward();
        std::copy(fft_.data(), fft_.data() + fft_.size(), k_.begin());
    }

    void apply(const std::vector<cplx>& in, std::vector<cplx>& out) {
        fft_.load(in, g_.nx, g_.ny);
        fft_.forward();
        cplx* b = fft_.data();
        for (std::size_t k = 0; k < k_.size(); ++k) b[k] *= k_[k];
        fft_.backward();
        fft_.store(out, g_.nx, g_.ny);
    }

private:
    GridSpec g_;
    detail::Fft2d fft_;
    std::vector<cplx> k_;
};

inline GridField beurling_transform(const GridField& field) {
    detail::require_interior_support(field);
    BeurlingOperator S(field.spec());
    std::vector<cplx> out;
    S.apply(field.values(), out);
    return GridField(field.spec(), std::move(out));
}

inline GridField cauchy_transform(const GridField& field) {
    detail::require_interior_support(field);
    CauchyOperator C(field.spec());
    std::vector<cplx> out;
    C.apply(field.values(), out);
    return GridField(field.spec(), std::move(out));
}

// direct sum of the cell Cauchy integrals at an arbitrary point
inline cplx cauchy_at(const GridSpec& g, const std::vector<std::pair<std::size_t, cplx>>& density, cplx z) {
    cplx s = 0;
    double hx = g.hx(), hy = g.hy();
    for (auto& [k, h] : density) {
        cplx d = z - g.center(k);
        s += h * detail::cell_integral(d.real() - hx / 2, d.real() + hx / 2, d.imag() - hy / 2, d.imag() + hy / 2);
    }
    return s / pi;
}

// f(z) = alpha (z + Ch(z)) + beta with f(0) = 0, f(1) = 1
class NormalizedQcMap {
public:
    NormalizedQcMap() = default;
    NormalizedQcMap(GridField displacement, cplx alpha, cplx beta, std::vector<std::pair<std::size_t, cplx>> density)
        : disp_(std::move(displacement)), alpha_(alpha), beta_(beta), density_(std::move(density)) {}

    const GridField& displacement() const { return disp_; }
    const GridSpec& spec() const { return disp_.spec(); }
    cplx alpha() const { return alpha_; }
    cplx beta() const { return beta_; }
    const std::vector<std::pair<std::size_t, cplx>>& density() const { return density_; }

    // bilinear between cell centres, direct summation outside their hull
    cplx operator()(cplx z) const {
        const GridSpec& g = spec();
        double u = (z.real() - g.x0) / g.hx() - 0.5, w = (z.imag() - g.y0) / g.hy() - 0.5;
        if (u >= 0 && w >= 0 && u <= g.nx - 1 && w <= g.ny - 1) {
            int i = std::min(static_cast<int>(u), g.nx - 2), j = std::min(static_cast<int>(w), g.ny - 2);
            double fu = u - i, fw = w - j;
            cplx d = (1 - fu) * (1 - fw) * disp_(i, j) + fu * (1 - fw) * disp_(i + 1, j) +
                     (1 - fu) * fw * disp_(i, j + 1) + fu * fw * disp_(i + 1, j + 1);
            return z + d;
        }
        return alpha_ * (z + cauchy_at(g, density_, z)) + beta_;
    }

    double sup_displacement() const { return disp_.sup_norm(); }

    // solver diagnostics
    int iterations = 0;
    std::vector<double> trace;
    double residual = 0;

private:
    GridField disp_;
    cplx alpha_ = 1, beta_ = 0;
    std::vector<std::pair<std::size_t, cplx>> density_;
};

namespace io {

inline constexpr std::uint8_t beltrami_kind = 1, qcmap_kind = 2;

inline void write_qcmap(const std::string& path, const NormalizedQcMap& f) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("io-error", "cannot open " + path);
    put_le<std::uint8_t>(os, qcmap_kind);
    write_grid(os, f.displacement());
    for (double x : {f.alpha().real(), f.alpha().imag(), f.beta().real(), f.beta().imag()}) put_le<double>(os, x);
    put_le<std::uint64_t>(os, f.density().size());
    for (auto& [k, h] : f.density()) {
        put_le<std::uint64_t>(os, k);
        put_le<double>(os, h.real());
        put_le<double>(os, h.imag());
    }
}

inline NormalizedQcMap read_qcmap(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("io-error", "cannot open " + path);
    if (get_le<std::uint8_t>(is) != qcmap_kind) throw Error("io-error", "not a quasiconformal map file");
    GridField d = read_grid(is);
    double v[4];
    for (double& x : v) x = get_le<double>(is);
    auto n = get_le<std::uint64_t>(is);
    if (n > d.spec().size()) throw Error("io-error", "density longer than the lattice");
    std::vector<std::pair<std::size_t, cplx>> dens(n);
    for (auto& [k, h] : dens) {
        k = get_le<std::uint64_t>(is);
        if (k >= d.spec().size()) throw Error("io-error", "density index out of range");
        double re = get_le<double>(is);
        double im = get_le<double>(is);
        h = {re, im};
    }
    return NormalizedQcMap(std::move(d), {v[0], v[1]}, {v[2], v[3]}, std::move(dens));
}

}  // namespace io

// |f_zbar - mu f_z| over cells whose 3x3 neighbourhood of mu is all zero or all non-zero
inline double beltrami_residual(const GridField& disp, const GridField& mu) {
    const GridSpec& g = disp.spec();
    double r = 0;
    for (int j = 1; j + 1 < g.ny; ++j)
        for (int i = 1; i + 1 < g.nx; ++i) {
            int nz = 0;
            for (int b = -1; b <= 1; ++b)
                for (int a = -1; a <= 1; ++a) nz += mu(i + a, j + b) != cplx(0);
            if (nz != 0 && nz != 9) continue;
            cplx fx = 1.0 + (disp(i + 1, j) - disp(i - 1, j)) / (2 * g.hx());
            cplx fy = cplx(0, 1) + (disp(i, j + 1) - disp(i, j - 1)) / (2 * g.hy());
            cplx fz = 0.5 * (fx - cplx(0, 1) * fy), fzb = 0.5 * (fx + cplx(0, 1) * fy);
            r = std::max(r, std::abs(fzb - mu(i, j) * fz));
        }
    return r;
}

inline NormalizedQcMap solve_mrmt(const BeltramiField& mu, int max_iter = 200, double tol = 1e-8) {
    if (mu.sup_norm() > 0.95) throw Error("invalid-argument", "solver needs sup-norm <= 0.95");
    detail::require_interior_support(mu);
    const GridSpec& g = mu.spec();
    if (!g.contains(0.0) || !g.contains(1.0)) throw Error("invalid-argument", "lattice must contain 0 and 1");
    const std::vector<cplx>& m = mu.values();
    std::vector<cplx> h(m), Sh, next(g.size());
    BeurlingOperator S(g);
    std::vector<double> trace;
    int it = 0;
    bool done = mu.support_size() == 0;
    while (!done) {
        if (it >= max_iter) {
            std::ostringstream os;
            os << "no convergence in " << max_iter << " iterations; increments";
            for (std::size_t k = trace.size() > 8 ? trace.size() - 8 : 0; k < trace.size(); ++k) os << ' ' << trace[k];
            throw Error("mrmt-nonconvergence", os.str());
        }
        S.apply(h, Sh);
        double inc = 0;
        for (std::size_t k = 0; k < g.size(); ++k) {
            next[k] = m[k] == cplx(0) ? cplx(0) : m[k] * (1.0 + Sh[k]);
            inc = std::max(inc, std::abs(next[k] - h[k]));
        }
        h.swap(next);
        trace.push_back(inc);
        ++it;
        done = inc < tol;
    }
    std::vector<cplx> Ch;
    {
        CauchyOperator C(g);
        C.apply(h, Ch);
    }
    std::vector<std::pair<std::size_t, cplx>> dens;
    for (std::size_t k = 0; k < g.size(); ++k)
        if (h[k] != cplx(0)) dens.emplace_back(k, h[k]);
    // raw map z + Ch, normalized through its own interpolation at 0 and 1
    NormalizedQcMap raw(GridField(g, Ch), 1.0, 0.0, dens);
    cplx f0 = raw(0.0), f1 = raw(1.0);
    cplx alpha = 1.0 / (f1 - f0), beta = -f0 * alpha;
    std::vector<cplx> disp(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        cplx z = g.center(k);
        disp[k] = alpha * (z + Ch[k]) + beta - z;
    }
    NormalizedQcMap f(GridField(g, std::move(disp)), alpha, beta, std::move(dens));
    f.iterations = it;
    f.trace = std::move(trace);
    f.residual = beltrami_residual(f.displacement(), mu);
    return f;
}

// ---------------------------------------------------------------------------

struct RationalFit {
    RationalMap fitted;
    double residual = 0;
    int degree = 0;
    NormalizedQcMap straightening;
    std::vector<cplx> fit_points;  // f(z) at the fit samples
};

// homogeneous least squares N(u) - v D(u) = 0, coefficients rescaled by rho; denominator made monic at its true degree
inline RationalMap fit_rational(const std::vector<cplx>& u, const std::vector<cplx>& v, int degree) {
    if (degree < 2) throw Error("invalid-argument", "fit degree >= 2 required");
    const int n = degree + 1;
    if (u.size() != v.size() || u.size() < std::size_t(2 * n)) throw Error("invalid-argument", "too few samples");
    double rho = 0;
    for (auto z : u) rho = std::max(rho, std::abs(z));
    double vs = 0;
    for (auto z : v) vs = std::max(vs, std::abs(z));
    Eigen::MatrixXcd M(u.size(), 2 * n);
    for (std::size_t r = 0; r < u.size(); ++r) {
        cplx t = u[r] / rho, pw = 1.0;
        for (int j = 0; j < n; ++j) {
            M(r, j) = pw;
            M(r, n + j) = -(v[r] / vs) * pw;
            pw *= t;
        }
    }
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M, Eigen::ComputeThinV);
    Eigen::VectorXcd x = svd.matrixV().col(2 * n - 1);
    double big = x.cwiseAbs().maxCoeff();
    std::vector<cplx> N(n), D(n);
    for (int j = 0; j < n; ++j) {
        double s = std::pow(rho, -j);
        N[j] = std::abs(x(j)) < 1e-12 * big ? cplx(0) : x(j) * vs * s;
        D[j] = std::abs(x(n + j)) < 1e-12 * big ? cplx(0) : x(n + j) * s;
    }
    int top = n - 1;
    // highest denominator coefficient that is not numerical noise
    while (top > 0 && std::abs(x(n + top)) < 1e-8 * x.segment(n, n).cwiseAbs().maxCoeff()) --top;
    cplx lead = D[top];
    D.resize(top + 1);
    for (auto& d : D) d /= lead;
    for (auto& c : N) c /= lead;
    return RationalMap(Polynomial(N), Polynomial(D));
}

struct StraightenOptions {
    int max_iter = 200;
    double tol = 1e-8;
    double max_residual = 0.05;
};

// conjugate R o f by the solution f_sigma and fit a rational map to it
inline RationalFit straighten(const QuasiregularMap& P, const BeltramiField& sigma, int fit_degree,
                              const StraightenOptions& opt = {}) {
    if (fit_degree < 2) throw Error("invalid-argument", "fit degree >= 2 required");
    NormalizedQcMap f = solve_mrmt(sigma, opt.max_iter, opt.tol);
    const GridSpec& g = sigma.spec();
    cplx c = (cplx(g.x0, g.y0) + cplx(g.x1, g.y1)) / 2.0;
    double rs = 0;
    for (auto& [k, h] : f.density()) rs = std::max(rs, std::abs(g.center(k) - c) + g.h());
    if (P.has_surgery()) {
        const auto& cfg = P.surgery().config();
        rs = std::max(rs, std::abs(cfg.disk_center - c) + cfg.disk_radius);
    }
    rs = std::max(rs, 0.5 * std::min(g.x1 - g.x0, g.y1 - g.y0));
    // fit on one circle family, residual on an interleaved one
    const int nfit = 16 * (2 * fit_degree + 2), ntest = 8 * (2 * fit_degree + 2);
    std::vector<cplx> u, v, ut, vt;
    for (int k = 0; k < nfit; ++k) {
        double r = rs * (1.1 + 0.3 * (k % 4) / 3.0);
        cplx z = c + std::polar(r, 2 * pi * (k + 0.5 * (k % 2)) / nfit);
        u.push_back(f(z));
        v.push_back(f(P.conjugate(z)));
    }
    for (int k = 0; k < ntest; ++k) {
        cplx z = c + std::polar(rs * 1.25, 2 * pi * (k + 0.37) / ntest);
        ut.push_back(f(z));
        vt.push_back(f(P.conjugate(z)));
    }
    RationalMap fitted = fit_rational(u, v, fit_degree);
    double res = 0;
    for (std::size_t k = 0; k < ut.size(); ++k) res = std::max(res, std::abs(fitted(ut[k]) - vt[k]));
    if (!(res <= opt.max_residual)) {
        std::ostringstream os;
        os << "fit residual " << res;
        throw Error("straightening-failure", os.str());
    }
    RationalFit out{fitted, res, fitted.degree(), std::move(f), std::move(u)};
    return out;
}

}  // namespace qcs
