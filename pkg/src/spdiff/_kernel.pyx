# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled integration kernels.

Bit-for-bit mirror of _kernel_py.py (same operation order, same special
cases); compiled with -ffp-contract=off and without -ffast-math so both
backends produce identical trajectories on the same platform.  See the
fallback module for the shared conventions (per-step input hold, stage-time
gain evaluation, t = t0 + i*h step times).
"""

from libc.math cimport sin, fabs, sqrt, pow, fmod, ceil, isfinite
from libc.string cimport memcpy


cdef inline double _sig(double y, double a) noexcept nogil:
    cdef double m
    if y == 0.0:
        return 0.0
    m = fabs(y)
    m = sqrt(m) if a == 0.5 else pow(m, a)
    return m if y > 0.0 else -m


cdef inline unsigned long long _mix64(unsigned long long z) noexcept nogil:
    z = z + <unsigned long long>0x9E3779B97F4A7C15
    z = (z ^ (z >> 30)) * <unsigned long long>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <unsigned long long>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline double _noise_unit(unsigned long long seed, double t) noexcept nogil:
    cdef unsigned long long bits
    memcpy(&bits, &t, sizeof(double))
    bits = _mix64(_mix64(seed ^ bits))
    return <double>(bits >> 11) * (2.0 / 9007199254740992.0) - 1.0


cdef inline double _signal_value(int kind, double pa, double pb, double pc,
                                 double pd,
                                 const double[::1] coeffs,
                                 const double[::1] stimes,
                                 const double[::1] svalues,
                                 double namp, unsigned long long nseed,
                                 double t) noexcept nogil:
    cdef double v = 0.0
    cdef double slope, half, u
    cdef Py_ssize_t i, lo, hi, mid
    if kind == 1:
        v = pd + pa * sin(pb * t + pc)
    elif kind == 2:
        slope = 4.0 * pa / pb
        half = 0.5 * pb
        u = fmod(t, pb)
        if u < 0.0:
            u += pb
        v = slope * u if u < half else slope * (pb - u)
    elif kind == 3:
        for i in range(coeffs.shape[0] - 1, -1, -1):
            v = v * t + coeffs[i]
    elif kind == 4:
        lo = 0
        hi = stimes.shape[0] - 1
        while hi - lo > 1:
            mid = (lo + hi) >> 1
            if stimes[mid] <= t:
                lo = mid
            else:
                hi = mid
        slope = (svalues[lo + 1] - svalues[lo]) / (stimes[lo + 1] - stimes[lo])
        v = svalues[lo] + slope * (t - stimes[lo])
    if namp > 0.0:
        v += namp * _noise_unit(nseed, t)
    return v


cdef inline double _gain(int mode, double g0, double mu, double tmax,
                         double t) noexcept nogil:
    cdef double a, b
    if mode == 0:
        return g0
    a = mu * t
    b = mu * tmax
    return a if a < b else b


cdef struct Coefs:
    double ce
    double cep
    double cx
    double cxp


cdef inline void _coefs(int variant, double a10, double a20, double a11,
                        double a21, double p2, double g, Coefs* c) noexcept nogil:
    cdef double gg = g * g
    if variant == 0 or variant == 5:
        c.ce = a10 * gg
        c.cep = 0.0
        c.cx = a20 * g
        c.cxp = 0.0
    elif variant == 1 or variant == 2:
        c.ce = 0.0
        c.cep = a11 * gg
        c.cx = 0.0
        c.cxp = a21 * pow(g, 2.0 - p2)
    else:
        c.ce = a10 * gg
        c.cep = a11 * gg
        c.cx = a20 * g
        c.cxp = a21 * pow(g, 2.0 - p2)


cdef inline void _rhs(int variant, const Coefs* c, double p1, double p2,
                      double x1, double x2, double v,
                      double* d1, double* d2) noexcept nogil:
    cdef double e = x1 - v
    if variant == 0:
        d1[0] = x2
        d2[0] = -c.ce * e - c.cx * x2
    elif variant == 1 or variant == 2:
        d1[0] = x2
        d2[0] = -c.cep * _sig(e, p1) - c.cxp * _sig(x2, p2)
    elif variant == 5:
        d1[0] = x2 - c.cx * e
        d2[0] = -c.ce * e
    else:
        d1[0] = x2
        d2[0] = -c.ce * e - c.cep * _sig(e, p1) - c.cx * x2 - c.cxp * _sig(x2, p2)


cdef inline void _step(int variant, int sched_mode, double a10, double a20,
                       double a11, double a21, double p1, double p2,
                       double g0, double mu, double tmax, const Coefs* cfix,
                       double t, double h, double v,
                       double* x1, double* x2, int euler) noexcept nogil:
    cdef Coefs ca, cb, cc
    cdef const Coefs* c1
    cdef const Coefs* c2
    cdef const Coefs* c3
    cdef double hh, k1a, k1b, k2a, k2b, k3a, k3b, k4a, k4b
    if sched_mode == 0:
        c1 = cfix
        c2 = cfix
        c3 = cfix
    else:
        _coefs(variant, a10, a20, a11, a21, p2,
               _gain(sched_mode, g0, mu, tmax, t), &ca)
        c1 = &ca
        if euler:
            c2 = &ca
            c3 = &ca
        else:
            _coefs(variant, a10, a20, a11, a21, p2,
                   _gain(sched_mode, g0, mu, tmax, t + 0.5 * h), &cb)
            c2 = &cb
            _coefs(variant, a10, a20, a11, a21, p2,
                   _gain(sched_mode, g0, mu, tmax, t + h), &cc)
            c3 = &cc
    _rhs(variant, c1, p1, p2, x1[0], x2[0], v, &k1a, &k1b)
    if euler:
        x1[0] = x1[0] + h * k1a
        x2[0] = x2[0] + h * k1b
        return
    hh = 0.5 * h
    _rhs(variant, c2, p1, p2, x1[0] + hh * k1a, x2[0] + hh * k1b, v, &k2a, &k2b)
    _rhs(variant, c2, p1, p2, x1[0] + hh * k2a, x2[0] + hh * k2b, v, &k3a, &k3b)
    _rhs(variant, c3, p1, p2, x1[0] + h * k3a, x2[0] + h * k3b, v, &k4a, &k4b)
    x1[0] = x1[0] + (h / 6.0) * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
    x2[0] = x2[0] + (h / 6.0) * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)


def run_sim(int variant, double a10, double a20, double a11, double a21,
            double p1, double p2,
            int sched_mode, double g0, double mu, double tmax,
            int sig_kind, double pa, double pb, double pc, double pd,
            const double[::1] coeffs, const double[::1] stimes,
            const double[::1] svalues, double namp, unsigned long long nseed,
            int method, double t0, double h, long long n_steps,
            long long record_every, double x1_0, double x2_0, double limit,
            double[::1] out_t, double[::1] out_x1, double[::1] out_x2):
    """See _kernel_py.run_sim (contract and semantics are identical)."""
    cdef int euler = 1 if method == 1 else 0
    cdef double x1 = x1_0
    cdef double x2 = x2_0
    cdef double t, v, bad_t
    cdef long long i, j = 0
    cdef long long nrec = out_t.shape[0]
    cdef Coefs cfix
    cfix.ce = 0.0
    cfix.cep = 0.0
    cfix.cx = 0.0
    cfix.cxp = 0.0
    if sched_mode == 0:
        _coefs(variant, a10, a20, a11, a21, p2, g0, &cfix)
    if nrec > 0:
        out_t[0] = t0
        out_x1[0] = x1
        out_x2[0] = x2
        j = 1
    bad_t = 0.0
    cdef int failed = 0
    with nogil:
        for i in range(n_steps):
            t = t0 + i * h
            v = _signal_value(sig_kind, pa, pb, pc, pd, coeffs, stimes,
                              svalues, namp, nseed, t)
            _step(variant, sched_mode, a10, a20, a11, a21, p1, p2,
                  g0, mu, tmax, &cfix, t, h, v, &x1, &x2, euler)
            if not (isfinite(x1) and isfinite(x2)) \
                    or fabs(x1) > limit or fabs(x2) > limit:
                failed = 1
                bad_t = t0 + (i + 1) * h
                break
            if record_every > 0 and (i + 1) % record_every == 0 and j < nrec:
                out_t[j] = t0 + (i + 1) * h
                out_x1[j] = x1
                out_x2[j] = x2
                j += 1
    if failed:
        raise ArithmeticError(f"{bad_t!r} diverged")
    return (x1, x2)


def run_stream(int variant, double a10, double a20, double a11, double a21,
               double p1, double p2,
               int sched_mode, double g0, double mu, double tmax,
               const double[::1] ts, const double[::1] vs, double h_max,
               int method, double x1_0, double x2_0,
               double t_prev, double v_prev, int has_prev, double limit,
               double[::1] out_x2):
    """See _kernel_py.run_stream (contract and semantics are identical)."""
    cdef int euler = 1 if method == 1 else 0
    cdef double x1 = x1_0
    cdef double x2 = x2_0
    cdef Py_ssize_t n = ts.shape[0]
    cdef Py_ssize_t i0 = -1 if has_prev else 0
    cdef Py_ssize_t i, k
    cdef long long nsub
    cdef double ta, tb, v, dt, hsub, t, bad_t
    cdef Coefs cfix
    cfix.ce = 0.0
    cfix.cep = 0.0
    cfix.cx = 0.0
    cfix.cxp = 0.0
    cdef int failed = 0
    bad_t = 0.0
    with nogil:
        for i in range(i0, n):
            if i >= 0:
                out_x2[i] = x2
                if i + 1 >= n:
                    break
                ta = ts[i]
                tb = ts[i + 1]
                v = vs[i]
            else:
                ta = t_prev
                tb = ts[0]
                v = v_prev
            dt = tb - ta
            nsub = <long long>ceil(dt / h_max) if dt > h_max else 1
            hsub = dt / nsub
            if sched_mode == 0:
                _coefs(variant, a10, a20, a11, a21, p2, g0, &cfix)
            for k in range(nsub):
                t = ta + k * hsub
                _step(variant, sched_mode, a10, a20, a11, a21, p1, p2,
                      g0, mu, tmax, &cfix, t, hsub, v, &x1, &x2, euler)
                if not (isfinite(x1) and isfinite(x2)) \
                        or fabs(x1) > limit or fabs(x2) > limit:
                    failed = 1
                    bad_t = ta + (k + 1) * hsub
                    break
            if failed:
                break
    if failed:
        raise ArithmeticError(f"{bad_t!r} diverged")
    return (x1, x2)
