"""Pure-Python integration kernels (fallback backend).

Semantics are the contract for the compiled core in _kernel.pyx: identical
operation order, identical special cases, so the two backends produce
bit-identical trajectories on the same platform.  Any change here needs the
matching change there.

Conventions shared by both backends:
  * the input signal v is sampled once per step (zero-order hold across the
    RK4 stages), which makes offline runs and sample-driven streaming agree
    exactly on a shared grid;
  * the gain schedule is evaluated at the true stage times;
  * step times are computed as t0 + i*h, never accumulated;
  * recorded sample j is the state after step j*record_every.
"""

import math

_SIG_KIND_ZERO = 0
_SIG_KIND_SINE = 1
_SIG_KIND_TRI = 2
_SIG_KIND_POLY = 3
_SIG_KIND_SAMPLED = 4

_U64 = (1 << 64) - 1
_TWO53 = 9007199254740992.0


def _sig(y, a):
    if y == 0.0:
        return 0.0
    m = abs(y)
    m = math.sqrt(m) if a == 0.5 else math.pow(m, a)
    return m if y > 0.0 else -m


def _noise_unit(seed, t):
    import struct
    bits = struct.unpack("<Q", struct.pack("<d", t))[0]
    z = seed ^ bits
    for _ in range(2):
        z = (z + 0x9E3779B97F4A7C15) & _U64
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _U64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _U64
        z = z ^ (z >> 31)
    return float(z >> 11) * (2.0 / _TWO53) - 1.0


def _signal_value(kind, pa, pb, pc, pd, coeffs, stimes, svalues, namp, nseed, t):
    if kind == _SIG_KIND_SINE:
        v = pd + pa * math.sin(pb * t + pc)
    elif kind == _SIG_KIND_TRI:
        slope = 4.0 * pa / pb
        half = 0.5 * pb
        u = math.fmod(t, pb)
        if u < 0.0:
            u += pb
        v = slope * u if u < half else slope * (pb - u)
    elif kind == _SIG_KIND_POLY:
        v = 0.0
        for i in range(len(coeffs) - 1, -1, -1):
            v = v * t + coeffs[i]
    elif kind == _SIG_KIND_SAMPLED:
        lo = 0
        hi = len(stimes) - 1
        while hi - lo > 1:
            mid = (lo + hi) >> 1
            if stimes[mid] <= t:
                lo = mid
            else:
                hi = mid
        slope = (svalues[lo + 1] - svalues[lo]) / (stimes[lo + 1] - stimes[lo])
        v = svalues[lo] + slope * (t - stimes[lo])
    else:
        v = 0.0
    if namp > 0.0:
        v += namp * _noise_unit(nseed, t)
    return v


def _gain(mode, g0, mu, tmax, t):
    if mode == 0:
        return g0
    a = mu * t
    b = mu * tmax
    return a if a < b else b


def _coefs(variant, a10, a20, a11, a21, p2, g):
    """Premultiplied term coefficients (ce, cep, cx, cxp) at gain g."""
    gg = g * g
    if variant == 0 or variant == 5:
        return (a10 * gg, 0.0, a20 * g, 0.0)
    if variant == 1 or variant == 2:
        return (0.0, a11 * gg, 0.0, a21 * math.pow(g, 2.0 - p2))
    return (a10 * gg, a11 * gg, a20 * g, a21 * math.pow(g, 2.0 - p2))


def _rhs(variant, c, p1, p2, x1, x2, v):
    e = x1 - v
    if variant == 0:
        return (x2, -c[0] * e - c[2] * x2)
    if variant == 1 or variant == 2:
        return (x2, -c[1] * _sig(e, p1) - c[3] * _sig(x2, p2))
    if variant == 5:
        return (x2 - c[2] * e, -c[0] * e)
    return (x2, -c[0] * e - c[1] * _sig(e, p1) - c[2] * x2 - c[3] * _sig(x2, p2))


def _step(variant, sched_mode, a10, a20, a11, a21, p1, p2, g0, mu, tmax,
          cfix, t, h, v, x1, x2, euler):
    if sched_mode == 0:
        c1 = c2 = c3 = cfix
    else:
        c1 = _coefs(variant, a10, a20, a11, a21, p2,
                    _gain(sched_mode, g0, mu, tmax, t))
        if euler:
            c2 = c3 = c1
        else:
            c2 = _coefs(variant, a10, a20, a11, a21, p2,
                        _gain(sched_mode, g0, mu, tmax, t + 0.5 * h))
            c3 = _coefs(variant, a10, a20, a11, a21, p2,
                        _gain(sched_mode, g0, mu, tmax, t + h))
    k1a, k1b = _rhs(variant, c1, p1, p2, x1, x2, v)
    if euler:
        return (x1 + h * k1a, x2 + h * k1b)
    hh = 0.5 * h
    k2a, k2b = _rhs(variant, c2, p1, p2, x1 + hh * k1a, x2 + hh * k1b, v)
    k3a, k3b = _rhs(variant, c2, p1, p2, x1 + hh * k2a, x2 + hh * k2b, v)
    k4a, k4b = _rhs(variant, c3, p1, p2, x1 + h * k3a, x2 + h * k3b, v)
    x1 = x1 + (h / 6.0) * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
    x2 = x2 + (h / 6.0) * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
    return (x1, x2)


def run_sim(variant, a10, a20, a11, a21, p1, p2,
            sched_mode, g0, mu, tmax,
            sig_kind, pa, pb, pc, pd, coeffs, stimes, svalues, namp, nseed,
            method, t0, h, n_steps, record_every,
            x1_0, x2_0, limit, out_t, out_x1, out_x2):
    """Fixed-step integration of one differentiator (or time-scale) run.

    Records every record_every-th state, initial state included, into the
    out_* arrays.  Returns the final (x1, x2).  Raises ArithmeticError when
    the state leaves the finite/|.| <= limit region; the message starts with
    the offending time (callers re-raise a typed error).
    """
    euler = 1 if method == 1 else 0
    x1 = x1_0
    x2 = x2_0
    cfix = None
    if sched_mode == 0:
        cfix = _coefs(variant, a10, a20, a11, a21, p2, g0)
    nrec = len(out_t)
    j = 0
    if nrec > 0:
        out_t[0] = t0
        out_x1[0] = x1
        out_x2[0] = x2
        j = 1
    for i in range(n_steps):
        t = t0 + i * h
        v = _signal_value(sig_kind, pa, pb, pc, pd, coeffs, stimes, svalues,
                          namp, nseed, t)
        x1, x2 = _step(variant, sched_mode, a10, a20, a11, a21, p1, p2,
                       g0, mu, tmax, cfix, t, h, v, x1, x2, euler)
        if not (math.isfinite(x1) and math.isfinite(x2)) \
                or abs(x1) > limit or abs(x2) > limit:
            raise ArithmeticError(f"{t0 + (i + 1) * h!r} diverged")
        if record_every > 0 and (i + 1) % record_every == 0 and j < nrec:
            out_t[j] = t0 + (i + 1) * h
            out_x1[j] = x1
            out_x2[j] = x2
            j += 1
    return (x1, x2)


def run_stream(variant, a10, a20, a11, a21, p1, p2,
               sched_mode, g0, mu, tmax,
               ts, vs, h_max, method,
               x1_0, x2_0, t_prev, v_prev, has_prev, limit, out_x2):
    """Sample-driven streaming: hold each input sample, advance, emit x2.

    out_x2[i] is the estimate at ts[i] *before* consuming sample i (causal).
    When has_prev, the state is first advanced from t_prev to ts[0] holding
    v_prev (chunked processing).  Returns the final (x1, x2).
    """
    euler = 1 if method == 1 else 0
    x1 = x1_0
    x2 = x2_0
    n = len(ts)
    for i in range(-1 if has_prev else 0, n):
        if i >= 0:
            out_x2[i] = x2
            if i + 1 >= n:
                break
            ta, tb, v = ts[i], ts[i + 1], vs[i]
        else:
            ta, tb, v = t_prev, ts[0], v_prev
        dt = tb - ta
        nsub = int(math.ceil(dt / h_max)) if dt > h_max else 1
        hsub = dt / nsub
        cfix = None
        if sched_mode == 0:
            cfix = _coefs(variant, a10, a20, a11, a21, p2, g0)
        for k in range(nsub):
            t = ta + k * hsub
            x1, x2 = _step(variant, sched_mode, a10, a20, a11, a21, p1, p2,
                           g0, mu, tmax, cfix, t, hsub, v, x1, x2, euler)
            if not (math.isfinite(x1) and math.isfinite(x2)) \
                    or abs(x1) > limit or abs(x2) > limit:
                raise ArithmeticError(f"{ta + (k + 1) * hsub!r} diverged")
    return (x1, x2)
