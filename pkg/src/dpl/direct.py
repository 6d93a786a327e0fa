"""Direct float64 oracle for term evaluation.

Independent of the closed-form reduction path: sums are truncated in each
index and corrected with Euler-Maclaurin terms whose integrals come from
exp-substituted Gauss-Laguerre quadrature. Everything runs in numpy
float64/complex128, so values carry ~1e-11 absolute accuracy -- the point is
an independent cross-check of the high-precision path, not sharp bounds.
Residue classes make oscillating phases constant; |x| < 1 phases truncate
geometrically. Bounds are correction-size estimates plus a roundoff floor and
are tagged direct_tail.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
from mpmath import mpc, mpf

from .specfun import DomainError, EvalResult, PrecisionContext
from .termlang import DoubleSumTerm, SingleSumTerm
from .reduction import ShapeError, XSpec, _cong_modulus, _exp_value

_TCUT = 2400
_BOUND_FLOOR = 1e-10


def _lag_nodes(n):
    x, w = np.polynomial.laguerre.laggauss(n)
    return x, w


_LAG32 = _lag_nodes(32)
_LAG48 = _lag_nodes(48)


def _b_float(params, needed):
    b = params.get("b")
    if b is None:
        if needed:
            raise DomainError("term references b, none bound")
        return 0.0, None
    if isinstance(b, Fraction):
        return float(b), b
    return float(b), None


def _x_complex(params):
    x = params.get("x")
    if x is None:
        return XSpec.one(), 1.0 + 0j
    if not isinstance(x, XSpec):
        x = XSpec.number(x)
    if x.kind == "one":
        return x, 1.0 + 0j
    if x.kind == "zero":
        return x, 0.0 + 0j
    if x.kind == "ru":
        return x, complex(np.exp(2j * np.pi * x.a / x.f))
    return x, complex(x.value)


class _ProductFactors:
    """prod_i (base0_i + sm_i*t + sn_i*u)^(-p_i) on numpy grids."""

    def __init__(self):
        self.items = []  # (base0, sm, sn, p)

    def add(self, base0, sm, sn, p):
        self.items.append((float(base0), float(sm), float(sn), float(p)))

    def value(self, t, u):
        out = 1.0
        for (b0, sm, sn, p) in self.items:
            out = out * (b0 + sm * t + sn * u) ** (-p)
        return out

    def log_derivs_t(self, t, u):
        """(L', L'', L''') of log value with respect to t."""
        l1 = 0.0
        l2 = 0.0
        l3 = 0.0
        for (b0, sm, sn, p) in self.items:
            if sm == 0:
                continue
            base = b0 + sm * t + sn * u
            l1 = l1 - p * sm / base
            l2 = l2 + p * sm ** 2 / base ** 2
            l3 = l3 - 2 * p * sm ** 3 / base ** 3
        return l1, l2, l3


def _em_tail_t(pf: _ProductFactors, Tcut, u, lag):
    """sum_{t>=Tcut} pf(t,u) by integral + EM corrections, vectorized in u."""
    nodes, weights = lag
    tv = Tcut * np.exp(nodes)
    # integral: sum w_i e^{x_i} Tcut ... with f evaluated at Tcut e^{x_i}
    if np.ndim(u) == 0:
        vals = pf.value(tv, u)
        integral = np.sum(weights * np.exp(2 * nodes) * vals * Tcut)
    else:
        vals = pf.value(tv[:, None], u[None, :])
        integral = np.sum(weights[:, None] * np.exp(2 * nodes)[:, None] * vals * Tcut, axis=0)
    f0 = pf.value(Tcut, u)
    l1, l2, l3 = pf.log_derivs_t(Tcut, u)
    f1 = f0 * l1
    f3 = f0 * (l3 + 3 * l2 * l1 + l1 ** 3)
    return integral + f0 / 2 - f1 / 12 + f3 / 720, np.abs(f3 / 720)


def _geom_cutoff(r, lam):
    if r <= 0:
        return 2
    return max(8, int(math.ceil(40.0 * math.log(10) / (lam * (-math.log(r))))) + 2)


def eval_term_direct(term, params, ctx: PrecisionContext) -> EvalResult:
    if isinstance(term, SingleSumTerm):
        return _single_direct(term, params, ctx)
    return _double_direct(term, params, ctx)


# ---------------------------------------------------------------------------
# Double sums
# ---------------------------------------------------------------------------

def _split_plan(term: DoubleSumTerm, x: XSpec, chars):
    Nmod = _cong_modulus(term.cong)
    req = {"m": 1, "n": 1}
    if x.kind == "ru":
        touched = {"none": (), "xn": ("n",), "xm": ("m",), "xmn": ("m", "n")}[term.xsel.kind]
        for idx in touched:
            req[idx] = math.lcm(req[idx], x.f)
    coupled = term.cong is not None or (term.xsel.kind == "xmn" and x.kind == "ru")
    for (name, arg) in term.twists:
        f = chars[name].modulus
        if arg == "mn":
            coupled = True
            req["m"] = math.lcm(req["m"], f)
            req["n"] = math.lcm(req["n"], f)
        else:
            req[arg] = math.lcm(req[arg], f)
    if Nmod > 1:
        req["m"] = math.lcm(req["m"], Nmod)
        req["n"] = math.lcm(req["n"], Nmod)
    if coupled:
        lam = math.lcm(req["m"], req["n"])
        return lam, lam, Nmod
    return req["m"], req["n"], Nmod


def _double_direct(term: DoubleSumTerm, params, ctx) -> EvalResult:
    xsel = term.xsel
    x, xc = _x_complex(params) if xsel.kind != "none" else (XSpec.one(), 1.0 + 0j)
    needs_b = any(f.shift.q1 for f in term.factors) or term.m_range == "m>b"
    bf, b_exact = _b_float(params, needs_b)
    chars = {name: params[name] for (name, _) in term.twists}
    if x.kind == "zero" and xsel.kind != "none":
        from .reduction import _eval_double_x_zero, EvalCache
        return _eval_double_x_zero(term, params, ctx, EvalCache(ctx))
    if x.kind == "num" and abs(x.value) >= 1:
        raise ShapeError("boundary x that is not a root of unity")

    if term.m_range == "m>b":
        bcmp = b_exact if b_exact is not None else bf
        m0 = 1 if bcmp < 1 else 2
    else:
        m0 = 0 if term.m_range == "m>=0" else 1
    n0 = 0 if term.n_range == "n>=0" else 1

    lam_m, lam_n, Nmod = _split_plan(term, x, chars)
    fvals = [(f.combo, float(f.shift.q0) + f.shift.q1 * bf, float(_exp_value(f)))
             for f in term.factors]

    geom_m = x.kind == "num" and xsel.kind in ("xm", "xmn")
    geom_n = x.kind == "num" and xsel.kind in ("xn", "xmn")
    r_abs = abs(xc) if x.kind == "num" else 1.0
    total = 0.0 + 0j
    err = 0.0
    coeff = float(term.coeff)
    for rm in range(lam_m):
        for rn in range(lam_n):
            if Nmod > 1 and (rm - term.cong.coeff * rn - term.cong.offset) % Nmod != 0:
                continue
            const = 1.0 + 0j
            skip = False
            for (name, arg) in term.twists:
                v = chars[name](rm if arg == "m" else rn if arg == "n" else rm + rn)
                if v == 0:
                    skip = True
                    break
                const *= complex(v)
            if skip:
                continue
            if xsel.kind != "none" and x.kind != "one":
                p0 = {"xn": rn, "xm": rm, "xmn": rm + rn}[xsel.kind] + xsel.d
                const *= xc ** p0
            t0 = math.ceil((m0 - rm) / lam_m)
            u0 = math.ceil((n0 - rn) / lam_n)
            pf = _ProductFactors()
            for (combo, g, p) in fvals:
                if combo == "m":
                    pf.add(rm + g, lam_m, 0.0, p)
                elif combo == "n":
                    pf.add(rn + g, 0.0, lam_n, p)
                else:
                    pf.add(rm + rn + g, lam_m, lam_n, p)
            Xm = xc ** lam_m if geom_m else None
            Xn = xc ** lam_n if geom_n else None
            v, e = _class_sum(pf, t0, u0, Xm, Xn, lam_m, lam_n, r_abs)
            total += const * v
            err += abs(const) * e
    total *= coeff
    err = abs(coeff) * err + _BOUND_FLOOR * (1.0 + abs(total))
    val = mpc(total) if abs(total.imag) > 0 else mpf(total.real)
    return EvalResult(val, mpf(err), "direct_tail")


def _class_sum(pf, t0, u0, Xm, Xn, lam_m, lam_n, r_abs):
    """One residue class: vectorized block plus tails where phases allow."""
    Tm = _geom_cutoff(r_abs, lam_m) if Xm is not None else max(96, _TCUT // lam_m)
    Tn = _geom_cutoff(r_abs, lam_n) if Xn is not None else max(96, _TCUT // lam_n)
    t = np.arange(t0, t0 + Tm, dtype=float)
    u = np.arange(u0, u0 + Tn, dtype=float)
    err = 0.0

    # direct rectangle, chunked along u
    block = 0.0 + 0j
    chunk = max(1, min(Tn, 8 * 10 ** 6 // max(Tm, 1)))
    inner_direct = np.zeros(Tn, dtype=complex)
    phase_t = Xm ** t if Xm is not None else None
    for lo in range(0, Tn, chunk):
        uu = u[lo:lo + chunk]
        vals = pf.value(t[:, None], uu[None, :])
        if phase_t is not None:
            vals = vals * phase_t[:, None]
        inner_direct[lo:lo + chunk] = vals.sum(axis=0)
    # inner tail over t (only without a geometric m-phase)
    if Xm is None:
        tail48, nxt = _em_tail_t(pf, float(t0 + Tm), u, _LAG48)
        tail32, _ = _em_tail_t(pf, float(t0 + Tm), u, _LAG32)
        inner_total = inner_direct + tail48
        err += float(np.sum(np.abs(tail48 - tail32))) + float(np.sum(np.abs(nxt)))
    else:
        inner_total = inner_direct
        err += abs(Xm) ** (Tm + t0) / (1 - abs(Xm)) * float(np.max(np.abs(pf.value(t0 + Tm, u0))))

    phase_u = Xn ** u if Xn is not None else np.ones_like(u)
    block = np.sum(inner_total * phase_u)

    # outer tail over u
    if Xn is None:
        def F(uv):
            uv = np.atleast_1d(uv)
            td = pf.value(t[:, None], uv[None, :])
            if phase_t is not None:
                td = td * phase_t[:, None]
            s = td.sum(axis=0)
            if Xm is None:
                tl, _ = _em_tail_t(pf, float(t0 + Tm), uv, _LAG48)
                s = s + tl
            return s

        U = float(u0 + Tn)
        nodes48, w48 = _LAG48
        nodes32, w32 = _LAG32
        f48 = F(U * np.exp(nodes48))
        f32 = F(U * np.exp(nodes32))
        i48 = np.sum(w48 * np.exp(2 * nodes48) * f48 * U)
        i32 = np.sum(w32 * np.exp(2 * nodes32) * f32 * U)
        f0 = F(U)[0]
        # centered five-point first derivative, h = 1/2
        sten = F(np.array([U - 1.0, U - 0.5, U + 0.5, U + 1.0]))
        f1 = (sten[0] - 8 * sten[1] + 8 * sten[2] - sten[3]) / 6.0
        tail = i48 + f0 / 2 - f1 / 12
        block = block + tail
        err += abs(i48 - i32) * 2 + abs(f1) * 1e-4 + abs(f0) * 1e-8
    else:
        last = abs(inner_total[-1])
        err += abs(Xn) ** (Tn + u0) / (1 - abs(Xn)) * last * 2

    return block, err


# ---------------------------------------------------------------------------
# Single sums
# ---------------------------------------------------------------------------

def _single_direct(term: SingleSumTerm, params, ctx) -> EvalResult:
    from .reduction import _cong_modulus_single, _sin_modulus

    x, xc = _x_complex(params) if term.xsel.kind != "none" else (XSpec.one(), 1.0 + 0j)
    needs_b = term.factor.shift.q1 != 0
    bf, _ = _b_float(params, needs_b)
    n0 = 0 if term.n_range == "n>=0" else 1
    e = float(_exp_value(term.factor))
    gamma = float(term.factor.shift.q0) + term.factor.shift.q1 * bf
    d = term.xsel.d if term.xsel.kind == "xn" else 0
    chi = params[term.twist] if term.twist else None

    if x.kind == "zero":
        n = -d
        if n < n0:
            return EvalResult(mpf(0), mpf(0), "direct_tail")
        v = float(term.coeff) * (n + gamma) ** (-e)
        return EvalResult(mpf(v), mpf(abs(v) * 1e-14 + 1e-300), "direct_tail")

    lam = 1
    if term.cong is not None:
        lam = math.lcm(lam, _cong_modulus_single(term.cong))
    if term.sin_weight is not None:
        lam = math.lcm(lam, _sin_modulus(term.sin_weight))
    if chi is not None:
        lam = math.lcm(lam, chi.modulus)
    if x.kind == "ru":
        lam = math.lcm(lam, x.f)

    total = 0.0 + 0j
    err = 0.0
    for rr in range(lam):
        if term.cong is not None:
            N = _cong_modulus_single(term.cong)
            if (term.cong.mult * rr + term.cong.off) % N != 0:
                continue
        const = complex(term.coeff)
        if term.sin_weight is not None:
            N = _sin_modulus(term.sin_weight)
            if term.sin_weight.parity == "even":
                if rr % N == 0:
                    continue
                const /= math.sin(2 * math.pi * (rr % N) / N)
            else:
                if (2 * rr + 1) % N == 0:
                    continue
                const /= math.sin(math.pi * ((2 * rr + 1) % (2 * N)) / N)
        if chi is not None:
            v = chi(rr)
            if v == 0:
                continue
            const *= complex(v)
        t0 = math.ceil((n0 - rr) / lam)
        if term.xsel.kind == "xn" and x.kind != "one":
            const *= xc ** (rr + d)
        pf = _ProductFactors()
        pf.add(rr + gamma, lam, 0.0, e)
        if x.kind == "num" and term.xsel.kind == "xn":
            X = xc ** lam
            T = _geom_cutoff(abs(xc), lam)
            t = np.arange(t0, t0 + T, dtype=float)
            vals = pf.value(t, 0.0) * X ** t
            total += const * np.sum(vals)
            err += abs(const) * abs(X) ** (t0 + T) / (1 - abs(X)) * abs(pf.value(t0 + T, 0.0))
        else:
            if e <= 1:
                raise DomainError("divergent single sum at x on the unit circle")
            T = max(128, _TCUT // lam)
            t = np.arange(t0, t0 + T, dtype=float)
            vals = pf.value(t, 0.0)
            s = np.sum(vals)
            tail48, nxt = _em_tail_t(pf, float(t0 + T), 0.0, _LAG48)
            tail32, _ = _em_tail_t(pf, float(t0 + T), 0.0, _LAG32)
            total += const * (s + tail48)
            err += abs(const) * (abs(tail48 - tail32) + abs(nxt))
    err += _BOUND_FLOOR * (1.0 + abs(total))
    val = mpc(total) if abs(total.imag) > 0 else mpf(total.real)
    return EvalResult(val, mpf(err), "direct_tail")
