"""High-precision term evaluation by closed-form inner sums.

The reduction strategy rewrites the inner index sum of a double series in
closed form (Hurwitz zetas and digammas via two-pole partial fractions), then
accelerates the outer sum: a direct block driven by one-step recurrences, plus
a tail obtained by expanding every factor in inverse powers of the outer
variable. Tail base sums are Hurwitz zetas and their log-weighted companions,
so the whole pipeline stays inside the package's own primitives.

Residue-class splitting turns root-of-unity powers, character twists, and
congruence constraints into finitely many constant-phase classes first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from mpmath import mp, mpc, mpf

from .specfun import (
    DomainError,
    EvalResult,
    PrecisionContext,
    digamma,
    hurwitz_zeta,
    log_zeta_sum,
    root_of_unity,
)
from .termlang import (
    Congruence,
    DoubleSumTerm,
    SingleSumTerm,
    expr_is_num,
)


class ShapeError(ValueError):
    """Term shape outside the closed-form catalog; caller may fall back."""


# ---------------------------------------------------------------------------
# Bound parameter values
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class XSpec:
    """Evaluation point x, kept exact when it is a root of unity."""

    kind: str  # 'zero' | 'one' | 'ru' | 'num'
    f: int = 1
    a: int = 0
    value: object = None  # mpf/mpc for 'num'

    @staticmethod
    def one():
        return XSpec("one")

    @staticmethod
    def zero():
        return XSpec("zero")

    @staticmethod
    def root(f, a):
        a %= f
        if a == 0:
            return XSpec("one")
        g = math.gcd(a, f)
        return XSpec("ru", f // g, a // g)

    @staticmethod
    def number(v):
        v = mpc(v) if isinstance(v, complex) or (hasattr(v, "imag") and v.imag) else mpf(v)
        if v == 0:
            return XSpec("zero")
        if v == 1:
            return XSpec("one")
        if abs(v) > 1:
            raise DomainError("x must satisfy |x| <= 1")
        return XSpec("num", value=v)

    @property
    def is_boundary(self):
        return self.kind in ("one", "ru")

    def numeric(self, ctx) -> object:
        if self.kind == "zero":
            return mpf(0)
        if self.kind == "one":
            return mpf(1)
        if self.kind == "ru":
            return root_of_unity(self.f, self.a, ctx)
        return self.value

    def power(self, e: int, ctx):
        """x^e, exact for roots of unity."""
        if self.kind == "one":
            return mpf(1)
        if self.kind == "zero":
            return mpf(1) if e == 0 else mpf(0)
        if self.kind == "ru":
            return root_of_unity(self.f, self.a * e, ctx)
        return self.value ** e

    def pow_root(self, e: int):
        """XSpec for x^e when x is 1 or a root of unity."""
        if self.kind == "one":
            return self
        if self.kind == "ru":
            return XSpec.root(self.f, self.a * e)
        raise ShapeError("pow_root needs a root of unity")


def _frac_to_mp(q: Fraction):
    return mpf(q.numerator) / q.denominator


def shift_value(shift, bval):
    v = _frac_to_mp(shift.q0)
    if shift.q1:
        v = v + shift.q1 * bval
    return v


# ---------------------------------------------------------------------------
# Shared evaluation cache (per precision, bounded)
# ---------------------------------------------------------------------------

class EvalCache:
    def __init__(self, ctx):
        self.ctx = ctx
        self.store = {}

    def zeta(self, s, a) -> EvalResult:
        key = ("z", mpf(s) if not isinstance(s, (int,)) else s, a)
        if key not in self.store:
            self.store[key] = hurwitz_zeta(s, a, self.ctx)
        return self.store[key]

    def psi(self, a) -> EvalResult:
        key = ("p", a)
        if key not in self.store:
            self.store[key] = digamma(a, self.ctx)
        return self.store[key]

    def log_zeta(self, r, a) -> EvalResult:
        key = ("l", mpf(r), a)
        if key not in self.store:
            self.store[key] = log_zeta_sum(r, a, self.ctx)
        return self.store[key]


# ---------------------------------------------------------------------------
# Two-pole partial fractions (exact rational coefficients)
# ---------------------------------------------------------------------------

def two_pole_coeffs(e: int, q: int):
    """1/((t+p1)^e (t+p2)^q) = sum A_i/(t+p1)^i + sum B_j/(t+p2)^j over w=p2-p1.

    Returns (A, B) with A[i] and B[j] the exact rational multiples of
    w^-(q+e-i) and w^-(e+q-j); A[1] + B[1] = 0 always.
    """
    A = {i: Fraction((-1) ** (e - i) * math.comb(q + e - i - 1, e - i))
         for i in range(1, e + 1)}
    B = {j: Fraction((-1) ** (q - j) * (-1) ** (e + q - j) * math.comb(e + q - j - 1, q - j))
         for j in range(1, q + 1)}
    assert A.get(1, Fraction(0)) + B.get(1, Fraction(0)) == 0
    return A, B


# ---------------------------------------------------------------------------
# Outer-sum atoms
# ---------------------------------------------------------------------------

@dataclass
class Atom:
    """coef * prod_i (slope*u + gamma_i)^(-p_i) * Z(slope*u + gamma_z).

    coef carries an EvalResult so bounds from folded-in constants propagate.
    """

    coef: EvalResult
    slope: int
    rpows: tuple  # ((gamma, p) ...) with p > 0 (mpf or int powers)
    trans: tuple | None = None  # ('zeta', j, gamma_z) | ('psi', gamma_z)

    def min_power(self):
        p = sum(pp for (_, pp) in self.rpows)
        if self.trans and self.trans[0] == "zeta":
            p += self.trans[1] - 1
        return p


class _Series:
    """sum_r (a[r] + b[r] log v) v^-r with remainder items (coef, pow, haslog)."""

    __slots__ = ("R", "a", "b", "rem")

    def __init__(self, R):
        self.R = R
        self.a = [mpf(0)] * (R + 1)
        self.b = [mpf(0)] * (R + 1)
        self.rem = []

    def mul(self, other, v0):
        out = _Series(self.R)
        R = self.R
        conv_a = [mpf(0)] * (2 * R + 1)
        conv_b = [mpf(0)] * (2 * R + 1)
        for i, ai in enumerate(self.a):
            if ai == 0 and self.b[i] == 0:
                continue
            for j, aj in enumerate(other.a):
                if aj == 0 and other.b[j] == 0:
                    continue
                conv_a[i + j] += ai * aj
                conv_b[i + j] += ai * other.b[j] + self.b[i] * aj
                # log^2 products never occur: at most one factor carries logs
        out.a[: R + 1] = conv_a[: R + 1]
        out.b[: R + 1] = conv_b[: R + 1]
        dropped = mpf(0)
        dropped_log = mpf(0)
        for r in range(R + 1, 2 * R + 1):
            dropped += abs(conv_a[r]) * v0 ** (R + 1 - r)
            dropped_log += abs(conv_b[r]) * v0 ** (R + 1 - r)
        if dropped:
            out.rem.append((dropped, R + 1, False))
        if dropped_log:
            out.rem.append((dropped_log, R + 1, True))
        # cross remainders: |P| and |rho| envelopes at v >= v0
        sup_self = self._sup(v0)
        sup_other = other._sup(v0)
        for (c, p, lg) in self.rem:
            out.rem.append((c * sup_other, p, lg))
        for (c, p, lg) in other.rem:
            out.rem.append((c * sup_self, p, lg))
        for (c1, p1, lg1) in self.rem:
            for (c2, p2, lg2) in other.rem:
                out.rem.append((c1 * c2 * v0 ** (-min(p1, p2)), max(p1, p2), lg1 or lg2))
        return out

    def _sup(self, v0):
        s = mpf(0)
        lv = mp.log(v0)
        for r in range(self.R + 1):
            s += (abs(self.a[r]) + abs(self.b[r]) * lv) * v0 ** (-r)
        return s


def _power_series(R, p, delta, v0):
    """(v + delta)^(-p) expanded in v^-1; p must sit on the integer grid.

    One fractional exponent per atom is allowed; the caller subtracts its
    fractional part before calling so every series lands on integer indices
    (index r stands for the power r plus the atom-wide fractional offset).
    """
    s = _Series(R)
    pm = mpf(p)
    if pm != mp.floor(pm):
        raise ShapeError("power series exponent off the integer grid")
    base = int(pm)
    term = mpf(1)
    for r in range(0, R + 1):
        idx = base + r
        if 0 <= idx <= R:
            s.a[idx] += term
        elif idx > R:
            s.rem.append((abs(term) * v0 ** (R + 1 - idx), R + 1, False))
        nxt = term * (-(pm + r)) / (r + 1) * delta
        if nxt == 0:
            return s
        term = nxt
    ratio = abs(mpf(delta)) / v0
    if ratio >= 1:
        raise ShapeError("outer tail starts inside the expansion radius")
    s.rem.append((abs(term) / (1 - ratio), R + 1, False))
    return s


def _zeta_series(R, j, delta, v0, ctx):
    """zeta(j, v + delta) expanded about v = infinity (Euler-Maclaurin)."""
    from .specfun import bernoulli

    jm = mpf(j)
    s = _Series(R)
    # leading terms (v+delta)^(1-j)/(j-1) and (v+delta)^(-j)/2
    lead = _power_series(R, jm - 1, delta, v0)
    for r in range(R + 1):
        s.a[r] += lead.a[r] / (jm - 1)
    s.rem.extend((c / abs(jm - 1), p, lg) for (c, p, lg) in lead.rem)
    half = _power_series(R, jm, delta, v0)
    for r in range(R + 1):
        s.a[r] += half.a[r] / 2
    s.rem.extend((c / 2, p, lg) for (c, p, lg) in half.rem)
    poch = jm
    r_ = 1
    while True:
        power = jm + 2 * r_ - 1
        if power > R + 1:
            # remainder of the asymptotic part: first omitted term envelope
            b = bernoulli(2 * r_)
            coef = abs(mpf(b.numerator) / b.denominator) / math.factorial(2 * r_) * abs(poch)
            s.rem.append((2 * coef * v0 ** (R + 1 - power), R + 1, False))
            break
        b = bernoulli(2 * r_)
        coef = mpf(b.numerator) / b.denominator / math.factorial(2 * r_) * poch
        piece = _power_series(R, power, delta, v0)
        for r2 in range(R + 1):
            s.a[r2] += coef * piece.a[r2]
        s.rem.extend((abs(coef) * c, p, lg) for (c, p, lg) in piece.rem)
        poch *= (jm + 2 * r_ - 1) * (jm + 2 * r_)
        r_ += 1
    return s


def _psi_series(R, delta, v0, ctx):
    """psi(v + delta) = log v + log(1+delta/v) - 1/(2(v+delta)) - sum B terms."""
    from .specfun import bernoulli

    s = _Series(R)
    s.b[0] = mpf(1)  # log v
    # log(1 + delta/v) = sum (-1)^(r+1) (delta/v)^r / r
    term = mpf(delta)
    for r in range(1, R + 1):
        s.a[r] += (-1) ** (r + 1) * term / r
        term *= delta
    if delta:
        ratio = abs(mpf(delta)) / v0
        if ratio >= 1:
            raise ShapeError("outer tail starts inside the expansion radius")
        s.rem.append((abs(term / (R + 1)) / (1 - ratio), R + 1, False))
    half = _power_series(R, 1, delta, v0)
    for r in range(R + 1):
        s.a[r] -= half.a[r] / 2
    s.rem.extend((c / 2, p, lg) for (c, p, lg) in half.rem)
    r_ = 1
    while True:
        power = 2 * r_
        if power > R + 1:
            b = bernoulli(2 * r_)
            coef = abs(mpf(b.numerator) / b.denominator) / (2 * r_)
            s.rem.append((2 * coef * v0 ** (R + 1 - power), R + 1, False))
            break
        b = bernoulli(2 * r_)
        coef = mpf(b.numerator) / b.denominator / (2 * r_)
        piece = _power_series(R, power, delta, v0)
        for r2 in range(R + 1):
            s.a[r2] -= coef * piece.a[r2]
        s.rem.extend((abs(coef) * c, p, lg) for (c, p, lg) in piece.rem)
        r_ += 1
    return s


# ---------------------------------------------------------------------------
# Outer summation of one atom
# ---------------------------------------------------------------------------

def _trans_table(trans, slope, u0, U0, cache):
    """Values of Z(slope*u + gamma) for u in [u0, U0) by one-step recurrence."""
    kind = trans[0]
    if kind == "zeta":
        j, gz = trans[1], trans[2]
        if not isinstance(j, int):
            raise ShapeError("transcendental table needs an integer order")
        top = slope * (U0 - 1) + gz
        cur = cache.zeta(j, top)
        vals = [None] * (U0 - u0)
        val = cur.value
        vals[U0 - 1 - u0] = val
        a = top
        for u in range(U0 - 2, u0 - 1, -1):
            for _ in range(slope):
                a = a - 1
                val = val + a ** (-j)
            vals[u - u0] = val
        return vals, cur.abs_error_bound
    gz = trans[1]
    top = slope * (U0 - 1) + gz
    cur = cache.psi(top)
    vals = [None] * (U0 - u0)
    val = cur.value
    vals[U0 - 1 - u0] = val
    a = top
    for u in range(U0 - 2, u0 - 1, -1):
        for _ in range(slope):
            a = a - 1
            val = val - 1 / a
        vals[u - u0] = val
    return vals, cur.abs_error_bound


def _sum_atom(atom: Atom, u0: int, phase, cache: EvalCache, ctx,
              U0=None) -> EvalResult:
    """sum_{u>=u0} phase(u) * atom(u).

    phase is None (constant 1) for the Euler-Maclaurin path, or a pair
    (X, x0) meaning x0 * X^u with |X| < 1 for the geometric path.
    """
    lam = atom.slope
    if phase is not None:
        X, x0 = phase
        return _sum_atom_geometric(atom, u0, X, x0, cache, ctx)
    U0 = U0 or (u0 + max(64, int(0.6 * ctx.dps) + 10))
    tvals, tbnd = (None, mpf(0))
    if atom.trans is not None:
        tvals, tbnd = _trans_table(atom.trans, lam, u0, U0, cache)
    total = mpf(0)
    for u in range(u0, U0):
        val = mpf(1)
        for (g, p) in atom.rpows:
            val = val * (lam * u + g) ** (-p)
        if atom.trans is not None:
            val = val * tvals[u - u0]
        total = total + val
    direct_bound = tbnd * (U0 - u0 + 1) + abs(total) * mpf(10) ** (-(ctx.dps + 2))
    # tail by expansion about v = lam*u + gamma_star
    gamma_star = atom.trans[-1] if atom.trans else atom.rpows[0][0]
    v0 = lam * U0 + gamma_star
    if v0 <= 0:
        raise ShapeError("tail starts at a nonpositive argument")
    max_delta = max([abs(mpf(g) - gamma_star) for (g, _) in atom.rpows] + [mpf(0)])
    if atom.trans is not None:
        max_delta = max(max_delta, abs(mpf(atom.trans[-1]) - gamma_star))
    if v0 < 2 * max_delta + 8:
        U0b = int((2 * max_delta + 8 - gamma_star) / lam) + 1
        return _sum_atom(atom, u0, phase, cache, ctx, U0=max(U0 + 8, U0b))
    R = max(36, int(ctx.dps * 2.303 / mp.log(v0 / max(max_delta, mpf(1)))) + 8)
    frac_extra = mpf(0)
    series = None
    for (g, p) in atom.rpows:
        pm = mpf(p)
        if pm != mp.floor(pm):
            # one fractional exponent allowed; shift the whole grid by it
            if frac_extra:
                raise ShapeError("more than one fractional outer exponent")
            frac_extra = pm - mp.floor(pm)
    for (g, p) in atom.rpows:
        pm = mpf(p)
        off = frac_extra if pm != mp.floor(pm) else 0
        piece = _power_series(R, pm - off, mpf(g) - gamma_star, v0)
        series = piece if series is None else series.mul(piece, v0)
    if atom.trans is not None:
        kind = atom.trans[0]
        if kind == "zeta":
            piece = _zeta_series(R, atom.trans[1], mpf(atom.trans[-1]) - gamma_star, v0, ctx)
        else:
            piece = _psi_series(R, mpf(atom.trans[-1]) - gamma_star, v0, ctx)
        series = piece if series is None else series.mul(piece, v0)
    # base sums: sum_{u>=U0} v^-(r+frac_extra) and the log-weighted companion
    tail = mpf(0)
    tail_bound = mpf(0)
    abase = U0 + gamma_star / lam
    for r in range(R + 1):
        ar, br = series.a[r], series.b[r]
        if ar == 0 and br == 0:
            continue
        rp = r + frac_extra
        if rp <= 1:
            raise ShapeError("divergent outer tail")
        zr = cache.zeta(rp if frac_extra else r, abase)
        base = lam ** (-mpf(rp)) * zr.value
        tail = tail + ar * base
        tail_bound = tail_bound + abs(ar) * lam ** (-mpf(rp)) * zr.abs_error_bound
        if br != 0:
            lz = cache.log_zeta(rp if frac_extra else r, abase)
            logbase = lam ** (-mpf(rp)) * (mp.log(lam) * zr.value + lz.value)
            tail = tail + br * logbase
            tail_bound = tail_bound + abs(br) * lam ** (-mpf(rp)) * (
                mp.log(lam) * zr.abs_error_bound + lz.abs_error_bound)
    for (c, p, lg) in series.rem:
        if c == 0:
            continue
        pr = p + frac_extra
        zr = cache.zeta(pr if frac_extra else p, abase)
        extra = c * lam ** (-mpf(pr)) * abs(zr.value)
        if lg:
            lz = cache.log_zeta(pr if frac_extra else p, abase)
            extra += c * lam ** (-mpf(pr)) * (abs(mp.log(lam)) * abs(zr.value) + abs(lz.value))
        tail_bound = tail_bound + extra
    out_val = total + tail
    bound = direct_bound + tail_bound + abs(out_val) * mpf(10) ** (-(ctx.dps + 2))
    res = EvalResult(out_val, bound, "euler_maclaurin")
    return atom.coef.times(res)


def _sum_atom_geometric(atom: Atom, u0: int, X, x0, cache: EvalCache, ctx) -> EvalResult:
    """Geometric outer phase: truncate when |X|^u underflows the target."""
    lam = atom.slope
    eps = ctx.eps
    r = abs(X)
    if r >= 1:
        raise ShapeError("geometric path needs |X| < 1")
    U1 = u0 + int(mp.ceil((ctx.dps + 6) * mp.log(10) / (-mp.log(r)))) + 4
    # transcendental table top-down
    tvals = None
    if atom.trans is not None:
        kind = atom.trans[0]
        if kind == "zeta":
            j, gz = atom.trans[1], atom.trans[2]
            cur = cache.zeta(j, lam * U1 + gz)
        else:
            gz = atom.trans[1]
            cur = cache.psi(lam * U1 + gz)
        tvals = [None] * (U1 - u0 + 1)
        val = cur.value
        tbnd = cur.abs_error_bound
        tvals[U1 - u0] = val
        a = lam * U1 + gz
        for u in range(U1 - 1, u0 - 1, -1):
            for _ in range(lam):
                a = a - 1
                if kind == "zeta":
                    val = val + a ** (-mpf(j) if not isinstance(j, int) else -j)
                else:
                    val = val - 1 / a
            tvals[u - u0] = val
    else:
        tbnd = mpf(0)
    total = mpf(0)
    xp = x0 * X ** u0
    last_mag = mpf(0)
    for u in range(u0, U1 + 1):
        val = mpf(1)
        for (g, p) in atom.rpows:
            val = val * (lam * u + g) ** (-p)
        if tvals is not None:
            val = val * tvals[u - u0]
        total = total + xp * val
        last_mag = abs(val)
        xp = xp * X
    tail_bound = abs(xp) * last_mag / (1 - r) * 2
    bound = tail_bound + tbnd * (U1 - u0 + 1) + abs(total) * mpf(10) ** (-(ctx.dps + 2))
    return atom.coef.times(EvalResult(total, bound, "direct_tail"))


# ---------------------------------------------------------------------------
# Residue-class splitting and term assembly
# ---------------------------------------------------------------------------

def _exp_value(f):
    if not expr_is_num(f.exp):
        raise ShapeError("symbolic exponent at evaluation time")
    return f.exp[1]


def _as_int(q: Fraction, what: str) -> int:
    if q.denominator != 1:
        raise ShapeError(f"{what} must be an integer for the closed-form catalog")
    return int(q)


def _b_value(params, needed):
    b = params.get("b")
    if b is None:
        if needed:
            raise DomainError("term references the shift parameter b, none bound")
        return None, None
    if isinstance(b, Fraction):
        return _frac_to_mp(b), b
    return mpf(b), None


def _resolve_m0(m_range, b_exact, b_mp):
    if m_range == "m>=0":
        return 0
    if m_range == "m>=1":
        return 1
    if b_exact is not None:
        return 1 if b_exact < 1 else 2
    if b_mp is None:
        raise DomainError("range m>b needs a bound b")
    return 1 if b_mp < 1 else 2


def _cong_modulus(cong):
    if cong is None:
        return 1
    if not expr_is_num(cong.modulus):
        raise ShapeError("unbound congruence modulus")
    return _as_int(cong.modulus[1], "congruence modulus")


def _xspec_of(params):
    x = params.get("x")
    if x is None:
        return XSpec.one()
    if isinstance(x, XSpec):
        return x
    return XSpec.number(x)


def eval_double_reduction(term: DoubleSumTerm, params, ctx: PrecisionContext,
                          cache: EvalCache | None = None) -> EvalResult:
    """Closed-form reduction of a concrete double term; ShapeError on misses."""
    with ctx.workdps():
        cache = cache or EvalCache(ctx)
        xsel = term.xsel
        x = _xspec_of(params) if xsel.kind != "none" else XSpec.one()
        needs_b = any(f.shift.q1 for f in term.factors) or term.m_range == "m>b"
        b_mp, b_exact = _b_value(params, needs_b)
        chars = {name: params[name] for (name, _) in term.twists}

        if x.kind == "zero" and xsel.kind != "none":
            return _eval_double_x_zero(term, params, ctx, cache)
        if x.kind == "num" and xsel.kind == "xmn":
            return _eval_double_geometric2d(term, x, params, ctx)
        if x.kind == "num" and abs(x.value) >= 1:
            raise ShapeError("boundary x that is not a root of unity")

        inner = "n" if xsel.kind == "xm" else "m"
        outer = "n" if inner == "m" else "m"
        combo_of = {"m": "m", "n": "n"}
        ifac = term.factor(combo_of[inner])
        ofacs = [f for f in term.factors if f.combo == combo_of[outer]]
        jfac = term.factor("mn")

        # split requirements per index
        Nmod = _cong_modulus(term.cong)
        req = {"m": 1, "n": 1}
        if x.kind == "ru":
            touched = {"xn": ("n",), "xm": ("m",), "xmn": ("m", "n")}[xsel.kind]
            for idx in touched:
                req[idx] = math.lcm(req[idx], x.f)
        coupled = term.cong is not None or xsel.kind == "xmn"
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
        if coupled or req[inner] > 1:
            lam = math.lcm(req["m"], req["n"])
            lam_i = lam_o = lam
        else:
            lam_i, lam_o = 1, req[outer]

        m0 = _resolve_m0(term.m_range, b_exact, b_mp)
        n0 = 0 if term.n_range == "n>=0" else 1
        i0, o0 = (m0, n0) if inner == "m" else (n0, m0)

        eI = _exp_value(ifac) if ifac is not None else Fraction(0)
        q = _exp_value(jfac) if jfac is not None else Fraction(0)
        gI = shift_value(ifac.shift, b_mp) if ifac is not None else mpf(0)
        gJ = shift_value(jfac.shift, b_mp) if jfac is not None else mpf(0)
        ofac_vals = [(shift_value(f.shift, b_mp), _exp_value(f)) for f in ofacs]

        if ifac is not None and q > 0:
            eI_i = _as_int(eI, "inner exponent")
            q_i = _as_int(q, "joint exponent")
        elif ifac is not None:
            if eI <= 1:
                raise DomainError("divergent inner sum")
            eI_i, q_i = None, None
        else:
            if jfac is None or q <= 1:
                raise DomainError("divergent inner sum")
            q_i = _as_int(q, "joint exponent")
            eI_i = None

        total = EvalResult(mpf(0), mpf(0), "reduction")
        coeff0 = _frac_to_mp(term.coeff)
        for rI in range(lam_i):
            for rO in range(lam_o):
                rm, rn = (rI, rO) if inner == "m" else (rO, rI)
                if term.cong is not None:
                    if (rm - term.cong.coeff * rn - term.cong.offset) % Nmod != 0:
                        continue
                const = mpc(coeff0)
                for (name, arg) in term.twists:
                    chi = chars[name]
                    v = chi(rm if arg == "m" else rn if arg == "n" else rm + rn)
                    if v == 0:
                        const = 0
                        break
                    const = const * mpc(v)
                if const == 0:
                    continue
                phase = None
                if xsel.kind != "none" and x.kind != "one":
                    pconst = {"xn": rn, "xm": rm, "xmn": rm + rn}[xsel.kind] + xsel.d
                    if x.kind == "ru":
                        const = const * x.power(pconst, ctx)
                    else:
                        # geometric phase on the outer index only
                        const = const * x.value ** pconst
                        phase = (x.value ** lam_o, mpf(1))
                t0 = math.ceil((i0 - rI) / lam_i)
                u0 = math.ceil((o0 - rO) / lam_o)
                cls = _class_atoms(eI_i, q_i, eI, q, gI, gJ, ofac_vals,
                                   rI, rO, lam_i, lam_o, t0, cache, ctx)
                for atom in cls:
                    atom.coef = atom.coef.scale(const)
                    total = total + _sum_atom(atom, u0, phase, cache, ctx)
        return EvalResult(total.value, total.abs_error_bound, "reduction")


def _class_atoms(eI_i, q_i, eI, q, gI, gJ, ofac_vals, rI, rO,
                 lam_i, lam_o, t0, cache, ctx):
    """Atoms of the inner closed form on one residue class."""
    atoms = []
    if lam_i == 1:
        slope = lam_o
        aI = rI + gI
        base_rpows = [(rO + gN, p) for (gN, p) in ofac_vals]
        wg = rO + gJ - gI
        zg = rO + gJ + t0
        prefactor = mpf(1)
    else:
        lam = lam_i
        slope = 1
        aI = (rI + gI) / lam
        base_rpows = [((rO + gN) / lam, p) for (gN, p) in ofac_vals]
        wg = (rO + gJ - gI) / lam
        zg = (rI + rO + gJ) / lam + t0
        ptot = (eI if eI else 0) + (q if q else 0) + sum(p for (_, p) in ofac_vals)
        prefactor = mpf(lam) ** (-_frac_to_mp(Fraction(ptot)))

    def norm_p(p):
        if isinstance(p, Fraction):
            return int(p) if p.denominator == 1 else _frac_to_mp(p)
        return p

    def mk(res_coef, extra_rpows, trans):
        rp = tuple((g, norm_p(p)) for (g, p) in tuple(base_rpows) + tuple(extra_rpows))
        atoms.append(Atom(res_coef, slope, rp, trans))

    one = EvalResult(prefactor, mpf(0), "reduction")
    if eI_i is None and q_i is not None:
        # joint factor only: inner sum is zeta(q, t0 + aJ(u))
        if q_i < 2:
            raise DomainError("divergent inner sum")
        mk(one, [], ("zeta", q_i, zg))
        return atoms
    if eI_i is None:
        # pure inner factor: constant zeta(eI, t0 + aI)
        zc = cache.zeta(eI if isinstance(eI, int) else _frac_to_mp(eI), t0 + aI)
        mk(one.times(zc), [], None)
        return atoms
    # two-pole case
    A, B = two_pole_coeffs(eI_i, q_i)
    for i in range(2, eI_i + 1):
        zc = cache.zeta(i, t0 + aI)
        coef = one.times(zc).scale(_frac_to_mp(A[i]))
        mk(coef, [(wg, eI_i + q_i - i)], None)
    for j in range(2, q_i + 1):
        coef = one.scale(_frac_to_mp(B[j]))
        mk(coef, [(wg, eI_i + q_i - j)], ("zeta", j, zg))
    A1 = _frac_to_mp(A[1])
    mk(one.scale(A1), [(wg, eI_i + q_i - 1)], ("psi", zg))
    pc = cache.psi(t0 + aI)
    mk(one.times(pc).scale(-A1), [(wg, eI_i + q_i - 1)], None)
    return atoms


def _eval_double_x_zero(term, params, ctx, cache) -> EvalResult:
    """x = 0: only the summands with a vanishing x exponent survive."""
    xsel = term.xsel
    needs_b = any(f.shift.q1 for f in term.factors) or term.m_range == "m>b"
    b_mp, b_exact = _b_value(params, needs_b)
    m0 = _resolve_m0(term.m_range, b_exact, b_mp)
    n0 = 0 if term.n_range == "n>=0" else 1
    coeff0 = _frac_to_mp(term.coeff)
    if xsel.kind == "xn":
        n = -xsel.d
        if n < n0:
            return EvalResult(mpf(0), mpf(0), "closed_form")
        inner = eval_inner_closed(term, n, params, ctx, cache=cache, include_phase=False)
        return inner.scale(mpf(1))
    # xm / xmn: finitely many surviving lattice points
    total = EvalResult(mpf(0), mpf(0), "closed_form")
    target = -xsel.d
    pairs = []
    if xsel.kind == "xm":
        raise ShapeError("x = 0 with an x^m numerator leaves an uncatalogued n-sum")
    for m in range(m0, max(m0, target) + 1):
        n = target - m
        if n >= n0:
            pairs.append((m, n))
    for (m, n) in pairs:
        if term.cong is not None:
            Nmod = _cong_modulus(term.cong)
            if (m - term.cong.coeff * n - term.cong.offset) % Nmod != 0:
                continue
        val = coeff0
        for f in term.factors:
            g = shift_value(f.shift, b_mp)
            basev = {"m": m, "n": n, "mn": m + n}[f.combo] + g
            val = val * basev ** (-_frac_to_mp(_exp_value(f)))
        total = total + EvalResult(val, abs(val) * ctx.eps, "closed_form")
    return total


def eval_inner_closed(term: DoubleSumTerm, n: int, params, ctx: PrecisionContext,
                      cache: EvalCache | None = None, include_phase: bool = True) -> EvalResult:
    """Inner m-sum at fixed integer n as zetas, digammas, and rationals.

    Catalogued shapes: only a joint chain; or one pure-m factor of any
    positive integer order together with an optional joint chain. The x power
    must not involve m. Congruences and twists are handled by the full
    class-splitting evaluator, not here.
    """
    with ctx.workdps():
        cache = cache or EvalCache(ctx)
        if term.cong is not None or term.twists:
            raise ShapeError("inner closed form on a bare term only")
        if term.xsel.kind in ("xm", "xmn"):
            raise ShapeError("x power involves the inner index")
        needs_b = any(f.shift.q1 for f in term.factors) or term.m_range == "m>b"
        b_mp, b_exact = _b_value(params, needs_b)
        m0 = _resolve_m0(term.m_range, b_exact, b_mp)
        n_min = 0 if term.n_range == "n>=0" else 1
        if n < n_min:
            raise DomainError("n below the term's range")
        mfac = term.factor("m")
        jfac = term.factor("mn")
        scale = _frac_to_mp(term.coeff)
        for f in term.factors:
            if f.combo == "n":
                g = shift_value(f.shift, b_mp)
                scale = scale * (n + g) ** (-_frac_to_mp(_exp_value(f)))
        if include_phase and term.xsel.kind == "xn":
            x = _xspec_of(params)
            scale = scale * x.power(n + term.xsel.d, ctx)
        if mfac is None and jfac is None:
            raise DomainError("no inner factors: divergent")
        if mfac is None:
            q = _exp_value(jfac)
            gJ = shift_value(jfac.shift, b_mp)
            if q <= 1:
                raise DomainError("divergent inner sum")
            res = cache.zeta(_as_int(q, "exponent") if q.denominator == 1 else _frac_to_mp(q),
                             m0 + n + gJ)
            return res.scale(scale)
        e = _as_int(_exp_value(mfac), "inner exponent")
        gM = shift_value(mfac.shift, b_mp)
        aM = m0 + gM
        if mp.re(aM) <= 0:
            raise DomainError("inner factor vanishes inside the range")
        if jfac is None:
            if e < 2:
                raise DomainError("divergent inner sum")
            return cache.zeta(e, aM).scale(scale)
        q = _as_int(_exp_value(jfac), "joint exponent")
        gJ = shift_value(jfac.shift, b_mp)
        aJ = m0 + n + gJ
        w = aJ - aM
        A, B = two_pole_coeffs(e, q)
        total = EvalResult(mpf(0), mpf(0), "closed_form")
        for i in range(2, e + 1):
            total = total + cache.zeta(i, aM).scale(_frac_to_mp(A[i]) * w ** (-(q + e - i)))
        for j in range(2, q + 1):
            total = total + cache.zeta(j, aJ).scale(_frac_to_mp(B[j]) * w ** (-(e + q - j)))
        A1 = _frac_to_mp(A[1]) * w ** (-(e + q - 1))
        total = total + (cache.psi(aJ) - cache.psi(aM)).scale(A1)
        return total.scale(scale)


def _eval_double_geometric2d(term, x: XSpec, params, ctx) -> EvalResult:
    """x^(m+n+d) with |x| < 1: direct double truncation, geometric bounds."""
    with ctx.workdps():
        needs_b = any(f.shift.q1 for f in term.factors) or term.m_range == "m>b"
        b_mp, b_exact = _b_value(params, needs_b)
        m0 = _resolve_m0(term.m_range, b_exact, b_mp)
        n0 = 0 if term.n_range == "n>=0" else 1
        r = abs(x.value)
        T = int(mp.ceil((ctx.dps + 8) * mp.log(10) / (-mp.log(r)))) + 2
        Nmod = _cong_modulus(term.cong)
        cc = term.cong.coeff if term.cong else 0
        ce = term.cong.offset if term.cong else 0
        fvals = [(f.combo, shift_value(f.shift, b_mp), _frac_to_mp(_exp_value(f)))
                 for f in term.factors]
        coeff0 = _frac_to_mp(term.coeff)
        chars = {name: params[name] for (name, _) in term.twists}
        total = mpf(0)
        for m in range(m0, m0 + T + 1):
            for n in range(n0, n0 + T + 1):
                if Nmod > 1 and (m - cc * n - ce) % Nmod != 0:
                    continue
                cval = mpc(1)
                ok = True
                for (name, arg) in term.twists:
                    v = chars[name](m if arg == "m" else n if arg == "n" else m + n)
                    if v == 0:
                        ok = False
                        break
                    cval = cval * mpc(v)
                if not ok:
                    continue
                val = x.value ** (m + n + term.xsel.d) * cval
                for (combo, g, p) in fvals:
                    basev = {"m": m, "n": n, "mn": m + n}[combo] + g
                    val = val * basev ** (-p)
                total = total + val
        corner = mpf(1)
        for (combo, g, p) in fvals:
            basev = {"m": m0, "n": n0, "mn": m0 + n0}[combo] + g
            corner = corner * abs(basev) ** (-p)
        tail = 2 * r ** (T + 1) / (1 - r) ** 2 * corner
        total = total * coeff0
        bound = abs(coeff0) * tail + abs(total) * mpf(10) ** (-(ctx.dps + 2))
        return EvalResult(total, bound, "direct_tail")


# ---------------------------------------------------------------------------
# Single sums
# ---------------------------------------------------------------------------

def eval_single_reduction(term: SingleSumTerm, params, ctx: PrecisionContext,
                          cache: EvalCache | None = None) -> EvalResult:
    """Single sums via the Lerch transcendent after residue-class splitting."""
    from .specfun import lerch_phi

    with ctx.workdps():
        cache = cache or EvalCache(ctx)
        x = _xspec_of(params) if term.xsel.kind != "none" else XSpec.one()
        needs_b = term.factor.shift.q1 != 0
        b_mp, b_exact = _b_value(params, needs_b)
        n0 = 0 if term.n_range == "n>=0" else 1
        e = _exp_value(term.factor)
        gamma = shift_value(term.factor.shift, b_mp)
        d = term.xsel.d if term.xsel.kind == "xn" else 0
        coeff0 = _frac_to_mp(term.coeff)
        chi = params[term.twist] if term.twist else None

        if x.kind == "zero":
            n = -d
            if n < n0:
                return EvalResult(mpf(0), mpf(0), "closed_form")
            val = coeff0 * (n + gamma) ** (-_frac_to_mp(e))
            return EvalResult(val, abs(val) * ctx.eps, "closed_form")

        lam = 1
        if term.cong is not None:
            lam = math.lcm(lam, _cong_modulus_single(term.cong))
        if term.sin_weight is not None:
            lam = math.lcm(lam, _sin_modulus(term.sin_weight))
        if chi is not None:
            lam = math.lcm(lam, chi.modulus)

        ev = _frac_to_mp(e)
        total = EvalResult(mpf(0), mpf(0), "reduction")
        for rr in range(lam):
            if term.cong is not None:
                N = _cong_modulus_single(term.cong)
                if (term.cong.mult * rr + term.cong.off) % N != 0:
                    continue
            const = mpc(coeff0)
            if term.sin_weight is not None:
                N = _sin_modulus(term.sin_weight)
                if term.sin_weight.parity == "even":
                    if rr % N == 0:
                        continue
                    const = const / mp.sinpi(mpf(2 * (rr % N)) / N)
                else:
                    if (2 * rr + 1) % N == 0:
                        continue
                    const = const / mp.sinpi(mpf((2 * rr + 1) % (2 * N)) / N)
            if chi is not None:
                v = chi(rr)
                if v == 0:
                    continue
                const = const * mpc(v)
            t0 = math.ceil((n0 - rr) / lam)
            if term.xsel.kind == "xn":
                const = const * x.power(rr + d + lam * t0, ctx)
            if x.kind in ("one", "ru") or term.xsel.kind == "none":
                xl = XSpec.one() if (x.kind == "one" or term.xsel.kind == "none") \
                    else x.pow_root(lam)
                phi = lerch_phi(xl.numeric(ctx), ev if e.denominator != 1 else int(e),
                                t0 + (rr + gamma) / lam, ctx,
                                x_root=(xl.f, xl.a) if xl.kind == "ru" else (1, 0))
            else:
                xl_num = x.value ** lam
                phi = lerch_phi(xl_num, ev if e.denominator != 1 else int(e),
                                t0 + (rr + gamma) / lam, ctx)
            total = total + phi.scale(const * mpf(lam) ** (-ev))
        return EvalResult(total.value, total.abs_error_bound, total.method)


def _cong_modulus_single(cong):
    if not expr_is_num(cong.modulus):
        raise ShapeError("unbound congruence modulus")
    return _as_int(cong.modulus[1], "congruence modulus")


def _sin_modulus(sw):
    if not expr_is_num(sw.modulus):
        raise ShapeError("unbound sin-weight modulus")
    return _as_int(sw.modulus[1], "sin-weight modulus")
