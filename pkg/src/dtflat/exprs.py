"""Exact multivariate rational functions over the rationals.

A Scalar is a quotient num/den of sparse polynomials with Fraction
coefficients.  Every constructor reduces to a canonical form:

  * gcd(num, den) = 1,
  * den is monic under the fixed term order,
  * no zero coefficients are stored.

Under this normal form two Scalars are mathematically equal exactly when
their term maps are identical, so ``==`` decides equality of rational
functions.  The term order is graded lexicographic over name-sorted
variables; it also fixes the printed form, which is bit-stable across runs.

Values are immutable; all operations are pure functions.  No floating
point enters any computation except the explicit ``eval_float`` helper,
which exists only for cross-checks against finite differences.
"""

from __future__ import annotations

import functools
import math
import re
from fractions import Fraction
from typing import Iterable, Mapping

from .errors import (
    CoefficientVanishes,
    DivisionByZeroScalar,
    EvalSingular,
    NonRationalExpression,
    NotLinearInVariable,
    ParseError,
    SubstitutionSingular,
)

# A monomial is a tuple of (variable name, positive exponent) pairs sorted
# by name; the empty tuple is the constant monomial.
Mono = tuple  # tuple[tuple[str, int], ...]

_MONO_ONE: Mono = ()


def _mono_mul(a: Mono, b: Mono) -> Mono:
    if not a:
        return b
    if not b:
        return a
    out = []
    i = j = 0
    while i < len(a) and j < len(b):
        na, ea = a[i]
        nb, eb = b[j]
        if na == nb:
            out.append((na, ea + eb))
            i += 1
            j += 1
        elif na < nb:
            out.append(a[i])
            i += 1
        else:
            out.append(b[j])
            j += 1
    out.extend(a[i:])
    out.extend(b[j:])
    return tuple(out)


def _mono_degree(a: Mono) -> int:
    return sum(e for _, e in a)


def _mono_cmp(a: Mono, b: Mono) -> int:
    """Graded lexicographic order: higher total degree wins; ties are
    broken on the name-sorted exponent vectors, where a larger exponent on
    the alphabetically earliest differing variable wins."""
    da, db = _mono_degree(a), _mono_degree(b)
    if da != db:
        return 1 if da > db else -1
    i = j = 0
    while i < len(a) or j < len(b):
        na = a[i][0] if i < len(a) else None
        nb = b[j][0] if j < len(b) else None
        if na == nb:
            ea, eb = a[i][1], b[j][1]
            if ea != eb:
                return 1 if ea > eb else -1
            i += 1
            j += 1
        elif nb is None or (na is not None and na < nb):
            return 1  # a has the earlier variable with positive exponent
        else:
            return -1
    return 0


def _mono_divides(a: Mono, b: Mono) -> bool:
    """True when monomial a divides b."""
    exps = dict(b)
    return all(exps.get(n, 0) >= e for n, e in a)


def _mono_div(a: Mono, b: Mono) -> Mono:
    """a / b, assuming b divides a."""
    exps = dict(a)
    for n, e in b:
        exps[n] -= e
    return tuple(sorted((n, e) for n, e in exps.items() if e))


class Poly:
    """Sparse multivariate polynomial with Fraction coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms: dict):
        # Internal constructor: assumes zero-free Fraction values.
        self.terms = terms

    @classmethod
    def from_terms(cls, items: Iterable) -> "Poly":
        terms: dict = {}
        for mono, coeff in items:
            c = terms.get(mono, _F0) + Fraction(coeff)
            if c:
                terms[mono] = c
            else:
                terms.pop(mono, None)
        return cls(terms)

    @classmethod
    def const(cls, c) -> "Poly":
        c = Fraction(c)
        return cls({_MONO_ONE: c} if c else {})

    @classmethod
    def variable(cls, name: str) -> "Poly":
        return cls({((name, 1),): _F1})

    # ----------------------------------------------------------- queries

    def is_zero(self) -> bool:
        return not self.terms

    def is_const(self) -> bool:
        return not self.terms or (len(self.terms) == 1 and _MONO_ONE in self.terms)

    def const_value(self) -> Fraction:
        if not self.terms:
            return _F0
        return self.terms[_MONO_ONE]

    def vars(self) -> set:
        out: set = set()
        for mono in self.terms:
            for name, _ in mono:
                out.add(name)
        return out

    def degree_in(self, name: str) -> int:
        best = 0
        for mono in self.terms:
            for n, e in mono:
                if n == name and e > best:
                    best = e
        return best

    def leading(self) -> tuple:
        """(monomial, coefficient) of the largest term; requires nonzero."""
        it = iter(self.terms)
        best = next(it)
        for mono in it:
            if _mono_cmp(mono, best) > 0:
                best = mono
        return best, self.terms[best]

    # -------------------------------------------------------- arithmetic

    def __add__(self, other: "Poly") -> "Poly":
        if not self.terms:
            return other
        if not other.terms:
            return self
        terms = dict(self.terms)
        for mono, c in other.terms.items():
            s = terms.get(mono, _F0) + c
            if s:
                terms[mono] = s
            else:
                del terms[mono]
        return Poly(terms)

    def __sub__(self, other: "Poly") -> "Poly":
        if not other.terms:
            return self
        terms = dict(self.terms)
        for mono, c in other.terms.items():
            s = terms.get(mono, _F0) - c
            if s:
                terms[mono] = s
            else:
                del terms[mono]
        return Poly(terms)

    def __neg__(self) -> "Poly":
        return Poly({m: -c for m, c in self.terms.items()})

    def __mul__(self, other: "Poly") -> "Poly":
        if not self.terms or not other.terms:
            return Poly({})
        terms: dict = {}
        for ma, ca in self.terms.items():
            for mb, cb in other.terms.items():
                m = _mono_mul(ma, mb)
                s = terms.get(m, _F0) + ca * cb
                if s:
                    terms[m] = s
                else:
                    del terms[m]
        return Poly(terms)

    def scale(self, c: Fraction) -> "Poly":
        if not c:
            return Poly({})
        return Poly({m: v * c for m, v in self.terms.items()})

    def __pow__(self, n: int) -> "Poly":
        if n < 0:
            raise ValueError("negative power of a polynomial")
        out = Poly.const(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __eq__(self, other) -> bool:
        return isinstance(other, Poly) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    # ------------------------------------------------------ calculus etc

    def diff(self, name: str) -> "Poly":
        terms: dict = {}
        for mono, c in self.terms.items():
            for idx, (n, e) in enumerate(mono):
                if n != name:
                    continue
                if e == 1:
                    new = mono[:idx] + mono[idx + 1:]
                else:
                    new = mono[:idx] + ((n, e - 1),) + mono[idx + 1:]
                s = terms.get(new, _F0) + c * e
                if s:
                    terms[new] = s
                else:
                    del terms[new]
                break
        return Poly(terms)

    def rename(self, mapping: Mapping[str, str]) -> "Poly":
        terms: dict = {}
        for mono, c in self.terms.items():
            new = tuple(sorted((mapping.get(n, n), e) for n, e in mono))
            if len({n for n, _ in new}) != len(new):
                raise ValueError("rename collides variable names")
            terms[new] = c
        return Poly(terms)

    def eval_fraction(self, point: Mapping[str, Fraction]) -> Fraction:
        total = _F0
        for mono, c in self.terms.items():
            v = c
            for n, e in mono:
                v *= point[n] ** e
            total += v
        return total

    def eval_float(self, point: Mapping[str, float]) -> float:
        total = 0.0
        for mono, c in self.terms.items():
            v = float(c)
            for n, e in mono:
                v *= point[n] ** e
            total += v
        return total

    # --------------------------------------------------------- printing

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        monos = sorted(self.terms, key=functools.cmp_to_key(_mono_cmp), reverse=True)
        parts = []
        for i, mono in enumerate(monos):
            c = self.terms[mono]
            neg = c < 0
            mag = -c if neg else c
            if mono == _MONO_ONE:
                body = _frac_str(mag)
            elif mag == 1:
                body = _mono_str(mono)
            else:
                body = f"{_frac_str(mag)}*{_mono_str(mono)}"
            if i == 0:
                parts.append(("-" if neg else "") + body)
            else:
                parts.append((" - " if neg else " + ") + body)
        return "".join(parts)

    def __repr__(self) -> str:
        return f"Poly({self})"


_F0 = Fraction(0)
_F1 = Fraction(1)
_P0 = Poly({})
_P1 = Poly({_MONO_ONE: _F1})


def _frac_str(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def _mono_str(mono: Mono) -> str:
    return "*".join(n if e == 1 else f"{n}^{e}" for n, e in mono)


# ------------------------------------------------------------------ gcd
#
# poly_gcd drives everything: canonical Scalars reduce num/den by it on
# every construction.  The fast path is the evaluation-homomorphism
# heuristic (map one variable to a large integer, recurse, reconstruct the
# candidate from balanced digits, verify by exact trial division, retry
# with a larger point on failure).  Acceptance is by exact division, so a
# wrong candidate is never returned; if the heuristic gives up, a primitive
# pseudo-remainder sequence takes over, with its content computations
# routed back through the fast path.

def _as_uni(p: Poly, x: str) -> dict:
    """View p as a univariate polynomial in x: degree -> Poly coefficient."""
    out: dict = {}
    for mono, c in p.terms.items():
        deg = 0
        rest = mono
        for idx, (n, e) in enumerate(mono):
            if n == x:
                deg = e
                rest = mono[:idx] + mono[idx + 1:]
                break
        coeff = out.get(deg)
        if coeff is None:
            out[deg] = Poly({rest: c})
        else:
            t = dict(coeff.terms)
            s = t.get(rest, _F0) + c
            if s:
                t[rest] = s
            else:
                del t[rest]
            out[deg] = Poly(t)
    return {d: q for d, q in out.items() if not q.is_zero()}


def _from_uni(u: dict, x: str) -> Poly:
    total = _P0
    for deg, coeff in u.items():
        xm = Poly({((x, deg),): _F1}) if deg else _P1
        total = total + coeff * xm
    return total


def _uni_prem(f: dict, g: dict, x: str) -> dict:
    """Pseudo-remainder of univariate views f, g (g nonzero, deg g >= 1)."""
    dg = max(g)
    lg = g[dg]
    r = dict(f)
    while r:
        dr = max(r)
        if dr < dg:
            break
        lr = r[dr]
        # r <- lg*r - lr*g*x^(dr-dg)
        new: dict = {}
        for d, c in r.items():
            new[d] = c * lg
        for d, c in g.items():
            dd = d + dr - dg
            v = new.get(dd, _P0) - lr * c
            if v.is_zero():
                new.pop(dd, None)
            else:
                new[dd] = v
        r = {d: c for d, c in new.items() if not c.is_zero()}
    return r


def _monic(p: Poly) -> Poly:
    if p.is_zero():
        return p
    _, lc = p.leading()
    return p if lc == 1 else p.scale(1 / lc)


def _content(p: Poly, x: str) -> Poly:
    coeffs = list(_as_uni(p, x).values())
    g = coeffs[0]
    for c in coeffs[1:]:
        if g.is_const():
            return _P1
        g = poly_gcd(g, c)
    return _monic(g)


def poly_divexact(a: Poly, b: Poly) -> Poly:
    """Exact division a / b; raises if b does not divide a."""
    if b.is_zero():
        raise ZeroDivisionError("polynomial division by zero")
    if a.is_zero():
        return _P0
    if b.is_const():
        return a.scale(1 / b.const_value())
    lb_mono, lb_coeff = b.leading()
    q_terms: dict = {}
    r = a
    while not r.is_zero():
        lr_mono, lr_coeff = r.leading()
        if not _mono_divides(lb_mono, lr_mono):
            raise ArithmeticError("inexact polynomial division")
        qm = _mono_div(lr_mono, lb_mono)
        qc = lr_coeff / lb_coeff
        q_terms[qm] = q_terms.get(qm, _F0) + qc
        r = r - b * Poly({qm: qc})
    return Poly({m: c for m, c in q_terms.items() if c})


def _int_split(p: Poly) -> tuple:
    """Split an integer-coefficient polynomial into (positive integer
    content, primitive part)."""
    g = 0
    for c in p.terms.values():
        g = math.gcd(g, abs(int(c)))
        if g == 1:
            return 1, p
    return g, p.scale(Fraction(1, g))


def _to_int_primitive(p: Poly) -> Poly:
    """Scale a rational polynomial to integer coefficients with content 1
    and positive leading coefficient."""
    num_gcd = 0
    den_lcm = 1
    for c in p.terms.values():
        num_gcd = math.gcd(num_gcd, abs(c.numerator))
        den_lcm = den_lcm * c.denominator // math.gcd(den_lcm, c.denominator)
    scaled = p.scale(Fraction(den_lcm, num_gcd))
    _, lc = scaled.leading()
    return scaled.scale(-1) if lc < 0 else scaled


def _int_norm(p: Poly) -> int:
    return max(abs(int(c)) for c in p.terms.values())


def _eval_var_int(p: Poly, x: str, xi: int) -> Poly:
    """Substitute x := xi (a large integer) exactly."""
    terms: dict = {}
    for mono, c in p.terms.items():
        deg = 0
        rest = mono
        for idx, (n, e) in enumerate(mono):
            if n == x:
                deg = e
                rest = mono[:idx] + mono[idx + 1:]
                break
        v = terms.get(rest, _F0) + c * xi ** deg
        if v:
            terms[rest] = v
        else:
            terms.pop(rest, None)
    return Poly(terms)


def _interp_digits(gamma: Poly, x: str, xi: int):
    """Reconstruct a candidate polynomial in x from the base-xi balanced
    digits of gamma's coefficients."""
    terms: dict = {}
    cur = gamma
    half = xi // 2
    for power in range(0, 2000):
        if cur.is_zero():
            return Poly(terms)
        digit_terms = {}
        next_terms = {}
        for mono, c in cur.terms.items():
            c = int(c)
            r = c % xi
            if r > half:
                r -= xi
            if r:
                digit_terms[mono] = Fraction(r)
            q = (c - r) // xi
            if q:
                next_terms[mono] = Fraction(q)
        for mono, c in digit_terms.items():
            new = _mono_mul(mono, ((x, power),)) if power else mono
            terms[new] = c
        cur = Poly(next_terms)
    return None


def _try_divides(a: Poly, b: Poly):
    """a / b when exact, else None."""
    try:
        return poly_divexact(a, b)
    except ArithmeticError:
        return None


def _heu_gcd(a: Poly, b: Poly) -> Poly | None:
    """Heuristic gcd of integer-primitive polynomials; a verified exact
    divisor or None.  Exact trial division makes acceptance sound."""
    common = sorted(a.vars() & b.vars())
    if not common:
        return _P1
    x = common[-1]
    xi = 2 * min(_int_norm(a), _int_norm(b)) + 29
    for _ in range(6):
        A = _eval_var_int(a, x, xi)
        B = _eval_var_int(b, x, xi)
        if not A.is_zero() and not B.is_zero():
            ca, pa = _int_split(A)
            cb, pb = _int_split(B)
            if pa.is_const() or pb.is_const():
                sub = _P1
            else:
                sub = _heu_gcd(pa, pb)
            if sub is not None:
                gamma = sub.scale(Fraction(math.gcd(ca, cb)))
                cand = _interp_digits(gamma, x, xi)
                if cand is not None and not cand.is_zero():
                    _, cand = _int_split(cand)
                    if _try_divides(a, cand) is not None \
                            and _try_divides(b, cand) is not None:
                        return cand
        xi = 2 * xi + 29
    return None


def _gcd_inner(a: Poly, b: Poly) -> Poly:
    """gcd over Q up to a unit; inputs nonzero."""
    if a.is_const() or b.is_const():
        return _P1
    if a == b:
        return a
    if len(a.terms) == 1 or len(b.terms) == 1:
        # gcd with a monomial: componentwise minimum exponents over every
        # term of both polynomials
        common = None
        for p in (a, b):
            for mono in p.terms:
                exps = dict(mono)
                if common is None:
                    common = exps
                else:
                    common = {n: min(e, exps.get(n, 0))
                              for n, e in common.items() if exps.get(n, 0)}
        mono = tuple(sorted((n, e) for n, e in (common or {}).items() if e))
        return Poly({mono: _F1})
    if not (a.vars() & b.vars()):
        return _P1
    za = _to_int_primitive(a)
    zb = _to_int_primitive(b)
    got = _heu_gcd(za, zb)
    if got is not None:
        return got
    return _prs_gcd(za, zb)


def _prs_gcd(a: Poly, b: Poly) -> Poly:
    """Primitive pseudo-remainder sequence; contents go through the fast
    path again."""
    va, vb = a.vars(), b.vars()
    x = max(va | vb)
    if x not in va:
        return _gcd_inner(a, _content(b, x))
    if x not in vb:
        return _gcd_inner(_content(a, x), b)
    ca = _content(a, x)
    cb = _content(b, x)
    pa = poly_divexact(a, ca)
    pb = poly_divexact(b, cb)
    c = poly_gcd(ca, cb) if not (ca.is_const() and cb.is_const()) else _P1
    f, g = _as_uni(pa, x), _as_uni(pb, x)
    if max(f) < max(g):
        f, g = g, f
    while g:
        if max(g) == 0:
            return c
        r = _uni_prem(f, g, x)
        if r:
            rp = _from_uni(r, x)
            cont = _content(rp, x)
            if not cont.is_const():
                rp = poly_divexact(rp, cont)
            else:
                rp = rp.scale(1 / cont.const_value())
            f, g = g, _as_uni(rp, x)
        else:
            f, g = g, r
    result = _from_uni(f, x)
    cont = _content(result, x)
    if not cont.is_const():
        result = poly_divexact(result, cont)
    return c * result


def poly_gcd(a: Poly, b: Poly) -> Poly:
    """Monic gcd of two polynomials over Q (zero if both are zero)."""
    if a.is_zero():
        return _monic(b)
    if b.is_zero():
        return _monic(a)
    return _monic(_gcd_inner(a, b))


# --------------------------------------------------------------- Scalar

class Scalar:
    """Canonical rational function num/den over Q."""

    __slots__ = ("num", "den")

    def __init__(self, num, den=None):
        if isinstance(num, (int, Fraction)):
            num = Poly.const(num)
        if den is None:
            den = _P1
        elif isinstance(den, (int, Fraction)):
            den = Poly.const(den)
        if den.is_zero():
            raise DivisionByZeroScalar("denominator is the zero polynomial")
        if num.is_zero():
            self.num, self.den = _P0, _P1
            return
        g = poly_gcd(num, den)
        if not (g.is_const() and g.const_value() == 1):
            num = poly_divexact(num, g)
            den = poly_divexact(den, g)
        _, lc = den.leading()
        if lc != 1:
            num = num.scale(1 / lc)
            den = den.scale(1 / lc)
        self.num, self.den = num, den

    # ------------------------------------------------------ constructors

    @classmethod
    def of(cls, value) -> "Scalar":
        if isinstance(value, Scalar):
            return value
        return cls(value)

    @classmethod
    def var(cls, name: str) -> "Scalar":
        return cls(Poly.variable(name))

    # ----------------------------------------------------------- queries

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_const(self) -> bool:
        return self.num.is_const() and self.den.is_const()

    def const_value(self) -> Fraction:
        if not self.is_const():
            raise ValueError("not a constant")
        return self.num.const_value()

    def vars(self) -> set:
        return self.num.vars() | self.den.vars()

    def depends_on(self, name: str) -> bool:
        return not self.diff(name).is_zero()

    # -------------------------------------------------------- arithmetic

    def __add__(self, other) -> "Scalar":
        other = Scalar.of(other)
        if self.is_zero():
            return other
        if other.is_zero():
            return self
        if self.den == other.den:
            return Scalar(self.num + other.num, self.den)
        return Scalar(self.num * other.den + other.num * self.den,
                      self.den * other.den)

    __radd__ = __add__

    def __sub__(self, other) -> "Scalar":
        return self + (-Scalar.of(other))

    def __rsub__(self, other) -> "Scalar":
        return Scalar.of(other) + (-self)

    def __neg__(self) -> "Scalar":
        out = object.__new__(Scalar)
        out.num, out.den = -self.num, self.den
        return out

    def __mul__(self, other) -> "Scalar":
        other = Scalar.of(other)
        if self.is_zero() or other.is_zero():
            return _S0
        # cross-cancel before multiplying to keep intermediates small
        g1 = poly_gcd(self.num, other.den)
        g2 = poly_gcd(other.num, self.den)
        n1 = self.num if _is_one(g1) else poly_divexact(self.num, g1)
        d2 = other.den if _is_one(g1) else poly_divexact(other.den, g1)
        n2 = other.num if _is_one(g2) else poly_divexact(other.num, g2)
        d1 = self.den if _is_one(g2) else poly_divexact(self.den, g2)
        return Scalar(n1 * n2, d1 * d2)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Scalar":
        other = Scalar.of(other)
        if other.is_zero():
            raise DivisionByZeroScalar("division by the zero rational function")
        inv = object.__new__(Scalar)
        inv.num, inv.den = other.den, other.num
        return self * inv

    def __rtruediv__(self, other) -> "Scalar":
        return Scalar.of(other) / self

    def __pow__(self, n: int) -> "Scalar":
        if n == 0:
            return _S1
        if n < 0:
            if self.is_zero():
                raise DivisionByZeroScalar("zero to a negative power")
            base = object.__new__(Scalar)
            base.num, base.den = self.den, self.num
            base = Scalar(base.num, base.den)  # re-normalize monic den
            n = -n
        else:
            base = self
        out = _S1
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            other = Scalar(other)
        return (isinstance(other, Scalar)
                and self.num == other.num and self.den == other.den)

    def __hash__(self):
        return hash((self.num, self.den))

    # ------------------------------------------------------ calculus etc

    def diff(self, name: str) -> "Scalar":
        dn = self.num.diff(name)
        dd = self.den.diff(name)
        if dd.is_zero():
            return Scalar(dn, self.den)
        return Scalar(dn * self.den - self.num * dd, self.den * self.den)

    def subs(self, bindings: Mapping[str, "Scalar"]) -> "Scalar":
        if not bindings:
            return self
        relevant = {k: Scalar.of(v) for k, v in bindings.items()
                    if k in self.vars()}
        if not relevant:
            return self
        cache: dict = {}
        num = _poly_subs(self.num, relevant, cache)
        den = _poly_subs(self.den, relevant, cache)
        if den.is_zero():
            raise SubstitutionSingular(
                "substitution makes the denominator identically zero")
        return num / den

    def rename(self, mapping: Mapping[str, str]) -> "Scalar":
        num = self.num.rename(mapping)
        den = self.den.rename(mapping)
        if not num.is_zero():
            # renaming permutes the term order, so re-normalize the monic den
            _, lc = den.leading()
            if lc != 1:
                num = num.scale(1 / lc)
                den = den.scale(1 / lc)
        out = object.__new__(Scalar)
        out.num, out.den = num, den
        return out

    def eval_at(self, point: Mapping[str, Fraction]) -> Fraction:
        missing = self.vars() - set(point)
        if missing:
            raise ValueError(f"unbound variables in eval_at: {sorted(missing)}")
        d = self.den.eval_fraction(point)
        if d == 0:
            raise EvalSingular("denominator vanishes at the evaluation point")
        return self.num.eval_fraction(point) / d

    def eval_float(self, point: Mapping[str, float]) -> float:
        d = self.den.eval_float(point)
        if d == 0.0:
            raise EvalSingular("denominator vanishes at the evaluation point")
        return self.num.eval_float(point) / d

    # --------------------------------------------------------- printing

    def __str__(self) -> str:
        if self.den == _P1:
            return str(self.num)
        num_s = str(self.num)
        if len(self.num.terms) > 1:
            num_s = f"({num_s})"
        den_s = str(self.den)
        if not _den_atomic(self.den):
            den_s = f"({den_s})"
        return f"{num_s}/{den_s}"

    def __repr__(self) -> str:
        return f"Scalar({self})"


def _is_one(p: Poly) -> bool:
    return p.is_const() and p.const_value() == 1


def _den_atomic(p: Poly) -> bool:
    """True when p prints as a token that binds tighter than division."""
    if len(p.terms) != 1:
        return False
    mono, c = next(iter(p.terms.items()))
    if c < 0:
        return False
    if mono == _MONO_ONE:
        return c.denominator == 1
    return c == 1 and len(mono) == 1


def _poly_subs(p: Poly, bindings: Mapping[str, Scalar], cache: dict) -> Scalar:
    total = _S0
    for mono in sorted(p.terms, key=functools.cmp_to_key(_mono_cmp)):
        term = Scalar(p.terms[mono])
        for name, exp in mono:
            key = (name, exp)
            power = cache.get(key)
            if power is None:
                base = bindings.get(name)
                if base is None:
                    base = Scalar.var(name)
                power = base ** exp
                cache[key] = power
            term = term * power
        total = total + term
    return total


_S0 = Scalar(0)
_S1 = Scalar(1)

ZERO = _S0
ONE = _S1


# --------------------------------------------------------------- solving

def solve_linear_in(lhs: Scalar, rhs: Scalar, name: str) -> Scalar:
    """Solve lhs = rhs for the variable, requiring the cleared equation to
    be of degree exactly one in it.  The result is free of the variable and
    substituting it back yields an identity."""
    e = lhs - rhs
    uni = _as_uni(e.num, name)
    deg = max(uni) if uni else 0
    if deg >= 2:
        raise NotLinearInVariable(
            f"equation has degree {deg} in {name} after clearing denominators")
    if deg == 0:
        raise CoefficientVanishes(
            f"coefficient of {name} vanishes identically; the equation does "
            f"not determine {name}")
    c1 = uni[1]
    c0 = uni.get(0, _P0)
    return Scalar(-c0) / Scalar(c1)


# --------------------------------------------------------------- parsing

_TOKEN_RE = re.compile(r"\s*(?:(?P<num>\d+)|(?P<name>[a-zA-Z][a-zA-Z0-9]*)"
                       r"|(?P<op>[-+*/^()]))")


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip():
                raise ParseError(f"unexpected character {text[pos]!r}",
                                 col=pos + 1)
            break
        if m.group("num") is not None:
            tokens.append(("num", int(m.group("num")), m.start("num")))
        elif m.group("name") is not None:
            tokens.append(("name", m.group("name"), m.start("name")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", None, len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, val, pos = self.take()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}", col=pos + 1)

    def parse(self) -> Scalar:
        value = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {val!r}", col=pos + 1)
        return value

    def expr(self) -> Scalar:
        value = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                rhs = self.term()
                value = value + rhs if val == "+" else value - rhs
            else:
                return value

    def term(self) -> Scalar:
        value = self.unary()
        while True:
            kind, val, pos = self.peek()
            if kind == "op" and val in "*/":
                self.take()
                rhs = self.unary()
                if val == "*":
                    value = value * rhs
                else:
                    if rhs.is_zero():
                        raise ParseError("division by zero", col=pos + 1)
                    value = value / rhs
            elif kind in ("num", "name") or (kind == "op" and val == "("):
                raise ParseError("missing operator (implicit multiplication "
                                 "is not supported)", col=self.peek()[2] + 1)
            else:
                return value

    def unary(self) -> Scalar:
        kind, val, _ = self.peek()
        if kind == "op" and val in "+-":
            self.take()
            inner = self.unary()
            return inner if val == "+" else -inner
        return self.power()

    def power(self) -> Scalar:
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.take()
            return base ** self.exponent()
        return base

    def exponent(self) -> int:
        kind, val, pos = self.take()
        if kind == "op" and val == "(":
            n = self.exponent()
            self.expect_op(")")
            return n
        if kind == "op" and val == "-":
            kind, val, pos = self.take()
            if kind != "num":
                raise ParseError("expected integer exponent", col=pos + 1)
            return -val
        if kind == "num":
            return val
        raise ParseError("expected integer exponent", col=pos + 1)

    def atom(self) -> Scalar:
        kind, val, pos = self.take()
        if kind == "num":
            return Scalar(val)
        if kind == "name":
            nxt_kind, nxt_val, nxt_pos = self.peek()
            if nxt_kind == "op" and nxt_val == "(":
                raise NonRationalExpression(
                    f"function call {val}(...) is outside the rational "
                    f"expression domain", col=pos + 1)
            return Scalar.var(val)
        if kind == "op" and val == "(":
            inner = self.expr()
            self.expect_op(")")
            return inner
        raise ParseError(f"unexpected token {val!r}", col=pos + 1)


def parse_scalar(text: str) -> Scalar:
    """Parse the expression syntax: integers, rationals p/q, variables,
    + - * / ^ with integer exponents, and parentheses."""
    return _Parser(text).parse()
