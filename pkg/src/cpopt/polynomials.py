"""Polynomials in sum-of-separable (CP low-rank) form.

A rank-r polynomial over the box [-R, R]^n is stored as an r x n grid of
univariate factors,

    f(x) = sum_l prod_i f_{l,i}(x_i),

where each factor lives either in the monomial basis on x or in the
Bernstein basis on s = (x + 1) / 2.  The Bernstein branch is evaluated with
de Casteljau's recurrence, which keeps coefficient-to-value error growth at
Lipschitz constant 1 regardless of degree; the monomial branch uses Horner.

The module also provides the brute-force expansion to a dense multivariate
polynomial (the oracle used by the small-n test suites), basis conversion,
the two seeded random instance families used by the benchmark harness, and
the coefficient-stability bound for the CP coefficient-to-function map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = [
    "Basis",
    "UniPoly",
    "CPPoly",
    "DensePoly",
    "SchemaError",
    "ExpansionBudgetError",
    "uni_eval",
    "cp_eval",
    "cp_expand",
    "basis_convert",
    "gen_monomial_instance",
    "gen_bernstein_instance",
    "lipschitz_bound",
    "cppoly_to_json",
    "cppoly_from_json",
]


class Basis(str, Enum):
    MONOMIAL = "monomial"
    BERNSTEIN = "bernstein"


class SchemaError(ValueError):
    """Problem-file JSON does not match the documented schema."""


class ExpansionBudgetError(ValueError):
    """Dense expansion would exceed the configured term budget."""


@dataclass(frozen=True)
class UniPoly:
    """Univariate polynomial: coeffs[j] multiplies x^j (monomial basis) or
    the degree-d Bernstein polynomial B_{j,d} on s = (x+1)/2."""

    basis: Basis
    coeffs: tuple[float, ...]

    def __post_init__(self):
        if len(self.coeffs) == 0:
            raise ValueError("a polynomial needs at least one coefficient")
        coeffs = tuple(float(c) for c in self.coeffs)
        if not all(math.isfinite(c) for c in coeffs):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "basis", Basis(self.basis))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        return uni_eval(self, x)


@dataclass(frozen=True)
class CPPoly:
    """Rank-r CP-form polynomial: factors[l][i] is the univariate factor of
    rank-one term l in variable x_{i+1}.  All factors share one basis."""

    n: int
    r: int
    factors: tuple[tuple[UniPoly, ...], ...]

    def __post_init__(self):
        if self.r < 1 or self.n < 1:
            raise ValueError("need r >= 1 and n >= 1")
        factors = tuple(tuple(row) for row in self.factors)
        if len(factors) != self.r or any(len(row) != self.n for row in factors):
            raise ValueError(f"factor grid must be {self.r} x {self.n}")
        bases = {p.basis for row in factors for p in row}
        if len(bases) != 1:
            raise ValueError("mixed-basis factor grids are not supported")
        object.__setattr__(self, "factors", factors)

    @property
    def basis(self) -> Basis:
        return self.factors[0][0].basis

    @property
    def max_degree(self) -> int:
        return max(p.degree for row in self.factors for p in row)

    def __call__(self, point):
        return cp_eval(self, point)


@dataclass
class DensePoly:
    """Sparse dict-of-terms multivariate polynomial over x_1..x_n.

    Keys are exponent tuples of length n; zero coefficients are dropped."""

    n: int
    terms: dict[tuple[int, ...], float] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for exp, c in self.terms.items():
            if len(exp) != self.n:
                raise ValueError("exponent length does not match variable count")
            c = float(c)
            if c != 0.0:
                clean[tuple(int(e) for e in exp)] = c
        self.terms = clean

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def __call__(self, point):
        point = np.asarray(point, dtype=float)
        total = 0.0
        for exp, c in self.terms.items():
            v = c
            for xi, ei in zip(point, exp):
                if ei:
                    v *= xi**ei
            total += v
        return total


def uni_eval(p: UniPoly, x):
    """Evaluate p at x (scalar or ndarray).

    Monomial coefficients go through Horner; Bernstein coefficients use the
    de Casteljau recurrence on s = (x+1)/2, so for x in [-1, 1] the value
    stays inside [min coeff, max coeff].
    """
    x = np.asarray(x, dtype=float)
    if p.basis is Basis.MONOMIAL:
        acc = np.full(x.shape, p.coeffs[-1], dtype=float)
        for c in p.coeffs[-2::-1]:
            acc = acc * x + c
        return float(acc) if acc.ndim == 0 else acc
    s = (x + 1.0) / 2.0
    work = [np.broadcast_to(np.asarray(c, dtype=float), s.shape).copy() for c in p.coeffs]
    for stage in range(p.degree):
        for i in range(p.degree - stage):
            work[i] = work[i] * (1.0 - s) + work[i + 1] * s
    out = work[0]
    return float(out) if out.ndim == 0 else out


def cp_eval(f: CPPoly, point):
    """Evaluate the CP form at one point of length n."""
    point = np.asarray(point, dtype=float)
    if point.shape != (f.n,):
        raise ValueError(f"expected a point of length {f.n}, got shape {point.shape}")
    total = 0.0
    for row in f.factors:
        prod = 1.0
        for p, xi in zip(row, point):
            prod *= uni_eval(p, xi)
        total += prod
    return total


def cp_expand(f: CPPoly, max_terms: int = 10**6) -> DensePoly:
    """Multiply out the factor grid into a dense polynomial.

    Only meaningful at small n; the intermediate term count
    sum_l prod_i (deg f_{l,i} + 1) is checked against max_terms first.
    Bernstein grids must be converted to the monomial basis beforehand.
    """
    if f.basis is not Basis.MONOMIAL:
        raise ValueError("cp_expand needs monomial-basis factors; convert first")
    budget = sum(
        math.prod(p.degree + 1 for p in row) for row in f.factors
    )
    if budget > max_terms:
        raise ExpansionBudgetError(
            f"expansion would touch {budget} terms, budget is {max_terms}"
        )
    acc: dict[tuple[int, ...], float] = {}
    for row in f.factors:
        partial: dict[tuple[int, ...], float] = {(0,) * f.n: 1.0}
        for i, p in enumerate(row):
            nxt: dict[tuple[int, ...], float] = {}
            for exp, c in partial.items():
                for j, cj in enumerate(p.coeffs):
                    if cj == 0.0:
                        continue
                    e2 = list(exp)
                    e2[i] = j
                    key = tuple(e2)
                    nxt[key] = nxt.get(key, 0.0) + c * cj
            partial = nxt
        for exp, c in partial.items():
            acc[exp] = acc.get(exp, 0.0) + c
    return DensePoly(f.n, acc)


def _bernstein_to_power_s(b: tuple[float, ...]) -> list[float]:
    # coefficients a_i of q(s) = sum_i a_i s^i from Bernstein coefficients
    d = len(b) - 1
    return [
        sum((-1) ** (i - j) * math.comb(d, i) * math.comb(i, j) * b[j] for j in range(i + 1))
        for i in range(d + 1)
    ]


def _power_s_to_bernstein(a: list[float]) -> list[float]:
    d = len(a) - 1
    return [
        sum(math.comb(j, i) / math.comb(d, i) * a[i] for i in range(j + 1))
        for j in range(d + 1)
    ]


def basis_convert(p: UniPoly, target: Basis) -> UniPoly:
    """Change of basis; the returned polynomial equals p as a function.

    Monomial coefficients live on x, Bernstein coefficients on s = (x+1)/2;
    the conversion composes the binomial change of basis with that affine
    substitution.  Round trips are exact to ~1e-10 relative through d = 10.
    """
    target = Basis(target)
    if p.basis is target:
        return p
    d = p.degree
    if p.basis is Basis.BERNSTEIN:
        a = _bernstein_to_power_s(p.coeffs)
        # substitute s = (x+1)/2
        out = [0.0] * (d + 1)
        for i, ai in enumerate(a):
            if ai == 0.0:
                continue
            scale = ai / 2**i
            for kk in range(i + 1):
                out[kk] += scale * math.comb(i, kk)
        return UniPoly(Basis.MONOMIAL, tuple(out))
    # monomial on x -> power basis on s via x = 2s - 1
    a = [0.0] * (d + 1)
    for k, ck in enumerate(p.coeffs):
        if ck == 0.0:
            continue
        for j in range(k + 1):
            a[j] += ck * math.comb(k, j) * 2**j * (-1) ** (k - j)
    return UniPoly(Basis.BERNSTEIN, tuple(_power_s_to_bernstein(a)))


def gen_monomial_instance(n: int, d: int, r: int, seed: int) -> CPPoly:
    """Seeded random monomial-basis instance.

    The degree-k coefficient of every factor is drawn from N(0, 0.7^(2k)),
    k = 0..d, then each factor is rescaled so its coefficients sum to 1 in
    absolute value.  Draw order is row-major over (l, i), so instances are
    reproducible for a fixed seed.
    """
    if n < 1 or d < 1 or r < 1:
        raise ValueError("need n >= 1, d >= 1, r >= 1")
    rng = np.random.default_rng(seed)
    scales = 0.7 ** np.arange(d + 1)
    rows = []
    for _ in range(r):
        row = []
        for _ in range(n):
            c = rng.standard_normal(d + 1) * scales
            c /= np.sum(np.abs(c))
            row.append(UniPoly(Basis.MONOMIAL, tuple(c)))
        rows.append(tuple(row))
    return CPPoly(n, r, tuple(rows))


def gen_bernstein_instance(n: int, d: int, r: int, delta: float, seed: int) -> CPPoly:
    """Seeded Bernstein-basis instance with known global minimum.

    Every factor has leading Bernstein coefficient exactly 1 and the rest
    uniform in [1 + delta/n, 1 + 2*delta/n], so each factor is >= 1 on
    [-1, 1] with the minimum 1 attained at x = -1.  The instance therefore
    has global minimum r, at the all-minus-ones point.
    """
    if n < 1 or d < 1 or r < 1:
        raise ValueError("need n >= 1, d >= 1, r >= 1")
    if delta <= 0:
        raise ValueError("delta must be positive")
    rng = np.random.default_rng(seed)
    lo, hi = 1.0 + delta / n, 1.0 + 2.0 * delta / n
    rows = []
    for _ in range(r):
        row = []
        for _ in range(n):
            c = np.empty(d + 1)
            c[0] = 1.0
            c[1:] = rng.uniform(lo, hi, size=d)
            row.append(UniPoly(Basis.BERNSTEIN, tuple(c)))
        rows.append(tuple(row))
    return CPPoly(n, r, tuple(rows))


def lipschitz_bound(f: CPPoly) -> float:
    """Upper bound r*n*M^(n-1) on the Lipschitz constant of the map from
    Bernstein coefficients to function values (sup norms on both sides),
    with M the largest coefficient magnitude in the grid."""
    if f.basis is not Basis.BERNSTEIN:
        raise ValueError("the coefficient-stability bound needs Bernstein factors")
    M = max(abs(c) for row in f.factors for p in row for c in p.coeffs)
    return f.r * f.n * M ** (f.n - 1)


_JSON_FIELDS = {"n", "r", "basis", "factors"}


def cppoly_to_json(f: CPPoly) -> dict:
    return {
        "n": f.n,
        "r": f.r,
        "basis": f.basis.value,
        "factors": [[list(p.coeffs) for p in row] for row in f.factors],
    }


def cppoly_from_json(obj) -> CPPoly:
    """Parse the problem-file schema; unknown or missing fields are rejected."""
    if not isinstance(obj, dict):
        raise SchemaError("problem document must be a JSON object")
    extra = set(obj) - _JSON_FIELDS
    if extra:
        raise SchemaError(f"unknown fields: {sorted(extra)}")
    missing = _JSON_FIELDS - set(obj)
    if missing:
        raise SchemaError(f"missing fields: {sorted(missing)}")
    n, r = obj["n"], obj["r"]
    if not isinstance(n, int) or not isinstance(r, int) or n < 1 or r < 1:
        raise SchemaError("'n' and 'r' must be positive integers")
    try:
        basis = Basis(obj["basis"])
    except ValueError as exc:
        raise SchemaError(f"unknown basis {obj['basis']!r}") from exc
    factors = obj["factors"]
    if not isinstance(factors, list) or len(factors) != r:
        raise SchemaError("'factors' must be a list of r rows")
    rows = []
    for row in factors:
        if not isinstance(row, list) or len(row) != n:
            raise SchemaError("each factor row must list n coefficient vectors")
        polys = []
        for coeffs in row:
            if (
                not isinstance(coeffs, list)
                or not coeffs
                or not all(isinstance(c, (int, float)) and math.isfinite(c) for c in coeffs)
            ):
                raise SchemaError("coefficient vectors must be non-empty lists of finite numbers")
            polys.append(UniPoly(basis, tuple(float(c) for c in coeffs)))
        rows.append(tuple(polys))
    return CPPoly(n, r, tuple(rows))
