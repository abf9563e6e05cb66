"""Lifted formulation of the CP-form minimization problem.

The rank-one partial products t_{l,i} = t_{l,i-1} * f_{l,i}(x_i) turn the
objective into the linear form sum_l t_{l,n}, at the price of r*n recursion
equalities, each touching at most three lifted variables.  Box constraints
stay univariate.  Every constraint is later assigned to a single clique of
the decomposition, which is what lets the moment relaxation act block-wise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cliques import CliqueTree, Var, tvar, var_sort_key, xvar
from .polynomials import Basis, CPPoly, basis_convert, uni_eval

__all__ = [
    "LocalPoly",
    "LiftedPOP",
    "CliqueAssignment",
    "CliqueCoverError",
    "build_lifted_pop",
    "assign_to_cliques",
]


class CliqueCoverError(ValueError):
    """A constraint's variables fit in no clique of the given tree."""


@dataclass(frozen=True)
class LocalPoly:
    """Polynomial supported on an explicit subset of the lifted variables.

    var_ids lists global variable indices (sorted); term keys are exponent
    tuples over exactly those variables.
    """

    var_ids: tuple[int, ...]
    terms: tuple[tuple[tuple[int, ...], float], ...]

    @classmethod
    def from_dict(cls, var_ids, terms: dict) -> "LocalPoly":
        var_ids = tuple(var_ids)
        clean = tuple(
            (tuple(exp), float(c)) for exp, c in sorted(terms.items()) if float(c) != 0.0
        )
        return cls(var_ids, clean)

    @property
    def degree(self) -> int:
        return max((sum(exp) for exp, _ in self.terms), default=0)

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return dict(self.terms)

    def eval(self, values: dict[int, float]) -> float:
        total = 0.0
        for exp, c in self.terms:
            v = c
            for vid, e in zip(self.var_ids, exp):
                if e:
                    v *= values[vid] ** e
            total += v
        return total


@dataclass(frozen=True)
class LiftedPOP:
    """Lifted problem data: linear objective over the last-column partial
    products, recursion equalities, and univariate inequality constraints."""

    n: int
    r: int
    var_order: tuple[Var, ...]
    objective: LocalPoly
    equalities: tuple[tuple[tuple[int, int], LocalPoly], ...]  # ((l, i), h)
    inequalities: tuple[tuple[str, LocalPoly], ...]  # (label, g)
    factor_degrees: tuple[tuple[int, ...], ...]
    box_radius: float

    @property
    def var_index(self) -> dict[Var, int]:
        return {v: k for k, v in enumerate(self.var_order)}

    def var_of(self, idx: int) -> Var:
        return self.var_order[idx]


def _poly_abs_max(coeffs: tuple[float, ...], radius: float) -> float:
    """max |p(x)| over [-radius, radius] for monomial coefficients.

    Dense sampling (1024 points plus the endpoints) brackets the sign
    changes of p', each refined by bisection; the result is the max of |p|
    over samples and refined critical points.
    """
    deriv = tuple(c * k for k, c in enumerate(coeffs) if k >= 1)

    def peval(c, x):
        acc = 0.0 * x + (c[-1] if c else 0.0)
        for ck in c[-2::-1]:
            acc = acc * x + ck
        return acc

    xs = np.concatenate([[-radius, radius], np.linspace(-radius, radius, 1024)])
    best = float(np.max(np.abs(peval(coeffs, xs))))
    if deriv:
        grid = np.linspace(-radius, radius, 1024)
        dv = peval(deriv, grid)
        flips = np.nonzero(np.sign(dv[:-1]) * np.sign(dv[1:]) < 0)[0]
        for idx in flips:
            lo, hi = grid[idx], grid[idx + 1]
            flo = dv[idx]
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                fm = peval(deriv, mid)
                if flo * fm <= 0:
                    hi = mid
                else:
                    lo, flo = mid, fm
            best = max(best, abs(float(peval(coeffs, 0.5 * (lo + hi)))))
    return best


def build_lifted_pop(
    f: CPPoly, box_radius: float = 1.0, with_t_bounds: bool = False
) -> LiftedPOP:
    """Lift a CP-form polynomial over the box [-box_radius, box_radius]^n.

    Bernstein grids are converted to the monomial basis internally; the
    recursion equalities are stored in monomial form over x_i.  When
    with_t_bounds is set, each partial product additionally gets the valid
    inequality B_{l,i}^2 - t_{l,i}^2 >= 0 with B_{l,i} the running product
    of per-factor sup-norm bounds, inflated by 1e-6 to keep it strict.
    """
    n, r = f.n, f.r
    if f.basis is not Basis.MONOMIAL:
        grid = tuple(
            tuple(basis_convert(p, Basis.MONOMIAL) for p in row) for row in f.factors
        )
    else:
        grid = f.factors
    var_order = tuple(
        sorted(
            [xvar(i) for i in range(1, n + 1)]
            + [tvar(l, i) for l in range(1, r + 1) for i in range(1, n + 1)],
            key=var_sort_key,
        )
    )
    index = {v: k for k, v in enumerate(var_order)}

    equalities = []
    for l in range(1, r + 1):
        for i in range(1, n + 1):
            fac = grid[l - 1][i - 1]
            if i == 1:
                vids = tuple(sorted([index[xvar(1)], index[tvar(l, 1)]]))
                x_id, t_id = index[xvar(1)], index[tvar(l, 1)]
                terms: dict[tuple[int, ...], float] = {}

                def exp_for(pairs, vids=vids):
                    e = [0] * len(vids)
                    for vid, p in pairs:
                        e[vids.index(vid)] = p
                    return tuple(e)

                terms[exp_for([(t_id, 1)])] = 1.0
                for j, cj in enumerate(fac.coeffs):
                    if cj == 0.0:
                        continue
                    key = exp_for([(x_id, j)])
                    terms[key] = terms.get(key, 0.0) - cj
            else:
                x_id = index[xvar(i)]
                t_id = index[tvar(l, i)]
                tp_id = index[tvar(l, i - 1)]
                vids = tuple(sorted([x_id, t_id, tp_id]))

                def exp_for(pairs, vids=vids):
                    e = [0] * len(vids)
                    for vid, p in pairs:
                        e[vids.index(vid)] = p
                    return tuple(e)

                terms = {exp_for([(t_id, 1)]): 1.0}
                for j, cj in enumerate(fac.coeffs):
                    if cj == 0.0:
                        continue
                    key = exp_for([(tp_id, 1), (x_id, j)])
                    terms[key] = terms.get(key, 0.0) - cj
            equalities.append(((l, i), LocalPoly.from_dict(vids, terms)))

    inequalities = []
    rad2 = float(box_radius) ** 2
    for i in range(1, n + 1):
        vid = index[xvar(i)]
        inequalities.append(
            (f"box_{i}", LocalPoly.from_dict((vid,), {(0,): rad2, (2,): -1.0}))
        )
    if with_t_bounds:
        eps = 1e-6
        for l in range(1, r + 1):
            bound = 1.0
            for i in range(1, n + 1):
                bound *= _poly_abs_max(grid[l - 1][i - 1].coeffs, box_radius) * (1 + eps)
                vid = index[tvar(l, i)]
                inequalities.append(
                    (
                        f"tbound_{l}_{i}",
                        LocalPoly.from_dict((vid,), {(0,): bound**2, (2,): -1.0}),
                    )
                )

    obj_ids = tuple(sorted(index[tvar(l, n)] for l in range(1, r + 1)))
    obj_terms = {}
    for l in range(1, r + 1):
        e = [0] * len(obj_ids)
        e[obj_ids.index(index[tvar(l, n)])] = 1
        obj_terms[tuple(e)] = 1.0
    objective = LocalPoly.from_dict(obj_ids, obj_terms)

    return LiftedPOP(
        n=n,
        r=r,
        var_order=var_order,
        objective=objective,
        equalities=tuple(equalities),
        inequalities=tuple(inequalities),
        factor_degrees=tuple(tuple(p.degree for p in row) for row in grid),
        box_radius=float(box_radius),
    )


@dataclass(frozen=True)
class CliqueAssignment:
    """Constraint-to-clique map: J[a] lists inequality indices owned by
    clique a, H[a] the (l, i) labels of its equalities.  Every constraint
    belongs to exactly one clique."""

    J: dict[int, tuple[int, ...]]
    H: dict[int, tuple[tuple[int, int], ...]]

    def clique_of_equality(self, li: tuple[int, int]) -> int:
        for a, labels in self.H.items():
            if li in labels:
                return a
        raise KeyError(li)


def assign_to_cliques(p: LiftedPOP, t: CliqueTree) -> CliqueAssignment:
    """Assign each constraint to the lowest-index clique containing all of
    its variables; raises CliqueCoverError when no clique covers one."""
    id_cliques = [frozenset(p.var_index[v] for v in c) for c in t.cliques]

    def owner(var_ids, what: str) -> int:
        need = set(var_ids)
        for a, c in enumerate(id_cliques):
            if need <= c:
                return a
        raise CliqueCoverError(
            f"{what} involves variables outside every clique; "
            "the tree does not match this problem"
        )

    J: dict[int, list[int]] = {}
    H: dict[int, list[tuple[int, int]]] = {}
    for j, (label, g) in enumerate(p.inequalities):
        a = owner(g.var_ids, f"inequality {label}")
        J.setdefault(a, []).append(j)
    for (l, i), h in p.equalities:
        a = owner(h.var_ids, f"equality h_{l}_{i}")
        H.setdefault(a, []).append((l, i))
    return CliqueAssignment(
        J={a: tuple(v) for a, v in J.items()},
        H={a: tuple(v) for a, v in H.items()},
    )


def feasible_t_values(f: CPPoly, point) -> dict[Var, float]:
    """Partial-product values along the recursion at a given x; useful for
    checking that the lifted objective reproduces the CP evaluation."""
    grid = f.factors
    if f.basis is not Basis.MONOMIAL:
        grid = tuple(tuple(basis_convert(p, Basis.MONOMIAL) for p in row) for row in f.factors)
    vals: dict[Var, float] = {xvar(i + 1): float(point[i]) for i in range(f.n)}
    for l in range(1, f.r + 1):
        acc = 1.0
        for i in range(1, f.n + 1):
            acc *= uni_eval(grid[l - 1][i - 1], float(point[i - 1]))
            vals[tvar(l, i)] = acc
    return vals
