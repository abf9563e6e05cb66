"""Clique-wise moment relaxation in solver-agnostic block form.

Each clique of the decomposition contributes one moment matrix over its
monomials up to the relaxation order k, one localizing matrix per assigned
inequality, and one linear equality per (clique monomial, recursion
constraint) pair that passes the degree filter.  Moment consistency across
neighbouring cliques is structural: a monomial supported on a separator is
interned once, so both blocks reference the same scalar unknown and no
explicit overlap equalities are needed.  The same container also carries
the single-block dense relaxation used as a small-n baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from .cliques import CliqueTree
from .lifting import CliqueAssignment, LiftedPOP, LocalPoly, assign_to_cliques
from .polynomials import DensePoly

__all__ = [
    "OrderTooSmallError",
    "MonomialBasis",
    "Block",
    "BlockSDP",
    "ComplexityReport",
    "clique_monomials",
    "assemble_lr_moment_sdp",
    "assemble_dense_moment_sdp",
    "complexity_report",
    "block_sdp_to_json",
    "block_sdp_from_json",
]

LinForm = tuple[tuple[int, float], ...]
MonKey = tuple[tuple[int, int], ...]


class OrderTooSmallError(ValueError):
    """Relaxation order k is below the minimum for the given degrees."""


def _exps_up_to(m: int, k: int) -> list[tuple[int, ...]]:
    """All exponent tuples over m variables with total degree <= k, in
    graded-lex order (degree first, earlier variables dominating)."""
    out = [(0,) * m]
    for t in range(1, k + 1):
        for combo in combinations_with_replacement(range(m), t):
            e = [0] * m
            for pos in combo:
                e[pos] += 1
            out.append(tuple(e))
    return out


def _add(a: tuple[int, ...], b: tuple[int, ...]) -> tuple[int, ...]:
    return tuple(x + y for x, y in zip(a, b))


@dataclass(frozen=True)
class MonomialBasis:
    """Monomials of degree <= k over one clique's variables."""

    clique_index: int
    var_ids: tuple[int, ...]
    order: int
    elements: tuple[tuple[int, ...], ...]

    def __len__(self):
        return len(self.elements)


def clique_monomials(clique_vars, k: int, clique_index: int = 0) -> MonomialBasis:
    """Graded-lex monomial basis of degree <= k over a clique, given as an
    iterable of global variable indices."""
    if k < 1:
        raise ValueError("relaxation order must be >= 1")
    ids = tuple(sorted(set(int(v) for v in clique_vars)))
    return MonomialBasis(clique_index, ids, k, tuple(_exps_up_to(len(ids), k)))


@dataclass
class Block:
    """One PSD block; entries are stored for row >= col only and map to a
    linear form in the global moment variables."""

    label: str
    size: int
    kind: str
    entries: dict[tuple[int, int], LinForm] = field(default_factory=dict)

    def entry(self, row: int, col: int) -> LinForm:
        if row < col:
            row, col = col, row
        return self.entries[(row, col)]


@dataclass
class BlockSDP:
    """min c.y  s.t.  A y = b,  every block PSD.

    y indexes the distinct clique monomials after separator identification;
    y_keys[i] is the canonical ((var_id, power), ...) key of variable i.
    """

    y_count: int
    y_keys: tuple[MonKey, ...]
    blocks: list[Block]
    eq_rows: tuple[LinForm, ...]
    eq_rhs: tuple[float, ...]
    objective: LinForm
    meta: dict = field(default_factory=dict)

    def y_index(self, key: MonKey) -> int:
        try:
            return self.y_keys.index(key)
        except ValueError as exc:
            raise KeyError(key) from exc


class _Registry:
    def __init__(self):
        self.index: dict[MonKey, int] = {}
        self.keys: list[MonKey] = []

    def intern(self, key: MonKey) -> int:
        idx = self.index.get(key)
        if idx is None:
            idx = len(self.keys)
            self.index[key] = idx
            self.keys.append(key)
        return idx


def _mon_key(var_ids: tuple[int, ...], exp: tuple[int, ...]) -> MonKey:
    return tuple((v, e) for v, e in zip(var_ids, exp) if e)


def _moment_block(reg: _Registry, basis: MonomialBasis, label: str) -> Block:
    els = basis.elements
    blk = Block(label, len(els), "moment")
    for i in range(len(els)):
        for j in range(i + 1):
            y = reg.intern(_mon_key(basis.var_ids, _add(els[i], els[j])))
            blk.entries[(i, j)] = ((y, 1.0),)
    return blk


def _localizing_block(
    reg: _Registry, basis: MonomialBasis, g: LocalPoly, label: str
) -> Block:
    els = basis.elements
    # embed g's exponents into the clique's variable positions
    pos = [basis.var_ids.index(v) for v in g.var_ids]
    g_terms = []
    for exp, c in g.terms:
        full = [0] * len(basis.var_ids)
        for p, e in zip(pos, exp):
            full[p] = e
        g_terms.append((tuple(full), c))
    blk = Block(label, len(els), "localizing")
    for i in range(len(els)):
        for j in range(i + 1):
            base = _add(els[i], els[j])
            form = tuple(
                (reg.intern(_mon_key(basis.var_ids, _add(base, ge))), c)
                for ge, c in g_terms
            )
            blk.entries[(i, j)] = form
    return blk


def _embed_terms(var_ids: tuple[int, ...], poly: LocalPoly):
    pos = [var_ids.index(v) for v in poly.var_ids]
    out = []
    for exp, c in poly.terms:
        full = [0] * len(var_ids)
        for p, e in zip(pos, exp):
            full[p] = e
        out.append((tuple(full), c))
    return out


def _forced_kernel_basis(
    basis: MonomialBasis, local_eqs: list[LocalPoly], cutoff: int
):
    """Orthonormal basis of the moment-matrix columns annihilated on the
    whole feasible set: coefficient vectors of q*h for every recursion
    constraint h supported on the clique with deg(q*h) <= cutoff.  Returns
    None when no such product fits the degree budget."""
    el_index = {e: i for i, e in enumerate(basis.elements)}
    cols = []
    for h in local_eqs:
        dq = cutoff - h.degree
        if dq < 0:
            continue
        h_terms = _embed_terms(basis.var_ids, h)
        for q in _exps_up_to(len(basis.var_ids), dq):
            v = np.zeros(len(basis.elements))
            for he, c in h_terms:
                v[el_index[_add(q, he)]] += c
            cols.append(v)
    if not cols:
        return None
    Kmat = np.column_stack(cols)
    U, sv, _ = np.linalg.svd(Kmat, full_matrices=True)
    rank = int(np.sum(sv > max(Kmat.shape) * sv[0] * 1e-12)) if sv.size else 0
    if rank == 0:
        return None
    return U[:, rank:]


def _reduce_block(blk: Block, B) -> Block:
    """Congruence-transform a block onto the face basis B (columns span the
    complement of the forced kernel)."""
    s, s_red = B.shape
    acc: list[list[dict]] = [[{} for _ in range(i + 1)] for i in range(s_red)]
    for (r, c), form in blk.entries.items():
        sym = r != c
        for i in range(s_red):
            bri, bci = B[r, i], B[c, i]
            for j in range(i + 1):
                w = bri * B[c, j]
                if sym:
                    w += bci * B[r, j]
                if abs(w) < 1e-14:
                    continue
                d = acc[i][j]
                for yv, cf in form:
                    d[yv] = d.get(yv, 0.0) + w * cf
    out = Block(blk.label, s_red, blk.kind)
    for i in range(s_red):
        for j in range(i + 1):
            form = tuple(
                (yv, cf) for yv, cf in sorted(acc[i][j].items()) if abs(cf) > 1e-14
            )
            out.entries[(i, j)] = form if form else ((0, 0.0),)
    return out


def _equality_rows(
    reg: _Registry, basis_vars: tuple[int, ...], h: LocalPoly, max_q_degree: int
) -> list[LinForm]:
    pos = [basis_vars.index(v) for v in h.var_ids]
    h_terms = []
    for exp, c in h.terms:
        full = [0] * len(basis_vars)
        for p, e in zip(pos, exp):
            full[p] = e
        h_terms.append((tuple(full), c))
    rows = []
    for q in _exps_up_to(len(basis_vars), max_q_degree):
        acc: dict[int, float] = {}
        for he, c in h_terms:
            y = reg.intern(_mon_key(basis_vars, _add(q, he)))
            acc[y] = acc.get(y, 0.0) + c
        rows.append(tuple(sorted(acc.items())))
    return rows


def assemble_lr_moment_sdp(
    p: LiftedPOP,
    t: CliqueTree,
    asg: CliqueAssignment,
    k: int,
    strict_degree: bool = False,
    face_reduction: bool = True,
) -> BlockSDP:
    """Assemble the clique-wise moment relaxation at order k.

    The recursion constraints are imposed as L(q * h) = 0 for clique
    monomials q; the degree filter is deg(q*h) <= 2k by default and < 2k
    when strict_degree is set.  Raises OrderTooSmallError when k cannot
    accommodate every constraint degree.

    When a recursion constraint of degree <= k is supported on a clique,
    every feasible moment matrix there is singular (its kernel contains
    the coefficient vectors of q*h), so the relaxation has no interior
    point and interior-point accuracy collapses.  With face_reduction on,
    each such block is congruence-projected onto the complement of that
    forced kernel; the equality rows already pin the projected-out
    components, so the optimum is unchanged while the reduced cone
    recovers a strictly feasible interior.
    """
    d_max = max(max(row) for row in p.factor_degrees)
    k_min = math.ceil((d_max + 1) / 2)
    if k < k_min:
        raise OrderTooSmallError(
            f"order {k} is below the minimum {k_min} for factor degree {d_max}"
        )
    for label, g in p.inequalities:
        if k < math.ceil(g.degree / 2):
            raise OrderTooSmallError(f"order {k} cannot localize {label}")

    vindex = p.var_index
    id_cliques = [
        tuple(sorted(vindex[v] for v in c)) for c in t.cliques
    ]
    assigned_eq = [li for labels in asg.H.values() for li in labels]
    assigned_in = [j for idxs in asg.J.values() for j in idxs]
    if sorted(assigned_eq) != sorted(li for li, _ in p.equalities) or sorted(
        assigned_in
    ) != list(range(len(p.inequalities))):
        raise ValueError("assignment does not partition this problem's constraints")
    if any(a >= len(id_cliques) for a in list(asg.J) + list(asg.H)):
        raise ValueError("assignment references cliques outside the tree")

    reg = _Registry()
    y0 = reg.intern(())
    blocks = []
    eq_rows: list[LinForm] = []
    eq_rhs: list[float] = []

    ineq_by_label = dict(p.inequalities)
    eq_by_li = {li: h for li, h in p.equalities}

    kernel_cut = k - (1 if strict_degree else 0)
    for a, ids in enumerate(id_cliques):
        id_set = set(ids)
        local_eqs = [
            h for _, h in p.equalities if set(h.var_ids) <= id_set
        ] if face_reduction else []

        basis = clique_monomials(ids, k, clique_index=a)
        blk = _moment_block(reg, basis, f"moment_c{a}")
        B = _forced_kernel_basis(basis, local_eqs, kernel_cut) if local_eqs else None
        blocks.append(_reduce_block(blk, B) if B is not None else blk)

        for j in asg.J.get(a, ()):
            label, g = p.inequalities[j]
            dj = math.ceil(g.degree / 2)
            loc_basis = clique_monomials(ids, k - dj, clique_index=a) if k - dj >= 1 else \
                MonomialBasis(a, ids, 0, ((0,) * len(ids),))
            blk = _localizing_block(reg, loc_basis, g, f"loc_c{a}_{label}")
            B = (
                _forced_kernel_basis(loc_basis, local_eqs, kernel_cut - dj)
                if local_eqs
                else None
            )
            blocks.append(_reduce_block(blk, B) if B is not None else blk)

        for li in asg.H.get(a, ()):
            h = eq_by_li[li]
            max_q = 2 * k - h.degree - (1 if strict_degree else 0)
            if max_q < 0:
                continue
            for row in _equality_rows(reg, ids, h, max_q):
                eq_rows.append(row)
                eq_rhs.append(0.0)

    eq_rows.append(((y0, 1.0),))
    eq_rhs.append(1.0)

    obj_acc: dict[int, float] = {}
    for exp, c in p.objective.terms:
        y = reg.intern(_mon_key(p.objective.var_ids, exp))
        obj_acc[y] = obj_acc.get(y, 0.0) + c
    objective = tuple(sorted(obj_acc.items()))

    return BlockSDP(
        y_count=len(reg.keys),
        y_keys=tuple(reg.keys),
        blocks=blocks,
        eq_rows=tuple(eq_rows),
        eq_rhs=tuple(eq_rhs),
        objective=objective,
        meta={
            "kind": "lr",
            "order": k,
            "strict_degree": strict_degree,
            "n": p.n,
            "r": p.r,
            "n_cliques": len(id_cliques),
            "clique_sizes": [len(c) for c in id_cliques],
            "separator_sizes": [len(s) for s in t.separators.values()],
            "n_lifting_rows": len(eq_rows) - 1,
        },
    )


def assemble_dense_moment_sdp(f: DensePoly, box_radius: float, k: int) -> BlockSDP:
    """Single-block moment relaxation over the original variables, with one
    localizing block per box constraint.  Small-n baseline only: the moment
    matrix has binom(n+k, k) rows."""
    n = f.n
    if 2 * k < f.degree:
        raise OrderTooSmallError(f"order {k} is below ceil(deg f / 2) = {math.ceil(f.degree/2)}")
    if k < 1:
        raise OrderTooSmallError("order must be >= 1")
    ids = tuple(range(n))
    reg = _Registry()
    y0 = reg.intern(())
    basis = clique_monomials(ids, k)
    blocks = [_moment_block(reg, basis, "moment")]
    rad2 = float(box_radius) ** 2
    for i in range(n):
        g = LocalPoly.from_dict((i,), {(0,): rad2, (2,): -1.0})
        loc_basis = clique_monomials(ids, k - 1) if k - 1 >= 1 else MonomialBasis(
            0, ids, 0, ((0,) * n,)
        )
        blocks.append(_localizing_block(reg, loc_basis, g, f"loc_box_{i + 1}"))
    eq_rows = (((y0, 1.0),),)
    eq_rhs = (1.0,)
    obj_acc: dict[int, float] = {}
    for exp, c in f.terms.items():
        y = reg.intern(_mon_key(ids, exp))
        obj_acc[y] = obj_acc.get(y, 0.0) + c
    objective = tuple(sorted(obj_acc.items()))
    return BlockSDP(
        y_count=len(reg.keys),
        y_keys=tuple(reg.keys),
        blocks=blocks,
        eq_rows=eq_rows,
        eq_rhs=eq_rhs,
        objective=objective,
        meta={"kind": "dense", "order": k, "n": n},
    )


@dataclass(frozen=True)
class ComplexityReport:
    """Structural counters of an assembled relaxation next to the a-priori
    bounds implied by the clique-width guarantee."""

    n_blocks: int
    max_block_size: int
    n_separator_equalities: int
    n_lifting_equalities: int
    bound_n_blocks: int
    bound_max_block_size: int
    bound_separator_equalities: int
    bound_lifting_equalities: int

    def within_bounds(self) -> bool:
        return (
            self.n_blocks <= self.bound_n_blocks
            and self.max_block_size <= self.bound_max_block_size
            and self.n_separator_equalities <= self.bound_separator_equalities
            and self.n_lifting_equalities <= self.bound_lifting_equalities
        )

    def as_dict(self) -> dict:
        return {
            "n_blocks": self.n_blocks,
            "max_block_size": self.max_block_size,
            "n_separator_equalities": self.n_separator_equalities,
            "n_lifting_equalities": self.n_lifting_equalities,
            "bound_n_blocks": self.bound_n_blocks,
            "bound_max_block_size": self.bound_max_block_size,
            "bound_separator_equalities": self.bound_separator_equalities,
            "bound_lifting_equalities": self.bound_lifting_equalities,
        }


def complexity_report(
    t: CliqueTree, p: LiftedPOP, k: int, sdp: BlockSDP | None = None
) -> ComplexityReport:
    """Counters for the order-k relaxation of (p, t).

    Moment-block count, largest block, the scalar-equality count a
    duplicated-variable formulation would need on the separators, and the
    number of recursion-constraint rows, each with its width-based bound.
    Raises if any actual counter exceeds its bound.
    """
    if sdp is None:
        sdp = assemble_lr_moment_sdp(p, t, assign_to_cliques(p, t), k)
    n, r = p.n, p.r
    w = min(n, r + 1) + 1  # width guarantee on the largest clique
    n_blocks = sum(1 for b in sdp.blocks if b.kind == "moment")
    max_block = max(b.size for b in sdp.blocks)
    sep_eqs = sum(
        math.comb(len(s) + k, k) * (math.comb(len(s) + k, k) + 1) // 2
        for s in t.separators.values()
    )
    s_h = math.comb(min(n, r + 1) + k, k)
    bound_sep = (len(t.cliques) - 1) * s_h * (s_h + 1) // 2
    lift_rows = sdp.meta.get("n_lifting_rows", 0)
    bound_lift = 0
    for row in p.factor_degrees:
        for d in row:
            dd = 2 * k - (d + 1)
            if dd >= 0:
                bound_lift += math.comb(w + dd, dd)
    rep = ComplexityReport(
        n_blocks=n_blocks,
        max_block_size=max_block,
        n_separator_equalities=sep_eqs,
        n_lifting_equalities=lift_rows,
        bound_n_blocks=n * (r + 1),
        bound_max_block_size=math.comb(w + k, k),
        bound_separator_equalities=max(bound_sep, 0),
        bound_lifting_equalities=bound_lift,
    )
    if not rep.within_bounds():
        raise ValueError(f"structural counters exceed their bounds: {rep.as_dict()}")
    return rep


def block_sdp_to_json(sdp: BlockSDP) -> dict:
    """Interchange document; see the schema notes in the README."""
    blocks = []
    for b in sdp.blocks:
        rows, cols, ptr, ys, coefs = [], [], [0], [], []
        for (i, j), form in sorted(b.entries.items()):
            rows.append(i)
            cols.append(j)
            for y, c in form:
                ys.append(y)
                coefs.append(c)
            ptr.append(len(ys))
        blocks.append(
            {
                "label": b.label,
                "size": b.size,
                "kind": b.kind,
                "rows": rows,
                "cols": cols,
                "ptr": ptr,
                "y": ys,
                "coef": coefs,
            }
        )
    er, ec, ev = [], [], []
    for i, row in enumerate(sdp.eq_rows):
        for y, c in row:
            er.append(i)
            ec.append(y)
            ev.append(c)
    return {
        "y_count": sdp.y_count,
        "objective": {
            "y": [y for y, _ in sdp.objective],
            "coef": [c for _, c in sdp.objective],
        },
        "blocks": blocks,
        "equalities": {"rows": er, "cols": ec, "vals": ev, "rhs": list(sdp.eq_rhs)},
    }


def block_sdp_from_json(obj: dict) -> BlockSDP:
    blocks = []
    for bj in obj["blocks"]:
        blk = Block(bj["label"], int(bj["size"]), bj["kind"])
        ptr = bj["ptr"]
        for e, (i, j) in enumerate(zip(bj["rows"], bj["cols"])):
            form = tuple(
                (int(y), float(c))
                for y, c in zip(bj["y"][ptr[e] : ptr[e + 1]], bj["coef"][ptr[e] : ptr[e + 1]])
            )
            blk.entries[(int(i), int(j))] = form
        blocks.append(blk)
    nrows = len(obj["equalities"]["rhs"])
    rows: list[list] = [[] for _ in range(nrows)]
    for i, y, c in zip(
        obj["equalities"]["rows"], obj["equalities"]["cols"], obj["equalities"]["vals"]
    ):
        rows[int(i)].append((int(y), float(c)))
    objective = tuple(
        (int(y), float(c)) for y, c in zip(obj["objective"]["y"], obj["objective"]["coef"])
    )
    return BlockSDP(
        y_count=int(obj["y_count"]),
        y_keys=tuple(() for _ in range(int(obj["y_count"]))),
        blocks=blocks,
        eq_rows=tuple(tuple(r) for r in rows),
        eq_rhs=tuple(float(v) for v in obj["equalities"]["rhs"]),
        objective=objective,
        meta={"kind": "imported"},
    )
