"""Exact reduction of rsoc/pow3 cones to second-order cones.

A rotated cone 2 s0 s1 >= ||s2:||^2 maps onto a plain second-order cone by
the linear row transform (s0+s1, s0-s1, sqrt(2) s2:). A three-row power cone
s0^alpha s1^(1-alpha) >= |s2| with rational alpha = p/q becomes a balanced
binary tree of geometric-mean cells: pad the q-fold geometric mean
(p copies of s0, q-p copies of s1) with copies of the epigraph variable t up
to the next power of two, then certify t <= sqrt(a b) pairwise with one
rotated cell per internal tree node, and close with t >= |s2|. The reduction
is exact whenever alpha is rational; irrational alpha is snapped to the
closest fraction with denominator <= MAX_DENOM (logged).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from .program import Cone, ConicProgram

logger = logging.getLogger(__name__)

#: Largest denominator used when snapping a pow3 exponent to a fraction.
MAX_DENOM = 64

#: Relative mismatch above which the snap is reported.
SNAP_WARN = 1e-12

_SQRT2 = float(np.sqrt(2.0))


@dataclass(frozen=True)
class LoweredProgram:
    """A pow3/rsoc-free equivalent program plus the original variable count.

    The first ``n_orig`` columns of the lowered program are the original
    variables; the rest are tower auxiliaries with zero cost.
    """

    program: ConicProgram
    n_orig: int


class _RowBank:
    """Accumulates triplet rows for the lowered program."""

    def __init__(self):
        self.ri: list[np.ndarray] = []
        self.rj: list[np.ndarray] = []
        self.rv: list[np.ndarray] = []
        self.b: list[float] = []
        self.cones: list[Cone] = []
        self.m = 0

    def add_cone(self, kind: str, rows: list[tuple[np.ndarray, np.ndarray, float]]):
        """rows: list of (cols, vals, b_entry) per local row."""
        dim = len(rows)
        for loc, (cols, vals, brow) in enumerate(rows):
            if cols.size:
                self.ri.append(np.full(cols.size, self.m + loc, dtype=int))
                self.rj.append(cols)
                self.rv.append(vals)
            self.b.append(brow)
        self.cones.append(Cone(kind=kind, dim=dim, alpha=None))
        self.m += dim


def _snap_alpha(alpha: float) -> Fraction:
    frac = Fraction(alpha).limit_denominator(MAX_DENOM)
    err = abs(float(frac) - alpha)
    if err > SNAP_WARN * max(1.0, abs(alpha)):
        logger.warning(
            "pow3 exponent %.17g approximated by %s (error %.3e)", alpha, frac, err
        )
    if not (0 < frac < 1):
        raise ValueError(f"pow3 exponent {alpha} does not snap inside (0, 1)")
    return frac


def lower_program(prog: ConicProgram) -> LoweredProgram:
    """Rewrite rsoc and pow3 cones as second-order cones.

    Returns an equivalent program containing only zero/nonneg/soc cones. The
    objective restricted to the original columns is unchanged; auxiliary
    columns carry zero cost.
    """
    if all(c.kind in ("zero", "nonneg", "soc") for c in prog.cones):
        return LoweredProgram(program=prog, n_orig=prog.n_vars)

    A = prog.A.tocsr()
    n = prog.n_vars
    bank = _RowBank()
    n_aux = 0

    def orig_row(r: int, scale: float = 1.0) -> tuple[np.ndarray, np.ndarray, float]:
        lo, hi = A.indptr[r], A.indptr[r + 1]
        return A.indices[lo:hi].copy(), scale * A.data[lo:hi], scale * float(prog.b[r])

    def combine(ra, rb, sa, sb):
        ca, va, ba = ra
        cb, vb, bb = rb
        return (
            np.concatenate([ca, cb]),
            np.concatenate([sa * va, sb * vb]),
            sa * ba + sb * bb,
        )

    def aux_row(j: int) -> tuple[np.ndarray, np.ndarray, float]:
        # slack equals the auxiliary variable: s = 0 - (-1) * x_j
        return np.array([j], dtype=int), np.array([-1.0]), 0.0

    for cone, sl in prog.cone_slices():
        r0 = sl.start
        if cone.kind in ("zero", "nonneg", "soc"):
            bank.cones.append(cone)
            for r in range(r0, sl.stop):
                cols, vals, brow = orig_row(r)
                if cols.size:
                    bank.ri.append(np.full(cols.size, bank.m, dtype=int))
                    bank.rj.append(cols)
                    bank.rv.append(vals)
                bank.b.append(brow)
                bank.m += 1
        elif cone.kind == "rsoc":
            rows = [
                combine(orig_row(r0), orig_row(r0 + 1), 1.0, 1.0),
                combine(orig_row(r0), orig_row(r0 + 1), 1.0, -1.0),
            ]
            rows += [orig_row(r, _SQRT2) for r in range(r0 + 2, sl.stop)]
            bank.add_cone("soc", rows)
        elif cone.kind == "pow3":
            frac = _snap_alpha(cone.alpha)
            p, q = frac.numerator, frac.denominator
            t_col = n + n_aux
            n_aux += 1
            t_sym = aux_row(t_col)
            # |s2| <= t
            bank.add_cone("soc", [t_sym, orig_row(r0 + 2)])
            # geometric-mean tower: t <= s0^(p/q) s1^((q-p)/q)
            qhat = 1
            while qhat < q:
                qhat *= 2
            # symbols are (row, tag); identical tags pair into trivial cells
            level = (
                [(orig_row(r0), "s0")] * p
                + [(orig_row(r0 + 1), "s1")] * (q - p)
                + [(t_sym, "t")] * (qhat - q)
            )
            while len(level) > 2:
                nxt = []
                for a in range(0, len(level), 2):
                    (rowa, taga), (rowb, tagb) = level[a], level[a + 1]
                    if taga == tagb:
                        nxt.append((rowa, taga))
                        continue
                    w_col = n + n_aux
                    n_aux += 1
                    w_sym = aux_row(w_col)
                    cw, vw, bw = w_sym
                    # cell w <= sqrt(a b): soc rows (a+b, a-b, 2w)
                    rows = [
                        combine(rowa, rowb, 1.0, 1.0),
                        combine(rowa, rowb, 1.0, -1.0),
                        (cw, 2.0 * vw, 2.0 * bw),
                    ]
                    bank.add_cone("soc", rows)
                    nxt.append((w_sym, f"w{w_col}"))
                level = nxt
            (rowa, _), (rowb, _) = level
            ct, vt, bt = t_sym
            rows = [
                combine(rowa, rowb, 1.0, 1.0),
                combine(rowa, rowb, 1.0, -1.0),
                (ct, 2.0 * vt, 2.0 * bt),
            ]
            bank.add_cone("soc", rows)
        else:  # pragma: no cover
            raise ValueError(f"unexpected cone kind {cone.kind!r}")

    n_new = n + n_aux
    c_new = np.zeros(n_new)
    c_new[:n] = prog.c
    if bank.ri:
        ri = np.concatenate(bank.ri)
        rj = np.concatenate(bank.rj)
        rv = np.concatenate(bank.rv)
    else:
        ri = rj = np.zeros(0, dtype=int)
        rv = np.zeros(0)
    A_new = sp.csr_matrix((rv, (ri, rj)), shape=(bank.m, n_new))
    A_new.sum_duplicates()
    lowered = ConicProgram(
        c=c_new,
        A=A_new,
        b=np.asarray(bank.b, dtype=float),
        cones=tuple(bank.cones),
        var_blocks=dict(prog.var_blocks),
        name=prog.name,
    )
    return LoweredProgram(program=lowered, n_orig=n)
