"""Conic program container and incremental builder.

Standard form: minimize c'x subject to b - A x in K, where K is a product of
cones listed in row order. Supported kinds:

- ``zero``: s = 0 (equality rows).
- ``nonneg``: s >= 0 elementwise.
- ``soc``: s_0 >= ||s_1:||_2.
- ``rsoc``: 2 s_0 s_1 >= ||s_2:||^2, s_0, s_1 >= 0 (dim >= 3).
- ``pow3``: s_0^alpha s_1^(1-alpha) >= |s_2|, s_0, s_1 >= 0 (dim == 3,
  0 < alpha < 1).

The builder allocates named variable blocks, accumulates sparse rows in
triplet form, and produces an immutable :class:`ConicProgram`. Programs
round-trip through a line-oriented text format with hex floats so dumps are
byte-exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..errors import ConfigError

_KINDS = ("zero", "nonneg", "soc", "rsoc", "pow3")
_FORMAT_TAG = "conicprog/1"


@dataclass(frozen=True)
class Cone:
    """One cone block: kind, row count, and the power-cone exponent."""

    kind: str
    dim: int
    alpha: float | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown cone kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("cone dimension must be positive")
        if self.kind == "soc" and self.dim < 2:
            raise ValueError("soc cones need dim >= 2")
        if self.kind == "rsoc" and self.dim < 3:
            raise ValueError("rsoc cones need dim >= 3")
        if self.kind == "pow3":
            if self.dim != 3:
                raise ValueError("pow3 cones have exactly 3 rows")
            if self.alpha is None or not (0.0 < self.alpha < 1.0):
                raise ValueError("pow3 needs alpha in (0, 1)")
        elif self.alpha is not None:
            raise ValueError(f"{self.kind} cones take no alpha")


@dataclass(frozen=True)
class ConicProgram:
    """Immutable conic program in standard form."""

    c: np.ndarray
    A: sp.csr_matrix = field(repr=False)
    b: np.ndarray = field(repr=False)
    cones: tuple[Cone, ...]
    var_blocks: dict[str, slice] = field(default_factory=dict)
    name: str = ""

    @property
    def n_vars(self) -> int:
        return self.c.shape[0]

    @property
    def n_rows(self) -> int:
        return self.b.shape[0]

    def cone_slices(self) -> list[tuple[Cone, slice]]:
        out = []
        lo = 0
        for cone in self.cones:
            out.append((cone, slice(lo, lo + cone.dim)))
            lo += cone.dim
        return out

    def residual(self, x: np.ndarray) -> np.ndarray:
        """Slack vector s = b - A x."""
        return self.b - self.A @ np.asarray(x, dtype=float)

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ np.asarray(x, dtype=float))

    def dump(self) -> str:
        """Serialize to the versioned text format (hex floats, byte-exact)."""
        lines = [_FORMAT_TAG]
        lines.append(f"name {self.name}")
        lines.append(f"size {self.n_vars} {self.n_rows} {len(self.cones)}")
        for nm, sl in self.var_blocks.items():
            lines.append(f"block {nm} {sl.start} {sl.stop}")
        lines.append("cones")
        for cone in self.cones:
            a = cone.alpha.hex() if cone.alpha is not None else "-"
            lines.append(f"{cone.kind} {cone.dim} {a}")
        lines.append("c")
        for i in np.nonzero(self.c)[0]:
            lines.append(f"{i} {float(self.c[i]).hex()}")
        lines.append("b")
        for i in np.nonzero(self.b)[0]:
            lines.append(f"{i} {float(self.b[i]).hex()}")
        lines.append("A")
        coo = self.A.tocoo()
        order = np.lexsort((coo.col, coo.row))
        for i, j, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            lines.append(f"{i} {j} {float(v).hex()}")
        lines.append("end")
        return "\n".join(lines) + "\n"

    @classmethod
    def load(cls, text: str) -> "ConicProgram":
        """Parse a program previously produced by :meth:`dump`."""
        lines = text.splitlines()
        if not lines or lines[0] != _FORMAT_TAG:
            raise ConfigError(f"not a {_FORMAT_TAG} document")
        name = ""
        n = m = nc = 0
        blocks: dict[str, slice] = {}
        cones: list[Cone] = []
        c = None
        b = None
        ai: list[int] = []
        aj: list[int] = []
        av: list[float] = []
        section = "head"
        for raw in lines[1:]:
            line = raw.strip()
            if not line:
                continue
            if line in ("cones", "c", "b", "A", "end"):
                section = line
                continue
            parts = line.split()
            if section == "head":
                if parts[0] == "name":
                    name = line[5:]
                elif parts[0] == "size":
                    n, m, nc = int(parts[1]), int(parts[2]), int(parts[3])
                    c = np.zeros(n)
                    b = np.zeros(m)
                elif parts[0] == "block":
                    blocks[parts[1]] = slice(int(parts[2]), int(parts[3]))
                else:
                    raise ConfigError(f"unexpected header line: {line!r}")
            elif section == "cones":
                alpha = None if parts[2] == "-" else float.fromhex(parts[2])
                cones.append(Cone(kind=parts[0], dim=int(parts[1]), alpha=alpha))
            elif section == "c":
                c[int(parts[0])] = float.fromhex(parts[1])
            elif section == "b":
                b[int(parts[0])] = float.fromhex(parts[1])
            elif section == "A":
                ai.append(int(parts[0]))
                aj.append(int(parts[1]))
                av.append(float.fromhex(parts[2]))
        if c is None or len(cones) != nc:
            raise ConfigError("malformed conic program document")
        A = sp.csr_matrix((av, (ai, aj)), shape=(m, n))
        return cls(c=c, A=A, b=b, cones=tuple(cones), var_blocks=blocks, name=name)


class ProgramBuilder:
    """Accumulates variable blocks, cost terms, and cone rows.

    Rows are given per cone as triplets (local row, column, value) plus the
    cone's constant vector, meaning the slack s = b_cone - A_cone x lies in
    the cone.
    """

    def __init__(self, name: str = ""):
        self.name = name
        self._n = 0
        self._m = 0
        self._blocks: dict[str, slice] = {}
        self._cost: dict[int, float] = {}
        self._cones: list[Cone] = []
        self._bs: list[np.ndarray] = []
        self._ri: list[np.ndarray] = []
        self._rj: list[np.ndarray] = []
        self._rv: list[np.ndarray] = []

    @property
    def n_vars(self) -> int:
        return self._n

    @property
    def n_rows(self) -> int:
        return self._m

    def var_block(self, name: str, size: int) -> np.ndarray:
        """Reserve ``size`` new columns under ``name``; returns their indices."""
        if name in self._blocks:
            raise ValueError(f"variable block {name!r} already exists")
        if size < 0:
            raise ValueError("block size must be nonnegative")
        sl = slice(self._n, self._n + size)
        self._blocks[name] = sl
        self._n += size
        return np.arange(sl.start, sl.stop)

    def block(self, name: str) -> slice:
        return self._blocks[name]

    def cost(self, idx, val) -> None:
        """Accumulate linear objective terms c[idx] += val."""
        idx = np.atleast_1d(np.asarray(idx, dtype=int))
        val = np.broadcast_to(np.asarray(val, dtype=float), idx.shape)
        for i, v in zip(idx, val):
            self._cost[int(i)] = self._cost.get(int(i), 0.0) + float(v)

    def cone(
        self,
        kind: str,
        b: np.ndarray,
        rows: np.ndarray,
        cols: np.ndarray,
        vals: np.ndarray,
        alpha: float | None = None,
    ) -> slice:
        """Append one cone block; returns its global row slice.

        Args:
            kind: cone kind (see module docstring).
            b: constant vector, its length is the cone dimension.
            rows: local row indices (0-based within this cone).
            cols: global column indices.
            vals: matrix entries, so that s = b - A x restricted to these rows.
            alpha: pow3 exponent.
        """
        b = np.atleast_1d(np.asarray(b, dtype=float))
        cone = Cone(kind=kind, dim=b.shape[0], alpha=alpha)
        rows = np.atleast_1d(np.asarray(rows, dtype=int))
        cols = np.atleast_1d(np.asarray(cols, dtype=int))
        vals = np.atleast_1d(np.asarray(vals, dtype=float))
        if not (rows.shape == cols.shape == vals.shape):
            raise ValueError("triplet arrays must have identical shapes")
        if rows.size and (rows.min() < 0 or rows.max() >= cone.dim):
            raise ValueError("local row index out of cone range")
        sl = slice(self._m, self._m + cone.dim)
        self._cones.append(cone)
        self._bs.append(b)
        self._ri.append(rows + sl.start)
        self._rj.append(cols)
        self._rv.append(vals)
        self._m += cone.dim
        return sl

    def build(self) -> ConicProgram:
        c = np.zeros(self._n)
        for i, v in self._cost.items():
            if i < 0 or i >= self._n:
                raise ValueError(f"cost index {i} out of range")
            c[i] = v
        if self._ri:
            ri = np.concatenate(self._ri)
            rj = np.concatenate(self._rj)
            rv = np.concatenate(self._rv)
        else:
            ri = rj = np.zeros(0, dtype=int)
            rv = np.zeros(0)
        if rj.size and (rj.min() < 0 or rj.max() >= self._n):
            raise ValueError("column index out of range")
        A = sp.csr_matrix((rv, (ri, rj)), shape=(self._m, self._n))
        A.sum_duplicates()
        b = np.concatenate(self._bs) if self._bs else np.zeros(0)
        return ConicProgram(
            c=c, A=A, b=b, cones=tuple(self._cones),
            var_blocks=dict(self._blocks), name=self.name,
        )
