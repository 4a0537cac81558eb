"""Matrices over the rational-function field, with fraction-free elimination.

Linear solves clear per-row denominators and then run Bareiss elimination over
the polynomial ring, so intermediate expression swell stays controlled and
every division is exact.  On top of that sit the structural factorizations the
reduction machinery needs: writing a vector field that vanishes on a coordinate
subspace as a matrix times the vanishing variables, and rank factorization of a
singular matrix guided by evaluation at a sample point.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Mapping, Sequence

from .rational import (
    Context,
    Polynomial,
    RationalFunction,
    SymbolicError,
)


class ConsistencyError(SymbolicError):
    """A vector expected to vanish on a coordinate subspace does not."""


class RankError(SymbolicError):
    """Rank factorization could not be verified at/near the sample point."""


class NoSolution:
    """Marker result for inconsistent linear systems; carries the bad row."""

    def __init__(self, row: int):
        self.row = row

    def __repr__(self):
        return f"NoSolution(row={self.row})"


class RFMatrix:
    """Rectangular matrix of rational functions over one context."""

    __slots__ = ("ctx", "rows", "cols", "entries")

    def __init__(self, ctx: Context, entries: Sequence[Sequence]):
        self.ctx = ctx
        self.entries: list[list[RationalFunction]] = [
            [RationalFunction.coerce(ctx, v) for v in row] for row in entries
        ]
        self.rows = len(self.entries)
        self.cols = len(self.entries[0]) if self.entries else 0
        if any(len(row) != self.cols for row in self.entries):
            raise ValueError("ragged matrix")

    # -- constructors --------------------------------------------------------

    @staticmethod
    def identity(ctx: Context, n: int) -> "RFMatrix":
        one = ctx.one()
        zero = ctx.zero()
        return RFMatrix(ctx, [[one if i == j else zero for j in range(n)] for i in range(n)])

    @staticmethod
    def zero(ctx: Context, rows: int, cols: int) -> "RFMatrix":
        z = ctx.zero()
        return RFMatrix(ctx, [[z] * cols for _ in range(rows)])

    @staticmethod
    def column(ctx: Context, vec: Sequence) -> "RFMatrix":
        return RFMatrix(ctx, [[v] for v in vec])

    @staticmethod
    def from_rows(ctx: Context, rows: Sequence[Sequence]) -> "RFMatrix":
        return RFMatrix(ctx, rows)

    def __getitem__(self, ij: tuple[int, int]) -> RationalFunction:
        i, j = ij
        return self.entries[i][j]

    def row(self, i: int) -> list[RationalFunction]:
        return list(self.entries[i])

    def col(self, j: int) -> list[RationalFunction]:
        return [self.entries[i][j] for i in range(self.rows)]

    def is_zero(self) -> bool:
        return all(v.is_zero() for row in self.entries for v in row)

    # -- arithmetic ------------------------------------------------------------

    def __add__(self, other: "RFMatrix") -> "RFMatrix":
        self._check_shape(other, same=True)
        return RFMatrix(
            self.ctx,
            [[a + b for a, b in zip(r1, r2)] for r1, r2 in zip(self.entries, other.entries)],
        )

    def __sub__(self, other: "RFMatrix") -> "RFMatrix":
        self._check_shape(other, same=True)
        return RFMatrix(
            self.ctx,
            [[a - b for a, b in zip(r1, r2)] for r1, r2 in zip(self.entries, other.entries)],
        )

    def __neg__(self) -> "RFMatrix":
        return RFMatrix(self.ctx, [[-v for v in row] for row in self.entries])

    def __matmul__(self, other: "RFMatrix") -> "RFMatrix":
        if self.cols != other.rows:
            raise ValueError(f"shape mismatch {self.rows}x{self.cols} @ {other.rows}x{other.cols}")
        out = []
        for i in range(self.rows):
            row = []
            for j in range(other.cols):
                acc = RationalFunction.of(self.ctx.zero())
                for k in range(self.cols):
                    a = self.entries[i][k]
                    b = other.entries[k][j]
                    if a.is_zero() or b.is_zero():
                        continue
                    acc = acc + a * b
                row.append(acc)
            out.append(row)
        return RFMatrix(self.ctx, out)

    def mul_vector(self, vec: Sequence) -> list[RationalFunction]:
        col = RFMatrix.column(self.ctx, vec)
        return (self @ col).col(0)

    def transpose(self) -> "RFMatrix":
        return RFMatrix(self.ctx, [[self.entries[i][j] for i in range(self.rows)] for j in range(self.cols)])

    def map(self, fn: Callable[[RationalFunction], RationalFunction]) -> "RFMatrix":
        return RFMatrix(self.ctx, [[fn(v) for v in row] for row in self.entries])

    def __eq__(self, other):
        if not isinstance(other, RFMatrix):
            return NotImplemented
        if (self.rows, self.cols) != (other.rows, other.cols):
            return False
        return all(
            a == b for r1, r2 in zip(self.entries, other.entries) for a, b in zip(r1, r2)
        )

    def _check_shape(self, other: "RFMatrix", same: bool):
        if same and (self.rows, self.cols) != (other.rows, other.cols):
            raise ValueError("shape mismatch")

    # -- evaluation --------------------------------------------------------------

    def eval(self, point: Mapping[str, object]) -> list[list[Fraction]]:
        return [[v.eval(point) for v in row] for row in self.entries]  # type: ignore[arg-type]

    def rank_at(self, point: Mapping[str, object]) -> int:
        return fraction_rank(self.eval(point))

    def render(self) -> str:
        return "\n".join("[" + ", ".join(v.render() for v in row) + "]" for row in self.entries)

    def __repr__(self):
        return f"RFMatrix({self.rows}x{self.cols})"


# ---------------------------------------------------------------------------
# Exact numeric helpers (Fraction matrices)
# ---------------------------------------------------------------------------


def fraction_rank(m: list[list[Fraction]]) -> int:
    """Rank of a Fraction matrix by plain Gaussian elimination."""
    m = [row[:] for row in m]
    rows = len(m)
    cols = len(m[0]) if rows else 0
    rank = 0
    for c in range(cols):
        piv = None
        for r in range(rank, rows):
            if m[r][c] != 0:
                piv = r
                break
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        pv = m[rank][c]
        for r in range(rank + 1, rows):
            if m[r][c] != 0:
                f = m[r][c] / pv
                for cc in range(c, cols):
                    m[r][cc] -= f * m[rank][cc]
        rank += 1
        if rank == rows:
            break
    return rank


def fraction_nullspace(m: list[list[Fraction]]) -> list[list[Fraction]]:
    """Basis of the right nullspace of a Fraction matrix (RREF-based)."""
    rows = len(m)
    cols = len(m[0]) if rows else 0
    a = [row[:] for row in m]
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        piv = None
        for rr in range(r, rows):
            if a[rr][c] != 0:
                piv = rr
                break
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        pv = a[r][c]
        a[r] = [v / pv for v in a[r]]
        for rr in range(rows):
            if rr != r and a[rr][c] != 0:
                f = a[rr][c]
                a[rr] = [v - f * w for v, w in zip(a[rr], a[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    basis = []
    free = [c for c in range(cols) if c not in pivots]
    for fc in free:
        vec = [Fraction(0)] * cols
        vec[fc] = Fraction(1)
        for pr, pc in enumerate(pivots):
            vec[pc] = -a[pr][fc]
        basis.append(vec)
    return basis


def fraction_solve(m: list[list[Fraction]], b: list[Fraction]) -> list[Fraction] | None:
    """One solution of m x = b over Fractions, free variables set to 0."""
    rows = len(m)
    cols = len(m[0]) if rows else 0
    a = [m[i][:] + [b[i]] for i in range(rows)]
    pivots: list[tuple[int, int]] = []
    r = 0
    for c in range(cols):
        piv = None
        for rr in range(r, rows):
            if a[rr][c] != 0:
                piv = rr
                break
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        pv = a[r][c]
        for rr in range(r + 1, rows):
            if a[rr][c] != 0:
                f = a[rr][c] / pv
                for cc in range(c, cols + 1):
                    a[rr][cc] -= f * a[r][cc]
        pivots.append((r, c))
        r += 1
        if r == rows:
            break
    for rr in range(r, rows):
        if a[rr][cols] != 0:
            return None
    x = [Fraction(0)] * cols
    for pr, pc in reversed(pivots):
        s = a[pr][cols]
        for cc in range(pc + 1, cols):
            s -= a[pr][cc] * x[cc]
        x[pc] = s / a[pr][pc]
    return x


# ---------------------------------------------------------------------------
# Fraction-free elimination over the polynomial ring
# ---------------------------------------------------------------------------


def _clear_row_denominators(
    ctx: Context, row: list[RationalFunction]
) -> list[Polynomial]:
    """Scale a row by the product of its denominators; returns polynomials."""
    mult = ctx.one()
    for v in row:
        if not v.den.is_one():
            mult = mult * v.den
    out = []
    for v in row:
        q = mult.exact_divide(v.den)
        # product of the *other* denominators; exact by construction
        assert q is not None
        out.append(v.num * q)
    return out


def _bareiss(rows: list[list[Polynomial]], ncols: int) -> tuple[list[list[Polynomial]], list[int], list[int]]:
    """Fraction-free forward elimination.

    Returns (echelon rows, pivot column list, row permutation applied), where
    echelon rows keep polynomial entries and each elimination step divides by
    the previous pivot exactly (Bareiss).
    """
    a = [row[:] for row in rows]
    nrows = len(a)
    perm = list(range(nrows))
    pivots: list[int] = []
    prev = None  # previous pivot polynomial
    r = 0
    for c in range(ncols):
        piv = None
        best = None
        for rr in range(r, nrows):
            if not a[rr][c].is_zero():
                size = len(a[rr][c].terms)
                if best is None or size < best:
                    best = size
                    piv = rr
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        perm[r], perm[piv] = perm[piv], perm[r]
        pv = a[r][c]
        for rr in range(r + 1, nrows):
            if all(a[rr][j].is_zero() for j in range(c, len(a[rr]))):
                continue
            updated = [
                pv * a[rr][cc] - a[rr][c] * a[r][cc] for cc in range(c, len(a[rr]))
            ]
            if prev is not None:
                # Bareiss step: the division is exact on full-rank paths; on
                # rank-deficient ones fall back to the undivided row (still a
                # valid row operation, merely larger).
                divided = [u.exact_divide(prev) for u in updated]
                if all(d is not None for d in divided):
                    updated = divided  # type: ignore[assignment]
            for off, val in enumerate(updated):
                a[rr][c + off] = val
        prev = pv
        pivots.append(c)
        r += 1
        if r == nrows:
            break
    return a, pivots, perm


def linear_solve(M: RFMatrix, b: Sequence) -> "list[RationalFunction] | NoSolution":
    """Exact solution of M x = b over the rational-function field.

    Rows are cleared of denominators, then eliminated fraction-free.  On an
    inconsistent system returns NoSolution carrying the (original) index of the
    offending row.  Underdetermined systems get free variables set to zero.
    """
    ctx = M.ctx
    bvec = [RationalFunction.coerce(ctx, v) for v in b]
    if len(bvec) != M.rows:
        raise ValueError("right-hand side length mismatch")
    aug = []
    for i in range(M.rows):
        aug.append(_clear_row_denominators(ctx, M.row(i) + [bvec[i]]))
    ech, pivots, perm = _bareiss(aug, M.cols)
    nrows = len(ech)
    # consistency: zero coefficient row with nonzero rhs
    for rr in range(len(pivots), nrows):
        if all(ech[rr][c].is_zero() for c in range(M.cols)) and not ech[rr][M.cols].is_zero():
            return NoSolution(perm[rr])
    x: list[RationalFunction] = [RationalFunction.of(ctx.zero()) for _ in range(M.cols)]
    for pr in range(len(pivots) - 1, -1, -1):
        pc = pivots[pr]
        s = RationalFunction.of(ech[pr][M.cols])
        for cc in range(pc + 1, M.cols):
            if not ech[pr][cc].is_zero() and not x[cc].is_zero():
                s = s - RationalFunction.of(ech[pr][cc]) * x[cc]
        x[pc] = s / RationalFunction.of(ech[pr][pc])
    # rows below the pivot block that are not identically zero must also vanish
    for rr in range(len(pivots), nrows):
        residual = RationalFunction.of(ech[rr][M.cols])
        for cc in range(M.cols):
            if not ech[rr][cc].is_zero() and not x[cc].is_zero():
                residual = residual - RationalFunction.of(ech[rr][cc]) * x[cc]
        if not residual.is_zero():
            return NoSolution(perm[rr])
    return x


def solve_matrix(M: RFMatrix, B: RFMatrix) -> "RFMatrix | NoSolution":
    """Solve M X = B column by column."""
    cols = []
    for j in range(B.cols):
        x = linear_solve(M, B.col(j))
        if isinstance(x, NoSolution):
            return x
        cols.append(x)
    return RFMatrix(M.ctx, [[cols[j][i] for j in range(B.cols)] for i in range(M.cols)])


def invert(M: RFMatrix) -> RFMatrix:
    """Inverse of a square RF matrix; raises if singular."""
    if M.rows != M.cols:
        raise ValueError("inverse of non-square matrix")
    X = solve_matrix(M, RFMatrix.identity(M.ctx, M.rows))
    if isinstance(X, NoSolution):
        raise SymbolicError("matrix is singular over the rational-function field")
    # verify (an underdetermined solve with free vars could slip through)
    if not (M @ X - RFMatrix.identity(M.ctx, M.rows)).is_zero():
        raise SymbolicError("matrix is singular over the rational-function field")
    return X


def determinant(M: RFMatrix) -> RationalFunction:
    """Exact determinant via fraction-free elimination."""
    if M.rows != M.cols:
        raise ValueError("determinant of non-square matrix")
    n = M.rows
    if n == 0:
        return RationalFunction.of(M.ctx.one())
    rows = []
    scale = RationalFunction.of(M.ctx.one())
    for i in range(n):
        cleared = _clear_row_denominators(M.ctx, M.row(i))
        # account for the row scaling
        mult = M.ctx.one()
        for v in M.row(i):
            if not v.den.is_one():
                mult = mult * v.den
        scale = scale * RationalFunction.of(mult)
        rows.append(cleared)
    ech, pivots, perm = _bareiss(rows, n)
    if len(pivots) < n:
        return RationalFunction.of(M.ctx.zero())
    det = RationalFunction.of(ech[n - 1][n - 1])
    # Bareiss: last pivot equals the determinant of the cleared matrix
    sign = _perm_sign(perm)
    det = det * sign
    return det / scale


def _perm_sign(perm: list[int]) -> int:
    seen = [False] * len(perm)
    sign = 1
    for i in range(len(perm)):
        if seen[i]:
            continue
        j = i
        length = 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


# ---------------------------------------------------------------------------
# Structural factorizations
# ---------------------------------------------------------------------------


def hadamard_factor(v: Sequence[Polynomial], yvars: Sequence[str]) -> RFMatrix:
    """Write a vector vanishing at y=0 as G*y exactly, G polynomial.

    Every entry of v must vanish identically when all of yvars are set to 0;
    otherwise ConsistencyError reports the first offending entry and its
    residual.  For a monomial containing several yvars the divisor is the yvar
    of lowest index, which makes the output deterministic.
    """
    if not v:
        raise ValueError("empty vector")
    ctx = v[0].ctx
    ynames = list(yvars)
    yidx = [ctx.index[n] for n in ynames]
    zero_binding = {n: 0 for n in ynames}
    for i, entry in enumerate(v):
        residual = entry.subs(zero_binding)
        if not residual.is_zero():
            raise ConsistencyError(
                f"entry {i} does not vanish at {{{', '.join(ynames)}}} = 0; residual: {residual.render()}"
            )
    rows = []
    for entry in v:
        cols = [dict() for _ in ynames]  # type: list[dict]
        for e, c in entry.terms.items():
            for pos, gi in enumerate(yidx):
                if e[gi] > 0:
                    ne = list(e)
                    ne[gi] -= 1
                    cols[pos][tuple(ne)] = cols[pos].get(tuple(ne), Fraction(0)) + c
                    break
            else:
                raise ConsistencyError(
                    f"monomial free of {{{', '.join(ynames)}}} survived the vanishing check"
                )
        rows.append([Polynomial(ctx, col) for col in cols])
    return RFMatrix(ctx, rows)


def rank_and_factor(
    M: RFMatrix, sample: Mapping[str, object]
) -> tuple[int, RFMatrix, RFMatrix]:
    """Rank factorization M = G * R guided by evaluation at a sample point.

    Columns of G are a maximal independent set of columns of M at the sample,
    chosen greedily from the right so that R carries an identity block on the
    selected columns (the unselected, lower-index columns are expressed through
    them).  The identity M = G R is verified symbolically; failure raises
    RankError suggesting a different sample.
    """
    numeric = M.eval(sample)
    total_rank = fraction_rank(numeric)
    if total_rank == 0:
        raise RankError("matrix vanishes at the sample point; pick a different sample")
    selected: list[int] = []
    current: list[list[Fraction]] = []
    for j in range(M.cols - 1, -1, -1):
        cand = current + [[numeric[i][j] for i in range(M.rows)]]
        if fraction_rank(cand) > len(current):
            selected.insert(0, j)
            current = cand
        if len(selected) == total_rank:
            break
    G = RFMatrix(M.ctx, [[M.entries[i][j] for j in selected] for i in range(M.rows)])
    rcols: list[list[RationalFunction]] = []
    for j in range(M.cols):
        if j in selected:
            unit = [
                RationalFunction.of(M.ctx.one() if selected[k] == j else M.ctx.zero())
                for k in range(total_rank)
            ]
            rcols.append(unit)
        else:
            x = linear_solve(G, M.col(j))
            if isinstance(x, NoSolution):
                raise RankError(
                    f"column {j} is not in the span of the selected columns symbolically; "
                    "rank may not be locally constant -- try a different sample"
                )
            rcols.append(x)
    R = RFMatrix(M.ctx, [[rcols[j][i] for j in range(M.cols)] for i in range(total_rank)])
    if not (G @ R - M).is_zero():
        raise RankError("symbolic verification of the rank factorization failed; try a different sample")
    return total_rank, G, R


def char_poly(M: RFMatrix) -> list[RationalFunction]:
    """Monic characteristic polynomial coefficients [1, c1, ..., cn].

    Uses the Faddeev-LeVerrier recursion, so no fresh indeterminate is needed;
    coefficient k multiplies lambda^(n-k).
    """
    if M.rows != M.cols:
        raise ValueError("characteristic polynomial of non-square matrix")
    n = M.rows
    ctx = M.ctx
    coeffs = [RationalFunction.of(ctx.one())]
    Mk = M
    ident = RFMatrix.identity(ctx, n)
    for k in range(1, n + 1):
        tr = RationalFunction.of(ctx.zero())
        for i in range(n):
            tr = tr + Mk.entries[i][i]
        ck = tr * Fraction(-1, k)
        coeffs.append(ck)
        if k < n:
            Mk = M @ (Mk + ident.map(lambda v, c=ck: v * c))
    return coeffs


def jacobian(v: Sequence[Polynomial | RationalFunction], names: Sequence[str]) -> RFMatrix:
    """Matrix of partial derivatives of a vector w.r.t. the given symbols."""
    if not v:
        raise ValueError("empty vector")
    ctx = v[0].ctx
    rows = []
    for entry in v:
        rf = RationalFunction.coerce(ctx, entry)
        rows.append([rf.diff(n) for n in names])
    return RFMatrix(ctx, rows)
