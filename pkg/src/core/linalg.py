"""Dense exact linear algebra over any FieldHandle.

Matrices hold raw field tuples. Over finite fields, large products and row reductions run on
galois FieldArrays and are converted back lazily; the reduced row echelon form is unique, so
both paths return identical results.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from itertools import product

import numpy as np

from src.core.errors import (
    ConjugacyUndecided,
    EigenvalueOutsideField,
    FieldMismatch,
    NotInvariant,
    ParseError,
    SingularMatrix,
)
from src.core.fields import FieldElement, FieldHandle, field_from_descriptor, galois_field, roots_of_unity
from src.utils.config import get_settings
from src.utils.logger import get_logger

logger = get_logger(__name__)

_GALOIS_MIN_WORK = 4096
_RANDOM_SEED = 20240601
_RANDOM_TRIES = 16
_RANDOM_SPAN = 2**20


def _nonzero(x) -> bool:
    return any(x)


class ExactMatrix:
    __slots__ = ("field", "rows", "cols", "_data", "_gf")

    def __init__(self, field: FieldHandle, rows: int, cols: int, data=None, gf=None):
        self.field = field
        self.rows = rows
        self.cols = cols
        self._data = data
        self._gf = gf

    # -- construction -----------------------------------------------------------------------

    @classmethod
    def zeros(cls, field, rows, cols) -> ExactMatrix:
        z = field.zero_raw
        return cls(field, rows, cols, [[z] * cols for _ in range(rows)])

    @classmethod
    def identity(cls, field, n) -> ExactMatrix:
        m = cls.zeros(field, n, n)
        for i in range(n):
            m._data[i][i] = field.one_raw
        return m

    @classmethod
    def scalar(cls, field, n, value) -> ExactMatrix:
        c = field.raw(value)
        m = cls.zeros(field, n, n)
        for i in range(n):
            m._data[i][i] = c
        return m

    @classmethod
    def diagonal(cls, field, values) -> ExactMatrix:
        values = list(values)
        m = cls.zeros(field, len(values), len(values))
        for i, v in enumerate(values):
            m._data[i][i] = field.raw(v)
        return m

    @classmethod
    def from_values(cls, field, values) -> ExactMatrix:
        """Builds a matrix from nested lists of ints, Fractions or FieldElements."""
        data = [[field.raw(v) for v in row] for row in values]
        cols = len(data[0]) if data else 0
        if any(len(row) != cols for row in data):
            raise ValueError("ragged matrix rows")
        return cls(field, len(data), cols, data)

    @classmethod
    def from_rows(cls, field, rows, cols: int) -> ExactMatrix:
        return cls(field, len(rows), cols, [list(r) for r in rows])

    @classmethod
    def from_galois(cls, field, arr) -> ExactMatrix:
        return cls(field, arr.shape[0], arr.shape[1], gf=arr)

    # -- representations --------------------------------------------------------------------

    @property
    def data(self) -> list[list[tuple]]:
        if self._data is None:
            f = self.field
            if f.k == 1:
                self._data = [[(v,) for v in row] for row in self._gf.view(np.ndarray).tolist()]
            else:
                self._data = [[f.from_int(v) for v in row] for row in self._gf.view(np.ndarray).tolist()]
        return self._data

    def galois(self):
        if self._gf is None:
            f = self.field
            gf = galois_field(f)
            if self.rows == 0 or self.cols == 0:
                self._gf = gf.Zeros((self.rows, self.cols))
            elif f.k == 1:
                self._gf = gf(np.array([[x[0] for x in row] for row in self._data], dtype=np.int64))
            else:
                self._gf = gf(np.array([[f.to_int(x) for x in row] for row in self._data], dtype=np.int64))
        return self._gf

    def _prefer_galois(self, work: int) -> bool:
        return self.field.is_finite and (self._gf is not None or work >= _GALOIS_MIN_WORK)

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    @property
    def is_square(self) -> bool:
        return self.rows == self.cols

    def __getitem__(self, ij) -> FieldElement:
        i, j = ij
        return FieldElement(self.field, self.data[i][j])

    def entry_raw(self, i: int, j: int) -> tuple:
        return self.data[i][j]

    def row_raw(self, i: int) -> list:
        return self.data[i]

    def key(self):
        if self.field.is_finite:
            return self.galois().view(np.ndarray).tobytes() + bytes(str(self.shape), "ascii")
        return (self.shape, tuple(tuple(r) for r in self.data))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ExactMatrix):
            return NotImplemented
        if self.field != other.field or self.shape != other.shape:
            return False
        if self._gf is not None and other._gf is not None:
            return bool(np.array_equal(self._gf.view(np.ndarray), other._gf.view(np.ndarray)))
        return self.data == other.data

    def __hash__(self) -> int:
        return hash(self.key())

    def __repr__(self) -> str:
        return f"ExactMatrix({self.field}, {self.rows}x{self.cols})"

    # -- arithmetic -------------------------------------------------------------------------

    def _check(self, other: ExactMatrix):
        if self.field != other.field:
            raise FieldMismatch(f"matrices over {self.field} and {other.field}")

    def __add__(self, other: ExactMatrix) -> ExactMatrix:
        self._check(other)
        if self._gf is not None and other._gf is not None:
            return ExactMatrix.from_galois(self.field, self._gf + other._gf)
        add = self.field.add
        data = [[add(a, b) for a, b in zip(ra, rb)] for ra, rb in zip(self.data, other.data)]
        return ExactMatrix(self.field, self.rows, self.cols, data)

    def __sub__(self, other: ExactMatrix) -> ExactMatrix:
        self._check(other)
        if self._gf is not None and other._gf is not None:
            return ExactMatrix.from_galois(self.field, self._gf - other._gf)
        sub = self.field.sub
        data = [[sub(a, b) for a, b in zip(ra, rb)] for ra, rb in zip(self.data, other.data)]
        return ExactMatrix(self.field, self.rows, self.cols, data)

    def __neg__(self) -> ExactMatrix:
        neg = self.field.neg
        return ExactMatrix(self.field, self.rows, self.cols, [[neg(a) for a in r] for r in self.data])

    def scale(self, value) -> ExactMatrix:
        c = self.field.raw(value)
        mul = self.field.mul
        data = [[mul(c, a) if _nonzero(a) else a for a in r] for r in self.data]
        return ExactMatrix(self.field, self.rows, self.cols, data)

    def __matmul__(self, other: ExactMatrix) -> ExactMatrix:
        self._check(other)
        if self.cols != other.rows:
            raise ValueError(f"cannot multiply {self.shape} by {other.shape}")
        work = self.rows * self.cols * other.cols
        if self._prefer_galois(work) or other._prefer_galois(work):
            if self.rows and other.cols and self.cols:
                return ExactMatrix.from_galois(self.field, self.galois() @ other.galois())
            return ExactMatrix.zeros(self.field, self.rows, other.cols)
        return ExactMatrix(self.field, self.rows, other.cols, _matmul_raw(self.field, self.data, other.data, other.cols))

    def transpose(self) -> ExactMatrix:
        if self._gf is not None:
            return ExactMatrix.from_galois(self.field, self._gf.T)
        return ExactMatrix(self.field, self.cols, self.rows, [list(c) for c in zip(*self.data)] if self.rows else [[] for _ in range(self.cols)])

    @property
    def T(self) -> ExactMatrix:
        return self.transpose()

    def minus_scalar(self, value) -> ExactMatrix:
        """M - c*I."""
        c = self.field.raw(value)
        sub = self.field.sub
        data = [list(r) for r in self.data]
        for i in range(min(self.rows, self.cols)):
            data[i][i] = sub(data[i][i], c)
        return ExactMatrix(self.field, self.rows, self.cols, data)

    def submatrix(self, rows, cols) -> ExactMatrix:
        rows, cols = list(rows), list(cols)
        d = self.data
        return ExactMatrix(self.field, len(rows), len(cols), [[d[i][j] for j in cols] for i in rows])

    def is_zero(self) -> bool:
        return not any(_nonzero(x) for r in self.data for x in r)

    def is_identity(self) -> bool:
        return self.scalar_value() == self.field.one_raw

    def scalar_value(self):
        """The raw scalar c if the matrix equals c*I, otherwise None."""
        if not self.is_square or self.rows == 0:
            return None
        d = self.data
        c = d[0][0]
        for i, row in enumerate(d):
            for j, x in enumerate(row):
                if (x != c) if i == j else _nonzero(x):
                    return None
        return c

    def map_entries(self, target: FieldHandle, fn) -> ExactMatrix:
        return ExactMatrix(target, self.rows, self.cols, [[fn(x) for x in r] for r in self.data])

    def vectorize(self) -> list:
        return [x for r in self.data for x in r]

    # -- serialization ----------------------------------------------------------------------

    def to_json(self) -> dict:
        enc = self.field.encode_raw
        return {
            "field": self.field.descriptor(),
            "rows": self.rows,
            "cols": self.cols,
            "entries": [[enc(x) for x in r] for r in self.data],
        }

    @classmethod
    def from_json(cls, doc, location: str = "$", field: FieldHandle | None = None) -> ExactMatrix:
        if not isinstance(doc, dict):
            raise ParseError("matrix must be an object", location)
        for key in ("field", "rows", "cols", "entries"):
            if key not in doc:
                raise ParseError(f"missing key {key!r}", location)
        own = field_from_descriptor(doc["field"], f"{location}.field")
        if field is not None and own != field:
            raise ParseError(f"matrix over {own} inside a document over {field}", location)
        rows, cols, entries = doc["rows"], doc["cols"], doc["entries"]
        if not isinstance(rows, int) or not isinstance(cols, int) or not isinstance(entries, list):
            raise ParseError("rows/cols must be integers and entries a list", location)
        if len(entries) != rows or any(not isinstance(r, list) or len(r) != cols for r in entries):
            raise ParseError(f"entries do not form a {rows}x{cols} grid", f"{location}.entries")
        data = [
            [own.decode_raw(x, f"{location}.entries[{i}][{j}]") for j, x in enumerate(r)]
            for i, r in enumerate(entries)
        ]
        return cls(own, rows, cols, data)


def _matmul_raw(field: FieldHandle, a_rows, b_rows, b_cols: int) -> list[list[tuple]]:
    add, mul = field.add, field.mul
    zero = field.zero_raw
    b_nz = [[(j, x) for j, x in enumerate(row) if _nonzero(x)] for row in b_rows]
    out = []
    for arow in a_rows:
        acc = [zero] * b_cols
        for k, a in enumerate(arow):
            if _nonzero(a):
                for j, b in b_nz[k]:
                    acc[j] = add(acc[j], mul(a, b))
        out.append(acc)
    return out


# -- echelon forms --------------------------------------------------------------------------


def _rref_raw(field: FieldHandle, rows, ncols: int):
    rows = [list(r) for r in rows]
    nrows = len(rows)
    one = field.one_raw
    sub, mul = field.sub, field.mul
    pivots = []
    r = 0
    for c in range(ncols):
        if r == nrows:
            break
        p = next((i for i in range(r, nrows) if _nonzero(rows[i][c])), None)
        if p is None:
            continue
        rows[r], rows[p] = rows[p], rows[r]
        pr = rows[r]
        if pr[c] != one:
            inv = field.inv(pr[c])
            for j in range(c, ncols):
                if _nonzero(pr[j]):
                    pr[j] = mul(inv, pr[j])
        nz = [j for j in range(c, ncols) if _nonzero(pr[j])]
        for i in range(nrows):
            if i == r:
                continue
            ri = rows[i]
            f = ri[c]
            if _nonzero(f):
                for j in nz:
                    ri[j] = sub(ri[j], mul(f, pr[j]))
        pivots.append(c)
        r += 1
    return rows, pivots


def _pivots_of(arr) -> list[int]:
    plain = arr.view(np.ndarray)
    pivots = []
    for row in plain:
        nz = np.flatnonzero(row)
        if nz.size == 0:
            break
        pivots.append(int(nz[0]))
    return pivots


def rref(M: ExactMatrix) -> tuple[ExactMatrix, int, list[int]]:
    if M.rows == 0 or M.cols == 0:
        return M, 0, []
    if M._prefer_galois(M.rows * M.cols * min(M.rows, M.cols)):
        R = M.galois().row_reduce()
        pivots = _pivots_of(R)
        return ExactMatrix.from_galois(M.field, R), len(pivots), pivots
    rows, pivots = _rref_raw(M.field, M.data, M.cols)
    return ExactMatrix(M.field, M.rows, M.cols, rows), len(pivots), pivots


def rank(M: ExactMatrix) -> int:
    return rref(M)[1]


@dataclass(frozen=True, eq=False)
class Subspace:
    ambient_dim: int
    basis: ExactMatrix
    pivots: tuple[int, ...]

    @property
    def field(self) -> FieldHandle:
        return self.basis.field

    @property
    def dim(self) -> int:
        return self.basis.rows

    @classmethod
    def zero(cls, field, ambient_dim) -> Subspace:
        return cls(ambient_dim, ExactMatrix(field, 0, ambient_dim, []), ())

    @classmethod
    def span(cls, field, ambient_dim, vectors) -> Subspace:
        """Canonical subspace spanned by the rows of an ExactMatrix or a list of raw vectors."""
        if not isinstance(vectors, ExactMatrix):
            vectors = ExactMatrix.from_rows(field, list(vectors), ambient_dim)
        if vectors.rows == 0:
            return cls.zero(field, ambient_dim)
        R, r, pivots = rref(vectors)
        basis = ExactMatrix(field, r, ambient_dim, [list(row) for row in R.data[:r]])
        return cls(ambient_dim, basis, tuple(pivots))

    def __add__(self, other: Subspace) -> Subspace:
        if self.ambient_dim != other.ambient_dim:
            raise ValueError("subspaces of different ambient dimension")
        return Subspace.span(self.field, self.ambient_dim, self.basis.data + other.basis.data)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Subspace):
            return NotImplemented
        return self.ambient_dim == other.ambient_dim and self.basis == other.basis

    def __hash__(self) -> int:
        return hash((self.ambient_dim, self.pivots))

    def complement(self) -> tuple[int, ...]:
        piv = set(self.pivots)
        return tuple(c for c in range(self.ambient_dim) if c not in piv)

    def reduce(self, vector) -> list:
        """Residual of a raw vector after clearing every pivot coordinate."""
        f = self.field
        w = list(vector)
        for row, p in zip(self.basis.data, self.pivots):
            c = w[p]
            if _nonzero(c):
                for j, x in enumerate(row):
                    if _nonzero(x):
                        w[j] = f.sub(w[j], f.mul(c, x))
        return w

    def is_invariant_under(self, M: ExactMatrix) -> bool:
        if self.dim == 0:
            return True
        images = M @ self.basis.transpose()
        return _quotient_residual(images, self).is_zero()


def kernel(M: ExactMatrix) -> Subspace:
    """Canonical right kernel {v : M v = 0}."""
    field = M.field
    n = M.cols
    if M.rows == 0:
        return Subspace.span(field, n, ExactMatrix.identity(field, n))
    R, r, pivots = rref(M)
    free = [c for c in range(n) if c not in set(pivots)]
    if not free:
        return Subspace.zero(field, n)
    data = R.data
    vectors = []
    for f in free:
        v = [field.zero_raw] * n
        v[f] = field.one_raw
        for i, p in enumerate(pivots):
            x = data[i][f]
            if _nonzero(x):
                v[p] = field.neg(x)
        vectors.append(v)
    return Subspace.span(field, n, vectors)


def inverse(M: ExactMatrix) -> ExactMatrix:
    if not M.is_square:
        raise ValueError(f"inverse of a non-square {M.shape} matrix")
    n = M.rows
    field = M.field
    if n == 0:
        return M
    if M._prefer_galois(n * n * n):
        try:
            return ExactMatrix.from_galois(field, np.linalg.inv(M.galois()))
        except np.linalg.LinAlgError:
            raise SingularMatrix(f"{n}x{n} matrix over {field} is singular")
    one, zero = field.one_raw, field.zero_raw
    aug = [list(row) + [one if i == j else zero for j in range(n)] for i, row in enumerate(M.data)]
    rows, pivots = _rref_raw(field, aug, 2 * n)
    if len(pivots) < n or pivots[n - 1] != n - 1:
        raise SingularMatrix(f"{n}x{n} matrix over {field} is singular")
    return ExactMatrix(field, n, n, [row[n:] for row in rows])


def determinant(M: ExactMatrix) -> FieldElement:
    if not M.is_square:
        raise ValueError("determinant of a non-square matrix")
    field = M.field
    if M.rows == 0:
        return field.one
    if M._prefer_galois(M.rows**3):
        return FieldElement(field, field.from_int(int(np.linalg.det(M.galois()))))
    rows = [list(r) for r in M.data]
    n = M.rows
    det = field.one_raw
    for c in range(n):
        p = next((i for i in range(c, n) if _nonzero(rows[i][c])), None)
        if p is None:
            return field.zero
        if p != c:
            rows[c], rows[p] = rows[p], rows[c]
            det = field.neg(det)
        pr = rows[c]
        det = field.mul(det, pr[c])
        inv = field.inv(pr[c])
        for i in range(c + 1, n):
            f = rows[i][c]
            if _nonzero(f):
                f = field.mul(f, inv)
                ri = rows[i]
                for j in range(c, n):
                    if _nonzero(pr[j]):
                        ri[j] = field.sub(ri[j], field.mul(f, pr[j]))
    return FieldElement(field, det)


# -- characteristic polynomial and Jordan data ---------------------------------------------


def _hessenberg(field: FieldHandle, M: ExactMatrix) -> list[list[tuple]]:
    n = M.rows
    H = [list(r) for r in M.data]
    add, sub, mul = field.add, field.sub, field.mul
    for m in range(1, n - 1):
        i = next((i for i in range(m, n) if _nonzero(H[i][m - 1])), None)
        if i is None:
            continue
        if i != m:
            H[i], H[m] = H[m], H[i]
            for row in H:
                row[i], row[m] = row[m], row[i]
        inv = field.inv(H[m][m - 1])
        for i in range(m + 1, n):
            u = H[i][m - 1]
            if not _nonzero(u):
                continue
            u = mul(u, inv)
            Hi, Hm = H[i], H[m]
            for j in range(n):
                if _nonzero(Hm[j]):
                    Hi[j] = sub(Hi[j], mul(u, Hm[j]))
            for row in H:
                if _nonzero(row[i]):
                    row[m] = add(row[m], mul(u, row[i]))
    return H


def _poly_sub_scaled(field, p, q, c):
    """p - c*q for raw coefficient lists (low degree first)."""
    out = list(p) + [field.zero_raw] * max(0, len(q) - len(p))
    for i, x in enumerate(q):
        if _nonzero(x):
            out[i] = field.sub(out[i], field.mul(c, x))
    return out


def char_poly_raw(M: ExactMatrix) -> list[tuple]:
    """det(x*I - M) as raw coefficients, lowest degree first, monic.

    Hessenberg reduction followed by the determinant recurrence on the Hessenberg form; only
    field divisions by pivots are used, so the result is valid in every characteristic.
    """
    if not M.is_square:
        raise ValueError("characteristic polynomial of a non-square matrix")
    field = M.field
    n = M.rows
    H = _hessenberg(field, M)
    zero, one = field.zero_raw, field.one_raw
    polys = [[one]]
    for mm in range(1, n + 1):
        prev = polys[mm - 1]
        shifted = [zero] + list(prev)
        p = _poly_sub_scaled(field, shifted, prev, H[mm - 1][mm - 1])
        t = one
        for i in range(1, mm):
            t = field.mul(t, H[mm - i][mm - i - 1])
            if not _nonzero(t):
                break
            h = H[mm - i - 1][mm - 1]
            if _nonzero(h):
                p = _poly_sub_scaled(field, p, polys[mm - i - 1], field.mul(t, h))
        polys.append(p)
    return polys[n]


def char_poly(M: ExactMatrix) -> list[FieldElement]:
    return [FieldElement(M.field, c) for c in char_poly_raw(M)]


def poly_eval(field: FieldHandle, coeffs, x) -> tuple:
    acc = field.zero_raw
    for c in reversed(coeffs):
        acc = field.add(field.mul(acc, x), c)
    return acc


def root_multiplicity(field: FieldHandle, coeffs, x) -> int:
    """Multiplicity of x as a root of a raw polynomial, by repeated synthetic division."""
    coeffs = list(coeffs)
    mult = 0
    while len(coeffs) > 1:
        # divide by (t - x): quotient b, remainder coeffs[0] + x*b_0
        deg = len(coeffs) - 1
        b = [field.zero_raw] * deg
        b[deg - 1] = coeffs[deg]
        for i in range(deg - 1, 0, -1):
            b[i - 1] = field.add(coeffs[i], field.mul(x, b[i]))
        rem = field.add(coeffs[0], field.mul(x, b[0]))
        if _nonzero(rem):
            break
        mult += 1
        coeffs = b
    return mult


@dataclass(frozen=True)
class JordanBlock:
    eigenvalue: FieldElement
    size: int
    multiplicity: int

    def to_json(self) -> dict:
        return {"eigenvalue": self.eigenvalue.to_json(), "size": self.size, "multiplicity": self.multiplicity}


@dataclass(frozen=True)
class JordanData:
    dim: int
    blocks: tuple[JordanBlock, ...]

    @classmethod
    def from_blocks(cls, dim: int, blocks) -> JordanData:
        """Merges (eigenvalue, size, multiplicity) triples into the canonical sorted form."""
        merged: dict = {}
        for ev, size, mult in blocks:
            if mult <= 0:
                continue
            merged[(ev, size)] = merged.get((ev, size), 0) + mult
        total = sum(size * mult for (_, size), mult in merged.items())
        if total != dim:
            raise ValueError(f"Jordan blocks cover {total} dimensions, expected {dim}")
        ordered = sorted(merged.items(), key=lambda kv: (kv[0][0].sort_key(), -kv[0][1]))
        return cls(dim, tuple(JordanBlock(ev, size, mult) for (ev, size), mult in ordered))

    def inverted(self) -> JordanData:
        return JordanData.from_blocks(
            self.dim, ((b.eigenvalue.inverse(), b.size, b.multiplicity) for b in self.blocks)
        )

    def is_selfdual(self) -> bool:
        return self.inverted() == self

    def to_json(self) -> dict:
        return {"dim": self.dim, "blocks": [b.to_json() for b in self.blocks]}

    def __str__(self) -> str:
        parts = []
        for b in self.blocks:
            label = json.dumps(b.eigenvalue.to_json())
            parts.append(f"{label}:J({b.size})^{b.multiplicity}")
        return "(" + ", ".join(parts) + ")"


def jordan_data(M: ExactMatrix, eigenvalue_orders) -> JordanData:
    if not M.is_square:
        raise ValueError("Jordan data of a non-square matrix")
    field = M.field
    n = M.rows
    cp = char_poly_raw(M)
    found = []
    accounted = 0
    for zeta in roots_of_unity(field, eigenvalue_orders):
        mult = root_multiplicity(field, cp, zeta.coeffs)
        if mult == 0:
            continue
        shifted = M.minus_scalar(zeta)
        dims = [0]
        power = shifted
        while dims[-1] < mult:
            d = n - rank(power)
            if d == dims[-1]:
                raise EigenvalueOutsideField(f"generalized eigenspace of {zeta} stalled at {d} < {mult}")
            dims.append(d)
            if dims[-1] < mult:
                power = power @ shifted
        top = len(dims) - 1
        for k in range(1, top + 1):
            at_least_k = dims[k] - dims[k - 1]
            at_least_next = dims[k + 1] - dims[k] if k < top else 0
            if at_least_k - at_least_next:
                found.append((zeta, k, at_least_k - at_least_next))
        accounted += mult
    if accounted != n:
        raise EigenvalueOutsideField(
            f"roots of unity of orders {list(eigenvalue_orders)} in {field} account for {accounted} of {n} dimensions"
        )
    return JordanData.from_blocks(n, found)


# -- quotients and conjugacy ----------------------------------------------------------------


def _quotient_residual(images: ExactMatrix, S: Subspace) -> ExactMatrix:
    """Coordinates on the complement of S of the columns of `images`, reduced modulo S."""
    C = S.complement()
    if not S.pivots:
        return images
    basis_c = S.basis.submatrix(range(S.dim), C)
    top = images.submatrix(C, range(images.cols))
    at_pivots = images.submatrix(S.pivots, range(images.cols))
    return top - basis_c.transpose() @ at_pivots


def induced_quotient_action(mats, S: Subspace) -> list[ExactMatrix]:
    """Actions induced on ambient/S in the coordinates of the non-pivot columns of S."""
    C = S.complement()
    out = []
    for idx, M in enumerate(mats):
        if not S.is_invariant_under(M):
            raise NotInvariant(f"matrix {idx + 1} does not preserve the subspace")
        cols = M.submatrix(range(M.rows), C)
        out.append(_quotient_residual(cols, S))
    return out


def _conjugacy_system(A, B) -> ExactMatrix:
    field = A[0].field
    n = A[0].rows
    zero = field.zero_raw
    rows = []
    for a, b in zip(A, B):
        ad, bd = a.data, b.data
        for i in range(n):
            for c in range(n):
                row = [zero] * (n * n)
                # (X a)[i][c] = sum_j X[i][j] a[j][c]
                for j in range(n):
                    if _nonzero(ad[j][c]):
                        row[i * n + j] = ad[j][c]
                # (b X)[i][c] = sum_j b[i][j] X[j][c]
                for j in range(n):
                    if _nonzero(bd[i][j]):
                        row[j * n + c] = field.sub(row[j * n + c], bd[i][j])
                rows.append(row)
    return ExactMatrix(field, len(rows), n * n, rows)


def _as_square(field, vector, n) -> ExactMatrix:
    return ExactMatrix(field, n, n, [list(vector[i * n:(i + 1) * n]) for i in range(n)])


def _axpy(field, x, c, v) -> list:
    """x + c*v for raw vectors."""
    if not _nonzero(c):
        return list(x)
    return [field.add(a, field.mul(c, b)) if _nonzero(b) else a for a, b in zip(x, v)]


def _combine(field, vectors, coeffs) -> list:
    out = [field.zero_raw] * len(vectors[0])
    for c, v in zip(coeffs, vectors):
        out = _axpy(field, out, c, v)
    return out


def _sample_values(field, count: int) -> list:
    """`count` distinct raw scalars starting at 0, or every element of a smaller finite field."""
    if field.is_finite:
        return [field.from_int(value) for value in range(min(field.size, count))]
    return [field.scalar_raw(t) for t in range(count)]


def _greedy_max_rank(field, vectors, n: int) -> list:
    """Walks the basis adding c*v with c among n + 1 values, keeping the first rank-maximizing c."""
    values = _sample_values(field, n + 1)
    X = [field.zero_raw] * (n * n)
    current = 0
    for v in vectors:
        if current == n:
            break
        best, best_rank = X, current
        for c in values[1:]:
            candidate = _axpy(field, X, c, v)
            r = rank(_as_square(field, candidate, n))
            if r > best_rank:
                best, best_rank = candidate, r
                if r == n:
                    break
        X, current = best, best_rank
    return X


def _random_coefficients(field, rng: random.Random, d: int) -> list:
    if field.is_finite:
        return [field.from_int(rng.randrange(field.size)) for _ in range(d)]
    return [field.scalar_raw(rng.randint(-_RANDOM_SPAN, _RANDOM_SPAN)) for _ in range(d)]


def simultaneous_conjugacy(A, B, enumeration_cap: int | None = None) -> ExactMatrix | None:
    """An invertible X with X A_i X^-1 = B_i for every i, or None if none exists.

    The search walks the solution space: basis vectors, a greedy rank-maximizing combination,
    then seeded random combinations. Over Q and Q(zeta_N) a determinant that vanishes at all of
    those points is taken as identically zero. Over a finite field the space is enumerated when
    it fits `enumeration_cap`; otherwise ConjugacyUndecided is raised.
    """
    A, B = list(A), list(B)
    if len(A) != len(B):
        raise ValueError("tuples of different length")
    if not A:
        return None
    field = A[0].field
    n = A[0].rows
    if any(m.shape != (n, n) for m in A + B):
        return None
    sol = kernel(_conjugacy_system(A, B))
    if sol.dim == 0:
        return None
    vectors = sol.basis.data
    d = len(vectors)

    def accept(vec):
        X = _as_square(field, vec, n)
        if rank(X) < n:
            return None
        if any(X @ a != b @ X for a, b in zip(A, B)):
            raise AssertionError("conjugacy witness fails its defining equations")
        return X

    for v in vectors:
        X = accept(v)
        if X is not None:
            return X
    if d == 1:
        return None

    X = accept(_greedy_max_rank(field, vectors, n))
    if X is not None:
        return X
    rng = random.Random(_RANDOM_SEED)
    for _ in range(_RANDOM_TRIES):
        X = accept(_combine(field, vectors, _random_coefficients(field, rng, d)))
        if X is not None:
            return X

    if not field.is_finite:
        logger.debug(f"Solution space of dimension {d} has no invertible point at {_RANDOM_TRIES} random samples")
        return None
    cap = enumeration_cap if enumeration_cap is not None else get_settings().enumeration_cap
    if field.size**d > cap:
        logger.warning(f"⚠️ No invertible element found in a {d}-dimensional solution space over {field}")
        raise ConjugacyUndecided(f"{field.size}^{d} candidates exceed the enumeration cap {cap}", d)
    elements = [x.coeffs for x in field.elements()]
    for coeffs in product(elements, repeat=d):
        if not any(_nonzero(c) for c in coeffs):
            continue
        X = accept(_combine(field, vectors, coeffs))
        if X is not None:
            return X
    return None


# -- incremental echelon bases over row batches ----------------------------------------------


class EchelonBasis:
    """A reduced row echelon basis grown batch by batch.

    Batches are ExactMatrix values whose rows are vectors of the ambient space. `extend`
    returns the rows that enlarged the span, reduced against the previous basis, so callers
    can spin only the new directions.
    """

    def __init__(self, field: FieldHandle, dim: int):
        self.field = field
        self.dim = dim
        self.basis = ExactMatrix(field, 0, dim, [])
        self.pivots: list[int] = []

    @property
    def rank(self) -> int:
        return len(self.pivots)

    def _reduce(self, batch: ExactMatrix) -> ExactMatrix:
        if not self.pivots:
            return batch
        if self._vectorized(batch):
            arr = batch.galois()
            return ExactMatrix.from_galois(self.field, arr - arr[:, self.pivots] @ self.basis.galois())
        return batch - batch.submatrix(range(batch.rows), self.pivots) @ self.basis

    def _vectorized(self, batch: ExactMatrix) -> bool:
        return self.field.is_finite and (batch._gf is not None or self.basis._gf is not None)

    def extend(self, batch: ExactMatrix) -> ExactMatrix:
        if batch.rows == 0:
            return batch
        reduced = self._reduce(batch)
        R, r, new_pivots = rref(reduced)
        if r == 0:
            return ExactMatrix(self.field, 0, self.dim, [])
        fresh = _leading_rows(R, r)
        if not self.pivots:
            cleared = self.basis
        elif self._vectorized(fresh):
            B = self.basis.galois()
            cleared = ExactMatrix.from_galois(self.field, B - B[:, new_pivots] @ fresh.galois())
        else:
            cleared = self.basis - self.basis.submatrix(range(self.rank), new_pivots) @ fresh
        order = sorted(range(self.rank + r), key=lambda i: (self.pivots + new_pivots)[i])
        stacked = _stack(self.field, [cleared, fresh], self.dim)
        self.basis = _select_rows(stacked, order)
        self.pivots = sorted(self.pivots + new_pivots)
        return fresh

    def to_subspace(self) -> Subspace:
        return Subspace(self.dim, self.basis, tuple(self.pivots))


def _leading_rows(M: ExactMatrix, r: int) -> ExactMatrix:
    return _select_rows(M, range(r))


def _select_rows(M: ExactMatrix, rows) -> ExactMatrix:
    rows = list(rows)
    if M._gf is not None:
        return ExactMatrix.from_galois(M.field, M._gf[rows, :] if rows else galois_field(M.field).Zeros((0, M.cols)))
    return ExactMatrix(M.field, len(rows), M.cols, [list(M.data[i]) for i in rows])


def _stack(field: FieldHandle, mats, cols: int) -> ExactMatrix:
    mats = [m for m in mats if m.rows]
    if not mats:
        return ExactMatrix(field, 0, cols, [])
    if field.is_finite and any(m._gf is not None for m in mats):
        gf = galois_field(field)
        return ExactMatrix.from_galois(field, gf(np.vstack([m.galois().view(np.ndarray) for m in mats])))
    return ExactMatrix(field, sum(m.rows for m in mats), cols, [list(r) for m in mats for r in m.data])


def stack_rows(field: FieldHandle, mats, cols: int) -> ExactMatrix:
    return _stack(field, mats, cols)


def left_multiply_batch(G: ExactMatrix, batch: ExactMatrix) -> ExactMatrix:
    """Rows of `batch` read as row-major n x n matrices X; returns the rows vec(G X)."""
    n = G.rows
    b = batch.rows
    field = G.field
    if b == 0:
        return batch
    if field.is_finite:
        arr = batch.galois().reshape(b, n, n).transpose(1, 0, 2).reshape(n, b * n)
        out = (G.galois() @ arr).reshape(n, b, n).transpose(1, 0, 2).reshape(b, n * n)
        return ExactMatrix.from_galois(field, out)
    rows = []
    for vec in batch.data:
        X = _as_square(field, vec, n)
        rows.append((G @ X).vectorize())
    return ExactMatrix(field, b, n * n, rows)


def right_multiply_batch(batch: ExactMatrix, G: ExactMatrix) -> ExactMatrix:
    """Rows of `batch` read as row-major n x n matrices X; returns the rows vec(X G)."""
    n = G.rows
    b = batch.rows
    field = G.field
    if b == 0:
        return batch
    if field.is_finite:
        arr = batch.galois().reshape(b * n, n)
        return ExactMatrix.from_galois(field, (arr @ G.galois()).reshape(b, n * n))
    rows = []
    for vec in batch.data:
        X = _as_square(field, vec, n)
        rows.append((X @ G).vectorize())
    return ExactMatrix(field, b, n * n, rows)


def left_kernel(M: ExactMatrix) -> ExactMatrix:
    """Rows c (as a matrix) spanning {c : c M = 0}."""
    sub = kernel(M.transpose())
    return sub.basis
