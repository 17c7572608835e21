from __future__ import annotations

import json
from dataclasses import dataclass
from math import gcd, lcm

import pandas as pd

from src.core.errors import (
    ArityMismatch,
    ConditionAViolated,
    FieldMismatch,
    InvalidM,
    InvalidRankOnePattern,
    ParseError,
    ProductRelationViolated,
    SingularEntry,
)
from src.core.fields import (
    RATIONAL,
    FieldElement,
    FieldEmbedding,
    FieldHandle,
    field_from_descriptor,
    make_cyclotomic_field,
    root_of_unity,
)
from src.core.linalg import ExactMatrix, JordanData, determinant, inverse, jordan_data, rank
from src.utils.logger import get_logger

logger = get_logger(__name__)

RANK_ONE_PATTERNS = {
    "N1": (-2, 0),
    "N2": (-1, 1),
    "N3": (-3, -2),
    "N4": (-1, 1),
    "N5": (-3, 0),
    "L5": (0, 1),
}


@dataclass(frozen=True, eq=False)
class MonodromyTuple:
    """r finite entries followed by the entry at infinity."""

    field: FieldHandle
    n: int
    r: int
    entries: tuple[ExactMatrix, ...]
    labels: tuple[str, ...] | None = None

    @classmethod
    def from_matrices(cls, matrices, labels=None) -> MonodromyTuple:
        matrices = tuple(matrices)
        if len(matrices) < 2:
            raise ArityMismatch("a tuple needs at least one finite entry and the entry at infinity")
        first = matrices[0]
        return cls(first.field, first.rows, len(matrices) - 1, matrices, tuple(labels) if labels else None)

    def entry(self, i: int) -> ExactMatrix:
        """1-based access; index r+1 is the point at infinity."""
        return self.entries[i - 1]

    @property
    def finite_entries(self) -> tuple[ExactMatrix, ...]:
        return self.entries[: self.r]

    @property
    def infinity(self) -> ExactMatrix:
        return self.entries[self.r]

    def product(self) -> ExactMatrix:
        acc = self.entries[0]
        for m in self.entries[1:]:
            acc = acc @ m
        return acc

    def __eq__(self, other) -> bool:
        if not isinstance(other, MonodromyTuple):
            return NotImplemented
        return (self.field, self.n, self.r) == (other.field, other.n, other.r) and self.entries == other.entries

    def __hash__(self) -> int:
        return hash((self.field, self.n, self.r))

    def to_json(self) -> dict:
        return {
            "field": self.field.descriptor(),
            "n": self.n,
            "r": self.r,
            "entries": [m.to_json() for m in self.entries],
            "labels": list(self.labels) if self.labels else [],
        }


@dataclass(frozen=True)
class RankOneTuple:
    field: FieldHandle
    r: int
    scalars: tuple[FieldElement, ...]

    def to_json(self) -> dict:
        return {"field": self.field.descriptor(), "r": self.r, "scalars": [s.to_json() for s in self.scalars]}


@dataclass(frozen=True)
class EntryRecord:
    index: int
    determinant: FieldElement
    order: int | None
    rank_minus_one: int
    rank_plus_one: int
    is_scalar: bool = False

    @property
    def is_reflection(self) -> bool:
        return self.rank_minus_one == 1

    @property
    def is_bireflection(self) -> bool:
        return self.rank_minus_one == 2

    @property
    def is_negated_reflection(self) -> bool:
        return self.rank_plus_one == 1

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "determinant": self.determinant.to_json(),
            "order": self.order if self.order is not None else "exceeds bound",
            "rank_minus_one": self.rank_minus_one,
            "rank_plus_one": self.rank_plus_one,
            "is_reflection": self.is_reflection,
            "is_bireflection": self.is_bireflection,
            "is_negated_reflection": self.is_negated_reflection,
            "is_scalar": self.is_scalar,
        }


@dataclass(frozen=True)
class EntryCensus:
    records: tuple[EntryRecord, ...]

    def __getitem__(self, index: int) -> EntryRecord:
        return self.records[index - 1]

    def to_json(self) -> list:
        return [r.to_json() for r in self.records]

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for rec in self.records:
            row = rec.to_json()
            row["determinant"] = json.dumps(row["determinant"])
            rows.append(row)
        return pd.DataFrame(rows)


def validate(T: MonodromyTuple) -> None:
    if len(T.entries) != T.r + 1:
        raise ArityMismatch(f"expected {T.r + 1} entries, got {len(T.entries)}")
    for i, m in enumerate(T.entries, start=1):
        if m.field != T.field:
            raise FieldMismatch(f"entry {i} lives over {m.field}, tuple over {T.field}")
        if m.shape != (T.n, T.n):
            raise ArityMismatch(f"entry {i} has shape {m.shape}, expected {(T.n, T.n)}")
        if determinant(m).is_zero():
            raise SingularEntry(i)
    prod = T.product()
    if not prod.is_identity():
        raise ProductRelationViolated(
            "product of the entries is not the identity", prod - ExactMatrix.identity(T.field, T.n)
        )


def unit_representatives(m: int) -> list[int]:
    return [d for d in range(1, m) if gcd(d, m) == 1]


def seed_eigenvalues(m: int, r: int, field: FieldHandle) -> list[FieldElement]:
    """lambda_1..lambda_{r-3}: two ascending passes through the units mod m, then -1."""
    reps = unit_representatives(m)
    values = [root_of_unity(field, m, d) for d in reps + reps]
    while len(values) < r - 3:
        values.append(-field.one)
    return values[: r - 3]


def construct_T(m: int, r: int) -> MonodromyTuple:
    if m <= 2:
        raise InvalidM(f"m must exceed 2, got {m}")
    phi = len(unit_representatives(m))
    if not 2 * phi < r - 4:
        raise ConditionAViolated(f"2*phi({m}) = {2 * phi} is not < r - 4 = {r - 4}")
    field = make_cyclotomic_field(lcm(4, m, 2))
    lambdas = seed_eigenvalues(m, r, field)
    entries = [ExactMatrix.diagonal(field, [lam, lam.inverse()]) for lam in lambdas]
    entries.append(ExactMatrix.diagonal(field, [1, -1]))
    entries.append(ExactMatrix.from_values(field, [[0, 1], [1, 0]]))
    partial = entries[0]
    for e in entries[1:]:
        partial = partial @ e
    entries.append(-inverse(partial))
    entries.append(ExactMatrix.scalar(field, 2, -1))
    T = MonodromyTuple(field, 2, r, tuple(entries))
    validate(T)
    logger.info(f"🧱 Constructed T_{{{m},{r}}} over {field}")
    return T


def rank_one_signs(pattern: str, r: int) -> list[int]:
    if pattern not in RANK_ONE_PATTERNS:
        raise InvalidRankOnePattern(f"unknown pattern {pattern!r}")
    if r < 6:
        raise InvalidRankOnePattern(f"pattern {pattern} needs r >= 6, got {r}")
    signs = [1] * (r + 1)
    for offset in RANK_ONE_PATTERNS[pattern]:
        signs[r + offset - 1] = -1
    return signs


def construct_rank_one(pattern, r: int, field: FieldHandle) -> RankOneTuple:
    if isinstance(pattern, str):
        values = rank_one_signs(pattern, r)
    else:
        values = list(pattern)
        if len(values) != r + 1:
            raise ArityMismatch(f"explicit rank-one vector has {len(values)} entries, expected {r + 1}")
    scalars = tuple(field.element(v) for v in values)
    if any(s.is_zero() for s in scalars):
        raise SingularEntry(next(i for i, s in enumerate(scalars, start=1) if s.is_zero()))
    prod = field.one
    for s in scalars:
        prod = prod * s
    if not prod.is_one():
        raise ProductRelationViolated(f"rank-one product is {prod.to_json()}, not 1")
    return RankOneTuple(field, r, scalars)


def tensor_rank_one(T: MonodromyTuple, c: RankOneTuple) -> MonodromyTuple:
    if c.r != T.r:
        raise ArityMismatch(f"twist has r = {c.r}, tuple has r = {T.r}")
    if c.field == T.field:
        scalars = [s.coeffs for s in c.scalars]
    elif c.field.kind == RATIONAL:
        scalars = [T.field.scalar_raw(s.coeffs[0]) for s in c.scalars]
    else:
        raise FieldMismatch(f"cannot twist a tuple over {T.field} by scalars over {c.field}")
    entries = tuple(m.scale(FieldElement(T.field, s)) for m, s in zip(T.entries, scalars))
    out = MonodromyTuple(T.field, T.n, T.r, entries, T.labels)
    if not out.product().is_identity():
        raise ProductRelationViolated("twisted tuple lost the product relation")
    return out


def direct_sum(T1: MonodromyTuple, T2: MonodromyTuple) -> MonodromyTuple:
    if T1.r != T2.r:
        raise ArityMismatch(f"cannot add tuples with r = {T1.r} and r = {T2.r}")
    if T1.field != T2.field:
        raise FieldMismatch(f"direct sum over {T1.field} and {T2.field}")
    n = T1.n + T2.n
    entries = []
    for a, b in zip(T1.entries, T2.entries):
        m = ExactMatrix.zeros(T1.field, n, n)
        for i in range(a.rows):
            m.data[i][: a.cols] = list(a.data[i])
        for i in range(b.rows):
            m.data[a.rows + i][a.cols:] = list(b.data[i])
        entries.append(m)
    return MonodromyTuple(T1.field, n, T1.r, tuple(entries))


def _order(m: ExactMatrix, bound: int) -> int | None:
    acc = m
    for e in range(1, bound + 1):
        if acc.is_identity():
            return e
        acc = acc @ m
    return None


def entry_census(T: MonodromyTuple, order_bound: int) -> EntryCensus:
    records = []
    for i, m in enumerate(T.entries, start=1):
        records.append(
            EntryRecord(
                index=i,
                determinant=determinant(m),
                order=_order(m, order_bound),
                rank_minus_one=rank(m.minus_scalar(1)),
                rank_plus_one=rank(m.minus_scalar(-1)),
                is_scalar=m.scalar_value() is not None,
            )
        )
    return EntryCensus(tuple(records))


def entry_jordan_data(T: MonodromyTuple, eigenvalue_orders) -> list[JordanData]:
    return [jordan_data(m, eigenvalue_orders) for m in T.entries]


def local_selfdual_check(T: MonodromyTuple, eigenvalue_orders) -> list[bool]:
    return [jd.is_selfdual() for jd in entry_jordan_data(T, eigenvalue_orders)]


def normalize_infinity(T: MonodromyTuple) -> MonodromyTuple:
    """Twists by L5 when the local monodromy at infinity is trivial."""
    if not T.infinity.is_identity():
        return T
    logger.info("Trivial monodromy at infinity, twisting by L5")
    return tensor_rank_one(T, construct_rank_one("L5", T.r, T.field))


def change_field(T: MonodromyTuple, embedding: FieldEmbedding, direction: str = "extend") -> MonodromyTuple:
    if direction == "extend":
        if T.field != embedding.source:
            raise FieldMismatch(f"tuple over {T.field}, embedding from {embedding.source}")
        target, fn = embedding.target, embedding.image_raw
    elif direction == "descend":
        if T.field != embedding.target:
            raise FieldMismatch(f"tuple over {T.field}, embedding into {embedding.target}")
        target, fn = embedding.source, embedding.preimage_raw
    else:
        raise ValueError(f"unknown direction {direction!r}")
    entries = tuple(m.map_entries(target, fn) for m in T.entries)
    return MonodromyTuple(target, T.n, T.r, entries, T.labels)


# -- JSON documents -------------------------------------------------------------------------


def serialize(T: MonodromyTuple) -> bytes:
    return json.dumps(T.to_json(), indent=2).encode("utf-8")


def _load(data) -> dict:
    if isinstance(data, (bytes, bytearray)):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ParseError(f"document is not valid UTF-8: byte {e.start}", "$")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e.msg} at line {e.lineno} column {e.colno}", "$")
    if not isinstance(doc, dict):
        raise ParseError("document must be a JSON object", "$")
    return doc


def tuple_from_json(doc: dict) -> MonodromyTuple:
    for key in ("field", "n", "r", "entries"):
        if key not in doc:
            raise ParseError(f"missing key {key!r}", "$")
    field = field_from_descriptor(doc["field"], "$.field")
    n, r, entries = doc["n"], doc["r"], doc["entries"]
    if not isinstance(n, int) or not isinstance(r, int) or n < 1 or r < 1:
        raise ParseError("n and r must be positive integers", "$")
    if not isinstance(entries, list) or len(entries) != r + 1:
        raise ParseError(f"expected {r + 1} entries", "$.entries")
    mats = []
    for i, e in enumerate(entries):
        m = ExactMatrix.from_json(e, f"$.entries[{i}]", field)
        if m.shape != (n, n):
            raise ParseError(f"entry has shape {m.shape}, expected {(n, n)}", f"$.entries[{i}]")
        mats.append(m)
    labels = doc.get("labels") or None
    if labels is not None and (not isinstance(labels, list) or not all(isinstance(x, str) for x in labels)):
        raise ParseError("labels must be a list of strings", "$.labels")
    return MonodromyTuple(field, n, r, tuple(mats), tuple(labels) if labels else None)


def deserialize(data) -> MonodromyTuple:
    return tuple_from_json(_load(data))


def serialize_rank_one(c: RankOneTuple) -> bytes:
    return json.dumps(c.to_json(), indent=2).encode("utf-8")


def deserialize_rank_one(data) -> RankOneTuple:
    doc = _load(data)
    for key in ("field", "r", "scalars"):
        if key not in doc:
            raise ParseError(f"missing key {key!r}", "$")
    field = field_from_descriptor(doc["field"], "$.field")
    r, scalars = doc["r"], doc["scalars"]
    if not isinstance(r, int) or not isinstance(scalars, list) or len(scalars) != r + 1:
        raise ParseError(f"expected r and {r!r}+1 scalars", "$.scalars")
    values = tuple(
        FieldElement(field, field.decode_raw(s, f"$.scalars[{i}]")) for i, s in enumerate(scalars)
    )
    return RankOneTuple(field, r, values)


def is_rank_one_document(data) -> bool:
    return "scalars" in _load(data)
