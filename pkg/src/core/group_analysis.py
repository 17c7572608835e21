from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from math import gcd, lcm

from sympy.ntheory import divisors

from src.core.errors import (
    BadReductionPrime,
    EigenvalueOutsideField,
    FieldMismatch,
    MonodromyError,
    NotInvariant,
    SingularEntry,
)
from src.core.fields import (
    FieldElement,
    ResidueMap,
    find_embedding,
    galois_field,
    make_finite_field,
    root_of_unity,
)
from src.core.linalg import (
    EchelonBasis,
    ExactMatrix,
    Subspace,
    determinant,
    left_kernel,
    left_multiply_batch,
    rank,
    right_multiply_batch,
    stack_rows,
)
from src.core.tuples import MonodromyTuple, change_field, local_selfdual_check, validate
from src.utils.logger import get_logger

logger = get_logger(__name__)

SL = "sl"
SL_PLUS_MINUS = "slpm"
ASSUMED_EXTERNAL = ("primitivity: DR99 Prop 6.6",)


def reduce_tuple(T: MonodromyTuple, rmap: ResidueMap) -> MonodromyTuple:
    if T.field != rmap.source:
        raise FieldMismatch(f"tuple over {T.field}, residue map from {rmap.source}")
    entries = tuple(m.map_entries(rmap.target, rmap.apply_raw) for m in T.entries)
    out = MonodromyTuple(rmap.target, T.n, T.r, entries, T.labels)
    try:
        validate(out)
    except SingularEntry as e:
        raise BadReductionPrime(f"entry {e.index} becomes singular modulo {rmap.ell}")
    logger.info(f"Reduced rank-{T.n} tuple to {rmap.target}")
    return out


def burnside_dimension(gens) -> int:
    """Dimension of the matrix algebra spanned by all words in the generators."""
    gens = list(gens)
    fld = gens[0].field
    n = gens[0].rows
    target = n * n
    basis = EchelonBasis(fld, target)
    frontier = basis.extend(ExactMatrix(fld, 1, target, [ExactMatrix.identity(fld, n).vectorize()]))
    while frontier.rows and basis.rank < target:
        fresh = []
        for G in gens:
            fresh.append(basis.extend(left_multiply_batch(G, frontier)))
            if basis.rank == target:
                break
        frontier = stack_rows(fld, fresh, target)
    return basis.rank


def _classify(G: ExactMatrix) -> str:
    Gt = G.transpose()
    if Gt == G:
        return "symmetric"
    if Gt == -G:
        return "alternating"
    return "neither"


@dataclass(frozen=True, eq=False)
class FormSpace:
    basis: tuple[ExactMatrix, ...]
    classification: tuple[str, ...]
    gens: tuple[ExactMatrix, ...] = field(default=(), repr=False)

    def __post_init__(self):
        for G in self.basis:
            for T in self.gens:
                if T.transpose() @ G @ T != G:
                    raise NotInvariant("form space element is not preserved by a generator")

    @property
    def dim(self) -> int:
        return len(self.basis)

    def to_json(self) -> dict:
        return {"dim": self.dim, "classification": list(self.classification)}


def invariant_bilinear_forms(gens) -> FormSpace:
    """Canonical basis of {G : T^t G T = G for every generator T}."""
    gens = tuple(gens)
    fld = gens[0].field
    n = gens[0].rows
    dim = n * n
    if fld.is_finite:
        current = ExactMatrix.from_galois(fld, galois_field(fld).Identity(dim))
    else:
        current = ExactMatrix.identity(fld, dim)
    for T in gens:
        if current.rows == 0:
            break
        images = left_multiply_batch(T.transpose(), right_multiply_batch(current, T)) - current
        coeffs = left_kernel(images)
        current = coeffs @ current if coeffs.rows else ExactMatrix(fld, 0, dim, [])
    space = Subspace.span(fld, dim, current) if current.rows else Subspace.zero(fld, dim)
    basis = tuple(
        ExactMatrix(fld, n, n, [list(vec[i * n:(i + 1) * n]) for i in range(n)]) for vec in space.basis.data
    )
    return FormSpace(basis, tuple(_classify(G) for G in basis), gens)


def _extension_degree(q: int, ell: int) -> int:
    k, size = 0, 1
    while size < q:
        size *= ell
        k += 1
    if size != q:
        raise ValueError(f"{q} is not a power of {ell}")
    return k


def subfield_minimality(eigenvalue: FieldElement, q: int) -> int:
    """Smallest subfield order q' of F_q for which {z^q', z^-q'} = {z, z^-1}."""
    if eigenvalue.is_zero():
        raise ZeroDivisionError("eigenvalue must be nonzero")
    ell = eigenvalue.owner.ell
    k = _extension_degree(q, ell)
    pair = {eigenvalue, eigenvalue.inverse()}
    for d in divisors(k):
        qq = ell**d
        if {eigenvalue**qq, eigenvalue ** (-qq)} == pair:
            return qq
    return q


def _find_bireflection(T: MonodromyTuple, q: int):
    n = T.n
    fld = T.field
    if (fld.size - 1) % (q - 1):
        return None
    roots = [root_of_unity(fld, q - 1, e) for e in range(1, q) if gcd(e, q - 1) == 1]
    for i, m in enumerate(T.entries, start=1):
        if rank(m.minus_scalar(1)) != 2:
            continue
        for zeta in roots:
            inv = zeta.inverse()
            if zeta == inv:
                continue
            if rank(m.minus_scalar(zeta)) == n - 1 and rank(m.minus_scalar(inv)) == n - 1:
                return i, zeta
    return None


def _selfdual_flags(T: MonodromyTuple, orders) -> tuple[list[bool], str]:
    try:
        return local_selfdual_check(T, orders), str(T.field)
    except EigenvalueOutsideField:
        ext = make_finite_field(T.field.ell, 2 * T.field.k)
        lifted = change_field(T, find_embedding(T.field, ext), "extend")
        return local_selfdual_check(lifted, orders), str(ext)


@dataclass
class Certificate:
    n: int
    q: int
    mode: str
    checks: dict = field(default_factory=dict)
    informational: dict = field(default_factory=dict)
    assumed_external: tuple[str, ...] = ASSUMED_EXTERNAL

    def record(self, name: str, passed: bool, evidence) -> None:
        self.checks[name] = {"pass": bool(passed), "evidence": evidence}
        if not passed:
            logger.warning(f"⚠️ Certificate check {name} failed: {evidence}")
        else:
            logger.debug(f"Certificate check {name} passed: {evidence}")

    @property
    def verdict(self) -> bool:
        return bool(self.checks) and all(c["pass"] for c in self.checks.values())

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "q": self.q,
            "mode": self.mode,
            "checks": self.checks,
            "informational": self.informational,
            "assumed_external": list(self.assumed_external),
            "verdict": self.verdict,
        }


def sl_certificate(T: MonodromyTuple, mode: str = SL, eigenvalue_orders=None, seed: MonodromyTuple | None = None) -> Certificate:
    if mode not in (SL, SL_PLUS_MINUS):
        raise ValueError(f"unknown certificate mode {mode!r}")
    fld = T.field
    if not fld.is_finite:
        raise FieldMismatch(f"certificates are computed over finite fields, got {fld}")
    q = fld.size
    cert = Certificate(T.n, q, mode)
    logger.info(f"🔎 Certifying rank-{T.n} tuple over {fld} in mode {mode}")

    try:
        validate(T)
        cert.record("product_relation", True, "entries multiply to the identity")
    except MonodromyError as e:
        cert.record("product_relation", False, str(e))

    dets = [determinant(m) for m in T.entries]
    spectrum = [json.loads(s) for s in sorted({d.sort_key() for d in dets})]
    one, minus_one = fld.one, -fld.one
    if mode == SL:
        ok = all(d == one for d in dets)
    else:
        ok = all(d in (one, minus_one) for d in dets) and one in dets and minus_one in dets
    cert.record(
        "determinant_spectrum",
        ok,
        {"spectrum": spectrum, "minus_one_at": [i for i, d in enumerate(dets, start=1) if d == minus_one]},
    )

    dim = burnside_dimension(T.entries)
    cert.record("absolutely_irreducible", dim == T.n * T.n, {"dimension": dim, "target": T.n * T.n})

    forms = invariant_bilinear_forms(T.entries)
    cert.record("no_invariant_bilinear_form", forms.dim == 0, forms.to_json())

    found = _find_bireflection(T, q)
    cert.record(
        "has_bireflection",
        found is not None,
        {"index": found[0], "eigenvalue": found[1].to_json()} if found else {"index": None},
    )

    witness = None
    for i, m in enumerate(T.entries, start=1):
        if rank(m.minus_scalar(-1)) == 1:
            witness = {"index": i, "kind": "negated_reflection"}
            break
    if witness is None and mode == SL_PLUS_MINUS:
        for i, (m, d) in enumerate(zip(T.entries, dets), start=1):
            if d == minus_one and rank(m.minus_scalar(1)) == 1:
                witness = {"index": i, "kind": "reflection"}
                break
    cert.record("has_negated_reflection", witness is not None, witness or {"index": None})

    if found is not None:
        qq = subfield_minimality(found[1], q)
        cert.record("bireflection_subfield_minimal", qq == q, {"q_prime": qq})
    else:
        cert.record("bireflection_subfield_minimal", False, {"q_prime": None})

    orders = eigenvalue_orders or [lcm(4, q - 1)]
    try:
        flags, where = _selfdual_flags(T, orders)
        cert.record("local_selfdual", all(flags), {"per_entry": flags, "field": where})
    except EigenvalueOutsideField as e:
        cert.record("local_selfdual", False, str(e))

    cert.record("infinity_scalar", T.infinity.scalar_value() is not None, {"index": T.r + 1})

    if seed is not None:
        seed_forms = invariant_bilinear_forms(seed.entries)
        cert.informational["seed_forms"] = seed_forms.to_json()
    logger.info(f"{'✅' if cert.verdict else '❌'} Certificate verdict: {cert.verdict}")
    return cert


def enumerate_group(gens, bound: int) -> int | None:
    """Order of the generated group by breadth-first closure, or None beyond `bound`."""
    gens = list(gens)
    identity = ExactMatrix.identity(gens[0].field, gens[0].rows)
    seen = {identity.key()}
    queue = deque([identity])
    while queue:
        g = queue.popleft()
        for s in gens:
            h = g @ s
            key = h.key()
            if key not in seen:
                seen.add(key)
                if len(seen) > bound:
                    return None
                queue.append(h)
    return len(seen)


def _projective_points(fld, n: int):
    elements = [x.coeffs for x in fld.elements()]
    zero, one = fld.zero_raw, fld.one_raw
    for lead in range(n):
        for tail in range(fld.size ** (n - lead - 1)):
            v = [zero] * lead + [one]
            rest = tail
            for _ in range(n - lead - 1):
                rest, digit = divmod(rest, fld.size)
                v.append(elements[digit])
            yield v


def has_invariant_subspace_exhaustive(gens, extension_degree: int = 1) -> bool:
    """Searches every line for a proper cyclic submodule, optionally over F_{q^e}."""
    gens = list(gens)
    fld = gens[0].field
    n = gens[0].rows
    if extension_degree > 1:
        ext = make_finite_field(fld.ell, fld.k * extension_degree)
        emb = find_embedding(fld, ext)
        gens = [m.map_entries(ext, emb.image_raw) for m in gens]
        fld = ext
    transposed = [G.transpose() for G in gens]
    for v in _projective_points(fld, n):
        span = EchelonBasis(fld, n)
        frontier = span.extend(ExactMatrix(fld, 1, n, [v]))
        while frontier.rows and span.rank < n:
            frontier = stack_rows(fld, [span.extend(frontier @ Gt) for Gt in transposed], n)
        if span.rank < n:
            return True
    return False
