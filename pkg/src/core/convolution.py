"""Matrix-tuple middle convolution MC_lambda.

For a tuple (A_1, ..., A_r; A_inf) of n x n matrices the ambient space is F^(rn). The k-th
ambient matrix B_k is the identity except for its k-th block row

    (lam(A_1 - 1), ..., lam(A_{k-1} - 1), lam A_k, A_{k+1} - 1, ..., A_r - 1).

K is the direct sum of the fixed spaces ker(A_k - 1) placed in block k, and L is the common
fixed space of the B_k. A vector lies in L exactly when it has the form
(P_2 v, ..., P_r v, v) with P_j = A_j ... A_r and v in ker(lam A_1 ... A_r - 1).
The convolution is the action induced on F^(rn) / (K + L).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

from src.core.errors import ConjugacyUndecided, InvalidCharacter, MonodromyError, NotInvariant, TooFewPoints
from src.core.fields import FieldElement, ResidueMap, apply_residue
from src.core.group_analysis import reduce_tuple
from src.core.linalg import (
    ExactMatrix,
    Subspace,
    induced_quotient_action,
    inverse,
    kernel,
    rank,
    simultaneous_conjugacy,
    stack_rows,
)
from src.core.tuples import MonodromyTuple, validate
from src.utils.config import get_settings
from src.utils.logger import get_logger

logger = get_logger(__name__)

BRUTE_FORCE_MAX_AMBIENT = 64


@dataclass(frozen=True, eq=False)
class ConvolutionWorkspace:
    lam: FieldElement
    source: MonodromyTuple
    ambient: tuple[ExactMatrix, ...]
    K: Subspace
    L: Subspace

    @property
    def ambient_dim(self) -> int:
        return self.source.r * self.source.n

    @cached_property
    def quotient_space(self) -> Subspace:
        return self.K + self.L


def _character(T: MonodromyTuple, lam) -> FieldElement:
    lam = T.field.element(lam)
    if lam.is_zero() or lam.is_one():
        raise InvalidCharacter(f"lambda must differ from 0 and 1, got {lam.to_json()}")
    return lam


def _ambient_matrices(T: MonodromyTuple, lam: FieldElement) -> list[ExactMatrix]:
    f = T.field
    n, r = T.n, T.r
    shifted = [A.minus_scalar(1) for A in T.finite_entries]
    left = [S.scale(lam) for S in shifted]
    diagonal = [A.scale(lam) for A in T.finite_entries]
    out = []
    for k in range(r):
        blocks = left[:k] + [diagonal[k]] + shifted[k + 1:]
        M = ExactMatrix.identity(f, r * n)
        for i in range(n):
            M.data[k * n + i] = [x for b in blocks for x in b.data[i]]
        out.append(M)
    return out


def _fixed_space_K(T: MonodromyTuple) -> Subspace:
    f = T.field
    n, r = T.n, T.r
    vectors = []
    for k, A in enumerate(T.finite_entries):
        for v in kernel(A.minus_scalar(1)).basis.data:
            full = [f.zero_raw] * (r * n)
            full[k * n:(k + 1) * n] = v
            vectors.append(full)
    return Subspace.span(f, r * n, vectors)


def _fixed_space_L(T: MonodromyTuple, lam: FieldElement) -> Subspace:
    f = T.field
    n, r = T.n, T.r
    partial = [ExactMatrix.identity(f, n)]
    for A in reversed(T.finite_entries):
        partial.append(A @ partial[-1])
    # partial[i] = A_{r-i+1} ... A_r
    seeds = kernel(partial[r].scale(lam).minus_scalar(1)).basis
    vectors = []
    for v in seeds.data:
        col = ExactMatrix(f, n, 1, [[x] for x in v])
        full = []
        for k in range(1, r + 1):
            P = partial[r - k]
            full.extend(row[0] for row in (P @ col).data)
        vectors.append(full)
    return Subspace.span(f, r * n, vectors)


def build_ambient(T: MonodromyTuple, lam) -> ConvolutionWorkspace:
    lam = _character(T, lam)
    if T.r < 3:
        raise TooFewPoints(f"middle convolution needs at least three finite points, got r = {T.r}")
    validate(T)
    ambient = tuple(_ambient_matrices(T, lam))
    K = _fixed_space_K(T)
    L = _fixed_space_L(T, lam)
    for idx, B in enumerate(ambient, start=1):
        if not K.is_invariant_under(B):
            raise NotInvariant(f"K is not preserved by B_{idx}")
        if L.dim and B @ L.basis.transpose() != L.basis.transpose():
            raise NotInvariant(f"L is not fixed by B_{idx}")
    logger.info(f"Ambient dim {T.r * T.n}, dim K = {K.dim}, dim L = {L.dim}")
    return ConvolutionWorkspace(lam, T, ambient, K, L)


def mc(T: MonodromyTuple, lam) -> MonodromyTuple:
    ws = build_ambient(T, lam)
    S = ws.quotient_space
    finite = induced_quotient_action(ws.ambient, S)
    new_n = ws.ambient_dim - S.dim
    if new_n == 0:
        inf = ExactMatrix(T.field, 0, 0, [])
    else:
        prod = finite[0]
        for m in finite[1:]:
            prod = prod @ m
        inf = inverse(prod)
    out = MonodromyTuple(T.field, new_n, T.r, tuple(finite) + (inf,), T.labels)
    if new_n:
        validate(out)
    logger.info(f"🔁 MC_{ws.lam.to_json()}: rank {T.n} -> {new_n}")
    return out


def expected_rank(T: MonodromyTuple, lam) -> int:
    lam = T.field.element(lam)
    total = sum(rank(A.minus_scalar(1)) for A in T.finite_entries)
    total += rank(inverse(T.infinity).scale(lam).minus_scalar(1))
    return total - T.n


def brute_force_dimensions(T: MonodromyTuple, lam) -> tuple[int, int]:
    """(dim K, dim L) from the stacked fixed-point systems of the A_k and the B_k."""
    lam = _character(T, lam)
    dim_k = sum(kernel(A.minus_scalar(1)).dim for A in T.finite_entries)
    system = stack_rows(T.field, [B.minus_scalar(1) for B in _ambient_matrices(T, lam)], T.r * T.n)
    return dim_k, kernel(system).dim


def _check(name: str, passed, detail) -> dict:
    return {"name": name, "pass": passed, "detail": detail}


def mc_selfcheck(T: MonodromyTuple, lam, out: MonodromyTuple | None = None) -> dict:
    """Consistency checks of one convolution step; `out` reuses an already computed mc(T, lam)."""
    settings = get_settings()
    checks = []
    try:
        if out is None:
            out = mc(T, lam)
    except MonodromyError as e:
        logger.error(f"Convolution failed: {e}")
        checks.append(_check("convolution", False, str(e)))
        return {"checks": checks}
    lam = T.field.element(lam)

    expected = expected_rank(T, lam)
    checks.append(_check("rank_formula", out.n == expected, {"expected": expected, "computed": out.n}))

    try:
        if out.n:
            validate(out)
        checks.append(_check("product_relation", True, "entries multiply to the identity"))
    except MonodromyError as e:
        checks.append(_check("product_relation", False, str(e)))

    if T.r * T.n <= BRUTE_FORCE_MAX_AMBIENT:
        ws = build_ambient(T, lam)
        brute = brute_force_dimensions(T, lam)
        checks.append(
            _check(
                "subspace_dimensions",
                brute == (ws.K.dim, ws.L.dim),
                {"closed_form": [ws.K.dim, ws.L.dim], "brute_force": list(brute)},
            )
        )

    if not (lam * lam).is_one():
        checks.append(_check("involution", None, "lambda^2 != 1"))
    elif T.n > settings.involution_max_rank:
        checks.append(_check("involution", None, f"rank {T.n} exceeds {settings.involution_max_rank}"))
    else:
        try:
            twice = mc(out, lam) if out.n else None
        except MonodromyError as e:
            twice = None
            logger.error(f"Second convolution failed: {e}")
        if twice is None or twice.n != T.n:
            checks.append(_check("involution", False, {"rank": twice.n if twice else 0, "expected": T.n}))
        else:
            try:
                witness = simultaneous_conjugacy(T.entries, twice.entries)
                checks.append(
                    _check(
                        "involution",
                        witness is not None,
                        {"witness": witness.to_json() if witness is not None else None},
                    )
                )
            except ConjugacyUndecided as e:
                checks.append(_check("involution", None, str(e)))
    for c in checks:
        if c["pass"] is False:
            logger.warning(f"⚠️ Self-check {c['name']} failed: {c['detail']}")
    return {"checks": checks}


def selfcheck_passed(report: dict) -> bool:
    return all(c["pass"] is not False for c in report["checks"])


def base_change_check(T: MonodromyTuple, lam, rmap: ResidueMap) -> dict:
    """Compares reduce(mc(T)) with mc(reduce(T)) up to simultaneous conjugacy."""
    lam = T.field.element(lam)
    try:
        upstairs = reduce_tuple(mc(T, lam), rmap)
        downstairs = mc(reduce_tuple(T, rmap), apply_residue(rmap, lam))
    except MonodromyError as e:
        return _check("base_change", False, str(e))
    detail = {"reduce_then_convolve": downstairs.n, "convolve_then_reduce": upstairs.n}
    if upstairs.n != downstairs.n:
        return _check("base_change", False, detail)
    try:
        witness = simultaneous_conjugacy(upstairs.entries, downstairs.entries)
    except ConjugacyUndecided as e:
        detail["conjugate"] = None
        return _check("base_change", None, {**detail, "reason": str(e)})
    detail["conjugate"] = witness is not None
    return _check("base_change", witness is not None, detail)
