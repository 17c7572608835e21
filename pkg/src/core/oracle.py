"""Expected local monodromy of the four convolution families G_{i,m,r}.

Each table row lists (eigenvalue, block size, multiplicity); the symbols lambda and
lambda^-1 stand for the seed eigenvalues of construct_T, and i, -i for the primitive fourth
roots of unity.
"""

from __future__ import annotations

from math import lcm

from sympy import totient

from src.core.errors import HypothesisViolation
from src.core.fields import FieldElement, FieldHandle, make_cyclotomic_field, root_of_unity
from src.core.linalg import JordanData
from src.core.tuples import seed_eigenvalues
from src.utils.logger import get_logger

logger = get_logger(__name__)

FAMILIES = (1, 2, 3, 4)
RANK_OFFSETS = {1: 9, 2: 11, 3: 10, 4: 12}
RESIDUE_TO_FAMILY = {3: 1, 1: 2, 2: 3, 0: 4}


def family_rank(family: int, r: int) -> int:
    if family not in FAMILIES:
        raise HypothesisViolation(f"family must be one of {FAMILIES}, got {family}")
    return 4 * r - RANK_OFFSETS[family]


def check_hypotheses(family: int, m: int, r: int) -> None:
    if family not in FAMILIES:
        raise HypothesisViolation(f"family must be one of {FAMILIES}, got {family}")
    if m <= 2 or m % 2:
        raise HypothesisViolation(f"m must be an even integer > 2, got {m}")
    phi = int(totient(m))
    if 2 * phi > r - 5:
        raise HypothesisViolation(f"need 2*phi(m) <= r - 5, got 2*phi({m}) = {2 * phi} and r = {r}")


def oracle_field(m: int) -> FieldHandle:
    return make_cyclotomic_field(lcm(4, m, 2))


def _family_one(r, n, seeds, one, minus_one, i, minus_i):
    rows = [[(lam, 1, 1), (lam.inverse(), 1, 1), (one, 1, 4 * r - 11)] for lam in seeds[: r - 3]]
    rows.append([(one, 2, 2 * r - 6), (one, 3, 1)])
    rows.append([(one, 1, 1), (minus_one, 1, 4 * r - 10)])
    rows.append([(i, 1, 1), (minus_i, 1, 1), (one, 2, 2 * r - 6), (one, 1, 1)])
    rows.append([(one, 1, n)])
    return rows


def _family_two(r, n, seeds, one, minus_one, i, minus_i):
    rows = [[(lam, 1, 1), (lam.inverse(), 1, 1), (one, 1, 4 * r - 13)] for lam in seeds[: r - 4]]
    rows.append([(one, 2, 2 * r - 6), (one, 1, 1)])
    rows.append([(one, 3, 1), (one, 2, 2 * r - 8), (one, 1, 2)])
    rows.append([(one, 1, 1), (minus_one, 1, 4 * r - 12)])
    rows.append([(i, 1, 1), (minus_i, 1, 1), (one, 1, 4 * r - 13)])
    rows.append([(one, 1, n)])
    return rows


def _family_three(r, n, seeds, one, minus_one, i, minus_i):
    rows = [[(lam, 1, 1), (lam.inverse(), 1, 1), (one, 1, 4 * r - 12)] for lam in seeds[: r - 4]]
    rows.append([(one, 3, 2), (one, 2, 2 * r - 8)])
    rows.append([(minus_one, 1, 1), (one, 1, 4 * r - 11)])
    rows.append([(minus_one, 1, 1), (one, 1, 4 * r - 11)])
    rows.append([(i, 1, 1), (minus_i, 1, 1), (one, 2, 2 * r - 6)])
    rows.append([(minus_one, 1, n)])
    return rows


def _family_four(r, n, seeds, one, minus_one, i, minus_i):
    rows = [[(lam, 1, 1), (lam.inverse(), 1, 1), (one, 1, 4 * r - 14)] for lam in seeds[: r - 4]]
    rows.append([(one, 2, 2 * r - 6)])
    rows.append([(minus_one, 1, 1), (one, 1, 4 * r - 13)])
    rows.append([(minus_one, 1, 1), (one, 1, 4 * r - 13)])
    rows.append([(i, 1, 1), (minus_i, 1, 1), (one, 2, 2 * r - 8), (one, 1, 2)])
    rows.append([(minus_one, 1, n)])
    return rows


TABLES = {1: _family_one, 2: _family_two, 3: _family_three, 4: _family_four}


def instantiate_oracle(family: int, m: int, r: int) -> list[JordanData]:
    """Expected JordanData of entries 1..r+1 of G_{family,m,r}, over Q(zeta_lcm(4,m))."""
    check_hypotheses(family, m, r)
    field = oracle_field(m)
    n = family_rank(family, r)
    one = field.one
    i = root_of_unity(field, 4)
    rows = TABLES[family](r, n, seed_eigenvalues(m, r, field), one, -one, i, i.inverse())
    return [JordanData.from_blocks(n, row) for row in rows]


def map_oracle(table: list[JordanData], fn) -> list[JordanData]:
    """Pushes every eigenvalue through `fn` (a residue map, an embedding, ...)."""
    return [JordanData.from_blocks(jd.dim, ((fn(b.eigenvalue), b.size, b.multiplicity) for b in jd.blocks)) for jd in table]


def compare_oracle(expected: list[JordanData], computed: list[JordanData | None]) -> list[dict]:
    rows = []
    for index, (exp, got) in enumerate(zip(expected, computed), start=1):
        rows.append(
            {
                "index": index,
                "expected": str(exp),
                "computed": str(got) if got is not None else None,
                "match": got is not None and exp == got,
            }
        )
    for index in range(len(rows) + 1, max(len(expected), len(computed)) + 1):
        rows.append({"index": index, "expected": None, "computed": None, "match": False})
    mismatched = [row["index"] for row in rows if not row["match"]]
    if mismatched:
        logger.warning(f"⚠️ Oracle mismatch at entries {mismatched}")
    return rows


def theorem_bound(q: int) -> int:
    return 8 * int(totient(q - 1)) + 11


def plan_for_rank(n: int, q: int) -> dict:
    """Family and r with rank n at m = q - 1, for n above the theorem bound."""
    m = q - 1
    bound = theorem_bound(q)
    if n <= bound:
        raise HypothesisViolation(f"n = {n} does not exceed 8*phi(q-1)+11 = {bound}")
    family = RESIDUE_TO_FAMILY[n % 4]
    r = (n + RANK_OFFSETS[family]) // 4
    check_hypotheses(family, m, r)
    logger.info(f"📐 Rank {n} over F_{q}: family {family} with r = {r}")
    return {"n": n, "q": q, "family": family, "m": m, "r": r, "theorem_bound": bound}
