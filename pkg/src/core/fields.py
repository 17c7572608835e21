"""Exact scalar arithmetic over Q, cyclotomic fields Q(zeta_N) and finite fields F_{l^k}.

Every element is a coefficient vector in the power basis modulo the monic modulus of its
field, lowest degree first. Coefficients are Fractions in characteristic zero and integers
in [0, l) in characteristic l. The raw-tuple methods on FieldHandle are the hot path used by
the linear algebra layer; FieldElement wraps a raw tuple with operator overloads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from math import gcd

import galois
import sympy
from sympy.ntheory import divisors, isprime, n_order

from src.core.errors import (
    FieldMismatch,
    InvalidCharacteristic,
    NotIntegralAtPrime,
    OrderUnavailable,
    ParseError,
    RamifiedPrime,
    ResidueFieldTooSmall,
)
from src.utils.logger import get_logger

logger = get_logger(__name__)

RATIONAL = "rational"
CYCLOTOMIC = "cyclotomic"
FINITE = "finite"


@lru_cache(maxsize=None)
def cyclotomic_modulus(n: int) -> tuple[int, ...]:
    """Phi_n by exact division of x^n - 1 by Phi_d for the proper divisors d of n."""
    x = sympy.Symbol("x")
    poly = sympy.Poly(x**n - 1, x, domain="ZZ")
    for d in divisors(n)[:-1]:
        poly = poly.exquo(sympy.Poly(list(reversed(cyclotomic_modulus(d))), x, domain="ZZ"))
    return tuple(int(c) for c in reversed(poly.all_coeffs()))


def _digits(value: int, base: int, length: int) -> tuple[int, ...]:
    out = []
    for _ in range(length):
        value, rem = divmod(value, base)
        out.append(rem)
    return tuple(out)


@lru_cache(maxsize=None)
def _smallest_irreducible(ell: int, k: int) -> tuple[int, ...]:
    # candidates ordered by the integer sum(c_i * ell^i) of their lower coefficients
    x = sympy.Symbol("x")
    for value in range(ell**k):
        lower = _digits(value, ell, k)
        poly = sympy.Poly([1, *reversed(lower)], x, modulus=ell)
        if poly.is_irreducible:
            return (*lower, 1)
    raise InvalidCharacteristic(f"no irreducible polynomial of degree {k} over F_{ell}")


@dataclass(frozen=True)
class FieldHandle:
    kind: str
    order: int = 1
    ell: int = 0
    k: int = 1
    modulus: tuple[int, ...] = (0, 1)

    @property
    def degree(self) -> int:
        return len(self.modulus) - 1

    @property
    def is_finite(self) -> bool:
        return self.kind == FINITE

    @property
    def size(self) -> int | None:
        return self.ell**self.k if self.is_finite else None

    def __str__(self) -> str:
        if self.kind == RATIONAL:
            return "Q"
        if self.kind == CYCLOTOMIC:
            return f"Q(zeta_{self.order})"
        return f"GF({self.ell}^{self.k})"

    # -- raw element arithmetic -------------------------------------------------------------

    @cached_property
    def zero_raw(self) -> tuple:
        return (0,) * self.degree

    @cached_property
    def one_raw(self) -> tuple:
        return (1,) + (0,) * (self.degree - 1)

    @cached_property
    def generator_raw(self) -> tuple:
        """The power-basis generator: zeta_N for cyclotomic fields, x mod modulus otherwise."""
        if self.kind == RATIONAL:
            return self.one_raw
        return self.reduce_poly((0, 1))

    def _norm(self, value):
        return value % self.ell if self.ell else value

    def reduce_poly(self, coeffs) -> tuple:
        d = self.degree
        work = list(coeffs)
        if len(work) < d:
            work.extend([0] * (d - len(work)))
        mod = self.modulus
        for i in range(len(work) - 1, d - 1, -1):
            c = work[i]
            if c:
                base = i - d
                for j in range(d):
                    if mod[j]:
                        work[base + j] -= c * mod[j]
        return tuple(self._norm(c) for c in work[:d])

    def is_zero(self, a) -> bool:
        return not any(a)

    def add(self, a, b) -> tuple:
        if self.ell:
            p = self.ell
            return tuple((x + y) % p for x, y in zip(a, b))
        return tuple(x + y for x, y in zip(a, b))

    def sub(self, a, b) -> tuple:
        if self.ell:
            p = self.ell
            return tuple((x - y) % p for x, y in zip(a, b))
        return tuple(x - y for x, y in zip(a, b))

    def neg(self, a) -> tuple:
        if self.ell:
            p = self.ell
            return tuple((-x) % p for x in a)
        return tuple(-x for x in a)

    def mul(self, a, b) -> tuple:
        d = self.degree
        if d == 1:
            return (self._norm(a[0] * b[0]),)
        prod = [0] * (2 * d - 1)
        for i, x in enumerate(a):
            if x:
                for j, y in enumerate(b):
                    if y:
                        prod[i + j] += x * y
        return self.reduce_poly(prod)

    def inv(self, a) -> tuple:
        if self.is_zero(a):
            raise ZeroDivisionError(f"inverse of zero in {self}")
        if self.ell:
            if self.degree == 1:
                return (pow(a[0], -1, self.ell),)
            return self.pow(a, self.size - 2)
        if self.degree == 1:
            return (1 / Fraction(a[0]),)
        return self._inv_linear(a)

    def _inv_linear(self, a) -> tuple:
        # solve (multiplication by a) * c = 1 over the base field
        d = self.degree
        cols = [self.mul(a, self.reduce_poly((0,) * j + (1,))) for j in range(d)]
        aug = [
            [Fraction(cols[j][i]) for j in range(d)] + [Fraction(1 if i == 0 else 0)]
            for i in range(d)
        ]
        for c in range(d):
            p = next(r for r in range(c, d) if aug[r][c] != 0)
            aug[c], aug[p] = aug[p], aug[c]
            piv = aug[c][c]
            aug[c] = [v / piv for v in aug[c]]
            for r in range(d):
                if r != c and aug[r][c] != 0:
                    f = aug[r][c]
                    aug[r] = [v - f * w for v, w in zip(aug[r], aug[c])]
        return tuple(aug[i][d] for i in range(d))

    def pow(self, a, e: int) -> tuple:
        if e < 0:
            a = self.inv(a)
            e = -e
        result = self.one_raw
        while e:
            if e & 1:
                result = self.mul(result, a)
            e >>= 1
            if e:
                a = self.mul(a, a)
        return result

    def scalar_raw(self, value) -> tuple:
        if self.ell:
            value = Fraction(value)
            if value.denominator % self.ell == 0:
                raise NotIntegralAtPrime(f"{value} is not {self.ell}-integral")
            s = value.numerator * pow(value.denominator, -1, self.ell) % self.ell
        else:
            s = Fraction(value)
        return (s,) + (0,) * (self.degree - 1)

    def raw(self, value) -> tuple:
        if isinstance(value, FieldElement):
            if value.owner != self:
                raise FieldMismatch(f"element of {value.owner} used in {self}")
            return value.coeffs
        if isinstance(value, bool):
            raise TypeError("booleans are not field elements")
        if isinstance(value, (int, Fraction)):
            return self.scalar_raw(value)
        raise TypeError(f"cannot coerce {type(value).__name__} into {self}")

    def element(self, value) -> FieldElement:
        return FieldElement(self, self.raw(value))

    def from_coefficients(self, coeffs) -> FieldElement:
        coeffs = tuple(coeffs)
        if len(coeffs) != self.degree:
            raise ValueError(f"{self} needs {self.degree} coefficients, got {len(coeffs)}")
        if self.ell:
            return FieldElement(self, tuple(int(c) % self.ell for c in coeffs))
        return FieldElement(self, tuple(Fraction(c) for c in coeffs))

    @property
    def zero(self) -> FieldElement:
        return FieldElement(self, self.zero_raw)

    @property
    def one(self) -> FieldElement:
        return FieldElement(self, self.one_raw)

    def evaluate(self, coeffs, x_raw) -> tuple:
        """Horner evaluation of a polynomial with base-field coefficients (low degree first)."""
        acc = self.zero_raw
        for c in reversed(coeffs):
            acc = self.add(self.mul(acc, x_raw), self.scalar_raw(c))
        return acc

    # -- finite-field helpers ---------------------------------------------------------------

    def to_int(self, raw) -> int:
        value = 0
        for c in reversed(raw):
            value = value * self.ell + int(c)
        return value

    def from_int(self, value: int) -> tuple:
        return _digits(value, self.ell, self.degree)

    def elements(self):
        if not self.is_finite:
            raise FieldMismatch(f"{self} is infinite")
        for value in range(self.size):
            yield FieldElement(self, self.from_int(value))

    @cached_property
    def primitive_root_raw(self) -> tuple:
        if not self.is_finite:
            raise FieldMismatch(f"{self} has no primitive root")
        return self.from_int(int(galois_field(self).primitive_element))

    def multiplicative_order(self, raw, bound: int | None = None) -> int | None:
        if self.is_zero(raw):
            raise ZeroDivisionError("zero has no multiplicative order")
        if self.is_finite:
            for d in divisors(self.size - 1):
                if self.pow(raw, d) == self.one_raw:
                    return d
        bound = bound or 2 * max(self.order, 1)
        acc = raw
        for e in range(1, bound + 1):
            if acc == self.one_raw:
                return e
            acc = self.mul(acc, raw)
        return None

    def has_roots_of_order(self, order: int) -> bool:
        if self.is_finite:
            return (self.size - 1) % order == 0
        n = self.order
        return n % order == 0 or (2 * n) % order == 0

    # -- serialization ----------------------------------------------------------------------

    def descriptor(self) -> dict:
        if self.kind == RATIONAL:
            return {"kind": RATIONAL}
        if self.kind == CYCLOTOMIC:
            return {"kind": CYCLOTOMIC, "order": self.order}
        return {"kind": FINITE, "l": self.ell, "k": self.k, "modulus": list(self.modulus[:-1])}

    def encode_raw(self, raw) -> list:
        if self.ell:
            return [int(c) for c in raw]
        out = []
        for c in raw:
            c = Fraction(c)
            out.append(f"{c.numerator}/{c.denominator}")
        return out

    def decode_raw(self, data, location: str = "$") -> tuple:
        if not isinstance(data, list) or len(data) != self.degree:
            raise ParseError(f"expected a list of {self.degree} coefficients", location)
        if self.ell:
            for c in data:
                if isinstance(c, bool) or not isinstance(c, int) or not 0 <= c < self.ell:
                    raise ParseError(f"coefficient {c!r} is not in [0, {self.ell})", location)
            return tuple(data)
        out = []
        for c in data:
            if isinstance(c, bool) or not isinstance(c, (str, int)):
                raise ParseError(f"coefficient {c!r} is not a rational string", location)
            try:
                out.append(Fraction(c))
            except (ValueError, ZeroDivisionError):
                raise ParseError(f"coefficient {c!r} is not a rational string", location)
        return tuple(out)


@dataclass(frozen=True)
class FieldElement:
    owner: FieldHandle
    coeffs: tuple

    def __add__(self, other):
        return FieldElement(self.owner, self.owner.add(self.coeffs, self.owner.raw(other)))

    __radd__ = __add__

    def __sub__(self, other):
        return FieldElement(self.owner, self.owner.sub(self.coeffs, self.owner.raw(other)))

    def __rsub__(self, other):
        return FieldElement(self.owner, self.owner.sub(self.owner.raw(other), self.coeffs))

    def __mul__(self, other):
        return FieldElement(self.owner, self.owner.mul(self.coeffs, self.owner.raw(other)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        inv = self.owner.inv(self.owner.raw(other))
        return FieldElement(self.owner, self.owner.mul(self.coeffs, inv))

    def __rtruediv__(self, other):
        return FieldElement(self.owner, self.owner.mul(self.owner.raw(other), self.owner.inv(self.coeffs)))

    def __neg__(self):
        return FieldElement(self.owner, self.owner.neg(self.coeffs))

    def __pow__(self, exponent: int):
        return FieldElement(self.owner, self.owner.pow(self.coeffs, exponent))

    def inverse(self) -> FieldElement:
        return FieldElement(self.owner, self.owner.inv(self.coeffs))

    def is_zero(self) -> bool:
        return self.owner.is_zero(self.coeffs)

    def is_one(self) -> bool:
        return self.coeffs == self.owner.one_raw

    def order(self, bound: int | None = None) -> int | None:
        return self.owner.multiplicative_order(self.coeffs, bound)

    def to_json(self) -> list:
        return self.owner.encode_raw(self.coeffs)

    def sort_key(self) -> str:
        return json.dumps(self.to_json())

    def __repr__(self) -> str:
        return f"FieldElement({self.owner}, {self.to_json()})"


def rational_field() -> FieldHandle:
    return FieldHandle(RATIONAL)


@lru_cache(maxsize=None)
def make_cyclotomic_field(n: int) -> FieldHandle:
    if n < 1:
        raise ValueError(f"cyclotomic order must be positive, got {n}")
    return FieldHandle(CYCLOTOMIC, order=n, modulus=cyclotomic_modulus(n))


@lru_cache(maxsize=None)
def make_finite_field(ell: int, k: int = 1, modulus: tuple[int, ...] | None = None) -> FieldHandle:
    if ell == 2 or not isprime(ell):
        raise InvalidCharacteristic(f"characteristic must be an odd prime, got {ell}")
    if k < 1:
        raise InvalidCharacteristic(f"extension degree must be positive, got {k}")
    if modulus is None:
        modulus = _smallest_irreducible(ell, k)
    else:
        modulus = tuple(int(c) % ell for c in modulus)
        if len(modulus) == k:
            modulus = (*modulus, 1)
        x = sympy.Symbol("x")
        if len(modulus) != k + 1 or modulus[-1] != 1:
            raise InvalidCharacteristic(f"modulus must be monic of degree {k}")
        if not sympy.Poly(list(reversed(modulus)), x, modulus=ell).is_irreducible:
            raise InvalidCharacteristic(f"modulus {modulus} is reducible over F_{ell}")
    return FieldHandle(FINITE, order=ell**k - 1, ell=ell, k=k, modulus=modulus)


def field_from_descriptor(data, location: str = "$.field") -> FieldHandle:
    if not isinstance(data, dict) or "kind" not in data:
        raise ParseError("field descriptor must be an object with a 'kind'", location)
    kind = data["kind"]
    try:
        if kind == RATIONAL:
            return rational_field()
        if kind == CYCLOTOMIC:
            return make_cyclotomic_field(int(data["order"]))
        if kind == FINITE:
            return make_finite_field(int(data["l"]), int(data["k"]), tuple(data["modulus"]))
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"bad field descriptor: {e}", location)
    raise ParseError(f"unknown field kind {kind!r}", location)


def root_of_unity(field: FieldHandle, order: int, exponent: int = 1) -> FieldElement:
    if order < 1:
        raise OrderUnavailable(f"order must be positive, got {order}")
    if field.is_finite:
        q1 = field.size - 1
        if q1 % order:
            raise OrderUnavailable(f"{field} has no root of unity of order {order}")
        base = field.pow(field.primitive_root_raw, q1 // order)
    else:
        n = field.order
        if n % order == 0:
            base = field.pow(field.generator_raw, n // order)
        elif (2 * n) % order == 0:
            # n is odd here and -zeta_n^((n+1)/2) is a primitive 2n-th root
            zeta_2n = field.neg(field.pow(field.generator_raw, (n + 1) // 2))
            base = field.pow(zeta_2n, (2 * n) // order)
        else:
            raise OrderUnavailable(f"{field} has no root of unity of order {order}")
    return FieldElement(field, field.pow(base, exponent % order))


def roots_of_unity(field: FieldHandle, orders) -> list[FieldElement]:
    """All roots of unity whose exact order divides one of `orders` and lives in `field`."""
    closure = sorted({d for o in orders for d in divisors(o)})
    roots = []
    for o in closure:
        if not field.has_roots_of_order(o):
            continue
        for e in range(1, o + 1):
            if gcd(e, o) == 1:
                roots.append(root_of_unity(field, o, e))
    return roots


@dataclass(frozen=True)
class ResidueMap:
    source: FieldHandle
    target: FieldHandle
    image_of_root: FieldElement
    ell: int

    @cached_property
    def _basis_images(self) -> tuple:
        t = self.target
        return tuple(t.pow(self.image_of_root.coeffs, i) for i in range(self.source.degree))

    def apply_raw(self, raw) -> tuple:
        t = self.target
        acc = t.zero_raw
        for c, img in zip(raw, self._basis_images):
            if c:
                acc = t.add(acc, t.mul(t.scalar_raw(c), img))
        return acc


def make_residue_map(source: FieldHandle, ell: int, k: int | None = None) -> ResidueMap:
    if source.is_finite:
        raise FieldMismatch(f"residue maps start from characteristic zero, got {source}")
    n = source.order
    if n % ell == 0:
        raise RamifiedPrime(f"{ell} divides the cyclotomic order {n}")
    if ell == 2 or not isprime(ell):
        raise InvalidCharacteristic(f"characteristic must be an odd prime, got {ell}")
    f = 1 if n <= 2 else int(n_order(ell, n))
    if k is None:
        k = f
    elif k % f:
        raise ResidueFieldTooSmall(f"F_{ell}^{k} does not contain the {n}-th roots of unity (need degree {f})")
    target = make_finite_field(ell, k)
    q1 = target.size - 1
    step = q1 // n
    phi = cyclotomic_modulus(n)
    g = target.primitive_root_raw
    for j in range(1, n + 1):
        if gcd(j, n) != 1:
            continue
        cand = target.pow(g, j * step)
        if target.multiplicative_order(cand) == n and target.is_zero(target.evaluate(phi, cand)):
            logger.info(f"Residue map {source} -> {target}: zeta_{n} -> {target.encode_raw(cand)}")
            return ResidueMap(source, target, FieldElement(target, cand), ell)
    raise ResidueFieldTooSmall(f"no element of order {n} in {target}")


def apply_residue(rmap: ResidueMap, x: FieldElement) -> FieldElement:
    if x.owner != rmap.source:
        raise FieldMismatch(f"element of {x.owner} given to a residue map from {rmap.source}")
    return FieldElement(rmap.target, rmap.apply_raw(x.coeffs))


@dataclass(frozen=True)
class FieldEmbedding:
    source: FieldHandle
    target: FieldHandle
    image_of_generator: tuple

    @cached_property
    def _basis_images(self) -> tuple:
        t = self.target
        return tuple(t.pow(self.image_of_generator, i) for i in range(self.source.degree))

    def image_raw(self, raw) -> tuple:
        t = self.target
        acc = t.zero_raw
        for c, img in zip(raw, self._basis_images):
            if c:
                acc = t.add(acc, t.mul(t.scalar_raw(c), img))
        return acc

    @cached_property
    def _preimages(self) -> dict:
        return {self.image_raw(x.coeffs): x.coeffs for x in self.source.elements()}

    def preimage_raw(self, raw) -> tuple:
        try:
            return self._preimages[tuple(raw)]
        except KeyError:
            raise FieldMismatch(f"{self.target.encode_raw(raw)} does not lie in {self.source}")

    def image(self, x: FieldElement) -> FieldElement:
        return FieldElement(self.target, self.image_raw(self.source.raw(x)))

    def preimage(self, y: FieldElement) -> FieldElement:
        return FieldElement(self.source, self.preimage_raw(self.target.raw(y)))


def find_embedding(sub: FieldHandle, ext: FieldHandle) -> FieldEmbedding:
    if not (sub.is_finite and ext.is_finite) or sub.ell != ext.ell or ext.k % sub.k:
        raise FieldMismatch(f"{sub} does not embed into {ext}")
    for value in range(ext.size):
        cand = ext.from_int(value)
        if ext.is_zero(ext.evaluate(sub.modulus, cand)):
            return FieldEmbedding(sub, ext, cand)
    raise FieldMismatch(f"modulus of {sub} has no root in {ext}")


@lru_cache(maxsize=None)
def galois_field(field: FieldHandle):
    """The galois FieldArray class matching a finite FieldHandle element-for-element."""
    if not field.is_finite:
        raise FieldMismatch(f"{field} has no galois counterpart")
    if field.k == 1:
        return galois.GF(field.ell)
    prime = galois.GF(field.ell)
    poly = galois.Poly(list(reversed(field.modulus)), field=prime)
    return galois.GF(field.size, irreducible_poly=poly)
