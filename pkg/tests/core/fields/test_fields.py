import unittest
import random
from fractions import Fraction

import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from src.core.errors import (
    FieldMismatch,
    InvalidCharacteristic,
    NotIntegralAtPrime,
    OrderUnavailable,
    ParseError,
    RamifiedPrime,
    ResidueFieldTooSmall,
)
from src.core.fields import (
    FieldElement,
    apply_residue,
    cyclotomic_modulus,
    field_from_descriptor,
    find_embedding,
    galois_field,
    make_cyclotomic_field,
    make_finite_field,
    make_residue_map,
    rational_field,
    root_of_unity,
    roots_of_unity,
)


class TestFiniteFields(unittest.TestCase):
    def test_prime_field_arithmetic(self):
        F5 = make_finite_field(5)
        self.assertEqual(F5.size, 5)
        self.assertEqual((F5.element(3) * F5.element(4)).coeffs, (2,))
        self.assertEqual(F5.element(2).inverse().coeffs, (3,))

    def test_smallest_modulus_of_f25(self):
        F25 = make_finite_field(5, 2)
        self.assertEqual(F25.modulus, (2, 0, 1))
        x = F25.from_coefficients([0, 1])
        self.assertEqual((x * x).coeffs, (3, 0))

    def test_characteristic_two_is_rejected(self):
        with self.assertRaises(InvalidCharacteristic):
            make_finite_field(2)

    def test_non_prime_characteristic_is_rejected(self):
        with self.assertRaises(InvalidCharacteristic):
            make_finite_field(9)

    def test_reducible_modulus_is_rejected(self):
        with self.assertRaises(InvalidCharacteristic):
            make_finite_field(5, 2, (1, 0, 1))

    def test_primitive_root_has_full_order(self):
        for ell, k in [(3, 1), (5, 1), (7, 1), (3, 2), (5, 2)]:
            F = make_finite_field(ell, k)
            g = root_of_unity(F, F.size - 1)
            self.assertEqual(g.order(), F.size - 1)

    def test_missing_root_order_raises(self):
        with self.assertRaises(OrderUnavailable):
            root_of_unity(make_finite_field(5), 3)

    def test_fractions_reduce_when_integral(self):
        F5 = make_finite_field(5)
        self.assertEqual(F5.element(Fraction(1, 2)).coeffs, (3,))
        with self.assertRaises(NotIntegralAtPrime):
            F5.element(Fraction(1, 5))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(min_value=1, max_value=24))
    def test_every_nonzero_element_of_f25_is_invertible(self, value):
        F25 = make_finite_field(5, 2)
        x = F25.from_coefficients(F25.from_int(value))
        self.assertTrue((x * x.inverse()).is_one())


class TestCyclotomicFields(unittest.TestCase):
    def test_modulus_matches_sympy(self):
        x = sympy.Symbol("x")
        for n in [1, 2, 3, 4, 6, 8, 12, 15]:
            expected = tuple(int(c) for c in reversed(sympy.Poly(sympy.cyclotomic_poly(n, x), x).all_coeffs()))
            self.assertEqual(cyclotomic_modulus(n), expected)

    def test_fourth_root_squares_to_minus_one(self):
        K = make_cyclotomic_field(4)
        i = root_of_unity(K, 4)
        self.assertEqual(i * i, -K.one)
        self.assertEqual(i.order(), 4)

    def test_odd_order_field_has_double_order_roots(self):
        K = make_cyclotomic_field(3)
        self.assertEqual(root_of_unity(K, 6).order(), 6)

    def test_roots_of_unity_lists_every_primitive_root(self):
        K = make_cyclotomic_field(4)
        roots = roots_of_unity(K, [4])
        self.assertEqual(len(roots), 4)
        self.assertEqual(len(set(r.coeffs for r in roots)), 4)

    def test_inverse_in_cyclotomic_field(self):
        K = make_cyclotomic_field(12)
        z = root_of_unity(K, 12)
        a = z + 3
        self.assertTrue((a * a.inverse()).is_one())

    def test_rational_field(self):
        Q = rational_field()
        self.assertEqual(Q.element(Fraction(2, 3)) * 3, Q.element(2))


class TestResidueMaps(unittest.TestCase):
    def test_zeta4_maps_to_two_in_f5(self):
        rmap = make_residue_map(make_cyclotomic_field(4), 5)
        self.assertEqual(rmap.target, make_finite_field(5))
        self.assertEqual(rmap.image_of_root.coeffs, (2,))

    def test_residue_map_is_a_ring_homomorphism(self):
        K = make_cyclotomic_field(12)
        rmap = make_residue_map(K, 13)
        z = root_of_unity(K, 12)
        a, b = z + Fraction(1, 2), z**5 - 7
        self.assertEqual(apply_residue(rmap, a * b), apply_residue(rmap, a) * apply_residue(rmap, b))
        self.assertEqual(apply_residue(rmap, a + b), apply_residue(rmap, a) + apply_residue(rmap, b))

    def test_minimal_residue_degree(self):
        rmap = make_residue_map(make_cyclotomic_field(4), 3)
        self.assertEqual(rmap.target.size, 9)
        self.assertEqual(rmap.image_of_root.order(), 4)

    def test_ramified_prime(self):
        with self.assertRaises(RamifiedPrime):
            make_residue_map(make_cyclotomic_field(12), 3)

    def test_requested_field_too_small(self):
        with self.assertRaises(ResidueFieldTooSmall):
            make_residue_map(make_cyclotomic_field(4), 3, 1)


class TestEmbeddingsAndDescriptors(unittest.TestCase):
    def test_prime_field_embeds_identically(self):
        F5, F25 = make_finite_field(5), make_finite_field(5, 2)
        emb = find_embedding(F5, F25)
        self.assertEqual(emb.image(F5.element(3)), F25.element(3))
        self.assertEqual(emb.preimage(F25.element(4)), F5.element(4))

    def test_preimage_outside_subfield(self):
        F5, F25 = make_finite_field(5), make_finite_field(5, 2)
        emb = find_embedding(F5, F25)
        with self.assertRaises(FieldMismatch):
            emb.preimage(F25.from_coefficients([0, 1]))

    def test_descriptor_round_trip(self):
        for F in [rational_field(), make_cyclotomic_field(12), make_finite_field(7), make_finite_field(3, 2)]:
            self.assertEqual(field_from_descriptor(F.descriptor()), F)

    def test_unknown_descriptor(self):
        with self.assertRaises(ParseError) as ctx:
            field_from_descriptor({"kind": "padic"})
        self.assertIn("$.field", str(ctx.exception))


def _random_element(field, rng: random.Random) -> FieldElement:
    if field.is_finite:
        return FieldElement(field, field.from_int(rng.randrange(field.size)))
    return field.from_coefficients(Fraction(rng.randint(-9, 9), rng.randint(1, 4)) for _ in range(field.degree))


class TestFieldAxioms(unittest.TestCase):
    FIELDS = {
        "F7": make_finite_field(7),
        "F25": make_finite_field(5, 2),
        "Q": rational_field(),
        "Q(zeta12)": make_cyclotomic_field(12),
    }

    def test_axioms_on_random_triples(self):
        rng = random.Random(7)
        for name, F in self.FIELDS.items():
            with self.subTest(field=name):
                for _ in range(1000):
                    a, b, c = (_random_element(F, rng) for _ in range(3))
                    self.assertEqual(a + b, b + a)
                    self.assertEqual(a * b, b * a)
                    self.assertEqual((a + b) + c, a + (b + c))
                    self.assertEqual((a * b) * c, a * (b * c))
                    self.assertEqual(a * (b + c), a * b + a * c)
                    self.assertEqual(a + F.zero, a)
                    self.assertEqual(a * F.one, a)
                    self.assertTrue((a + (-a)).is_zero())
                    self.assertEqual(a - b, a + (-b))
                    if not a.is_zero():
                        self.assertTrue((a * a.inverse()).is_one())
                        self.assertEqual((b / a) * a, b)

    def test_primitive_root_is_smallest_generator(self):
        for ell, k in [(3, 1), (7, 1), (11, 1), (3, 2), (5, 2), (7, 2)]:
            F = make_finite_field(ell, k)
            q1 = F.size - 1
            primes = list(sympy.factorint(q1))
            expected = next(
                x.coeffs
                for x in F.elements()
                if not x.is_zero() and all(not (x ** (q1 // p)).is_one() for p in primes)
            )
            with self.subTest(field=str(F)):
                self.assertEqual(F.primitive_root_raw, expected)
                self.assertEqual(F.to_int(F.primitive_root_raw), int(galois_field(F).primitive_element))


class TestResidueHomomorphism(unittest.TestCase):
    def test_random_pairs(self):
        rng = random.Random(13)
        for n, ell in [(4, 5), (12, 13), (8, 3), (6, 7)]:
            K = make_cyclotomic_field(n)
            rmap = make_residue_map(K, ell)
            red = lambda x: apply_residue(rmap, x)  # noqa: E731
            with self.subTest(n=n, ell=ell):
                self.assertTrue(red(K.one).is_one())
                for _ in range(1000):
                    a = K.from_coefficients(rng.randint(-20, 20) for _ in range(K.degree))
                    b = K.from_coefficients(Fraction(rng.randint(-20, 20), rng.choice([1, 2, 4])) for _ in range(K.degree))
                    self.assertEqual(red(a + b), red(a) + red(b))
                    self.assertEqual(red(a * b), red(a) * red(b))
                    self.assertEqual(red(-a), -red(a))
