import random
import unittest
from fractions import Fraction
from itertools import permutations

from hypothesis import given, settings
from hypothesis import strategies as st

from src.core.errors import ConjugacyUndecided, EigenvalueOutsideField, NotInvariant, SingularMatrix
from src.core.fields import make_cyclotomic_field, make_finite_field, rational_field, root_of_unity
from src.core.linalg import (
    EchelonBasis,
    ExactMatrix,
    JordanData,
    Subspace,
    char_poly,
    determinant,
    induced_quotient_action,
    inverse,
    jordan_data,
    kernel,
    poly_eval,
    rank,
    rref,
    simultaneous_conjugacy,
)

Q = rational_field()

small_rationals = st.fractions(min_value=-5, max_value=5, max_denominator=4)


def _leibniz_det(M):
    n = M.rows
    total = Fraction(0)
    for perm in permutations(range(n)):
        sign = 1
        for i in range(n):
            for j in range(i + 1, n):
                if perm[i] > perm[j]:
                    sign = -sign
        term = Fraction(sign)
        for i in range(n):
            term *= M.data[i][perm[i]][0]
        total += term
    return total


def _leibniz_det_mod(values, ell):
    n = len(values)
    total = 0
    for perm in permutations(range(n)):
        inversions = sum(1 for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j])
        term = -1 if inversions % 2 else 1
        for i in range(n):
            term *= values[i][perm[i]]
        total += term
    return total % ell


def _jordan_matrix(field, blocks, n):
    values = [[0] * n for _ in range(n)]
    start = 0
    for ev, size in blocks:
        for i in range(start, start + size):
            values[i][i] = ev
            if i + 1 < start + size:
                values[i][i + 1] = 1
        start += size
    return ExactMatrix.from_values(field, values)


class TestExactMatrix(unittest.TestCase):
    def test_identity_and_product(self):
        A = ExactMatrix.from_values(Q, [[1, 2], [3, 4]])
        I = ExactMatrix.identity(Q, 2)
        self.assertEqual(A @ I, A)
        self.assertEqual((A @ A), ExactMatrix.from_values(Q, [[7, 10], [15, 22]]))

    def test_inverse_of_singular_matrix(self):
        with self.assertRaises(SingularMatrix):
            inverse(ExactMatrix.from_values(Q, [[1, 2], [2, 4]]))

    def test_galois_and_pure_paths_agree(self):
        F = make_finite_field(7)
        rng = random.Random(7)
        values = [[rng.randrange(7) for _ in range(12)] for _ in range(12)]
        pure = ExactMatrix.from_values(F, values)
        fast = ExactMatrix.from_galois(F, ExactMatrix.from_values(F, values).galois())
        self.assertEqual((fast @ fast).data, (pure @ pure).data)
        self.assertEqual(rank(fast), rank(pure))

    def test_json_round_trip(self):
        K = make_cyclotomic_field(4)
        i = root_of_unity(K, 4)
        A = ExactMatrix.from_values(K, [[i, Fraction(1, 3)], [0, -i]])
        self.assertEqual(ExactMatrix.from_json(A.to_json()), A)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(small_rationals, min_size=9, max_size=9))
    def test_determinant_matches_leibniz(self, values):
        M = ExactMatrix.from_values(Q, [values[0:3], values[3:6], values[6:9]])
        self.assertEqual(determinant(M).coeffs[0], _leibniz_det(M))

    @settings(max_examples=40, deadline=None)
    @given(st.lists(small_rationals, min_size=9, max_size=9))
    def test_inverse_times_matrix_is_identity(self, values):
        M = ExactMatrix.from_values(Q, [values[0:3], values[3:6], values[6:9]])
        if determinant(M).is_zero():
            with self.assertRaises(SingularMatrix):
                inverse(M)
        else:
            self.assertTrue((inverse(M) @ M).is_identity())


class TestEchelonAndSubspaces(unittest.TestCase):
    def test_rref_pivots(self):
        M = ExactMatrix.from_values(Q, [[0, 2, 4], [0, 1, 2], [1, 0, 1]])
        R, r, pivots = rref(M)
        self.assertEqual(r, 2)
        self.assertEqual(pivots, [0, 1])

    def test_kernel_is_annihilated(self):
        M = ExactMatrix.from_values(Q, [[1, 2, 3], [2, 4, 6]])
        K = kernel(M)
        self.assertEqual(K.dim, 2)
        self.assertTrue((M @ K.basis.transpose()).is_zero())

    def test_span_is_canonical(self):
        a = Subspace.span(Q, 3, ExactMatrix.from_values(Q, [[1, 0, 0], [0, 1, 0]]))
        b = Subspace.span(Q, 3, ExactMatrix.from_values(Q, [[1, 1, 0], [2, 0, 0]]))
        self.assertEqual(a, b)

    def test_quotient_action(self):
        M = ExactMatrix.from_values(Q, [[2, 1], [0, 3]])
        S = Subspace.span(Q, 2, ExactMatrix.from_values(Q, [[1, 0]]))
        (induced,) = induced_quotient_action([M], S)
        self.assertEqual(induced, ExactMatrix.from_values(Q, [[3]]))

    def test_quotient_by_non_invariant_subspace(self):
        M = ExactMatrix.from_values(Q, [[2, 0], [1, 3]])
        S = Subspace.span(Q, 2, ExactMatrix.from_values(Q, [[1, 0]]))
        with self.assertRaises(NotInvariant):
            induced_quotient_action([M], S)

    def test_echelon_basis_reports_fresh_rows(self):
        F = make_finite_field(5)
        basis = EchelonBasis(F, 3)
        first = basis.extend(ExactMatrix.from_values(F, [[1, 2, 0], [2, 4, 0]]))
        self.assertEqual(first.rows, 1)
        second = basis.extend(ExactMatrix.from_values(F, [[0, 1, 0], [0, 0, 1]]))
        self.assertEqual(second.rows, 2)
        self.assertEqual(basis.rank, 3)


class TestCharPolyAndJordan(unittest.TestCase):
    def test_char_poly_of_companion(self):
        M = ExactMatrix.from_values(Q, [[0, 0, -6], [1, 0, 11], [0, 1, -6]])
        coeffs = [c.coeffs[0] for c in char_poly(M)]
        self.assertEqual(coeffs, [6, -11, 6, 1])

    def test_jordan_blocks_of_unipotent_matrix(self):
        M = ExactMatrix.from_values(Q, [[1, 1, 0, 0], [0, 1, 1, 0], [0, 0, 1, 0], [0, 0, 0, -1]])
        jd = jordan_data(M, [2])
        expected = JordanData.from_blocks(4, [(Q.one, 3, 1), (-Q.one, 1, 1)])
        self.assertEqual(jd, expected)

    def test_jordan_over_cyclotomic_field(self):
        K = make_cyclotomic_field(4)
        i = root_of_unity(K, 4)
        M = ExactMatrix.diagonal(K, [i, i.inverse(), 1])
        jd = jordan_data(M, [4])
        self.assertTrue(jd.is_selfdual())
        self.assertEqual(len(jd.blocks), 3)

    def test_eigenvalue_outside_field(self):
        F5 = make_finite_field(5)
        rotation = ExactMatrix.from_values(F5, [[0, -1], [1, -1]])
        with self.assertRaises(EigenvalueOutsideField):
            jordan_data(rotation, [3])

    def test_blocks_must_cover_dimension(self):
        with self.assertRaises(ValueError):
            JordanData.from_blocks(3, [(Q.one, 2, 1)])

    def test_char_poly_matches_leibniz_over_f7(self):
        rng = random.Random(3)
        F7 = make_finite_field(7)
        for _ in range(200):
            n = rng.randint(1, 4)
            values = [[rng.randrange(7) for _ in range(n)] for _ in range(n)]
            cp = [c.coeffs for c in char_poly(ExactMatrix.from_values(F7, values))]
            self.assertEqual(len(cp), n + 1)
            self.assertEqual(cp[-1], F7.one_raw)
            for x in range(7):
                shifted = [[(x if i == j else 0) - values[i][j] for j in range(n)] for i in range(n)]
                self.assertEqual(F7.to_int(poly_eval(F7, cp, F7.from_int(x))), _leibniz_det_mod(shifted, 7))

    def test_planted_jordan_blocks_survive_conjugation(self):
        rng = random.Random(5)
        cases = [(make_finite_field(7), [1, 2, 3, 4, 5, 6], [6]), (Q, [1, -1], [2])]
        for field, eigenvalues, orders in cases:
            for _ in range(20):
                n = rng.randint(1, 8)
                blocks, left = [], n
                while left:
                    size = rng.randint(1, left)
                    blocks.append((rng.choice(eigenvalues), size))
                    left -= size
                J = _jordan_matrix(field, blocks, n)
                while True:
                    X = ExactMatrix.from_values(field, [[rng.randint(-2, 2) for _ in range(n)] for _ in range(n)])
                    if rank(X) == n:
                        break
                expected = JordanData.from_blocks(n, [(field.element(ev), size, 1) for ev, size in blocks])
                with self.subTest(field=str(field), blocks=blocks):
                    self.assertEqual(jordan_data(X @ J @ inverse(X), orders), expected)


class TestSimultaneousConjugacy(unittest.TestCase):
    def test_conjugate_tuple_is_recovered(self):
        A = [ExactMatrix.from_values(Q, [[1, 1], [0, 1]]), ExactMatrix.from_values(Q, [[1, 0], [-1, 1]])]
        X = ExactMatrix.from_values(Q, [[2, 1], [1, 1]])
        B = [X @ a @ inverse(X) for a in A]
        W = simultaneous_conjugacy(A, B)
        self.assertIsNotNone(W)
        for a, b in zip(A, B):
            self.assertEqual(W @ a, b @ W)

    def test_non_conjugate_tuples(self):
        A = [ExactMatrix.from_values(Q, [[1, 1], [0, 1]])]
        B = [ExactMatrix.identity(Q, 2)]
        self.assertIsNone(simultaneous_conjugacy(A, B))

    def test_conjugacy_over_small_finite_field(self):
        F3 = make_finite_field(3)
        A = [ExactMatrix.from_values(F3, [[1, 1], [0, 1]]), ExactMatrix.from_values(F3, [[2, 0], [0, 1]])]
        X = ExactMatrix.from_values(F3, [[1, 2], [1, 0]])
        B = [X @ a @ inverse(X) for a in A]
        self.assertIsNotNone(simultaneous_conjugacy(A, B))

    def assertWitness(self, W, A, B):
        self.assertIsNotNone(W)
        self.assertEqual(rank(W), W.rows)
        for a, b in zip(A, B):
            self.assertEqual(W @ a, b @ W)

    def test_identity_tuples_return_identity(self):
        for field in (Q, make_finite_field(7)):
            for n in (2, 3, 4):
                I = ExactMatrix.identity(field, n)
                with self.subTest(field=str(field), n=n):
                    self.assertEqual(simultaneous_conjugacy([I], [I]), I)

    def test_equal_non_scalar_tuples(self):
        for field in (Q, make_finite_field(7)):
            A = [ExactMatrix.diagonal(field, [1, 1, 2]), ExactMatrix.from_values(field, [[1, 1, 0], [0, 1, 0], [0, 0, 2]])]
            with self.subTest(field=str(field)):
                self.assertWitness(simultaneous_conjugacy(A, A), A, A)

    def test_swapped_diagonal_gives_permutation(self):
        A = [ExactMatrix.diagonal(Q, [1, 2])]
        B = [ExactMatrix.diagonal(Q, [2, 1])]
        self.assertEqual(simultaneous_conjugacy(A, B), ExactMatrix.from_values(Q, [[0, 1], [1, 0]]))

    def test_distinct_spectra_are_not_conjugate(self):
        self.assertIsNone(simultaneous_conjugacy([ExactMatrix.diagonal(Q, [1, 2])], [ExactMatrix.diagonal(Q, [1, 3])]))

    def test_repeated_eigenvalue_conjugated_over_f7(self):
        F7 = make_finite_field(7)
        A = [ExactMatrix.diagonal(F7, [1, 1, 2])]
        X = ExactMatrix.from_values(F7, [[1, 2, 3], [0, 1, 4], [5, 0, 1]])
        self.assertEqual(rank(X), 3)
        B = [X @ a @ inverse(X) for a in A]
        self.assertWitness(simultaneous_conjugacy(A, B), A, B)

    def test_random_conjugates_with_large_centralizer(self):
        rng = random.Random(11)
        for field in (Q, make_finite_field(7)):
            for _ in range(10):
                A = [ExactMatrix.diagonal(field, [1, 1, 1, 3]), ExactMatrix.diagonal(field, [2, 2, 1, 1])]
                while True:
                    X = ExactMatrix.from_values(field, [[rng.randint(-3, 3) for _ in range(4)] for _ in range(4)])
                    if rank(X) == 4:
                        break
                B = [X @ a @ inverse(X) for a in A]
                with self.subTest(field=str(field)):
                    self.assertWitness(simultaneous_conjugacy(A, B), A, B)

    def test_singular_solution_space_within_cap(self):
        F7 = make_finite_field(7)
        A = [ExactMatrix.from_values(F7, [[1, 1], [0, 1]])]
        B = [ExactMatrix.identity(F7, 2)]
        self.assertIsNone(simultaneous_conjugacy(A, B, enumeration_cap=4096))

    def test_undecided_beyond_enumeration_cap(self):
        F7 = make_finite_field(7)
        A = [ExactMatrix.from_values(F7, [[1, 1], [0, 1]])]
        B = [ExactMatrix.identity(F7, 2)]
        with self.assertRaises(ConjugacyUndecided) as ctx:
            simultaneous_conjugacy(A, B, enumeration_cap=10)
        self.assertEqual(ctx.exception.dimension, 2)
