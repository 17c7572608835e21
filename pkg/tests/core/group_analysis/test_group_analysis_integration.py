import random
import unittest

from src.core.fields import make_finite_field
from src.core.group_analysis import burnside_dimension, has_invariant_subspace_exhaustive
from src.core.linalg import ExactMatrix


class TestBurnsideAgainstExhaustiveSearch(unittest.TestCase):
    def test_random_generator_sets_over_f3(self):
        rng = random.Random(3)
        F3 = make_finite_field(3)
        for _ in range(100):
            n = rng.randint(1, 3)
            gens = [
                ExactMatrix.from_values(F3, [[rng.randrange(3) for _ in range(n)] for _ in range(n)])
                for _ in range(rng.randint(1, 2))
            ]
            absolutely_irreducible = burnside_dimension(gens) == n * n
            reducible = has_invariant_subspace_exhaustive(gens, extension_degree=n)
            self.assertEqual(absolutely_irreducible, not reducible)
