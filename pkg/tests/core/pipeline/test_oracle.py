import unittest

from src.core.errors import HypothesisViolation
from src.core.fields import apply_residue, make_residue_map
from src.core.linalg import JordanData
from src.core.oracle import (
    check_hypotheses,
    compare_oracle,
    family_rank,
    instantiate_oracle,
    map_oracle,
    oracle_field,
    plan_for_rank,
    theorem_bound,
)


class TestOracleTables(unittest.TestCase):
    def test_every_entry_has_the_family_rank(self):
        for family in (1, 2, 3, 4):
            table = instantiate_oracle(family, 4, 9)
            self.assertEqual(len(table), 10)
            self.assertTrue(all(jd.dim == family_rank(family, 9) for jd in table))

    def test_family_one_unipotent_entry(self):
        one = oracle_field(4).one
        entry = instantiate_oracle(1, 4, 9)[6]
        self.assertEqual(entry, JordanData.from_blocks(27, [(one, 2, 12), (one, 3, 1)]))

    def test_family_one_reflection_entry(self):
        one = oracle_field(4).one
        entry = instantiate_oracle(1, 4, 9)[7]
        self.assertEqual(entry, JordanData.from_blocks(27, [(one, 1, 1), (-one, 1, 26)]))

    def test_family_two_entry_r_minus_two(self):
        one = oracle_field(4).one
        entry = instantiate_oracle(2, 4, 9)[6]
        self.assertEqual(entry, JordanData.from_blocks(25, [(one, 3, 1), (one, 2, 10), (one, 1, 2)]))

    def test_family_three_infinity_is_minus_one(self):
        one = oracle_field(4).one
        entry = instantiate_oracle(3, 4, 9)[9]
        self.assertEqual(entry, JordanData.from_blocks(26, [(-one, 1, 26)]))

    def test_m6_instantiation_uses_sixth_roots(self):
        table = instantiate_oracle(1, 6, 10)
        self.assertEqual(len(table), 11)
        orders = {b.eigenvalue.order() for b in table[0].blocks}
        self.assertEqual(orders, {1, 6})

    def test_tables_are_selfdual(self):
        for family in (1, 2, 3, 4):
            self.assertTrue(all(jd.is_selfdual() for jd in instantiate_oracle(family, 6, 10)))

    def test_mapping_through_residue_map(self):
        rmap = make_residue_map(oracle_field(4), 5)
        mapped = map_oracle(instantiate_oracle(1, 4, 9), lambda x: apply_residue(rmap, x))
        self.assertEqual(mapped[0].blocks[0].eigenvalue.owner, rmap.target)
        self.assertEqual(sum(b.multiplicity for b in mapped[0].blocks), 27)

    def test_compare_reports_mismatch(self):
        table = instantiate_oracle(4, 4, 9)
        rows = compare_oracle(table, table[:-1] + [table[0]])
        self.assertTrue(all(row["match"] for row in rows[:-1]))
        self.assertFalse(rows[-1]["match"])


class TestHypotheses(unittest.TestCase):
    def test_ranks(self):
        self.assertEqual([family_rank(f, 9) for f in (1, 2, 3, 4)], [27, 25, 26, 24])

    def test_r_too_small(self):
        with self.assertRaises(HypothesisViolation):
            check_hypotheses(1, 4, 8)

    def test_m_must_be_even(self):
        with self.assertRaises(HypothesisViolation):
            check_hypotheses(1, 5, 20)

    def test_unknown_family(self):
        with self.assertRaises(HypothesisViolation):
            family_rank(5, 9)

    def test_theorem_bound(self):
        self.assertEqual(theorem_bound(5), 27)
        self.assertEqual(theorem_bound(13), 43)

    def test_plan_picks_family_by_residue(self):
        self.assertEqual(plan_for_rank(28, 5)["family"], 4)
        self.assertEqual(plan_for_rank(28, 5)["r"], 10)
        self.assertEqual(plan_for_rank(29, 5)["family"], 2)
        self.assertEqual(plan_for_rank(30, 5)["family"], 3)
        self.assertEqual(plan_for_rank(31, 5)["family"], 1)

    def test_plan_below_bound(self):
        with self.assertRaises(HypothesisViolation):
            plan_for_rank(27, 5)
