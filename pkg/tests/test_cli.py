import io
import json
import shutil
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

import pandas as pd

from src.cli import cli_main
from src.core.fields import make_finite_field
from src.core.linalg import ExactMatrix, inverse
from src.core.tuples import MonodromyTuple, deserialize, serialize


class TestCli(unittest.TestCase):
    def setUp(self):
        self.temp_dir = Path(tempfile.mkdtemp())

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def run_cli(self, *argv):
        out, err = io.StringIO(), io.StringIO()
        with patch("sys.stdout", out), patch("sys.stderr", err):
            status = cli_main(list(argv))
        return status, out.getvalue(), err.getvalue()

    def write_rank_one_tuple(self):
        doc = self.temp_dir / "c.json"
        status, _, _ = self.run_cli("rank-one", "--values", "2,3,-1/6,-1", "-o", str(doc))
        self.assertEqual(status, 0)
        values = json.loads(doc.read_text())["scalars"]
        entries = [{"field": {"kind": "rational"}, "rows": 1, "cols": 1, "entries": [[v]]} for v in values]
        path = self.temp_dir / "t.json"
        path.write_text(json.dumps({"field": {"kind": "rational"}, "n": 1, "r": 3, "entries": entries}))
        return path

    def write_sl2_tuple(self):
        F5 = make_finite_field(5)
        A = ExactMatrix.from_values(F5, [[1, 1], [0, 1]])
        B = ExactMatrix.from_values(F5, [[1, 0], [1, 1]])
        path = self.temp_dir / "sl2.json"
        path.write_bytes(serialize(MonodromyTuple.from_matrices([A, B, inverse(A @ B)])))
        return path

    def test_construct_writes_tuple(self):
        path = self.temp_dir / "T.json"
        status, _, _ = self.run_cli("construct", "--m", "4", "--r", "9", "-o", str(path))
        self.assertEqual(status, 0)
        T = deserialize(path.read_bytes())
        self.assertEqual((T.n, T.r), (2, 9))

    def test_construct_condition_a_exits_two(self):
        status, _, err = self.run_cli("construct", "--m", "4", "--r", "8")
        self.assertEqual(status, 2)
        self.assertIn("error:", err)

    def test_convolve_rank_one_example(self):
        source = self.write_rank_one_tuple()
        target = self.temp_dir / "mc.json"
        status, _, _ = self.run_cli("convolve", str(source), "--lambda", "-1", "-o", str(target))
        self.assertEqual(status, 0)
        self.assertEqual(deserialize(target.read_bytes()).n, 2)

    def test_convolve_with_trivial_character(self):
        status, _, err = self.run_cli("convolve", str(self.write_rank_one_tuple()), "--lambda", "1")
        self.assertEqual(status, 2)
        self.assertIn("lambda", err)

    def test_tensor_accepts_either_order(self):
        T = self.temp_dir / "T.json"
        c = self.temp_dir / "n1.json"
        self.run_cli("construct", "--m", "4", "--r", "9", "-o", str(T))
        self.run_cli("rank-one", "--pattern", "N1", "--r", "9", "-o", str(c))
        out = self.temp_dir / "twisted.json"
        status, _, _ = self.run_cli("tensor", str(c), str(T), "-o", str(out))
        self.assertEqual(status, 0)
        self.assertEqual(deserialize(out.read_bytes()).n, 2)

    def test_selfcheck_exit_status(self):
        status, out, _ = self.run_cli("selfcheck", str(self.write_rank_one_tuple()))
        self.assertEqual(status, 0)
        self.assertIn("involution", out)

    def test_analyze_writes_census_csv(self):
        csv_path = self.temp_dir / "census.csv"
        status, out, _ = self.run_cli("analyze", str(self.write_sl2_tuple()), "--csv", str(csv_path))
        self.assertEqual(status, 0)
        self.assertEqual(json.loads(out)["eigenvalue_orders"], [1, 2, 4])
        self.assertEqual(len(json.loads(out)["jordan"]), 3)
        self.assertEqual(len(pd.read_csv(csv_path)), 3)

    def test_reduce_to_f5(self):
        T = self.temp_dir / "T.json"
        R = self.temp_dir / "R.json"
        self.run_cli("construct", "--m", "4", "--r", "9", "-o", str(T))
        status, _, _ = self.run_cli("reduce", str(T), "--ell", "5", "-o", str(R))
        self.assertEqual(status, 0)
        self.assertEqual(deserialize(R.read_bytes()).field, make_finite_field(5))

    def test_certify_failing_verdict(self):
        status, out, _ = self.run_cli("certify", str(self.write_sl2_tuple()), "--mode", "sl")
        self.assertEqual(status, 1)
        self.assertFalse(json.loads(out)["verdict"])

    def test_group_order(self):
        status, out, _ = self.run_cli("group-order", str(self.write_sl2_tuple()))
        self.assertEqual(status, 0)
        self.assertEqual(json.loads(out)["order"], 120)

    def test_group_order_beyond_bound(self):
        status, out, _ = self.run_cli("group-order", str(self.write_sl2_tuple()), "--bound", "50")
        self.assertEqual(status, 0)
        self.assertEqual(json.loads(out)["order"], "exceeds bound")

    def test_plan(self):
        status, out, _ = self.run_cli("plan", "--n", "28", "--q", "5")
        self.assertEqual(status, 0)
        self.assertEqual(json.loads(out)["family"], 4)

    def test_pipeline_hypothesis_violation(self):
        status, _, err = self.run_cli("pipeline", "--family", "1", "--m", "4", "--r", "8")
        self.assertEqual(status, 2)
        self.assertIn("phi", err)

    def test_usage_error(self):
        status, _, _ = self.run_cli("construct", "--m", "4")
        self.assertEqual(status, 2)

    def test_missing_input_file(self):
        status, _, err = self.run_cli("analyze", str(self.temp_dir / "absent.json"))
        self.assertEqual(status, 2)
        self.assertIn("error:", err)
