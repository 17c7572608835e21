import io
import json
import shutil
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

from src.cli import cli_main


class TestCliPipeline(unittest.TestCase):
    def setUp(self):
        self.temp_dir = Path(tempfile.mkdtemp())

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_family_one_over_f5(self):
        report = self.temp_dir / "r.json"
        with patch("sys.stderr", io.StringIO()):
            status = cli_main(["pipeline", "--family", "1", "--m", "4", "--r", "9", "--q", "5", "--report", str(report)])
        self.assertEqual(status, 0)
        self.assertTrue(json.loads(report.read_text())["verdict"])

    def test_batch_writes_one_report_per_entry(self):
        grid = self.temp_dir / "grid.json"
        grid.write_text(json.dumps([{"family": 3, "m": 4, "r": 9}, {"family": 4, "m": 4, "r": 9}]))
        reports = self.temp_dir / "reports"
        with patch("sys.stdout", io.StringIO()):
            status = cli_main(["batch", "--config", str(grid), "--report-dir", str(reports)])
        self.assertEqual(status, 0)
        self.assertEqual(sorted(p.name for p in reports.iterdir()), ["family3_m4_r9.json", "family4_m4_r9.json"])
