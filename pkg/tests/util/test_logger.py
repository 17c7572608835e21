import logging
import sys
import unittest
from unittest.mock import patch

from src.utils.config import Settings
from src.utils.logger import LOG_FORMAT, get_logger


class TestLogger(unittest.TestCase):
    def test_handler_attached_once(self):
        first = get_logger("mconv.tests.once")
        second = get_logger("mconv.tests.once")
        self.assertIs(first, second)
        self.assertEqual(len(second.handlers), 1)

    def test_format_and_stream(self):
        handler = get_logger("mconv.tests.format").handlers[0]
        self.assertIsInstance(handler, logging.StreamHandler)
        self.assertIs(handler.stream, sys.stderr)
        self.assertEqual(handler.formatter._fmt, LOG_FORMAT)

    @patch("src.utils.logger.get_settings", return_value=Settings(log_level="DEBUG"))
    def test_level_from_settings(self, _):
        self.assertEqual(get_logger("mconv.tests.debug").level, logging.DEBUG)

    @patch("src.utils.logger.get_settings", return_value=Settings(log_level="LOUD"))
    def test_unknown_level_falls_back_to_info(self, _):
        self.assertEqual(get_logger("mconv.tests.unknown").level, logging.INFO)
