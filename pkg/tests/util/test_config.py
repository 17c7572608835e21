import os
import unittest
from unittest.mock import patch

from src.utils.config import Settings, get_settings


class TestSettings(unittest.TestCase):
    def setUp(self):
        get_settings.cache_clear()

    def tearDown(self):
        get_settings.cache_clear()

    @patch("src.utils.config.load_dotenv")
    def test_defaults(self, _):
        with patch.dict(os.environ, {}, clear=True):
            self.assertEqual(get_settings(), Settings())

    @patch("src.utils.config.load_dotenv")
    def test_environment_overrides(self, _):
        env = {"MCONV_GROUP_BOUND": "50", "MCONV_LOG_LEVEL": "debug", "MCONV_INVOLUTION_MAX_RANK": "2"}
        with patch.dict(os.environ, env, clear=True):
            settings = get_settings()
        self.assertEqual(settings.group_bound, 50)
        self.assertEqual(settings.log_level, "DEBUG")
        self.assertEqual(settings.involution_max_rank, 2)

    @patch("src.utils.config.load_dotenv")
    def test_invalid_integer(self, _):
        with patch.dict(os.environ, {"MCONV_ENUMERATION_CAP": "many"}, clear=True):
            with self.assertRaises(ValueError):
                get_settings()

    @patch("src.utils.config.load_dotenv")
    def test_settings_are_read_once(self, mock_load):
        get_settings()
        get_settings()
        mock_load.assert_called_once()
