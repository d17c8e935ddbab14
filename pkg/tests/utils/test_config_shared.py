import os
import unittest
from unittest.mock import patch

from app import config_shared
from app.utils.config_utils import get_config_bool, get_config_int, get_config_value
from app.utils.errors import ConfigError


class TestConfigShared(unittest.TestCase):
    def setUp(self):
        config_shared.clear_config_cache()

    def tearDown(self):
        config_shared.clear_config_cache()

    @patch.dict(os.environ, {}, clear=True)
    def test_get_config_value_default(self):
        self.assertEqual(get_config_value("NON_EXISTENT_KEY", "default"), "default")

    @patch.dict(os.environ, {"BLANK_KEY": "   "})
    def test_get_config_value_blank_uses_default(self):
        self.assertEqual(get_config_value("BLANK_KEY", "fallback"), "fallback")

    @patch.dict(os.environ, {"TEST_BOOL": "true"})
    def test_get_config_bool_true(self):
        self.assertTrue(get_config_bool("TEST_BOOL", False))

    @patch.dict(os.environ, {"TEST_BOOL": "off"})
    def test_get_config_bool_false(self):
        self.assertFalse(get_config_bool("TEST_BOOL", True))

    @patch.dict(os.environ, {"SOME_INT": "12"})
    def test_get_config_int(self):
        self.assertEqual(get_config_int("SOME_INT", 3), 12)
        self.assertEqual(get_config_int("MISSING_INT", 3), 3)
        with self.assertRaises(ConfigError):
            get_config_int("SOME_INT", 3, minimum=20)

    @patch.dict(os.environ, {}, clear=True)
    def test_defaults(self):
        self.assertEqual(config_shared.get_log_level(), "INFO")
        self.assertEqual(config_shared.get_log_format(), "text")
        self.assertFalse(config_shared.get_structured_logging())
        self.assertEqual(config_shared.get_log_file(), "")
        self.assertEqual(config_shared.get_output_dir(), "output")
        self.assertEqual(config_shared.get_default_seed(), 0)
        self.assertEqual(config_shared.get_workers(), 1)
        self.assertTrue(config_shared.get_metrics_enabled())

    @patch.dict(os.environ, {"LOG_LEVEL": "debug", "LOG_FORMAT": "JSON", "WORKERS": "4"})
    def test_values_from_env(self):
        self.assertEqual(config_shared.get_log_level(), "DEBUG")
        self.assertEqual(config_shared.get_log_format(), "json")
        self.assertEqual(config_shared.get_workers(), 4)

    @patch.dict(os.environ, {"DEFAULT_SEED": "abc"})
    def test_invalid_seed(self):
        with self.assertRaises(ConfigError):
            config_shared.get_default_seed()

    @patch.dict(os.environ, {"DEFAULT_SEED": "-3"})
    def test_negative_seed(self):
        with self.assertRaises(ConfigError):
            config_shared.get_default_seed()

    @patch.dict(os.environ, {"WORKERS": "0"})
    def test_invalid_workers(self):
        with self.assertRaises(ConfigError):
            config_shared.get_workers()

    def test_cache_is_cleared(self):
        with patch.dict(os.environ, {"OUTPUT_DIR": "first"}):
            self.assertEqual(config_shared.get_output_dir(), "first")
        with patch.dict(os.environ, {"OUTPUT_DIR": "second"}):
            self.assertEqual(config_shared.get_output_dir(), "first")
            config_shared.clear_config_cache()
            self.assertEqual(config_shared.get_output_dir(), "second")


if __name__ == "__main__":
    unittest.main()
