from unittest.mock import patch

from utils.logger import log_debug, log_error, log_info, log_warning


class TestLogger:
    """Tests for the logging helpers"""

    @patch("utils.logger.logging")
    def test_levels(self, mock_logging):
        """Each helper forwards to the matching logging level."""
        log_info("[TEST] info")
        log_error("[TEST] error")
        log_warning("[TEST] warning")
        log_debug("[TEST] debug")
        mock_logging.info.assert_called_once_with("[TEST] info")
        mock_logging.error.assert_called_once_with("[TEST] error")
        mock_logging.warning.assert_called_once_with("[TEST] warning")
        mock_logging.debug.assert_called_once_with("[TEST] debug")
