# tests/test_utils/test_time.py
# Unit tests for the time utility functions.

import time
import unittest

from utils.time import Stopwatch, format_duration, median_step_seconds


class TestTimeUtils(unittest.TestCase):
    """Test suite for time utility functions."""

    def test_format_duration_milliseconds(self):
        """Test formatting of sub-second durations."""
        self.assertEqual(format_duration(0.85), "850ms")
        self.assertEqual(format_duration(0), "0ms")

    def test_format_duration_seconds(self):
        """Test formatting of durations under a minute."""
        self.assertEqual(format_duration(12.34), "12.3s")
        self.assertEqual(format_duration(1), "1.0s")

    def test_format_duration_minutes(self):
        """Test formatting of durations under an hour."""
        self.assertEqual(format_duration(245), "4m 05s")
        self.assertEqual(format_duration(60), "1m 00s")

    def test_format_duration_hours(self):
        """Test formatting of durations of an hour or more."""
        self.assertEqual(format_duration(3720), "1h 02m")

    def test_format_duration_negative(self):
        """Test that negative durations are not formatted."""
        self.assertEqual(format_duration(-1), "N/A")

    def test_stopwatch(self):
        """Test that the stopwatch measures a sleep."""
        with Stopwatch() as watch:
            time.sleep(0.01)
        self.assertGreaterEqual(watch.seconds, 0.009)

    def test_median_step_seconds(self):
        """Test warm-up and timed call counts."""
        calls = []
        median = median_step_seconds(lambda: calls.append(1), warmup=3, timed=5)
        self.assertEqual(len(calls), 8)
        self.assertGreaterEqual(median, 0.0)

    def test_median_step_seconds_needs_timed_steps(self):
        """Test that zero timed steps are rejected."""
        with self.assertRaises(ValueError):
            median_step_seconds(lambda: None, warmup=1, timed=0)


if __name__ == '__main__':
    unittest.main()
