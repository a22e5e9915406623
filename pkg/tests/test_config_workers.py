import logging
import time

import numpy as np
import pytest

from zbstein.core.config import Settings, override_settings, settings
from zbstein.core.logging import configure_logging
from zbstein.core.workers import make_rng, run_ordered, worker_count


def test_settings_read_the_environment(monkeypatch):
    monkeypatch.setenv("ZB_THREADS", "3")
    monkeypatch.setenv("ZB_ENUMERATION_CAP", "500")
    fresh = Settings()
    assert fresh.threads == 3
    assert fresh.enumeration_cap == 500


def test_settings_hold_only_tunables():
    assert not {"app_name", "app_version", "debug"} & set(Settings.model_fields)
    assert {"log_level", "threads", "enumeration_cap", "identity_tolerance"} <= set(Settings.model_fields)


def test_override_settings_restores_values():
    before = settings.identity_tolerance
    with override_settings(identity_tolerance=1e-6, mass_tolerance=None):
        assert settings.identity_tolerance == 1e-6
    assert settings.identity_tolerance == before


def test_override_settings_restores_after_errors():
    before = settings.threads
    with pytest.raises(RuntimeError):
        with override_settings(threads=8):
            raise RuntimeError("boom")
    assert settings.threads == before


def test_streams_are_reproducible():
    assert make_rng(7, 1).random() == make_rng(7, 1).random()
    assert make_rng(7, 1).random() != make_rng(7, 2).random()
    assert not np.array_equal(make_rng(7).random(4), make_rng(8).random(4))


def test_worker_count_is_capped():
    with override_settings(threads=4):
        assert worker_count() == 4
        assert worker_count(16) == 4
        assert worker_count(2) == 2
        assert worker_count(0) == 1


def test_run_ordered_keeps_index_order():
    def slow_square(i, x):
        time.sleep(0.001 * (10 - i))
        return i, x * x

    with override_settings(threads=4):
        results = run_ordered(slow_square, list(range(10)))
    assert results == [(i, i * i) for i in range(10)]


def test_parallel_and_serial_runs_agree():
    def draw(i, n):
        return make_rng(3, n).standard_normal(5).tolist()

    serial = run_ordered(draw, [8, 16, 32])
    with override_settings(threads=3):
        parallel = run_ordered(draw, [8, 16, 32])
    assert serial == parallel


def test_configure_logging_sets_the_package_level():
    configure_logging("DEBUG")
    assert logging.getLogger("zbstein").getEffectiveLevel() == logging.DEBUG
    configure_logging("WARNING")
    assert logging.getLogger("zbstein").getEffectiveLevel() == logging.WARNING
