import logging

from app.utils.setup_logger import (
    RunContextFilter,
    bind_run_context,
    get_run_context,
    setup_logger,
)


def _record(**extra):
    record = logging.LogRecord("tests", logging.INFO, __file__, 1, "hello", None, None)
    for key, value in extra.items():
        setattr(record, key, value)
    return record


def test_bind_run_context_stamps_records():
    previous = get_run_context()
    try:
        bind_run_context("goe-curve", 5)
        record = _record()
        assert RunContextFilter().filter(record) is True
        assert (record.command, record.seed) == ("goe-curve", 5)
    finally:
        bind_run_context(previous["command"], previous["seed"])


def test_filter_keeps_explicit_attributes():
    record = _record(command="render")
    RunContextFilter().filter(record)
    assert record.command == "render"


def test_setup_logger_returns_named_logger():
    assert setup_logger("app.tests.named").name == "app.tests.named"
