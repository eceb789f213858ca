"""Tests for services/logging_service.py: structured run events."""
import json
import logging
import os
import sys
from unittest.mock import patch

from services.logging_service import (
    log_check_result,
    log_run_event,
    log_stage,
    setup_logging,
)


class TestSetupLogging:
    """Tests for logging initialization."""

    def test_local_dev_setup(self):
        """Development mode uses standard Python logging."""
        with patch.dict(os.environ, {"ENV": "development"}, clear=False):
            setup_logging()

    def test_explicit_level(self):
        with patch.dict(os.environ, {"ENV": "development", "LOG_LEVEL": "ERROR"}):
            setup_logging("debug")
        assert logging.getLogger("replica_lab").level == logging.DEBUG
        setup_logging("info")

    def test_production_falls_back(self, caplog):
        """Production mode falls back to local logging when Cloud Logging is unavailable."""
        with patch.dict(os.environ, {"ENV": "production"}, clear=False), patch.dict(sys.modules, {"google.cloud": None}):
            with caplog.at_level(logging.WARNING, logger="replica_lab"):
                setup_logging()
        assert "Cloud Logging init failed" in caplog.text


class TestLogRunEvent:
    """Tests for log_run_event."""

    def test_event_structure(self, caplog):
        with caplog.at_level(logging.INFO, logger="replica_lab"):
            log_run_event("run_started", {"subcommand": "oracle"})

        assert len(caplog.records) == 1
        event = json.loads(caplog.records[0].message)
        assert event["event_type"] == "run_started"
        assert "timestamp" in event
        assert event["component"] == "replica_lab"
        assert event["metadata"]["subcommand"] == "oracle"

    def test_event_without_metadata(self, caplog):
        with caplog.at_level(logging.INFO, logger="replica_lab"):
            log_run_event("run_completed")

        event = json.loads(caplog.records[0].message)
        assert event["event_type"] == "run_completed"
        assert "metadata" not in event

    def test_environment(self, caplog):
        with patch.dict(os.environ, {"ENV": "staging"}):
            with caplog.at_level(logging.INFO, logger="replica_lab"):
                log_run_event("run_started")

        assert json.loads(caplog.records[0].message)["environment"] == "staging"


class TestLogStage:
    """Tests for log_stage."""

    def test_successful_stage(self, caplog):
        with caplog.at_level(logging.INFO, logger="replica_lab"):
            log_stage("sum_rule.t_integral", 12.345, True)

        event = json.loads(caplog.records[0].message)
        assert event["stage"] == "sum_rule.t_integral"
        assert event["duration_ms"] == 12.35
        assert event["success"] is True
        assert "error" not in event
        assert caplog.records[0].levelno == logging.INFO

    def test_failed_stage(self, caplog):
        with caplog.at_level(logging.ERROR, logger="replica_lab"):
            log_stage("oracle.enumerate", 5.0, False, "enumeration cap exceeded")

        event = json.loads(caplog.records[0].message)
        assert event["success"] is False
        assert event["error"] == "enumeration cap exceeded"
        assert caplog.records[0].levelno == logging.ERROR

    def test_error_truncation(self, caplog):
        with caplog.at_level(logging.ERROR, logger="replica_lab"):
            log_stage("oracle.enumerate", 1.0, False, "x" * 1000)

        event = json.loads(caplog.records[0].message)
        assert len(event["error"]) == 500


class TestLogCheckResult:
    """Tests for log_check_result."""

    def test_check_event(self, caplog):
        with caplog.at_level(logging.INFO, logger="replica_lab"):
            log_check_result("nishimori", True, 0.001, 0.002)

        event = json.loads(caplog.records[0].message)
        assert event["event_type"] == "check_completed"
        assert event["metadata"] == {"check": "nishimori", "passed": True, "residual": 0.001, "stderr": 0.002}
