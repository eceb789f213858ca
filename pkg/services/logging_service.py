"""Logging setup and structured run events for replica_lab.

Uses Google Cloud Logging when ``ENV=production`` and the client library is
available; otherwise standard Python logging to stderr.
"""
import json
import logging
import os
import sys
from datetime import datetime, timezone

logger = logging.getLogger("replica_lab")


def _resolve_level(level: str | None) -> int:
    name = (level or os.getenv("LOG_LEVEL", "INFO")).upper()
    return getattr(logging, name, logging.INFO)


def setup_logging(level: str | None = None):
    """Initialize logging based on environment.

    Reports are written to stdout, so local records always go to stderr.

    Args:
        level: Level name; ``LOG_LEVEL`` (default INFO) when omitted.
    """
    numeric = _resolve_level(level)
    logging.getLogger("replica_lab").setLevel(numeric)

    if os.getenv("ENV") != "production":
        _setup_local_logging(numeric)
        logger.debug("📝 Local logging initialized")
        return

    try:
        from google.cloud import logging as cloud_logging

        cloud_logging.Client().setup_logging(log_level=numeric)
        logger.info("✅ Cloud Logging initialized (production mode)")
    except Exception as e:
        _setup_local_logging(numeric)
        logger.warning(f"Cloud Logging init failed, using local: {e}")


def _setup_local_logging(numeric: int):
    logging.basicConfig(
        level=numeric,
        stream=sys.stderr,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )


def log_run_event(event_type: str, metadata: dict | None = None):
    """Log a structured run event.

    Args:
        event_type: run_started, run_completed, check_completed, ...
        metadata: Additional fields, serialized with ``default=str``.
    """
    event = {
        "event_type": event_type,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "component": "replica_lab",
        "environment": os.getenv("ENV", "development"),
    }
    if metadata:
        event["metadata"] = metadata

    logger.info(json.dumps(event, ensure_ascii=False, default=str))


def log_stage(stage: str, duration_ms: float, success: bool, error: str | None = None):
    """Log the timing of one computation stage.

    Args:
        stage: Stage name (e.g. ``sum_rule.t_integral``).
        duration_ms: Wall time in milliseconds.
        success: Whether the stage completed.
        error: Error message if it did not.
    """
    event = {
        "event_type": "stage",
        "stage": stage,
        "duration_ms": round(duration_ms, 2),
        "success": success,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    if error:
        event["error"] = str(error)[:500]

    if success:
        logger.info(json.dumps(event, ensure_ascii=False, default=str))
    else:
        logger.error(json.dumps(event, ensure_ascii=False, default=str))


def log_check_result(check: str, passed: bool, residual: float, stderr: float):
    """Log the outcome of a verification."""
    log_run_event("check_completed", {
        "check": check,
        "passed": passed,
        "residual": residual,
        "stderr": stderr,
    })
