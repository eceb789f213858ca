"""Centralized configuration for replica_lab.

Defaults come from the environment (a local ``.env`` is honoured through
python-dotenv); a TOML run file may override them and explicit CLI flags
override both.
"""
from __future__ import annotations

import logging
import os

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any

from dotenv import load_dotenv

logger = logging.getLogger("replica_lab.config")

load_dotenv()

ENV_PREFIX = "REPLICA_LAB_"


class ConfigError(ValueError):
    """Raised when a run file or a numeric setting is invalid."""
    pass


def get_setting(name: str, default: str = "") -> str:
    """Read a ``REPLICA_LAB_<NAME>`` environment variable.

    Args:
        name: Setting name, case-insensitive; hyphens map to underscores.
        default: Value returned when the variable is not set.

    Returns:
        The raw string value or ``default``.
    """
    key = ENV_PREFIX + name.upper().replace("-", "_")
    return os.environ.get(key, default)


def _get_int(name: str, default: int) -> int:
    raw = get_setting(name, "")
    if not raw:
        return default
    try:
        return int(raw)
    except ValueError as e:
        raise ConfigError(f"{ENV_PREFIX}{name} must be an integer, got {raw!r}") from e


def _get_float(name: str, default: float) -> float:
    raw = get_setting(name, "")
    if not raw:
        return default
    try:
        return float(raw)
    except ValueError as e:
        raise ConfigError(f"{ENV_PREFIX}{name} must be a number, got {raw!r}") from e


# ---------------------------------------------------------------------------
# Reproducibility
# ---------------------------------------------------------------------------

SEED = _get_int("SEED", 7)
THREADS = _get_int("THREADS", 1)

# ---------------------------------------------------------------------------
# Numerics
# ---------------------------------------------------------------------------

QUAD_ORDER = _get_int("QUAD_ORDER", 80)          # Gauss–Hermite nodes for scalar channels
T_QUAD_ORDER = _get_int("T_QUAD_ORDER", 16)      # Gauss–Legendre nodes for t-integrals
GRID = _get_int("GRID", 256)                     # dense scan before golden-section refinement
GOLDEN_TOL = _get_float("GOLDEN_TOL", 1e-8)

# Exact enumeration refuses beyond this many configurations.
ENUMERATION_CAP = _get_int("ENUMERATION_CAP", 2_000_000)

# Disorder quadrature: tensor-product Gauss–Hermite over every noise coordinate.
QUADRATURE_MAX_DIMS = _get_int("QUADRATURE_MAX_DIMS", 5)
QUADRATURE_NODE_CAP = _get_int("QUADRATURE_NODE_CAP", 500_000)  # signal atoms x noise nodes

# Transition detection, as fractions of E[S^2].
JUMP_FRACTION = _get_float("JUMP_FRACTION", 0.05)
SMALLNESS_FRACTION = _get_float("SMALLNESS_FRACTION", 1e-3)

# ---------------------------------------------------------------------------
# Acceptance
# ---------------------------------------------------------------------------

ACCEPTANCE_SIGMAS = _get_float("ACCEPTANCE_SIGMAS", 3.0)
STRICT_SIGMAS = _get_float("STRICT_SIGMAS", 2.0)
# O(1/n) slack constant for finite-size comparisons against limiting formulas.
FINITE_SIZE_SLACK = _get_float("FINITE_SIZE_SLACK", 0.5)

# ---------------------------------------------------------------------------
# App
# ---------------------------------------------------------------------------

APP_NAME = "replica_lab"
VERSION = "0.3.0"


# ---------------------------------------------------------------------------
# Run files
# ---------------------------------------------------------------------------

CONFIG_KEYS = frozenset({
    "model", "prior", "delta", "p", "alpha", "seed", "quad_order", "t_quad_order",
    "samples", "n", "K", "epsilon", "threads", "strict", "grid", "tol",
    "delta_min", "delta_max", "steps", "method", "order", "out",
})


def load_config_file(path: str | Path) -> dict[str, Any]:
    """Load a TOML run file into a flat dict.

    Tables are only allowed for ``prior`` (``{atoms = [...], weights = [...]}``).

    Args:
        path: Location of the TOML file.

    Returns:
        Mapping of config keys to values.

    Raises:
        ConfigError: If the file cannot be read or contains unknown keys.
    """
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e

    unknown = sorted(set(data) - CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys in {path}: {', '.join(unknown)}")

    prior = data.get("prior")
    if prior is not None and not isinstance(prior, (str, dict)):
        raise ConfigError("prior must be a name or a table {atoms, weights}")

    logger.debug(f"Loaded {len(data)} settings from {path}")
    return dict(data)
