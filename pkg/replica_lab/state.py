"""Run configuration shared by the CLI subcommands."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from config import settings
from config.settings import ConfigError
from replica_lab.prior import Prior
from replica_lab.rs_potential import ModelSpec, model_label


@dataclass(frozen=True)
class RunConfig:
    """Validated inputs of one CLI run.

    Subcommands read only the fields they need; the rest keep their defaults.
    """

    # ── Problem ────────────────────────────────────────────────────────
    model: ModelSpec
    prior: Prior
    prior_spec: Any = "rademacher"       # echo of the user-facing prior value

    # ── Reproducibility ────────────────────────────────────────────────
    seed: int = settings.SEED
    threads: int = settings.THREADS

    # ── Numerics ───────────────────────────────────────────────────────
    quad_order: int = settings.QUAD_ORDER
    t_quad_order: int = settings.T_QUAD_ORDER
    grid: int = settings.GRID
    tol: float = settings.GOLDEN_TOL

    # ── Finite-size experiments ────────────────────────────────────────
    samples: int = 2000
    n: int = 4
    K: int = 8
    epsilon: float = 0.0

    # ── Acceptance / output ────────────────────────────────────────────
    strict: bool = False
    output_path: str | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        checks = [
            (self.seed >= 0, f"seed must be nonnegative, got {self.seed}"),
            (self.threads >= 1, f"threads must be >= 1, got {self.threads}"),
            (self.quad_order >= 2, f"quad_order must be >= 2, got {self.quad_order}"),
            (self.t_quad_order >= 2, f"t_quad_order must be >= 2, got {self.t_quad_order}"),
            (self.grid >= 64, f"grid must be >= 64, got {self.grid}"),
            (self.tol > 0, f"tol must be positive, got {self.tol}"),
            (self.samples >= 2, f"samples must be >= 2, got {self.samples}"),
            (self.n >= 1, f"n must be >= 1, got {self.n}"),
            (self.K >= 1, f"K must be >= 1, got {self.K}"),
            (self.epsilon >= 0, f"epsilon must be nonnegative, got {self.epsilon}"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)

    @property
    def sigmas(self) -> float:
        return settings.STRICT_SIGMAS if self.strict else settings.ACCEPTANCE_SIGMAS

    def echo(self) -> dict[str, Any]:
        """Inputs as they appear in a report; enough to reproduce the run."""
        out = {
            "model": model_label(self.model),
            "prior": self.prior_spec if isinstance(self.prior_spec, (str, dict)) else {
                "atoms": list(self.prior.atoms), "weights": list(self.prior.weights),
            },
            "seed": self.seed,
            "quad_order": self.quad_order,
            "t_quad_order": self.t_quad_order,
            "grid": self.grid,
            "tol": self.tol,
            "samples": self.samples,
            "n": self.n,
            "K": self.K,
            "epsilon": self.epsilon,
            "strict": self.strict,
        }
        out.update(self.extra)
        return out
