"""Optional bounded residual on top of the override score.

The residual is a signed per-question correction, clipped and scaled so its
influence can never exceed a configured budget, and optionally attenuated
by a permission score in [0, 1]. Residual and permission values are
injected from a sidecar file or a simulator; no model training happens
here. Also provides the held-out log-ratio target and weighted Huber loss
used to fit such residuals externally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

from .delta import DeltaDecision, with_residual_term


@dataclass(frozen=True)
class ResidualConfig:
    scale: float = 0.0  # residual scale; 0 disables the residual exactly
    clip_bound: float = 1.0
    use_permission: bool = True  # False treats the permission score as 1

    def __post_init__(self) -> None:
        if self.scale < 0:
            raise ValueError("scale must be non-negative")
        if self.clip_bound <= 0:
            raise ValueError("clip_bound must be positive")


@dataclass(frozen=True)
class ResidualInput:
    residual: float  # signed residual prediction
    permission: float = 1.0  # reliability gate in [0, 1]

    def __post_init__(self) -> None:
        if not 0.0 <= self.permission <= 1.0:
            raise ValueError(f"permission must lie in [0, 1], got {self.permission}")


def delta_enc(
    base: DeltaDecision, inp: ResidualInput, cfg: ResidualConfig
) -> DeltaDecision:
    """Add the clipped, gated residual to a base decision and re-sign it.

    The added term is scale * gate * clip(residual, +-clip_bound), so the
    score moves by at most scale * clip_bound. With scale 0 the base
    decision is returned unchanged, bit for bit.
    """
    if cfg.scale == 0.0:
        return base
    gate = inp.permission if cfg.use_permission else 1.0
    clipped = min(max(inp.residual, -cfg.clip_bound), cfg.clip_bound)
    return with_residual_term(base, cfg.scale * gate * clipped)


def heldout_target(heldout_count: int, heldout_dominant: int, alpha: float = 1.0) -> float:
    """Smoothed log ratio of held-out support: challenger over dominant."""
    if heldout_count < 0 or heldout_dominant < 0:
        raise ValueError("held-out counts must be non-negative")
    return math.log((heldout_count + alpha) / (heldout_dominant + alpha))


def huber(x: float, delta: float = 1.0) -> float:
    """Standard Huber penalty: quadratic inside +-delta, linear outside."""
    ax = abs(x)
    if ax <= delta:
        return 0.5 * ax * ax
    return delta * (ax - 0.5 * delta)


def residual_loss(
    predictions: Iterable[tuple[float, float, float]], huber_delta: float = 1.0
) -> float:
    """Weighted Huber loss over (residual, target, weight) triples.

    Weights follow the held-out top-pair-mass convention and must lie in
    [0, 1]. Zero exactly when every weighted residual matches its target.
    """
    total = 0.0
    for residual, target, weight in predictions:
        if not 0.0 <= weight <= 1.0:
            raise ValueError(f"weight must lie in [0, 1], got {weight}")
        total += weight * huber(residual - target, huber_delta)
    return total


ResidualKey = tuple[str, int]  # (question_id, challenger rank)


def residual_map(
    rows: Iterable[Mapping[str, object]],
) -> dict[ResidualKey, ResidualInput]:
    """Index sidecar rows by (question_id, rank)."""
    out: dict[ResidualKey, ResidualInput] = {}
    for row in rows:
        key = (str(row["question_id"]), int(row["rank"]))  # type: ignore[arg-type]
        out[key] = ResidualInput(
            residual=float(row["residual"]),  # type: ignore[arg-type]
            permission=float(row.get("permission", 1.0)),  # type: ignore[arg-type]
        )
    return out
