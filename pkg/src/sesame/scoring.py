"""Suspicion indicators and the suspicion score.

    S = (mean(norm(A), norm(B), norm(C), norm_inv(D)) + S_base) * g / 1.1
    g = (1 - alpha) / beta   if alpha <= 0.96 else 0

with ``norm(x) = 100*sqrt(x)`` and ``norm_inv(x) = 100*sqrt(1 - x)``. C only
exists when the RegEx-Matcher is enabled; the mean then runs over three terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

S_BASE = 10.0
NORM_DIVISOR = 1.1
KNOWN_THRESHOLD = 0.96

UNSUSPICIOUS = "unsuspicious"
SLIGHTLY = "slightly_suspicious"
SUSPICIOUS = "suspicious"
HIGHLY = "highly_suspicious"


class NoPredictions(ValueError):
    pass


@dataclass(frozen=True)
class SuspicionIndicators:
    A: float
    B: float
    C: float | None
    D: float
    alpha: float
    beta: int
    n_predictions: int

    def as_dict(self) -> dict:
        return {
            "A": self.A,
            "B": self.B,
            "C": self.C,
            "D": self.D,
            "alpha": self.alpha,
            "beta": self.beta,
            "n_predictions": self.n_predictions,
        }


@dataclass(frozen=True)
class SuspicionScore:
    value: float
    category: str
    mean_indicator: float


def compute_indicators(
    predictions: Sequence[str],
    max_probs: Sequence[float],
    alpha: float,
    majority_deterministic: bool,
    benign: str = "benign",
    regex_changes: Sequence[bool] | None = None,
) -> SuspicionIndicators:
    """``regex_changes`` is None when the RegEx-Matcher is off, which leaves C absent."""
    n = len(predictions)
    if n == 0:
        raise NoPredictions("sample has no classified domains")
    if len(max_probs) != n or (regex_changes is not None and len(regex_changes) != n):
        raise ValueError("per-domain inputs must have equal length")
    return SuspicionIndicators(
        A=sum(p == benign for p in predictions) / n,
        B=len(set(predictions)) / n,
        C=None if regex_changes is None else sum(bool(c) for c in regex_changes) / n,
        D=float(np.mean(max_probs)),
        alpha=alpha,
        beta=1 if majority_deterministic else 2,
        n_predictions=n,
    )


def normalize_indicator(x: float, inverted: bool = False) -> float:
    if not 0.0 <= x <= 1.0:
        # float noise from means of probabilities
        if -1e-9 <= x <= 1 + 1e-9:
            x = min(max(x, 0.0), 1.0)
        else:
            raise ValueError(f"indicator {x} outside [0, 1]")
    return 100.0 * math.sqrt(1.0 - x if inverted else x)


def mean_indicator(ind: SuspicionIndicators) -> float:
    parts = [normalize_indicator(ind.A), normalize_indicator(ind.B)]
    if ind.C is not None:
        parts.append(normalize_indicator(ind.C))
    parts.append(normalize_indicator(ind.D, inverted=True))
    return sum(parts) / len(parts)


def score_from_mean(m: float, alpha: float, beta: int) -> float:
    g = (1.0 - alpha) / beta if alpha <= KNOWN_THRESHOLD else 0.0
    s = (m + S_BASE) * g / NORM_DIVISOR
    return min(max(s, 0.0), 100.0)


def categorize(s: float) -> str:
    if s <= 0.0:
        return UNSUSPICIOUS
    if s <= 5.0:
        return SLIGHTLY
    if s <= 25.0:
        return SUSPICIOUS
    return HIGHLY


def compute_score(ind: SuspicionIndicators) -> SuspicionScore:
    m = mean_indicator(ind)
    s = score_from_mean(m, ind.alpha, ind.beta)
    return SuspicionScore(value=s, category=categorize(s), mean_indicator=m)
