"""Ranking and calibration metrics: AUC via rank sums, mean binary cross-entropy.

auc is the Mann-Whitney statistic: the fraction of (positive, negative) pairs
where the positive outscores the negative, ties counted one half. The rank-sum
form runs in O(n log n) and agrees exactly with pairwise counting because
average ranks and pair counts are both half-integers, exact in doubles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CtrnetError


class SingleClassError(CtrnetError, ValueError):
    """AUC is undefined unless both classes are present."""


def auc(scores, labels) -> float:
    """Probability that a random positive outscores a random negative (ties = 0.5)."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError(f"auc: scores {s.shape} and labels {y.shape} must be equal-length vectors")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("auc: labels must be 0 or 1")
    n_pos = int(y.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError(
            f"auc needs both classes, got {n_pos} positives and {n_neg} negatives"
        )
    order = np.argsort(s, kind="stable")
    sorted_s = s[order]
    # average 1-based ranks within tie groups
    ranks = np.empty(y.size, dtype=np.float64)
    boundaries = np.flatnonzero(np.diff(sorted_s)) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [y.size]))
    for lo, hi in zip(starts, ends):
        ranks[order[lo:hi]] = 0.5 * (lo + 1 + hi)
    rank_sum_pos = ranks[y == 1].sum()
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def auc_brute_force(scores, labels) -> float:
    """O(n^2) pairwise oracle for auc; kept independent of the rank-sum path."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    pos = s[y == 1]
    neg = s[y == 0]
    if pos.size == 0 or neg.size == 0:
        raise SingleClassError("auc needs both classes")
    wins = 0.0
    for p in pos:
        wins += (p > neg).sum() + 0.5 * (p == neg).sum()
    return wins / (pos.size * neg.size)


def logloss(probabilities, labels, clamp: float = 1e-12) -> float:
    """Mean binary cross-entropy; probabilities are clamped to [clamp, 1 - clamp]."""
    p = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if p.shape != y.shape or p.ndim != 1:
        raise ValueError(f"logloss: shapes {p.shape} vs {y.shape}")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("logloss: labels must be 0 or 1")
    p = np.clip(p, clamp, 1.0 - clamp)
    return float(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)).mean())


@dataclass
class MetricsReport:
    """Held-out quality plus the training trajectory that produced it."""

    auc: float
    logloss: float
    n_pos: int
    n_neg: int
    loss_curve: tuple[float, ...] = ()  # per-epoch mean training cross-entropy
    val_auc_curve: tuple[float, ...] = ()
    val_logloss_curve: tuple[float, ...] = ()

    def row(self) -> dict[str, float]:
        return {"auc": self.auc, "logloss": self.logloss,
                "n_pos": self.n_pos, "n_neg": self.n_neg}


def evaluate(scores, labels) -> MetricsReport:
    """AUC and logloss of predicted click probabilities against binary labels."""
    y = np.asarray(labels)
    return MetricsReport(
        auc=auc(scores, y),
        logloss=logloss(scores, y),
        n_pos=int((y == 1).sum()),
        n_neg=int((y == 0).sum()),
    )


def write_metrics_tsv(path, rows: dict[str, MetricsReport]) -> None:
    """One-line header, one row per named report; values use repr for exact round-trips."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("name\tauc\tlogloss\tn_pos\tn_neg\n")
        for name, report in rows.items():
            fh.write(
                f"{name}\t{report.auc!r}\t{report.logloss!r}\t"
                f"{report.n_pos}\t{report.n_neg}\n"
            )
