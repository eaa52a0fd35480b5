"""Annotator reliability analysis.

Annotations are reduced to sentence-level quality judgments (the flagged or
edited token ratio) and compared with Krippendorff's alpha, using the
pairable-values estimator so missing entries are handled without
imputation.  Interval differences suit the quality ratios; nominal
differences suit categorical choices such as a preferred feedback mode.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .feedback import ChoiceAnnotation, Marking, PostEdit, correction_rate

LEVELS = ("interval", "nominal")


@dataclass(frozen=True, eq=False)
class RatingMatrix:
    """Ratings per (unit, rater); missing entries are NaN."""

    units: tuple[str, ...]
    raters: tuple[str, ...]
    values: np.ndarray  # shape (len(units), len(raters)), float, NaN = missing
    level: str = "interval"

    def __post_init__(self) -> None:
        if self.level not in LEVELS:
            raise ValueError(f"unknown measurement level {self.level!r}")
        if self.values.shape != (len(self.units), len(self.raters)):
            raise ValueError("values shape does not match units x raters")
        present = self.values[~np.isnan(self.values)]
        if not np.all(np.isfinite(present)):
            raise ValueError("ratings must be finite")

    @classmethod
    def from_records(
        cls,
        records: Iterable[tuple[str, str, float]],
        level: str = "interval",
    ) -> "RatingMatrix":
        """Build a matrix from (unit, rater, value) triples."""
        triples = list(records)
        units = tuple(dict.fromkeys(u for u, _, _ in triples))
        raters = tuple(dict.fromkeys(r for _, r, _ in triples))
        values = np.full((len(units), len(raters)), np.nan)
        u_index = {u: i for i, u in enumerate(units)}
        r_index = {r: j for j, r in enumerate(raters)}
        for unit, rater, value in triples:
            values[u_index[unit], r_index[rater]] = value
        return cls(units=units, raters=raters, values=values, level=level)


def to_quality_judgment(
    annotation: Marking | PostEdit | ChoiceAnnotation | Sequence[bool],
) -> float:
    """Sentence-level quality judgment in [0, 1]: the flagged/edited ratio.

    0 means the hypothesis needed no markings or edits; 1 means all of it
    did.  A choice annotation is reduced through its chosen sub-annotation.
    """
    if isinstance(annotation, ChoiceAnnotation):
        return correction_rate(annotation.annotation)
    return correction_rate(annotation)


def _difference(v: np.ndarray, w: np.ndarray, level: str) -> np.ndarray:
    if level == "interval":
        return (v - w) ** 2
    return (v != w).astype(float)


def krippendorff_alpha(matrix: RatingMatrix) -> float:
    """alpha = 1 - D_o / D_e over all pairable values.

    Only units rated at least twice contribute.  When expected disagreement
    is zero (all pairable values identical), alpha is 1 by convention.
    """
    if len(matrix.raters) < 2:
        raise ValueError("at least 2 raters are required")
    pairable_rows = []
    for row in matrix.values:
        present = row[~np.isnan(row)]
        if len(present) >= 2:
            pairable_rows.append(present)
    n = sum(len(row) for row in pairable_rows)
    if n < 2:
        raise ValueError("fewer than 2 pairable values")

    observed = 0.0
    for row in pairable_rows:
        diffs = _difference(row[:, None], row[None, :], matrix.level)
        observed += diffs.sum() / (len(row) - 1)
    observed /= n

    pooled = np.concatenate(pairable_rows)
    expected = _difference(pooled[:, None], pooled[None, :], matrix.level).sum()
    expected /= n * (n - 1)

    if expected == 0.0:
        return 1.0
    return float(1.0 - observed / expected)


@dataclass(frozen=True)
class IntraRaterReport:
    """Per-annotator self-consistency and its summary across annotators."""

    per_annotator: dict[str, float]
    mean: float
    std: float


def intra_rater_alpha(
    records: Iterable[tuple[str, str, str, float]],
    level: str = "interval",
) -> IntraRaterReport:
    """Self-consistency from (annotator, unit, pass, value) records.

    Each annotator's repeated passes act as pseudo-raters in their own
    alpha computation; the report carries the per-annotator values plus
    their mean and sample standard deviation (0 for a single annotator).
    """
    by_annotator: dict[str, list[tuple[str, str, float]]] = {}
    for annotator, unit, pass_label, value in records:
        by_annotator.setdefault(annotator, []).append((unit, pass_label, value))
    if not by_annotator:
        raise ValueError("no records")
    per_annotator = {}
    for annotator in by_annotator:
        matrix = RatingMatrix.from_records(by_annotator[annotator], level=level)
        try:
            per_annotator[annotator] = krippendorff_alpha(matrix)
        except ValueError as exc:
            raise ValueError(f"annotator {annotator!r} has no repeated units") from exc
    alphas = np.array(list(per_annotator.values()))
    std = float(np.std(alphas, ddof=1)) if len(alphas) > 1 else 0.0
    return IntraRaterReport(
        per_annotator=per_annotator, mean=float(np.mean(alphas)), std=std
    )


def agreement_report(
    mode: str,
    intra_records: Iterable[tuple[str, str, str, float]],
    inter_matrix: RatingMatrix,
    level: str = "interval",
) -> dict:
    """One report row per feedback mode: intra mean/std plus inter alpha."""
    intra = intra_rater_alpha(intra_records, level=level)
    return {
        "mode": mode,
        "intra_mean": intra.mean,
        "intra_std": intra.std,
        "inter": krippendorff_alpha(inter_matrix),
    }
