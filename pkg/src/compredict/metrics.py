"""Hierarchical per-subject metrics over horizon results.

Four metrics summarize a subject's horizons for one profile and horizon
length:

  average_error       mean error, averaged sample -> horizon -> repeat ->
                      activity (an unweighted mean of means at every level,
                      so activities of different durations weigh equally)
  max_error           worst-case error over everything
  average_direction_accuracy
                      mean of the 0/1 direction scores with the same
                      hierarchy (static activities excluded upstream)
  min_direction_accuracy
                      per-(activity, repeat) mean over horizons, then the
                      minimum over repeats and activities

Inputs are grouped as {activity_id: {repeat_index: [per-horizon values]}};
per-horizon values are error arrays for the error metrics and 0/1 scores
for the direction metrics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np


class AggregationError(ValueError):
    """A grouping level required by a metric is empty."""


def _check_nonempty(grouped: Mapping, what: str) -> None:
    if not grouped:
        raise AggregationError(f"no activities to aggregate for {what}")
    for activity, repeats in grouped.items():
        if not repeats:
            raise AggregationError(f"activity {activity!r} has no repeats ({what})")
        for repeat, horizons in repeats.items():
            if len(horizons) == 0:
                raise AggregationError(
                    f"activity {activity!r} repeat {repeat} has no horizons ({what})"
                )


def _horizon_means(horizons) -> np.ndarray:
    """Per-horizon sample means; accepts a uniform (h, n) block or any
    sequence of per-horizon series."""
    if isinstance(horizons, np.ndarray) and horizons.ndim == 2:
        return horizons.mean(axis=1)
    return np.array([float(np.mean(series)) for series in horizons])


def average_error(grouped_errors: Mapping[str, Mapping[int, Sequence[np.ndarray]]]) -> float:
    """Mean-of-means of per-sample errors up the full hierarchy (meters)."""
    _check_nonempty(grouped_errors, "average error")
    activity_means = []
    for _, repeats in sorted(grouped_errors.items()):
        repeat_means = [
            float(np.mean(_horizon_means(horizons))) for _, horizons in sorted(repeats.items())
        ]
        activity_means.append(float(np.mean(repeat_means)))
    return float(np.mean(activity_means))


def _block_max(horizons) -> float:
    if isinstance(horizons, np.ndarray):
        return float(np.max(horizons))
    return max(float(np.max(series)) for series in horizons)


def max_error(grouped_errors: Mapping[str, Mapping[int, Sequence[np.ndarray]]]) -> float:
    """Largest per-sample error anywhere in the hierarchy (meters)."""
    _check_nonempty(grouped_errors, "max error")
    return float(
        max(
            _block_max(horizons)
            for repeats in grouped_errors.values()
            for horizons in repeats.values()
        )
    )


def average_direction_accuracy(grouped_scores: Mapping[str, Mapping[int, Sequence[int]]]) -> float:
    """Mean-of-means of direction scores; callers must exclude static
    activities before grouping."""
    _check_nonempty(grouped_scores, "average direction accuracy")
    activity_means = []
    for _, repeats in sorted(grouped_scores.items()):
        repeat_means = [
            float(np.mean(np.asarray(scores, dtype=float))) for _, scores in sorted(repeats.items())
        ]
        activity_means.append(float(np.mean(repeat_means)))
    return float(np.mean(activity_means))


def min_direction_accuracy(grouped_scores: Mapping[str, Mapping[int, Sequence[int]]]) -> float:
    """Worst per-(activity, repeat) mean direction score."""
    _check_nonempty(grouped_scores, "min direction accuracy")
    return float(
        min(
            float(np.mean(np.asarray(scores, dtype=float)))
            for repeats in grouped_scores.values()
            for scores in repeats.values()
        )
    )


def pooled_average_error(grouped_errors) -> float:
    """Grand mean over every sample, ignoring the hierarchy. Offered as a
    sensitivity check next to the default mean-of-means."""
    _check_nonempty(grouped_errors, "pooled average error")
    parts = []
    for repeats in grouped_errors.values():
        for horizons in repeats.values():
            if isinstance(horizons, np.ndarray):
                parts.append(horizons.ravel())
            else:
                parts.extend(np.atleast_1d(np.asarray(s, dtype=float)) for s in horizons)
    return float(np.mean(np.concatenate(parts)))


def pooled_average_direction_accuracy(grouped_scores) -> float:
    """Grand mean over every score, ignoring the hierarchy."""
    _check_nonempty(grouped_scores, "pooled average direction accuracy")
    scores = [
        float(s)
        for repeats in grouped_scores.values()
        for horizons in repeats.values()
        for s in horizons
    ]
    return float(np.mean(scores))


@dataclass(frozen=True)
class MetricSummary:
    """Per-subject metric values for one (profile, horizon length)."""

    subject_id: str
    profile: str
    horizon_ms: float
    ae: float
    me: float
    ada: float | None
    mda: float | None


def summarize(
    subject_id: str,
    profile: str,
    horizon_ms: float,
    grouped_errors,
    grouped_scores,
    aggregation: str = "hierarchical",
) -> MetricSummary:
    """Reduce one subject's grouped sweep outputs to a MetricSummary.

    grouped_scores must already exclude static activities; passing an empty
    mapping yields ada = mda = None (subject had only static activities for
    this horizon).
    """
    if aggregation == "hierarchical":
        ae = average_error(grouped_errors)
        ada = average_direction_accuracy(grouped_scores) if grouped_scores else None
    elif aggregation == "pooled":
        ae = pooled_average_error(grouped_errors)
        ada = pooled_average_direction_accuracy(grouped_scores) if grouped_scores else None
    else:
        raise ValueError(f"unknown aggregation mode {aggregation!r}")
    return MetricSummary(
        subject_id=subject_id,
        profile=str(profile),
        horizon_ms=horizon_ms,
        ae=ae,
        me=max_error(grouped_errors),
        ada=ada,
        mda=min_direction_accuracy(grouped_scores) if grouped_scores else None,
    )
