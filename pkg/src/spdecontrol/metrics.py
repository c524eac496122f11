"""Trial-level metrics: second-half time averages, RMSE, and spread.

The reported profile of a trial is its field time-averaged over the second
half of the horizon (inclusive of the final step). RMSE compares the
cross-trial mean profile against the target on the masked nodes; the spread
is the population (divide-by-n) standard deviation across trials, averaged
over the masked nodes.
"""

from __future__ import annotations

import numpy as np

from .exceptions import MetricsError


def second_half_profile(states: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Time-average of the field over [T_sim/2, T_sim]."""
    times = np.asarray(times, dtype=float)
    t_end = times[-1]
    window = times >= 0.5 * t_end - 1e-12
    if not window.any():
        raise MetricsError("empty averaging window")
    return np.asarray(states)[window].mean(axis=0)


def compute_metrics(profiles: np.ndarray, desired, mask: np.ndarray):
    """(RMSE of the cross-trial mean profile, average pointwise std) on mask.

    profiles has shape (n_trials, *grid.shape); desired is an array on the
    grid or a scalar.
    """
    profiles = np.asarray(profiles, dtype=float)
    if profiles.ndim < 2 or profiles.shape[0] < 1:
        raise MetricsError("need at least one trial profile")
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise MetricsError("metrics mask is empty")
    desired = np.asarray(desired, dtype=float)
    target = desired[mask] if desired.shape == mask.shape else desired
    mean_profile = profiles.mean(axis=0)
    err = mean_profile[mask] - target
    rmse = float(np.sqrt(np.mean(err * err)))
    avg_sigma = float(profiles.std(axis=0, ddof=0)[mask].mean())
    return rmse, avg_sigma


def per_trial_rmse(profiles: np.ndarray, desired, mask: np.ndarray) -> np.ndarray:
    """RMSE of each single-trial profile against the target on the mask."""
    profiles = np.asarray(profiles, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise MetricsError("metrics mask is empty")
    desired = np.asarray(desired, dtype=float)
    target = desired[mask] if desired.shape == mask.shape else desired
    err = profiles[:, mask] - target
    return np.sqrt(np.mean(err * err, axis=1))
