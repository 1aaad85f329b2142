"""Per-trial figure-of-merit computation.

Conventions (stated here because the plots alone do not define them):
  * activity detection error probability = (misses + false alarms) / N,
  * channel NMSE = ||H_hat - H||_F^2 / ||H||_F^2 over all N columns,
  * BLER counts a block error for every truly active user that is missed,
    fails CRC, or decodes to the wrong payload; denominator is K.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import ActivityPattern
from .turbo import ReceiverResult

NMSE_DB_FLOOR = -100.0


@dataclass
class TrialMetrics:
    miss_count: int
    false_alarm_count: int
    error_prob: float
    nmse: float  # linear ratio; NaN marks an undefined (all-zero H) trial
    block_errors: int
    blocks_total: int
    detector_iterations: int = 0
    clamp_events: int = 0
    diagnostics: int = 0


def activity_error(
    truth: ActivityPattern, detected: np.ndarray
) -> tuple[int, int, float]:
    """(misses, false alarms, per-user error probability)."""
    n = truth.indicators.size
    true_set = set(truth.active_set.tolist())
    det_set = set(int(i) for i in np.asarray(detected).ravel())
    if not det_set <= set(range(n)):
        raise ValueError("detected set contains out-of-range user indices")
    miss = len(true_set - det_set)
    false_alarm = len(det_set - true_set)
    return miss, false_alarm, (miss + false_alarm) / n


def channel_nmse(h_true: np.ndarray, h_est: np.ndarray) -> float:
    """Linear NMSE; NaN when the true channel is identically zero."""
    if h_true.shape != h_est.shape:
        raise ValueError("channel matrices must have equal shapes")
    denom = float(np.sum(np.abs(h_true) ** 2))
    if denom == 0.0:
        return float("nan")
    return float(np.sum(np.abs(h_est - h_true) ** 2)) / denom


def nmse_to_db(nmse: float) -> float:
    """Linear NMSE -> dB with a -100 dB reporting floor."""
    if np.isnan(nmse):
        return float("nan")
    if nmse <= 10.0 ** (NMSE_DB_FLOOR / 10.0):
        return NMSE_DB_FLOOR
    return float(10.0 * np.log10(nmse))


def bler(
    truth_payloads: dict[int, np.ndarray], result: ReceiverResult
) -> tuple[int, int]:
    """(block errors, total blocks) over the truly active users.

    A missed user counts as an error; a CRC false pass with the wrong payload
    also counts (the comparison is against ground truth).
    """
    passed = set(int(i) for i in result.crc_pass_set)
    errors = 0
    outcomes: dict[int, bool] = {}
    for user, payload in truth_payloads.items():
        ok = user in passed and np.array_equal(result.decoded_payloads[user], payload)
        outcomes[int(user)] = bool(ok)
        errors += int(not ok)
    result.per_user_block_ok = outcomes
    return errors, len(truth_payloads)


def trial_metrics(
    truth: ActivityPattern,
    truth_payloads: dict[int, np.ndarray],
    h_true: np.ndarray,
    result: ReceiverResult,
) -> TrialMetrics:
    miss, fa, prob = activity_error(truth, result.detected_set)
    errs, total = bler(truth_payloads, result)
    return TrialMetrics(
        miss_count=miss,
        false_alarm_count=fa,
        error_prob=prob,
        nmse=channel_nmse(h_true, result.channel_estimate),
        block_errors=errs,
        blocks_total=total,
        detector_iterations=result.detector_iterations,
        clamp_events=result.clamp_events,
        diagnostics=result.diagnostics,
    )
