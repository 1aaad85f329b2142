"""Bilinear generalized AMP detector for joint activity detection, channel
estimation and soft data-symbol detection.

One iteration walks six stages over the factor graph of Y = sqrt(g) H X + N:

  1. linear-mixing means/variances of z = (H X) with an Onsager correction,
  2. AWGN posterior of z given the matching column of Y,
  3. scaled residual and inverse-residual-variance,
  4. per-element pseudo-observations (P, Q) of the channel coefficients,
     fusing the pilot and data phases by precision weighting,
  5. Bernoulli-Gaussian activity posterior and channel denoising,
  6. pseudo-observations of the data symbols and their constellation
     posterior under the decoder-supplied priors.

Estimates of h, x and the residual are damped between iterations. The pilot
columns of the symbol estimate are pinned to the known pilots with zero
variance throughout. Activity is read off the antenna-averaged posterior
sparsity level against a threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .config import SystemConfig

_TINY = 1e-300
_FLOOR_REL = 1e-12  # divisor floor, relative to the quantity's own scale


@dataclass
class ClampCounter:
    events: int = 0

    def add(self, n: int) -> None:
        self.events += int(n)


@dataclass
class DetectorConfig:
    """Receiver-side knobs; betas/lam are per-user vectors."""

    lam: np.ndarray
    betas: np.ndarray
    tx_power: float
    noise_var: float
    theta: float = 0.4
    max_iters: int = 100
    tol: float = 1e-5
    damping: float = 0.3
    warmup_pilot_iters: int = 10

    def __post_init__(self) -> None:
        self.lam = np.atleast_1d(np.asarray(self.lam, dtype=float))
        self.betas = np.atleast_1d(np.asarray(self.betas, dtype=float))
        if self.lam.size == 1:
            self.lam = np.full(self.betas.shape, float(self.lam[0]))
        if np.any((self.lam <= 0) | (self.lam >= 1)):
            raise ValueError("activity priors must lie strictly inside (0, 1)")
        if np.any(self.betas <= 0):
            raise ValueError("path gains must be positive")

    @classmethod
    def from_system(
        cls, cfg: SystemConfig, betas: np.ndarray, lam: np.ndarray | float | None = None
    ) -> "DetectorConfig":
        return cls(
            lam=cfg.activity_prior if lam is None else lam,
            betas=betas,
            tx_power=cfg.tx_power,
            noise_var=cfg.noise_var,
            theta=cfg.threshold,
            max_iters=cfg.detector_iters,
            tol=cfg.detector_tol,
            damping=cfg.damping,
            warmup_pilot_iters=cfg.warmup_pilot_iters,
        )


@dataclass
class DetectorState:
    """All message quantities of one detector run (shapes in comments)."""

    h_hat: np.ndarray  # (M, N) complex
    v_h: np.ndarray  # (M, N)
    x_hat: np.ndarray  # (N, T) complex; pilot columns pinned to the pilots
    v_x: np.ndarray  # (N, T); zero on pilot columns
    s_hat: np.ndarray  # (M, T) complex
    v_s: np.ndarray  # (M, T)
    mp: np.ndarray  # (M, T) complex
    vp: np.ndarray  # (M, T)
    z_hat: np.ndarray  # (M, T) complex
    v_z: np.ndarray  # (M, T)
    rho: np.ndarray  # (M, N)
    rho_tilde: np.ndarray  # (M, N)
    eta: np.ndarray | None  # (N, L_d, S) symbol posteriors, None until computed
    z_prod: np.ndarray | None = None  # h_hat @ x_hat of the previous iteration
    iters: int = 0
    clamps: ClampCounter = field(default_factory=ClampCounter)


@dataclass
class DetectorOutput:
    active_set: np.ndarray  # sorted user indices
    symbol_posteriors: np.ndarray  # (N, L_d, S); rows outside the set are raw
    channel_estimate: np.ndarray  # (M, N) complex
    mean_rho: np.ndarray  # (N,) antenna-averaged posterior sparsity
    iterations: int
    clamp_events: int
    diverged: bool
    final_ratio: float


def _floored(arr: np.ndarray, scale: float, clamps: ClampCounter | None) -> np.ndarray:
    """Clamp a divisor at _FLOOR_REL of its typical scale, counting hits."""
    floor = max(_FLOOR_REL * scale, _TINY)
    low = arr < floor
    if low.any():
        if clamps is not None:
            clamps.add(low.sum())
        arr = np.where(low, floor, arr)
    return arr


def linear_mixing_update(
    h_hat: np.ndarray,
    v_h: np.ndarray,
    x_hat: np.ndarray,
    v_x: np.ndarray,
    s_prev: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Plain and Onsager-corrected mean/variance of the linear mix z = H X."""
    abs_h2 = np.abs(h_hat) ** 2
    abs_x2 = np.abs(x_hat) ** 2
    vterm = v_h @ abs_x2 + abs_h2 @ v_x
    mp = h_hat @ x_hat - s_prev * vterm
    vp = vterm + v_h @ v_x
    return mp, vp


def awgn_posterior_z(
    y: np.ndarray, mp: np.ndarray, vp: np.ndarray, tx_power: float, noise_var: float
) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean/variance of z under y = sqrt(g) z + CN(0, noise_var)."""
    denom = tx_power * vp + noise_var
    if np.any(denom <= 0):
        raise ValueError("degenerate AWGN posterior: tx_power*Vp + noise_var = 0")
    gain = np.sqrt(tx_power) * vp / denom
    z = mp + gain * (y - np.sqrt(tx_power) * mp)
    vz = vp * noise_var / denom
    return z, vz


def residual_update(
    z: np.ndarray,
    vz: np.ndarray,
    mp: np.ndarray,
    vp: np.ndarray,
    clamps: ClampCounter | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Scaled residual s = (z - mp)/vp and its variance (1 - vz/vp)/vp."""
    vp_safe = _floored(vp, float(np.mean(vp)), clamps)
    s = (z - mp) / vp_safe
    vs = (1.0 - vz / vp_safe) / vp_safe
    return s, np.maximum(vs, 0.0)


def combine_pseudo_obs(
    p_pilot: np.ndarray, q_pilot: np.ndarray, p_data: np.ndarray, q_data: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Precision-weighted fusion of pilot- and data-phase pseudo-observations."""
    d_p, d_d = 1.0 / q_pilot, 1.0 / q_data
    d_sum = d_p + d_d
    return (p_pilot * d_p + p_data * d_d) / d_sum, 1.0 / d_sum


def channel_pseudo_obs(
    h_hat: np.ndarray,
    x_pilot: np.ndarray,
    x_data: np.ndarray | None,
    v_x_data: np.ndarray | None,
    s_hat: np.ndarray,
    v_s: np.ndarray,
    pilot_len: int,
    clamps: ClampCounter | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Pseudo-observations (P, Q) of each channel coefficient.

    Pilot phase uses the known symbols; the data phase uses the current soft
    symbols with a variance deflation on the previous channel estimate. The
    precision-weighted fusion is evaluated in numerator form so a phase that
    carries no information (zero symbol means) drops out with weight zero
    instead of dividing by a vanishing precision. Pass ``x_data=None`` for
    pilot-only operation (warm start, pilot-only AMP).
    """
    l = pilot_len
    d_p = v_s[:, :l] @ (np.abs(x_pilot) ** 2).T  # pilot-phase precision 1/Q_p
    num = h_hat * d_p + s_hat[:, :l] @ x_pilot.conj().T  # = P_p * d_p
    d_sum = d_p
    if x_data is not None:
        d_d = v_s[:, l:] @ (np.abs(x_data) ** 2).T  # data-phase precision 1/Q_d
        # P_d * d_d = h * (d_d - sum V^x V^s) + sum x* s
        num = num + h_hat * (d_d - v_s[:, l:] @ v_x_data.T) + s_hat[:, l:] @ x_data.conj().T
        d_sum = d_sum + d_d
    d_sum = _floored(d_sum, float(np.mean(d_sum)), clamps)
    return num / d_sum, 1.0 / d_sum


def activity_posterior(
    p: np.ndarray, q: np.ndarray, lam: np.ndarray, betas: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Leave-one-out sparsity messages and the full activity posterior.

    The per-element log evidence that a coefficient is nonzero is
    g = ln(Q/(Q+beta)) + |P|^2 beta / ((Q+beta) Q); the message to antenna m
    sums g over all other antennas plus the prior log-odds, and the posterior
    folds the own-antenna term back in. Computed in the log domain.
    """
    bd = betas[None, :] / q  # beta/Q, finite for clamped Q
    g = -np.log1p(bd) + (np.abs(p) ** 2) * bd / (q * (1.0 + bd))
    prior_logodds = np.log(lam) - np.log1p(-lam)
    l_msg = prior_logodds[None, :] + g.sum(axis=0, keepdims=True) - g
    return expit(l_msg), expit(l_msg + g)


def bg_denoise(
    p: np.ndarray, q: np.ndarray, rho_tilde: np.ndarray, betas: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean/variance of h under the Bernoulli-Gaussian prior.

    Conditioned on being active, h | (P, Q) is Gaussian with mean
    beta P/(beta+Q) and variance beta Q/(beta+Q); mixing with the spike at
    zero by rho_tilde gives the spike-and-slab moments.
    """
    b = betas[None, :]
    slab_mean = b * p / (b + q)
    slab_var = b * q / (b + q)
    h = rho_tilde * slab_mean
    v_h = rho_tilde * slab_var + rho_tilde * (1.0 - rho_tilde) * np.abs(slab_mean) ** 2
    return h, v_h


def symbol_update(
    h_hat: np.ndarray,
    v_h: np.ndarray,
    x_data: np.ndarray,
    s_hat_d: np.ndarray,
    v_s_d: np.ndarray,
    priors: np.ndarray,
    points: np.ndarray,
    clamps: ClampCounter | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Soft data-symbol refresh: pseudo-observations, posterior over the
    constellation, and its first two moments.

    The Gaussian likelihood exponent multiplies by the precision 1/Q^x, so a
    symbol with no channel evidence (precision ~ 0, e.g. an undetected user)
    cleanly falls back to its prior.
    """
    d_x = (np.abs(h_hat) ** 2).T @ v_s_d  # precision 1/Q^x
    d_safe = _floored(d_x, float(np.mean(d_x)), clamps)
    q_x = 1.0 / d_safe
    # P^x * d_x = x * (d_x - sum V^h V^s) + sum h* s
    p_x = (x_data * (d_x - v_h.T @ v_s_d) + h_hat.conj().T @ s_hat_d) / d_safe

    dist2 = np.abs(p_x[..., None] - points[None, None, :]) ** 2
    with np.errstate(divide="ignore"):
        logits = np.log(priors) - dist2 * d_x[..., None]
    logits -= logits.max(axis=-1, keepdims=True)
    eta = np.exp(logits)
    eta /= eta.sum(axis=-1, keepdims=True)
    x_new = eta @ points
    v_new = np.maximum(eta @ (np.abs(points) ** 2) - np.abs(x_new) ** 2, 0.0)
    return p_x, q_x, eta, x_new, v_new


def detect_activity(rho_tilde: np.ndarray, theta: float) -> np.ndarray:
    """Users whose antenna-averaged posterior sparsity reaches the threshold."""
    return np.flatnonzero(rho_tilde.mean(axis=0) >= theta)


def init_state(
    y: np.ndarray,
    x_pilot: np.ndarray,
    priors: np.ndarray | None,
    cfg: DetectorConfig,
    points: np.ndarray,
) -> DetectorState:
    """Cold-start state: zero channel with the Bernoulli-Gaussian prior
    variance, prior moments on the data columns, exact pilots."""
    m, t = y.shape
    n, l = x_pilot.shape
    if t < l:
        raise ValueError("received block shorter than the pilot phase")
    ld = t - l
    x_hat = np.zeros((n, t), dtype=complex)
    v_x = np.zeros((n, t))
    x_hat[:, :l] = x_pilot
    if ld:
        if priors is None:
            raise ValueError("data columns present but no symbol priors given")
        if priors.shape != (n, ld, points.size):
            raise ValueError(f"priors must have shape {(n, ld, points.size)}")
        x_hat[:, l:] = priors @ points
        v_x[:, l:] = np.maximum(
            priors @ (np.abs(points) ** 2) - np.abs(x_hat[:, l:]) ** 2, 0.0
        )
    return DetectorState(
        h_hat=np.zeros((m, n), dtype=complex),
        v_h=np.broadcast_to(cfg.lam * cfg.betas, (m, n)).copy(),
        x_hat=x_hat,
        v_x=v_x,
        s_hat=np.zeros((m, t), dtype=complex),
        v_s=np.zeros((m, t)),
        mp=np.zeros((m, t), dtype=complex),
        vp=np.zeros((m, t)),
        z_hat=np.zeros((m, t), dtype=complex),
        v_z=np.zeros((m, t)),
        rho=np.full((m, n), float("nan")),
        rho_tilde=np.zeros((m, n)),
        eta=None,
    )


def _step(
    st: DetectorState,
    y: np.ndarray,
    x_pilot: np.ndarray,
    priors: np.ndarray | None,
    cfg: DetectorConfig,
    points: np.ndarray,
    damping: float,
    pilot_only: bool,
) -> float:
    """One full Algorithm iteration over the active column set; returns the
    normalized change of the z estimate."""
    l = x_pilot.shape[1]
    cols = slice(0, l) if pilot_only else slice(0, y.shape[1])
    d = damping

    h_prev, vh_prev = st.h_hat, st.v_h
    x_prev, vx_prev = st.x_hat, st.v_x
    s_prev, vs_prev = st.s_hat[:, cols], st.v_s[:, cols]

    mp, vp = linear_mixing_update(
        h_prev, vh_prev, x_prev[:, cols], vx_prev[:, cols], s_prev
    )
    z, vz = awgn_posterior_z(y[:, cols], mp, vp, cfg.tx_power, cfg.noise_var)
    s_new, vs_new = residual_update(z, vz, mp, vp, st.clamps)
    st.mp[:, cols], st.vp[:, cols] = mp, vp
    st.v_z[:, cols] = vz
    st.z_hat[:, cols] = z
    st.s_hat[:, cols] = d * s_new + (1.0 - d) * s_prev
    st.v_s[:, cols] = d * vs_new + (1.0 - d) * vs_prev

    if pilot_only:
        p, q = channel_pseudo_obs(
            h_prev, x_pilot, None, None, st.s_hat, st.v_s, l, st.clamps
        )
    else:
        p, q = channel_pseudo_obs(
            h_prev,
            x_pilot,
            x_prev[:, l:],
            vx_prev[:, l:],
            st.s_hat,
            st.v_s,
            l,
            st.clamps,
        )
    st.rho, st.rho_tilde = activity_posterior(p, q, cfg.lam, cfg.betas)
    h_new, vh_new = bg_denoise(p, q, st.rho_tilde, cfg.betas)
    st.h_hat = d * h_new + (1.0 - d) * h_prev
    st.v_h = d * vh_new + (1.0 - d) * vh_prev

    if not pilot_only and y.shape[1] > l:
        _, _, eta, x_new, vx_new = symbol_update(
            h_prev,
            vh_prev,
            x_prev[:, l:],
            st.s_hat[:, l:],
            st.v_s[:, l:],
            priors,
            points,
            st.clamps,
        )
        st.eta = eta
        st.x_hat[:, l:] = d * x_new + (1.0 - d) * x_prev[:, l:]
        st.v_x[:, l:] = d * vx_new + (1.0 - d) * vx_prev[:, l:]

    # Convergence statistic: relative movement of the denoised bilinear
    # product. (The AWGN-posterior z itself is pinned to the measurement at
    # realistic SNR and its relative change collapses after two iterations
    # regardless of factor convergence, which would starve the detector.)
    z_prod = st.h_hat @ st.x_hat[:, cols]
    if st.z_prod is not None and st.z_prod.shape == z_prod.shape:
        den = float(np.sum(np.abs(st.z_prod) ** 2))
        ratio = float(np.sum(np.abs(z_prod - st.z_prod) ** 2)) / den if den > 0 else float("inf")
    else:
        ratio = float("inf")
    st.z_prod = z_prod

    st.iters += 1
    return ratio


def _state_finite(st: DetectorState) -> bool:
    return bool(
        np.isfinite(st.z_hat).all()
        and np.isfinite(st.h_hat).all()
        and np.isfinite(st.v_h).all()
        and np.isfinite(st.x_hat).all()
        and np.isfinite(st.v_x).all()
        and np.isfinite(st.s_hat).all()
        and np.isfinite(st.v_s).all()
    )


def _run_once(
    y: np.ndarray,
    x_pilot: np.ndarray,
    priors: np.ndarray | None,
    cfg: DetectorConfig,
    points: np.ndarray,
    damping: float,
    pilot_only: bool,
    trace: list | None,
) -> tuple[DetectorState, float, bool]:
    st = init_state(y, x_pilot, priors, cfg, points)
    has_data = y.shape[1] > x_pilot.shape[1] and not pilot_only
    snapshot = None
    ratio = float("inf")

    # Warm start: pilot-only rounds of the same loop before releasing the
    # data columns (skipped when the run itself is pilot-only).
    if has_data:
        for _ in range(cfg.warmup_pilot_iters):
            _step(st, y, x_pilot, priors, cfg, points, damping, pilot_only=True)
            if not _state_finite(st):
                return st, ratio, True
        st.iters = 0

    for i in range(1, cfg.max_iters + 1):
        snapshot = (
            st.h_hat.copy(),
            st.v_h.copy(),
            st.x_hat.copy(),
            st.v_x.copy(),
            st.rho_tilde.copy(),
            None if st.eta is None else st.eta.copy(),
        )
        ratio = _step(st, y, x_pilot, priors, cfg, points, damping, pilot_only)
        if not _state_finite(st):
            st.h_hat, st.v_h, st.x_hat, st.v_x, st.rho_tilde, st.eta = snapshot
            st.iters = i - 1
            return st, ratio, True
        if trace is not None:
            trace.append(
                {
                    "iteration": i,
                    "ratio": ratio,
                    "mean_vp": float(st.vp.mean()),
                    "clamp_events": st.clamps.events,
                    "mean_rho": st.rho_tilde.mean(axis=0).copy(),
                }
            )
        if ratio <= cfg.tol:
            break
    return st, ratio, False


def run(
    y: np.ndarray,
    x_pilot: np.ndarray,
    priors: np.ndarray | None,
    cfg: DetectorConfig,
    points: np.ndarray,
    pilot_only: bool = False,
    forced_active: np.ndarray | None = None,
    trace: list | None = None,
) -> DetectorOutput:
    """Full detector run with damping and a halve-damping divergence retry.

    ``forced_active`` bypasses thresholding (perfect-activity operation).
    A second divergence is recorded as a diagnostic, not an error; the last
    finite state is returned.
    """
    st, ratio, diverged = _run_once(
        y, x_pilot, priors, cfg, points, cfg.damping, pilot_only, trace
    )
    if diverged:
        st, ratio, diverged = _run_once(
            y, x_pilot, priors, cfg, points, cfg.damping / 2.0, pilot_only, trace
        )

    if forced_active is not None:
        active = np.sort(np.asarray(forced_active, dtype=int))
    else:
        active = detect_activity(st.rho_tilde, cfg.theta)
    if st.eta is None:
        n = x_pilot.shape[0]
        ld = y.shape[1] - x_pilot.shape[1]
        eta = (
            priors.copy()
            if priors is not None
            else np.full((n, max(ld, 0), points.size), 1.0 / points.size)
        )
    else:
        eta = st.eta
    return DetectorOutput(
        active_set=active,
        symbol_posteriors=eta,
        channel_estimate=st.h_hat,
        mean_rho=st.rho_tilde.mean(axis=0),
        iterations=st.iters,
        clamp_events=st.clamps.events,
        diverged=diverged,
        final_ratio=ratio,
    )
