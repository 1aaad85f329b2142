"""Independent oracles used by the test suite.

Everything here is deliberately implemented differently from the package
(bit-level long division, exhaustive enumeration, dictionary-based message
passing) so agreement is meaningful.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit, logsumexp


def crc8_longdiv(bits, poly=0x107, width=8) -> int:
    """CRC by explicit polynomial long division of bits * x^8."""
    msg = list(int(b) for b in bits) + [0] * width
    poly_bits = [(poly >> (width - i)) & 1 for i in range(width + 1)]
    for i in range(len(msg) - width):
        if msg[i]:
            for j, p in enumerate(poly_bits):
                msg[i + j] ^= p
    rem = msg[-width:]
    out = 0
    for b in rem:
        out = (out << 1) | b
    return out


def enumerate_codewords(h: np.ndarray) -> np.ndarray:
    """All codewords of a (small) binary code by exhaustive search."""
    m, n = h.shape
    assert n <= 20, "exhaustive enumeration only for tiny codes"
    words = ((np.arange(2**n)[:, None] >> np.arange(n)[::-1]) & 1).astype(np.uint8)
    ok = ~((words @ h.T) % 2).any(axis=1)
    return words[ok]


def exact_bit_marginals(h: np.ndarray, prior_llr: np.ndarray) -> np.ndarray:
    """Exact posterior p(bit=0) per position given the code constraint."""
    words = enumerate_codewords(h).astype(float)
    # log weight of word c: sum_i [c_i=0] log p_i(0) + [c_i=1] log p_i(1)
    logp0 = np.log(expit(prior_llr))
    logp1 = np.log(expit(-prior_llr))
    logw = words @ logp1 + (1.0 - words) @ logp0
    logz = logsumexp(logw)
    p0 = np.zeros(h.shape[1])
    for i in range(h.shape[1]):
        mask = words[:, i] == 0
        p0[i] = np.exp(logsumexp(logw[mask]) - logz) if mask.any() else 0.0
    return p0


def bp_reference(h: np.ndarray, prior_llr: np.ndarray, n_iters: int, clip=30.0) -> np.ndarray:
    """Dictionary-based flooding sum-product decoder (no early exit)."""
    m, n = h.shape
    edges = [(i, j) for i in range(m) for j in range(n) if h[i, j]]
    checks = {i: [j for j in range(n) if h[i, j]] for i in range(m)}
    vars_ = {j: [i for i in range(m) if h[i, j]] for j in range(n)}
    c2v = {e: 0.0 for e in edges}
    post = np.array(prior_llr, dtype=float)
    for _ in range(n_iters):
        v2c = {}
        for (i, j) in edges:
            total = prior_llr[j] + sum(c2v[(i2, j)] for i2 in vars_[j] if i2 != i)
            v2c[(i, j)] = np.clip(total, -clip, clip)
        for (i, j) in edges:
            prod = 1.0
            for j2 in checks[i]:
                if j2 != j:
                    prod *= np.tanh(0.5 * v2c[(i, j2)])
            prod = np.clip(prod, np.nextafter(-1, 0), np.nextafter(1, 0))
            c2v[(i, j)] = np.clip(2.0 * np.arctanh(prod), -clip, clip)
        post = np.array(
            [prior_llr[j] + sum(c2v[(i, j)] for i in vars_[j]) for j in range(n)]
        )
        post = np.clip(post, -clip, clip)
    return post


def exact_channel_posterior_mean(
    y: np.ndarray,
    x_pilot: np.ndarray,
    points: np.ndarray,
    lam: np.ndarray,
    betas: np.ndarray,
    tx_power: float,
    noise_var: float,
) -> np.ndarray:
    """E[H | Y] by exhaustive enumeration of activity patterns and data
    symbols, with the channel integrated out in closed form per hypothesis.

    Matches the detector's model: every user's data symbols are a priori
    uniform over the constellation, activity lives in the channel prior.
    """
    m_ant, t_len = y.shape
    n_users, l_pil = x_pilot.shape
    ld = t_len - l_pil
    n_combo = len(points) ** (n_users * ld)
    assert n_users * ld <= 8, "hypothesis space too large"

    log_weights = []
    means = []
    for u_bits in range(2**n_users):
        active = [n for n in range(n_users) if (u_bits >> n) & 1]
        log_prior_u = sum(
            np.log(lam[n]) if (u_bits >> n) & 1 else np.log1p(-lam[n])
            for n in range(n_users)
        )
        for combo in range(n_combo):
            x = np.zeros((n_users, t_len), dtype=complex)
            x[:, :l_pil] = x_pilot
            c = combo
            for n in range(n_users):
                for t in range(ld):
                    x[n, l_pil + t] = points[c % len(points)]
                    c //= len(points)
            if active:
                s_mat = np.sqrt(tx_power) * x[active, :].T  # (T, |A|)
                prior_cov = np.diag(betas[active]).astype(complex)
                cov = s_mat @ prior_cov @ s_mat.conj().T + noise_var * np.eye(t_len)
                cov_inv = np.linalg.inv(cov)
                _, logdet = np.linalg.slogdet(cov)
                quad = np.real(np.einsum("mt,ts,ms->", y.conj(), cov_inv, y))
                log_ev = -m_ant * logdet - quad
                # posterior mean of the active columns, shared across antennas
                prec = (
                    s_mat.conj().T @ s_mat / noise_var
                    + np.diag(1.0 / betas[active])
                )
                sigma = np.linalg.inv(prec)
                mu = (sigma @ s_mat.conj().T @ y.T.conj()).conj() / noise_var  # (|A|, M)
                h_mean = np.zeros((m_ant, n_users), dtype=complex)
                h_mean[:, active] = mu.T
            else:
                quad = np.real(np.sum(np.abs(y) ** 2)) / noise_var
                log_ev = -m_ant * t_len * np.log(noise_var) - quad
                h_mean = np.zeros((m_ant, n_users), dtype=complex)
            log_weights.append(log_prior_u + log_ev)
            means.append(h_mean)

    log_weights = np.array(log_weights)
    w = np.exp(log_weights - logsumexp(log_weights))
    return np.tensordot(w, np.array(means), axes=1)
