"""Bezier curves on ``[0, T]`` and their exact integration.

Integrating a degree-``M`` Bezier curve yields a degree-``M+1`` curve whose
control values follow from a single linear solve with the banded matrix
built by :func:`phi_matrix`.
"""
from __future__ import annotations

import dataclasses
from math import comb

import numpy as np


class DomainError(ValueError):
    pass


@dataclasses.dataclass(frozen=True, eq=False)
class BezierCurve:
    """Multi-channel Bezier curve.

    ``coeffs`` has shape ``(M+1, channels)``; a 1-D array is one channel.
    """

    coeffs: np.ndarray
    T: float

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim == 1:
            c = c[:, None]
        if c.shape[0] < 2:
            raise ValueError("a Bezier curve needs at least two control values")
        if not self.T > 0:
            raise ValueError("duration must be positive")
        object.__setattr__(self, "coeffs", c)

    @property
    def order(self):
        return self.coeffs.shape[0] - 1

    def __call__(self, t):
        return evaluate(self, t)


def evaluate(c: BezierCurve, t):
    """De Casteljau evaluation at time(s) ``t`` in ``[0, T]``."""
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts < 0) or np.any(ts > c.T):
        raise DomainError(f"t outside [0, {c.T}]")
    s = ts / c.T
    out = np.empty((len(ts), c.coeffs.shape[1]))
    for k, sk in enumerate(s):
        b = c.coeffs.copy()
        for r in range(1, len(b)):
            b[: len(b) - r] = (1 - sk) * b[: len(b) - r] + sk * b[1: len(b) - r + 1]
        out[k] = b[0]
    # endpoint interpolation is exact by definition
    out[ts == 0] = c.coeffs[0]
    out[ts == c.T] = c.coeffs[-1]
    return out[0] if np.ndim(t) == 0 else out


def bernstein_row(M, s):
    """Bernstein basis values ``b_{k,M}(s)`` for ``k = 0..M``."""
    k = np.arange(M + 1)
    return np.array([comb(M, i) for i in k]) * s ** k * (1 - s) ** (M - k)


def phi_matrix(M, T):
    """``(M+2) x (M+2)`` banded matrix of the integration relation."""
    P = np.zeros((M + 2, M + 2))
    idx = np.arange(M + 1)
    P[idx, idx] = -1.0
    P[idx, idx + 1] = 1.0
    P[M + 1, 0] = T / (M + 1)
    return P


def integration_matrix(M, T):
    """Matrix ``K`` with ``beta = K @ [alpha; init]``.

    ``alpha`` holds the ``M+1`` control values of the integrand and ``beta``
    the ``M+2`` control values of its integral starting at ``init``.
    """
    lhs = (M + 1) / T * phi_matrix(M, T)
    K = np.linalg.inv(lhs)
    assert np.all(np.isfinite(K))
    return K


def integrate(alpha, init, T):
    """Control values of ``init + integral_0^t curve(s) ds``.

    ``alpha`` is ``(M+1,)`` or ``(M+1, channels)``; ``init`` is a scalar or a
    vector with one entry per channel.
    """
    a = np.asarray(alpha, dtype=float)
    one = a.ndim == 1
    if one:
        a = a[:, None]
    init = np.broadcast_to(np.asarray(init, dtype=float), (a.shape[1],))
    K = integration_matrix(a.shape[0] - 1, T)
    beta = K @ np.vstack([a, init[None, :]])
    return beta[:, 0] if one else beta


def sample_times(N_t, T):
    """Uniform grid of ``N_t`` times including both endpoints."""
    if N_t < 2:
        raise ValueError("need at least two samples")
    return np.linspace(0.0, T, N_t)


def stance_coefficients(alpha_F, q0, qd0, T, D, a_g):
    """Twist and configuration control values of one stance phase.

    ``alpha_F`` is ``(M+1, 3)``.  Returns ``(alpha_qd, alpha_q)`` of shapes
    ``(M+2, 3)`` and ``(M+3, 3)``.
    """
    acc = np.asarray(alpha_F, dtype=float) @ np.linalg.inv(D).T + np.asarray(a_g)
    alpha_qd = integrate(acc, qd0, T)
    alpha_q = integrate(alpha_qd, q0, T)
    return alpha_qd, alpha_q


def stance_maps(M, T, times, D, a_g):
    """Affine maps from stance decision variables to sampled quantities.

    The decision vector is ``z = [vec(alpha_F), q0, qd0]`` with
    ``vec(alpha_F)`` channel-major (all ``fx`` control values, then ``fz``,
    then ``tau_y``).  Returns three lists over sample times of pairs
    ``(G, h)`` such that the sampled wrench, configuration and twist equal
    ``G @ z + h``.
    """
    n_a = 3 * (M + 1)
    nz = n_a + 6
    Dinv = np.diag(1.0 / np.diag(D))
    a_g = np.asarray(a_g, dtype=float)
    K1 = integration_matrix(M, T)        # (M+2, M+2)
    K2 = integration_matrix(M + 1, T)    # (M+3, M+3)
    wrench, config, twist = [], [], []
    for t in times:
        s = min(max(t / T, 0.0), 1.0)
        bF = bernstein_row(M, s)
        bV = bernstein_row(M + 1, s)
        bQ = bernstein_row(M + 2, s)
        # twist control values per channel: K1 @ [Dinv*alpha + a_g ; qd0]
        # so sampled twist = bV @ K1[:, :M+1] @ (Dinv*alpha + a_g) + bV @ K1[:, M+1] * qd0
        wV = bV @ K1
        wQ = bQ @ K2
        # configuration = wQ[:M+2] @ alpha_qd + wQ[M+2] * q0
        cQ = wQ[: M + 2] @ K1      # weight on [acc; qd0] per channel
        GF = np.zeros((3, nz))
        GV = np.zeros((3, nz))
        GQ = np.zeros((3, nz))
        hV = np.zeros(3)
        hQ = np.zeros(3)
        for ch in range(3):
            sl = slice(ch * (M + 1), (ch + 1) * (M + 1))
            GF[ch, sl] = bF
            GV[ch, sl] = wV[: M + 1] * Dinv[ch, ch]
            GV[ch, n_a + 3 + ch] = wV[M + 1]
            hV[ch] = wV[: M + 1].sum() * a_g[ch]
            GQ[ch, sl] = cQ[: M + 1] * Dinv[ch, ch]
            GQ[ch, n_a + 3 + ch] = cQ[M + 1]
            GQ[ch, n_a + ch] = wQ[M + 2]
            hQ[ch] = cQ[: M + 1].sum() * a_g[ch]
        wrench.append((GF, np.zeros(3)))
        config.append((GQ, hQ))
        twist.append((GV, hV))
    return wrench, config, twist


def trajectory_csv_rows(alpha_F, q0, qd0, T, D, a_g, rate, t_offset=0.0, frame=None):
    """Rows ``t, fx, fz, tau_y, x, z, theta, xd, zd, thetad`` of one stance."""
    alpha_F = np.asarray(alpha_F, dtype=float)
    a_qd, a_q = stance_coefficients(alpha_F, q0, qd0, T, D, a_g)
    n = max(2, int(round(T * rate)) + 1)
    ts = np.linspace(0.0, T, n)
    F = evaluate(BezierCurve(alpha_F, T), ts)
    Q = evaluate(BezierCurve(a_q, T), ts)
    V = evaluate(BezierCurve(a_qd, T), ts)
    if frame is not None:
        Q = Q + np.asarray(frame)
    return np.column_stack([ts + t_offset, F, Q, V])
