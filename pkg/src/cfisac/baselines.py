"""Classical beamformers: WMMSE for the sum rate and conjugate beamforming.

WMMSE alternates receiver scalars, MSE weights and transmit beams over the
stacked (M*N_t)-dimensional channel, enforcing the per-AP power caps with
block-diagonal multipliers (active-set Newton, with a cyclic per-AP bisection
fallback). Conjugate
beamforming comes in a communication flavor (matched to the user channels,
equal power split) and a sensing flavor (matched to the target direction,
full power).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .system import (BeamformingSolution, ChannelSample, ConfigError,
                     SystemConfig,
                     steering_vector)


@dataclass(frozen=True)
class WmmseOptions:
    max_iters: int = 200
    rel_tol: float = 1e-6          # relative objective-change stopping threshold
    bisection_tol: float = 1e-9    # per-AP multiplier tolerance
    bisection_max: int = 100       # cap on bisection / cycling iterations

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if min(self.rel_tol, self.bisection_tol) <= 0:
            raise ValueError("tolerances must be > 0")


@dataclass
class WmmseTrace:
    objective_per_iter: List[float] = field(default_factory=list)
    converged: bool = False
    iters_used: int = 0
    regularized: bool = False


def cb_comm(config: SystemConfig, sample: ChannelSample) -> BeamformingSolution:
    """Conjugate beamforming for communication; sensing beams are zero.

    Each AP splits its budget equally over its users with nonzero channels;
    a zero channel gets a zero beam and its share is redistributed.
    """
    M, U, N = config.M, config.U, config.N_t
    f = np.zeros((M, config.S, N), dtype=np.complex128)
    for m in range(M):
        norms = np.linalg.norm(sample.h[m], axis=1)
        live = norms > 0
        n_live = int(np.sum(live))
        if n_live == 0:
            continue
        share = np.sqrt(config.P / n_live)
        for u in range(U):
            if live[u]:
                f[m, u] = share * sample.h[m, u] / norms[u]
    return BeamformingSolution(f=f)


def cb_sense(config: SystemConfig, sample: ChannelSample) -> BeamformingSolution:
    """Full power on the target direction at each AP; communication beams zero."""
    if config.Q != 1:
        raise ConfigError("cb_sense needs one sensing stream (Q=1)")
    M, N = config.M, config.N_t
    f = np.zeros((M, config.S, N), dtype=np.complex128)
    for m in range(M):
        a = steering_vector(sample.theta[m], N)
        f[m, config.U] = np.sqrt(config.P) * a / np.linalg.norm(a)
    return BeamformingSolution(f=f)


def _sum_rate_stacked(H: np.ndarray, F: np.ndarray, sigma2: float) -> float:
    """Sum rate for stacked channels H (U, MN) and beams F (MN, U)."""
    inner = H.conj() @ F                      # inner[k, j] = h_k^H f_j
    powers = np.abs(inner) ** 2
    sig = np.diag(powers)
    interf = powers.sum(axis=1) - sig
    return float(np.sum(np.log2(1.0 + sig / (interf + sigma2))))


def _block_powers(F: np.ndarray, M: int, N: int) -> np.ndarray:
    return np.sum(np.abs(F.reshape(M, N, -1)) ** 2, axis=(1, 2))


def _solve_system(A: np.ndarray, B: np.ndarray, mu: np.ndarray, N: int,
                  trace: Optional[WmmseTrace]) -> np.ndarray:
    K = A + np.kron(np.diag(mu), np.eye(N))
    try:
        F = np.linalg.solve(K, B)
        if np.all(np.isfinite(F)):
            return F
    except np.linalg.LinAlgError:
        pass
    if trace is not None:
        trace.regularized = True
    K = K + 1e-12 * np.eye(K.shape[0])
    return np.linalg.solve(K, B)


def _coordinate_power_profile(A, B, mu, m, N):
    """Closed form for the block-m power as a function of its multiplier.

    With the other multipliers fixed, beams restricted to block m follow a
    Schur complement S0 + mu_m*I; eigendecomposing S0 gives
    p_m(x) = sum_i w_i / (lam_i + x)^2.
    """
    MN = A.shape[0]
    blk = np.arange(m * N, (m + 1) * N)
    oth = np.setdiff1d(np.arange(MN), blk)
    K = A + np.kron(np.diag(mu), np.eye(N))
    K[np.ix_(blk, blk)] -= mu[m] * np.eye(N)
    if oth.size:
        Koo_inv = np.linalg.pinv(K[np.ix_(oth, oth)], hermitian=True, rcond=1e-12)
        T = K[np.ix_(blk, oth)] @ Koo_inv
        S0 = K[np.ix_(blk, blk)] - T @ K[np.ix_(oth, blk)]
        C = B[blk] - T @ B[oth]
    else:
        S0 = K[np.ix_(blk, blk)]
        C = B[blk]
    lam, V = np.linalg.eigh((S0 + S0.conj().T) / 2)
    lam = np.maximum(lam, 0.0)
    w = np.sum(np.abs(V.conj().T @ C) ** 2, axis=1)
    return lam, w


def _power_at(lam, w, x):
    d = lam + x
    if np.any(d <= 0):
        return np.inf
    with np.errstate(divide="ignore"):
        terms = np.where(w > 0, w / d ** 2, 0.0)
    return float(np.sum(terms))


def _fit_newton(A, B, P: float, M: int, N: int, opts: WmmseOptions,
                mu0: Optional[np.ndarray]) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    """Active-set Newton iteration on the per-AP power equations p_m(mu) = P.

    One inverse of the system matrix per step yields both the powers and the
    analytic Jacobian dp/dmu. Returns None if it fails to converge.
    """
    MN = A.shape[0]
    blocks = [np.arange(m * N, (m + 1) * N) for m in range(M)]
    mu = np.ones(M) if mu0 is None or not np.any(mu0 > 0) else np.array(mu0, float)
    mu = np.maximum(mu, 1e-12)
    active = np.ones(M, dtype=bool)
    for _ in range(opts.bisection_max):
        K = A + np.kron(np.diag(mu), np.eye(N))
        try:
            G = np.linalg.inv(K)
        except np.linalg.LinAlgError:
            return None
        F = G @ B
        Fb = F.reshape(M, N, -1)
        p = np.sum(np.abs(Fb) ** 2, axis=(1, 2))
        r = p - P

        # re-admit clamped blocks whose caps are violated again
        active |= (r > 1e-12 * P) & (mu <= 0)
        act = np.where(active)[0]
        if act.size == 0:
            return np.zeros(M), F
        if np.max(np.abs(r[act])) <= 1e-10 * P and np.all(r[~active] <= 1e-9 * P):
            mu = mu.copy()
            mu[~active] = 0.0
            return mu, F

        # J[m, n] = dp_m/dmu_n = -2 Re sum_u f_u[m]^H (G[:, n] f_u[n])[m]
        J = np.zeros((M, M))
        for n in range(M):
            dFb = (G[:, blocks[n]] @ Fb[n]).reshape(M, N, -1)
            for m in range(M):
                J[m, n] = -2.0 * np.real(np.sum(np.conj(Fb[m]) * dFb[m]))
        try:
            step = np.linalg.solve(J[np.ix_(act, act)], -r[act])
        except np.linalg.LinAlgError:
            return None
        mu = mu.copy()
        mu[act] += step
        floored = mu < 0
        if np.any(floored):
            mu[floored] = 0.0
            active[floored] = False
    return None


def _fit_multipliers(A, B, P: float, M: int, N: int, opts: WmmseOptions,
                     trace: Optional[WmmseTrace],
                     mu0: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Find mu >= 0 enforcing every per-AP cap with complementary slackness."""
    zeros = np.zeros(M)
    F = _solve_system(A, B, zeros, N, trace)
    if np.all(_block_powers(F, M, N) <= P * (1 + 1e-12)):
        return zeros, F

    fit = _fit_newton(A, B, P, M, N, opts, mu0)
    if fit is not None:
        return fit

    # fallback: cyclic per-coordinate bisection
    mu = np.ones(M) if mu0 is None or not np.any(mu0 > 0) else np.array(mu0, dtype=float)
    for _cycle in range(opts.bisection_max):
        for m in range(M):
            lam, w = _coordinate_power_profile(A, B, mu, m, N)
            if _power_at(lam, w, 0.0) <= P:
                mu[m] = 0.0
                continue
            hi = max(mu[m], 1e-6)
            while _power_at(lam, w, hi) > P:
                hi *= 2.0
                if hi > 1e18:
                    break
            lo = 0.0
            for _ in range(100):
                mid = 0.5 * (lo + hi)
                if _power_at(lam, w, mid) > P:
                    lo = mid
                else:
                    hi = mid
                if hi - lo <= opts.bisection_tol * max(1.0, hi):
                    break
            mu[m] = hi
        F = _solve_system(A, B, mu, N, trace)
        p = _block_powers(F, M, N)
        active_ok = (p <= P * (1 + 1e-9))
        slack_ok = (mu <= opts.bisection_tol) | (np.abs(p - P) <= 1e-8 * P)
        if np.all(active_ok & slack_ok):
            break
    # safeguard: scale down any block left marginally above its cap
    p = _block_powers(F, M, N)
    over = p > P
    if np.any(over):
        Fb = F.reshape(M, N, -1)
        Fb[over] *= np.sqrt(P / p[over])[:, None, None]
        F = Fb.reshape(F.shape)
    return mu, F


def wmmse(config: SystemConfig, sample: ChannelSample,
          options: Optional[WmmseOptions] = None
          ) -> Tuple[BeamformingSolution, WmmseTrace]:
    """Sum-rate WMMSE with per-AP power caps; sensing beams stay zero.

    Initialized at the conjugate-beamforming solution. Returns the best
    iterate together with the per-iteration sum-rate trace.
    """
    opts = options or WmmseOptions()
    M, U, N = config.M, config.U, config.N_t
    MN = M * N
    sigma2 = config.sigma2_c

    H = sample.h.transpose(1, 0, 2).reshape(U, MN)   # h_u stacked over APs
    F = cb_comm(config, sample).f[:, :U].transpose(0, 2, 1).reshape(MN, U)

    trace = WmmseTrace()
    best_obj = -np.inf
    best_F = F.copy()
    mu = None
    prev = None
    for it in range(opts.max_iters):
        inner = H.conj() @ F
        denom = np.sum(np.abs(inner) ** 2, axis=1) + sigma2
        u_rx = np.diag(inner) / denom
        w = 1.0 / np.real(1.0 - u_rx.conj() * np.diag(inner))

        scale = w * np.abs(u_rx) ** 2
        A = (H.T * scale) @ H.conj()
        A = (A + A.conj().T) / 2
        B = H.T @ np.diag(w * u_rx.conj())

        mu, F = _fit_multipliers(A, B, config.P, M, N, opts, trace, mu0=mu)

        obj = _sum_rate_stacked(H, F, sigma2)
        trace.objective_per_iter.append(obj)
        trace.iters_used = it + 1
        if obj >= best_obj:
            best_obj = obj
            best_F = F.copy()
        if prev is not None and abs(obj - prev) <= opts.rel_tol * max(1.0, abs(prev)):
            trace.converged = True
            break
        prev = obj

    f = np.zeros((M, config.S, N), dtype=np.complex128)
    f[:, :U] = best_F.reshape(M, N, U).transpose(0, 2, 1)
    return BeamformingSolution(f=f), trace
