"""Closed-form cash-or-nothing price used to check the forward solver."""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr


def digital_price(y, tau, sigma0: float, r: float):
    """
    Discounted digital call price in log-moneyness ``y = log(K/x)``.

    ``exp(-r tau) * N((-y + (r - sigma0^2/2) tau) / (sigma0 sqrt(tau)))``,
    valid when the drift equals the rate. At ``tau == 0`` the payoff
    ``H(-y)`` is returned with 1/2 on the strike.
    """
    y = np.asarray(y, dtype=float)
    tau = np.asarray(tau, dtype=float)
    y, tau = np.broadcast_arrays(y, tau)
    out = np.where(y < 0, 1.0, np.where(y > 0, 0.0, 0.5)).astype(float)
    live = tau > 0
    if np.any(live):
        t = tau[live]
        d2 = (-y[live] + (r - 0.5 * sigma0**2) * t) / (sigma0 * np.sqrt(t))
        out[live] = np.exp(-r * t) * ndtr(d2)
    return out[()] if out.ndim == 0 else out


def digital_price_mc(y, tau: float, sigma0: float, r: float, n_paths: int = 200_000, seed: int = 0):
    """
    Monte Carlo estimate of the same price from the lognormal terminal state.

    Simulates ``log(S_T / S_0) = (r - sigma0^2/2) tau + sigma0 sqrt(tau) Z``
    and averages the discounted indicator ``S_T >= K``, i.e.
    ``log(S_T/S_0) >= y``. Returns (estimate, standard error).
    """
    rng = np.random.default_rng(seed)
    log_growth = (r - 0.5 * sigma0**2) * tau + sigma0 * np.sqrt(tau) * rng.standard_normal(n_paths)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    hits = log_growth[None, :] >= y[:, None]
    disc = np.exp(-r * tau)
    p = hits.mean(axis=1)
    return disc * p, disc * np.sqrt(p * (1 - p) / n_paths)


def oracle_boundary(sigma0: float, r: float, grid):
    """Boundary callable feeding the exact prices to the Dirichlet nodes."""

    def boundary(tau):
        return (
            digital_price(grid.y_min, tau, sigma0, r),
            digital_price(grid.y_max, tau, sigma0, r),
        )

    return boundary
