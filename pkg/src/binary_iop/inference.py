"""
Flat-prior Gaussian-likelihood posterior and a random-walk Metropolis sampler.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .grid_pde import GridSpec, ModelParams, ZeroPivotError, observe, solve_forward
from .synthetic import Observations

logger = logging.getLogger(__name__)

PARAM_NAMES = ("theta1", "theta2", "theta3", "sigma0")
DEFAULT_GAMMA = (0.02, 0.02, 0.02, 0.01)
SIGMA_EPS_FLOOR = 0.01


class ChainStalledError(RuntimeError):
    """The sampler accepted almost nothing during its opening steps."""


@dataclass(frozen=True)
class PriorBox:
    lower: np.ndarray = field(default_factory=lambda: np.array([-10.0, -10.0, -10.0, 0.05]))
    upper: np.ndarray = field(default_factory=lambda: np.array([10.0, 10.0, 10.0, 10.0]))

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).ravel()
        hi = np.asarray(self.upper, dtype=float).ravel()
        if lo.shape != (4,) or hi.shape != (4,):
            raise ValueError("prior bounds must be 4-vectors")
        if not np.all(lo < hi):
            raise ValueError("prior lower bounds must be below upper bounds")
        if lo[3] <= 0:
            raise ValueError("prior lower bound on sigma0 must be positive")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def contains(self, theta) -> bool:
        t = np.asarray(theta, dtype=float)
        return bool(np.all(t >= self.lower) and np.all(t <= self.upper))

    def project(self, theta) -> np.ndarray:
        return np.clip(np.asarray(theta, dtype=float), self.lower, self.upper)


def calibrate_sigma_eps(values, relative_level: float, floor: float = SIGMA_EPS_FLOOR) -> float:
    """Likelihood scale ``max(relative_level, floor) * RMS(values)``."""
    rms = float(np.sqrt(np.mean(np.square(values))))
    return max(relative_level, floor) * rms


@dataclass(frozen=True)
class PosteriorSpec:
    data: Observations
    grid: GridSpec = field(default_factory=GridSpec)
    r: float = 0.05
    prior: PriorBox = field(default_factory=PriorBox)
    sigma_eps: float = 0.01

    def __post_init__(self):
        if not (self.sigma_eps > 0):
            raise ValueError(f"sigma_eps must be positive, got {self.sigma_eps}")
        if isinstance(self.data, Observations) and type(self.data) is not Observations:
            # keep the ground truth out of the posterior
            object.__setattr__(self, "data", Observations(self.data.points, self.data.values))

    @property
    def observed(self) -> np.ndarray:
        return self.data.values

    def predict(self, theta) -> np.ndarray:
        """Forward model F(theta) at the measurement points."""
        params = ModelParams.from_vector(theta, self.r)
        return observe(solve_forward(params, self.grid), self.data.points)

    def __call__(self, theta) -> float:
        return log_posterior(self, theta)


def log_posterior(spec: PosteriorSpec, theta) -> float:
    """
    Unnormalized log posterior ``-|Y - F(theta)|^2 / (2 sigma_eps^2)``.

    Returns ``-inf`` outside the prior box or when the forward solve fails.
    """
    t = theta.theta if isinstance(theta, ModelParams) else np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ValueError("theta must be finite")
    if not spec.prior.contains(t):
        return -math.inf
    try:
        pred = spec.predict(t)
    except (ZeroPivotError, ValueError) as exc:
        logger.warning("forward solve failed at theta=%s: %s", t, exc)
        return -math.inf
    resid = spec.observed - pred
    val = -float(resid @ resid) / (2.0 * spec.sigma_eps**2)
    return val if math.isfinite(val) else -math.inf


@dataclass
class StepResult:
    theta: np.ndarray
    log_post: float
    accepted: bool
    proposal: np.ndarray
    proposal_log_post: float
    uniform: float


def _move(target, theta, log_post, step, u):
    # returns (state, log_post, accepted, proposal_log_post)
    proposal = theta + step
    lp_new = target(proposal)
    if lp_new == -math.inf:
        return theta, log_post, False, lp_new
    delta = lp_new - log_post
    if delta >= 0 or u < math.exp(delta):
        return proposal, lp_new, True, lp_new
    return theta, log_post, False, lp_new


def mh_step(target, theta, log_post: float, gamma, rng: np.random.Generator) -> StepResult:
    """
    One random-walk Metropolis-Hastings move.

    ``target`` is a PosteriorSpec or any callable returning a log density.
    The proposal is ``theta + gamma * z`` with standard normal ``z``, and it
    is accepted when ``u < exp(delta log_post)`` for ``u ~ U(0, 1)``.
    """
    theta = np.asarray(theta, dtype=float)
    step = np.asarray(gamma, dtype=float) * rng.standard_normal(theta.shape)
    u = rng.random()
    new, lp, accepted, lp_prop = _move(target, theta, log_post, step, u)
    return StepResult(new, lp, accepted, theta + step, lp_prop, u)


@dataclass(frozen=True)
class Chain:
    """
    Sampler history. ``samples[k]`` is the state after move ``k + 1``;
    the starting point is kept separately in ``init``.
    """

    samples: np.ndarray
    log_posts: np.ndarray
    accepted: np.ndarray
    burn_in: int
    proposal_gamma: np.ndarray
    seed: int | None
    init: np.ndarray
    proposal_log_posts: np.ndarray | None = None
    uniforms: np.ndarray | None = None
    gamma_history: list = field(default_factory=list)

    def __post_init__(self):
        k = self.samples.shape[0]
        if not 0 <= self.burn_in < k:
            raise ValueError(f"burn_in must be in [0, {k}), got {self.burn_in}")

    @property
    def accept_count(self) -> int:
        return int(np.count_nonzero(self.accepted))

    @property
    def acceptance_rate(self) -> float:
        return self.accept_count / len(self)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def retained(self) -> np.ndarray:
        """Samples with index past the burn-in."""
        return self.samples[self.burn_in:]

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", *PARAM_NAMES, "log_post", "accepted"])
            for k, (row, lp, acc) in enumerate(zip(self.samples, self.log_posts, self.accepted), 1):
                w.writerow([k, *(repr(float(v)) for v in row), repr(float(lp)), int(acc)])

    @classmethod
    def from_csv(cls, path, burn_in: int = 0, seed=None) -> "Chain":
        with open(Path(path), newline="") as fh:
            rows = list(csv.DictReader(fh))
        samples = np.array([[float(r[n]) for n in PARAM_NAMES] for r in rows])
        return cls(
            samples=samples,
            log_posts=np.array([float(r["log_post"]) for r in rows]),
            accepted=np.array([r["accepted"] == "1" for r in rows]),
            burn_in=burn_in,
            proposal_gamma=np.full(samples.shape[1], np.nan),
            seed=seed,
            init=np.full(samples.shape[1], np.nan),
        )


def run_chain(
    target,
    init,
    k_total: int = 100_000,
    k_burn: int = 30_000,
    gamma: Sequence[float] = DEFAULT_GAMMA,
    seed: int | None = 0,
    adapt: bool = True,
    adapt_every: int = 1000,
    accept_window: tuple[float, float] = (0.20, 0.45),
    stall_check: int = 5000,
    stall_rate: float = 0.005,
    progress: Callable[[int, int], None] | None = None,
) -> Chain:
    """
    Metropolis-Hastings chain of ``k_total`` moves from ``init``.

    While ``k < k_burn`` and ``adapt`` is on, the proposal scale is doubled
    (halved) every ``adapt_every`` moves when the windowed acceptance rate
    is above (below) ``accept_window``. The scale is frozen from ``k_burn``
    on, so the retained segment is an ordinary time-homogeneous chain.

    Raises
    ------
    ChainStalledError
        If fewer than ``stall_rate`` of the first ``stall_check`` moves
        were accepted.
    """
    if k_total < 1:
        raise ValueError("k_total must be at least 1")
    if not 0 <= k_burn < k_total:
        raise ValueError(f"need 0 <= k_burn < k_total, got k_burn={k_burn}, k_total={k_total}")
    theta = np.asarray(init.theta if isinstance(init, ModelParams) else init, dtype=float)
    gamma = np.array(gamma, dtype=float) * np.ones_like(theta)
    if np.any(gamma <= 0):
        raise ValueError("proposal scales must be positive")
    if isinstance(target, PosteriorSpec) and not target.prior.contains(theta):
        raise ValueError(f"initial state {theta} lies outside the prior box")

    lp = target(theta) if callable(target) else log_posterior(target, theta)
    if lp == -math.inf:
        raise ValueError(f"initial state {theta} has zero posterior density")

    rng = np.random.default_rng(seed)
    dim = theta.shape[0]
    samples = np.empty((k_total, dim))
    log_posts = np.empty(k_total)
    accepted = np.zeros(k_total, dtype=bool)
    prop_lps = np.empty(k_total)
    uniforms = np.empty(k_total)
    gamma_history = [(0, gamma.tolist())]
    window_acc = 0
    block = 4096

    for k in range(k_total):
        b = k % block
        if b == 0:
            z = rng.standard_normal((min(block, k_total - k), dim))
            uniforms[k : k + z.shape[0]] = rng.random(z.shape[0])
        u = uniforms[k]
        theta, lp, acc, prop_lps[k] = _move(target, theta, lp, gamma * z[b], u)
        samples[k] = theta
        log_posts[k] = lp
        accepted[k] = acc
        window_acc += acc

        done = k + 1
        if done == stall_check and done < k_total:
            rate = accepted[:done].mean()
            if rate < stall_rate:
                raise ChainStalledError(
                    f"acceptance rate {rate:.4f} over the first {done} moves is below "
                    f"{stall_rate}; proposal scale {gamma.tolist()} is likely mis-sized"
                )
        if adapt and done % adapt_every == 0 and done <= k_burn:
            rate = window_acc / adapt_every
            if rate < accept_window[0]:
                gamma = gamma * 0.5
            elif rate > accept_window[1]:
                gamma = gamma * 2.0
            gamma_history.append((done, gamma.tolist()))
            window_acc = 0
        if progress is not None and done % 10_000 == 0:
            progress(done, k_total)

    return Chain(
        samples=samples,
        log_posts=log_posts,
        accepted=accepted,
        burn_in=k_burn,
        proposal_gamma=gamma,
        seed=seed,
        init=np.asarray(init.theta if isinstance(init, ModelParams) else init, dtype=float),
        proposal_log_posts=prop_lps,
        uniforms=uniforms,
        gamma_history=gamma_history,
    )


def conditional_mean(chain: Chain, r: float | None = None):
    """
    Posterior mean estimate: average of the samples past the burn-in.

    Returns a 4-vector, or ModelParams when ``r`` is given.
    """
    if chain.burn_in >= len(chain):
        raise ValueError("no samples past the burn-in")
    mean = chain.retained.mean(axis=0)
    return mean if r is None else ModelParams.from_vector(mean, r)


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    mass: np.ndarray

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_left", "bin_right", "mass"])
            for lo, hi, m in zip(self.edges[:-1], self.edges[1:], self.mass):
                w.writerow([repr(float(lo)), repr(float(hi)), repr(float(m))])

    @classmethod
    def from_csv(cls, path) -> "Histogram":
        with open(Path(path), newline="") as fh:
            rows = list(csv.DictReader(fh))
        edges = [float(rows[0]["bin_left"])] + [float(r["bin_right"]) for r in rows]
        return cls(np.array(edges), np.array([float(r["mass"]) for r in rows]))


def posterior_histogram(chain: Chain, coordinate, n_bins: int = 50) -> Histogram:
    """Unit-mass histogram of one coordinate over the retained samples."""
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    idx = PARAM_NAMES.index(coordinate) if isinstance(coordinate, str) else int(coordinate)
    x = chain.retained[:, idx]
    if x.size == 0:
        raise ValueError("no samples past the burn-in")
    lo, hi = float(x.min()), float(x.max())
    if lo == hi:
        edges = np.linspace(lo - 0.5, hi + 0.5, n_bins + 1) if n_bins > 1 else np.array([lo - 0.5, hi + 0.5])
        counts, _ = np.histogram(x, bins=edges)
    else:
        counts, edges = np.histogram(x, bins=n_bins, range=(lo, hi))
    return Histogram(edges, counts / counts.sum())


def effective_sample_size(x, max_lag: int | None = None) -> float:
    """
    Integrated-autocorrelation ESS with Geyer's initial positive sequence.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4:
        return float(n)
    xc = x - x.mean()
    var = xc @ xc / n
    if var == 0:
        return float(n)
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, nfft)
    acf = np.fft.irfft(f * np.conj(f), nfft)[:n] / (n * var)
    max_lag = n - 1 if max_lag is None else min(max_lag, n - 1)
    tau = 1.0
    for lag in range(1, max_lag, 2):
        pair = acf[lag] + acf[lag + 1]
        if pair <= 0:
            break
        tau += 2.0 * pair
    return n / tau
