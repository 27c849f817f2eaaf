"""Box-constrained minimizers for noisy objectives.

The default is Bayesian optimization: a space-filling initial design, a
Gaussian-process surrogate with a squared-exponential kernel and the
expected-improvement acquisition. A deterministic Nelder-Mead simplex is
available as a fallback.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize as sopt
from scipy.stats import norm, qmc
from sklearn.exceptions import ConvergenceWarning
from sklearn.gaussian_process import GaussianProcessRegressor
from sklearn.gaussian_process.kernels import RBF, ConstantKernel

logger = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], "tuple[float, float]"]


@dataclass
class OptimizerConfig:
    """Optimizer settings.

    Attributes
    ----------
    method : {"gp", "nelder-mead"}
    budget : int
        Total objective evaluations.
    n_init : int
        Size of the initial Latin-hypercube design (GP only).
    length_scale : float
        Initial kernel length scale as a fraction of the box width.
    noise_floor : float
        Jitter added to the normalized noise variance of every point.
    n_candidates : int
        Random candidates scored by the acquisition each iteration.
    xi : float
        Exploration margin of expected improvement (normalized units).
    explore_every : int
        When positive, every ``explore_every``-th proposal maximizes the
        posterior standard deviation instead of expected improvement.
    periodic : bool
        Treat every coordinate as an angle with period equal to its box
        width; the kernel then acts on ``(cos, sin)`` features.
    embedding : callable, optional
        Map from an ``(n, d)`` array of points to ``(n, m)`` kernel features
        with entries in ``[-1, 1]``; overrides ``periodic``. Useful when
        distinct points are equivalent or the objective is simple in
        other coordinates.
    seed : int
    """

    method: str = "gp"
    budget: int = 60
    n_init: int = 10
    length_scale: float = 0.3
    noise_floor: float = 1e-8
    n_candidates: int = 2000
    xi: float = 0.0
    explore_every: int = 4
    periodic: bool = False
    seed: int = 0
    embedding: Callable | None = field(default=None, repr=False, compare=False)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["embedding"] = None if self.embedding is None else getattr(self.embedding, "__name__", "custom")
        return d


@dataclass
class OptimizeTrace:
    points: list = field(default_factory=list)
    values: list = field(default_factory=list)
    stderr: list = field(default_factory=list)
    acquisition: list = field(default_factory=list)

    @property
    def n_evaluations(self) -> int:
        return len(self.values)

    def best_so_far(self) -> np.ndarray:
        return np.minimum.accumulate(np.asarray(self.values, dtype=float))

    def improvements(self, tol: float = 1e-12) -> list[int]:
        """Evaluation indices (after the first) that lowered the best value."""
        b = self.best_so_far()
        return [i for i in range(1, len(b)) if b[i] < b[i - 1] - tol]

    def as_dict(self) -> dict:
        return {
            "points": [list(map(float, p)) for p in self.points],
            "values": [float(v) for v in self.values],
            "stderr": [float(s) for s in self.stderr],
            "acquisition": [None if a is None else float(a) for a in self.acquisition],
        }


@dataclass
class OptimizeResult:
    x: np.ndarray
    value: float
    stderr: float
    trace: OptimizeTrace
    converged: bool = True


class _Recorder:
    def __init__(self, objective: Objective, budget: int):
        self.objective = objective
        self.budget = budget
        self.trace = OptimizeTrace()

    def __call__(self, x, acq=None) -> float:
        if self.trace.n_evaluations >= self.budget:
            raise _BudgetExhausted
        v, s = self.objective(np.asarray(x, dtype=float))
        self.trace.points.append(np.array(x, dtype=float))
        self.trace.values.append(float(v))
        self.trace.stderr.append(float(s))
        self.trace.acquisition.append(acq)
        return float(v)


class _BudgetExhausted(Exception):
    pass


def expected_improvement(mu: np.ndarray, sigma: np.ndarray, best: float, xi: float = 0.0) -> np.ndarray:
    """EI for minimization."""
    sigma = np.maximum(sigma, 1e-12)
    z = (best - mu - xi) / sigma
    return (best - mu - xi) * norm.cdf(z) + sigma * norm.pdf(z)


class _Features:
    """Input map seen by the kernel: identity, angle pairs or an embedding."""

    def __init__(self, lo: np.ndarray, width: np.ndarray, cfg: OptimizerConfig):
        self.lo, self.width = lo, width
        self.periodic, self.embedding = cfg.periodic, cfg.embedding

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        if self.embedding is not None:
            return np.atleast_2d(self.embedding(x))
        if not self.periodic:
            return x
        a = 2 * np.pi * (x - self.lo) / self.width
        return np.hstack([np.cos(a), np.sin(a)])

    def widths(self, m: int) -> np.ndarray:
        if self.embedding is not None or self.periodic:
            return np.full(m, 2.0)
        return self.width


def _fit_gp(x: np.ndarray, y: np.ndarray, s: np.ndarray, width: np.ndarray, cfg: OptimizerConfig, rng):
    ym, ys = float(np.mean(y)), float(np.std(y))
    ys = ys if ys > 1e-12 else 1.0
    yn = (y - ym) / ys
    d = x.shape[1]
    kernel = ConstantKernel(1.0, (1e-3, 1e3)) * RBF(
        length_scale=np.full(d, cfg.length_scale) * width,
        length_scale_bounds=[(1e-2 * w, 10 * w) for w in width],
    )
    alpha = (s / ys) ** 2 + cfg.noise_floor
    gp = GaussianProcessRegressor(kernel, alpha=alpha, normalize_y=False,
                                  n_restarts_optimizer=2, random_state=int(rng.integers(2 ** 31)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        gp.fit(x, yn)
    return gp, ym, ys


class _MappedGP:
    def __init__(self, gp, feats: _Features):
        self.gp, self.feats = gp, feats

    def predict(self, x, return_std=False):
        return self.gp.predict(self.feats(x), return_std=return_std)


def _surrogate(x, y, s, lo, hi, cfg, rng):
    feats = _Features(lo, hi - lo, cfg)
    fx = feats(x)
    gp, _, _ = _fit_gp(fx, y, s, feats.widths(fx.shape[1]), cfg, rng)
    return _MappedGP(gp, feats)


def _gp_minimize(rec: _Recorder, lo: np.ndarray, hi: np.ndarray, cfg: OptimizerConfig) -> None:
    rng = np.random.default_rng(cfg.seed)
    d = len(lo)
    width = hi - lo
    n_init = min(cfg.n_init, cfg.budget)
    design = qmc.LatinHypercube(d=d, seed=rng).random(n_init)
    for u in design:
        rec(lo + u * width)
    while rec.trace.n_evaluations < cfg.budget:
        x = np.array(rec.trace.points)
        y = np.array(rec.trace.values)
        s = np.array(rec.trace.stderr)
        gp = _surrogate(x, y, s, lo, hi, cfg, rng)
        mu_obs = gp.predict(x)
        best = float(np.min(mu_obs))
        best_x = x[int(np.argmin(mu_obs))]

        step = rec.trace.n_evaluations - n_init + 1
        explore = cfg.explore_every > 0 and step % cfg.explore_every == 0

        def neg_ei(z):
            m, sd = gp.predict(np.atleast_2d(z), return_std=True)
            if explore:
                return -sd
            return -expected_improvement(m, sd, best, cfg.xi)

        cand = lo + rng.random((cfg.n_candidates, d)) * width
        # local candidates at shrinking scales around the incumbent
        n_loc = cfg.n_candidates // 8
        local = [best_x + rng.normal(scale=sc, size=(n_loc, d)) * width for sc in (0.1, 0.02, 0.004)]
        local = np.vstack(local)
        if cfg.periodic:
            local = lo + np.mod(local - lo, width)
        cand = np.vstack([cand, np.clip(local, lo, hi)])
        scores = neg_ei(cand)
        starts = cand[np.argsort(scores)[:3]]
        top_x, top_v = starts[0], float(scores.min())
        for x0 in starts:
            r = sopt.minimize(lambda z: float(neg_ei(z)[0]), x0, method="L-BFGS-B", bounds=list(zip(lo, hi)))
            if r.fun < top_v:
                top_x, top_v = r.x, float(r.fun)
        rec(top_x, acq=-top_v)


def optimize(objective: Objective, bounds: Sequence[tuple[float, float]],
             config: OptimizerConfig | None = None) -> OptimizeResult:
    """Minimize ``objective(x) -> (value, stderr)`` inside a box."""
    cfg = config or OptimizerConfig()
    lo = np.array([b[0] for b in bounds], dtype=float)
    hi = np.array([b[1] for b in bounds], dtype=float)
    if np.any(hi <= lo):
        raise ValueError("each bound must satisfy low < high")
    rec = _Recorder(objective, cfg.budget)
    converged = True
    try:
        if cfg.method == "gp":
            _gp_minimize(rec, lo, hi, cfg)
        elif cfg.method == "nelder-mead":
            x0 = (lo + hi) / 2
            r = sopt.minimize(lambda z: rec(np.clip(z, lo, hi)), x0, method="Nelder-Mead",
                              options={"maxfev": cfg.budget, "xatol": 1e-6, "fatol": 1e-10,
                                       "initial_simplex": np.vstack([x0, x0 + np.diag(0.25 * (hi - lo))])})
            converged = bool(r.success)
        else:
            raise ValueError(f"unknown optimizer {cfg.method!r}")
    except _BudgetExhausted:
        converged = False
    tr = rec.trace
    if not tr.values:
        raise RuntimeError("optimizer made no evaluations")
    if cfg.method == "gp" and any(s > 0 for s in tr.stderr) and len(tr.values) > 2:
        # noisy data: pick the evaluated point with the lowest posterior mean
        x = np.array(tr.points)
        gp = _surrogate(x, np.array(tr.values), np.array(tr.stderr), lo, hi, cfg,
                        np.random.default_rng(cfg.seed + 1))
        i = int(np.argmin(gp.predict(x)))
    else:
        i = int(np.argmin(tr.values))
    if not converged:
        logger.info("optimizer budget of %d evaluations exhausted", cfg.budget)
    return OptimizeResult(np.array(tr.points[i]), tr.values[i], tr.stderr[i], tr, converged)
