"""Monte-Carlo side of the complexity analysis.

* the continuous-amortization integral  (2a)^n E_x[2^n / b(x)]  that bounds
  the final box count through a local size bound b,
* moments E_x[kappa_aff(f, x)^p] (optionally times log^2 kappa),
* exceedance frequencies P(kappa_aff(f, x) >= t) for random f against the
  displayed tail bounds,
* the experiment drivers behind ``pvsubdiv experiment``.

Samples with kappa = inf are kept: they make an estimate infinite and are
counted separately in ``MCEstimate.infinite``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .condition import CoefficientBatch, kappa_many, size_bound_from_kappa, instance_bound_interval, instance_bound_effective
from .poly import AffinePoly
from .sampling import DobroSpec, child_rngs, sample_dobro, smoothed


@dataclass(frozen=True)
class MCEstimate:
    estimate: float
    stderr: float
    samples: int
    infinite: int = 0

    @property
    def upper(self) -> float:
        """estimate + 3 stderr"""
        return self.estimate + 3 * self.stderr


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def uniform_points(n: int, a, samples: int, rng, stratified: bool = False) -> np.ndarray:
    """Uniform points in [-a, a]^n; ``stratified`` jitters two per grid cell."""
    a = float(a)
    if not stratified:
        return rng.uniform(-a, a, (samples, n))
    k = max(1, int((samples / 2) ** (1.0 / n)))
    cells = np.stack(np.meshgrid(*[np.arange(k)] * n, indexing="ij"), axis=-1).reshape(-1, n)
    cells = np.repeat(cells, 2, axis=0)
    return -a + 2 * a * (cells + rng.random(cells.shape)) / k


def _summarize(vals: np.ndarray, scale: float, strata: int | None = None) -> MCEstimate:
    inf = int(np.count_nonzero(~np.isfinite(vals)))
    k = len(vals)
    if inf:
        return MCEstimate(math.inf, math.inf, k, inf)
    if strata is None:
        return MCEstimate(scale * float(vals.mean()), scale * float(vals.std(ddof=1)) / math.sqrt(k), k)
    pairs = vals.reshape(strata, 2)
    var = ((pairs[:, 0] - pairs[:, 1]) ** 2 / 2).sum() / 2 / strata ** 2
    return MCEstimate(scale * float(pairs.mean()), scale * math.sqrt(var), k)


SIZE_BOUND_LOG2 = {"interval": 2.5, "effective": 6.0}


def size_bound_function(f: AffinePoly, kind: str = "interval") -> Callable[[np.ndarray], np.ndarray]:
    """b(x) for the interval (2^(5/2)) or finite-precision (2^6) predicate, vectorized."""
    c = SIZE_BOUND_LOG2[kind]
    return lambda X: size_bound_from_kappa(kappa_many(f, X), f.d, f.n, c)


def mc_integral_bound(f: AffinePoly, a, b="interval", samples: int = 100_000, rng=0,
                      stratified: bool = False) -> MCEstimate:
    """Estimate of the integral of 2^n / b(x) over [-a, a]^n.

    ``b`` is "interval", "effective" or a callable on (k, n) point arrays.
    """
    if samples < 2:
        raise ValueError("need at least two samples")
    rng = _as_rng(rng)
    n = f.n
    bfun = size_bound_function(f, b) if isinstance(b, str) else b
    X = uniform_points(n, a, samples, rng, stratified)
    bx = np.asarray(bfun(X), dtype=float)
    with np.errstate(divide="ignore"):
        vals = 2.0 ** n / bx
    return _summarize(vals, (2 * float(a)) ** n, len(X) // 2 if stratified else None)


def mc_kappa_moment(f: AffinePoly, a, power: float | None = None, samples: int = 10_000, rng=0,
                    log_squared: bool = False) -> MCEstimate:
    """Estimate of E_x[kappa^p] (or E_x[kappa^p log2(kappa)^2]) over uniform x in [-a, a]^n."""
    if samples < 2:
        raise ValueError("need at least two samples")
    rng = _as_rng(rng)
    p = f.n if power is None else power
    X = rng.uniform(-float(a), float(a), (samples, f.n))
    k = kappa_many(f, X)
    with np.errstate(invalid="ignore", over="ignore"):
        vals = k ** p
        if log_squared:
            vals = vals * np.log2(k) ** 2
    return _summarize(vals, 1.0)


def box_count_check(sub, f: AffinePoly, samples: int = 100_000, rng=0) -> tuple[bool, MCEstimate]:
    """Is the box count at most max(1, estimate + 3 stderr)?"""
    kind = "effective" if sub.mode == "effective" else "interval"
    est = mc_integral_bound(f, sub.a, kind, samples, rng)
    return sub.box_count <= max(1.0, est.upper), est


# ---------------------------------------------------------------------------
# closed-form bounds


def average_bound_interval(n: int, d: int, a, K_rho: float, sigma: float | None = None) -> float:
    """Average (sigma None) or smoothed expected box count of the interval algorithm."""
    N = math.comb(n + d, d)
    a = float(a)
    out = d ** n * N ** ((n + 1) / 2) * max(1.0, a ** n) * 2.0 ** (12 * n * math.log2(n) + 8) * K_rho ** (n + 1)
    if sigma is not None:
        out *= (1 + 1 / sigma) ** (n + 1)
    return out


def average_bound_effective(n: int, d: int, a, K_rho: float, sigma: float | None = None) -> float:
    """Average (sigma None) or smoothed expected box count of the effective algorithm."""
    N = math.comb(n + d, d)
    a = float(a)
    out = d ** n * N ** ((n + 1) / 2) * a ** n * 2.0 ** (15 * n * math.log2(n) + 12) * K_rho ** (n + 1)
    if sigma is not None:
        out *= (1 + 1 / sigma) ** (n + 1)
    return out


def tail_bound(n: int, d: int, K_rho: float, t: float, sigma: float | None = None,
               binomial: bool = False) -> float:
    """Bound on P(kappa_aff(f, x) >= t), clipped at 1.

    The smoothed form multiplies by (1 + 1/sigma)^(n+1).  ``binomial`` swaps
    N/(n+1) for the looser binom(N, n+1) that one statement of the smoothed
    bound displays.
    """
    if t < math.e:
        raise ValueError("the tail bound needs t >= e")
    N = math.comb(n + d, d)
    base = math.comb(N, n + 1) if binomial else N / (n + 1)
    k = n + 1
    log_out = (math.log(2) + k / 2 * math.log(base) + k * math.log(15 * K_rho)
               + k / 2 * math.log(math.log(t)) - k * math.log(t))
    if sigma is not None:
        log_out += k * math.log1p(1 / sigma)
    return 1.0 if log_out >= 0 else math.exp(log_out)


# ---------------------------------------------------------------------------
# tail experiment


@dataclass(frozen=True)
class TailRow:
    t: float
    frequency: float
    stderr: float
    bound: float
    exceed: int
    trials: int

    @property
    def ok(self) -> bool:
        return self.frequency <= self.bound + 3 * self.stderr


def _kappa_samples(spec: DobroSpec, x, trials: int, rng, center: AffinePoly | None, sigma):
    from .sampling import sample_coeff_array

    C = sample_coeff_array(spec, trials, rng)
    if center is not None:
        C = np.array([float(c) for c in center.coeffs]) + sigma * center.weyl_norm * C
    return CoefficientBatch(spec.n, spec.d, C).kappa(np.asarray([x], dtype=float))


def empirical_tail(spec: DobroSpec, x: Sequence[float], t_grid: Sequence[float], trials: int = 10_000,
                   rng=None, center: AffinePoly | None = None, sigma: float | None = None) -> list[TailRow]:
    """Exceedance frequencies of kappa_aff(f, x) for f drawn from ``spec``.

    With ``center`` and ``sigma`` the samples are q = center + sigma |center| g.
    """
    if trials < 1000:
        raise ValueError("need at least 1000 trials")
    if any(t < math.e for t in t_grid):
        raise ValueError("the tail bound needs t >= e")
    if (center is None) != (sigma is None):
        raise ValueError("center and sigma go together")
    rng = _as_rng(spec.seed if rng is None else rng)
    kap = _kappa_samples(spec, x, trials, rng, center, sigma)
    rows = []
    for t in t_grid:
        k = int(np.count_nonzero(kap >= t))
        p = k / trials
        rows.append(TailRow(float(t), p, math.sqrt(p * (1 - p) / trials), tail_bound(spec.n, spec.d, spec.K_rho, t, sigma),
                            k, trials))
    return rows


# ---------------------------------------------------------------------------
# box-count experiments


@dataclass(frozen=True)
class BoxRun:
    box_count: int
    max_depth: int
    moment: float


def _run_one(args) -> BoxRun:
    f, a, mode, max_depth, moment_samples, seed = args
    from .effective import pv_effective
    from .interval import pv_interval

    run = pv_effective if mode == "effective" else pv_interval
    sub = run(f, a, max_depth)
    mom = mc_kappa_moment(f, a, samples=moment_samples, rng=seed).estimate if moment_samples else math.nan
    return BoxRun(sub.box_count, int(sub.depths.max()), mom)


def _map(fn, tasks, workers: int):
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(workers) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def _mean_stderr(v: Sequence[float]) -> tuple[float, float]:
    v = np.asarray(v, dtype=float)
    if len(v) < 2:
        return float(v.mean()), 0.0
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(len(v)))


def avg_boxes(kind: str, n: int, degrees: Sequence[int], a=1, trials: int = 100, seed: int = 0,
              mode: str = "interval", max_depth: int = 40, workers: int = 1, ell: float = 2.0,
              moment_samples: int = 1000) -> list[dict]:
    """Mean final box count of random polynomials per degree.

    Sample i at degree d is drawn from the i-th child of SeedSequence([seed, d]),
    so the table does not depend on ``workers``.
    """
    tasks = []
    for d in degrees:
        spec = DobroSpec(kind, n, d, ell=ell)
        for i, r in enumerate(child_rngs([seed, d], trials)):
            tasks.append((sample_dobro(spec, r), a, mode, max_depth, moment_samples, [seed, d, i]))
    runs = _map(_run_one, tasks, workers)
    rows = []
    for j, d in enumerate(degrees):
        chunk = runs[j * trials:(j + 1) * trials]
        mean, se = _mean_stderr([r.box_count for r in chunk])
        spec = DobroSpec(kind, n, d, ell=ell)
        avg_bound = (average_bound_effective if mode == "effective" else average_bound_interval)(n, d, a, spec.K_rho)
        inst = instance_bound_effective if mode == "effective" else instance_bound_interval
        rows.append({
            "d": d,
            "mean_boxes": mean,
            "stderr": se,
            "average_bound": avg_bound,
            "instance_bound": float(np.mean([inst(n, d, a, r.moment) for r in chunk])),
            "max_boxes": max(r.box_count for r in chunk),
        })
    return rows


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log y against log x."""
    return float(np.polyfit(np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float)), 1)[0])


def smoothed_boxes(f: AffinePoly, a, sigmas: Sequence[float], trials: int = 50, seed: int = 0,
                   kind: str = "kss", mode: str = "interval", max_depth: int = 40, workers: int = 1) -> list[dict]:
    """Mean box count of q = f + sigma |f| g per sigma, g from ``kind``."""
    spec = DobroSpec(kind, f.n, f.d)
    tasks = []
    for j, s in enumerate(sigmas):
        for i, r in enumerate(child_rngs([seed, j], trials)):
            tasks.append((smoothed(f, s, spec, r), a, mode, max_depth, 0, None))
    runs = _map(_run_one, tasks, workers)
    rows = []
    for j, s in enumerate(sigmas):
        chunk = runs[j * trials:(j + 1) * trials]
        mean, se = _mean_stderr([r.box_count for r in chunk])
        bound = (average_bound_effective if mode == "effective" else average_bound_interval)(f.n, f.d, a, spec.K_rho, s)
        rows.append({"sigma": s, "mean_boxes": mean, "stderr": se, "smoothed_bound": bound,
                     "max_boxes": max(r.box_count for r in chunk)})
    return rows
