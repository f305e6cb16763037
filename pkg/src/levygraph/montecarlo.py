"""Jump-diffusion sampling, empirical estimators, numerical normalization of
approximate densities and the quantile comparison protocol."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtri

from .errors import LevyGraphError
from .evaluator import phi_polynomials_1d, series_log
from .model import LevyJumpSpec, ModelError, Potential, levy_to_symbol
from .resummation import pade_log_density_2nd

CHUNK_SIZE = 1 << 16
POISSON_INVERSION_MAX = 30.0


class EmptySample(LevyGraphError, ValueError):
    category = "usage"


class NonFiniteDensity(LevyGraphError, ArithmeticError):
    category = "numerics"


class ToleranceNotReached(LevyGraphError, ArithmeticError):
    category = "numerics"


@dataclass(frozen=True)
class JumpDiffusionModel:
    """Z = X + s₁Y₁ − s₂Y₂ with X ~ N(a, 1/(2β)), Y_j ~ Poisson(z_j)."""

    a: float
    beta: float
    z1: float = 0.0
    z2: float = 0.0
    s1: float = 1.0
    s2: float = 1.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ModelError("beta must be positive")
        if self.z1 < 0 or self.z2 < 0:
            raise ModelError("Poisson rates must be non-negative")
        if not (self.s1 > 0 and self.s2 > 0):
            raise ModelError("jump magnitudes must be positive")

    @classmethod
    def shifted(cls, beta: float, z1: float, s1: float, z2: float = 0.0, s2: float = 1.0) -> "JumpDiffusionModel":
        """The convention a = z₁s₁ − z₂s₂ used for the quantile experiment."""
        return cls(z1 * s1 - z2 * s2, beta, z1, z2, s1, s2)

    @property
    def z(self) -> float:
        return self.z1 + self.z2

    @property
    def sigma2(self) -> float:
        return 1.0 / (2.0 * self.beta)

    @property
    def mu(self) -> float:
        """Diffusion constant at t = 1 (2μ = σ²), so β = 1/(4μ)."""
        return 1.0 / (4.0 * self.beta)

    @property
    def mean(self) -> float:
        return self.a + self.z1 * self.s1 - self.z2 * self.s2

    @property
    def variance(self) -> float:
        return self.sigma2 + self.z1 * self.s1 ** 2 + self.z2 * self.s2 ** 2

    def jump_moment(self, n: int) -> float:
        """r_n for r = (z₁δ_{s₁} + z₂δ_{−s₂})/z."""
        if self.z == 0:
            return 0.0
        return (self.z1 * self.s1 ** n + self.z2 * (-self.s2) ** n) / self.z

    def to_levy_spec(self, max_order: int = 4) -> LevyJumpSpec:
        """d = 1 Lévy data with the compensating drift z·r₁ (vanishing C⁽¹⁾)."""
        if self.z == 0:
            return LevyJumpSpec(1, [0.0], [[self.mu]], 0.0, {})
        return LevyJumpSpec.from_atoms(
            [self.z * self.jump_moment(1)], [[self.mu]], self.z, [[self.s1], [-self.s2]], [self.z1, self.z2], max_order
        )

    def pade_log_density(self, phi):
        """Second-order Padé log-density (up to normalization) centred at the mean."""
        return pade_log_density_2nd(self.to_levy_spec(), self.mu, 1.0, np.asarray(phi, dtype=float) - self.mean,
                                    self.beta)

    def raw_log_density(self, phi, order: int = 2):
        """Partial sum of the connected series (the plain polynomial in φ)."""
        spec = self.to_levy_spec(max(4, 2 * order))
        sym = levy_to_symbol(spec.without_diffusion(), 2 * order)
        polys = phi_polynomials_1d(sym, Potential.quadratic(1), 1.0, order)
        logs = series_log(polys)
        p = np.asarray(phi, dtype=float) - self.mean
        return sum(np.polynomial.polynomial.polyval(p, np.atleast_1d(c)) * self.beta ** m
                   for m, c in enumerate(logs))

    def to_json(self) -> dict:
        return {"a": self.a, "beta": self.beta, "z1": self.z1, "z2": self.z2, "s1": self.s1, "s2": self.s2}


@dataclass(frozen=True)
class Sample:
    values: np.ndarray
    seed: int
    model: JumpDiffusionModel
    chunk_size: int = CHUNK_SIZE


def _open_uniforms(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniforms strictly inside (0, 1)."""
    return (rng.integers(0, 1 << 53, size=n, dtype=np.int64) + 0.5) / float(1 << 53)


def _poisson(rng: np.random.Generator, rate: float, n: int) -> np.ndarray:
    if rate == 0:
        return np.zeros(n)
    if rate > POISSON_INVERSION_MAX:
        return rng.poisson(rate, n).astype(float)
    # inversion against the cumulative table
    pmf = [math.exp(-rate)]
    cdf = [pmf[0]]
    while cdf[-1] < 1.0 - 1e-16 and len(cdf) < 400:
        pmf.append(pmf[-1] * rate / len(pmf))
        cdf.append(cdf[-1] + pmf[-1])
    u = _open_uniforms(rng, n)
    return np.minimum(np.searchsorted(np.array(cdf), u, side="left"), len(cdf) - 1).astype(float)


def _chunk(model: JumpDiffusionModel, seed: int, index: int, size: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))
    x = model.a + math.sqrt(model.sigma2) * ndtri(_open_uniforms(rng, size))
    x += model.s1 * _poisson(rng, model.z1, size)
    x -= model.s2 * _poisson(rng, model.z2, size)
    return x


def simulate(model: JumpDiffusionModel, n: int, seed: int, *, chunk_size: int = CHUNK_SIZE,
             workers: int = 1) -> Sample:
    """n draws; chunk c uses its own substream derived from (seed, c), so the
    result depends on (model, n, seed, chunk_size) only."""
    if n < 1:
        raise ValueError("n must be at least 1")
    sizes = [min(chunk_size, n - start) for start in range(0, n, chunk_size)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda c: _chunk(model, seed, c, sizes[c]), range(len(sizes))))
    else:
        parts = [_chunk(model, seed, c, s) for c, s in enumerate(sizes)]
    return Sample(np.concatenate(parts), seed, model, chunk_size)


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    relative_frequency: np.ndarray

    @property
    def bin_width(self) -> float:
        return float(self.edges[1] - self.edges[0])

    @property
    def density(self) -> np.ndarray:
        return self.relative_frequency / self.bin_width

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])


def _values(sample) -> np.ndarray:
    v = np.asarray(sample.values if isinstance(sample, Sample) else sample, dtype=float)
    if v.size == 0:
        raise EmptySample("sample is empty")
    return v


def empirical_density(sample, bins: int = 100, range: tuple[float, float] | None = None) -> Histogram:
    v = _values(sample)
    counts, edges = np.histogram(v, bins=bins, range=range)
    return Histogram(edges, counts / v.size)


def empirical_quantile(sample, alpha: float) -> float:
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    return float(np.quantile(_values(sample), alpha, method="linear"))


# --- integration -----------------------------------------------------------


def _simpson(fa, fm, fb, h):
    return h / 6.0 * (fa + 4.0 * fm + fb)


def adaptive_simpson(f: Callable[[float], float], a: float, b: float, tol: float = 1e-8, *,
                     panels: int = 64, max_depth: int = 40) -> float:
    """Adaptive Simpson to relative tolerance ``tol`` (absolute if the
    integral is 0).  Iterative, starting from equal panels."""
    if b == a:
        return 0.0

    def ev(x):
        y = float(f(x))
        if not math.isfinite(y):
            raise NonFiniteDensity(f"integrand is {y} at {x}")
        return y

    xs = np.linspace(a, b, 2 * panels + 1)
    ys = [ev(x) for x in xs]
    stack = []
    coarse = 0.0
    for i in range(panels):
        x0, x2 = xs[2 * i], xs[2 * i + 2]
        s = _simpson(ys[2 * i], ys[2 * i + 1], ys[2 * i + 2], x2 - x0)
        coarse += s
        stack.append((x0, x2, ys[2 * i], ys[2 * i + 1], ys[2 * i + 2], s, 0))
    target = tol * (abs(coarse) if coarse else 1.0)
    width = abs(b - a)
    total = []
    while stack:
        x0, x2, f0, f1, f2, whole, depth = stack.pop()
        x1 = 0.5 * (x0 + x2)
        fl, fr = ev(0.5 * (x0 + x1)), ev(0.5 * (x1 + x2))
        left = _simpson(f0, fl, f1, x1 - x0)
        right = _simpson(f1, fr, f2, x2 - x1)
        err = left + right - whole
        if abs(err) <= 15.0 * target * abs(x2 - x0) / width:
            total.append(left + right + err / 15.0)
        elif depth >= max_depth:
            raise ToleranceNotReached(f"no convergence on [{x0}, {x2}] after {depth} bisections")
        else:
            stack.append((x0, x1, f0, fl, f1, left, depth + 1))
            stack.append((x1, x2, f1, fr, f2, right, depth + 1))
    return math.fsum(total)


def integration_window(log_density: Callable, center: float, scale: float, *, sigmas: float = 12.0,
                       rel_floor: float = 1e-14, max_expansions: int = 40) -> tuple[float, float]:
    """center ± sigmas·scale, widened until the boundary integrand drops
    below rel_floor times the peak."""
    grid = np.linspace(center - sigmas * scale, center + sigmas * scale, 2001)
    peak = max(float(log_density(x)) for x in grid)
    lo, hi = grid[0], grid[-1]
    floor = peak + math.log(rel_floor)
    for _ in range(max_expansions):
        if float(log_density(lo)) < floor:
            break
        lo -= scale
    else:
        raise ToleranceNotReached("left tail does not decay")
    for _ in range(max_expansions):
        if float(log_density(hi)) < floor:
            break
        hi += scale
    else:
        raise ToleranceNotReached("right tail does not decay")
    return float(lo), float(hi)


def _shifted_exp(log_density, window):
    grid = np.linspace(window[0], window[1], 513)
    ref = max(float(log_density(x)) for x in grid)
    if not math.isfinite(ref):
        raise NonFiniteDensity("log-density is not finite on the window")
    return ref, (lambda x: math.exp(float(log_density(x)) - ref))


def normalize_density(log_density: Callable, window: Sequence[float], tol: float = 1e-8) -> float:
    """∫ exp(log_density) over the window."""
    lo, hi = window
    if not lo < hi:
        raise ValueError("window must satisfy lo < hi")
    ref, g = _shifted_exp(log_density, window)
    return math.exp(ref) * adaptive_simpson(g, lo, hi, tol)


def model_quantile(log_density: Callable, normalization: float, alpha: float, window: Sequence[float],
                   tol: float = 1e-8) -> float:
    """x with ∫_lo^x exp(log_density)/normalization = alpha, by bisection."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    lo, hi = window

    def cdf(x, base, base_value):
        return base_value + adaptive_simpson(lambda y: math.exp(float(log_density(y))), base, x, tol * 0.1,
                                             panels=16) / normalization

    # coarse bracket from a cumulative grid, then bisection inside one cell
    grid = np.linspace(lo, hi, 65)
    acc, prev = 0.0, lo
    for x in grid[1:]:
        nxt = cdf(x, prev, acc)
        if nxt >= alpha:
            break
        acc, prev = nxt, x
    a, b = prev, x
    for _ in range(200):
        mid = 0.5 * (a + b)
        value = cdf(mid, prev, acc)
        if abs(value - alpha) <= tol or b - a <= 1e-12 * max(1.0, abs(mid)):
            return float(mid)
        if value < alpha:
            a = mid
        else:
            b = mid
    return float(0.5 * (a + b))


def gaussian_baseline(model: JumpDiffusionModel) -> tuple[float, float]:
    """Best-fit Gaussian: the model mean and variance z·r₂ + 2μ (t = 1)."""
    return model.mean, model.z * model.jump_moment(2) + 2.0 * model.mu


def gaussian_quantile(model: JumpDiffusionModel, alpha: float) -> float:
    mean, var = gaussian_baseline(model)
    return float(mean + ndtri(alpha) * math.sqrt(var))


# --- comparison protocol ---------------------------------------------------


@dataclass(frozen=True)
class PadeDensity:
    model: JumpDiffusionModel
    window: tuple[float, float]
    normalization: float

    @classmethod
    def build(cls, model: JumpDiffusionModel, tol: float = 1e-8) -> "PadeDensity":
        mean, var = gaussian_baseline(model)
        window = integration_window(model.pade_log_density, mean, math.sqrt(var))
        return cls(model, window, normalize_density(model.pade_log_density, window, tol))

    def log_density(self, phi):
        return self.model.pade_log_density(phi) - math.log(self.normalization)

    def quantile(self, alpha: float) -> float:
        return model_quantile(self.model.pade_log_density, self.normalization, alpha, self.window)


@dataclass(frozen=True)
class QuantileRow:
    alpha: float
    empirical: float
    pade: float
    gaussian: float

    @property
    def pade_error(self) -> float:
        return abs(self.pade - self.empirical)

    @property
    def gaussian_error(self) -> float:
        return abs(self.gaussian - self.empirical)

    def to_json(self) -> dict:
        return {"alpha": self.alpha, "empirical": self.empirical, "pade": self.pade, "gaussian": self.gaussian,
                "pade_abs_error": self.pade_error, "gaussian_abs_error": self.gaussian_error}


def compare_quantiles(model: JumpDiffusionModel, n: int, seed: int, alphas: Sequence[float] = (0.99,),
                      workers: int = 1) -> list[QuantileRow]:
    sample = simulate(model, n, seed, workers=workers)
    dens = PadeDensity.build(model)
    return [QuantileRow(a, empirical_quantile(sample, a), dens.quantile(a), gaussian_quantile(model, a))
            for a in alphas]
