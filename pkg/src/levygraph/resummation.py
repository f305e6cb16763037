"""Padé approximants, the closed-form second-order Padé log-density and
truncated Borel summation."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import LevyGraphError
from .evaluator import BetaSeries
from .model import LevyJumpSpec, ModelError

COND_LIMIT = 1e12


class SingularSystem(LevyGraphError, ArithmeticError):
    category = "numerics"


class PoleOnPath(LevyGraphError, ArithmeticError):
    category = "numerics"


class ZeroDenominatorH1(LevyGraphError, ArithmeticError):
    category = "numerics"


class ExperimentalOnly(LevyGraphError, ValueError):
    category = "usage"


def _coeffs(series) -> np.ndarray:
    return np.asarray(series.coeffs if isinstance(series, BetaSeries) else series, dtype=float)


@dataclass(frozen=True)
class PadeApprox:
    M: int
    N: int
    a: tuple[float, ...]
    b: tuple[float, ...]  # b_1..b_N, b_0 = 1
    condition: float = 1.0

    @property
    def denominator(self) -> np.ndarray:
        return np.concatenate([[1.0], self.b])

    def taylor(self, order: int) -> np.ndarray:
        """First order+1 Taylor coefficients of the rational function."""
        q = self.denominator
        out = np.zeros(order + 1)
        for k in range(order + 1):
            acc = self.a[k] if k <= self.M else 0.0
            for j in range(1, min(k, self.N) + 1):
                acc -= q[j] * out[k - j]
            out[k] = acc
        return out


def pade(series, M: int, N: int) -> PadeApprox:
    """[M/N] approximant: solve the Hankel-type system for b, then a."""
    h = _coeffs(series)
    if M < 0 or N < 0:
        raise ValueError("degrees must be non-negative")
    if len(h) < M + N + 1:
        raise ValueError(f"need {M + N + 1} coefficients, have {len(h)}")

    def hh(k):
        return h[k] if k >= 0 else 0.0

    cond = 1.0
    if N:
        # row i (i = 1..N): Σ_{j=1..N} b_j h_{M+i-j} = -h_{M+i}
        A = np.array([[hh(M + i - j) for j in range(1, N + 1)] for i in range(1, N + 1)])
        rhs = -np.array([hh(M + i) for i in range(1, N + 1)])
        cond = float(np.linalg.cond(A)) if np.any(A) else math.inf
        if not cond < COND_LIMIT:
            raise SingularSystem(f"Padé [{M}/{N}] system is singular (condition {cond:.3g})")
        b = np.linalg.solve(A, rhs)
    else:
        b = np.zeros(0)
    q = np.concatenate([[1.0], b])
    a = [sum(q[j] * h[k - j] for j in range(0, min(k, N) + 1)) for k in range(M + 1)]
    return PadeApprox(M, N, tuple(float(x) for x in a), tuple(float(x) for x in b), cond)


def pade_11_closed(series) -> PadeApprox:
    """b₁ = −h₂/h₁, a₀ = h₀, a₁ = h₁ − h₀h₂/h₁."""
    h = _coeffs(series)
    if h[1] == 0.0:
        raise SingularSystem("[1/1] needs h₁ ≠ 0")
    b1 = -h[2] / h[1]
    return PadeApprox(1, 1, (float(h[0]), float(h[1] - h[0] * h[2] / h[1])), (float(b1),))


def poles_on_path(p: PadeApprox, beta: float) -> list[float]:
    """Real denominator roots β′ with β′/β in (0, 1]."""
    q = np.trim_zeros(p.denominator, "b")
    if len(q) <= 1 or beta == 0:
        return []
    roots = np.polynomial.polynomial.polyroots(q)
    tol = 1e-12 * max(1.0, abs(beta))
    return [float(r.real) for r in roots if abs(r.imag) <= tol and 0 < r.real / beta <= 1]


def eval_pade(p: PadeApprox, beta: float) -> float:
    """Rational value; raises PoleOnPath if the denominator vanishes on (0, β]."""
    poles = poles_on_path(p, beta)
    if poles:
        raise PoleOnPath(f"denominator vanishes at β′={min(poles, key=abs):.6g} on the path to β={beta}")
    q = p.denominator
    num = np.polynomial.polynomial.polyval(beta, p.a)
    den = np.polynomial.polynomial.polyval(beta, q)
    return float(num / den)


def pade_log_density_2nd(spec: LevyJumpSpec, mu: float | None, t: float, phi, beta: float):
    """Closed second-order Padé form of log[(β/π)^{-1/2}Φ_t(φ)] for d = 1,
    in terms of κ_n = t·z·r_n (the jump part must have vanishing first
    coefficient; a residual one is absorbed by a shift of φ)."""
    if spec.dim != 1:
        raise ModelError("the closed Padé form is one-dimensional")
    if mu is not None:
        spec.isotropic_diffusion()
    z = spec.activity
    if z > 0:
        k2, k3, k4 = (t * z * spec.scalar_moment(n) for n in (2, 3, 4))
        c1 = -spec.drift[0] + z * spec.scalar_moment(1)
    else:
        k2 = k3 = k4 = 0.0
        c1 = -spec.drift[0]
    p = np.asarray(phi, dtype=float) + t * c1
    h1 = k2 + p * p
    top = k4 + 2 * k2 * k2 + 4 * k2 * p * p + 4 * k3 * p
    if np.any((h1 == 0.0) & (top != 0.0)):
        raise ZeroDenominatorH1("h₁ vanishes while h₂ does not")
    # without jumps h₂ ≡ 0 and the [1/1] form degenerates to −βφ², also at φ = 0
    ratio = np.divide(top, h1, out=np.zeros_like(h1), where=h1 != 0.0)
    out = -beta * h1 / (1.0 + 0.5 * beta * ratio)
    return float(out) if np.ndim(out) == 0 else out


# --- Borel ----------------------------------------------------------------


@dataclass(frozen=True)
class BorelSpec:
    node_count: int = 64

    def __post_init__(self):
        if self.node_count < 2:
            raise ValueError("node_count must be at least 2")


@lru_cache(maxsize=None)
def _laguerre(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.laguerre.laggauss(n)
    return x, w


def borel_transform(h: Sequence[float]) -> np.ndarray:
    """Coefficients h_m/m! of the truncated Borel transform B_N(τ)."""
    return np.array([c / math.factorial(m) for m, c in enumerate(h)])


def borel_resum(series, beta: float, spec: BorelSpec = BorelSpec(), d: int | None = None,
                experimental: bool = False) -> float:
    """∫₀^∞ e^{-u} B_N(βu) du by Gauss–Laguerre; equals the partial sum for a
    truncated B_N.  Large-diffusion kinds get the (β/π)^{d/2} prefactor that
    turns (β/π)^{-d/2}Φ back into Φ."""
    if isinstance(series, BetaSeries) and series.is_log and not experimental:
        raise ExperimentalOnly("Borel summation of a log series needs experimental=True")
    if beta < 0:
        raise ValueError("β must be non-negative")
    h = _coeffs(series)
    x, w = _laguerre(spec.node_count)
    value = float(np.dot(w, np.polynomial.polynomial.polyval(beta * x, borel_transform(h))))
    if isinstance(series, BetaSeries) and series.is_large_diffusion and not series.is_log:
        dim = d if d is not None else len(series.phi)
        value *= (beta / math.pi) ** (dim / 2.0)
    return value


# --- method selector --------------------------------------------------------


@dataclass(frozen=True)
class ResumMethod:
    name: str  # partial | pade | borel
    M: int = 0
    N: int = 0
    nodes: int = 64

    def __str__(self):
        if self.name == "pade":
            return f"pade:{self.M}/{self.N}"
        if self.name == "borel":
            return f"borel:{self.nodes}"
        return "partial"


def parse_method(text: str) -> ResumMethod:
    text = text.strip()
    if text in ("partial", "partial_sum"):
        return ResumMethod("partial")
    m = re.fullmatch(r"pade:(\d+)/(\d+)", text)
    if m:
        return ResumMethod("pade", int(m.group(1)), int(m.group(2)))
    m = re.fullmatch(r"borel(?::(\d+))?", text)
    if m:
        nodes = int(m.group(1)) if m.group(1) else 64
        BorelSpec(nodes)
        return ResumMethod("borel", nodes=nodes)
    raise ValueError(f"unknown resummation method {text!r}")


def resum(series: BetaSeries, beta: float, method: ResumMethod, experimental: bool = False) -> float:
    if method.name == "partial":
        return series.partial_sum(beta)
    if method.name == "pade":
        return eval_pade(pade(series, method.M, method.N), beta)
    return borel_resum(series, beta, BorelSpec(method.nodes), experimental=experimental)
