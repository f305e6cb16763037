"""Feynman rules and assembly of the β-series.

Conventions: the solution is Φ_t(φ) = E f(φ + Y_t) with E e^{⟨ξ,Y_t⟩} = e^{tΨ(ξ)}
and f = e^{-βV}.  Consequently every outer leg carries a factor +φ_X and an
inner empty vertex with legs X_1..X_n carries the truncated moment
t·∂ⁿΨ(0) = t·n!·C⁽ⁿ⁾.  The coefficient h_m of β^m includes (−1)^m/m!.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .combinatorics import enumerate_partitions, h_factor, integer_partitions
from .errors import LevyGraphError
from .graphs import (
    FeynmanGraph,
    QuadGraph,
    enumerate_graphs,
    topological_classes,
)
from .model import (
    EvalPoint,
    LevyJumpSpec,
    ModelError,
    OperatorSymbol,
    Potential,
    levy_to_symbol,
)

ORDER_CAP = 6
KINDS = ("phi", "log_phi", "large_diffusion", "large_diffusion_log")


class NonDiagonalQuadratic(LevyGraphError, ValueError):
    category = "model"


@dataclass(frozen=True)
class BetaSeries:
    order: int
    coeffs: tuple[float, ...]
    kind: str
    t: float
    phi: tuple[float, ...]
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown series kind {self.kind!r}")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if len(self.coeffs) != self.order + 1:
            raise ValueError("need order + 1 coefficients")

    @property
    def is_log(self) -> bool:
        return self.kind.endswith("log") or self.kind == "log_phi"

    @property
    def is_large_diffusion(self) -> bool:
        return self.kind.startswith("large_diffusion")

    def partial_sum(self, beta: float) -> float:
        return float(np.polynomial.polynomial.polyval(beta, self.coeffs))

    def inverse_mu_coeffs(self) -> tuple[float, ...]:
        """Coefficients of the same series written in powers of 1/μ."""
        return tuple(h / (4.0 * self.t) ** m for m, h in enumerate(self.coeffs))

    def to_record(self) -> dict:
        beta_def = "1/(4*mu*t)" if self.is_large_diffusion else "f = exp(-beta*V)"
        return {
            "kind": self.kind,
            "t": self.t,
            "phi": list(self.phi),
            "N": self.order,
            "coeffs": list(self.coeffs),
            "beta_definition": beta_def,
        }


# --- moments ---------------------------------------------------------------


def truncated_moment(sym: OperatorSymbol, t: float, indices: Sequence[int]) -> float:
    """⟨φ_{X_1}···φ_{X_n}⟩ᵀ = t·∂ⁿΨ(0)."""
    if len(indices) < 1:
        raise ValueError("need at least one index")
    return t * sym.rate(tuple(indices))


def moment(sym: OperatorSymbol, t: float, indices: Sequence[int]) -> float:
    """Ordinary moment from truncated ones via the sum over set partitions."""
    indices = tuple(indices)
    if not indices:
        raise ValueError("need at least one index")
    total = 0.0
    for part in enumerate_partitions(range(len(indices))):
        prod = 1.0
        for block in part:
            prod *= truncated_moment(sym, t, [indices[i] for i in block])
            if prod == 0.0:
                break
        total += prod
    return total


# --- Feynman rules ---------------------------------------------------------


class FeynmanRules:
    """Evaluates 𝒱[G](t, φ) for one (symbol, potential, point) triple.

    Dense λ and t·n!·C tensors are built once; a graph value is one einsum
    (one index letter per leg).  For d = 1 the value is a plain product.
    """

    def __init__(self, sym: OperatorSymbol, pot: Potential, point: EvalPoint):
        if sym.dim != pot.dim or point.dim != pot.dim:
            raise ModelError("symbol, potential and point dimensions differ")
        self.sym, self.pot, self.point = sym, pot, point
        self.dim = pot.dim
        self.t = point.t
        self.phi = np.array(point.phi)
        self._lam = {p: pot.coeffs[p].dense for p in range(pot.max_degree + 1)}
        self._lam1 = {p: float(pot.coeffs[p].dense.reshape(-1)[0]) if self.dim == 1 else None
                      for p in range(pot.max_degree + 1)}
        self._rates: dict[int, np.ndarray] = {}

    def rate(self, n: int) -> np.ndarray:
        if n not in self._rates:
            self._rates[n] = self.t * self.sym.rate_tensor(n)
        return self._rates[n]

    def unit_value_1d(self, G: FeynmanGraph) -> float:
        """d = 1: the value divided by φ^{|K|}."""
        v = 1.0
        for p in G.leg_counts:
            v *= self._lam1[p]
        for b in G.I:
            v *= float(self.rate(len(b)).reshape(-1)[0])
        return v

    def value(self, G: FeynmanGraph) -> float:
        if G.order == 0:
            return 1.0
        if self.dim == 1:
            return self.unit_value_1d(G) * self.phi[0] ** len(G.K)
        ops: list = []
        for q, (o, p) in enumerate(zip(G.offsets, G.leg_counts)):
            ops += [self._lam[p], list(range(o, o + p))]
        for x in G.K:
            ops += [self.phi, [x]]
        for b in G.I:
            ops += [self.rate(len(b)), list(b)]
        return float(np.einsum(*ops, [], optimize=len(ops) > 16))


def eval_graph(G: FeynmanGraph, sym: OperatorSymbol, pot: Potential, point: EvalPoint) -> float:
    return FeynmanRules(sym, pot, point).value(G)


def eval_quad_graph(G: QuadGraph, sym: OperatorSymbol, lam, point: EvalPoint) -> float:
    """Rules for V = λ‖φ‖²: one index per edge, λ per edge, +φ per outer end."""
    lam_arr = np.asarray(lam, dtype=float)
    if lam_arr.ndim:
        scalar = lam_arr.reshape(-1)[0]
        if not np.array_equal(lam_arr, scalar * np.eye(sym.dim)):
            raise NonDiagonalQuadratic("λ⁽²⁾ must be a multiple of the identity")
        lam_arr = scalar
    lam = float(lam_arr)
    if G.order == 0:
        return 1.0
    phi = np.array(point.phi)
    ops: list = []
    for a, edge in enumerate(G.edges):
        for kind, _ in edge:
            if kind == "outer":
                ops += [phi, [a]]
    for slots in G.inner_ends():
        ops += [point.t * sym.rate_tensor(len(slots)), [a for a, _ in slots]]
    return lam ** G.order * float(np.einsum(*ops, []))


# --- series assembly -------------------------------------------------------


def _check_order(N: int):
    if N < 0:
        raise ValueError("order must be non-negative")
    if N > ORDER_CAP:
        raise ModelError(f"order {N} exceeds the cap {ORDER_CAP}")


def _pruned(sym: OperatorSymbol, prune: Iterable[int] | None) -> frozenset[int]:
    """Vanishing orders are skipped exactly; callers may add more."""
    return sym.vanishing_orders() | frozenset(prune or ())


def graph_sums(sym: OperatorSymbol, pot: Potential, point: EvalPoint, N: int, *, connected: bool,
               method: str = "topological", prune: Iterable[int] | None = None) -> list[float]:
    """Σ_{G∈F̄(m)} 𝒱[G] (or over connected graphs) for m = 0..N."""
    _check_order(N)
    rules = FeynmanRules(sym, pot, point)
    pruned = _pruned(sym, prune)
    sums = []
    for m in range(N + 1):
        if m == 0:
            sums.append(0.0 if connected else 1.0)
            continue
        if method == "topological":
            terms = [c.multiplicity * rules.value(c.representative)
                     for c in topological_classes(m, pot, pruned) if c.connected or not connected]
        elif method == "raw":
            terms = [rules.value(G) for G in enumerate_graphs(m, pot, pruned) if G.connected or not connected]
        else:
            raise ValueError(f"unknown evaluation method {method!r}")
        sums.append(math.fsum(terms))
    return sums


def _weighted(sums: Sequence[float]) -> list[float]:
    return [(-1) ** m / math.factorial(m) * s for m, s in enumerate(sums)]


def phi_series(sym, pot, point, N, *, method="topological", prune=None) -> BetaSeries:
    h = _weighted(graph_sums(sym, pot, point, N, connected=False, method=method, prune=prune))
    return BetaSeries(N, h, "phi", point.t, point.phi, {"method": method})


def log_phi_series(sym, pot, point, N, *, method="topological", prune=None) -> BetaSeries:
    h = _weighted(graph_sums(sym, pot, point, N, connected=True, method=method, prune=prune))
    return BetaSeries(N, h, "log_phi", point.t, point.phi, {"method": method})


# --- d = 1: polynomials in φ ----------------------------------------------


def _scalar_lambdas(pot: Potential) -> np.ndarray:
    if pot.dim != 1:
        raise ModelError("the one-dimensional path needs d = 1")
    return np.array([c[(0,) * p] for p, c in enumerate(pot.coeffs)])


def _block_sums(sym: OperatorSymbol, t: float, n_max: int) -> list[float]:
    """B_n = Σ over partitions of n legs into blocks of Π t·rate; B_0 = 1."""
    rates = {}
    out = [1.0]
    for n in range(1, n_max + 1):
        total = 0.0
        for sizes in integer_partitions(n):
            prod = float(h_factor(sizes))
            for s in sizes:
                if s not in rates:
                    rates[s] = t * sym.rate((0,) * s)
                prod *= rates[s]
            total += prod
        out.append(total)
    return out


def _closed_1d_terms(sym: OperatorSymbol, pot: Potential, t: float, N: int) -> list[list[tuple[int, float]]]:
    """For each m: pairs (k, c) with h_m(φ) = Σ c·φ^k, from the closed
    one-dimensional formula (sum over leg totals, outer counts and block sizes)."""
    _check_order(N)
    lam = _scalar_lambdas(pot)
    blocks = [1.0]
    out = []
    power = np.array([1.0])
    for m in range(N + 1):
        if m:
            power = np.polynomial.polynomial.polymul(power, lam)
        weight = (-1) ** m / math.factorial(m)
        terms = []
        for L, w in enumerate(power):
            if w == 0.0:
                continue
            if L >= len(blocks):
                blocks = _block_sums(sym, t, L)  # raises past the truncation
            for k in range(L + 1):
                n = L - k
                terms.append((k, weight * w * math.comb(L, k) * blocks[n]))
        out.append(terms)
    return out


def phi_polynomials_1d(sym: OperatorSymbol, pot: Potential, t: float, N: int) -> list[np.ndarray]:
    """h_0(φ)..h_N(φ) as ascending coefficient arrays, without graph enumeration."""
    polys = []
    for terms in _closed_1d_terms(sym, pot, t, N):
        size = max((k for k, _ in terms), default=0) + 1
        c = np.zeros(size)
        for k, v in terms:
            c[k] += v
        polys.append(c)
    return polys


def graph_polynomials_1d(sym, pot, t, N, *, connected: bool, prune=None) -> list[np.ndarray]:
    """Same polynomials from the topological graph sum (value = c·φ^{|K|})."""
    _check_order(N)
    rules = FeynmanRules(sym, pot, EvalPoint(t, (1.0,)))
    pruned = _pruned(sym, prune)
    polys = []
    for m in range(N + 1):
        if m == 0:
            polys.append(np.array([0.0 if connected else 1.0]))
            continue
        by_k: dict[int, list[float]] = {}
        for c in topological_classes(m, pot, pruned):
            if connected and not c.connected:
                continue
            by_k.setdefault(len(c.representative.K), []).append(c.multiplicity * rules.unit_value_1d(c.representative))
        arr = np.zeros(max(by_k, default=0) + 1)
        for k, vals in by_k.items():
            arr[k] = math.fsum(vals)
        polys.append((-1) ** m / math.factorial(m) * arr)
    return polys


def eval_polynomials(polys: Sequence[np.ndarray], phi) -> np.ndarray:
    """Coefficients h_m at φ (scalar → shape (N+1,), array → (N+1, len))."""
    return np.array([np.polynomial.polynomial.polyval(phi, p) for p in polys])


def phi_series_1d(sym: OperatorSymbol, pot: Potential, point: EvalPoint, N: int) -> BetaSeries:
    polys = phi_polynomials_1d(sym, pot, point.t, N)
    return BetaSeries(N, eval_polynomials(polys, point.phi[0]), "phi", point.t, point.phi, {"method": "d1"})


def series_log(h: Sequence) -> list:
    """Formal logarithm of a power series with h_0 = 1 (entries may be arrays)."""
    if not np.all(np.asarray(h[0]) == 1.0):
        raise ValueError("series must start with 1")
    out = [0.0 * np.asarray(h[0])]
    for m in range(1, len(h)):
        acc = h[m]
        for k in range(1, m):
            acc = _sub(acc, _mul(k / m * 1.0, _mul(out[k], h[m - k])))
        out.append(acc)
    return out


def _mul(a, b):
    if np.ndim(a) and np.ndim(b):
        return np.polynomial.polynomial.polymul(a, b)
    return a * b


def _sub(a, b):
    if np.ndim(a) and np.ndim(b):
        return np.polynomial.polynomial.polysub(a, b)
    return a - b


def log_polynomials_1d(sym, pot, t, N) -> list[np.ndarray]:
    """Connected-series polynomials via the formal log of the closed one-dimensional series."""
    polys = phi_polynomials_1d(sym, pot, t, N)
    return [np.atleast_1d(p) for p in series_log(polys)]


# --- distribution function -------------------------------------------------


def _integrate(poly: np.ndarray, a: float, b: float) -> float:
    anti = np.polynomial.polynomial.polyint(poly)
    return float(np.polynomial.polynomial.polyval(b, anti) - np.polynomial.polynomial.polyval(a, anti))


def cdf_series(sym: OperatorSymbol, pot: Potential, a: float, b: float, t: float, N: int) -> list[float]:
    """Order-m coefficients of P(a < Z_t ≤ b): exact integrals of h_m(φ)."""
    if not a < b:
        raise ValueError("need a < b")
    return [_integrate(p, a, b) for p in phi_polynomials_1d(sym, pot, t, N)]


def cdf_series_printed(sym: OperatorSymbol, pot: Potential, a: float, b: float, t: float, N: int) -> list[float]:
    """Literal transcription of the printed distribution-function formula,
    with (a^{k+1} − b^{k+1})/(k+1) in place of the φ power.  Under the +φ
    convention this is exactly −cdf_series."""
    out = []
    for terms in _closed_1d_terms(sym, pot, t, N):
        out.append(math.fsum(c * (a ** (k + 1) - b ** (k + 1)) / (k + 1) for k, c in terms))
    return out


# --- large diffusion -------------------------------------------------------


def large_diffusion_setup(spec: LevyJumpSpec, N: int, mu: float | None = None) -> tuple[OperatorSymbol, Potential, float]:
    """Pure-jump symbol (μ → 0, drift kept) and V = ‖φ‖² with the β factors dropped."""
    iso = spec.isotropic_diffusion()
    if mu is None:
        mu = iso
    elif not math.isclose(mu, iso, rel_tol=1e-12, abs_tol=1e-300):
        raise ModelError(f"mu={mu} disagrees with the diffusion matrix ({iso})")
    sym = levy_to_symbol(spec.without_diffusion(), 2 * N)
    return sym, Potential.quadratic(spec.dim, 1.0), mu


def large_diffusion_series(spec: LevyJumpSpec, mu: float | None, point: EvalPoint, N: int, log: bool = False,
                           *, fast_1d: bool = False) -> BetaSeries:
    """β-series of (β/π)^{-d/2}Φ_t (or its log) with β = 1/(4μt)."""
    sym, pot, mu = large_diffusion_setup(spec, N, mu)
    kind = "large_diffusion_log" if log else "large_diffusion"
    meta = {"mu": mu, "beta": 1.0 / (4.0 * mu * point.t) if mu > 0 else math.inf}
    if fast_1d:
        polys = (log_polynomials_1d if log else phi_polynomials_1d)(sym, pot, point.t, N)
        coeffs = eval_polynomials(polys, point.phi[0])
        meta["method"] = "d1"
    else:
        coeffs = (log_phi_series if log else phi_series)(sym, pot, point, N).coeffs
        meta["method"] = "topological"
    return BetaSeries(N, coeffs, kind, point.t, point.phi, meta)


def large_diffusion_polynomials(spec: LevyJumpSpec, t: float, N: int, log: bool = False,
                                mu: float | None = None) -> list[np.ndarray]:
    """d = 1 polynomials in φ for the large-diffusion series (graph path)."""
    sym, pot, _ = large_diffusion_setup(spec, N, mu)
    return graph_polynomials_1d(sym, pot, t, N, connected=log)
