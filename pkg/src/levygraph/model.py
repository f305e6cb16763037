"""Model inputs: symmetric tensors, operator symbols, potentials and Lévy data.

Indices are 0-based throughout.  A symmetric tensor stores one value per
sorted multi-index; the full tensor is recovered by symmetry.  Coefficients
of an :class:`OperatorSymbol` follow the unrestricted-sum convention

    Ψ(ξ) = Σ_n Σ_{X_1..X_n} C_{X_1..X_n} ξ_{X_1} ··· ξ_{X_n},

so the n-th derivative of Ψ at zero (the truncated-moment rate) is
``n! * C[sorted index]``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import LevyGraphError


class ModelError(LevyGraphError, ValueError):
    category = "model"


class MissingJumpMoments(ModelError):
    pass


class OddTopDegree(ModelError):
    pass


class NonPositiveTopTensor(ModelError):
    pass


def sorted_indices(degree: int, dim: int) -> Iterable[tuple[int, ...]]:
    return itertools.combinations_with_replacement(range(dim), degree)


def permutation_count(index: Sequence[int]) -> int:
    """Number of distinct orderings of a multi-index."""
    n = math.factorial(len(index))
    for _, group in itertools.groupby(sorted(index)):
        n //= math.factorial(len(list(group)))
    return n


@dataclass(frozen=True)
class SymTensor:
    degree: int
    dim: int
    coeffs: Mapping[tuple[int, ...], float]

    def __post_init__(self):
        if self.degree < 0 or self.dim < 1:
            raise ModelError(f"bad tensor shape degree={self.degree} dim={self.dim}")
        clean = {}
        for idx, val in self.coeffs.items():
            key = tuple(sorted(int(i) for i in idx))
            if len(key) != self.degree or any(i < 0 or i >= self.dim for i in key):
                raise ModelError(f"index {idx} invalid for degree {self.degree}, dim {self.dim}")
            if key in clean:
                raise ModelError(f"duplicate entry for sorted index {key}")
            clean[key] = float(val)
        for key in sorted_indices(self.degree, self.dim):
            clean.setdefault(key, 0.0)
        object.__setattr__(self, "coeffs", MappingProxyType(clean))

    @classmethod
    def zeros(cls, degree: int, dim: int) -> "SymTensor":
        return cls(degree, dim, {})

    @classmethod
    def scalar(cls, value: float, dim: int = 1) -> "SymTensor":
        return cls(0, dim, {(): value})

    @classmethod
    def scalar1d(cls, degree: int, value: float) -> "SymTensor":
        """The single entry of a degree-n tensor in one dimension."""
        return cls(degree, 1, {(0,) * degree: value})

    @classmethod
    def from_dense(cls, array, *, symmetrize: bool = False) -> "SymTensor":
        """Build from a full array of shape (d,)*p; asymmetric input is rejected
        unless ``symmetrize`` is set."""
        arr = np.asarray(array, dtype=float)
        degree = arr.ndim
        dim = arr.shape[0] if degree else 1
        if degree and any(s != dim for s in arr.shape):
            raise ModelError(f"non-cubic array of shape {arr.shape}")
        if degree > 1:
            sym = np.zeros_like(arr)
            perms = list(itertools.permutations(range(degree)))
            for perm in perms:
                sym += np.transpose(arr, perm)
            sym /= len(perms)
            if not symmetrize and not np.allclose(sym, arr, rtol=1e-12, atol=1e-14):
                raise ModelError("array is not symmetric")
            arr = sym
        coeffs = {idx: arr[idx] if degree else float(arr) for idx in sorted_indices(degree, dim)}
        return cls(degree, dim, coeffs)

    def __getitem__(self, index) -> float:
        return self.coeffs[tuple(sorted(index))]

    def is_zero(self) -> bool:
        return all(v == 0.0 for v in self.coeffs.values())

    @cached_property
    def dense(self) -> np.ndarray:
        arr = np.zeros((self.dim,) * self.degree)
        for idx, val in self.coeffs.items():
            if val == 0.0:
                continue
            for perm in set(itertools.permutations(idx)):
                arr[perm] = val
        arr.setflags(write=False)
        return arr

    def contract(self, vec) -> float:
        """⟨T, v^{⊗p}⟩ with the unrestricted index sum."""
        v = np.asarray(vec, dtype=float).reshape(self.dim)
        return float(
            sum(val * permutation_count(idx) * np.prod(v[list(idx)]) for idx, val in self.coeffs.items() if val)
        )

    def scaled(self, factor: float) -> "SymTensor":
        return SymTensor(self.degree, self.dim, {k: factor * v for k, v in self.coeffs.items()})

    def __add__(self, other: "SymTensor") -> "SymTensor":
        if (self.degree, self.dim) != (other.degree, other.dim):
            raise ModelError("shape mismatch in tensor sum")
        return SymTensor(self.degree, self.dim, {k: v + other.coeffs[k] for k, v in self.coeffs.items()})

    def to_json(self) -> list:
        return [{"index": list(k), "value": v} for k, v in self.coeffs.items() if v != 0.0]

    @classmethod
    def from_json(cls, degree: int, dim: int, data) -> "SymTensor":
        if isinstance(data, list) and (not data or isinstance(data[0], dict)):
            return cls(degree, dim, {tuple(e["index"]): e["value"] for e in data})
        if degree == 0:
            return cls.scalar(float(data), dim)
        return cls.from_dense(data)


def _tensor_family(dim: int, max_order: int, given: Mapping[int, SymTensor]) -> tuple[SymTensor, ...]:
    return tuple(given.get(n, SymTensor.zeros(n, dim)) for n in range(max_order + 1))


@dataclass(frozen=True)
class OperatorSymbol:
    """Truncated Taylor data of Ψ around 0 (one symmetric tensor per order)."""

    dim: int
    coeffs: tuple[SymTensor, ...]
    origin: str = "explicit"

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(self.coeffs))
        if not self.coeffs:
            raise ModelError("symbol needs at least the order-0 coefficient")
        for n, c in enumerate(self.coeffs):
            if c.degree != n or c.dim != self.dim:
                raise ModelError(f"coefficient {n} has degree {c.degree}, dim {c.dim}")
        if self.coeffs[0][()] != 0.0:
            raise ModelError("Ψ(0) must vanish; handle a killing rate via exp(tΨ(0)) outside")
        if self.origin not in ("explicit", "levy"):
            raise ModelError(f"unknown origin {self.origin!r}")

    @classmethod
    def from_orders(cls, dim: int, tensors: Mapping[int, SymTensor], max_order: int | None = None,
                    origin: str = "explicit") -> "OperatorSymbol":
        top = max(tensors, default=0) if max_order is None else max_order
        return cls(dim, _tensor_family(dim, top, tensors), origin)

    @property
    def max_order(self) -> int:
        return len(self.coeffs) - 1

    def tensor(self, n: int) -> SymTensor:
        if n > self.max_order:
            raise ModelError(f"symbol truncated at order {self.max_order}, order {n} requested")
        return self.coeffs[n]

    def rate(self, index: Sequence[int]) -> float:
        """n-th partial derivative of Ψ at 0 for the given index tuple."""
        n = len(index)
        return math.factorial(n) * self.tensor(n)[index]

    def rate_tensor(self, n: int) -> np.ndarray:
        return math.factorial(n) * self.tensor(n).dense

    def vanishing_orders(self) -> frozenset[int]:
        return frozenset(n for n, c in enumerate(self.coeffs) if n and c.is_zero())

    def is_even(self) -> bool:
        return all(self.coeffs[n].is_zero() for n in range(1, self.max_order + 1, 2))

    def evaluate(self, xi) -> float:
        """Truncated Taylor sum of Ψ at a real point ξ."""
        return sum(c.contract(xi) for c in self.coeffs[1:])


@dataclass(frozen=True)
class LevyJumpSpec:
    """Drift a, diffusion matrix D, jump activity z and moment tensors of r."""

    dim: int
    drift: tuple[float, ...]
    diffusion: tuple[tuple[float, ...], ...]
    activity: float
    jump_moments: Mapping[int, SymTensor] = field(default_factory=dict)

    def __post_init__(self):
        d = self.dim
        drift = tuple(float(x) for x in np.asarray(self.drift, dtype=float).reshape(d))
        diff = np.asarray(self.diffusion, dtype=float).reshape(d, d)
        if not np.allclose(diff, diff.T, atol=1e-14):
            raise ModelError("diffusion matrix must be symmetric")
        if np.linalg.eigvalsh(diff).min() < -1e-12:
            raise ModelError("diffusion matrix must be positive semidefinite")
        if self.activity < 0:
            raise ModelError("jump activity z must be non-negative")
        moments = {}
        for n, m in dict(self.jump_moments).items():
            n = int(n)
            if n < 1:
                raise ModelError("jump moments start at order 1 (order 0 is 1)")
            if not isinstance(m, SymTensor):
                m = SymTensor.from_dense(m)
            if m.degree != n or m.dim != d:
                raise ModelError(f"jump moment {n} has wrong shape")
            moments[n] = m
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "diffusion", tuple(tuple(row) for row in diff))
        object.__setattr__(self, "jump_moments", MappingProxyType(moments))

    @classmethod
    def from_atoms(cls, drift, diffusion, activity: float, atoms, weights, max_order: int) -> "LevyJumpSpec":
        """Jump law r = Σ w_i δ_{s_i} (weights normalized to 1)."""
        atoms = np.atleast_2d(np.asarray(atoms, dtype=float))
        w = np.asarray(weights, dtype=float)
        w = w / w.sum()
        dim = atoms.shape[1]
        moments = {}
        for n in range(1, max_order + 1):
            moments[n] = SymTensor(
                n, dim, {idx: float(np.sum(w * np.prod(atoms[:, list(idx)], axis=1))) for idx in sorted_indices(n, dim)}
            )
        return cls(dim, drift, diffusion, activity, moments)

    @property
    def max_moment_order(self) -> int:
        n = 0
        while n + 1 in self.jump_moments:
            n += 1
        return n

    def scalar_moment(self, n: int) -> float:
        if self.dim != 1:
            raise ModelError("scalar moments need d = 1")
        if n == 0:
            return 1.0
        if n not in self.jump_moments:
            raise MissingJumpMoments(f"jump moment of order {n} not supplied")
        return self.jump_moments[n][(0,) * n]

    def isotropic_diffusion(self) -> float:
        """μ if D = μ·identity, else raises."""
        diff = np.asarray(self.diffusion)
        mu = diff[0, 0]
        if not np.allclose(diff, mu * np.eye(self.dim), rtol=0, atol=1e-14 * max(1.0, abs(mu))):
            raise ModelError("diffusion matrix is not isotropic")
        return float(mu)

    def without_diffusion(self) -> "LevyJumpSpec":
        return LevyJumpSpec(self.dim, self.drift, np.zeros((self.dim, self.dim)), self.activity, self.jump_moments)


def levy_to_symbol(spec: LevyJumpSpec, max_order: int) -> OperatorSymbol:
    """Taylor coefficients of Ψ(ξ) = −⟨a,ξ⟩ + ⟨ξ,Dξ⟩ + z ∫(e^{⟨s,ξ⟩} − 1) dr(s).

    This is the symbol of the generator in the jump-diffusion equation
    ∂Φ = −a·∇Φ + Σ D ∂²Φ + z∫[Φ(φ+s) − Φ(φ)]dr(s).  For n ≥ 1 the jump part
    contributes z·M_n/n! to the stored (sorted) entry, M_n being the n-th
    moment tensor of r, so the rate n!·C equals z·M_n (plus 2D at n = 2 and −a
    at n = 1).
    """
    if max_order < 0:
        raise ModelError("max_order must be non-negative")
    d = spec.dim
    if spec.activity > 0:
        missing = [n for n in range(1, max_order + 1) if n not in spec.jump_moments]
        if missing:
            raise MissingJumpMoments(f"jump moments missing for orders {missing}")
    tensors: dict[int, SymTensor] = {}
    for n in range(1, max_order + 1):
        if spec.activity > 0:
            tensors[n] = spec.jump_moments[n].scaled(spec.activity / math.factorial(n))
        else:
            tensors[n] = SymTensor.zeros(n, d)
    if max_order >= 1:
        tensors[1] = tensors[1] + SymTensor(1, d, {(i,): -a for i, a in enumerate(spec.drift)})
    if max_order >= 2:
        diff = np.asarray(spec.diffusion)
        tensors[2] = tensors[2] + SymTensor.from_dense(diff)
    return OperatorSymbol.from_orders(d, tensors, max_order, origin="levy")


def shift_symbol(sym: OperatorSymbol, shift, t0: float) -> OperatorSymbol:
    """Add a deterministic drift so that the new problem at φ = 0 and time t0
    equals the original problem at φ = shift."""
    if t0 <= 0:
        raise ModelError("t0 must be positive")
    shift = np.asarray(shift, dtype=float).reshape(sym.dim)
    coeffs = list(sym.coeffs)
    if sym.max_order < 1:
        coeffs.append(SymTensor.zeros(1, sym.dim))
    coeffs[1] = coeffs[1] + SymTensor(1, sym.dim, {(i,): s / t0 for i, s in enumerate(shift)})
    return OperatorSymbol(sym.dim, tuple(coeffs), sym.origin)


@dataclass(frozen=True)
class Potential:
    """Polynomial V(φ) = Σ_p ⟨λ^(p), φ^{⊗p}⟩ with tensors for degrees 0..p̄."""

    dim: int
    coeffs: tuple[SymTensor, ...]

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(self.coeffs))
        for p, c in enumerate(self.coeffs):
            if c.degree != p or c.dim != self.dim:
                raise ModelError(f"potential coefficient {p} has degree {c.degree}, dim {c.dim}")

    @classmethod
    def from_degrees(cls, dim: int, tensors: Mapping[int, SymTensor]) -> "Potential":
        return cls(dim, _tensor_family(dim, max(tensors, default=0), tensors))

    @classmethod
    def quadratic(cls, dim: int, lam: float = 1.0) -> "Potential":
        """V = lam·‖φ‖²."""
        return cls.from_degrees(dim, {2: SymTensor(2, dim, {(i, i): lam for i in range(dim)})})

    @property
    def max_degree(self) -> int:
        return len(self.coeffs) - 1

    def nonzero_degrees(self) -> tuple[int, ...]:
        return tuple(p for p, c in enumerate(self.coeffs) if not c.is_zero())

    def evaluate(self, phi) -> float:
        return sum(c.contract(phi) for c in self.coeffs)

    def is_isotropic_quadratic(self) -> float | None:
        """lam if V = lam·‖φ‖², else None."""
        if self.nonzero_degrees() != (2,):
            return None
        lam2 = self.coeffs[2].dense
        lam = lam2[0, 0]
        return float(lam) if np.array_equal(lam2, lam * np.eye(self.dim)) else None


@dataclass(frozen=True)
class ValidationReport:
    max_degree: int
    samples: int
    min_top_value: float


def validate_potential(pot: Potential, samples: int = 1000, seed: int = 20080322) -> ValidationReport:
    """Check p̄ even and ⟨λ^(p̄), φ^{⊗p̄}⟩ > 0 on unit vectors (exact for d = 1)."""
    top = pot.max_degree
    if top % 2:
        raise OddTopDegree(f"top degree {top} is odd")
    lam = pot.coeffs[top]
    if pot.dim == 1:
        value = lam[(0,) * top]
        if not value > 0:
            raise NonPositiveTopTensor(f"top coefficient {value} is not positive")
        return ValidationReport(top, 0, value)
    rng = np.random.default_rng(seed)
    vecs = rng.standard_normal((samples, pot.dim))
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    # coordinate axes catch diagonal sign defects the random sample could miss
    vecs = np.vstack([np.eye(pot.dim), vecs])
    vals = np.array([lam.contract(v) for v in vecs])
    worst = float(vals.min())
    if not worst > 0:
        raise NonPositiveTopTensor(f"top form takes value {worst} on a unit vector")
    return ValidationReport(top, len(vecs), worst)


@dataclass(frozen=True)
class EvalPoint:
    t: float
    phi: tuple[float, ...]

    def __post_init__(self):
        if not self.t > 0:
            raise ModelError("time must be strictly positive")
        object.__setattr__(self, "phi", tuple(float(x) for x in np.atleast_1d(np.asarray(self.phi, dtype=float))))

    @property
    def dim(self) -> int:
        return len(self.phi)


def _family_from_json(dim: int, data: Mapping) -> dict[int, SymTensor]:
    return {int(n): SymTensor.from_json(int(n), dim, v) for n, v in data.items()}


@dataclass(frozen=True)
class ModelFile:
    dim: int
    levy: LevyJumpSpec | None
    symbol: OperatorSymbol | None
    potential: Potential | None
    jump_diffusion: Mapping | None = None
    raw: Mapping = field(default_factory=dict, compare=False)

    def operator_symbol(self, max_order: int) -> OperatorSymbol:
        if self.symbol is not None:
            if self.symbol.max_order >= max_order:
                return self.symbol
            return OperatorSymbol.from_orders(self.dim, dict(enumerate(self.symbol.coeffs)), max_order)
        if self.levy is None:
            raise ModelError("model file defines neither 'levy' nor 'coeffs'")
        return levy_to_symbol(self.levy, max_order)


def parse_model(data: Mapping) -> ModelFile:
    """Parse the JSON model structure (see README for the schema)."""
    try:
        dim = int(data["dim"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError("model needs an integer 'dim'") from exc
    levy = symbol = potential = None
    if "levy" in data:
        lv = data["levy"]
        moments = {int(n): SymTensor.from_json(int(n), dim, v) for n, v in lv.get("jump_moments", {}).items()}
        levy = LevyJumpSpec(
            dim,
            lv.get("drift", [0.0] * dim),
            lv.get("diffusion", np.zeros((dim, dim)).tolist()),
            float(lv.get("activity", 0.0)),
            moments,
        )
    if "coeffs" in data:
        symbol = OperatorSymbol.from_orders(dim, _family_from_json(dim, data["coeffs"]))
    if "potential" in data:
        potential = Potential.from_degrees(dim, _family_from_json(dim, data["potential"]))
    return ModelFile(dim, levy, symbol, potential, data.get("jump_diffusion"), data)


def load_model(path) -> ModelFile:
    with open(path) as fh:
        return parse_model(json.load(fh))
