"""Feynman-graph expansions for Lévy-type evolution equations.

Graph enumeration and Feynman rules for the β-expansion of
Φ_t = e^{tΨ(∇)} e^{-βV}, its connected (log) version, the large-diffusion
expansion of jump-diffusion densities, Padé and Borel resummation, and a
Monte Carlo comparison harness.
"""

from .errors import LevyGraphError
from .evaluator import (
    BetaSeries,
    cdf_series,
    eval_graph,
    eval_quad_graph,
    large_diffusion_series,
    log_phi_series,
    moment,
    phi_series,
    phi_series_1d,
    truncated_moment,
)
from .graphs import FeynmanGraph, QuadGraph, TopoClass, enumerate_graphs, enumerate_quad_graphs, topological_classes
from .model import (
    EvalPoint,
    LevyJumpSpec,
    OperatorSymbol,
    Potential,
    SymTensor,
    levy_to_symbol,
    load_model,
    shift_symbol,
)
from .montecarlo import JumpDiffusionModel, simulate
from .resummation import PadeApprox, borel_resum, eval_pade, pade, pade_log_density_2nd

__version__ = "0.1.0"
