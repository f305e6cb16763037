"""Command-line front end: expand | density | quantiles | simulate | compare."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import evaluator as ev
from .errors import LevyGraphError
from .model import EvalPoint, LevyJumpSpec, ModelError, ModelFile, load_model, validate_potential
from .montecarlo import (
    JumpDiffusionModel,
    compare_quantiles,
    empirical_density,
    gaussian_quantile,
    integration_window,
    model_quantile,
    normalize_density,
    simulate,
)
from .resummation import ResumMethod, SingularSystem, parse_method, resum

DEFAULT_SEED = 20080322
SEED_ENV = "LEVYGRAPH_SEED"
EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(LevyGraphError):
    category = "usage"


# --- parsing helpers -------------------------------------------------------


def parse_grid(text: str) -> list[float]:
    """``lo:hi:step`` → inclusive grid."""
    try:
        lo, hi, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise UsageError(f"grid {text!r} is not of the form lo:hi:step") from None
    if not step > 0 or hi < lo:
        raise UsageError(f"grid {text!r} is empty")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + i * step, 12) for i in range(count)]


def parse_floats(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"cannot parse number list {text!r}") from None
    if not vals:
        raise UsageError("empty number list")
    return vals


def resolve_seed(arg: int | None) -> int:
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None
    return DEFAULT_SEED if arg is None else arg


# --- output ----------------------------------------------------------------


@dataclass
class Report:
    config: dict
    columns: list[str]
    rows: list[list] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def render(self, fmt: str) -> str:
        if fmt == "json":
            body = {"config": self.config, "columns": self.columns, "rows": self.rows, **self.extra}
            return json.dumps(body, sort_keys=True, indent=2) + "\n"
        buf = io.StringIO()
        buf.write("# config: " + json.dumps(self.config, sort_keys=True) + "\n")
        for key in sorted(self.extra):
            buf.write(f"# {key}: " + json.dumps(self.extra[key], sort_keys=True) + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
        return buf.getvalue()


def _emit(report: Report, args) -> None:
    text = report.render(args.format)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _config(args, **resolved) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("func",)}
    cfg.update(resolved)
    return cfg


# --- model access ----------------------------------------------------------


def _load(args) -> ModelFile:
    if not args.model:
        raise UsageError("--model is required")
    if not os.path.exists(args.model):
        raise UsageError(f"model file {args.model!r} does not exist")
    return load_model(args.model)


def _jump_diffusion(mf: ModelFile) -> JumpDiffusionModel:
    if not mf.jump_diffusion:
        raise ModelError("model file has no 'jump_diffusion' section")
    jd = dict(mf.jump_diffusion)
    if "a" not in jd:
        return JumpDiffusionModel.shifted(jd["beta"], jd.get("z1", 0.0), jd.get("s1", 1.0), jd.get("z2", 0.0),
                                          jd.get("s2", 1.0))
    return JumpDiffusionModel(**{k: float(v) for k, v in jd.items()})


def _levy_view(mf: ModelFile, t: float) -> tuple[LevyJumpSpec, float, float]:
    """(spec, time, centre offset) for large-diffusion work."""
    if mf.jump_diffusion:
        jd = _jump_diffusion(mf)
        return jd.to_levy_spec(), 1.0, jd.mean
    if mf.levy is None:
        raise ModelError("large-diffusion mode needs a 'levy' or 'jump_diffusion' section")
    return mf.levy, t, 0.0


def _points(args, dim: int) -> list[tuple[float, ...]]:
    if args.grid:
        if dim != 1:
            raise UsageError("--grid needs a one-dimensional model; use --phi")
        return [(x,) for x in parse_grid(args.grid)]
    if args.phi:
        vals = parse_floats(args.phi)
        if len(vals) != dim:
            raise UsageError(f"--phi needs {dim} components")
        return [tuple(vals)]
    return [(0.0,) * dim]


# --- commands --------------------------------------------------------------


def cmd_expand(args) -> Report:
    mf = _load(args)
    N = args.order
    records = []
    if args.large_diffusion:
        spec, t, offset = _levy_view(mf, args.time)
        for phi in _points(args, spec.dim):
            shifted = tuple(x - offset for x in phi) if spec.dim == 1 else phi
            s = ev.large_diffusion_series(spec, None, EvalPoint(t, shifted), N, log=args.log,
                                          fast_1d=args.d1_fast and spec.dim == 1)
            rec = s.to_record()
            rec["phi"] = list(phi)
            records.append(rec)
    else:
        if mf.potential is None:
            raise ModelError("expansion needs a 'potential' section")
        pot = mf.potential
        validate_potential(pot)
        sym = mf.operator_symbol(max(1, pot.max_degree * N))
        for phi in _points(args, mf.dim):
            point = EvalPoint(args.time, phi)
            if args.d1_fast:
                polys = (ev.log_polynomials_1d if args.log else ev.phi_polynomials_1d)(sym, pot, args.time, N)
                s = ev.BetaSeries(N, ev.eval_polynomials(polys, phi[0]), "log_phi" if args.log else "phi",
                                  args.time, phi)
            else:
                s = (ev.log_phi_series if args.log else ev.phi_series)(sym, pot, point, N)
            records.append(s.to_record())
    cols = ["kind", "t", "phi", "N"] + [f"h{m}" for m in range(N + 1)] + ["beta_definition"]
    rows = [[r["kind"], r["t"], ";".join(repr(x) for x in r["phi"]), r["N"], *r["coeffs"], r["beta_definition"]]
            for r in records]
    return Report(_config(args, model_content=mf.raw), cols, rows, {"series": records} if args.format == "json" else {})


@dataclass
class LogDensity:
    """Resummed large-diffusion log density for d = 1 (unnormalized)."""

    polys: list
    beta: float
    method: ResumMethod
    offset: float
    experimental: bool = False
    fallbacks: int = 0

    def __call__(self, phi: float) -> float:
        h = ev.eval_polynomials(self.polys, phi - self.offset)
        series = ev.BetaSeries(len(h) - 1, h, "large_diffusion_log", 1.0, (phi,))
        try:
            value = resum(series, self.beta, self.method, self.experimental)
        except SingularSystem:
            # a degenerate series at this φ (e.g. h₁ = 0): use the partial sum
            self.fallbacks += 1
            value = series.partial_sum(self.beta)
        return 0.5 * math.log(self.beta / math.pi) + value


def _log_density(args, mf: ModelFile) -> tuple[LogDensity, float, float]:
    spec, t, offset = _levy_view(mf, args.time)
    if spec.dim != 1:
        raise UsageError("density mode needs d = 1")
    mu = spec.isotropic_diffusion()
    if not mu > 0:
        raise ModelError("density mode needs a positive diffusion constant")
    beta = 1.0 / (4.0 * mu * t)
    try:
        method = parse_method(args.resum)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    polys = ev.large_diffusion_polynomials(spec, t, args.order, log=True)
    ld = LogDensity(polys, beta, method, offset, experimental=args.experimental)
    sym = ev.levy_to_symbol(spec, 2)
    mean = offset - t * sym.rate((0,))
    var = 2 * mu * t + (spec.activity * t * spec.scalar_moment(2) if spec.activity else 0.0)
    return ld, mean, math.sqrt(var)


def cmd_density(args) -> Report:
    mf = _load(args)
    if not args.grid:
        raise UsageError("density needs --grid lo:hi:step")
    grid = parse_grid(args.grid)
    ld, mean, sd = _log_density(args, mf)
    window = integration_window(ld, mean, sd)
    Z = normalize_density(ld, window)
    rows = [[x, ld(x), math.exp(ld(x)) / Z] for x in grid]
    extra = {"normalization": Z, "window": list(window), "fallback_points": ld.fallbacks}
    return Report(_config(args, model_content=mf.raw), ["phi", "log_density", "density"], rows, extra)


def cmd_quantiles(args) -> Report:
    mf = _load(args)
    alphas = parse_floats(args.alpha)
    ld, mean, sd = _log_density(args, mf)
    window = integration_window(ld, mean, sd)
    Z = normalize_density(ld, window)
    cols = ["alpha", "model_quantile"]
    jd = _jump_diffusion(mf) if mf.jump_diffusion else None
    if jd is not None:
        cols.append("gaussian_quantile")
    rows = []
    for a in alphas:
        row = [a, model_quantile(ld, Z, a, window)]
        if jd is not None:
            row.append(gaussian_quantile(jd, a))
        rows.append(row)
    return Report(_config(args, model_content=mf.raw), cols, rows, {"normalization": Z, "window": list(window)})


def cmd_simulate(args) -> Report:
    mf = _load(args)
    jd = _jump_diffusion(mf)
    seed = resolve_seed(args.seed)
    sample = simulate(jd, args.n, seed, workers=args.workers)
    cfg = _config(args, model_content=mf.raw, seed=seed, resolved_model=jd.to_json())
    if args.bins:
        hist = empirical_density(sample, args.bins)
        rows = [[c, f, d] for c, f, d in zip(hist.centers, hist.relative_frequency, hist.density)]
        return Report(cfg, ["center", "relative_frequency", "density"], rows, {"bin_width": hist.bin_width})
    return Report(cfg, ["value"], [[float(v)] for v in sample.values])


def cmd_compare(args) -> Report:
    mf = _load(args)
    if args.n < 1000:
        raise UsageError("compare needs --n of at least 1000")
    base = _jump_diffusion(mf)
    seed = resolve_seed(args.seed)
    alphas = parse_floats(args.alpha)
    z1s = parse_floats(args.sweep_z1) if args.sweep_z1 else [base.z1]
    rows = []
    for z1 in z1s:
        model = JumpDiffusionModel.shifted(base.beta, z1, base.s1, base.z2, base.s2) if args.sweep_z1 else base
        for r in compare_quantiles(model, args.n, seed, alphas, workers=args.workers):
            rows.append([z1, r.alpha, r.empirical, r.pade, r.gaussian, r.pade_error, r.gaussian_error])
    cols = ["z1", "alpha", "empirical", "pade", "gaussian", "pade_abs_error", "gaussian_abs_error"]
    return Report(_config(args, model_content=mf.raw, seed=seed), cols, rows)


COMMANDS: dict[str, Callable] = {
    "expand": cmd_expand,
    "density": cmd_density,
    "quantiles": cmd_quantiles,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _diagnose("usage", message, EXIT_USAGE)
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="levygraph", description="Feynman-graph expansions of Lévy densities.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--model", help="model JSON file")
    parser.add_argument("--order", type=int, default=2, help="truncation order N")
    parser.add_argument("--resum", default="pade:1/1", help="partial | pade:M/N | borel:K")
    parser.add_argument("--grid", help="lo:hi:step (inclusive)")
    parser.add_argument("--phi", help="single evaluation point, comma separated")
    parser.add_argument("--time", type=float, default=1.0)
    parser.add_argument("--alpha", default="0.99", help="quantile levels, comma separated")
    parser.add_argument("--n", type=int, default=100_000, help="sample size")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--bins", type=int, default=0, help="simulate: emit a histogram instead of values")
    parser.add_argument("--sweep-z1", dest="sweep_z1", help="compare: comma separated z1 values")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--log", action="store_true", help="connected (log) expansion")
    parser.add_argument("--large-diffusion", dest="large_diffusion", action="store_true")
    parser.add_argument("--d1-fast", dest="d1_fast", action="store_true", help="closed one-dimensional formula")
    parser.add_argument("--experimental", action="store_true", help="allow Borel summation of log series")
    parser.add_argument("--out")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


def _diagnose(category: str, message: str, code: int) -> None:
    sys.stderr.write(json.dumps({"error": category, "message": message, "exit_code": code}) + "\n")


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.order < 0 or args.order > ev.ORDER_CAP:
        _diagnose("usage", f"--order must lie in 0..{ev.ORDER_CAP}", EXIT_USAGE)
        return EXIT_USAGE
    try:
        report = COMMANDS[args.command](args)
        _emit(report, args)
    except LevyGraphError as exc:
        code = EXIT_USAGE if exc.category == "usage" else EXIT_RUNTIME
        _diagnose(exc.category, str(exc), code)
        return code
    except (ValueError, KeyError, TypeError, OSError, ArithmeticError) as exc:
        _diagnose("runtime", f"{type(exc).__name__}: {exc}", EXIT_RUNTIME)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
