"""
Batch command line: ``ncbloch <command> [options]``.

Every command calls library functions, collects named checks with their
tolerances, and writes a result bundle.  Exit status: 0 when every check
passes, 1 when a check fails, 2 for configuration or model-loading errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import decomposition as dec
from . import groups, torus
from .covering import periodicity_defect, representation_defect
from .errors import BlochError, ConfigInvalid, ModelLoadError
from .models import load_model
from .reports import Check, ResultBundle, Table, dumps, export

COMMANDS = ("group-check", "decompose", "kernel-check", "abelian-reduce",
            "torus-spectrum", "torus-green", "torus-trace")

DEFAULTS: dict[str, Any] = {
    "model": "builtin:s3-demo",
    "group": "S3",
    "N": 1,
    "mu": 0.0,
    "nu": 0.0,
    "z": [-1.0, 0.0],
    "grid_l": 128,
    "truncation_k": 6,
    "t": 1.0,
    "seed": 7,
}

# config-file keys and the flags that override them
FLAG_KEYS = {"model": "model", "group": "group", "N": "N", "mu": "mu", "nu": "nu",
             "L": "grid_l", "K": "truncation_k", "t": "t", "seed": "seed"}


@dataclass
class RunConfig:
    command: str
    params: dict[str, Any]
    output_path: Path | None = None
    fmt: str = "json"
    seed: int = 7
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def z(self) -> complex:
        re, im = self.params["z"]
        return complex(re, im)


def max_workers() -> int:
    raw = os.environ.get("BLOCH_NUM_THREADS", "")
    try:
        return max(1, int(raw)) if raw else (os.cpu_count() or 1)
    except ValueError:
        raise ConfigInvalid(f"BLOCH_NUM_THREADS must be an integer, got {raw!r}")


def fan_out(fn: Callable, items: list) -> list:
    """Map in a bounded thread pool; results keep the input order."""
    workers = min(max_workers(), max(1, len(items)))
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# -----------------------------------------------------------------------------
# commands
# -----------------------------------------------------------------------------

def run_group_check(cfg: RunConfig) -> ResultBundle:
    try:
        dual = groups.builtin_dual(str(cfg.params["group"]))
    except KeyError as exc:
        raise ConfigInvalid(str(exc)) from exc
    grp = dual.group
    b = ResultBundle(cfg.command, {"group": cfg.params["group"]}, cfg.seed)
    b.tables["irreps"] = Table(["name", "dim", "weight"],
                               [[r.name, r.dim, float(w)] for r, w in zip(dual.irreps, dual.weights)])
    b.checks.append(Check.at_most("schur_orthogonality", groups.schur_defect(dual), 1e-12))
    completeness = sum(w * r.dim for w, r in zip(dual.weights, dual.irreps))
    b.checks.append(Check.at_most("plancherel_completeness", abs(float(completeness) - 1.0), 0.0))
    rng = np.random.default_rng(cfg.seed)
    norm_err = trip_err = rule_err = 0.0
    for _ in range(10):
        f = rng.normal(size=grp.order) + 1j * rng.normal(size=grp.order)
        fh = groups.fourier(dual, f)
        norm_err = max(norm_err, abs(groups.plancherel_norm_sq(dual, fh) - np.vdot(f, f).real))
        trip_err = max(trip_err, float(np.max(np.abs(groups.inverse_fourier(dual, fh) - f))))
        r = int(rng.integers(grp.order))
        moved = groups.fourier(dual, groups.translate(grp, f, r))
        expect = [rep(grp.inverses[r]) @ x for rep, x in zip(dual.irreps, fh)]
        rule_err = max(rule_err, max(float(np.max(np.abs(a - e))) for a, e in zip(moved, expect)))
    b.checks += [Check.at_most("plancherel_identity", norm_err, 1e-12),
                 Check.at_most("fourier_round_trip", trip_err, 1e-12),
                 Check.at_most("translation_rule", rule_err, 1e-12)]
    b.summary = {"order": grp.order, "dims": [r.dim for r in dual.irreps]}
    return b


def _load(cfg: RunConfig):
    return load_model(str(cfg.params["model"]), int(cfg.seed))


def run_decompose(cfg: RunConfig) -> ResultBundle:
    m, dual = _load(cfg)
    bd = dec.decompose(m, dual)
    b = ResultBundle(cfg.command, {"model": cfg.params["model"]}, cfg.seed)
    b.tables["spectrum"] = Table(["index", "h_tilde", "blocks"],
                                 [[i, float(a), float(c)] for i, (a, c) in
                                  enumerate(zip(bd.spectral.values, bd.union_spectrum()))])
    b.tables["blocks"] = Table(["irrep", "dim", "block_size"],
                               [[r.name, r.dim, bd.blocks[r.name].shape[0]] for r in dual.irreps])
    b.checks += [
        Check.at_most("hermitian", float(np.max(np.abs(m.h_tilde - m.h_tilde.conj().T))), 1e-12),
        Check.at_most("periodicity", periodicity_defect(m), 1e-12),
        Check.at_most("translation_representation", representation_defect(m), 1e-12),
        Check.at_most("bloch_unitarity", bd.unitarity_defect(), 1e-12),
        Check.at_most("block_diagonalization", bd.block_defect(), 1e-10),
        Check.at_most("spectrum_match", bd.spectrum_defect(), 1e-8),
    ]
    b.summary = {"N": m.dim, "group": m.group.name}
    return b


def run_kernel_check(cfg: RunConfig) -> ResultBundle:
    m, dual = _load(cfg)
    t = float(cfg.params["t"])
    z = cfg.z
    bd = dec.decompose(m, dual)
    sp = bd.spectral

    def one(r):
        kp = dec.reconstruct_propagator(m, r, t, sp)
        kd = dec.direct_equivariant_kernel(m, r, "propagator", t)
        gp = dec.reconstruct_green(m, r, z, sp)
        ga = dec.reconstruct_green(m, r, z, sp, alternative=True)
        gd = dec.direct_equivariant_kernel(m, r, "green", z)
        return (r.name,
                float(np.max(np.abs(kp.matrix - kd.matrix))),
                float(np.max(np.abs(gp.matrix - gd.matrix))),
                float(np.max(np.abs(ga.matrix - gd.matrix))),
                max(dec.equivariance_defect(m, r, kp), dec.equivariance_defect(m, r, gp)))

    rows = fan_out(one, list(dual.irreps))
    b = ResultBundle(cfg.command, {"model": cfg.params["model"], "t": t, "z": z}, cfg.seed)
    b.tables["kernels"] = Table(["irrep", "propagator", "green", "green_alternative", "equivariance"],
                                [list(r) for r in rows])
    for name, kp, gp, ga, eq in rows:
        b.checks += [Check.at_most(f"propagator[{name}]", kp, 1e-10),
                     Check.at_most(f"green[{name}]", gp, 1e-10),
                     Check.at_most(f"green_alternative[{name}]", ga, 1e-10),
                     Check.at_most(f"equivariance[{name}]", eq, 1e-10)]
    b.checks.append(Check.at_most("periodic_kernel_invariance",
                                  dec.invariance_defect(m, dec.periodic_kernel(m, "green", z, sp)), 1e-10))
    b.checks.append(Check.at_most("evolution_decomposition", dec.evolution_decompose(bd, t)["deviation"], 1e-9))
    b.checks.append(Check.at_most("resolvent_decomposition", dec.resolvent_decompose(bd, z)["deviation"], 1e-9))
    return b


def run_abelian_reduce(cfg: RunConfig) -> ResultBundle:
    n = int(cfg.params.get("cycle_length", 8))
    k = int(cfg.params["truncation_k"])
    z = cfg.z
    rep = dec.abelian_reduction_green(n, z, k)
    b = ResultBundle(cfg.command, {"cycle_length": n, "K": k, "z": z}, cfg.seed)
    b.tables["truncation_error"] = Table(["K", "error"], [[kk, e] for kk, e in rep.error_curve])
    b.checks += [
        Check.at_most("periodized_sum_vs_cycle_resolvent", rep.max_error, 1e-10),
        Check.at_most("l1_resolvent_bound", rep.l1_norm, rep.l1_bound * (1 + 1e-12)),
        Check.at_most("heat_kernel_negativity", max(0.0, -rep.heat_min), 0.0),
        Check.at_most("heat_kernel_row_sum", rep.heat_row_sum_max, 1.0 + 1e-12),
        Check.at_most("laplace_transform", rep.laplace_defect, 1e-9),
    ]
    b.summary = {"decay": rep.decay, "fitted_rate": rep.fitted_rate, "predicted_rate": rep.predicted_rate,
                 "tail_estimate": rep.tail_estimate}
    return b


def _landau(cfg: RunConfig) -> torus.LandauModel:
    try:
        return torus.LandauModel(int(cfg.params["N"]), float(cfg.params["mu"]), float(cfg.params["nu"]))
    except ValueError as exc:
        raise ConfigInvalid(str(exc)) from exc


def run_torus_spectrum(cfg: RunConfig) -> ResultBundle:
    model = _landau(cfg)
    grid = int(cfg.params["grid_l"])
    mult = abs(model.flux_n)
    count = max(6, 3 * mult)
    vals = torus.discrete_eigenvalues(torus.discretize_h_lambda(model, grid), count)
    exact = torus.analytic_levels(model, count)
    b = ResultBundle(cfg.command, {"N": model.flux_n, "mu": model.mu, "nu": model.nu, "L": grid}, cfg.seed)
    b.tables["levels"] = Table(["index", "discrete", "analytic", "relative_error"],
                               [[i, float(v), float(e), float(abs(v - e) / e)] for i, (v, e) in
                                enumerate(zip(vals, exact))])
    b.checks.append(Check.at_most("lowest_level", abs(vals[0] - exact[0]) / exact[0], 0.01))
    if mult > 1:
        split = (vals[mult - 1] - vals[0]) / vals[0]
        b.checks.append(Check.at_most("ground_degeneracy", split, 1e-3))
    b.summary = {"omega": model.omega, "lowest": float(vals[0])}
    return b


DEFAULT_POINTS = [(1.0, 0.5, 2.0, 1.5), (0.4, 2.0, 3.1, 5.0), (5.0, 1.0, 2.5, 4.0)]


def run_torus_green(cfg: RunConfig) -> ResultBundle:
    model = _landau(cfg)
    z = cfg.z
    k = int(cfg.params["truncation_k"])
    grid = int(cfg.params["grid_l"])
    points = [tuple(map(float, p)) for p in cfg.params.get("points", DEFAULT_POINTS)]
    h = 2 * math.pi / grid

    def one(p):
        pois = torus.torus_green(model, z, *p, truncation=k, variant="poisson")
        direct = torus.torus_green(model, z, *p, truncation=k, variant="direct")
        shifted = torus.shifted_green(model, z, *p, truncation=k, variant="direct")
        return p, pois, direct, shifted

    results = fan_out(one, points)
    b = ResultBundle(cfg.command, {"N": model.flux_n, "mu": model.mu, "nu": model.nu, "z": z, "K": k,
                                   "L": grid, "points": [list(p) for p in points]}, cfg.seed)
    rows = []
    for i, (p, pois, direct, shifted) in enumerate(results):
        rows.append([*p, pois.value.real, pois.value.imag, pois.est_error,
                     direct.value.real, direct.value.imag, direct.est_error])
        b.checks.append(Check.at_most(f"poisson_vs_direct[{i}]", abs(pois.value - direct.value), 1e-4))
        b.checks.append(Check.at_most(f"shift_identity[{i}]", abs(direct.value - shifted), 1e-6))
    b.tables["green"] = Table(["x1", "y1", "x2", "y2", "poisson_re", "poisson_im", "poisson_est_error",
                               "direct_re", "direct_im", "direct_est_error"], rows)

    op = torus.discretize_h_lambda(model, grid)
    oracle_rows = []
    for i, p in enumerate(points):
        j1, l1, j2, l2 = (int(round(c / h)) % grid for c in p)
        if (j1, l1) == (j2, l2):
            continue
        disc = torus.discrete_green(op, z, (j2, l2))[j1, l1]
        val = torus.torus_green(model, z, j1 * h, l1 * h, j2 * h, l2 * h, truncation=k, variant="direct").value
        rel = abs(disc - val) / abs(val)
        oracle_rows.append([i, j1 * h, l1 * h, j2 * h, l2 * h, val.real, val.imag, disc.real, disc.imag, rel])
        b.checks.append(Check.at_most(f"grid_resolvent[{i}]", rel, 0.02))
    b.tables["grid_oracle"] = Table(["point", "x1", "y1", "x2", "y2", "analytic_re", "analytic_im",
                                     "grid_re", "grid_im", "relative_error"], oracle_rows)
    return b


def run_torus_trace(cfg: RunConfig) -> ResultBundle:
    model = _landau(cfg)
    t = float(cfg.params["t"])
    grid = int(cfg.params["grid_l"])
    rep = torus.heat_trace(model, t, grid)
    b = ResultBundle(cfg.command, {"N": model.flux_n, "t": t, "L": grid}, cfg.seed)
    b.tables["trace"] = Table(["quantity", "value"], [["eigen_sum", rep.eigen_sum],
                                                      ["quoted_closed_form", rep.quoted_closed_form],
                                                      ["discrete_trace", rep.discrete_trace],
                                                      ["tail_bound", rep.tail_bound]])
    b.checks.append(Check.at_most("discrete_vs_eigen_sum",
                                  abs(rep.discrete_trace - rep.eigen_sum) / rep.eigen_sum, 0.02))
    b.summary = {"supported": rep.supported,
                 "closed_form_ratio": rep.quoted_closed_form / rep.eigen_sum,
                 "discrepancy_flag": rep.supported != "quoted_closed_form"}
    return b


RUNNERS = {
    "group-check": run_group_check,
    "decompose": run_decompose,
    "kernel-check": run_kernel_check,
    "abelian-reduce": run_abelian_reduce,
    "torus-spectrum": run_torus_spectrum,
    "torus-green": run_torus_green,
    "torus-trace": run_torus_trace,
}


def run(cfg: RunConfig) -> ResultBundle:
    if cfg.command not in RUNNERS:
        raise ConfigInvalid(f"unknown command {cfg.command!r}")
    bundle = RUNNERS[cfg.command](cfg)
    if cfg.output_path is not None:
        export(bundle, cfg.output_path, cfg.fmt)
    return bundle


# -----------------------------------------------------------------------------
# argument handling
# -----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ncbloch", description=__doc__.strip().splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON file with a parameter block")
    p.add_argument("--model", help="builtin:<name> or a JSON model file")
    p.add_argument("--group", help="built-in group name (Z1..Z12, D4, S3)")
    p.add_argument("--N", type=int, help="flux quantum number")
    p.add_argument("--mu", type=float)
    p.add_argument("--nu", type=float)
    p.add_argument("--z-re", type=float, dest="z_re")
    p.add_argument("--z-im", type=float, dest="z_im")
    p.add_argument("--L", type=int, help="grid points per period; cycle length for abelian-reduce")
    p.add_argument("--K", type=int, help="truncation of lattice sums")
    p.add_argument("--t", type=float, help="time")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    return p


def config_from_args(args: argparse.Namespace) -> RunConfig:
    params = dict(DEFAULTS)
    if args.command == "abelian-reduce":
        params["truncation_k"] = 40
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigInvalid("config must be a JSON object")
        unknown = set(loaded) - set(DEFAULTS) - {"points", "cycle_length"}
        if unknown:
            raise ConfigInvalid(f"unknown config keys: {sorted(unknown)}")
        params.update(loaded)
    for flag, key in FLAG_KEYS.items():
        val = getattr(args, flag)
        if val is not None:
            params[key] = val
    if args.command == "abelian-reduce":
        params["cycle_length"] = params.get("cycle_length", 8) if args.L is None else args.L
    z = list(params["z"])
    if args.z_re is not None:
        z[0] = args.z_re
    if args.z_im is not None:
        z[1] = args.z_im
    params["z"] = [float(z[0]), float(z[1])]
    _validate(args.command, params)
    return RunConfig(args.command, params, Path(args.out) if args.out else None, args.format,
                     int(params["seed"]))


def _validate(command: str, params: dict) -> None:
    if command.startswith("torus"):
        if int(params["N"]) == 0:
            raise ConfigInvalid("N must be nonzero")
        if int(params["grid_l"]) < 16:
            raise ConfigInvalid("L must be at least 16")
        if command == "torus-green" and params["z"][0] >= 0:
            raise ConfigInvalid("torus-green needs Re z < 0")
    if command == "abelian-reduce":
        if params["z"][0] >= 0:
            raise ConfigInvalid("abelian-reduce needs Re z < 0")
        if int(params["truncation_k"]) < 1 or int(params["cycle_length"]) < 3:
            raise ConfigInvalid("need K >= 1 and cycle length >= 3")
    if command == "torus-trace" and float(params["t"]) <= 0:
        raise ConfigInvalid("t must be positive")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        bundle = run(cfg)
    except (ConfigInvalid, ModelLoadError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except BlochError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for c in bundle.checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status} {c.name}: measured {c.measured:.3e} (tolerance {c.tolerance:.3e})")
    if cfg.output_path is None:
        sys.stdout.write(dumps(bundle.to_document()))
    if not bundle.passed:
        print("failing checks: " + ", ".join(c.name for c in bundle.failing()), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
