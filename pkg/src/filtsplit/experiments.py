"""Experiment drivers and the command-line interface.

Subcommands: ``cfl-table``, ``drift``, ``order``, ``mode-split`` and
``bracket-check``.  Run configurations are JSON objects; unknown keys are
rejected.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .filters import FilterSpec
from .integrators import BlowUpError, SchemeConfig, mode_split_energies, step, trajectory
from .models import ModelSpec, expand_nonlinearity, frequencies, full_energy
from .modified import (
    NonResonanceError,
    build_Zn,
    cfl_number,
    eval_Hh,
    modified_flow,
)
from .polyham import (
    conjugate_key,
    distance,
    evaluate,
    ham_norm,
    poisson_bracket,
    random_real_poly,
    ad_diag,
    quadratic_diag,
    admissible,
)
from .state import ModeSet, SpectralState, l1s_norm, make_real_state

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_NONRES = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


# -- configuration ------------------------------------------------------------------------

_KEYS = {
    "model", "filter", "h", "variant", "nsteps", "record_stride", "s_list",
    "initial_data", "seed", "output", "hh_order", "alpha", "N_list", "h_list",
    "flow_tol", "window",
}


@dataclass
class RunConfig:
    model: ModelSpec
    filter: FilterSpec
    h: float = 0.01
    variant: str = "lie_PA"
    nsteps: int = 1000
    record_stride: int = 100
    s_list: tuple = (0.0, 1.0)
    initial_data: dict = field(default_factory=lambda: {"family": "decay", "p": 2.0, "A": 0.2})
    seed: int = 0
    output: str | None = None
    hh_order: int = 0
    alpha: float = 1.0
    N_list: tuple = (1, 2)
    h_list: tuple = tuple(2.0 ** -k for k in range(5, 11))
    flow_tol: float = 1e-13
    window: int | None = None

    @property
    def scheme(self) -> SchemeConfig:
        return SchemeConfig(self.model, self.filter, self.h, self.variant, self.seed)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        unknown = set(d) - _KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            kw = dict(d)
            kw["model"] = ModelSpec.from_dict(d["model"])
            kw["filter"] = FilterSpec.from_dict(d["filter"])
            for k in ("s_list", "N_list", "h_list"):
                if k in kw:
                    kw[k] = tuple(kw[k])
            cfg = cls(**kw)
            _check_family(cfg.initial_data)
            cfg.scheme  # validates h and variant
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"invalid config: {e}") from e
        return cfg

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        return cls.from_dict(data)


_FAMILIES = {"decay": {"p", "A"}, "single_mode": {"a", "A"}}


def _check_family(spec: dict):
    fam = spec.get("family")
    if fam not in _FAMILIES:
        raise ConfigError(f"unknown initial-data family {fam!r}")
    extra = set(spec) - _FAMILIES[fam] - {"family"}
    if extra:
        raise ConfigError(f"unknown keys for family {fam}: {sorted(extra)}")


def initial_state(modes: ModeSet, spec: dict, seed: int) -> SpectralState:
    """Artifact-defined initial data.

    ``decay``: ``|xi_a| = A (1 + |a|)^{-p}`` with phases drawn from a seeded
    generator; ``single_mode``: ``xi_a = A`` on one mode.
    """
    _check_family(spec)
    if spec["family"] == "decay":
        rng = np.random.default_rng(seed)
        size = np.sqrt(np.array([sum(v * v for v in a) for a in modes.points], dtype=float))
        phases = np.exp(2j * np.pi * rng.random(len(modes)))
        return make_real_state(modes, spec["A"] * (1.0 + size) ** (-spec["p"]) * phases)
    return make_real_state(modes, {tuple(np.atleast_1d(spec["a"]).tolist()): spec["A"]})


# -- CFL table -----------------------------------------------------------------------------


def cmd_cfl_table(r0: int = 4, N_range: Iterable[int] = range(2, 11),
                  columns: Sequence[str] = ("identity", "midpoint", "midpoint_symmetric")) -> list[dict]:
    """CFL numbers needed for a local error of order ``h^N``.

    ``N = (r - 2)/(r0 - 2) + 1``, so ``r = (N - 1)(r0 - 2) + 2``.
    """
    if r0 < 3:
        raise ValueError("r0 must be at least 3")
    rows = []
    for N in N_range:
        r = (N - 1) * (r0 - 2) + 2
        row = {"N": N, "r": r}
        for col in columns:
            if col == "midpoint_symmetric":
                row[col] = cfl_number("midpoint", r, symmetric=True)
            else:
                row[col] = cfl_number(col, r)
        rows.append(row)
    return rows


def format_cfl_table(rows: list[dict]) -> str:
    cols = [k for k in rows[0] if k not in ("N", "r")]
    out = ["h^N  r   " + "  ".join(f"{c:>18}" for c in cols)]
    for row in rows:
        vals = "  ".join(f"{'inf' if math.isinf(row[c]) else f'{row[c]:.2f}':>18}" for c in cols)
        out.append(f"h^{row['N']:<2} {row['r']:<3} {vals}")
    return "\n".join(out)


# -- trajectories --------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{x:.17g}"


class DriftRecorder:
    """Computes one DriftRecord per observation."""

    def __init__(self, cfg: RunConfig, threshold: float | None = None):
        self.cfg = cfg
        scheme = cfg.scheme
        self.scheme = scheme
        self.model = cfg.model
        P = expand_nonlinearity(cfg.model)
        self.H1 = build_Zn(P, scheme.lam, 1)
        self.Hh = build_Zn(P, scheme.lam, cfg.hh_order) if cfg.hh_order > 1 else None
        m = frequencies(cfg.model).m
        self.m = m
        self.threshold = cfg.alpha * cfg.h ** (-1.0 / (2.0 * m)) if threshold is None else threshold
        self.columns = (
            ["step", "time", "H", "H1", "Hh"]
            + [f"l1s_{_slabel(s)}" for s in cfg.s_list]
            + ["low_energy", "high_energy"]
        )

    def record(self, obs: dict) -> list[float]:
        z = obs["state"]
        low, high = mode_split_energies(z, self.threshold, self.m)
        return (
            [obs["step"], obs["time"], full_energy(self.model, z), eval_Hh(self.H1, z),
             eval_Hh(self.Hh, z) if self.Hh is not None else math.nan]
            + [l1s_norm(z, s) for s in self.cfg.s_list]
            + [low, high]
        )


def _slabel(s: float) -> str:
    return str(int(s)) if float(s).is_integer() else str(s)


@dataclass
class RunResult:
    columns: list
    rows: list
    summary: dict
    blowup_step: int | None = None


def run_trajectory(cfg: RunConfig, out=None) -> RunResult:
    """Run ``cfg`` and return all records; rows are streamed to ``out`` (a text file) if given."""
    rec = DriftRecorder(cfg)
    z0 = initial_state(frequencies(cfg.model), cfg.initial_data, cfg.seed)
    writer = csv.writer(out) if out is not None else None
    if writer:
        writer.writerow(rec.columns)
    rows = []
    blow = None
    try:
        for obs in trajectory(cfg.scheme, z0, cfg.nsteps, record_stride=cfg.record_stride):
            row = rec.record(obs)
            rows.append(row)
            if writer:
                writer.writerow([str(int(row[0]))] + [_fmt(v) for v in row[1:]])
    except BlowUpError as e:
        blow = e.step
    if out is not None:
        out.flush()
    return RunResult(rec.columns, rows, summarize(rec.columns, rows, cfg), blow)


def summarize(columns: list, rows: list, cfg: RunConfig) -> dict:
    """Summary statistics, recomputable from the CSV rows alone."""
    arr = np.array(rows, dtype=float)
    col = {c: arr[:, i] for i, c in enumerate(columns)}
    out = {
        "max_H1_drift": float(np.max(np.abs(col["H1"] - col["H1"][0]))),
        "max_H_drift": float(np.max(np.abs(col["H"] - col["H"][0]))),
        "final_step": int(col["step"][-1]),
    }
    if not np.all(np.isnan(col["Hh"])):
        out["max_Hh_drift"] = float(np.max(np.abs(col["Hh"] - col["Hh"][0])))
    split = col["low_energy"] + cfg.h ** -0.5 * col["high_energy"]
    out["mode_split_initial"] = float(split[0])
    out["mode_split_max"] = float(np.max(split))
    if cfg.window:
        early = col["step"] <= cfg.window
        out["window_H1_drift"] = float(np.max(np.abs(col["H1"][early] - col["H1"][0])))
        out["window_H_drift"] = float(np.max(np.abs(col["H"][early] - col["H"][0])))
        out["window_mode_split_max"] = float(np.max(split[early]))
    return out


def summary_from_csv(path: str, cfg: RunConfig) -> dict:
    with open(path) as fh:
        reader = csv.reader(fh)
        columns = next(reader)
        rows = [[float(v) for v in r] for r in reader]
    return summarize(columns, rows, cfg)


# -- order test ----------------------------------------------------------------------------


def cmd_order_test(cfg: RunConfig) -> dict:
    """Local error of the Lie step against the flow of ``H_h`` built to order ``N``.

    Returns ``{N: {"h": [...], "error": [...], "slope": s}}``.
    """
    if cfg.model.K > 8:
        raise ConfigError("order test is limited to K <= 8")
    if any(N > 3 for N in cfg.N_list):
        raise ConfigError("order test is limited to N <= 3")
    modes = frequencies(cfg.model)
    P = expand_nonlinearity(cfg.model)
    z = initial_state(modes, cfg.initial_data, cfg.seed)
    out = {}
    for N in cfg.N_list:
        errs = []
        for h in cfg.h_list:
            scheme = SchemeConfig(cfg.model, cfg.filter, h, "lie_PA")
            M = build_Zn(P, scheme.lam, N)
            e = l1s_norm(step(scheme, z) - modified_flow(M, z, h, tol=cfg.flow_tol), 0.0)
            errs.append(e)
        slope = float(np.polyfit(np.log(cfg.h_list), np.log(errs), 1)[0])
        out[N] = {"h": list(cfg.h_list), "error": errs, "slope": slope}
    return out


# -- bracket property suite ------------------------------------------------------------------


def _fd_bracket(F, G, z: SpectralState, eps: float = 1e-5) -> complex:
    """``i sum_a (dF/d eta dG/d xi - dF/d xi dG/d eta)`` by central differences of ``evaluate``."""
    n = len(z.modes)

    def grad(P):
        g = np.zeros(2 * n, dtype=complex)
        for p in range(2 * n):
            e = np.zeros(2 * n, dtype=complex)
            e[p] = eps
            g[p] = (evaluate(P, SpectralState(z.modes, z.values + e))
                    - evaluate(P, SpectralState(z.modes, z.values - e))) / (2 * eps)
        return g

    gF, gG = grad(F), grad(G)
    return complex(1j * np.sum(gF[n:] * gG[:n] - gF[:n] * gG[n:]))


def cmd_bracket_check(seed: int = 0, n_pairs: int = 1000, K: int = 2, fd_pairs: int | None = None) -> dict:
    """Property suite for the bracket on random real polynomials (degree <= 4).

    Jacobi is checked with a third random polynomial for every pair; the
    finite-difference comparison runs on the first ``fd_pairs`` pairs (all by
    default).
    """
    if not 1 <= K <= 4:
        raise ValueError("K must lie in [1, 4]")
    fd_pairs = n_pairs if fd_pairs is None else fd_pairs
    rng = np.random.default_rng(seed)
    modes = ModeSet.torus(1, K)
    stats = {
        "pairs": n_pairs, "norm_bound_violations": 0, "max_antisymmetry": 0.0,
        "max_jacobi": 0.0, "momentum_violations": 0, "reality_violations": 0,
        "symmetric_violations": 0, "max_fd_error": 0.0, "max_bound_ratio": 0.0,
    }
    for i in range(n_pairs):
        sym = i % 4 == 0
        degs_F = [int(rng.integers(2, 5))]
        degs_G = [int(rng.integers(2, 5))]
        if sym:
            degs_F, degs_G = [2 * int(rng.integers(1, 3))], [2 * int(rng.integers(1, 3))]
        F = random_real_poly(rng, modes, degs_F, n_terms=4, symmetric=sym)
        G = random_real_poly(rng, modes, degs_G, n_terms=4, symmetric=sym)
        B = poisson_bracket(F, G)
        bound = 2 * F.degree * G.degree * ham_norm(F) * ham_norm(G)
        if bound > 0:
            stats["max_bound_ratio"] = max(stats["max_bound_ratio"], ham_norm(B) / bound)
        if ham_norm(B) > bound * (1 + 1e-12):
            stats["norm_bound_violations"] += 1
        stats["max_antisymmetry"] = max(stats["max_antisymmetry"], distance(B, -poisson_bracket(G, F)))
        if not all(admissible(k, "torus") for k in B):
            stats["momentum_violations"] += 1
        if not B.is_real(1e-12):
            stats["reality_violations"] += 1
        if sym and not B.is_symmetric():
            stats["symmetric_violations"] += 1
        H = random_real_poly(rng, modes, [int(rng.integers(2, 5))], n_terms=3)
        jac = (poisson_bracket(F, poisson_bracket(G, H))
               + poisson_bracket(G, poisson_bracket(H, F))
               + poisson_bracket(H, poisson_bracket(F, G)))
        stats["max_jacobi"] = max(stats["max_jacobi"], distance(jac, F.scale(0.0)))
        if i < fd_pairs:
            zv = 0.5 * (rng.normal(size=2 * len(modes)) + 1j * rng.normal(size=2 * len(modes)))
            z = SpectralState(modes, zv)
            ref = _fd_bracket(F, G, z)
            scale = max(1.0, abs(ref))
            stats["max_fd_error"] = max(stats["max_fd_error"], abs(evaluate(B, z) - ref) / scale)
    stats["ok"] = (
        stats["norm_bound_violations"] == 0 and stats["max_antisymmetry"] <= 1e-12
        and stats["max_jacobi"] <= 1e-12 and stats["momentum_violations"] == 0
        and stats["reality_violations"] == 0 and stats["symmetric_violations"] == 0
        and stats["max_fd_error"] <= 1e-6
    )
    return stats


# -- CLI -----------------------------------------------------------------------------------------


def _open_out(path):
    return open(path, "w", newline="") if path else sys.stdout


def _run_csv(cfg: RunConfig, out_path: str | None) -> int:
    fh = _open_out(out_path)
    try:
        res = run_trajectory(cfg, fh)
    finally:
        if fh is not sys.stdout:
            fh.close()
    print(json.dumps({"summary": res.summary}), file=sys.stderr)
    if res.blowup_step is not None:
        print(f"blow-up at step {res.blowup_step}", file=sys.stderr)
        return EXIT_BLOWUP
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="filtsplit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="cmd", required=True)
    p = sub.add_parser("cfl-table", help="CFL numbers per target order")
    p.add_argument("--r0", type=int, default=4)
    p.add_argument("--out")
    for name in ("drift", "order", "mode-split"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
    p = sub.add_parser("bracket-check")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pairs", type=int, default=1000)
    p.add_argument("--out")
    args = parser.parse_args(argv)

    try:
        if args.cmd == "cfl-table":
            text = format_cfl_table(cmd_cfl_table(args.r0))
            if args.out:
                with open(args.out, "w") as fh:
                    fh.write(text + "\n")
            print(text)
            return EXIT_OK
        if args.cmd == "bracket-check":
            stats = cmd_bracket_check(args.seed, args.pairs)
            text = json.dumps(stats, indent=2)
            if args.out:
                with open(args.out, "w") as fh:
                    fh.write(text + "\n")
            print(text)
            return EXIT_OK if stats["ok"] else 1
        cfg = RunConfig.load(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        out_path = args.out or cfg.output
        if args.cmd == "drift":
            return _run_csv(cfg, out_path)
        if args.cmd == "mode-split":
            if cfg.filter.kind != "new_I" or abs(cfg.filter.beta - 0.5) > 1e-15:
                raise ConfigError("mode-split requires the new_I filter with beta = 1/2")
            return _run_csv(cfg, out_path)
        res = cmd_order_test(cfg)
        lines = ["N,h,error"]
        for N, r in res.items():
            lines += [f"{N},{_fmt(h)},{_fmt(e)}" for h, e in zip(r["h"], r["error"])]
        text = "\n".join(lines)
        if out_path:
            with open(out_path, "w") as fh:
                fh.write(text + "\n")
        else:
            print(text)
        print(json.dumps({f"slope_N{N}": r["slope"] for N, r in res.items()}), file=sys.stderr)
        return EXIT_OK
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NonResonanceError as e:
        print(f"non-resonance refusal: {e}", file=sys.stderr)
        return EXIT_NONRES


if __name__ == "__main__":
    sys.exit(main())
