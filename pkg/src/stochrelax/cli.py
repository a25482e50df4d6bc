"""Command-line benchmark harness and demo subcommands.

``stochrelax run <config.ini>`` executes replicated optimization runs from a
declarative INI config and writes one CSV and one JSONL trace per replicate
plus a ``summary.csv``.  The demo subcommands print verification tables for
the closed-form machinery (``mgf``, ``binomial-demo``, ``orlicz-demo``) and
exit nonzero when an internal identity check fails.

Exit codes: 0 all replicates / checks passed, 1 run error or failed check,
2 malformed configuration or arguments.
"""

from __future__ import annotations

import argparse
import configparser
import io
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

from . import binomial as bn
from . import orlicz
from .expfam import MonomialBasis, basis_from_text
from .optim import EDAConfig, SNGDConfig, child_seed, eda_run, exact_descent_run, sngd_run
from .problems import PROBLEM_NAMES, registry_build
from .walsh import from_text, mgf_uniform, synthesize

ALGORITHMS = ("sngd", "eda", "exact")


class ConfigError(ValueError):
    """Malformed run configuration; the message names the offending field."""


@dataclass
class RunConfig:
    """Typed view of a declarative run configuration."""

    problem: str
    problem_params: dict = field(default_factory=dict)
    algorithm: str = "sngd"
    algorithm_params: dict = field(default_factory=dict)
    replicates: int = 1
    seed: int = 0
    output: str = "runs"

    @classmethod
    def from_ini_text(cls, text: str) -> "RunConfig":
        parser = configparser.ConfigParser()
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config: {exc}") from exc
        for section in ("problem", "algorithm", "run"):
            if not parser.has_section(section):
                raise ConfigError(f"missing section [{section}]")

        def get(section, key, cast, required=False, default=None):
            if not parser.has_option(section, key):
                if required:
                    raise ConfigError(f"[{section}] {key}: required field is missing")
                return default
            raw = parser.get(section, key)
            try:
                return cast(raw)
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key}: invalid value {raw!r}") from exc

        name = get("problem", "name", str, required=True)
        if name not in PROBLEM_NAMES:
            raise ConfigError(f"[problem] name: unknown problem {name!r}")
        problem_params = {"n": get("problem", "n", int, required=True)}
        for key, cast in (("seed", int), ("k", int), ("terms", int), ("max_degree", int)):
            value = get("problem", key, cast)
            if value is not None:
                problem_params[key] = value

        algorithm = get("algorithm", "kind", str, required=True)
        if algorithm not in ALGORITHMS:
            raise ConfigError(f"[algorithm] kind: unknown algorithm {algorithm!r}")
        algo_params: dict = {}

        def algo(key, cast, required=False):
            value = get("algorithm", key, cast, required=required)
            if value is not None:
                algo_params[key] = value

        if algorithm in ("sngd", "eda"):
            algo("n_samples", int, required=True)
            algo("selected", int, required=algorithm == "eda")
        if algorithm in ("sngd", "exact"):
            algo("learning_rate", float, required=True)
        if algorithm == "sngd":
            ridge = get("algorithm", "ridge", str)
            if ridge is not None:
                algo_params["ridge"] = None if ridge == "auto" else _cast_float("algorithm", "ridge", ridge)
        if algorithm == "eda":
            algo("estimator", str)
        for key, cast in (("max_iters", int), ("direction", str),
                          ("burn_in", int), ("thinning", int), ("basis", str)):
            algo(key, cast)

        replicates = get("run", "replicates", int, default=1)
        if replicates < 1:
            raise ConfigError("[run] replicates: must be >= 1")
        seed = get("run", "seed", int, default=0)
        if seed < 0:
            raise ConfigError("[run] seed: must be >= 0")
        output = get("run", "output", str, default="runs")
        return cls(problem=name, problem_params=problem_params, algorithm=algorithm,
                   algorithm_params=algo_params, replicates=replicates, seed=seed,
                   output=output)

    def to_ini_text(self) -> str:
        parser = configparser.ConfigParser()
        parser["problem"] = {"name": self.problem}
        for key, value in self.problem_params.items():
            parser["problem"][key] = _format_value(value)
        parser["algorithm"] = {"kind": self.algorithm}
        for key, value in self.algorithm_params.items():
            parser["algorithm"][key] = "auto" if value is None else _format_value(value)
        parser["run"] = {"replicates": str(self.replicates), "seed": str(self.seed),
                         "output": self.output}
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    def flat(self) -> dict:
        """Resolved key/value view embedded in trace headers."""
        out = {"problem.name": self.problem}
        out.update({f"problem.{k}": v for k, v in self.problem_params.items()})
        out["algorithm.kind"] = self.algorithm
        out.update({f"algorithm.{k}": ("auto" if v is None else v)
                    for k, v in self.algorithm_params.items()})
        out.update({"run.replicates": self.replicates, "run.seed": self.seed,
                    "run.output": self.output})
        return out


def _format_value(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def _cast_float(section, key, raw):
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: invalid value {raw!r}") from exc


def _resolve_basis(choice: str | None, n: int) -> MonomialBasis:
    if choice is None or choice == "singletons":
        return MonomialBasis.singletons(n)
    path = Path(choice)
    if not path.exists():
        raise ConfigError(f"[algorithm] basis: no such basis file {choice!r}")
    return basis_from_text(path.read_text(), n)


def _run_one(config: RunConfig, basis: MonomialBasis, instance, replicate_seed: int):
    p = config.algorithm_params
    common = {k: p[k] for k in ("max_iters", "direction", "burn_in", "thinning") if k in p}
    if config.algorithm == "sngd":
        cfg = SNGDConfig(N=p["n_samples"], learning_rate=p["learning_rate"],
                         M=p.get("selected"), ridge=p.get("ridge"),
                         seed=replicate_seed, **common)
        return sngd_run(instance.f, basis, cfg)
    if config.algorithm == "eda":
        cfg = EDAConfig(N=p["n_samples"], M=p["selected"],
                        estimator=p.get("estimator", "closed-form-independence"),
                        seed=replicate_seed, **common)
        return eda_run(instance.f, basis, cfg)
    return exact_descent_run(instance.f, basis, p["learning_rate"],
                             p.get("max_iters", 100),
                             direction=p.get("direction", "maximize"))


def run_command(config: RunConfig, out=None) -> int:
    """Execute all replicates; write per-replicate traces and a summary."""
    out = out if out is not None else sys.stdout
    instance = registry_build(config.problem, **config.problem_params)
    basis = _resolve_basis(config.algorithm_params.get("basis"), instance.f.n)
    out_dir = Path(config.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary_rows = []
    for r in range(config.replicates):
        seed_r = child_seed(config.seed, r)
        start = time.perf_counter()
        trace = _run_one(config, basis, instance, seed_r)
        wall = time.perf_counter() - start
        trace.meta = {**config.flat(), "replicate": r, "replicate_seed": seed_r}
        trace.to_csv(out_dir / f"trace_{r:03d}.csv")
        trace.to_jsonl(out_dir / f"trace_{r:03d}.jsonl")
        final = trace.final
        summary_rows.append((r, seed_r, trace.status, final.iteration,
                             final.best_f, final.e_f_est, wall))
        print(f"replicate {r}: status={trace.status} iters={final.iteration} "
              f"best={final.best_f:.6g} wall={wall:.3f}s", file=out)
    with open(out_dir / "summary.csv", "w") as fh:
        fh.write("replicate,seed,status,iterations,best_f,final_E_f_est,wall_time_s\n")
        for row in summary_rows:
            r, seed_r, status, iters, best, est, wall = row
            fh.write(f"{r},{seed_r},{status},{iters},{best!r},{est!r},{wall:.6f}\n")
    return 0


# ---------------------------------------------------------------------------
# Demo subcommands


def mgf_command(path: str, t: float, out=None) -> int:
    out = out if out is not None else sys.stdout
    f = from_text(Path(path).read_text())
    value = mgf_uniform(f, t)
    print(f"n={f.n} terms={len(f.terms)} t={t!r}", file=out)
    print(f"mgf closed form    : {value!r}", file=out)
    if f.n <= 16:
        brute = float(np.mean(np.exp(t * synthesize(f))))
        rel = abs(value - brute) / max(abs(brute), 1.0)
        print(f"mgf brute force    : {brute!r}", file=out)
        print(f"relative residual  : {rel:.3e}", file=out)
        if rel > 1e-9:
            print("FAIL: closed form disagrees with enumeration", file=out)
            return 1
    return 0


def binomial_demo(n: int, out=None) -> int:
    out = out if out is not None else sys.stdout
    model = bn.BinomialModel(n)
    etas = np.linspace(0.05 * n, 0.95 * n, 13)
    ok = True
    print(f"binomial family, n={n}", file=out)
    print("eta      max|log std-exp|  max|log std-bregman|  conjugate residual", file=out)
    for eta in etas:
        theta = bn.theta_from_eta(model, eta)
        d_exp = max(abs(bn.log_density_std(model, x, eta) - bn.log_density_exp(model, x, theta))
                    for x in range(n + 1))
        d_breg = max(abs(bn.log_density_std(model, x, eta) - bn.log_density_bregman(model, x, eta))
                     for x in range(n + 1))
        res = minimize_scalar(lambda th: bn.psi(model, th) - th * eta,
                              bracket=(-40.0, 40.0), method="golden",
                              options={"xtol": 1e-12})
        d_conj = abs(bn.psi_star(model, eta) - (-res.fun))
        flag = d_exp <= 1e-12 and d_breg <= 1e-12 and d_conj <= 1e-8
        ok &= flag
        print(f"{eta:7.3f}  {d_exp:16.3e}  {d_breg:20.3e}  {d_conj:18.3e}"
              f"{'' if flag else '  FAIL'}", file=out)
    for x in (0, n):
        scan = bn.boundary_limit_check(model, x)
        good = scan.lower_limit_zero if x == 0 else scan.upper_limit_zero
        ok &= good
        print(f"boundary x={x}: matching endpoint -> 0 {'ok' if good else 'FAIL'}", file=out)
    if n >= 2:
        scan = bn.boundary_limit_check(model, 1)
        ok &= scan.lower_diverges and scan.upper_diverges
        print(f"boundary x=1: diverges to -inf at both ends "
              f"{'ok' if scan.lower_diverges and scan.upper_diverges else 'FAIL'}", file=out)
    print("all identities ok" if ok else "FAILURES detected", file=out)
    return 0 if ok else 1


def orlicz_demo(a: float, out=None) -> int:
    out = out if out is not None else sys.stdout
    if a <= 0:
        raise ConfigError("--a must be positive")
    ok = True
    print(f"gamma-tail family, a={a!r}: alpha vs E[Phi(alpha u)]", file=out)
    for alpha in (0.0, 0.25, 0.5, 0.75, 0.9, 1.0, 1.1, 1.5):
        value = orlicz.gamma_tail_phi_expectation(alpha, a)
        line = f"  alpha={alpha:5.2f}  {value!r}"
        even_gap = abs(value - orlicz.gamma_tail_phi_expectation(-alpha, a)) \
            if np.isfinite(value) else 0.0
        ok &= even_gap <= 1e-12
        if alpha > 1.0:
            ok &= np.isinf(value)
        print(line, file=out)
    ok &= orlicz.gamma_tail_phi_expectation(0.0, a) == 0.0
    for alpha in (0.5, 1.0):
        # e^{-x}(cosh(ax)-1) written in overflow-safe exponential form
        def integrand(x, al=alpha):
            return (a + x) ** -1.5 * (0.5 * (np.exp(-(1.0 - al) * x)
                                             + np.exp(-(1.0 + al) * x)) - np.exp(-x))
        numer, _ = quad(integrand, 0.0, np.inf, epsabs=1e-12, epsrel=1e-12, limit=400)
        reference = numer / orlicz.gamma_tail_C(1.0, a)
        closed = orlicz.gamma_tail_phi_expectation(alpha, a)
        gap = abs(closed - reference) / max(abs(reference), 1.0)
        ok &= gap <= 1e-6
        print(f"  quadrature check alpha={alpha}: residual {gap:.3e}"
              f"{'' if gap <= 1e-6 else '  FAIL'}", file=out)
    print("all checks ok" if ok else "FAILURES detected", file=out)
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="stochrelax",
                                     description="Stochastic relaxation optimization harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a run config")
    p_run.add_argument("config", help="path to INI run configuration")

    p_mgf = sub.add_parser("mgf", help="closed-form MGF of a function file")
    p_mgf.add_argument("file", help="pseudo-Boolean function in text format")
    p_mgf.add_argument("--t", type=float, required=True)

    p_bin = sub.add_parser("binomial-demo", help="binomial-family identity table")
    p_bin.add_argument("--n", type=int, default=10)

    p_orl = sub.add_parser("orlicz-demo", help="non-steepness table of the gamma-tail family")
    p_orl.add_argument("--a", type=float, default=1.0)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            config = RunConfig.from_ini_text(Path(args.config).read_text())
            return run_command(config)
        if args.command == "mgf":
            return mgf_command(args.file, args.t)
        if args.command == "binomial-demo":
            if args.n < 1:
                raise ConfigError("--n must be >= 1")
            return binomial_demo(args.n)
        return orlicz_demo(args.a)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
