"""Command-line interface: ``crb-sbl bounds|estimate|experiment|verify``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bounds as bnd
from . import estimators as est
from . import harness, model

SMV_BOUND_KINDS = (
    "hcrb-smv",
    "bcrb-smv",
    "mcrb-gamma",
    "mcrb-x-student-t",
    "mcrb-x-gcp",
    "hcrb-unknown-noise",
    "bcrb-unknown-noise",
    "mcrb-gamma-xi",
)
MMV_BOUND_KINDS = tuple(f"mmv-{k}" for k in bnd.MMV_KINDS)


def _load_instance(path: str) -> model.SblInstance:
    return model.instance_from_json(Path(path).read_text())


def _write_json(payload: dict, path: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_bounds(args: argparse.Namespace) -> int:
    inst = _load_instance(args.instance)
    phi, gamma, xi = inst.phi, inst.gamma_true, inst.xi_true
    kind = args.kind
    needs_gamma = kind in (
        "hcrb-smv", "mcrb-gamma", "mcrb-gamma-xi",
        "mmv-hcrb-gamma", "mmv-mcrb-gamma", "mmv-hcrb-w", "mmv-mcrb-gamma-xi",
    )
    if needs_gamma and gamma is None:
        raise SystemExit(f"{kind} needs a variance realization; this instance has none")
    if kind == "hcrb-smv":
        report = bnd.hcrb_smv(phi, xi, gamma)
    elif kind == "bcrb-smv":
        report = bnd.bcrb_smv(phi, xi, args.nu, args.lam)
    elif kind == "mcrb-gamma":
        report = bnd.mcrb_gamma(phi, xi, gamma)
    elif kind == "mcrb-x-student-t":
        report = bnd.mcrb_x_student_t(phi, xi, args.nu, args.lam)
    elif kind == "mcrb-x-gcp":
        report = bnd.mcrb_x_gcp(phi, xi, model.GcpPrior(tau=args.tau, nu=args.nu, lam=args.lam))
    elif kind == "hcrb-unknown-noise":
        report = bnd.hcrb_unknown_noise(
            phi, xi, args.gamma_mode, nu=args.nu, lam=args.lam, gamma=gamma
        )
    elif kind == "bcrb-unknown-noise":
        report = bnd.bcrb_unknown_noise(
            phi, args.gamma_mode, nu=args.nu, lam=args.lam, c=args.c, d=args.d, gamma=gamma
        )
    elif kind == "mcrb-gamma-xi":
        report = bnd.mcrb_gamma_xi(phi, xi, gamma)
    elif kind.startswith("mmv-"):
        report = bnd.mmv_bounds(
            kind[4:],
            args.m,
            phi=phi,
            xi=xi,
            gamma=gamma,
            nu=args.nu,
            lam=args.lam,
            c=args.c,
            d=args.d,
        )
    else:  # pragma: no cover - argparse choices guard this
        raise ValueError(kind)
    _write_json(report.to_json_dict(), args.out)
    print(f"{kind}: bound trace = {report.bound_trace():.6e}", file=sys.stderr)
    return 0


def _cmd_estimate(args: argparse.Namespace) -> int:
    inst = _load_instance(args.instance)
    y = inst.observations if inst.n_vectors > 1 else inst.observations[:, 0]
    if args.method == "em":
        hyper = (args.nu, args.lam) if args.nu is not None and args.lam is not None else None
        noise_prior = (args.c, args.d) if args.c is not None and args.d is not None else None
        result = est.em_sbl(
            y,
            inst.phi,
            inst.xi_true,
            max_iter=args.max_iter,
            tol=args.tol,
            estimate_noise=args.estimate_noise,
            hyperprior=hyper,
            noise_prior=noise_prior,
        )
    elif args.method == "ard":
        result = est.ard_sbl(y, inst.phi, inst.xi_true, max_iter=args.max_iter, tol=args.tol)
    else:
        x_hat = est.mmse_oracle(y, inst.phi, inst.gamma_true, inst.xi_true)
        result = est.EstimateResult(
            x_hat=x_hat,
            gamma_hat=inst.gamma_true,
            xi_hat=None,
            iterations=0,
            converged=True,
            objective_trace=np.array([]),
        )
    _write_json(result.to_json_dict(), args.out)
    print(
        f"{args.method}: iterations={result.iterations} converged={result.converged}",
        file=sys.stderr,
    )
    return 0


def _cmd_experiment(args: argparse.Namespace) -> int:
    if args.config and args.full_scale:
        raise SystemExit("--full-scale replaces --config; pass one or the other")
    if args.config:
        config = harness.ExperimentConfig.from_json(Path(args.config).read_text())
    elif args.full_scale:
        config = harness.full_scale_config()
        print(
            "warning: full-scale grid (dim 1024, 200 trials per point); "
            "expect hours of compute",
            file=sys.stderr,
        )
    else:
        config = harness.desk_scale_config()
    if args.seed is not None:
        config.master_seed = args.seed
    if args.output_dir is not None:
        config.output_dir = args.output_dir
    table = harness.run_experiment(config, threads=args.threads)
    paths = harness.emit_outputs(table, config)
    print(f"wrote {paths['csv']} and {len(paths['figures'])} figure(s)", file=sys.stderr)
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    status, payload = harness.verify_suite(level=args.level, seed=args.seed, output_path=args.out)
    for report in payload["reports"]:
        flag = "pass" if report["pass"] else "FAIL"
        print(f"[{flag}] {report['target']}: rel_error={report['rel_error']:.3e}")
    print(f"verification {'passed' if status == 0 else 'FAILED'} ({args.level})")
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crb-sbl",
        description="Cramer-Rao type bounds and estimators for sparse Bayesian learning.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="compute a bound report for an instance file")
    p.add_argument("--instance", required=True, help="instance JSON path")
    p.add_argument("--kind", required=True, choices=SMV_BOUND_KINDS + MMV_BOUND_KINDS)
    p.add_argument("--nu", type=float, default=None)
    p.add_argument("--lam", type=float, default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--d", type=float, default=None)
    p.add_argument("--m", type=int, default=1, help="number of measurement vectors")
    p.add_argument("--gamma-mode", choices=(bnd.DETERMINISTIC, bnd.RANDOM), default=bnd.DETERMINISTIC)
    p.add_argument("--out", default=None, help="output JSON path (default: stdout)")
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("estimate", help="run an estimator on an instance file")
    p.add_argument("--instance", required=True)
    p.add_argument("--method", required=True, choices=("em", "ard", "mmse-oracle"))
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--estimate-noise", action="store_true")
    p.add_argument("--nu", type=float, default=None, help="variance hyperprior nu (EM MAP update)")
    p.add_argument("--lam", type=float, default=None, help="variance hyperprior lam (EM MAP update)")
    p.add_argument("--c", type=float, default=None, help="noise prior shape (EM MAP update)")
    p.add_argument("--d", type=float, default=None, help="noise prior rate (EM MAP update)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("experiment", help="run a configured experiment grid")
    p.add_argument(
        "--config", default=None,
        help="experiment config JSON path (default: the built-in desk-scale grid)",
    )
    p.add_argument(
        "--full-scale", action="store_true",
        help="use the publication-scale grid (dim 1024); hours of compute",
    )
    p.add_argument("--output-dir", default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--seed", type=int, default=None, help="override master_seed")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("verify", help="run the oracle verification suite")
    p.add_argument("--level", choices=("quick", "full"), default="quick")
    p.add_argument("--seed", type=int, default=20240501)
    p.add_argument("--out", default=None, help="JSON report path")
    p.set_defaults(func=_cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
