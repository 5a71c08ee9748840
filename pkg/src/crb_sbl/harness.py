"""Experiment orchestration: grids of synthetic problems, estimator MSE, bound overlays.

A :class:`ExperimentConfig` describes a grid over (n_obs, snr_db, nu,
m_vectors).  For every grid point the harness draws one measurement matrix,
synthesizes ``trials`` independent instances with seeds derived from
(master_seed, grid index, trial index), runs the configured estimators, and
accumulates squared errors per target alongside the matching lower-bound
traces.  Bounds that depend only on hyperparameters are computed once per
grid point (offline); bounds that depend on the realized variances are
averaged over the same per-trial draws used for estimation (online).

Outputs are a deterministic CSV table, one SVG per figure, and a JSON
manifest.  Identical configs produce byte-identical files regardless of the
worker count.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from itertools import product
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from . import bounds as bnd
from . import estimators as est
from . import model
from . import oracle
from ._linalg import NumericalFailure, chol_inverse, symmetrize

__all__ = [
    "ExperimentConfig",
    "ResultRow",
    "ResultTable",
    "run_experiment",
    "aggregate_mse",
    "emit_outputs",
    "verify_suite",
    "resolve_threads",
    "desk_scale_config",
    "full_scale_config",
]

GRID_KEYS = ("n_obs", "snr_db", "nu", "m_vectors")
ESTIMATOR_NAMES = ("em", "ard", "mmse-oracle")
BOUND_NAMES = (
    "hcrb-x",
    "bcrb-x",
    "mcrb-x",
    "hcrb-gamma",
    "bcrb-gamma",
    "mcrb-gamma",
    "hcrb-xi",
    "bcrb-xi",
    "mcrb-gamma-xi",
)
ONLINE_BOUNDS = {"hcrb-x", "hcrb-gamma", "mcrb-gamma", "mcrb-gamma-xi"}
THREADS_ENV_VAR = "CRB_SBL_THREADS"


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Grid specification for one experiment run.

    ``prior`` is either ``{"kind": "student-t", "second_moment": m2}`` (lam
    is then chosen per nu so the marginal E[x_i^2] equals m2) or
    ``{"kind": "gcp", "tau": t, "lam": l}`` (nu still sweeps the grid axis).
    ``noise_mode`` follows :mod:`crb_sbl.model`; ``noise_prior`` supplies
    (c, d) for the random-variance mode and the Bayesian noise bound.
    ``estimator_options`` (``max_iter``, ``tol``) is forwarded to the
    iterative estimators, and ``em_update`` selects the EM variance update:
    ``"flat"`` or ``"map"`` (inverse-gamma MAP, using each grid point's
    hyperprior; the configuration that tracks the marginalized bound).
    """

    dim: int
    n_obs: Sequence[int]
    snr_db: Sequence[float]
    nu: Sequence[float]
    m_vectors: Sequence[int] = (1,)
    trials: int = 100
    prior: dict = field(default_factory=lambda: {"kind": "student-t", "second_moment": 1e-3})
    noise_mode: str = model.KNOWN_VARIANCE
    noise_prior: Optional[dict] = None
    estimators: Sequence[str] = ("em", "mmse-oracle")
    bounds: Sequence[str] = ("hcrb-x", "bcrb-x", "mcrb-x")
    master_seed: int = 0
    output_dir: str = "results"
    estimator_options: dict = field(default_factory=dict)
    em_update: str = "flat"
    threads: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        for name in ("n_obs", "snr_db", "nu", "m_vectors"):
            if len(list(getattr(self, name))) == 0:
                raise ValueError(f"{name} grid axis is empty")
        if self.dim < 1:
            raise ValueError("dim must be positive")
        unknown = set(self.estimators) - set(ESTIMATOR_NAMES)
        if unknown:
            raise ValueError(f"unknown estimators: {sorted(unknown)}")
        unknown = set(self.bounds) - set(BOUND_NAMES)
        if unknown:
            raise ValueError(f"unknown bounds: {sorted(unknown)}")
        if self.noise_mode not in (
            model.KNOWN_VARIANCE,
            model.DETERMINISTIC_UNKNOWN,
            model.RANDOM_IG,
        ):
            raise ValueError(f"unknown noise_mode {self.noise_mode!r}")
        if self.noise_mode == model.RANDOM_IG and not self.noise_prior:
            raise ValueError("random-IG noise requires noise_prior (c, d)")
        if "bcrb-xi" in self.bounds and not self.noise_prior:
            raise ValueError("the Bayesian noise bound requires noise_prior (c, d)")
        if self.prior.get("kind", "student-t") not in ("student-t", "gcp"):
            raise ValueError("prior kind must be 'student-t' or 'gcp'")
        if self.em_update not in ("flat", "map"):
            raise ValueError("em_update must be 'flat' or 'map'")
        if self.em_update == "map" and self.prior["kind"] != "student-t":
            raise ValueError("the MAP variance update needs the inverse-gamma hyperprior")
        if self.prior["kind"] == "gcp":
            if any(m != 1 for m in self.m_vectors):
                raise ValueError("GCP instances support m_vectors = 1 only")
            bad = {"mmse-oracle"} & set(self.estimators)
            if bad:
                raise ValueError("mmse-oracle needs a variance realization (student-t prior)")
            # Without a variance realization or hyperprior, only the
            # marginal-prior and noise bounds are defined.
            allowed = {"mcrb-x", "hcrb-xi", "bcrb-xi"}
            bad_bounds = set(self.bounds) - allowed
            if bad_bounds:
                raise ValueError(
                    f"bounds {sorted(bad_bounds)} need a variance profile; "
                    f"GCP configs support {sorted(allowed)}"
                )
        if "ard" in self.estimators and any(m != 1 for m in self.m_vectors):
            raise ValueError("ard handles single measurement vectors only")
        # Every estimated target must have at least one matching bound row.
        needed = self._estimator_targets()
        covered = {t for b in self.bounds for t in _bound_targets(b)}
        missing = needed - covered
        if missing:
            raise ValueError(f"no bound configured for estimated target(s) {sorted(missing)}")

    def _estimator_targets(self) -> set:
        targets = set()
        if self.estimators:
            targets.add("x")
        if self.prior["kind"] == "student-t" and (
            "em" in self.estimators or "ard" in self.estimators
        ):
            targets.add("gamma")
        if self.noise_mode != model.KNOWN_VARIANCE and "em" in self.estimators:
            targets.add("xi")
        return targets

    def grid_points(self) -> list[dict]:
        return [
            dict(zip(GRID_KEYS, combo))
            for combo in product(self.n_obs, self.snr_db, self.nu, self.m_vectors)
        ]

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=_jsonify)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        payload = json.loads(text)
        return cls(**payload)


def _jsonify(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, tuple):
        return list(value)
    raise TypeError(f"cannot serialize {type(value)}")


def _bound_targets(kind: str) -> tuple:
    if kind.endswith("-x"):
        return ("x",)
    if kind == "mcrb-gamma-xi":
        return ("gamma", "xi")
    if kind.endswith("-gamma"):
        return ("gamma",)
    return ("xi",)


def resolve_threads(config_threads: int, cli_threads: Optional[int] = None) -> int:
    """Worker count: environment variable wins, then CLI flag, then config."""
    env = os.environ.get(THREADS_ENV_VAR)
    if env:
        return max(1, int(env))
    if cli_threads is not None:
        return max(1, cli_threads)
    return max(1, config_threads)


def desk_scale_config(output_dir: str = "results", master_seed: int = 2024) -> ExperimentConfig:
    """Default benchmark grid sized for a workstation (minutes per axis)."""
    return ExperimentConfig(
        dim=256,
        n_obs=[96, 128, 192, 240],
        snr_db=[0.0, 10.0, 20.0, 30.0, 40.0],
        nu=[2.01, 2.05],
        m_vectors=[1, 8],
        trials=200,
        estimators=["em", "mmse-oracle"],
        bounds=["hcrb-x", "bcrb-x", "mcrb-x", "hcrb-gamma", "bcrb-gamma", "mcrb-gamma"],
        master_seed=master_seed,
        output_dir=output_dir,
        estimator_options={"max_iter": 500, "tol": 1e-5},
        em_update="map",
    )


def full_scale_config(output_dir: str = "results", master_seed: int = 2024) -> ExperimentConfig:
    """Publication-scale grid (dim 1024); expect hours of compute."""
    cfg = desk_scale_config(output_dir=output_dir, master_seed=master_seed)
    cfg.dim = 1024
    cfg.n_obs = [750, 1000]
    return cfg


# ---------------------------------------------------------------------------
# Result table
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResultRow:
    grid: dict
    series: str
    target: str
    value: float
    stderr: float
    trials: int


@dataclass
class ResultTable:
    grid_keys: tuple
    rows: list
    invalid_points: list = field(default_factory=list)

    def filter(self, series: Optional[str] = None, target: Optional[str] = None) -> list:
        out = []
        for row in self.rows:
            if series is not None and row.series != series:
                continue
            if target is not None and row.target != target:
                continue
            out.append(row)
        return out

    def lookup(self, grid: dict, series: str, target: str) -> ResultRow:
        for row in self.rows:
            if row.series == series and row.target == target and row.grid == grid:
                return row
        raise KeyError(f"no row for {grid} {series} {target}")


# ---------------------------------------------------------------------------
# Per-grid-point machinery
# ---------------------------------------------------------------------------


def _grid_prior(config: ExperimentConfig, nu: float):
    spec = config.prior
    if spec["kind"] == "student-t":
        return model.StudentTPrior.from_second_moment(nu, spec.get("second_moment", 1e-3))
    return model.GcpPrior(tau=spec["tau"], nu=nu, lam=spec["lam"])


def _prior_second_moment(prior) -> float:
    if isinstance(prior, model.StudentTPrior):
        return prior.second_moment
    # GCP: E[x^2] = (nu/lam)^(2/tau) * B(3/tau, (nu-2)/tau) / B(1/tau, nu/tau)
    from scipy.special import gammaln

    tau, nu, lam = prior.tau, prior.nu, prior.lam
    if nu <= 2:
        raise ValueError("SNR calibration requires nu > 2")
    log_m2 = (2.0 / tau) * np.log(nu / lam) + (
        gammaln(3.0 / tau)
        + gammaln((nu - 2.0) / tau)
        - gammaln(1.0 / tau)
        - gammaln(nu / tau)
    )
    return float(np.exp(log_m2))


def _grid_noise(config: ExperimentConfig, prior, grid: dict):
    if config.noise_mode == model.RANDOM_IG:
        ig = model.IgDistribution(shape=config.noise_prior["c"], rate=config.noise_prior["d"])
        return model.NoiseModel(mode=model.RANDOM_IG, ig=ig), None
    xi = model.snr_to_noise_variance(grid["snr_db"], config.dim, _prior_second_moment(prior))
    return model.NoiseModel(mode=config.noise_mode, xi=xi), xi


def _online_bound_traces(kinds, instance: model.SblInstance, config, lam: Optional[float]):
    """Traces of realization-dependent bounds for one instance, keyed (kind, target)."""
    out = {}
    phi = instance.phi
    gamma = instance.gamma_true
    xi = instance.xi_true
    m = instance.n_vectors
    if "hcrb-x" in kinds:
        info = bnd.linear_model_information(phi, xi, 1.0 / gamma)
        inv, _ = chol_inverse(info)
        out[("hcrb-x", "x")] = m * float(np.trace(inv))
    if "hcrb-gamma" in kinds:
        out[("hcrb-gamma", "gamma")] = float(np.sum(2.0 * gamma**2)) / m
    need_joint = "mcrb-gamma-xi" in kinds
    if "mcrb-gamma" in kinds or need_joint:
        cov = bnd.marginal_covariance(phi, gamma, xi)
        b = cov.solve(cov.phi)
        a = symmetrize(cov.phi.T @ b)
        gamma_fim = 0.5 * m * a**2
        if "mcrb-gamma" in kinds:
            inv, _ = chol_inverse(gamma_fim)
            out[("mcrb-gamma", "gamma")] = float(np.trace(inv))
        if need_joint:
            cross = 0.5 * m * np.sum(b * b, axis=0)
            xi_entry = 0.5 * m * float(np.sum(cov.inverse() ** 2))
            dim = gamma_fim.shape[0]
            joint = np.zeros((dim + 1, dim + 1))
            joint[:dim, :dim] = gamma_fim
            joint[:dim, dim] = cross
            joint[dim, :dim] = cross
            joint[dim, dim] = xi_entry
            inv, _ = chol_inverse(joint)
            out[("mcrb-gamma-xi", "gamma")] = float(np.trace(inv[:dim, :dim]))
            out[("mcrb-gamma-xi", "xi")] = float(inv[dim, dim])
    if config.noise_mode == model.RANDOM_IG and "hcrb-xi" in kinds:
        out[("hcrb-xi", "xi")] = 2.0 * xi**2 / (m * phi.n_obs)
    return out


def _offline_bound_traces(config, phi, grid, lam: Optional[float], t_term: Optional[float], xi):
    """Traces of hyperparameter-only bounds, keyed (kind, target)."""
    out = {}
    m = grid["m_vectors"]
    nu = grid["nu"]
    dim = config.dim
    n = grid["n_obs"]
    kinds = set(config.bounds)
    student = config.prior["kind"] == "student-t"
    if config.noise_mode == model.RANDOM_IG:
        c, d = config.noise_prior["c"], config.noise_prior["d"]
        inv_noise = c / d
    else:
        inv_noise = 1.0 / xi
    gram = symmetrize(phi.entries.T @ phi.entries)

    if "bcrb-x" in kinds and student:
        inv, _ = chol_inverse(gram * inv_noise + lam * np.eye(dim))
        out[("bcrb-x", "x")] = m * float(np.trace(inv))
    if "mcrb-x" in kinds and t_term is not None:
        inv, _ = chol_inverse(gram * inv_noise + t_term * np.eye(dim))
        out[("mcrb-x", "x")] = m * float(np.trace(inv))
    if "bcrb-gamma" in kinds and student:
        fisher = lam**2 * (nu + 2.0) * (m + nu + 6.0) / (2.0 * nu)
        out[("bcrb-gamma", "gamma")] = dim / fisher
    if "hcrb-xi" in kinds and config.noise_mode != model.RANDOM_IG:
        out[("hcrb-xi", "xi")] = 2.0 * xi**2 / (m * n)
    if "bcrb-xi" in kinds:
        if not config.noise_prior:
            raise ValueError("bcrb-xi requires noise_prior (c, d)")
        c, d = config.noise_prior["c"], config.noise_prior["d"]
        out[("bcrb-xi", "xi")] = d**2 / (c * (c + 1.0) * (m * n / 2.0 + c + 3.0))
    return out


def _run_single_trial(config: ExperimentConfig, grid_index: int, trial_index: int) -> dict:
    """Synthesize one instance, run estimators, return squared errors and online traces."""
    grid = config.grid_points()[grid_index]
    prior = _grid_prior(config, grid["nu"])
    noise, _ = _grid_noise(config, prior, grid)
    phi_seed = int(
        np.random.SeedSequence(config.master_seed, spawn_key=(grid_index,)).generate_state(1)[0]
    )
    phi = model.sample_measurement_matrix(grid["n_obs"], config.dim, phi_seed)
    trial_seed = int(
        np.random.SeedSequence(
            config.master_seed, spawn_key=(grid_index, trial_index)
        ).generate_state(1)[0]
    )
    instance = model.synthesize(phi, prior, noise, grid["m_vectors"], trial_seed)

    lam = prior.lam
    estimate_noise = config.noise_mode != model.KNOWN_VARIANCE
    opts = dict(config.estimator_options)
    sq_err: dict = {}
    try:
        y = instance.observations if instance.n_vectors > 1 else instance.observations[:, 0]
        if "em" in config.estimators:
            xi0 = instance.xi_true if not estimate_noise else 0.1 * float(
                np.sum(instance.observations**2)
            ) / instance.observations.size
            hyper = (grid["nu"], lam) if config.em_update == "map" else None
            result = est.em_sbl(
                y,
                phi,
                xi0,
                estimate_noise=estimate_noise,
                hyperprior=hyper,
                **opts,
            )
            x_hat = np.atleast_2d(result.x_hat.T).T
            sq_err[("em", "x")] = float(np.sum((x_hat - instance.x_true) ** 2))
            if instance.gamma_true is not None:
                sq_err[("em", "gamma")] = float(
                    np.sum((result.gamma_hat - instance.gamma_true) ** 2)
                )
            if estimate_noise:
                sq_err[("em", "xi")] = float((result.xi_hat - instance.xi_true) ** 2)
        if "ard" in config.estimators:
            result = est.ard_sbl(y, phi, instance.xi_true, **opts)
            sq_err[("ard", "x")] = float(np.sum((result.x_hat - instance.x_true[:, 0]) ** 2))
            if instance.gamma_true is not None:
                sq_err[("ard", "gamma")] = float(
                    np.sum((result.gamma_hat - instance.gamma_true) ** 2)
                )
        if "mmse-oracle" in config.estimators:
            x_hat = est.mmse_oracle(
                instance.observations, phi, instance.gamma_true, instance.xi_true
            )
            sq_err[("mmse-oracle", "x")] = float(np.sum((x_hat - instance.x_true) ** 2))
        online = (
            _online_bound_traces(set(config.bounds), instance, config, lam)
            if instance.gamma_true is not None
            else {}
        )
    except (NumericalFailure, np.linalg.LinAlgError):
        return {"failed": True}
    return {"failed": False, "sq_err": sq_err, "online": online}


def _trial_worker(payload: tuple) -> tuple:
    config_json, grid_index, trial_index = payload
    config = ExperimentConfig.from_json(config_json)
    return grid_index, trial_index, _run_single_trial(config, grid_index, trial_index)


# ---------------------------------------------------------------------------
# Experiment driver
# ---------------------------------------------------------------------------


def run_experiment(config: ExperimentConfig, threads: Optional[int] = None) -> ResultTable:
    """Execute the configured grid and return the aggregated result table.

    The table is a pure function of the config (master seed included):
    per-trial seeds are derived by hashing (master_seed, grid index, trial
    index), and aggregation iterates trials in index order, so worker count
    and scheduling cannot change the output.  Trials that fail numerically
    are dropped from the averages; a grid point with more than 10% failures
    is marked invalid and emits no rows.
    """
    workers = resolve_threads(config.threads, threads)
    points = config.grid_points()
    config_json = config.to_json()
    payloads = [
        (config_json, gi, ti)
        for gi in range(len(points))
        for ti in range(config.trials)
    ]
    results: dict = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for gi, ti, res in pool.map(_trial_worker, payloads, chunksize=8):
                results[(gi, ti)] = res
    else:
        for payload in payloads:
            gi, ti, res = _trial_worker(payload)
            results[(gi, ti)] = res

    rows: list[ResultRow] = []
    invalid = []
    for gi, grid in enumerate(points):
        trial_results = [results[(gi, ti)] for ti in range(config.trials)]
        ok = [r for r in trial_results if not r["failed"]]
        n_failed = config.trials - len(ok)
        if n_failed > 0.1 * config.trials:
            invalid.append(grid)
            continue

        prior = _grid_prior(config, grid["nu"])
        noise, xi = _grid_noise(config, prior, grid)
        phi_seed = int(
            np.random.SeedSequence(config.master_seed, spawn_key=(gi,)).generate_state(1)[0]
        )
        phi = model.sample_measurement_matrix(grid["n_obs"], config.dim, phi_seed)
        if isinstance(prior, model.StudentTPrior):
            t_term = prior.lam * (prior.nu + 1.0) / (prior.nu + 3.0)
        else:
            t_term = bnd.gcp_fisher_term(prior)

        # Estimator MSE rows (totals and per-component means).
        keys = sorted({k for r in ok for k in r["sq_err"]})
        for series, target in keys:
            values = np.array([r["sq_err"][(series, target)] for r in ok if (series, target) in r["sq_err"]])
            n_comp = {"x": config.dim * grid["m_vectors"], "gamma": config.dim, "xi": 1}[target]
            mse = float(np.mean(values))
            se = float(np.std(values, ddof=1) / np.sqrt(len(values))) if len(values) > 1 else 0.0
            rows.append(ResultRow(grid, series, target, mse, se, len(values)))
            rows.append(
                ResultRow(grid, series, f"{target}_pc", mse / n_comp, se / n_comp, len(values))
            )

        # Online bound rows: averaged over the same trial realizations.
        online_keys = sorted({k for r in ok for k in r["online"]})
        for kind, target in online_keys:
            values = np.array([r["online"][(kind, target)] for r in ok])
            n_comp = {"x": config.dim * grid["m_vectors"], "gamma": config.dim, "xi": 1}[target]
            mean = float(np.mean(values))
            se = float(np.std(values, ddof=1) / np.sqrt(len(values))) if len(values) > 1 else 0.0
            rows.append(ResultRow(grid, f"bound:{kind}", target, mean, se, len(values)))
            rows.append(
                ResultRow(grid, f"bound:{kind}", f"{target}_pc", mean / n_comp, se / n_comp, len(values))
            )

        # Offline bound rows.
        offline = _offline_bound_traces(config, phi, grid, getattr(prior, "lam", None), t_term, xi)
        for (kind, target), value in sorted(offline.items()):
            n_comp = {"x": config.dim * grid["m_vectors"], "gamma": config.dim, "xi": 1}[target]
            rows.append(ResultRow(grid, f"bound:{kind}", target, float(value), 0.0, config.trials))
            rows.append(
                ResultRow(grid, f"bound:{kind}", f"{target}_pc", float(value) / n_comp, 0.0, config.trials)
            )
    return ResultTable(grid_keys=GRID_KEYS, rows=rows, invalid_points=invalid)


# ---------------------------------------------------------------------------
# MSE aggregation (standalone op)
# ---------------------------------------------------------------------------


def aggregate_mse(estimates: Sequence, truths: Sequence) -> dict:
    """Per-target MSE records from paired estimates and ground truths.

    Accepts either :class:`crb_sbl.estimators.EstimateResult` paired with
    :class:`crb_sbl.model.SblInstance`, or plain arrays/scalars (treated as a
    single target named ``"x"``).  Returns a dict mapping targets to records
    with the total squared error (``mse``), per-component mean
    (``per_component``), standard error over trials, and the trial count.
    """
    if len(estimates) != len(truths):
        raise ValueError("estimates and truths must have equal length")
    if len(estimates) == 0:
        raise ValueError("nothing to aggregate")

    per_target: dict = {}

    def push(target, err, n_comp):
        per_target.setdefault(target, {"sq": [], "n_comp": n_comp})["sq"].append(err)

    for e, t in zip(estimates, truths):
        if isinstance(e, est.EstimateResult) and isinstance(t, model.SblInstance):
            x_hat = np.atleast_2d(e.x_hat.T).T
            push("x", float(np.sum((x_hat - t.x_true) ** 2)), t.x_true.size)
            if e.gamma_hat is not None and t.gamma_true is not None:
                push("gamma", float(np.sum((e.gamma_hat - t.gamma_true) ** 2)), t.gamma_true.size)
            if e.xi_hat is not None:
                push("xi", float((e.xi_hat - t.xi_true) ** 2), 1)
        else:
            e_arr = np.asarray(e, dtype=float)
            t_arr = np.asarray(t, dtype=float)
            push("x", float(np.sum((e_arr - t_arr) ** 2)), max(e_arr.size, 1))

    records = {}
    for target, data in per_target.items():
        sq = np.array(data["sq"])
        mse = float(np.mean(sq))
        se = float(np.std(sq, ddof=1) / np.sqrt(sq.size)) if sq.size > 1 else 0.0
        records[target] = {
            "mse": mse,
            "per_component": mse / data["n_comp"],
            "std_error": se,
            "trials": int(sq.size),
        }
    return records


# ---------------------------------------------------------------------------
# File outputs
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def _csv_text(table: ResultTable) -> str:
    header = list(table.grid_keys) + ["series", "target", "value", "stderr", "trials"]
    lines = [",".join(header)]
    ordered = sorted(
        table.rows,
        key=lambda r: (tuple(r.grid[k] for k in table.grid_keys), r.series, r.target),
    )
    for row in ordered:
        cells = [_fmt(row.grid[k]) for k in table.grid_keys]
        cells += [row.series, row.target, _fmt(row.value), _fmt(row.stderr), str(row.trials)]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


_PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd",
    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
)


def _svg_figure(title: str, x_label: str, xs: list, series: dict) -> str:
    """Minimal deterministic SVG: log-scale y, one polyline per series."""
    width, height = 640, 480
    left, right, top, bottom = 70, 20, 40, 50
    plot_w, plot_h = width - left - right, height - top - bottom

    ys_all = [v for pts in series.values() for _, v in pts if v > 0]
    if not ys_all:
        ys_all = [1.0]
    y_lo = np.floor(np.log10(min(ys_all)))
    y_hi = np.ceil(np.log10(max(ys_all)))
    if y_hi <= y_lo:
        y_hi = y_lo + 1
    x_lo, x_hi = min(xs), max(xs)
    if x_hi <= x_lo:
        x_hi = x_lo + 1

    def sx(x):
        return left + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(v):
        return top + (y_hi - np.log10(v)) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" '
        'fill="none" stroke="black"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<text x="{width / 2:.1f}" y="{height - 12}" text-anchor="middle" '
        f'font-size="12">{x_label}</text>',
    ]
    for decade in range(int(y_lo), int(y_hi) + 1):
        y = sy(10.0**decade)
        parts.append(
            f'<line x1="{left}" y1="{y:.2f}" x2="{left + plot_w}" y2="{y:.2f}" '
            'stroke="#dddddd"/>'
        )
        parts.append(
            f'<text x="{left - 6}" y="{y + 4:.2f}" text-anchor="end" font-size="10">'
            f"1e{decade}</text>"
        )
    for x in xs:
        parts.append(
            f'<text x="{sx(x):.2f}" y="{top + plot_h + 16}" text-anchor="middle" '
            f'font-size="10">{_fmt(x)}</text>'
        )
    for i, (name, pts) in enumerate(sorted(series.items())):
        color = _PALETTE[i % len(_PALETTE)]
        visible = [(x, v) for x, v in pts if v > 0]
        if visible:
            coords = " ".join(f"{sx(x):.2f},{sy(v):.2f}" for x, v in visible)
            parts.append(
                f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>'
            )
        ly = top + 14 + 14 * i
        parts.append(
            f'<line x1="{left + plot_w - 150}" y1="{ly - 4}" x2="{left + plot_w - 130}" '
            f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{left + plot_w - 125}" y="{ly}" font-size="10">{name}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_outputs(table: ResultTable, config: ExperimentConfig, output_dir: Union[str, Path, None] = None) -> dict:
    """Write the CSV table, SVG figures, and JSON manifest; return file paths.

    Output is deterministic: rows are sorted, floats carry 17 significant
    digits, and figures are plain generated SVG, so re-running an identical
    config reproduces every file byte for byte.
    """
    if not table.rows:
        raise ValueError("refusing to emit an empty result table")
    out = Path(output_dir if output_dir is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    csv_path = out / "results.csv"
    csv_path.write_text(_csv_text(table))

    # Axis = the grid key with the most distinct values (ties: key order).
    points = [g for g in config.grid_points() if g not in table.invalid_points]
    distinct = {k: sorted({g[k] for g in points}) for k in GRID_KEYS}
    axis = max(GRID_KEYS, key=lambda k: len(distinct[k]))
    fixed_keys = [k for k in GRID_KEYS if k != axis]

    figures = {}
    targets = sorted({r.target for r in table.rows if not r.target.endswith("_pc")})
    fixed_combos = sorted({tuple(g[k] for k in fixed_keys) for g in points})
    for target in targets:
        for combo in fixed_combos:
            fixed = dict(zip(fixed_keys, combo))
            series: dict = {}
            for row in table.rows:
                if row.target != target:
                    continue
                if any(row.grid[k] != v for k, v in fixed.items()):
                    continue
                series.setdefault(row.series, []).append((row.grid[axis], row.value))
            series = {name: sorted(pts) for name, pts in series.items() if pts}
            if not series or all(len(pts) < 1 for pts in series.values()):
                continue
            tag = "_".join(f"{k}{_fmt(v)}" for k, v in fixed.items())
            fname = f"fig_{target}_vs_{axis}_{tag}.svg".replace("/", "-")
            title = f"{target} vs {axis} ({tag})"
            xs = distinct[axis]
            (out / fname).write_text(_svg_figure(title, axis, xs, series))
            figures[fname] = {
                "target": target,
                "axis": axis,
                "fixed": fixed,
                "series": sorted(series),
            }

    manifest = {
        "config": json.loads(config.to_json()),
        "figures": figures,
        "invalid_points": table.invalid_points,
        "csv": csv_path.name,
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return {"csv": str(csv_path), "manifest": str(manifest_path), "figures": sorted(figures)}


# ---------------------------------------------------------------------------
# Verification suite
# ---------------------------------------------------------------------------


def verify_suite(level: str = "quick", seed: int = 20240501, output_path: Optional[str] = None) -> tuple[int, dict]:
    """Run the oracle checks; returns (exit_status, JSON-able report).

    ``quick`` uses reduced Monte-Carlo budgets (seconds); ``full`` runs
    1e5-sample score checks covering every closed-form information term.
    Exit status is 0 iff every report passed.
    """
    reports = oracle.oracle_suite(level=level, seed=seed)
    payload = {
        "level": level,
        "seed": seed,
        "pass": all(r.passed for r in reports),
        "reports": [r.to_json_dict() for r in reports],
    }
    if output_path:
        Path(output_path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return (0 if payload["pass"] else 1), payload
