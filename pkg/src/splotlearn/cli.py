"""Config-driven experiment runner.

Subcommands:

* ``run``             generate/ingest data, compute sWeights, train every
                      configured method, emit learning curves (and a size
                      sweep when ``sizes`` is configured) plus a manifest.
* ``demo-divergence`` train all five methods from shared initial weights on
                      one dataset; the weighted cross-entropy arm is expected
                      to diverge and gets flagged, not fatal.
* ``sweights``        compute and export the sWeight table only.
* ``sweep``           final test AUC per (train size, method, seed).

Configs are JSON; unknown keys are rejected with their path.  Exit codes:
0 ok, 2 config error, 3 data error, 4 numerical failure outside the expected
divergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy

from . import __version__, evaluation
from .data import DataError, Dataset, CsvSchema, attach_sweights, cwola_label, generate_synthetic, ingest_csv, split
from .density import Density1D, MixtureModel, TruncatedExponential, TruncatedGaussian, Uniform
from .losses import LossInputError, LossKind
from .model import AdamConfig, Mlp, MlpConfig, TrainingDiverged, TrainReport, train
from .splot import SplotError, compute_sweights


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field path."""


METHOD_KINDS = {
    "true_labels": LossKind.PLAIN_CE,
    "constrained_mse": LossKind.CONSTRAINED_MSE,
    "exact_likelihood": LossKind.EXACT_LIKELIHOOD,
    "weighted_ce": LossKind.WEIGHTED_CE,
    "cwola": LossKind.PLAIN_CE,
}

ALL_METHODS = list(METHOD_KINDS)


# ---------------------------------------------------------------------------
# config parsing


def _check_keys(d, allowed, path):
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected an object")
    for k in d:
        if k not in allowed:
            raise ConfigError(f"{path}.{k}: unknown key")


def _number(d, key, path, default=None, lo=None, hi=None, lo_open=False, hi_open=False):
    if key not in d:
        if default is None:
            raise ConfigError(f"{path}.{key}: required")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number, got {v!r}")
    v = float(v)
    if lo is not None and (v <= lo if lo_open else v < lo):
        raise ConfigError(f"{path}.{key}: must be {'>' if lo_open else '>='} {lo}, got {v}")
    if hi is not None and (v >= hi if hi_open else v > hi):
        raise ConfigError(f"{path}.{key}: must be {'<' if hi_open else '<='} {hi}, got {v}")
    return v


def _integer(d, key, path, default=None, lo=None):
    v = _number(d, key, path, default=default, lo=lo)
    if v != int(v):
        raise ConfigError(f"{path}.{key}: expected an integer, got {v}")
    return int(v)


def _build_shape(spec, support, path) -> Density1D:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"{path}: expected an object with a 'kind'")
    kind = spec["kind"]
    lo, hi = support
    if kind == "gaussian":
        _check_keys(spec, {"kind", "mu", "sigma"}, path)
        mu = _number(spec, "mu", path)
        sigma = _number(spec, "sigma", path, lo=0, lo_open=True)
        return TruncatedGaussian(mu, sigma, lo, hi)
    if kind == "exponential":
        _check_keys(spec, {"kind", "rate"}, path)
        return TruncatedExponential(_number(spec, "rate", path, lo=0, lo_open=True), lo, hi)
    if kind == "uniform":
        _check_keys(spec, {"kind"}, path)
        return Uniform(lo, hi)
    raise ConfigError(f"{path}.kind: unknown density kind {kind!r}")


@dataclass
class ExperimentConfig:
    raw: dict
    synthetic: dict | None
    csv: dict | None
    support: tuple[float, float]
    signal_shape: Density1D
    background_shape: Density1D
    init_yield_fractions: np.ndarray
    methods: list[str]
    hidden: tuple[int, ...]
    leaky_slope: float
    l2_coefficient: float
    adam: AdamConfig
    eval_every: int
    test_fraction: float
    cwola_center: float
    cwola_fraction: float
    sizes: list[int]
    seeds: list[int]
    sweep_test_n: int
    output_dir: str

    def mixture(self, n_events: float) -> MixtureModel:
        return MixtureModel(
            [self.signal_shape, self.background_shape],
            self.init_yield_fractions * n_events,
        )

    def mlp_config(self, input_dim: int, seed: int) -> MlpConfig:
        return MlpConfig(
            input_dim=input_dim,
            hidden=self.hidden,
            leaky_slope=self.leaky_slope,
            seed=seed,
            l2_coefficient=self.l2_coefficient,
        )


def parse_config(raw: dict) -> ExperimentConfig:
    _check_keys(
        raw,
        {"data", "mixture", "methods", "model", "training", "split", "cwola", "sizes", "seeds", "sweep", "output_dir"},
        "config",
    )

    if "data" not in raw:
        raise ConfigError("config.data: required")
    data = raw["data"]
    _check_keys(data, {"synthetic", "csv"}, "config.data")
    if ("synthetic" in data) == ("csv" in data):
        raise ConfigError("config.data: exactly one of 'synthetic' or 'csv' required")
    synthetic = csv_spec = None
    if "synthetic" in data:
        synthetic = data["synthetic"]
        _check_keys(synthetic, {"n", "signal_fraction", "n_features"}, "config.data.synthetic")
        synthetic = {
            "n": _integer(synthetic, "n", "config.data.synthetic", lo=2),
            "signal_fraction": _number(
                synthetic, "signal_fraction", "config.data.synthetic", lo=0, hi=1, lo_open=True, hi_open=True
            ),
            "n_features": _integer(synthetic, "n_features", "config.data.synthetic", default=5, lo=1),
        }
    else:
        csv_spec = data["csv"]
        _check_keys(csv_spec, {"path", "mass_column", "label_column", "feature_columns"}, "config.data.csv")
        if "path" not in csv_spec or not isinstance(csv_spec["path"], str):
            raise ConfigError("config.data.csv.path: required string")
        if "mass_column" not in csv_spec or not isinstance(csv_spec["mass_column"], str):
            raise ConfigError("config.data.csv.mass_column: required string")
        label = csv_spec.get("label_column")
        if label is not None and not isinstance(label, str):
            raise ConfigError("config.data.csv.label_column: expected a string or null")
        feats = csv_spec.get("feature_columns")
        if feats is not None and not (isinstance(feats, list) and all(isinstance(c, str) for c in feats)):
            raise ConfigError("config.data.csv.feature_columns: expected a list of strings or null")
        csv_spec = {
            "path": csv_spec["path"],
            "mass_column": csv_spec["mass_column"],
            "label_column": label,
            "feature_columns": tuple(feats) if feats is not None else None,
        }

    mixture = raw.get("mixture", {})
    _check_keys(mixture, {"support", "signal", "background", "init_yields"}, "config.mixture")
    support_raw = mixture.get("support", [0.0, 8.0])
    if not (isinstance(support_raw, list) and len(support_raw) == 2):
        raise ConfigError("config.mixture.support: expected [lo, hi]")
    support = (float(support_raw[0]), float(support_raw[1]))
    if not support[0] < support[1]:
        raise ConfigError(f"config.mixture.support: requires lo < hi, got {support_raw}")
    try:
        signal_shape = _build_shape(
            mixture.get("signal", {"kind": "gaussian", "mu": 4.0, "sigma": 1.0}), support, "config.mixture.signal"
        )
        background_shape = _build_shape(
            mixture.get("background", {"kind": "exponential", "rate": 0.4}), support, "config.mixture.background"
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"config.mixture: {exc}") from None
    init_yields = mixture.get("init_yields", [0.5, 0.5])
    if not (isinstance(init_yields, list) and len(init_yields) == 2):
        raise ConfigError("config.mixture.init_yields: expected two entries")
    for i, v in enumerate(init_yields):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or v <= 0:
            raise ConfigError(f"config.mixture.init_yields[{i}]: must be a positive number, got {v!r}")
    fracs = np.asarray(init_yields, dtype=float)
    fracs = fracs / fracs.sum()

    methods = raw.get("methods", ["true_labels", "constrained_mse", "exact_likelihood", "cwola"])
    if not (isinstance(methods, list) and methods):
        raise ConfigError("config.methods: expected a non-empty list")
    for m in methods:
        if m not in METHOD_KINDS:
            raise ConfigError(f"config.methods: unknown method {m!r} (choose from {ALL_METHODS})")
    if len(set(methods)) != len(methods):
        raise ConfigError("config.methods: duplicate entries")
    if csv_spec is not None and csv_spec["label_column"] is None and "true_labels" in methods:
        raise ConfigError("config.methods: 'true_labels' needs config.data.csv.label_column")

    model = raw.get("model", {})
    _check_keys(model, {"hidden", "leaky_slope", "l2_coefficient"}, "config.model")
    hidden_raw = model.get("hidden", [64, 32, 16])
    if not (isinstance(hidden_raw, list) and hidden_raw):
        raise ConfigError("config.model.hidden: expected a non-empty list")
    for i, h in enumerate(hidden_raw):
        if isinstance(h, bool) or not isinstance(h, int) or h < 1:
            raise ConfigError(f"config.model.hidden[{i}]: must be a positive integer, got {h!r}")
    leaky_slope = _number(model, "leaky_slope", "config.model", default=0.05, lo=0, hi=1, lo_open=True, hi_open=True)
    l2 = _number(model, "l2_coefficient", "config.model", default=0.0, lo=0)

    training = raw.get("training", {})
    _check_keys(
        training,
        {"learning_rate", "beta1", "beta2", "epsilon", "batch_size", "total_steps", "eval_every"},
        "config.training",
    )
    adam = AdamConfig(
        learning_rate=_number(training, "learning_rate", "config.training", default=2e-4, lo=0),
        beta1=_number(training, "beta1", "config.training", default=0.9, lo=0, hi=1, hi_open=True),
        beta2=_number(training, "beta2", "config.training", default=0.999, lo=0, hi=1, hi_open=True),
        epsilon=_number(training, "epsilon", "config.training", default=1e-8, lo=0, lo_open=True),
        batch_size=_integer(training, "batch_size", "config.training", default=128, lo=1),
        total_steps=_integer(training, "total_steps", "config.training", default=20_000, lo=0),
    )
    eval_every = _integer(training, "eval_every", "config.training", default=500, lo=1)

    split_cfg = raw.get("split", {})
    _check_keys(split_cfg, {"test_fraction"}, "config.split")
    test_fraction = _number(split_cfg, "test_fraction", "config.split", default=0.25, lo=0, hi=1, lo_open=True, hi_open=True)

    cwola = raw.get("cwola", {})
    _check_keys(cwola, {"center", "inside_fraction"}, "config.cwola")
    cwola_center = _number(cwola, "center", "config.cwola", default=4.0)
    cwola_fraction = _number(cwola, "inside_fraction", "config.cwola", default=0.5, lo=0, hi=1, lo_open=True, hi_open=True)

    sizes_raw = raw.get("sizes", [])
    if not isinstance(sizes_raw, list):
        raise ConfigError("config.sizes: expected a list")
    sizes = []
    for i, s in enumerate(sizes_raw):
        if isinstance(s, bool) or not isinstance(s, int) or s < 2:
            raise ConfigError(f"config.sizes[{i}]: must be an integer >= 2, got {s!r}")
        sizes.append(s)
    if sizes != sorted(sizes):
        raise ConfigError("config.sizes: must be ascending")

    seeds_raw = raw.get("seeds", [0])
    if not (isinstance(seeds_raw, list) and seeds_raw):
        raise ConfigError("config.seeds: expected a non-empty list")
    seeds = []
    for i, s in enumerate(seeds_raw):
        if isinstance(s, bool) or not isinstance(s, int) or s < 0:
            raise ConfigError(f"config.seeds[{i}]: must be a non-negative integer, got {s!r}")
        seeds.append(s)

    sweep_cfg = raw.get("sweep", {})
    _check_keys(sweep_cfg, {"test_n"}, "config.sweep")
    sweep_test_n = _integer(sweep_cfg, "test_n", "config.sweep", default=20_000, lo=2)

    output_dir = raw.get("output_dir", "out")
    if not isinstance(output_dir, str):
        raise ConfigError("config.output_dir: expected a string")

    return ExperimentConfig(
        raw=raw,
        synthetic=synthetic,
        csv=csv_spec,
        support=support,
        signal_shape=signal_shape,
        background_shape=background_shape,
        init_yield_fractions=fracs,
        methods=list(methods),
        hidden=tuple(hidden_raw),
        leaky_slope=leaky_slope,
        l2_coefficient=l2,
        adam=adam,
        eval_every=eval_every,
        test_fraction=test_fraction,
        cwola_center=cwola_center,
        cwola_fraction=cwola_fraction,
        sizes=sizes,
        seeds=seeds,
        sweep_test_n=sweep_test_n,
        output_dir=output_dir,
    )


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return parse_config(raw)


# ---------------------------------------------------------------------------
# pipeline pieces


def _load_dataset(cfg: ExperimentConfig, seed: int) -> Dataset:
    if cfg.synthetic is not None:
        return generate_synthetic(
            cfg.synthetic["n"], cfg.synthetic["signal_fraction"], seed, n_features=cfg.synthetic["n_features"]
        )
    schema = CsvSchema(
        mass=cfg.csv["mass_column"], label=cfg.csv["label_column"], features=cfg.csv["feature_columns"]
    )
    ds, _report = ingest_csv(cfg.csv["path"], schema)
    return ds


def _train_method(cfg: ExperimentConfig, method: str, train_ds: Dataset, test_ds: Dataset, seed: int):
    """One training arm; divergence is recorded on the report, not raised."""
    kind = METHOD_KINDS[method]
    auc_labels = test_ds.y
    if method == "cwola":
        # region labels drive the loss; AUC is still scored against true labels
        labeling = cwola_label(train_ds, cfg.cwola_center, cfg.cwola_fraction)
        train_ds = train_ds.with_columns(y=labeling.labels)
        test_ds = test_ds.with_columns(y=labeling.apply(test_ds.m))
    model = Mlp(cfg.mlp_config(train_ds.X.shape[1], seed))
    init_sha = hashlib.sha256(model.theta.tobytes()).hexdigest()
    try:
        report = train(
            model,
            train_ds,
            kind,
            cfg.adam,
            eval_every=cfg.eval_every,
            test=test_ds,
            auc_labels=auc_labels,
            method_name=method,
        )
    except TrainingDiverged as exc:
        report = exc.report
    return model, report, init_sha


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir: Path, command: str, cfg: ExperimentConfig, seeds: list[int], artifacts: list[Path]):
    manifest = {
        "command": command,
        "config": cfg.raw,
        "seeds": seeds,
        "versions": {
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "splotlearn": __version__,
        },
        "artifacts": {p.name: _sha256_file(p) for p in artifacts},
    }
    path = out_dir / "manifest.json"
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(manifest, f, sort_keys=True, indent=2)
        f.write("\n")
    return path


def _json_dump(obj, path: Path):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(obj, f, sort_keys=True, indent=2)
        f.write("\n")


def _divergence_flags(report: TrainReport) -> dict:
    finite_auc = report.test_auc[np.isfinite(report.test_auc)]
    return {
        "aborted": bool(report.aborted),
        "abort_step": report.abort_step,
        "final_train_loss": float(report.train_loss[-1]) if len(report.train_loss) else None,
        "min_train_loss": float(np.min(report.train_loss)) if len(report.train_loss) else None,
        "peak_test_auc": float(np.max(finite_auc)) if len(finite_auc) else None,
        "final_test_auc": float(finite_auc[-1]) if len(finite_auc) else None,
        "diverged": bool(report.aborted or (len(report.train_loss) and np.min(report.train_loss) < 0)),
    }


def _run_training_stage(cfg: ExperimentConfig, out_dir: Path, seed: int, methods: list[str]):
    """Shared by run and demo-divergence: data -> sWeights -> one model per method."""
    ds = _load_dataset(cfg, seed)
    train_raw, test_raw = split(ds, cfg.test_fraction, seed)
    mm_train = cfg.mixture(train_raw.n)
    train_ds, train_table = attach_sweights(train_raw, mm_train)
    test_ds, test_table = attach_sweights(test_raw, cfg.mixture(test_raw.n))

    artifacts = []
    sweights_path = out_dir / "sweights.csv"
    train_table.to_csv(sweights_path)
    artifacts.append(sweights_path)

    summary = {
        "n_total": ds.n,
        "n_train": train_ds.n,
        "n_test": test_ds.n,
        "n_train_flagged": int(train_table.flagged_events.size),
        "n_test_flagged": int(test_table.flagged_events.size),
        "train_label_mean": float(train_ds.y.mean()) if train_ds.y is not None else None,
        "fitted_yields_train": [float(v) for v in train_table.yields],
        "fitted_yields_test": [float(v) for v in test_table.yields],
        "v_condition_number": train_table.condition_number,
        "n_features": int(train_ds.X.shape[1]),
    }

    reports = {}
    arm_info = {}
    for method in methods:
        model, report, init_sha = _train_method(cfg, method, train_ds, test_ds, seed)
        reports[method] = report
        arm_info[method] = {"init_theta_sha256": init_sha, **_divergence_flags(report)}
        rpath = out_dir / f"report_{method}.csv"
        report.to_csv(rpath)
        artifacts.append(rpath)

    curves_csv = out_dir / "learning_curves.csv"
    curves_svg = out_dir / "learning_curves.svg"
    evaluation.learning_curve([reports[m] for m in methods], methods, curves_csv, curves_svg)
    artifacts += [curves_csv, curves_svg]

    summary_path = out_dir / "dataset_summary.json"
    _json_dump(summary, summary_path)
    artifacts.append(summary_path)
    return reports, arm_info, artifacts


def _sweep_cell(cfg: ExperimentConfig, size: int, method: str, seed: int):
    """Train one sweep cell; returns the final test AUC or None on divergence."""
    if cfg.synthetic is not None:
        frac = cfg.synthetic["signal_fraction"]
        nf = cfg.synthetic["n_features"]
        test_seed = int(np.random.SeedSequence([seed, 0x7E57]).generate_state(1)[0])
        train_seed = int(np.random.SeedSequence([seed, size]).generate_state(1)[0])
        test_raw = generate_synthetic(cfg.sweep_test_n, frac, test_seed, n_features=nf)
        train_raw = generate_synthetic(size, frac, train_seed, n_features=nf)
    else:
        ds = _load_dataset(cfg, seed)
        train_pool, test_raw = split(ds, cfg.test_fraction, seed)
        if size > train_pool.n:
            raise DataError(f"sweep size {size} exceeds available train events {train_pool.n}")
        rng = np.random.default_rng([seed, size])
        train_raw = train_pool.subset(rng.permutation(train_pool.n)[:size])

    train_ds, _ = attach_sweights(train_raw, cfg.mixture(train_raw.n))
    test_ds, _ = attach_sweights(test_raw, cfg.mixture(test_raw.n))
    _model, report, _sha = _train_method(cfg, method, train_ds, test_ds, seed)
    if report.aborted or len(report.test_auc) == 0:
        return None
    final_auc = report.test_auc[-1]
    return None if not np.isfinite(final_auc) else float(final_auc)


def _sweep_cell_star(args):
    raw, size, method, seed = args
    return _sweep_cell(parse_config(raw), size, method, seed)


def _run_sweep_stage(cfg: ExperimentConfig, out_dir: Path, seeds: list[int], threads: int):
    sizes = cfg.sizes
    if not sizes:
        raise ConfigError("config.sizes: required for a size sweep")
    cells = [(size, method, seed) for size in sizes for method in cfg.methods for seed in seeds]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_sweep_cell_star, [(cfg.raw, *c) for c in cells]))
        lookup = dict(zip(cells, results))
        cell_fn = lambda size, method, seed: lookup[(size, method, seed)]  # noqa: E731
    else:
        cell_fn = lambda size, method, seed: _sweep_cell(cfg, size, method, seed)  # noqa: E731

    sweep_csv = out_dir / "sweep.csv"
    summary_csv = out_dir / "sweep_summary.csv"
    sweep_svg = out_dir / "sweep.svg"
    result = evaluation.size_sweep(
        sizes, cfg.methods, seeds, cell_fn, out_csv=sweep_csv, out_summary_csv=summary_csv, out_svg=sweep_svg
    )
    return result, [sweep_csv, summary_csv, sweep_svg]


# ---------------------------------------------------------------------------
# subcommands


def cmd_run(cfg: ExperimentConfig, out_dir: Path, threads: int) -> int:
    seed = cfg.seeds[0]
    reports, arm_info, artifacts = _run_training_stage(cfg, out_dir, seed, cfg.methods)
    _json_dump(arm_info, out_dir / "arms.json")
    artifacts.append(out_dir / "arms.json")
    if cfg.sizes:
        _result, sweep_artifacts = _run_sweep_stage(cfg, out_dir, cfg.seeds, threads)
        artifacts += sweep_artifacts
    _write_manifest(out_dir, "run", cfg, [seed] if not cfg.sizes else cfg.seeds, artifacts)
    return 0


def cmd_demo_divergence(cfg: ExperimentConfig, out_dir: Path, threads: int) -> int:
    seed = cfg.seeds[0]
    reports, arm_info, artifacts = _run_training_stage(cfg, out_dir, seed, ALL_METHODS)
    shared = {info["init_theta_sha256"] for info in arm_info.values()}
    demo = {
        "shared_initial_weights": len(shared) == 1,
        "arms": arm_info,
    }
    _json_dump(demo, out_dir / "divergence_summary.json")
    artifacts.append(out_dir / "divergence_summary.json")
    _write_manifest(out_dir, "demo-divergence", cfg, [seed], artifacts)
    return 0


def cmd_sweights(cfg: ExperimentConfig, out_dir: Path, threads: int) -> int:
    seed = cfg.seeds[0]
    ds = _load_dataset(cfg, seed)
    table = compute_sweights(ds.m, cfg.mixture(ds.n))
    path = out_dir / "sweights.csv"
    table.to_csv(path)
    summary = {
        "n_events": ds.n,
        "n_flagged": int(table.flagged_events.size),
        "fitted_yields": [float(v) for v in table.yields],
        "v_condition_number": table.condition_number,
    }
    _json_dump(summary, out_dir / "sweights_summary.json")
    _write_manifest(out_dir, "sweights", cfg, [seed], [path, out_dir / "sweights_summary.json"])
    return 0


def cmd_sweep(cfg: ExperimentConfig, out_dir: Path, threads: int) -> int:
    _result, artifacts = _run_sweep_stage(cfg, out_dir, cfg.seeds, threads)
    _write_manifest(out_dir, "sweep", cfg, cfg.seeds, artifacts)
    return 0


_COMMANDS = {
    "run": cmd_run,
    "demo-divergence": cmd_demo_divergence,
    "sweights": cmd_sweights,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="splotlearn", description="sWeight computation and training experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("run", "full pipeline: data, sWeights, training, reports"),
        ("demo-divergence", "all five methods from shared initial weights on one dataset"),
        ("sweights", "compute and export the sWeight table only"),
        ("sweep", "final test AUC per (train size, method, seed)"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to a JSON experiment config")
        p.add_argument("--out", default=None, help="output directory (overrides config output_dir)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed list with one seed")
        p.add_argument("--threads", type=int, default=1, help="worker processes for independent sweep cells")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seeds = [args.seed]
        if args.threads < 1:
            raise ConfigError(f"--threads must be >= 1, got {args.threads}")
        out_dir = Path(args.out if args.out is not None else cfg.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](cfg, out_dir, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (SplotError, LossInputError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
