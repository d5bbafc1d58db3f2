"""Command-line entry point: ``seaqugan {gen-data,train,baseline,report}``.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime or data error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import data_pipeline as dp
from . import evaluation as ev
from . import gan_engine as ge
from . import neural_core as nc
from .config import apply_overrides, config_hash, load_config, validate_config
from .errors import ConfigurationError, SeaQuganError

log = logging.getLogger("seaqugan")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, positional_overrides: bool = True) -> None:
    p.add_argument("--config", type=Path, help="JSON config file (sections data/model/train/eval/baseline)")
    p.add_argument("--preset", choices=("full", "desk"), default="full")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--set", dest="set_overrides", action="append", default=[], metavar="section.key=value",
                   help="dotted config override (repeatable)")
    if positional_overrides:
        p.add_argument("overrides", nargs="*", metavar="section.key=value", help="dotted config overrides")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="seaqugan", description="Hybrid quantum-classical GANs for 4-port sea-distance graphs")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-data", help="sample the training graph corpus")
    _common(p)
    p.add_argument("--n", type=int, help="number of graphs (data.n)")
    p.add_argument("--ports", help="ports CSV (id,name,lat_deg,lon_deg); default: bundled list")

    p = sub.add_parser("train", help="train one generator model over all configured seeds")
    _common(p)
    p.add_argument("--model", help=f"one of: {', '.join(ge.MODELS)}")
    p.add_argument("--dataset", type=Path, help="dataset CSV (default: OUT/dataset.csv)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed-list", help="comma-separated seeds, e.g. 0,1,2")
    p.add_argument("--jobs", type=int, help="seeds trained concurrently (default: number of seeds)")

    p = sub.add_parser("baseline", help="KDE random-sampling baseline")
    _common(p)
    p.add_argument("--dataset", type=Path, help="dataset CSV (default: OUT/dataset.csv)")
    p.add_argument("--n", type=int, help="number of sampled graphs (baseline.n)")

    p = sub.add_parser("report", help="collect run directories into figure-data CSVs")
    _common(p, positional_overrides=False)
    p.add_argument("runs", nargs="+", type=Path, metavar="RUN_DIR")
    p.add_argument("--dataset", type=Path, help="dataset CSV for the training-data overlay")
    p.add_argument("--baseline", type=Path, help="baseline summary.json")
    return parser


def resolve_config(args) -> dict:
    overrides = list(getattr(args, "overrides", [])) + list(args.set_overrides)
    flag_keys = {
        "n": "data.n" if args.command == "gen-data" else "baseline.n",
        "ports": "data.ports",
        "model": "model.name",
        "epochs": "train.epochs",
    }
    for flag, key in flag_keys.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides.append(f"{key}={json.dumps(value)}")
    seed_list = getattr(args, "seed_list", None)
    if seed_list is not None:
        try:
            seeds = [int(s) for s in seed_list.split(",") if s.strip()]
        except ValueError:
            raise ConfigurationError(f"--seed-list must be comma-separated integers, got {seed_list!r}") from None
        overrides.append(f"train.seeds={json.dumps(seeds)}")
    config = apply_overrides(load_config(args.config, args.preset), overrides)
    return validate_config(config)


def _check_n(args) -> None:
    n = getattr(args, "n", None)
    if n is not None and n < 1:
        raise UsageError(f"--n must be >= 1, got {n}")


def _stamp(config: dict) -> dict:
    return {"config_hash": config_hash(config), "seeds": config["train"]["seeds"]}


def _num(x) -> str:
    return repr(float(x))


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _load_ports(config: dict):
    path = config["data"]["ports"]
    return dp.load_ports(path) if path else dp.bundled_ports()


def _dataset_path(args) -> Path:
    return args.dataset if args.dataset is not None else args.out / "dataset.csv"


def _load_training_data(args) -> dp.Dataset:
    path = _dataset_path(args)
    if not path.exists():
        raise FileNotFoundError(f"dataset {path} not found; run `seaqugan gen-data` first")
    return dp.load_dataset(path)


# ---------------------------------------------------------------------------
# commands

def cmd_gen_data(args, config: dict) -> int:
    data = config["data"]
    ports = _load_ports(config)
    dataset = dp.build_dataset(data["n"], data["seed"], ports, data["threshold_nm"])
    dataset.provenance.update(_stamp(config), ports_source=data["ports"] or "bundled")
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "dataset.csv"
    dp.save_dataset(dataset, path)
    frac = ev.valid_fraction(dataset.weights)
    print(f"wrote {len(dataset)} graphs to {path}")
    print(f"pooled edge-weight std: {ev.pooled_weight_std(dataset.weights):.6f}")
    print(f"triangle-valid: {100 * frac:.1f}%")
    if frac < 1.0:
        log.error("training graphs violate the triangle inequality")
        return EXIT_RUNTIME
    return EXIT_OK


def gen_config_for(config: dict) -> ge.GeneratorConfig:
    model = config["model"]
    return dataclasses.replace(
        ge.MODELS[model["name"]],
        embed_axis=model["embed_axis"],
        grad_method=model["grad_method"],
        classical_output_bias=float(model["classical_output_bias"]),
    )


def train_config_for(config: dict) -> ge.TrainConfig:
    t, e = config["train"], config["eval"]
    return ge.TrainConfig(
        epochs=t["epochs"],
        batch_size=t["batch_size"],
        lr_disc=float(t["lr_disc"]),
        lr_gen=float(t["lr_gen"]),
        seeds=tuple(t["seeds"]),
        eval_samples=e["eval_samples"],
        eval_every=e["eval_every"],
    )


def write_metrics_csv(path: Path, records) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ge.METRIC_FIELDS)
        for r in records:
            writer.writerow([r.seed, r.epoch, r.valid_count, _num(r.weight_std), _num(r.gen_loss), _num(r.disc_loss)])


def read_metrics_csv(path: Path) -> list[ge.MetricsRecord]:
    with open(path, newline="") as fh:
        return [
            ge.MetricsRecord(int(row["seed"]), int(row["epoch"]), int(row["valid_count"]),
                             float(row["weight_std"]), float(row["gen_loss"]), float(row["disc_loss"]))
            for row in csv.DictReader(fh)
        ]


def write_mean_csv(path: Path, rows) -> None:
    fields = ("epoch", "n_seeds", "valid_count", "weight_std", "gen_loss", "disc_loss")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for row in rows:
            writer.writerow([row["epoch"], row["n_seeds"]] + [_num(row[f]) for f in fields[2:]])


def _n_jobs(requested, n_seeds: int) -> int:
    jobs = requested if requested is not None else n_seeds
    cap = os.environ.get("QUGA_THREADS")
    if cap:
        jobs = min(jobs, max(1, int(cap)))
    return max(1, min(jobs, n_seeds))


def cmd_train(args, config: dict) -> int:
    name = config["model"]["name"]
    gen_config = gen_config_for(config)
    train_config = train_config_for(config)
    if gen_config.n_params != ge.EXPECTED_PARAMS[name]:
        raise RuntimeError(f"{name}: generator has {gen_config.n_params} parameters, expected {ge.EXPECTED_PARAMS[name]}")
    dataset = _load_training_data(args)
    log.info("%s: %d generator parameters, %d training graphs", name, gen_config.n_params, len(dataset))

    jobs = _n_jobs(args.jobs, len(train_config.seeds))
    seeds = train_config.seeds
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(ge.train_seed, [train_config] * len(seeds), [gen_config] * len(seeds),
                                    [dataset.weights] * len(seeds), seeds))
    else:
        results = [ge.train_seed(train_config, gen_config, dataset.weights, s) for s in seeds]

    run_dir = args.out / "runs" / name
    run_dir.mkdir(parents=True, exist_ok=True)
    all_records = []
    for res in results:
        write_metrics_csv(run_dir / f"metrics_seed{res.seed}.csv", res.records)
        dp.write_weights_csv(run_dir / f"samples_seed{res.seed}.csv", res.final_samples)
        nc.save_checkpoint(res.state.disc, run_dir / f"disc_seed{res.seed}.ckpt")
        if gen_config.ansatz is None:
            nc.save_checkpoint(ge.classical_model(gen_config, res.state.gen_params), run_dir / f"gen_seed{res.seed}.ckpt")
        else:
            ge.save_quantum_params(res.state.gen_params, run_dir / f"gen_seed{res.seed}.qpv")
        all_records.extend(res.records)
    mean_rows = ge.average_records(all_records)
    write_mean_csv(run_dir / "metrics_mean.csv", mean_rows)
    meta = {"model": name, **_stamp(config), "config": config, **ge.run_metadata(gen_config, train_config)}
    meta["dataset"] = {"path": str(_dataset_path(args)), "provenance": dataset.provenance}
    _write_json(run_dir / "run_meta.json", meta)

    final = mean_rows[-1]
    print(f"{name}: epoch {final['epoch']} mean valid {final['valid_count']:.1f}/{train_config.eval_samples}, "
          f"std {final['weight_std']:.4f}, G loss {final['gen_loss']:.4f}")
    print(f"results in {run_dir}")
    return EXIT_OK


def cmd_baseline(args, config: dict) -> int:
    base = config["baseline"]
    dataset = _load_training_data(args)
    model = ev.kde_fit(dataset.weights)
    samples = ev.kde_sample_graphs(model, np.random.default_rng(base["seed"]), base["n"], base["renormalize"])
    frac = ev.valid_fraction(samples)
    out = args.out / "baseline"
    out.mkdir(parents=True, exist_ok=True)
    summary = {
        "n_samples": base["n"],
        "valid_fraction": frac,
        "bandwidth": model.bandwidth,
        "bandwidth_rule": "scott",
        "seed": base["seed"],
        "renormalize": base["renormalize"],
        "weight_std": ev.pooled_weight_std(samples),
        **_stamp(config),
    }
    _write_json(out / "summary.json", summary)
    dp.write_weights_csv(out / "samples.csv", samples)
    print(f"KDE baseline: {100 * frac:.1f}% valid over {base['n']} graphs (bandwidth {model.bandwidth:.6f})")
    return EXIT_OK


def _load_run(run_dir: Path):
    meta_path = run_dir / "run_meta.json"
    mean_path = run_dir / "metrics_mean.csv"
    for p in (meta_path, mean_path):
        if not p.exists():
            raise FileNotFoundError(f"run {run_dir}: missing {p.name}")
    meta = json.loads(meta_path.read_text())
    with open(mean_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    samples = [dp.read_weights_csv(p) for p in sorted(run_dir.glob("samples_seed*.csv"))]
    if not samples:
        raise FileNotFoundError(f"run {run_dir}: missing samples_seed*.csv")
    return meta["model"], meta, rows, np.concatenate(samples)


def _curve_csv(path: Path, names, curves, ref_name: str, ref_value) -> None:
    epochs = sorted({e for c in curves for e in c})
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", *names, ref_name])
        for e in epochs:
            writer.writerow([e, *(_num(c[e]) if e in c else "" for c in curves), "" if ref_value is None else _num(ref_value)])


def cmd_report(args, config: dict) -> int:
    runs = [_load_run(d) for d in args.runs]
    names = [r[0] for r in runs]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate model names among runs: {names}")

    dataset = _load_training_data(args) if (args.dataset or (args.out / "dataset.csv").exists()) else None
    baseline = None
    base_path = args.baseline if args.baseline is not None else args.out / "baseline" / "summary.json"
    if base_path.exists():
        baseline = json.loads(base_path.read_text())
    elif args.baseline is not None:
        raise FileNotFoundError(f"baseline summary {base_path} not found")

    out = args.out / "report"
    out.mkdir(parents=True, exist_ok=True)
    eval_samples = runs[0][1]["train"]["eval_samples"]

    def curves(field):
        return [{int(r["epoch"]): float(r[field]) for r in rows} for _, _, rows, _ in runs]

    _curve_csv(out / "valid_vs_epoch.csv", names, curves("valid_count"), "kde_baseline",
               None if baseline is None else baseline["valid_fraction"] * eval_samples)
    _curve_csv(out / "std_vs_epoch.csv", names, curves("weight_std"), "training_data",
               None if dataset is None else ev.pooled_weight_std(dataset.weights))
    _curve_csv(out / "gen_loss_vs_epoch.csv", names, curves("gen_loss"), "chance_ln2", float(np.log(2)))

    columns = [r[3] for r in runs]
    col_names = list(names)
    if dataset is not None:
        columns.append(dataset.weights)
        col_names.append("training_data")
    hi = max(float(c.max()) for c in columns)
    bins = config["eval"]["histogram_bins"]
    hists = [ev.histogram(c, bins, (0.0, hi)) for c in columns]
    with open(out / "density.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bin_left", "bin_right", *col_names])
        edges = hists[0].bin_edges
        for k in range(bins):
            writer.writerow([_num(edges[k]), _num(edges[k + 1]), *(_num(h.densities[k]) for h in hists)])

    _write_json(out / "report_meta.json", {
        **_stamp(config),
        "runs": {name: {"dir": str(d), "config_hash": meta.get("config_hash"), "seeds": meta.get("seeds")}
                 for (name, meta, _, _), d in zip(runs, args.runs)},
        "baseline": baseline,
        "eval_samples": eval_samples,
    })
    print(f"report for {', '.join(names)} written to {out}")
    return EXIT_OK


COMMANDS = {"gen-data": cmd_gen_data, "train": cmd_train, "baseline": cmd_baseline, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _check_n(args)
        config = resolve_config(args)
    except (ConfigurationError, UsageError) as exc:
        print(f"seaqugan: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args, config)
    except (SeaQuganError, OSError, ValueError, RuntimeError) as exc:
        print(f"seaqugan: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
