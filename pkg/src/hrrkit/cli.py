"""Experiment runner: capacity sweeps, response curves, training, evaluation.

Every subcommand is deterministic given its flags and seed: output files
carry a manifest header (subcommand, resolved configuration, seed, tool
version) and no timestamps, so identical invocations produce identical
bytes. Exit codes: 0 success, 2 usage or configuration error, 3 numeric
divergence during training.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import io
import json
import sys

import numpy as np

from . import __version__
from . import data as dataio
from . import labels as labelcodec
from . import metrics as metricsmod
from . import trainer as trainermod
from .capacity import capacity_sweep, query_response_distribution
from .vsa import VsaKind

_EXIT_USAGE = 2
_EXIT_DIVERGED = 3


def _manifest(subcommand, args, skip=("config", "out", "stats", "jobs", "subcommand")):
    # The skip list drops keys that do not influence computed results, so
    # identical experiments produce identical output bytes.
    resolved = {
        key: value
        for key, value in sorted(vars(args).items())
        if key not in ("func", *skip) and value is not None
    }
    return {
        "tool": f"hrrkit-{__version__}",
        "subcommand": subcommand,
        "config": {k: _plain(v) for k, v in resolved.items()},
    }


def _plain(value):
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, VsaKind):
        return value.value
    return value


def _manifest_comments(manifest):
    lines = [f"# tool: {manifest['tool']}", f"# subcommand: {manifest['subcommand']}"]
    for key, value in manifest["config"].items():
        lines.append(f"# {key}: {value}")
    return "\n".join(lines) + "\n"


def _write_out(text, out_path):
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _int_list(text):
    return [int(tok) for tok in str(text).split(",") if tok]


def _vsa_list(values):
    kinds = []
    for value in values:
        for tok in str(value).split(","):
            if tok:
                kinds.append(VsaKind(tok))
    return kinds


# ----------------------------------------------------------------- capacity


def _capacity_cell(job):
    kind_value, d, threshold, seed, trials, n_max = job
    capacity, saturated, estimates = capacity_sweep(
        VsaKind(kind_value), d, threshold=threshold, seed=seed, trials=trials, n_max=n_max
    )
    rows = [
        (kind_value, est.d, est.n, trial, errors, errors / est.n)
        for est in estimates
        for trial, errors in enumerate(est.per_trial_errors)
    ]
    return kind_value, d, capacity, saturated, rows


def cmd_capacity(args):
    kinds = _vsa_list(args.vsa)
    dims = [d for spec in args.dims for d in _int_list(spec)]
    if not kinds or not dims:
        raise ValueError("need at least one --vsa and one --dims value")
    jobs = [
        (kind.value, d, args.threshold, args.seed, args.trials, args.n_max)
        for kind in kinds
        for d in dims
    ]
    if args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_capacity_cell, jobs))
    else:
        results = [_capacity_cell(job) for job in jobs]
    order = {kind.value: i for i, kind in enumerate(VsaKind)}
    results.sort(key=lambda r: (order[r[0]], r[1]))

    manifest = _manifest("capacity", args)
    if args.format == "json":
        payload = {
            "manifest": manifest,
            "trials": [
                {
                    "kind": kind,
                    "d": d,
                    "n": n,
                    "trial": trial,
                    "errors": errors,
                    "p_error": p,
                }
                for result in results
                for kind, d, n, trial, errors, p in result[4]
            ],
            "capacities": [
                {"kind": kind, "d": d, "capacity": cap, "saturated": sat}
                for kind, d, cap, sat, _ in results
            ],
        }
        _write_out(json.dumps(payload, indent=2, sort_keys=True) + "\n", args.out)
        return 0
    buf = io.StringIO()
    buf.write(_manifest_comments(manifest))
    buf.write("record,kind,d,n,trial,errors,p_error,capacity\n")
    for kind, d, cap, sat, rows in results:
        for row_kind, row_d, n, trial, errors, p in rows:
            buf.write(f"trial,{row_kind},{row_d},{n},{trial},{errors},{p!r},\n")
        buf.write(f"capacity,{kind},{d},,,,,{cap}\n")
    _write_out(buf.getvalue(), args.out)
    return 0


# ----------------------------------------------------------------- response


def cmd_response(args):
    n_values = []
    n = args.n_min
    while n <= args.n_max:
        n_values.append(n)
        n *= 2
    stats = query_response_distribution(
        args.dim,
        n_values,
        trials=args.trials,
        seed=args.seed,
        kind=VsaKind(args.kind),
        max_queries=args.queries,
    )
    manifest = _manifest("response", args)
    if args.format == "json":
        payload = {
            "manifest": manifest,
            "rows": [
                {
                    "n": s.n,
                    "mean_present": s.mean_present,
                    "std_present": s.std_present,
                    "mean_absent": s.mean_absent,
                    "std_absent": s.std_absent,
                }
                for s in stats
            ],
        }
        _write_out(json.dumps(payload, indent=2, sort_keys=True) + "\n", args.out)
        return 0
    buf = io.StringIO()
    buf.write(_manifest_comments(manifest))
    buf.write("n,mean_present,std_present,mean_absent,std_absent\n")
    for s in stats:
        buf.write(
            f"{s.n},{s.mean_present!r},{s.std_present!r},"
            f"{s.mean_absent!r},{s.std_absent!r}\n"
        )
    _write_out(buf.getvalue(), args.out)
    return 0


# -------------------------------------------------------------------- train


def cmd_train(args):
    dataset = dataio.parse_xml_repo(args.data, one_based=args.one_based)
    hidden = _int_list(args.hidden)
    label_seed = args.label_seed if args.label_seed is not None else args.seed
    if args.head == "hrr":
        out_dim = args.d_prime
        space = labelcodec.make_label_space(dataset.n_labels, args.d_prime, label_seed)
    else:
        out_dim = dataset.n_labels
        space = None
    model = trainermod.init_model(
        dataset.n_features, hidden, out_dim, args.head, seed=args.seed
    )
    config = trainermod.TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch,
        lr=args.lr,
        weight_decay=args.weight_decay,
        dropout=args.dropout,
        seed=args.seed,
    )
    val = (
        dataio.parse_xml_repo(args.val_data, one_based=args.one_based)
        if args.val_data
        else None
    )
    model, stats = trainermod.train(model, dataset, config, space=space, val_dataset=val)
    meta = {
        "n_features": dataset.n_features,
        "n_labels": dataset.n_labels,
        "d_prime": args.d_prime if args.head == "hrr" else None,
        "label_seed": label_seed if args.head == "hrr" else None,
        "hidden": hidden,
        "train_seed": args.seed,
    }
    trainermod.save_checkpoint(model, args.out, extra=meta)
    stats_path = args.stats or (args.out + ".stats.jsonl")
    with open(stats_path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"manifest": _manifest("train", args)}, sort_keys=True) + "\n")
        for s in stats:
            fh.write(
                json.dumps(
                    {
                        "epoch": s.epoch,
                        "mean_loss": s.mean_loss,
                        "seconds": s.seconds,
                        "val_p1": s.val_p1,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    return 0


# --------------------------------------------------------------------- eval


def _read_predictions(path, n_expected):
    rankings = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            rankings.append([int(tok) for tok in line.split()])
    if len(rankings) != n_expected:
        raise ValueError(
            f"predictions file has {len(rankings)} rows, dataset has {n_expected}"
        )
    return rankings


def cmd_eval(args):
    dataset = dataio.parse_xml_repo(args.data, one_based=args.one_based)
    ks = _int_list(args.k)
    if (args.checkpoint is None) == (args.predictions is None):
        raise ValueError("provide exactly one of --checkpoint or --predictions")
    params_block = None
    if args.predictions:
        rankings = _read_predictions(args.predictions, dataset.n_examples)
    else:
        model, header = trainermod.load_checkpoint(args.checkpoint)
        if header["layer_sizes"][0] != dataset.n_features:
            raise ValueError(
                f"checkpoint expects {header['layer_sizes'][0]} features, "
                f"dataset has {dataset.n_features}"
            )
        space = None
        if model.head == "hrr":
            space = labelcodec.make_label_space(
                header["n_labels"], header["d_prime"], header["label_seed"]
            )
            if header["n_labels"] != dataset.n_labels:
                raise ValueError(
                    f"checkpoint trained with {header['n_labels']} labels, "
                    f"dataset has {dataset.n_labels}"
                )
        elif model.out_dim != dataset.n_labels:
            raise ValueError(
                f"checkpoint outputs {model.out_dim} labels, "
                f"dataset has {dataset.n_labels}"
            )
        rankings = trainermod.predict_rankings(
            model, dataset, space=space, k=max(ks)
        )
        out_params, total = trainermod.param_count(model)
        hidden_width = header["layer_sizes"][-2]
        if model.head == "hrr":
            comp = trainermod.compression_percent(
                header["n_labels"], header["d_prime"], hidden_width
            )
        else:
            comp = 0.0
        params_block = {
            "output_params": out_params,
            "total_params": total,
            "compression_percent": comp,
        }
    prop_source = (
        dataio.parse_xml_repo(args.train_data, one_based=args.one_based)
        if args.train_data
        else dataset
    )
    if prop_source.n_labels != dataset.n_labels:
        raise ValueError("propensity source and eval dataset disagree on label count")
    propensities = dataio.compute_propensities(prop_source)
    truths = [ex.labels.tolist() for ex in dataset.examples]
    report = metricsmod.metric_report(rankings, truths, propensities, ks=ks)
    payload = {"manifest": _manifest("eval", args), "metrics": report}
    if params_block:
        payload["params"] = params_block
    _write_out(json.dumps(payload, indent=2, sort_keys=True) + "\n", args.out)
    return 0


# ------------------------------------------------------------------ parsing


def _apply_config_file(parser, argv):
    """Expand --config key=value pairs into leading CLI flags."""
    if "--config" not in argv:
        return argv
    at = argv.index("--config")
    if at + 1 >= len(argv):
        parser.error("--config requires a path")
    path = argv[at + 1]
    rest = argv[:at] + argv[at + 2 :]
    known = {
        action.option_strings[-1].lstrip("-").replace("-", "_"): action
        for action in parser._actions
        if action.option_strings
    }
    injected = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, eq, value = line.partition("=")
            if not eq:
                parser.error(f"{path}:{line_no}: expected key=value, got {line!r}")
            key = key.strip().replace("-", "_")
            if key not in known:
                parser.error(f"{path}:{line_no}: unknown config key {key!r}")
            action = known[key]
            value = value.strip()
            if action.nargs == 0:  # boolean switch
                if value.lower() in ("1", "true", "yes", "on"):
                    injected.append(action.option_strings[-1])
                elif value.lower() not in ("0", "false", "no", "off"):
                    parser.error(f"{path}:{line_no}: {key} expects a boolean")
            else:
                injected.extend([action.option_strings[-1], value])
    # Config values go first so explicit flags override them.
    return injected + rest


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hrrkit",
        description="Binding-capacity benchmarks and dense-label multi-label training.",
    )
    parser.add_argument("--version", action="version", version=f"hrrkit {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    cap = sub.add_parser("capacity", help="retrieval-error sweeps and capacities")
    cap.add_argument("--vsa", action="append", default=None, required=True,
                     help="binding kind: hrr, hrr-proj, map-c, vtb (repeatable or comma list)")
    cap.add_argument("--dims", action="append", required=True,
                     help="embedding sizes, comma separated or repeated")
    cap.add_argument("--threshold", type=float, default=0.03)
    cap.add_argument("--trials", type=int, default=10)
    cap.add_argument("--seed", type=int, default=0)
    cap.add_argument("--n-max", type=int, default=4096)
    cap.add_argument("--jobs", type=int, default=1)
    cap.add_argument("--format", choices=("csv", "json"), default="csv")
    cap.add_argument("--out", default=None)
    cap.add_argument("--config", default=None, help="key=value defaults file")
    cap.set_defaults(func=cmd_capacity)

    resp = sub.add_parser("response", help="present/absent query response statistics")
    resp.add_argument("--dim", type=int, required=True)
    resp.add_argument("--n-max", type=int, required=True)
    resp.add_argument("--n-min", type=int, default=4)
    resp.add_argument("--trials", type=int, default=10)
    resp.add_argument("--seed", type=int, default=0)
    resp.add_argument("--kind", choices=("hrr", "hrr-proj"), default="hrr-proj")
    resp.add_argument("--queries", type=int, default=256)
    resp.add_argument("--format", choices=("csv", "json"), default="csv")
    resp.add_argument("--out", default=None)
    resp.add_argument("--config", default=None)
    resp.set_defaults(func=cmd_response)

    tr = sub.add_parser("train", help="train an fc or hrr head model")
    tr.add_argument("--data", required=True)
    tr.add_argument("--head", choices=("fc", "hrr"), required=True)
    tr.add_argument("--d-prime", type=int, default=400)
    tr.add_argument("--epochs", type=int, default=40)
    tr.add_argument("--lr", type=float, default=1e-3)
    tr.add_argument("--batch", type=int, default=64)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--label-seed", type=int, default=None)
    tr.add_argument("--hidden", default="512,512")
    tr.add_argument("--weight-decay", type=float, default=0.0)
    tr.add_argument("--dropout", type=float, default=0.0)
    tr.add_argument("--one-based", action="store_true")
    tr.add_argument("--val-data", default=None)
    tr.add_argument("--out", required=True, help="checkpoint path")
    tr.add_argument("--stats", default=None, help="JSON-lines epoch stats path")
    tr.add_argument("--config", default=None)
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="ranking metrics for a checkpoint or predictions")
    ev.add_argument("--data", required=True)
    ev.add_argument("--checkpoint", default=None)
    ev.add_argument("--predictions", default=None,
                    help="file of space-separated ranked label indices per example")
    ev.add_argument("--train-data", default=None,
                    help="dataset used for propensities (defaults to --data)")
    ev.add_argument("--k", default="1,3,5")
    ev.add_argument("--one-based", action="store_true")
    ev.add_argument("--out", default=None)
    ev.add_argument("--config", default=None)
    ev.set_defaults(func=cmd_eval)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    if argv and argv[0] in ("capacity", "response", "train", "eval"):
        subparser = {
            "capacity": "capacity",
            "response": "response",
            "train": "train",
            "eval": "eval",
        }[argv[0]]
        for action in parser._subparsers._group_actions:
            child = action.choices[subparser]
            argv = [argv[0]] + _apply_config_file(child, argv[1:])
            break
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except trainermod.TrainingDivergedError as exc:
        print(f"hrrkit: training diverged: {exc}", file=sys.stderr)
        return _EXIT_DIVERGED
    except (ValueError, OSError) as exc:
        print(f"hrrkit: {exc}", file=sys.stderr)
        return _EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
