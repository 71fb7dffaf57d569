"""Command-line surface: train, sweep, full-supervised, spectral, verify-filter."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .data import load_dataset
from .models import ModelConfig
from .spectral import (check_convergence_bound, random_connected_graph,
                       verify_filter_expressivity)
from .training import full_supervised_protocol, sweep, train


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--model", default="gcnii",
                   choices=["gcn", "gcn-res", "gcn-dropedge", "appnp", "gcnii", "gcnii-star"])
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--drop-edge", type=float, default=0.0)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--wd-conv", type=float, default=0.01)
    p.add_argument("--wd-dense", type=float, default=5e-4)
    p.add_argument("--patience", type=int, default=100)
    p.add_argument("--max-epochs", type=int, default=1500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-initial-residual", action="store_true")
    p.add_argument("--no-identity-map", action="store_true")
    p.add_argument("--degree-buckets", action="store_true")
    p.add_argument("--weight-spectrum", action="store_true")
    p.add_argument("--out", type=Path, default=None, help="write the summary JSON here")


def _config_from(args: argparse.Namespace, num_layers: int | None = None) -> ModelConfig:
    return ModelConfig(
        model_kind=args.model,
        num_layers=args.layers if num_layers is None else num_layers,
        hidden_dim=args.hidden,
        alpha=args.alpha,
        lam=args.lam,
        dropout=args.dropout,
        drop_edge=args.drop_edge,
        lr=args.lr,
        wd_conv=args.wd_conv,
        wd_dense=args.wd_dense,
        patience=args.patience,
        max_epochs=args.max_epochs,
        seed=args.seed,
        use_initial_residual=not args.no_initial_residual,
        use_identity_map=not args.no_identity_map,
    )


def _emit(summary: dict, out: Path | None) -> None:
    text = json.dumps(summary)
    if out is not None:
        out.write_text(text + "\n")
    print(text)


def _cmd_train(args: argparse.Namespace) -> int:
    data = load_dataset(args.data)
    result = train(
        _config_from(args), data,
        epoch_callback=lambda stats: print(json.dumps(stats.to_dict()), flush=True),
        collect_degree_buckets=args.degree_buckets,
        collect_weight_spectrum=args.weight_spectrum,
    )
    _emit(result.to_dict(), args.out)
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    data = load_dataset(args.data)
    layer_list = [int(k) for k in args.layers.split(",")]
    summary = sweep(_config_from(args, num_layers=layer_list[0]), layer_list,
                    args.seeds, data,
                    run_callback=lambda e: print(json.dumps({
                        "num_layers": e.num_layers,
                        "seed": e.seed,
                        "test_accuracy": e.result.test_accuracy if e.result else None,
                        "error": e.error,
                    }), flush=True))
    _emit(summary.aggregate(), args.out)
    return 0


def _cmd_full_supervised(args: argparse.Namespace) -> int:
    data = load_dataset(args.data)
    protocol = full_supervised_protocol(data, _config_from(args),
                                        num_splits=args.num_splits)
    summary = protocol.to_dict()
    for run in summary["runs"]:
        run.pop("val_curve", None)
    _emit(summary, args.out)
    return 0


def _signal_vector(name: str, data, rng: np.random.Generator) -> np.ndarray:
    if name == "ones":
        return np.ones(data.graph.num_nodes)
    if name == "random":
        return rng.random(data.graph.num_nodes)
    if name.startswith("feature:"):
        j = int(name.split(":", 1)[1])
        return data.features[:, j].copy()
    raise SystemExit(f"unknown signal {name!r}")


def _cmd_spectral(args: argparse.Namespace) -> int:
    data = load_dataset(args.data)
    rng = np.random.default_rng(args.seed)
    x = _signal_vector(args.signal, data, rng)
    report = check_convergence_bound(data.graph, x, args.k_max)
    _emit(report.to_dict(), args.out)
    return 0


def _cmd_verify_filter(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(args.seed)
    data = load_dataset(args.data) if args.data else None
    explicit_theta = (np.array([float(t) for t in args.theta.split(",")])
                      if args.theta else None)
    trials = 1 if explicit_theta is not None else args.trials

    failures = 0
    degenerate = 0
    worst = 0.0
    for t in range(trials):
        if data is not None:
            g = data.graph
        else:
            g = random_connected_graph(rng, int(rng.integers(4, 16)))
        theta = (explicit_theta if explicit_theta is not None
                 else rng.uniform(-1.0, 1.0, size=args.order))
        x = rng.random(g.num_nodes)
        check = verify_filter_expressivity(g, x, theta)
        worst = max(worst, check.max_abs_error)
        if check.degenerate:
            degenerate += 1
        elif not check.passed:
            failures += 1
        print(json.dumps({"trial": t, "order": len(theta),
                          "max_abs_error": check.max_abs_error,
                          "degenerate": check.degenerate,
                          "passed": check.passed}), flush=True)
    summary = {"trials": trials, "failures": failures,
               "degenerate": degenerate, "worst_error": worst}
    _emit(summary, args.out)
    return 0 if failures == 0 else 1


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="deepgcn",
        description="Deep graph-convolution trainer and spectral verification toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train one model")
    _add_model_flags(p_train)
    p_train.set_defaults(func=_cmd_train)

    p_sweep = sub.add_parser("sweep", help="layer-count x seed grid")
    _add_model_flags(p_sweep)
    p_sweep.set_defaults(func=_cmd_sweep)
    # --layers becomes a comma list for sweeps
    for action in p_sweep._actions:
        if action.dest == "layers":
            action.type = str
            action.default = "2"
    p_sweep.add_argument("--seeds", type=int, default=5)

    p_full = sub.add_parser("full-supervised",
                            help="mean accuracy over stratified 60/20/20 splits")
    _add_model_flags(p_full)
    p_full.add_argument("--num-splits", type=int, default=10)
    p_full.set_defaults(func=_cmd_full_supervised)

    p_spec = sub.add_parser("spectral", help="stationary-convergence report")
    p_spec.add_argument("--data", required=True)
    p_spec.add_argument("--signal", default="ones")
    p_spec.add_argument("--k-max", type=int, default=64)
    p_spec.add_argument("--seed", type=int, default=0)
    p_spec.add_argument("--out", type=Path, default=None)
    p_spec.set_defaults(func=_cmd_spectral)

    p_filter = sub.add_parser("verify-filter", help="polynomial-filter equivalence trials")
    p_filter.add_argument("--data", default=None)
    p_filter.add_argument("--order", type=int, default=4)
    p_filter.add_argument("--trials", type=int, default=100)
    p_filter.add_argument("--seed", type=int, default=0)
    p_filter.add_argument("--theta", default=None, help="comma-separated explicit coefficients")
    p_filter.add_argument("--out", type=Path, default=None)
    p_filter.set_defaults(func=_cmd_verify_filter)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
