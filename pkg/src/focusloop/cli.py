"""Operator command line: generate data, train, evaluate, benchmark,
serve the session service, and verify archives by replay.

Config precedence everywhere: explicit flags > FOCUSLOOP_* environment
variables > the INI config file (--config) > built-in defaults. Every
command exits 0 on success and non-zero with a single "error: ..." line
on stderr otherwise.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import os
import sys
import time
from typing import Optional

import numpy as np

from . import kernels
from .adapt import DirectiveSet
from .errors import FocusLoopError
from .features import extract_features, write_dataset, read_dataset
from .mlp import (
    TrainConfig,
    cross_validate,
    evaluate,
    load_model,
    model_fingerprint,
    save_model,
    train,
)
from .pipeline import WindowProcessor
from .preprocess import clean_window
from .service import load_archive, replay_archive
from .simulate import default_script, load_scenario, run_scenario
from .streams import write_ndjson


def _error(msg: str, code: int = 1) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def _load_config_file(path: Optional[str]) -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    if path:
        if not os.path.exists(path):
            raise FileNotFoundError(f"config file {path} not found")
        parser.read(path)
    return parser


def _resolve(flag, env_key: str, cfg: configparser.ConfigParser,
             section: str, option: str, default):
    if flag is not None:
        return flag
    if env_key in os.environ:
        return os.environ[env_key]
    if cfg.has_option(section, option):
        return cfg.get(section, option)
    return default


def _script_from_args(args) -> "ScenarioScript":
    from .simulate import ScenarioScript  # noqa: F401  (type only)

    script = load_scenario(args.scenario) if args.scenario else default_script()
    if args.seed is not None:
        script = dataclasses.replace(script, seed=args.seed)
    return script


def cmd_generate(args) -> int:
    script = _script_from_args(args)
    t0 = time.monotonic()
    run = run_scenario(script, keep_raw=True)
    os.makedirs(args.out, exist_ok=True)
    raw_path = os.path.join(args.out, "raw.ndjson")
    write_ndjson(raw_path, run.raw_samples)
    rows = []
    for window in run.windows:
        if window.label is None:
            continue
        fv = extract_features(clean_window(window),
                              include_fixation_count=args.fixation_count)
        if hasattr(fv, "to_array"):
            rows.append((fv, window.label.value))
    features_path = os.path.join(args.out, "features.csv")
    write_dataset(features_path, rows)
    probes_path = os.path.join(args.out, "probes.json")
    with open(probes_path, "w", encoding="utf-8") as fh:
        json.dump([{"ts_us": p.ts_us, "deadline_us": p.deadline_us} for p in run.probes], fh)
        fh.write("\n")
    elapsed = time.monotonic() - t0
    print(f"session {script.total_duration_s:.0f} s -> {len(run.windows)} windows, "
          f"{len(rows)} labeled rows, {len(run.probes)} probes "
          f"({elapsed:.1f} s wall, x{script.total_duration_s / max(elapsed, 1e-9):.0f} speedup)")
    print(f"wrote {raw_path}, {features_path}, {probes_path}")
    return 0


def cmd_train(args) -> int:
    X, y, names = read_dataset(args.dataset)
    config = TrainConfig(
        hidden=args.hidden, seed=args.seed if args.seed is not None else 0,
        max_epochs=args.max_epochs,
    )
    model, report = train(X, y, config, feature_names=names)
    save_model(model, args.out)
    metrics = evaluate(model, X, y)
    report_path = args.report or (str(args.out) + ".report.json")
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "val_accuracy": report.val_accuracy,
                "best_epoch": report.best_epoch,
                "epochs_run": len(report.train_losses),
                "train_losses": report.train_losses,
                "val_losses": report.val_losses,
                "confusion": report.confusion.tolist(),
                "full_dataset_accuracy": metrics.accuracy,
                "n_train": report.n_train,
                "n_val": report.n_val,
            },
            fh,
        )
        fh.write("\n")
    print(f"trained on {report.n_train}+{report.n_val} rows: "
          f"val_accuracy={report.val_accuracy:.3f} best_epoch={report.best_epoch}")
    print(f"model {args.out} fingerprint {model_fingerprint(model)}")
    print(f"report {report_path}")
    if args.cross_validate:
        accs = cross_validate(X, y, folds=5, config=config)
        print(f"5-fold accuracies: {[round(a, 3) for a in accs]} mean={np.mean(accs):.3f}")
    return 0


def cmd_evaluate(args) -> int:
    model = load_model(args.model)
    X, y, _ = read_dataset(args.dataset)
    m = evaluate(model, X, y)
    print(f"accuracy {m.accuracy:.3f} over {m.n} rows")
    print("class precision recall f1")
    for i in range(5):
        print(f"{i:5d} {m.precision[i]:9.3f} {m.recall[i]:6.3f} {m.f1[i]:5.3f}")
    print("confusion (rows true, cols predicted):")
    for row in m.confusion:
        print("  " + " ".join(f"{v:5d}" for v in row))
    return 0


def _bench_backend(model, n_windows: int, seed: int) -> dict:
    """Stream a long session and time the window->classification hot path."""
    from .simulate import ScenarioBlock, ScenarioScript, ScenarioSource
    from .states import ALL_STATES
    from .streams import HOP_US, StreamMerger, eeg_descriptor, eye_descriptor, AlignedWindow

    total_s = n_windows + 5 + 50  # warmup windows included
    blocks = []
    remaining = total_s
    i = 0
    while remaining > 0:
        d = min(180.0, max(60.0, remaining))
        blocks.append(ScenarioBlock(ALL_STATES[i % 5], d))
        remaining -= d + 30.0
        i += 1
    script = ScenarioScript(blocks=tuple(blocks), seed=seed)
    source = ScenarioSource(script)
    merger = StreamMerger()
    handles = {"eeg": merger.open_stream(eeg_descriptor()),
               "eye": merger.open_stream(eye_descriptor())}
    processor = WindowProcessor(model)
    stage_samples: dict[str, list[float]] = {"preprocess": [], "features": [], "forward": [], "total": []}
    warmup = 50
    seen = 0
    tick = HOP_US
    while seen < n_windows + warmup:
        for name, sample in source.advance(tick):
            handles[name].push(sample)
        result = merger.extract_window(tick)
        tick += HOP_US
        if not isinstance(result, AlignedWindow):
            continue
        processed = processor.process(result)
        seen += 1
        if seen <= warmup or processed.classification is None:
            continue
        for stage, us in processed.stage_us.items():
            stage_samples[stage].append(us)
        stage_samples["total"].append(processed.total_us)
    out = {}
    for stage, vals in stage_samples.items():
        arr = np.array(vals)
        out[stage] = {
            "p50_ms": float(np.percentile(arr, 50)) / 1000.0,
            "p95_ms": float(np.percentile(arr, 95)) / 1000.0,
            "p99_ms": float(np.percentile(arr, 99)) / 1000.0,
            "max_ms": float(arr.max()) / 1000.0,
        }
    return out


def cmd_bench(args) -> int:
    model = load_model(args.model)
    backends = [name for name, _ in kernels.available_backends()]
    if args.backend_kernels != "all":
        if args.backend_kernels not in backends:
            return _error(f"kernel backend {args.backend_kernels!r} not available")
        backends = [args.backend_kernels]
    active_before = kernels.BACKEND
    results = {}
    try:
        for name in backends:
            kernels.use_backend(name)
            results[name] = _bench_backend(model, args.windows, args.seed or 0)
    finally:
        kernels.use_backend(active_before)

    print(f"latency over {args.windows} windows (per-stage, ms)")
    header = f"{'backend':10s} {'stage':12s} {'p50':>8s} {'p95':>8s} {'p99':>8s} {'max':>8s}"
    print(header)
    print("-" * len(header))
    for name, stages in results.items():
        for stage in ("preprocess", "features", "forward", "total"):
            s = stages[stage]
            print(f"{name:10s} {stage:12s} {s['p50_ms']:8.3f} {s['p95_ms']:8.3f} "
                  f"{s['p99_ms']:8.3f} {s['max_ms']:8.3f}")
    worst_total = max(s["total"]["p99_ms"] for s in results.values())
    worst_forward = max(s["forward"]["p99_ms"] for s in results.values())
    budget_ok = worst_total < 100.0
    print(f"p99 window->classification: {worst_total:.3f} ms "
          f"({'PASS' if budget_ok else 'FAIL'} vs 100 ms budget)")
    print(f"p99 forward pass: {worst_forward * 1000.0:.1f} us "
          f"({'PASS' if worst_forward < 1.0 else 'FAIL'} vs 1 ms budget)")
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8") as fh:
            json.dump(results, fh)
            fh.write("\n")
    return 0 if budget_ok else 1


def cmd_serve(args) -> int:
    import uvicorn

    from .server import ServiceState, create_app

    cfg = _load_config_file(args.config)
    port = int(_resolve(args.port, "FOCUSLOOP_PORT", cfg, "service", "port", 8000))
    backend = _resolve(args.backend, "FOCUSLOOP_BACKEND", cfg, "backend", "kind", "stub")
    endpoint = _resolve(args.endpoint, "FOCUSLOOP_ENDPOINT", cfg, "backend", "endpoint", None)
    backend_model = _resolve(None, "FOCUSLOOP_BACKEND_MODEL", cfg, "backend", "model", "default")
    timeout_s = float(_resolve(None, "FOCUSLOOP_BACKEND_TIMEOUT", cfg, "backend", "timeout_s", 30.0))
    retries = int(_resolve(None, "FOCUSLOOP_BACKEND_RETRIES", cfg, "backend", "retries", 1))
    model = load_model(args.model)
    directives = DirectiveSet.load(args.templates)
    state = ServiceState(
        model, directives,
        backend_config={"kind": backend, "endpoint": endpoint, "model": backend_model,
                        "timeout_s": timeout_s, "retries": retries},
    )
    app = create_app(state)
    print(f"serving on :{port} (kernels: {kernels.BACKEND}, default backend: {backend})")
    uvicorn.run(app, host=args.host, port=port, log_level="warning")
    return 0


def cmd_replay(args) -> int:
    header, events = load_archive(args.archive)
    model = load_model(args.model)
    if header.get("model_fingerprint") != model_fingerprint(model):
        print("note: model fingerprint differs from the one recorded in the archive",
              file=sys.stderr)
    if header.get("kernel_backend") not in (None, kernels.BACKEND):
        print(f"note: archive was recorded with kernel backend "
              f"{header.get('kernel_backend')!r}, active is {kernels.BACKEND!r}",
              file=sys.stderr)
    result = replay_archive(header, events, model)
    if result.match:
        print(f"MATCH ({result.compared} derived events reproduced)")
        return 0
    div = result.first_divergence
    print(f"MISMATCH at derived event {div['index']}")
    print(f"  archived: {json.dumps(div['archived'])}")
    print(f"  replayed: {json.dumps(div['replayed'])}")
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="focusloop",
        description="attention-adaptive chat pipeline: simulate, train, serve, replay",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="run a scenario and write raw + feature datasets")
    p.add_argument("--scenario", help="scenario file (default: built-in 5-state script)")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--accel", type=float, default=0.0,
                   help="accepted for symmetry; generation always runs flat out")
    p.add_argument("--fixation-count", action="store_true",
                   help="include the optional 10th feature dimension")
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("train", help="train the attention classifier on a feature CSV")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--max-epochs", type=int, default=500)
    p.add_argument("--report", help="report JSON path (default: <model>.report.json)")
    p.add_argument("--cross-validate", action="store_true", help="also print 5-fold accuracies")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a model on a labeled feature CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("bench", help="latency benchmark of the window->classification path")
    p.add_argument("--model", required=True)
    p.add_argument("--windows", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--backend-kernels", default="all",
                   help="'compiled', 'python' or 'all' (default: all available)")
    p.add_argument("--json-out", help="also dump the numbers as JSON")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("serve", help="run the HTTP/websocket session service")
    p.add_argument("--model", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--config", help="INI config file")
    p.add_argument("--backend", choices=["stub", "http"], default=None)
    p.add_argument("--endpoint", help="chat completion endpoint for --backend http")
    p.add_argument("--templates", help="directive template file (default: packaged)")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("replay", help="verify an archive reproduces bit-identical events")
    p.add_argument("--archive", required=True)
    p.add_argument("--model", required=True)
    p.set_defaults(fn=cmd_replay)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except FocusLoopError as exc:
        return _error(f"{type(exc).__name__}: {exc}")
    except FileNotFoundError as exc:
        return _error(str(exc), code=2)
    except PermissionError as exc:
        return _error(f"unwritable path: {exc}", code=2)
    except OSError as exc:
        return _error(str(exc), code=2)
    except ValueError as exc:
        return _error(str(exc))


if __name__ == "__main__":
    sys.exit(main())
