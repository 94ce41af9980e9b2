"""Command-line entry point: serve the gateway, simulate a device, run
evaluations, validate datasets.

Exit codes: 0 success, 1 validation/e2e failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from urllib.parse import urlparse

from .clock import VirtualClock, WallClock
from .dataset import DatasetError, ParseError, validate_dataset
from .evalrun import EvalRunConfig, TargetUnreachableError, run_eval
from .gateway.core import DEFAULT_INGEST_PORT, DEFAULT_PORT, GatewayCore
from .providers import ProviderRegistry
from .simulator import (
    BatteryReport,
    CameraSimulator,
    DeviceConfig,
    DirectorySource,
    FrameSent,
    LossModel,
    SimulatorError,
    SinkClosed,
    SyntheticSource,
    TcpChunkSink,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


def _env_int(name: str, fallback: int) -> int:
    value = os.environ.get(name)
    return int(value) if value else fallback


def _load_registry(path: str | None) -> ProviderRegistry:
    candidate = path or os.environ.get("SIGHTLINK_PROVIDERS")
    if not candidate:
        return ProviderRegistry.default()
    config_path = Path(candidate)
    config = json.loads(config_path.read_text(encoding="utf-8"))
    return ProviderRegistry.from_config(config, base_dir=config_path.parent)


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .gateway.app import create_app

    try:
        registry = _load_registry(args.providers)
    except (OSError, ValueError) as exc:
        print(f"error: cannot load provider registry: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    core = GatewayCore(registry)
    app = create_app(core=core, ingest_host=args.host, ingest_port=args.ingest_port)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    if args.frames:
        try:
            source = DirectorySource(args.frames)
        except SimulatorError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    else:
        source = SyntheticSource()
    config = DeviceConfig(
        capture_interval=args.interval_ms / 1000.0,
        battery_interval=args.battery_interval_ms / 1000.0,
        frame_source=source,
        loss=LossModel(drop_probability=args.drop_prob, seed=args.seed),
    )
    host = urlparse(args.gateway).hostname or "127.0.0.1"
    try:
        sink = TcpChunkSink(host, args.ingest_port)
    except OSError as exc:
        print(f"error: cannot reach gateway ingest at {host}:{args.ingest_port}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    clock = VirtualClock() if args.virtual_time else WallClock()
    simulator = CameraSimulator(config, clock=clock, sink=sink)
    simulator.connect()
    try:
        events = simulator.run_for(args.duration_s)
    except SinkClosed:
        print("error: gateway closed the connection", file=sys.stderr)
        return EXIT_FAILURE
    finally:
        sink.close()
    frames = sum(1 for e in events if isinstance(e, FrameSent))
    batteries = sum(1 for e in events if isinstance(e, BatteryReport))
    print(
        f"sent {frames} frames, {batteries} battery reports, "
        f"{simulator.chunks_dropped} chunks dropped, "
        f"{simulator.captures_skipped} captures skipped"
    )
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    try:
        config = EvalRunConfig(
            dataset_path=args.dataset,
            image_root=args.images,
            target=args.target,
            session_mode=args.session_mode,
            parallel=args.parallel,
            seed=args.seed,
            cider_scale=args.cider_scale,
            out_path=args.out,
            table=args.table,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = run_eval(config)
    except (TargetUnreachableError, DatasetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.table:
        print(report.to_table(), end="")
    if args.out:
        print(f"report written to {args.out}")
    else:
        print(report.to_json(), end="")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        violations = validate_dataset(args.path)
    except (OSError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for violation in violations:
        print(f"{violation.location}: {violation.message}")
    if violations:
        print(f"{len(violations)} violation(s)", file=sys.stderr)
        return EXIT_FAILURE
    print("ok")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sightlink")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the gateway service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=_env_int("SIGHTLINK_PORT", DEFAULT_PORT))
    serve.add_argument(
        "--ingest-port",
        type=int,
        default=_env_int("SIGHTLINK_INGEST_PORT", DEFAULT_INGEST_PORT),
    )
    serve.add_argument("--providers", help="provider registry JSON file")
    serve.set_defaults(func=cmd_serve)

    simulate = sub.add_parser("simulate", help="stream simulated camera frames to a gateway")
    simulate.add_argument("--gateway", default=f"http://127.0.0.1:{DEFAULT_PORT}")
    simulate.add_argument("--ingest-port", type=int, default=DEFAULT_INGEST_PORT)
    simulate.add_argument("--frames", help="directory of JPEG frames (default: synthetic)")
    simulate.add_argument("--interval-ms", type=int, default=2000)
    simulate.add_argument("--battery-interval-ms", type=int, default=60000)
    simulate.add_argument("--drop-prob", type=float, default=0.0)
    simulate.add_argument("--seed", type=int, default=0)
    simulate.add_argument("--virtual-time", action="store_true")
    simulate.add_argument("--duration-s", type=float, default=10.0)
    simulate.set_defaults(func=cmd_simulate)

    evaluate = sub.add_parser("eval", help="score a dataset against a provider or gateway")
    evaluate.add_argument("--dataset", required=True)
    evaluate.add_argument("--images", required=True)
    evaluate.add_argument("--target", required=True, help="provider:<name> or gateway:<url>")
    evaluate.add_argument(
        "--session-mode",
        choices=("fresh_per_question", "per_image"),
        default="fresh_per_question",
    )
    evaluate.add_argument("--parallel", type=int, default=1)
    evaluate.add_argument("--seed", type=int, default=0)
    evaluate.add_argument("--cider-scale", type=float, default=1.0)
    evaluate.add_argument("--out", help="write the JSON report here")
    evaluate.add_argument("--table", action="store_true", help="print the aligned table")
    evaluate.set_defaults(func=cmd_eval)

    validate = sub.add_parser("validate", help="check a dataset file against the schema")
    validate.add_argument("path")
    validate.set_defaults(func=cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
