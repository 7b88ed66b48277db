"""Thin command-line client for the benchmark service.

``salicache run`` builds a service request from flags, executes it (in
process by default, or against a remote instance with --server), and writes
the report to disk. ``salicache serve`` starts the HTTP service.

Exit codes: 0 success, 1 config error, 2 I/O error, 3 internal error.
"""

from __future__ import annotations

import argparse
import sys

from pydantic import ValidationError

from . import __version__
from .errors import ConfigError, FileFormatError, InvariantViolation
from .harness import METHODS
from .reporting import emit_report

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_INTERNAL = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="salicache")
    parser.add_argument("--version", action="version", version=f"salicache {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a method comparison and write a report")
    source = run.add_mutually_exclusive_group(required=True)
    source.add_argument("--frames", metavar="MANIFEST", help="frame manifest (JSON) path")
    source.add_argument(
        "--synthetic",
        choices=["static", "moving_square", "noise", "composite"],
        help="generate a synthetic sequence instead of loading files",
    )
    run.add_argument("--frames-count", type=int, default=16, help="synthetic frame count")
    run.add_argument("--width", type=int, default=64)
    run.add_argument("--height", type=int, default=64)
    run.add_argument("--patch-size", type=int, default=16)
    run.add_argument(
        "--methods",
        default=",".join(METHODS),
        help=f"comma-separated subset of {{{','.join(METHODS)}}}",
    )
    run.add_argument("--tau-t", type=float, default=0.02, help="per-patch temporal threshold")
    run.add_argument("--theta-r", type=float, default=0.90, help="frame redundancy threshold")
    run.add_argument("--tau-high", type=float, default=0.60)
    run.add_argument("--tau-med", type=float, default=0.35)
    run.add_argument("--tau-low", type=float, default=0.15)
    run.add_argument("--canny-low", type=float, default=0.10)
    run.add_argument("--canny-high", type=float, default=0.25)
    run.add_argument("--sigma", type=float, default=1.4)
    run.add_argument("--var-window", type=int, default=11)
    run.add_argument("--edge-weight", type=float, default=0.5)
    run.add_argument("--budget", type=int, default=784, help="live patch-token budget")
    run.add_argument("--layers", type=int, default=2)
    run.add_argument("--q-heads", type=int, default=8)
    run.add_argument("--kv-heads", type=int, default=2)
    run.add_argument("--head-dim", type=int, default=16)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", required=True, help="report output path")
    run.add_argument("--format", choices=["json", "csv"], default="json")
    run.add_argument("--server", help="run against a remote service URL instead of in-process")

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def _build_request(args: argparse.Namespace):
    from .service.schemas import RunRequest

    return RunRequest(
        manifest=args.frames,
        synthetic=args.synthetic,
        frames_count=args.frames_count,
        width=args.width,
        height=args.height,
        patch_size=args.patch_size,
        methods=[m for m in args.methods.split(",") if m],
        tau_t=args.tau_t,
        theta_r=args.theta_r,
        sigma=args.sigma,
        canny_low=args.canny_low,
        canny_high=args.canny_high,
        var_window=args.var_window,
        edge_weight=args.edge_weight,
        tau_high=args.tau_high,
        tau_med=args.tau_med,
        tau_low=args.tau_low,
        budget=args.budget,
        layers=args.layers,
        q_heads=args.q_heads,
        kv_heads=args.kv_heads,
        head_dim=args.head_dim,
        seed=args.seed,
    )


def _run_remote(server: str, request) -> dict:
    import httpx

    response = httpx.post(
        server.rstrip("/") + "/run", json=request.model_dump(), timeout=600.0
    )
    if response.status_code != 200:
        detail = {}
        try:
            detail = response.json().get("detail", {})
        except ValueError:
            pass
        kind = detail.get("kind", "config") if isinstance(detail, dict) else "config"
        message = detail.get("message", response.text) if isinstance(detail, dict) else str(detail)
        if response.status_code >= 500 or kind == "internal":
            raise InvariantViolation(message)
        if kind == "io":
            raise FileFormatError(message)
        raise ConfigError(message)
    return response.json()


def _cmd_run(args: argparse.Namespace) -> int:
    from fastapi import HTTPException

    try:
        request = _build_request(args)
    except ValidationError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.server:
            report = _run_remote(args.server, request)
        else:
            from .service.app import execute_run

            report = execute_run(request)
    except HTTPException as exc:
        detail = exc.detail if isinstance(exc.detail, dict) else {"message": str(exc.detail)}
        kind = detail.get("kind", "config")
        print(f"error: {detail.get('message', exc.detail)}", file=sys.stderr)
        if kind == "io":
            return EXIT_IO
        if kind == "internal":
            return EXIT_INTERNAL
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except InvariantViolation as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL

    try:
        emit_report(report, args.out, args.format)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: cannot write report: {exc}", file=sys.stderr)
        return EXIT_IO

    salicache_summary = report["methods"].get("salicache")
    if salicache_summary:
        print(
            "salicache: compression {:.3f}x ({:.3f}x payload-only), {} wasted score computations".format(
                salicache_summary["compression_ratio"],
                salicache_summary["compression_ratio_payload_only"],
                salicache_summary["wasted_score_computations"],
            )
        )
    print(f"report written to {args.out}")
    return EXIT_OK


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("salicache.service.app:app", host=args.host, port=args.port)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_serve(args)
    except InvariantViolation as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
