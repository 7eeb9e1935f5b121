"""Command line interface.

Thin client over the pipeline stage runners: `fit`, `index`, `search`, and
`re_rank` each assemble a config from `--config` files (repeatable, later
files win), dotted `--key=value` overrides, and the `--seed`/`--threads`
flags, then execute in-process, or remotely when `--server URL` points at a
running service. `serve` starts that service.

Exit codes: 0 on success, 2 for configuration or usage errors, 1 for
runtime errors. Failures print one line to stderr:
`error[<category>]: <message>`.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
import urllib.error
import urllib.request

from .config import resolve_config
from .errors import ConfigValidationError, RankForgeError
from .pipeline import run_fit, run_index, run_re_rank, run_search

_STAGES = ("fit", "index", "search", "re_rank")
_OVERRIDE_RE = re.compile(r"^--[A-Za-z0-9_.\-]+=")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rankforge",
        description="Fine-tune, index, search, re-rank, and evaluate retrieval models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("fit", "fine-tune a model and save it"),
        ("index", "encode a doc dataset into an index"),
        ("search", "retrieve a run for a query dataset"),
        ("re_rank", "re-score the top of an existing run"),
    ):
        stage = sub.add_parser(name, help=help_text)
        stage.add_argument(
            "--config",
            action="append",
            default=[],
            metavar="YAML",
            help="config file; repeatable, later files override earlier ones",
        )
        stage.add_argument("--seed", type=int, default=None, help="override the pipeline seed")
        stage.add_argument("--threads", type=int, default=None, help="worker thread count")
        stage.add_argument("--force", action="store_true", help="overwrite existing outputs")
        stage.add_argument(
            "--server",
            default=None,
            metavar="URL",
            help="execute on a running service instead of in-process",
        )
    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def _split_overrides(argv: list[str]) -> tuple[list[str], list[str]]:
    """Separate dotted --key=value overrides from regular arguments."""
    known_flags = {"--config", "--seed", "--threads", "--server"}
    regular: list[str] = []
    overrides: list[str] = []
    for arg in argv:
        head = arg.split("=", 1)[0]
        if _OVERRIDE_RE.match(arg) and head not in known_flags:
            overrides.append(arg[2:])
        else:
            regular.append(arg)
    return regular, overrides


def _print_outcome(outcome) -> None:
    data = outcome.model_dump()
    report = data.pop("report", None)
    for key, value in data.items():
        if key == "metric_means" and value:
            for name, mean in value.items():
                print(f"{name} (mean): {mean:.6f}")
        elif key != "metric_means":
            print(f"{key}: {value}")
    if report:
        print(report, end="")


def _run_remote(server: str, command: str, raw_config: dict, force: bool) -> int:
    url = server.rstrip("/") + "/" + command
    body = json.dumps({"config": raw_config, "force": force}).encode("utf-8")
    request = urllib.request.Request(
        url, data=body, headers={"Content-Type": "application/json"}, method="POST"
    )
    try:
        with urllib.request.urlopen(request) as response:
            payload = json.loads(response.read().decode("utf-8"))
    except urllib.error.HTTPError as exc:
        try:
            detail = json.loads(exc.read().decode("utf-8"))
        except (ValueError, OSError):
            detail = {}
        category = detail.get("category", "http")
        message = detail.get("message", str(exc))
        print(f"error[{category}]: {message}", file=sys.stderr)
        return 2 if category == "config" else 1
    except urllib.error.URLError as exc:
        print(f"error[connection]: {exc.reason}", file=sys.stderr)
        return 1
    print(json.dumps(payload, indent=2))
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    regular, overrides = _split_overrides(argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(regular)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.command == "serve":
        import uvicorn

        from .service import create_app

        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0

    try:
        if args.server is not None:
            from .config import load_config_files, parse_override, set_config_path

            raw = load_config_files(args.config)
            for text in overrides:
                key, value = parse_override(text)
                set_config_path(raw, key, value)
            if args.seed is not None:
                raw["seed"] = args.seed
            if args.threads is not None:
                raw["threads"] = args.threads
            return _run_remote(args.server, args.command, raw, args.force)
        config = resolve_config(args.config, overrides, seed=args.seed, threads=args.threads)
        runner = {
            "fit": run_fit,
            "index": run_index,
            "search": run_search,
            "re_rank": run_re_rank,
        }[args.command]
        outcome = runner(config, force=args.force)
    except ConfigValidationError as exc:
        print(f"error[{exc.category}]: {exc}", file=sys.stderr)
        return 2
    except RankForgeError as exc:
        print(f"error[{exc.category}]: {exc}", file=sys.stderr)
        return 1
    _print_outcome(outcome)
    return 0


if __name__ == "__main__":
    sys.exit(main())
