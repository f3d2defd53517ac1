"""Command-line client for the lossland service.

Each subcommand reads a single JSON config document, posts it to the
matching service endpoint, and prints the JSON response. By default the
service app runs in-process; pass --server to target a running instance
started with `lossland serve`.
"""

from __future__ import annotations

import argparse
import json
import sys

import httpx


def _load_json(path: str) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise SystemExit(f"config {path} must hold a JSON object")
    return doc


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    from .service import app  # deferred so `serve`/remote use stays light

    return httpx.Client(transport=httpx.ASGITransport(app=app),
                        base_url="http://lossland.internal", timeout=None)


def _post(args, endpoint: str, payload: dict) -> int:
    with _client(args.server) as client:
        response = client.post(endpoint, json=payload)
    try:
        body = response.json()
    except ValueError:
        body = {"detail": response.text}
    if response.status_code >= 400:
        print(f"error {response.status_code}: {json.dumps(body, indent=2)}", file=sys.stderr)
        return 1
    print(json.dumps(body, indent=2))
    return 0


def _out_dir(args, doc: dict) -> str:
    out = args.out_dir or doc.pop("out_dir", None)
    if not out:
        raise SystemExit("an output directory is required: pass --out-dir or set out_dir in the config")
    doc.pop("out_dir", None)
    return out


def _override_seed(doc: dict, key_path: list[str], seed: int | None) -> None:
    if seed is None:
        return
    target = doc
    for key in key_path[:-1]:
        target = target.setdefault(key, {})
    target[key_path[-1]] = seed


def _cmd_run_config(args, endpoint: str, seed_path: list[str]) -> int:
    doc = _load_json(args.config)
    out = _out_dir(args, doc)
    _override_seed(doc, seed_path, args.seed)
    return _post(args, endpoint, {"config": doc, "out_dir": out})


def _cmd_flat_config(args, endpoint: str, seed_key: str | None = None) -> int:
    doc = _load_json(args.config)
    out = _out_dir(args, doc)
    if seed_key and args.seed is not None:
        doc[seed_key] = args.seed
    doc["out_dir"] = out
    return _post(args, endpoint, doc)


def _cmd_schedule_dump(args) -> int:
    doc = _load_json(args.config)
    if args.out:
        doc["out_path"] = args.out
    return _post(args, "/schedule-dump", doc)


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lossland",
                                     description="Loss-landscape analysis toolkit client")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, seed=True):
        p.add_argument("--config", required=True, help="JSON config document")
        p.add_argument("--out-dir", help="output directory (overrides config out_dir)")
        if seed:
            p.add_argument("--seed", type=int, help="override the run seed")
        p.add_argument("--server", help="base URL of a running service; default runs in-process")

    p = sub.add_parser("train", help="train one mode and snapshot iterates")
    add_common(p)
    p.set_defaults(func=lambda a: _cmd_run_config(a, "/train", ["seed"]))

    p = sub.add_parser("zoo", help="train a reference mode plus variants and connect each pair")
    add_common(p)
    p.set_defaults(func=lambda a: _cmd_run_config(a, "/zoo", ["base", "seed"]))

    p = sub.add_parser("sgdr-study", help="trajectory study: segments, barriers, curves, plane")
    add_common(p)
    p.set_defaults(func=lambda a: _cmd_run_config(a, "/sgdr-study", ["run", "seed"]))

    p = sub.add_parser("connect", help="train a connecting curve between two checkpoints")
    add_common(p)
    p.set_defaults(func=lambda a: _cmd_flat_config(a, "/connect", seed_key="seed"))

    p = sub.add_parser("segment", help="scan the straight segment between two checkpoints")
    add_common(p, seed=False)
    p.set_defaults(func=lambda a: _cmd_flat_config(a, "/segment"))

    p = sub.add_parser("plane", help="evaluate the loss surface on a three-point plane")
    add_common(p, seed=False)
    p.set_defaults(func=lambda a: _cmd_flat_config(a, "/plane"))

    p = sub.add_parser("schedule-dump", help="emit the per-epoch LR table for a schedule")
    p.add_argument("--config", required=True, help="JSON with schedule, base_lr, epochs")
    p.add_argument("--out", help="write the table to this CSV path")
    p.add_argument("--server", help="base URL of a running service; default runs in-process")
    p.set_defaults(func=_cmd_schedule_dump)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
