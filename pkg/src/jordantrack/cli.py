"""Command-line client for the jordantrack service.

Every subcommand talks HTTP to the service app: in process by default, or to
a remote `--server URL` started with `jordantrack serve`. Experiment outputs
(trace CSVs, summary JSON) are written client-side under --out, which
defaults to $JORDANTRACK_OUTPUT_DIR or ./out.

Exit codes: 0 success, 1 invariant-suite failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import httpx

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_CONFIG = 2


class _InProcessClient:
    """Minimal sync facade over the ASGI app; one event loop per request."""

    base_url = "http://jordantrack.internal"

    def request(self, method: str, url: str, **kwargs) -> httpx.Response:
        import asyncio

        from .service import app

        async def go() -> httpx.Response:
            transport = httpx.ASGITransport(app=app)
            async with httpx.AsyncClient(transport=transport,
                                         base_url=self.base_url,
                                         timeout=None) as client:
                return await client.request(method, url, **kwargs)

        return asyncio.run(go())

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


def _client(server: str | None):
    if server:
        return httpx.Client(base_url=server, timeout=None)
    return _InProcessClient()


def _fail_config(message: str) -> int:
    print(f"config error: {message}", file=sys.stderr)
    return EXIT_CONFIG


def _request(client: httpx.Client, method: str, url: str, **kwargs):
    response = client.request(method, url, **kwargs)
    if response.status_code in (404, 422, 400):
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        raise SystemExit(_fail_config(str(detail)))
    response.raise_for_status()
    return response.json()


def _output_dir(args) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get("JORDANTRACK_OUTPUT_DIR", "out"))


def _load_request_dict(args, client) -> dict:
    if args.preset:
        return _request(client, "GET", f"/presets/{args.preset}")
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise SystemExit(_fail_config(f"config file not found: {path}"))
        try:
            return json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise SystemExit(_fail_config(f"bad config file: {exc}"))
    raise SystemExit(_fail_config("run needs --preset or --config"))


def _apply_overrides(req: dict, args) -> dict:
    if args.trials is not None:
        req["trials"] = args.trials
    if args.seed is not None:
        req["master_seed"] = args.seed
    if args.p is not None:
        req["p"] = args.p
    if args.d is not None:
        req.setdefault("tree", {})["d"] = args.d
    if args.steps is not None:
        req.setdefault("stop", {})["max_steps"] = args.steps
    if args.nodes is not None:
        req.setdefault("stop", {})["max_nodes"] = args.nodes
    if args.engine is not None:
        req["engine"] = args.engine
    if args.workers is not None:
        req["workers"] = args.workers
    if args.tail_window is not None:
        req["tail_window"] = args.tail_window
    if args.kinds is not None:
        req["center_kinds"] = args.kinds.split(",")
    if args.verify:
        req["verify"] = True
    return req


def _write_run_outputs(out: Path, payload: dict) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    stamp = datetime.now(timezone.utc).isoformat()
    written = []
    for kind, body in payload["csv"].items():
        path = out / f"trace_{kind}.csv"
        path.write_text(f"# generated_at={stamp}\n" + body)
        written.append(path)
    summary_path = out / "summary.json"
    summary_path.write_text(json.dumps(payload["summary"], indent=2, sort_keys=True) + "\n")
    written.append(summary_path)
    return written


def cmd_run(args) -> int:
    with _client(args.server) as client:
        req = _apply_overrides(_load_request_dict(args, client), args)
        payload = _request(client, "POST", "/experiments/run", json=req)
    written = _write_run_outputs(_output_dir(args), payload)
    summary = payload["summary"]
    print(f"model={summary['config']['model']} trials={summary['trials']} "
          f"dead={summary['dead_runs']} truncated={summary['truncated_runs']} "
          f"verdict_failures={summary['verdict_failures']}")
    for kind, agg in summary["per_kind"].items():
        print(f"  [{kind}] tail_stable(survivors)={agg['tail_stable_fraction_survivors']} "
              f"median_max_dist={agg['median_max_dist']} "
              f"mean_changes={agg['mean_changes']:.3f}")
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def cmd_preset(args) -> int:
    with _client(args.server) as client:
        if args.list or not args.name:
            payload = _request(client, "GET", "/presets")
            for name in payload["presets"]:
                print(name)
            return EXIT_OK
        payload = _request(client, "GET", f"/presets/{args.name}")
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_verify(args) -> int:
    with _client(args.server) as client:
        payload = _request(client, "POST", "/verify",
                           json={"seeds": args.seeds,
                                 "inject_fault": args.inject_fault})
    print(f"checks={payload['checks']} "
          f"oracle_observations={payload['oracle_observations']} "
          f"failures={len(payload['failures'])}")
    for f in payload["failures"][:50]:
        print(f"  FAIL clause={f['clause']} model={f.get('model')} "
              f"seed={f.get('seed')} obs={f.get('obs_index')}")
    if args.manifest:
        Path(args.manifest).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        print(f"wrote {args.manifest}")
    return EXIT_OK if payload["passed"] else EXIT_INVARIANT


def cmd_gamma(args) -> int:
    with _client(args.server) as client:
        payload = _request(client, "GET", "/analysis/gamma", params={"d": args.d})
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_front_speed(args) -> int:
    with _client(args.server) as client:
        payload = _request(client, "POST", "/analysis/front-speed",
                           json={"d": args.d, "n_lo": args.n_lo, "n_hi": args.n_hi,
                                 "trials": args.trials, "master_seed": args.seed})
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import app
    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jordantrack",
        description="Jordan-center tracking for infection-grown random trees")
    parser.add_argument("--server", default=None,
                        help="base URL of a running service (default: in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment and write traces")
    p_run.add_argument("--preset", help="preset name (see `preset --list`)")
    p_run.add_argument("--config", help="experiment config JSON file")
    p_run.add_argument("--trials", type=int)
    p_run.add_argument("--seed", type=int, help="master seed override")
    p_run.add_argument("--p", type=float)
    p_run.add_argument("--d", type=int)
    p_run.add_argument("--steps", type=int, help="stop after this many steps")
    p_run.add_argument("--nodes", type=int, help="stop at this many nodes")
    p_run.add_argument("--engine", choices=["auto", "arena", "condensed"])
    p_run.add_argument("--workers", type=int)
    p_run.add_argument("--tail-window", type=int, dest="tail_window")
    p_run.add_argument("--kinds", help="comma-separated center kinds")
    p_run.add_argument("--verify", action="store_true",
                       help="run movement verdicts inline")
    p_run.add_argument("--out", help="output directory")
    p_run.set_defaults(func=cmd_run)

    p_preset = sub.add_parser("preset", help="show a preset configuration")
    p_preset.add_argument("name", nargs="?")
    p_preset.add_argument("--list", action="store_true")
    p_preset.set_defaults(func=cmd_preset)

    p_verify = sub.add_parser("verify", help="run the invariant suite")
    p_verify.add_argument("--seeds", type=int, default=50)
    p_verify.add_argument("--inject-fault", action="store_true",
                          dest="inject_fault",
                          help="force the tracker to skip a movement; the "
                               "suite must catch it")
    p_verify.add_argument("--manifest", help="write the failure manifest JSON here")
    p_verify.set_defaults(func=cmd_verify)

    p_gamma = sub.add_parser("gamma", help="first-passage time constant")
    p_gamma.add_argument("--d", type=int, default=4)
    p_gamma.set_defaults(func=cmd_gamma)

    p_front = sub.add_parser("front-speed", help="empirical front speed vs gamma")
    p_front.add_argument("--d", type=int, default=4)
    p_front.add_argument("--n-lo", type=int, default=10, dest="n_lo")
    p_front.add_argument("--n-hi", type=int, default=30, dest="n_hi")
    p_front.add_argument("--trials", type=int, default=20)
    p_front.add_argument("--seed", type=int, default=0)
    p_front.set_defaults(func=cmd_front_speed)

    p_serve = sub.add_parser("serve", help="start the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    except httpx.HTTPError as exc:
        print(f"service error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
