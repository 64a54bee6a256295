"""Command line client: runs handlers in process, or against a remote service."""

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import CollapseLabError
from .service import handlers
from .service.schemas import (
    BetelRequest,
    CollapseRequest,
    CurvatureRequest,
    GeeRequest,
    GmmRequest,
    ProjectRequest,
    SweepRequest,
)

_CSV_COLUMNS = (
    "n",
    "m",
    "tau",
    "lambda_min",
    "tv_exact",
    "tv_gaussian",
    "bound",
    "mass_out",
    "rho_ratio",
)

_ENDPOINTS = {
    "project": (handlers.handle_project, ProjectRequest),
    "curvature": (handlers.handle_curvature, CurvatureRequest),
    "collapse": (handlers.handle_collapse, CollapseRequest),
    "betel": (handlers.handle_betel, BetelRequest),
    "gmm": (handlers.handle_gmm, GmmRequest),
    "gee": (handlers.handle_gee, GeeRequest),
    "sweep": (handlers.handle_sweep, SweepRequest),
}


class _CommandError(Exception):
    """Domain or transport failure carrying the error name and detail."""

    def __init__(self, name: str, detail: str):
        self.name = name
        self.detail = detail
        super().__init__(f"{name}: {detail}")


class _Parser(argparse.ArgumentParser):
    # usage problems must exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _call(args, endpoint: str, payload: dict) -> dict:
    server = args.server or os.environ.get("COLLAPSE_LAB_SERVER")
    if server:
        import httpx

        try:
            resp = httpx.post(f"{server.rstrip('/')}/{endpoint}", json=payload, timeout=600.0)
        except httpx.HTTPError as exc:
            raise _CommandError("TransportError", str(exc))
        try:
            body = resp.json()
        except ValueError:
            raise _CommandError("TransportError", f"HTTP {resp.status_code}: {resp.text[:200]}")
        if resp.status_code != 200:
            if isinstance(body, dict) and "error" in body:
                raise _CommandError(body["error"], str(body.get("detail", "")))
            raise _CommandError("RequestValidationError", json.dumps(body))
        return body
    handler, request_cls = _ENDPOINTS[endpoint]
    try:
        request = request_cls.model_validate(payload)
    except ValueError as exc:
        raise _CommandError("RequestValidationError", str(exc))
    try:
        return handler(request).model_dump(mode="json")
    except CollapseLabError as exc:
        raise _CommandError(type(exc).__name__, str(exc))


def _load_json(source):
    if isinstance(source, (dict, list)):
        return source
    return json.loads(Path(source).read_text())


def _read_symbols(source) -> list:
    """Data file: one integer symbol per line; blanks and # comments skipped."""
    if isinstance(source, list):
        return [int(v) for v in source]
    out = []
    for line in Path(source).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        out.append(int(line))
    return out


def _merge_config(args, keys):
    if getattr(args, "config", None) is None:
        return
    cfg = _load_json(args.config)
    if not isinstance(cfg, dict):
        raise _CommandError("ConfigError", "--config must hold a JSON object")
    unknown = sorted(set(cfg) - set(keys))
    if unknown:
        raise _CommandError("ConfigError", f"unknown config keys: {', '.join(unknown)}")
    for key in keys:
        if key in cfg and getattr(args, key, None) is None:
            setattr(args, key, cfg[key])


def _require(args, key: str):
    value = getattr(args, key, None)
    if value is None:
        raise _CommandError("ConfigError", f"missing required option --{key.replace('_', '-')}")
    return value


def _is_number(value) -> bool:
    try:
        float(value)
    except (TypeError, ValueError):
        return False
    return True


def _fmt(value) -> str:
    if value is None:
        return "inf"
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _emit_kv(payload: dict):
    print("key,value")
    for key, value in payload.items():
        if isinstance(value, list):
            if value and isinstance(value[0], list):
                text = "; ".join(" ".join(_fmt(v) for v in row) for row in value)
            else:
                text = " ".join(_fmt(v) for v in value)
        else:
            text = _fmt(value)
        print(f"{key},{text}")


def _emit(args, payload: dict, default: str = "json"):
    fmt = args.format or default
    if fmt == "json":
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        _emit_kv(payload)


def _cmd_project(args) -> int:
    _merge_config(args, ("model", "tol", "max_iter"))
    payload = {"model": _load_json(_require(args, "model"))}
    if args.tol is not None:
        payload["tol"] = args.tol
    if args.max_iter is not None:
        payload["max_iter"] = args.max_iter
    _emit(args, _call(args, "project", payload))
    return 0


def _cmd_curvature(args) -> int:
    _merge_config(args, ("model", "plan"))
    payload = {"model": _load_json(_require(args, "model"))}
    if args.plan is not None:
        m, epsilon = args.plan
        payload["plan_m"] = int(m)
        payload["plan_epsilon"] = float(epsilon)
    _emit(args, _call(args, "curvature", payload))
    return 0


def _cmd_collapse(args) -> int:
    _merge_config(args, ("model", "n", "m", "tau", "cgeo", "cgeo2"))
    model = _load_json(_require(args, "model"))
    ns = _require(args, "n")
    ms = _require(args, "m")
    rows, skipped = [], []
    for n in ns:
        for m in ms:
            payload = {"model": model, "n": int(n), "m": int(m)}
            if args.tau is not None:
                payload["tau"] = args.tau
            if args.cgeo is not None:
                payload["C_geo"] = args.cgeo
            if args.cgeo2 is not None:
                payload["C_geo_prime"] = args.cgeo2
            try:
                rows.append(_call(args, "collapse", payload))
            except _CommandError as exc:
                if exc.name in ("GuardError", "EmptyFeasibleSetError"):
                    skipped.append({"n": int(n), "m": int(m), "reason": str(exc)})
                    print(f"skipped n={n} m={m}: {exc}", file=sys.stderr)
                    continue
                raise
    fmt = args.format or "csv"
    if fmt == "json":
        print(json.dumps({"rows": rows, "skipped": skipped}, indent=2, sort_keys=True))
    else:
        print(",".join(_CSV_COLUMNS))
        for row in rows:
            print(",".join(_fmt(row[col]) for col in _CSV_COLUMNS))
    return 2 if skipped else 0


def _cmd_betel(args) -> int:
    _merge_config(args, ("model", "grid", "data", "variant", "prior"))
    grid = _load_json(_require(args, "grid"))
    if not isinstance(grid, dict) or "theta" not in grid:
        raise _CommandError("ConfigError", 'grid JSON must be an object with a "theta" list')
    payload = {
        "model": _load_json(_require(args, "model")),
        "theta_grid": grid["theta"],
        "alphas": grid.get("alphas"),
        "data": _read_symbols(_require(args, "data")),
        "variant": args.variant or "canonical",
    }
    if args.prior is not None:
        payload["prior"] = args.prior
    resp = _call(args, "betel", payload)
    fmt = args.format or "csv"
    if fmt == "json":
        print(json.dumps(resp, indent=2, sort_keys=True))
        return 0
    width = len(resp["theta_grid"][0]) if resp["theta_grid"] else 1
    header = [f"theta_{j}" for j in range(width)] + ["log_posterior", "posterior"]
    print(",".join(header))
    for theta, lp, post in zip(resp["theta_grid"], resp["log_posterior"], resp["posterior"]):
        cells = [_fmt(t) for t in theta]
        cells.append("-inf" if lp is None else _fmt(lp))
        cells.append(_fmt(post))
        print(",".join(cells))
    return 0


def _cmd_gmm(args) -> int:
    _merge_config(args, ("model", "data", "tangent_kind"))
    payload = {
        "model": _load_json(_require(args, "model")),
        "data": _read_symbols(_require(args, "data")),
        "tangent_kind": args.tangent_kind or "simplex_tangent",
    }
    _emit(args, _call(args, "gmm", payload))
    return 0


def _cmd_gee(args) -> int:
    _merge_config(args, ("clusters", "n"))
    payload = {"clusters": _load_json(_require(args, "clusters"))}
    if args.n is not None:
        payload["n"] = int(args.n)
    _emit(args, _call(args, "gee", payload))
    return 0


def _cmd_sweep(args) -> int:
    _merge_config(
        args,
        ("model", "n_grid", "m_grid", "tau_policy", "constants", "seeds", "outputs", "threads"),
    )
    payload = {
        "model": _load_json(_require(args, "model")),
        "n_grid": _require(args, "n_grid"),
        "m_grid": _require(args, "m_grid"),
    }
    if args.tau_policy is not None:
        try:
            payload["tau_policy"] = float(args.tau_policy)
        except (TypeError, ValueError):
            payload["tau_policy"] = args.tau_policy
    if args.constants is not None:
        constants = args.constants
        if isinstance(constants, list) and len(constants) == 1 and not _is_number(constants[0]):
            constants = constants[0]
        payload["constants"] = constants
    if args.seeds is not None:
        payload["seeds"] = args.seeds
    if args.threads is not None:
        payload["threads"] = int(args.threads)
    resp = _call(args, "sweep", payload)
    if args.outputs is not None:
        out_dir = Path(args.outputs)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "sweep.csv").write_text(resp["csv"])
        (out_dir / "summary.json").write_text(
            json.dumps(resp["summary"], indent=2, sort_keys=True) + "\n"
        )
    fmt = args.format or "json"
    if fmt == "csv":
        print(resp["csv"], end="")
    else:
        print(json.dumps(resp["summary"], indent=2, sort_keys=True))
    return int(resp["exit_code"])


def _cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("collapse_lab.service.app:app", host=args.host, port=args.port)
    return 0


def _add_common(sub, fmt_choices=("json", "csv")):
    sub.add_argument("--config", help="JSON file with defaults; explicit flags win")
    sub.add_argument("--format", choices=fmt_choices, default=None)
    sub.add_argument("--server", default=None, help="service URL (or COLLAPSE_LAB_SERVER)")


def _build_parser() -> _Parser:
    parser = _Parser(prog="collapse-lab", description=__doc__)
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("project", help="information projection of Q onto the constraints")
    p.add_argument("--model", help="model JSON file")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--max-iter", type=int, default=None, dest="max_iter")
    _add_common(p)
    p.set_defaults(func=_cmd_project)

    p = commands.add_parser("curvature", help="projected Hessian spectrum and window report")
    p.add_argument("--model")
    p.add_argument("--plan", nargs=2, metavar=("M", "EPSILON"), default=None)
    _add_common(p)
    p.set_defaults(func=_cmd_curvature)

    p = commands.add_parser("collapse", help="exact collapse diagnostics over (n, m) cells")
    p.add_argument("--model")
    p.add_argument("--n", action="append", type=int, default=None)
    p.add_argument("--m", action="append", type=int, default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--cgeo", type=float, default=None)
    p.add_argument("--cgeo2", type=float, default=None)
    _add_common(p)
    p.set_defaults(func=_cmd_collapse)

    p = commands.add_parser("betel", help="grid posterior over tilted models")
    p.add_argument("--model", help="template model JSON (alpha filled per grid point)")
    p.add_argument("--grid", help='JSON file {"theta": [...], "alphas": [[...]] optional}')
    p.add_argument("--data", help="data file, one symbol per line")
    p.add_argument("--variant", choices=("canonical", "as_printed"), default=None)
    p.add_argument("--prior", type=float, nargs="+", default=None)
    _add_common(p)
    p.set_defaults(func=_cmd_betel)

    p = commands.add_parser("gmm", help="optimal weight matrix and objective")
    p.add_argument("--model")
    p.add_argument("--data")
    p.add_argument(
        "--tangent-kind",
        dest="tangent_kind",
        choices=("simplex_tangent", "constraint_tangent"),
        default=None,
    )
    _add_common(p)
    p.set_defaults(func=_cmd_gmm)

    p = commands.add_parser("gee", help="Godambe information and sandwich covariance")
    p.add_argument("--clusters", help='JSON list of {"D","W","Sigma"} triples')
    p.add_argument("--n", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=_cmd_gee)

    p = commands.add_parser("sweep", help="full experiment grid, CSV plus JSON summary")
    p.add_argument("--model")
    p.add_argument("--n-grid", dest="n_grid", type=int, nargs="+", default=None)
    p.add_argument("--m-grid", dest="m_grid", type=int, nargs="+", default=None)
    p.add_argument("--tau-policy", dest="tau_policy", default=None)
    p.add_argument("--constants", nargs="+", default=None)
    p.add_argument("--seeds", type=int, nargs="+", default=None)
    p.add_argument("--outputs", default=None, help="directory for sweep.csv and summary.json")
    p.add_argument("--threads", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=_cmd_sweep)

    p = commands.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else int(exc.code)
    try:
        return args.func(args)
    except _CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
