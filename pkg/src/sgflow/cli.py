"""Command-line experiment runner.

Every run resolves a :class:`RunConfig`, writes it as ``config.json`` into
its output directory together with the results, and finishes with
``manifest.json`` listing each file and its SHA-256 hash.  Outputs carry no
timestamps, so a rerun of the same config reproduces them byte for byte.

Exit codes:
  0  success
  1  ``verify`` found a failing acceptance criterion
  2  usage or configuration error (including an empty config file)
  3  numerical divergence (Picard iteration did not converge)
  4  other numerical failure (kernel construction, window too small, ...)
"""
import argparse
import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
ENV_OUT = "SGFLOW_OUT"
EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_DIVERGED, EXIT_NUMERIC = 0, 1, 2, 3, 4
SUBCOMMANDS = ("kernel", "picard", "oracle", "norms", "gallery", "selfsim", "spde", "verify")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Resolved parameters of one run; unknown keys are rejected on load."""
    subcommand: str
    # kernel
    z_max: float = 36.0
    dz: float = 1.0 / 256.0
    quad_tol: float = 1e-12
    # field
    dim: int = 1
    n: int = 512
    L: float = 2 * math.pi
    W: float = None
    m: int = None
    init: str = "sine:0.01,1"
    # solver
    R: float = 1.0
    T: float = 1.0
    tol: float = 1e-12
    max_iter: int = 50
    J: int = 64
    scheme: str = "etdrk2"
    steps: int = 1000
    # noise
    gamma: float = 0.0
    sigma0: float = 0.01
    cutoff: float = 8.0
    paths: int = 10
    seed: int = 0
    mode: str = "mild_direct"
    # norm scans
    flavor: str = "X"
    levels: int = 40
    x_stride: int = 1
    Rs: list = dc_field(default_factory=lambda: [2.0 ** -j for j in range(9)])
    times: list = dc_field(default_factory=lambda: [0.01, 0.16])
    criteria: list = dc_field(default_factory=list)
    out: str = None
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {self.subcommand!r}")
        if self.format_version != FORMAT_VERSION:
            raise ConfigError(f"unsupported format_version {self.format_version}")
        positive = ("z_max", "dz", "quad_tol", "n", "L", "R", "T", "tol", "max_iter", "J",
                    "steps", "cutoff", "paths", "levels", "x_stride")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.dim not in (1, 2):
            raise ConfigError("dim must be 1 or 2")
        if self.flavor not in ("X", "X0", "BMO"):
            raise ConfigError("flavor must be X, X0 or BMO")
        if self.mode not in ("mild_direct", "random_pde"):
            raise ConfigError("mode must be mild_direct or random_pde")
        if self.scheme not in ("etdrk2", "ifrk2"):
            raise ConfigError("scheme must be etdrk2 or ifrk2")
        if any(not r > 0 for r in self.Rs):
            raise ConfigError("Rs must be positive")

    def to_json(self):
        return dataclasses.asdict(self)

    def dumps(self):
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        names = {f.name: f for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - set(names))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        if "subcommand" not in data:
            raise ConfigError("config needs a subcommand")
        clean = {}
        for key, value in data.items():
            clean[key] = _coerce(key, value, cls)
        return cls(**clean)

    @classmethod
    def load(cls, path):
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        if not text.strip():
            raise ConfigError(f"config file {path} is empty")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_json(data)


def _coerce(key, value, cls):
    default = next(f for f in dataclasses.fields(cls) if f.name == key)
    proto = default.default
    if default.default_factory is not dataclasses.MISSING:
        proto = default.default_factory()
    if value is None or proto is None or key == "subcommand":
        return value
    try:
        if isinstance(proto, bool):
            return bool(value)
        if isinstance(proto, int):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if isinstance(proto, float):
            return float(value)
        if isinstance(proto, list):
            return [type(proto[0])(v) if proto else v for v in value]
        return type(proto)(value)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {key}: {value!r}") from None


# ------------------------------------------------------------------ output

class RunDir:
    """Output directory that records every file it writes."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.mkdir(parents=True, exist_ok=True)
        self.files = []

    def write_text(self, name, text):
        p = self.path / name
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
        self.files.append(p)
        return p

    def write_json(self, name, obj):
        return self.write_text(name, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")

    def write_csv(self, name, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])
        return self.write_text(name, buf.getvalue())

    def add(self, paths):
        self.files.extend(Path(p) for p in paths)

    def finish(self):
        entries = []
        for p in sorted(set(self.files)):
            digest = hashlib.sha256(p.read_bytes()).hexdigest()
            entries.append({"file": p.relative_to(self.path).as_posix(), "sha256": digest,
                            "bytes": p.stat().st_size})
        manifest = {"format_version": FORMAT_VERSION, "files": entries}
        (self.path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return manifest


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def default_out_root():
    return Path(os.environ.get(ENV_OUT, "sgflow_out"))


# ------------------------------------------------------------- subcommands

def _table(cfg):
    from . import kernel as K
    if cfg.dim == 1 and (cfg.z_max, cfg.dz, cfg.quad_tol) == (36.0, 1.0 / 256.0, 1e-12):
        return K.default_table(1)
    return K.build_kernel(cfg.dim, z_max=cfg.z_max, dz=cfg.dz, quad_tol=cfg.quad_tol)


def _torus_init(cfg):
    """``square:a`` or a torus gallery item on the configured box."""
    from . import gallery as G
    from . import solver as S
    kind, _, rest = cfg.init.partition(":")
    if kind == "square":
        return S.square_wave(float(rest or 0.1), cfg.n, cfg.L)
    spec = G.parse_item(cfg.init)
    if spec.domain != "torus":
        raise ConfigError(f"init {cfg.init!r} is not torus data; use sine, hhalf or square")
    return G.make(dataclasses.replace(spec, n=cfg.n, L=cfg.L))


def run_kernel(cfg, out):
    from . import kernel as K
    table = _table(cfg)
    out.add(K.save_table(table, out.path / "kernel"))
    out.write_json("constants.json", dataclasses.asdict(K.kernel_constants(table)))


def run_picard(cfg, out):
    from . import field as F
    from . import solver as S
    h0 = _torus_init(cfg)
    tr = S.picard_solve(h0, cfg.R, max_iter=cfg.max_iter, tol=cfg.tol, J=cfg.J)
    info = tr.provenance["picard"]
    d = info["deltas"]
    report = dict(info, ratios=[b / a for a, b in zip(d, d[1:])], R=cfg.R, J=cfg.J,
                  monotone=all(b < a for a, b in zip(d[1:], d[2:])))
    out.write_json("convergence.json", report)
    _snapshots(out, tr)


def run_oracle(cfg, out):
    from . import solver as S
    h0 = _torus_init(cfg)
    tr = S.reference_solve(h0, cfg.T, cfg.steps, scheme=cfg.scheme)
    out.write_json("oracle.json", tr.provenance["oracle"])
    _snapshots(out, tr)


def _snapshots(out, tr, count=4):
    from . import field as F
    picks = sorted({int(round(i)) for i in np.linspace(0, len(tr) - 1, count)})
    rows = []
    for i in picks:
        name = f"snapshots/t{i:04d}"
        (out.path / "snapshots").mkdir(exist_ok=True)
        out.add(F.save_field(tr.fields[i], out.path / name, time=float(tr.t_grid[i])))
        rows.append([i, float(tr.t_grid[i]), name])
    out.write_csv("snapshots.csv", ["index", "t", "file"], rows)


def _field_for_norms(cfg, R):
    from . import gallery as G
    kind = cfg.init.partition(":")[0]
    if kind == "square":
        return _torus_init(cfg)
    spec = G.parse_item(cfg.init)
    if spec.domain == "torus":
        spec = dataclasses.replace(spec, n=cfg.n, L=cfg.L)
    return G.make(spec, R)


def run_norms(cfg, out):
    from . import norms as N
    table = _table(cfg)
    reports = []
    for R in cfg.Rs:
        f = _field_for_norms(cfg, R)
        x_grid = None
        if cfg.x_stride > 1:
            x_grid = np.ravel(f.grid())[::cfg.x_stride]
        if cfg.flavor == "BMO":
            rep = N.bmo_carleson(f, table, R, x_grid=x_grid, levels=cfg.levels)
        else:
            rep = N.b_norm(f, R, table, flavor=cfg.flavor, levels=cfg.levels, x_grid=x_grid)
        reports.append(rep)
    out.write_text("norms.csv", N.reports_to_csv(reports))
    out.write_text("norms.json", N.reports_to_json(reports))


def run_gallery(cfg, out):
    from . import gallery as G
    spec = G.parse_item(cfg.init)
    if spec.domain == "torus":
        spec = dataclasses.replace(spec, n=cfg.n, L=cfg.L)
    Rs = sorted(cfg.Rs, reverse=True)
    report = G.membership_report(spec, Rs, _table(cfg))
    out.write_json("membership.json", report)
    out.write_csv("profile.csv", ["R", "value"], report["profile"])


def run_selfsim(cfg, out):
    from . import solver as S
    kind, _, rest = cfg.init.partition(":")
    a = float(rest) if kind == "square" and rest else 0.1
    h0 = S.square_wave(a, cfg.n, cfg.L)
    T = max(cfg.times)
    tr = S.picard_solve(h0, T ** 0.25, max_iter=cfg.max_iter, tol=cfg.tol, J=cfg.J)
    pairs = [(t, T) for t in sorted(cfg.times) if t != T]
    res = S.self_similar_check(tr, pairs)
    out.write_json("selfsim.json", {"a": a, "collapse_error": res.collapse_error,
                                    "profile_residual": res.profile_residual,
                                    "times": res.times,
                                    "picard_iterations": tr.provenance["picard"]["iterations"]})
    header = ["z"] + [f"t={t!r}" for t in res.times]
    out.write_csv("profiles.csv", header, np.column_stack([res.z, *res.profiles]).tolist())


def run_spde(cfg, out):
    from . import field as F
    from . import norms as N
    from . import stochastic as St
    h0 = _torus_init(cfg)
    noise = St.power_law_noise(1, cfg.n, cfg.L, cfg.sigma0, cfg.gamma, cfg.cutoff, seed=cfg.seed)
    Rs = sorted(cfg.Rs, reverse=True)
    rows, table = [], {}
    for p in range(cfg.paths):
        sp = noise.with_stream(stream_id=p)
        tr = St.spde_solve(h0, sp, cfg.R, cfg.mode, J=cfg.J, max_iter=cfg.max_iter, tol=cfg.tol)
        zprof = St.z_regularity_profile(sp, Rs, levels=cfg.levels)
        for R, z in zprof:
            h = N.x_norm(tr, R).value if R <= cfg.R else math.nan
            rows.append([p, R, h, z])
            table.setdefault(R, []).append((h, z))
    out.write_csv("paths.csv", ["path", "R", "h_X_R", "Z_X_R"], rows)
    ens = []
    for R in Rs:
        arr = np.array(table[R])
        ens.append([R, arr[:, 0].mean(), arr[:, 0].std(ddof=1) if len(arr) > 1 else 0.0,
                    arr[:, 1].mean(), arr[:, 1].std(ddof=1) if len(arr) > 1 else 0.0])
    out.write_csv("ensemble.csv", ["R", "h_mean", "h_std", "Z_mean", "Z_std"], ens)


def run_verify(cfg, out):
    from . import acceptance as A
    results = A.run_all(cfg.criteria or None, stream=sys.stdout)
    out.write_json("acceptance.json", [{"criterion": r.number, "name": r.name, "passed": r.passed,
                                        "budget_s": r.budget, "details": r.details}
                                       for r in results])
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


RUNNERS = {"kernel": run_kernel, "picard": run_picard, "oracle": run_oracle, "norms": run_norms,
           "gallery": run_gallery, "selfsim": run_selfsim, "spde": run_spde, "verify": run_verify}


# ----------------------------------------------------------------- parsing

def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


# flag name -> (config key, type, help)
_FLAGS = {
    "kernel": [("--z-max", "z_max", float, "kernel table half-width"),
               ("--dz", "dz", float, "kernel table step"),
               ("--quad-tol", "quad_tol", float, "quadrature tolerance"),
               ("--dim", "dim", int, "space dimension (1 or 2)")],
    "picard": [("--init", "init", str, "initial data: sine:A,k, hhalf:seed,eps or square:a"),
               ("--R", "R", float, "horizon scale; solves on (0, R^4]"),
               ("--tol", "tol", float, "Picard tolerance in the X_R distance"),
               ("--max-iter", "max_iter", int, "iteration cap"),
               ("--J", "J", int, "number of graded time levels"),
               ("--n", "n", int, "grid points per axis"),
               ("--L", "L", float, "box length")],
    "oracle": [("--init", "init", str, "initial data as for picard"),
               ("--T", "T", float, "final time"),
               ("--steps", "steps", int, "uniform time steps"),
               ("--scheme", "scheme", str, "etdrk2 or ifrk2"),
               ("--n", "n", int, "grid points per axis"),
               ("--L", "L", float, "box length")],
    "norms": [("--init", "init", str, "gallery item, e.g. power:0.5, or square:a"),
              ("--Rs", "Rs", _floats, "comma-separated scales"),
              ("--flavor", "flavor", str, "X, X0 or BMO"),
              ("--levels", "levels", int, "geometric time levels per scan"),
              ("--x-stride", "x_stride", int, "subsample the space grid for ball centres"),
              ("--n", "n", int, "grid points for torus items"),
              ("--L", "L", float, "box length for torus items")],
    "gallery": [("--item", "init", str, "gallery item, e.g. indicator or power:0.5"),
                ("--Rs", "Rs", _floats, "comma-separated decreasing scales"),
                ("--n", "n", int, "grid points for torus items"),
                ("--L", "L", float, "box length for torus items")],
    "selfsim": [("--init", "init", str, "square:a step data"),
                ("--times", "times", _floats, "comparison times; the largest is the horizon"),
                ("--tol", "tol", float, "Picard tolerance"),
                ("--max-iter", "max_iter", int, "iteration cap"),
                ("--J", "J", int, "graded time levels"),
                ("--n", "n", int, "grid points"),
                ("--L", "L", float, "box length")],
    "spde": [("--init", "init", str, "initial data as for picard"),
             ("--sigma-decay", "gamma", float, "noise amplitude decay exponent gamma"),
             ("--sigma0", "sigma0", float, "noise amplitude"),
             ("--cutoff", "cutoff", float, "largest forced wavenumber"),
             ("--paths", "paths", int, "number of noise paths"),
             ("--seed", "seed", int, "Philox seed"),
             ("--mode", "mode", str, "mild_direct or random_pde"),
             ("--R", "R", float, "horizon scale"),
             ("--Rs", "Rs", _floats, "scales for the norm profiles"),
             ("--levels", "levels", int, "time levels for the noise profile"),
             ("--J", "J", int, "graded time levels"),
             ("--tol", "tol", float, "Picard tolerance"),
             ("--n", "n", int, "grid points"),
             ("--L", "L", float, "box length")],
    "verify": [("--criteria", "criteria", _ints, "comma-separated criterion numbers (default all)")],
}

_HELP = {
    "kernel": "tabulate the biharmonic heat kernel and its constants",
    "picard": "mild solution by Picard iteration with a convergence report",
    "oracle": "reference time-stepping solution",
    "norms": "scale-critical norms of initial data",
    "gallery": "vanishing-norm membership report for a gallery item",
    "selfsim": "self-similar collapse of step data",
    "spde": "noise-forced runs with per-path and ensemble norm profiles",
    "verify": "run the acceptance suite",
}


_SUB_DEFAULTS = {
    "norms": {"init": "indicator"},
    "gallery": {"init": "indicator"},
    "selfsim": {"init": "square:0.1", "n": 4096, "L": 64.0, "tol": 1e-10},
    "spde": {"n": 64, "Rs": [1.0, 0.5, 0.25, 0.125]},
}


def build_parser():
    defaults = RunConfig("verify")
    epilog = (f"Outputs go to --out, else ${ENV_OUT}/<subcommand>, else ./sgflow_out/<subcommand>. "
              "Exit codes: 0 ok, 1 acceptance failure, 2 usage or config error, "
              "3 Picard divergence, 4 other numerical failure.")
    p = _Parser(prog="sgflow", description="Surface-growth mild solutions and critical norms.",
                epilog=epilog)
    sub = p.add_subparsers(dest="subcommand", parser_class=_Parser)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, help=_HELP[name], description=_HELP[name], epilog=epilog)
        sp.add_argument("--config", help="JSON RunConfig; explicit flags override it")
        sp.add_argument("--out", help="output directory")
        for flag, key, typ, text in _FLAGS[name]:
            d = _SUB_DEFAULTS.get(name, {}).get(key, getattr(defaults, key))
            sp.add_argument(flag, dest=key, type=typ, default=None,
                            help=f"{text} (default: {d})")
    return p


def resolve_config(args):
    """Config file (if any) under explicit flags, over per-subcommand defaults."""
    base = {"subcommand": args.subcommand, **_SUB_DEFAULTS.get(args.subcommand, {})}
    if args.config is not None:
        loaded = RunConfig.load(args.config)
        if loaded.subcommand != args.subcommand:
            raise ConfigError(f"config is for {loaded.subcommand!r}, not {args.subcommand!r}")
        base = loaded.to_json()
    for _, key, _, _ in _FLAGS[args.subcommand]:
        v = getattr(args, key)
        if v is not None:
            base[key] = v
    if args.out is not None:
        base["out"] = args.out
    return RunConfig.from_json(base)


def _report_error(kind, message, code, out=None, payload=None):
    doc = {"error": kind, "message": message, "exit_code": code}
    if payload:
        doc.update(payload)
    text = json.dumps(_jsonable(doc), sort_keys=True)
    print(text, file=sys.stderr)
    if out is not None:
        out.write_text("error.json", text + "\n")
        out.finish()
    return code


def main(argv=None):
    from . import field as F
    from . import kernel as K
    from . import solver as S
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.subcommand is None:
            raise ConfigError("a subcommand is required; see sgflow --help")
        cfg = resolve_config(args)
    except ConfigError as exc:
        return _report_error("ConfigError", str(exc), EXIT_USAGE)
    target = Path(cfg.out) if cfg.out else default_out_root() / cfg.subcommand
    try:
        out = RunDir(target)
    except OSError as exc:
        return _report_error("ConfigError", f"cannot create {target}: {exc}", EXIT_USAGE)
    out.write_text("config.json", cfg.dumps())
    try:
        code = RUNNERS[cfg.subcommand](cfg, out) or EXIT_OK
    except S.PicardDivergenceError as exc:
        return _report_error("PicardDivergenceError", str(exc), EXIT_DIVERGED, out,
                             {"deltas": exc.deltas})
    except (ConfigError, ValueError) as exc:
        numeric = isinstance(exc, (K.KernelError, F.WindowTooSmallError, S.SolverError))
        kind = type(exc).__name__
        return _report_error(kind, str(exc), EXIT_NUMERIC if numeric else EXIT_USAGE, out)
    out.finish()
    print(str(target))
    return code


if __name__ == "__main__":
    sys.exit(main())
