"""Command-line front end.

Exit codes: 0 success, 1 a suite or numerical procedure failed, 2 bad input or config.
Options may come from flags or from an INI file (``--config``) whose sections
are subcommand names; flags win. Unknown keys are rejected.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

from . import __version__
from .errors import DomainError, GibbskError, InputError, NumericError
from .geometry import (
    PolarizedModel,
    Potential,
    build_quadrature,
    conic_density,
    eta_form,
    random_family,
    uniform_density,
)
from .functionals import energy_E, functional_report, verify_mabuchi_ding
from .gibbs import draw_slater, divergence_scan, gamma_k_exact_p1, gamma_k_tail_estimate, partition_from_sample
from .harness import (
    seeded_family,
    suite_bergman,
    suite_identities,
    suite_legendre,
    suite_mabuchi_ding,
    suite_quantized_ding,
    suite_coercivity,
)
from .io import FUNCTIONAL_COLUMNS, QUANTIZED_DING_COLUMNS, SCAN_COLUMNS, dumps, emit_sweep, write_json
from .quantization import energy_Ek, gram_matrix, section_basis
from .toric import SURFACES, check_csck_criterion, find_m0, load_fan, parse_divisor, rational

SUITES = ("identities", "mabuchi_ding", "legendre", "quantized_ding", "bergman", "coercivity")


# ---------------------------------------------------------------------------
# option table


def _int(text) -> int:
    if isinstance(text, int):
        return text
    s = str(text).strip()
    try:
        return int(s)
    except ValueError:
        x = float(s)
        if not x.is_integer():
            raise ValueError(f"not an integer: {s!r}") from None
        return int(x)


def _float(text) -> float:
    x = float(Fraction(str(text).strip())) if "/" in str(text) else float(text)
    if not math.isfinite(x):
        raise ValueError(f"not a finite number: {text!r}")
    return x


def _list(conv):
    def parse(text):
        if isinstance(text, list):
            return text
        return [conv(t) for t in str(text).replace(",", " ").split()]

    return parse


@dataclass(frozen=True)
class Opt:
    name: str
    conv: Callable
    default: object = None
    lo: float | None = None
    hi: float | None = None
    help: str = ""
    choices: tuple | None = None


COMMON = [
    Opt("m", _int, 1, 1, 64, "degree of O(m) on P^1"),
    Opt("seed", _int, 0, 0, 2**64 - 1, "64-bit seed"),
    Opt("out", str, None, help="output path (stdout when omitted)"),
]
GRID = [
    Opt("n_polar", _int, 64, 2, 4096, "Gauss-Legendre nodes in cos(theta)"),
    Opt("n_azimuth", _int, 128, 2, 8192, "uniform azimuth nodes"),
    Opt("l_max", _int, 8, 1, 64, "degree of seeded potentials"),
]
DENSITY = [
    Opt("density", str, "uniform", choices=("uniform", "conic"), help="density f"),
    Opt("b", _float, 0.5, 1e-6, 1.0, "cone parameter"),
    Opt("cone_points", str, "0,0,1", help="cone points 'x,y,z;x,y,z'"),
]
MC = [Opt("samples", _int, 1_000_000, 1, 10**9, "Monte Carlo samples")]

COMMANDS: dict[str, list[Opt]] = {
    "functional-report": COMMON
    + GRID
    + DENSITY
    + [
        Opt("gamma", _float, 0.5, 1e-9, 1e6),
        Opt("tau", _float, 1.0, 1e-9, 1e6),
        Opt("potential", str, None, help="JSON potential file (seeded potential when omitted)"),
    ],
    "gram": COMMON + GRID + [Opt("k", _int, 1, 1, 4096), Opt("potential", str, None)],
    "partition": COMMON
    + DENSITY
    + MC
    + [Opt("k", _int, 1, 1, 64), Opt("gamma", _list(_float), [0.5], help="gamma value(s)"), Opt("csv", str, None)],
    "gamma-k": COMMON
    + DENSITY
    + MC
    + [Opt("k", _int, 1, 1, 64), Opt("method", str, "tail", choices=("tail", "exact", "both"))],
    "toric-check": [
        Opt("fan", str, None, help="fan file"),
        Opt("surface", str, None, choices=tuple(SURFACES)),
        Opt("L", str, "H", help="divisor, e.g. H, -K, O(1,1), '2D0+D1'"),
        Opt("gamma", str, "0"),
        Opt("b", str, None),
        Opt("D", str, None),
        Opt("out", str, None),
    ],
    "find-m0": [
        Opt("fan", str, None),
        Opt("surface", str, None, choices=tuple(SURFACES)),
        Opt("L", str, "H"),
        Opt("b", str, "1/2"),
        Opt("out", str, None),
    ],
    "verify": COMMON
    + GRID
    + [
        Opt("suite", str, "identities", choices=SUITES + ("all",)),
        Opt("cases", _int, None, 1, 100_000),
        Opt("samples", _int, 1_000_000, 1, 10**9),
        Opt("k", _int, 3, 1, 64),
        Opt("ks", _list(_int), [2, 3, 4]),
        Opt("tau", _float, 1.0, 1e-9, 1e6),
        Opt("gamma", _float, 0.5, 1e-9, 1e6),
    ]
    + DENSITY,
    "sweep": COMMON
    + GRID
    + DENSITY
    + [
        Opt("kind", str, "quantized_ding", choices=("quantized_ding", "gamma-scan", "bergman", "functionals")),
        Opt("samples", _int, 1_000_000, 1, 10**9),
        Opt("k", _list(_int), [3]),
        Opt("tau", _list(_float), [1.0]),
        Opt("gamma", _list(_float), [0.5]),
        Opt("seeds", _list(_int), [0]),
        Opt("cases", _int, 20, 1, 100_000),
    ],
}


@dataclass
class RunConfig:
    command: str
    values: dict = field(default_factory=dict)

    def __getattr__(self, name):
        try:
            return self.values[name]
        except KeyError:
            raise AttributeError(name) from None


class ConfigError(InputError):
    pass


def _key_line(path: Path, section: str, key: str) -> int | None:
    current = None
    for i, line in enumerate(path.read_text().splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
        elif current == section and s.split("=", 1)[0].split(":", 1)[0].strip().replace("-", "_") == key:
            return i
    return None


def read_config(path: str | Path, command: str) -> dict:
    """Values for ``command`` from an INI file.

    Every section must be a command name and every key must belong to that
    command; ``[DEFAULT]`` keys must belong to some command and apply where known.
    """
    p = Path(path)
    cp = configparser.ConfigParser(interpolation=None, default_section="DEFAULT")
    cp.optionxform = str
    try:
        cp.read_string(p.read_text(), source=str(p))
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"{p}: {exc}") from exc

    def reject(sec, k):
        line = _key_line(p, sec, k.replace("-", "_"))
        where = f"{p}:{line}" if line else str(p)
        raise ConfigError(f"{where}: unknown key '{k}' in [{sec}]")

    every = {o.name for opts in COMMANDS.values() for o in opts}
    defaults = dict(cp.defaults())
    for k in defaults:
        if k.replace("-", "_") not in every:
            reject("DEFAULT", k)
    for sec in cp.sections():
        if sec not in COMMANDS:
            raise ConfigError(f"{p}: unknown section [{sec}]")
        known = {o.name for o in COMMANDS[sec]}
        for k in cp[sec]:
            if k in defaults and cp[sec][k] == defaults[k]:
                continue
            if k.replace("-", "_") not in known:
                reject(sec, k)
    known = {o.name for o in COMMANDS[command]}
    out = {k.replace("-", "_"): v for k, v in defaults.items() if k.replace("-", "_") in known}
    if cp.has_section(command):
        out.update({k.replace("-", "_"): v for k, v in cp[command].items()})
    return out


def resolve(command: str, flags: dict, config: dict) -> RunConfig:
    vals = {}
    for opt in COMMANDS[command]:
        raw = flags.get(opt.name)
        src = "flag"
        if raw is None:
            raw, src = config.get(opt.name), "config"
        if raw is None:
            vals[opt.name] = opt.default
            continue
        try:
            v = opt.conv(raw)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"{opt.name} ({src}): {exc}") from exc
        for x in v if isinstance(v, list) else [v]:
            if opt.choices and x not in opt.choices:
                raise ConfigError(f"{opt.name} ({src}): {x!r} not one of {opt.choices}")
            if isinstance(x, (int, float)) and not isinstance(x, bool):
                if (opt.lo is not None and x < opt.lo) or (opt.hi is not None and x > opt.hi):
                    raise ConfigError(f"{opt.name} ({src}): {x} outside [{opt.lo}, {opt.hi}]")
        vals[opt.name] = v
    return RunConfig(command, vals)


# ---------------------------------------------------------------------------
# helpers


def _emit(cfg: RunConfig, payload: dict, summary: str):
    payload = {"provenance": {"version": __version__, "command": cfg.command, "config": cfg.values}, **payload}
    if cfg.out:
        write_json(payload, cfg.out)
        print(summary)
    else:
        sys.stdout.write(dumps(payload))


def _quadrature(cfg, model):
    return build_quadrature(cfg.n_polar, cfg.n_azimuth, model)


def _cone_points(text: str) -> list[list[float]]:
    try:
        pts = [[float(x) for x in chunk.split(",")] for chunk in text.split(";") if chunk.strip()]
    except ValueError as exc:
        raise ConfigError(f"cone_points: {exc}") from exc
    if not pts or any(len(p) != 3 for p in pts):
        raise ConfigError("cone_points: expected 'x,y,z;x,y,z'")
    return pts


def _density(cfg, q=None):
    if cfg.density == "uniform":
        return uniform_density(), None
    q = q or build_quadrature(64, 128, PolarizedModel(cfg.m))
    f = conic_density(_cone_points(cfg.cone_points), cfg.b, q)
    return f, eta_form(f.points, f.b, PolarizedModel(cfg.m)) if f.kind == "conic" else None


def _potential(cfg, model) -> Potential:
    if cfg.potential:
        try:
            return Potential.from_dict(json.loads(Path(cfg.potential).read_text()))
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"potential: {exc}") from exc
    return random_family(cfg.seed, 1, cfg.l_max, model)[0]


def _surface(cfg):
    if bool(cfg.fan) == bool(cfg.surface):
        raise ConfigError("give exactly one of --fan or --surface")
    if cfg.fan:
        try:
            return load_fan(cfg.fan)
        except OSError as exc:
            raise ConfigError(f"fan: {exc}") from exc
    return SURFACES[cfg.surface](), {}


# ---------------------------------------------------------------------------
# commands


def cmd_functional_report(cfg: RunConfig) -> int:
    model = PolarizedModel(cfg.m)
    q = _quadrature(cfg, model)
    f, eta = _density(cfg, q)
    phi = _potential(cfg, model)
    rep = functional_report(phi, cfg.gamma, cfg.tau, f, eta, q, model)
    _emit(cfg, {"potential": phi.to_dict(), "report": rep}, f"functional-report: E={rep.E:.6g} J={rep.J:.6g} M={rep.M:.6g}")
    return 0


def cmd_gram(cfg: RunConfig) -> int:
    model = PolarizedModel(cfg.m)
    q = _quadrature(cfg, model)
    phi = _potential(cfg, model)
    basis = section_basis(cfg.m, cfg.k)
    H = gram_matrix(phi, None, basis, q)
    Ek = energy_Ek(phi, basis, q, model)
    _emit(cfg, {"gram": H, "E_k": Ek, "E": energy_E(phi, q, model)}, f"gram: N={H.N} E_k={Ek:.12g}")
    return 0


def cmd_partition(cfg: RunConfig) -> int:
    f, _ = _density(cfg)
    sample = draw_slater(cfg.k, f, cfg.samples, cfg.seed, m=cfg.m)
    ests = [partition_from_sample(sample, g) for g in cfg.gamma]
    for e in ests:
        print(f"partition: gamma={e.gamma:g} Z={e.mean:.6g} se={e.stderr:.3g} diverged={e.diverged}", file=sys.stderr)
    if cfg.csv:
        rows = [{c: getattr(e, c) for c in SCAN_COLUMNS} for e in ests]
        emit_sweep(rows, cfg.csv, SCAN_COLUMNS)
    _emit(cfg, {"estimates": ests}, f"partition: {len(ests)} gamma values")
    return 0


def cmd_gamma_k(cfg: RunConfig) -> int:
    f, _ = _density(cfg)
    out = {}
    if cfg.method in ("exact", "both"):
        out["exact"] = gamma_k_exact_p1(cfg.m, cfg.k, f)
    if cfg.method in ("tail", "both"):
        out["tail"] = gamma_k_tail_estimate(cfg.k, f, cfg.samples, cfg.seed, m=cfg.m)
    head = out.get("tail") or out["exact"]
    _emit(cfg, out, f"gamma-k: m={cfg.m} k={cfg.k} estimate={head.value:.6g} interval={head.interval}")
    return 0


def cmd_toric_check(cfg: RunConfig) -> int:
    X, named = _surface(cfg)
    L = parse_divisor(cfg.L, X, named)
    D = parse_divisor(cfg.D, X, named) if cfg.D else None
    rep = check_csck_criterion(X, L, rational(cfg.gamma), cfg.b, D)
    _emit(
        cfg,
        {"surface": X.to_dict(), "L": L.to_list(), "report": rep},
        f"toric-check: mu={rep.mu} s={rep.s} bound={rep.bound} satisfied={str(rep.satisfied).lower()}",
    )
    return 0


def cmd_find_m0(cfg: RunConfig) -> int:
    X, named = _surface(cfg)
    L = parse_divisor(cfg.L, X, named)
    m0 = find_m0(X, L, rational(cfg.b))
    _emit(cfg, {"surface": X.to_dict(), "L": L.to_list(), "b": rational(cfg.b), "m0": m0}, f"find-m0: m0={m0}")
    return 0


def _run_suite(name: str, cfg: RunConfig, model, q):
    f = None
    if cfg.density != "uniform":
        f, _ = _density(cfg, q)
    if name == "identities":
        return suite_identities(q, model, cfg.cases or 100, cfg.seed, cfg.l_max)
    if name == "mabuchi_ding":
        return suite_mabuchi_ding(q, model, cfg.cases or 100, cfg.seed, l_max=cfg.l_max)
    if name == "legendre":
        return suite_legendre(q, model, cfg.cases or 50, cfg.seed, f, l_max=cfg.l_max)
    if name == "bergman":
        return suite_bergman(q, model, n_cases=cfg.cases or 10, seed=cfg.seed, l_max=cfg.l_max)
    if name == "quantized_ding":
        return suite_quantized_ding(cfg.k, cfg.tau, cfg.gamma, f, cfg.samples, cfg.seed, q, model, cfg.cases or 20, cfg.l_max)
    res, fit = suite_coercivity(
        tuple(cfg.ks), cfg.tau, cfg.gamma, f, None, None, None, cfg.samples, cfg.seed, q, model, cfg.cases or 100, cfg.l_max
    )
    res.extras["constants"] = fit.to_dict()
    return res


def cmd_verify(cfg: RunConfig) -> int:
    model = PolarizedModel(cfg.m)
    q = _quadrature(cfg, model)
    names = SUITES if cfg.suite == "all" else (cfg.suite,)
    ok = True
    outdir = Path(cfg.out) if cfg.out else None
    for name in names:
        res = _run_suite(name, cfg, model, q)
        ok = ok and res.passed
        print(res.summary() + (f" ({res.advice})" if res.advice else ""), file=sys.stderr)
        payload = {"provenance": {"version": __version__, "command": "verify", "config": cfg.values}, "suite": res}
        if outdir is not None:
            write_json(payload, outdir / f"{name}.json")
        elif len(names) == 1:
            sys.stdout.write(dumps(payload))
    return 0 if ok else 1


def cmd_sweep(cfg: RunConfig) -> int:
    if not cfg.out:
        raise ConfigError("sweep needs --out for the CSV file")
    model = PolarizedModel(cfg.m)
    rows = []
    if cfg.kind == "quantized_ding":
        q = _quadrature(cfg, model)
        f = None if cfg.density == "uniform" else _density(cfg, q)[0]
        for seed in cfg.seeds:
            for k in cfg.k:
                for tau in cfg.tau:
                    for g in cfg.gamma:
                        res = suite_quantized_ding(k, tau, g, f, cfg.samples, seed, q, model, cfg.cases, cfg.l_max)
                        for r in res.records:
                            rows.append(
                                {
                                    "seed": seed,
                                    "k": k,
                                    "tau": tau,
                                    "gamma": g,
                                    "lhs": r["lhs"],
                                    "rhs": r["rhs"],
                                    "stderr": r["stderr"],
                                    "margin": r["margin"],
                                }
                            )
        columns = QUANTIZED_DING_COLUMNS
    elif cfg.kind == "gamma-scan":
        f, _ = _density(cfg)
        columns = ("k",) + SCAN_COLUMNS
        for k in cfg.k:
            sample = draw_slater(k, f, cfg.samples, cfg.seed, m=cfg.m)
            for r in divergence_scan(sample, cfg.gamma):
                rows.append({"k": k, **{c: r[c] for c in SCAN_COLUMNS}})
    elif cfg.kind == "functionals":
        if len(cfg.gamma) != 1 or len(cfg.tau) != 1:
            raise ConfigError("the functionals sweep takes a single gamma and tau")
        q = _quadrature(cfg, model)
        f, eta = _density(cfg, q)
        g, tau = cfg.gamma[0], cfg.tau[0]
        columns = FUNCTIONAL_COLUMNS
        for seed in cfg.seeds:
            for phi in seeded_family(seed, cfg.cases, cfg.l_max, model):
                rep = functional_report(phi, g, tau, f, eta, q, model)
                margin = verify_mabuchi_ding(phi, g, f, eta, q, model)
                rows.append({"seed": seed, "J": rep.J, "E": rep.E, "Ent": rep.Ent, "M": rep.M, "D": rep.D, "margin": margin})
    else:
        q = _quadrature(cfg, model)
        columns = ("seed", "case", "k", "E", "Ek_diff", "error")
        fam = seeded_family(cfg.seeds[0], cfg.cases, cfg.l_max, model, include_zero=False)
        for i, phi in enumerate(fam):
            E = energy_E(phi, q, model)
            for k in cfg.k:
                b = section_basis(cfg.m, k)
                d = energy_Ek(phi, b, q, model) - energy_Ek(Potential.zeros(), b, q, model)
                rows.append({"seed": cfg.seeds[0], "case": i, "k": k, "E": E, "Ek_diff": d, "error": abs(d - E)})
    emit_sweep(rows, cfg.out, columns)
    print(f"sweep: {cfg.kind} rows={len(rows)} -> {cfg.out}")
    return 0


HANDLERS = {
    "functional-report": cmd_functional_report,
    "gram": cmd_gram,
    "partition": cmd_partition,
    "gamma-k": cmd_gamma_k,
    "toric-check": cmd_toric_check,
    "find-m0": cmd_find_m0,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gibbsk", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, opts in COMMANDS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="INI file; sections are command names")
        for o in opts:
            sp.add_argument("--" + o.name.replace("_", "-"), dest=o.name, default=None, help=o.help or None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        config = read_config(args.config, args.command) if args.config else {}
        cfg = resolve(args.command, flags, config)
        return HANDLERS[args.command](cfg)
    except (InputError, DomainError) as exc:
        print(f"gibbsk {args.command}: input error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"gibbsk {args.command}: numeric failure: {exc}", file=sys.stderr)
        return 1
    except GibbskError as exc:
        print(f"gibbsk {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
