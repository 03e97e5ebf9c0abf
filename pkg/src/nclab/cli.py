"""Experiment runner: one subcommand per module family, seeded and machine-readable.

Every run prints a JSON summary (schema 1) with the seed, the full config echo,
the PRNG identifier and a pass/fail record per check.  Floats are written with
17 significant digits.  CSV tables go to ``--out`` when given.  Exit status is
0 when all checks pass, 2 when any fails, 64 on a usage error.
"""

import argparse
import csv
import datetime
import json
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from nclab import cocycles, expansion, flow, forms, linalg, moi, oneloop, ssf
from nclab import torusq as tq
from nclab.config import PRNG_ALGORITHM, make_rng
from nclab.funcs import Monomial, PolyGaussian, from_spec

SCHEMA = 1
EX_USAGE = 64
EX_CHECK = 2

GAUSSIAN = {"family": "Gaussian", "params": {"width": 1.0}}
CUBE = {"family": "Monomial", "params": {"m": 3}}

COMMON = {"seed": 0, "deterministic": False, "out": None}
DEFAULTS = {
    "expand": {"dim": 3, "K": 3, "f": GAUSSIAN, "n_terms": 2, "v_norm": 0.25},
    "cocycle-check": {"dim": 3, "n": 5, "trials": 10, "f": GAUSSIAN},
    "oneloop": {"dim": 4, "cutoff": None, "v_max": 2, "f": CUBE, "kind": "all"},
    "ssf": {"dim": 5, "n": 1, "trials": 20, "f": GAUSSIAN},
    "moi-check": {"dim": 4, "n": 3, "trials": 5, "f": CUBE},
    "torus-sdq": {"dim": 1, "cutoff": 64, "hbar_grid": [2.0 ** -k for k in range(1, 7)],
                  "depth": 4, "p_range": 300.0, "generators": None,
                  "rieffel_failure": False, "hbar0": 0.5, "N": 4},
    "flow": {"dim": 2, "t": 1.0, "dt": 1e-3, "scales": [8, 16, 32, 64, 128],
             "n_pairs": 10, "fejer_m": 4},
}

# flag -> (config key, argparse kwargs)
FLAGS = {
    "--dim": ("dim", {"type": int}),
    "--cutoff": ("cutoff", {"type": int}),
    "--K": ("K", {"type": int}),
    "--n": ("n", {"type": int}),
    "--hbar-grid": ("hbar_grid", {"type": str, "help": "comma-separated hbar values"}),
    "--depth": ("depth", {"type": int}),
    "--trials": ("trials", {"type": int}),
    "--v-max": ("v_max", {"type": int}),
    "--kind": ("kind", {"choices": ["all", "chain", "bubble", "tadpole"]}),
    "--f": ("f", {"type": str, "help": "function spec as JSON {family, params}"}),
    "--p-range": ("p_range", {"type": float}),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class ExperimentConfig:
    subcommand: str
    seed: int = 0
    deterministic: bool = False
    out: str = None
    params: dict = field(default_factory=dict)

    def echo(self) -> dict:
        return {"subcommand": self.subcommand, "seed": self.seed,
                "deterministic": self.deterministic, "out": self.out, **self.params}


class Checks:
    """Ordered pass/fail record."""

    def __init__(self):
        self.items = []

    def add(self, name, passed, value=None, threshold=None):
        self.items.append({"name": name, "passed": bool(passed), "value": value,
                           "threshold": threshold})

    def upper(self, name, value, threshold):
        self.add(name, value <= threshold, value, threshold)

    def failed(self):
        return [c for c in self.items if not c["passed"]]


# serialization -------------------------------------------------------------------

def _fmt(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def _plain(obj):
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.ndarray):
        return [_plain(x) for x in obj.tolist()]
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


def dumps(obj, indent: int = 0) -> str:
    """JSON text with every float printed to 17 significant digits."""
    obj = _plain(obj)
    pad, inner = " " * indent, " " * (indent + 2)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        body = ",\n".join(f"{inner}{json.dumps(str(k))}: {dumps(v, indent + 2)}" for k, v in obj.items())
        return "{\n" + body + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [dumps(v, indent + 2) for v in obj]
        if all("\n" not in s for s in items) and sum(map(len, items)) < 100:
            return "[" + ", ".join(items) + "]"
        return "[\n" + ",\n".join(inner + s for s in items) + "\n" + pad + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt(obj)
    return json.dumps(obj if isinstance(obj, str) else str(obj))


def _cell(x):
    x = _plain(x)
    if isinstance(x, float):
        return format(x, ".17g")
    return x


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(x) for x in r])


def _reim(z):
    return [float(np.real(z)), float(np.imag(z))]


# subcommands ----------------------------------------------------------------------

def _func(p):
    return from_spec(p["f"])


def run_expand(cfg: ExperimentConfig, checks: Checks):
    p = cfg.params
    rng = make_rng(cfg.seed)
    f = _func(p)
    D = np.diag(np.arange(1.0, p["dim"] + 1))
    A = forms.random_hermitian_one_form(rng, p["n_terms"], p["dim"])
    A = A.scale(p["v_norm"] / linalg.op_norm(forms.pi_D(A, D)))
    rows, results = [], []
    for K in range(1, p["K"] + 1):
        rep = expansion.expand(D, f, A, K)
        diff = abs(rep.remainder_direct - rep.remainder_formula)
        checks.upper(f"remainder_direct=remainder_formula K={K}", diff, 1e-7 * rep.scale)
        results.append({"K": K, "lhs": rep.lhs, "remainder_direct": rep.remainder_direct,
                        "remainder_formula": rep.remainder_formula, "agree": rep.agree,
                        "index_set_size": rep.index_set_size})
        last = rep
    for k in range(p["K"]):
        rows.append([k + 1, *_reim(last.cs_terms[k]), *_reim(last.ym_terms[k]),
                     *_reim(last.partial_sums[k]), *_reim(results[k]["remainder_direct"])])
    mags = [abs(r["remainder_direct"]) for r in results]
    checks.add("remainder decreases in K", all(b < a for a, b in zip(mags, mags[1:])), mags)
    tables = {"expansion.csv": (["k", "cs_re", "cs_im", "ym_re", "ym_im", "partial_re",
                                 "partial_im", "remainder_re", "remainder_im"], rows)}
    return {"pi_D_norm": p["v_norm"], "orders": results}, tables


def _relative(x, y):
    return abs(x - y) / max(1.0, abs(x), abs(y))


def run_cocycle(cfg: ExperimentConfig, checks: Checks):
    p = cfg.params
    rng = make_rng(cfg.seed)
    f = _func(p)
    dim, top, trials = p["dim"], p["n"], p["trials"]
    D = np.diag(np.linspace(0.3, 2.0, dim))
    sd = cocycles.SpectralData(D, f)
    phi = lambda n: cocycles.phi(n, D, f, sd)
    zero = cocycles.zero_cochain

    def worst(c1, c2, deg):
        return max(_relative(c1(*a), c2(*a)) for a in
                   (cocycles.random_tuple(rng, deg, dim) for _ in range(trials)))

    results = {}
    ids = []
    for n in range(1, top + 1, 2):
        ids.append((f"b phi_{n} = phi_{n + 1}", cocycles.b_op(phi(n)), phi(n + 1), n + 1))
    for k in range(1, top // 2 + 1):
        ids.append((f"b phi_{2 * k} = 0", cocycles.b_op(phi(2 * k)), zero(2 * k + 1), 2 * k + 1))
        ids.append((f"B phi_{2 * k} = 0", cocycles.B_op(phi(2 * k)), zero(2 * k - 1), 2 * k - 1))
    for n in range(2, top, 2):
        lhs = cocycles.b_op(cocycles.B0_op(phi(n)))
        rhs = phi(n).scale(2) - cocycles.B0_op(phi(n + 1))
        ids.append((f"b B0 phi_{n} = 2 phi_{n} - B0 phi_{n + 1}", lhs, rhs, n))
    for k in range(1, (top - 1) // 2 + 1):
        lhs = (cocycles.b_op(cocycles.psi_tilde(k, D, f, sd))
               + cocycles.B_op(cocycles.psi_tilde(k + 1, D, f, sd)))
        ids.append((f"b psi~_{2 * k - 1} + B psi~_{2 * k + 1} = 0", lhs, zero(2 * k), 2 * k))
    for name, c1, c2, deg in ids:
        r = worst(c1, c2, deg)
        results[name] = r
        checks.upper(name, r, 1e-9)
    return {"relative_residuals": results}, {}


def _spectrum_diag(dim):
    return np.diag(np.arange(1.0, dim + 1))


def run_oneloop(cfg: ExperimentConfig, checks: Checks):
    p = cfg.params
    rng = make_rng(cfg.seed)
    f = _func(p)
    D = _spectrum_diag(p["dim"])
    N = p["cutoff"] or p["dim"]
    V1, V2, V3 = (linalg.random_hermitian(rng, p["dim"]) for _ in range(3))
    a = linalg.random_matrix(rng, p["dim"])
    kinds = ["chain", "bubble", "tadpole"] if p["kind"] == "all" else [p["kind"]]
    amps = {}
    for kind in kinds:
        eng = oneloop.amplitude(oneloop.two_point(kind), [V1, V2], D, f, N)
        ref = oneloop.explicit_two_point(kind, V1, V2, D, f, N)
        amps[kind] = {"engine": eng, "closed_form": ref}
        checks.upper(f"{kind} engine = closed form", abs(eng - ref), 1e-10 * max(1.0, abs(ref)))
    sq = oneloop.amplitude(oneloop.two_point("bubble"), [V1, V2], D, Monomial(2), N)
    checks.add("f=x^2 bubble vanishes", sq == 0, abs(sq), 0.0)
    ward = {}
    for kind in ("vertex", "gauge-edge", "quantum"):
        rep = oneloop.ward_check(kind, D, f, a, [V1, V2], N, v_max=p["v_max"])
        ward[kind] = {"residual": rep.residual, "scale": rep.scale}
        checks.upper(f"{kind} Ward identity", rep.residual, 1e-9 * rep.scale)
    q = oneloop.quantum_bracket([V1, V2, V3], D, f, N, p["v_max"])
    qr = oneloop.quantum_bracket([V2, V3, V1], D, f, N, p["v_max"])
    checks.upper("quantum bracket cyclicity", abs(q - qr), 1e-10 * max(1.0, abs(q)))
    G = oneloop.propagator(D, f, N).G
    rows = [[k, l, G[k, l]] for k in range(N) for l in range(N)]
    return ({"N": N, "amplitudes": amps, "ward": ward, "quantum_bracket": q},
            {"propagator.csv": (["k", "l", "G"], rows)})


def run_ssf(cfg: ExperimentConfig, checks: Checks):
    p = cfg.params
    rng = make_rng(cfg.seed)
    f = _func(p)
    hand = ssf.trace_formula_check(np.diag([0.0, 1.0]), np.diag([1.0, 0.0]), Monomial(2), 1)
    checks.add("hand case 1 = 1", hand.residual <= 1e-10 and abs(hand.lhs - 1) <= 1e-12, hand.residual, 1e-10)
    worst = {n: 0.0 for n in range(1, p["n"] + 1)}
    first = None
    for _ in range(p["trials"]):
        H = linalg.random_hermitian(rng, p["dim"])
        V = linalg.random_hermitian(rng, p["dim"])
        first = first or (H, V)
        for n in worst:
            rep = ssf.trace_formula_check(H, V, f, n)
            worst[n] = max(worst[n], rep.residual / (1.0 if n == 1 else rep.scale))
    for n, r in worst.items():
        checks.upper(f"trace formula n={n}", r, 1e-10 if n == 1 else 1e-8)
    eta = ssf.eta_one(*first)
    rows = [[x, v] for x, v in zip(eta.breakpoints, list(eta.values) + [0])]
    return ({"hand": {"lhs": hand.lhs, "rhs": hand.rhs}, "worst_residual": worst,
             "eta_weight_ratio": ssf.eta_weight_ratio(*first)},
            {"eta.csv": (["breakpoint", "value_right"], rows)})


def run_moi(cfg: ExperimentConfig, checks: Checks):
    p = cfg.params
    rng = make_rng(cfg.seed)
    f = _func(p)
    dim = p["dim"]
    H2, V2 = np.diag([0.0, 1.0]), np.array([[0.0, 1.0], [1.0, 0.0]])
    hand = moi.trace_moi(H2, Monomial(3), [V2, V2])
    checks.upper("hand value 3", abs(hand - 3), 1e-12)
    fd, rem, cov, bnd = 0.0, 0.0, 0.0, []
    g = PolyGaussian([1.0, 0.5])
    for _ in range(p["trials"]):
        H, V = linalg.random_hermitian(rng, dim), linalg.random_hermitian(rng, dim)
        for n in range(1, p["n"] + 1):
            fd = max(fd, _relative(moi.trace_moi(H, f, [V] * n), moi.fd_derivative(H, V, f, n)))
            d1, d2 = moi.taylor_remainder(H, V, f, n)
            rem = max(rem, np.abs(d1 - d2).max() / max(1.0, np.abs(d1).max()))
            ops = [linalg.random_hermitian(rng, dim) for _ in range(n + 1)]
            Ws = [linalg.random_matrix(rng, dim) for _ in range(n)]
            l, r = moi.change_of_variables(moi.MoiContext(ops, f), Ws)
            cov = max(cov, np.abs(l - r).max() / max(1.0, np.abs(l).max()))
        for s in (1, 2):
            for n in (1, 2):
                rep = moi.schatten_bound_check(H, g, [linalg.random_hermitian(rng, dim) for _ in range(n)], s)
                bnd.append(rep.lhs / rep.rhs)
    checks.upper("trace_moi = finite-difference derivative", fd, 1e-5)
    checks.upper("remainder representations", rem, 1e-8)
    checks.upper("change of variables", cov, 1e-8)
    checks.upper("Schatten bound ratio", max(bnd), 1.0)
    return {"hand": hand, "fd": fd, "remainder": rem, "change_of_variables": cov,
            "bound_ratio_max": max(bnd)}, {}


def _parse_generator(spec):
    """{"b": [...], "atoms": [[re, im, [xi...]], ...]}."""
    return tq.generator(spec["b"], [(complex(re, im), xi) for re, im, xi in spec["atoms"]])


def _random_generator(rng, dim, k=2, bmax=2):
    return tq.generator(rng.integers(-bmax, bmax + 1, dim),
                        [(complex(rng.normal(), rng.normal()), rng.uniform(-0.15, 0.15, dim) / np.sqrt(dim))
                         for _ in range(k)])


def run_torus(cfg: ExperimentConfig, checks: Checks):
    p = cfg.params
    if p["rieffel_failure"]:
        rf = tq.rieffel_failure(p["hbar0"], p["N"])
        checks.upper("norm at hbar0 is 0", rf.norm_at_hbar0, 1e-10)
        checks.upper("norm at hbar_N is 1", abs(rf.norm_at_hbarN - 1.0), 1e-10)
        return {"rieffel_failure": vars(rf)}, {}
    rng = make_rng(cfg.seed)
    if p["generators"]:
        f, g = (_parse_generator(s) for s in p["generators"][:2])
    else:
        f, g = _random_generator(rng, p["dim"]), _random_generator(rng, p["dim"])
    hbars = list(p["hbar_grid"])
    rep = tq.sdq_residuals(f, g, hbars, cutoff=p["cutoff"],
                           p_range=p["p_range"] if f.dim == 1 else None)
    for key in ("von_neumann", "dirac"):
        s = rep.slopes[key]
        checks.add(f"{key} slope in [0.9, 1.1]", 0.9 <= s <= 1.1, s, [0.9, 1.1])
    over = [v - b for v, b in zip(rep.von_neumann, rep.vn_bound)]
    checks.add("von Neumann residual below bound", bool(over) and max(over) <= 0, max(over, default=None), 0.0)
    rows = [[h, v, d, fl, b] for h, v, d, fl, b in
            zip(hbars, rep.von_neumann, rep.dirac, rep.dirac_flipped, rep.vn_bound or [None] * len(hbars))]
    # tower sup over a 1% interval around hbar = 1/3
    l = tq.Lattice([1])
    gt = tq.generator([1], [(1.0, [0.1]), (1.0, [-0.15])])
    hs = np.linspace(1 / 3 * 0.995, 1 / 3 * 1.005, 11)
    sups = [max(tq.tower_norms(gt, l, h, p["depth"], cutoff=8)) for h in hs]
    var = (max(sups) - min(sups)) / max(sups)
    checks.upper(f"tower sup variation at depth {p['depth']}", var, 0.05)
    return ({"generators": [repr(f), repr(g)], "slopes": rep.slopes, "sup_f": rep.sup_f,
             "tower_variation": var},
            {"sdq.csv": (["hbar", "von_neumann", "dirac", "dirac_flipped", "vn_bound"], rows),
             "tower.csv": (["hbar", "tower_sup"], [[h, s] for h, s in zip(hs, sups)])})


def _flow_potential(dim):
    if dim == 2:
        return flow.TrigPotential({(1, 0): 0.5, (-1, 0): 0.5, (0, 1): 0.3, (0, -1): 0.3,
                                   (1, 1): 0.2j, (-1, -1): -0.2j})
    b = (1,) + (0,) * (dim - 1)
    return flow.TrigPotential.cosine(b)


def run_flow(cfg: ExperimentConfig, checks: Checks):
    p = cfg.params
    rng = make_rng(cfg.seed)
    dim, t, dt = p["dim"], p["t"], p["dt"]
    x0 = flow.PhasePoint(rng.uniform(0, 1, dim), rng.normal(0, 2, dim))
    free = flow.distance(flow.integrate(x0, flow.TrigPotential.zero(dim), t, dt), flow.free_flow(x0, t))
    checks.upper("free flow exact", free, 1e-12)
    V = _flow_potential(dim)
    b = (1,) + (0,) * (dim - 1)
    direction = [1.0] + [0.3] * (dim - 1)
    q0s = [rng.uniform(0, 1, dim) for _ in range(4)]
    tab = flow.dynamics_comparison(V, b, q0s, direction, scales=tuple(p["scales"]), t=t)
    checks.add("decay slope in [-1.15, -0.85]", -1.15 <= tab.slope <= -0.85, tab.slope, [-1.15, -0.85])
    W = flow.fejer_smooth(V, p["fejer_m"])
    ratios = []
    for _ in range(p["n_pairs"]):
        y0 = flow.PhasePoint(rng.uniform(0, 1, dim), rng.normal(0, 1, dim))
        z0 = flow.PhasePoint(y0.q + rng.uniform(-1e-3, 1e-3, dim), y0.p)
        rep = flow.gronwall_check(V, W, y0, z0, t, dt)
        ratios.append(rep.max_ratio)
        checks.add(f"Gronwall pair {len(ratios)}", rep.holds, rep.max_ratio, 1.0)
    _, traj = flow.integrate(x0, V, t, dt, trajectory=True)
    stride = max(1, len(traj) // 100)
    rows = [[i * dt, *x.q, *x.p, flow.energy(x, V)] for i, x in enumerate(traj)][::stride]
    header = ["s"] + [f"q{i}" for i in range(dim)] + [f"p{i}" for i in range(dim)] + ["energy"]
    return ({"free_flow_error": free, "decay_slope": tab.slope, "gronwall_max_ratio": max(ratios)},
            {"decay.csv": (["scale", "distance"], list(zip(tab.scales, tab.distances))),
             "trajectory.csv": (header, rows)})


RUNNERS = {"expand": run_expand, "cocycle-check": run_cocycle, "oneloop": run_oneloop,
           "ssf": run_ssf, "moi-check": run_moi, "torus-sdq": run_torus, "flow": run_flow}
SUB_FLAGS = {
    "expand": ["--dim", "--K", "--n", "--f"],
    "cocycle-check": ["--dim", "--n", "--trials", "--f"],
    "oneloop": ["--dim", "--cutoff", "--v-max", "--kind", "--f"],
    "ssf": ["--dim", "--n", "--trials", "--f"],
    "moi-check": ["--dim", "--n", "--trials", "--f"],
    "torus-sdq": ["--dim", "--cutoff", "--hbar-grid", "--depth", "--p-range"],
    "flow": ["--dim"],
}


# config assembly -----------------------------------------------------------------

def build_parser():
    ap = _Parser(prog="nclab", description="Seeded experiments with JSON and CSV output.")
    ap.add_argument("--config", help="JSON file with a full or partial config")
    sub = ap.add_subparsers(dest="subcommand")
    for name, flags in SUB_FLAGS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out")
        sp.add_argument("--deterministic", action="store_true", default=None)
        sp.add_argument("--config", dest="sub_config")
        for fl in flags:
            key, kw = FLAGS[fl]
            sp.add_argument(fl, dest=key, default=None, **kw)
        if name == "expand":
            # --n is an alias of --K for the expansion order
            sp.set_defaults(n=None)
        if name == "torus-sdq":
            sp.add_argument("--rieffel-failure", action="store_true", default=None,
                            dest="rieffel_failure")
    return ap


def _load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not text.strip():
        raise UsageError(f"empty config {path}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed config {path}: {exc}") from None
    if not isinstance(data, dict) or not data:
        raise UsageError(f"config {path} must be a non-empty JSON object")
    return data


def _coerce(key, value):
    if key == "hbar_grid" and isinstance(value, str):
        try:
            return [float(x) for x in value.split(",") if x.strip()]
        except ValueError:
            raise UsageError(f"bad --hbar-grid {value!r}") from None
    if key == "f" and isinstance(value, str):
        try:
            return json.loads(value)
        except json.JSONDecodeError:
            raise UsageError(f"bad --f {value!r}") from None
    return value


def resolve(argv) -> ExperimentConfig:
    """defaults < config file < explicit flags."""
    ap = build_parser()
    if not argv:
        raise UsageError("no subcommand given")
    ns = ap.parse_args(argv)
    cfg_path = ns.config or getattr(ns, "sub_config", None)
    file_cfg = _load_config(cfg_path) if cfg_path else {}
    name = ns.subcommand or file_cfg.get("subcommand")
    if name not in RUNNERS:
        raise UsageError(f"unknown or missing subcommand {name!r}")
    if file_cfg.get("subcommand", name) != name:
        raise UsageError("config subcommand differs from the command line")
    merged = {**COMMON, **DEFAULTS[name]}
    for key, value in file_cfg.items():
        if key == "subcommand":
            continue
        if key not in merged:
            raise UsageError(f"unknown config key {key!r} for {name}")
        merged[key] = _coerce(key, value)
    skip = {"config", "sub_config", "subcommand"}
    for key, value in vars(ns).items():
        if key in skip or value is None:
            continue
        if name == "expand" and key == "n":
            key = "K"
        merged[key] = _coerce(key, value)
    try:
        seed = int(merged.pop("seed"))
    except (TypeError, ValueError):
        raise UsageError("seed must be an integer") from None
    if not 0 <= seed < 2 ** 64:
        raise UsageError("seed must be a 64-bit unsigned integer")
    det, out = bool(merged.pop("deterministic")), merged.pop("out")
    if "f" in merged:
        try:
            from_spec(merged["f"])
        except (linalg.ContractError, TypeError, AttributeError) as exc:
            raise UsageError(str(exc)) from None
    return ExperimentConfig(name, seed, det, out, merged)


def run(cfg: ExperimentConfig):
    """Execute one experiment; returns (summary dict, tables, exit status)."""
    checks = Checks()
    results, tables = RUNNERS[cfg.subcommand](cfg, checks)
    failed = checks.failed()
    summary = {
        "schema": SCHEMA,
        "subcommand": cfg.subcommand,
        "seed": cfg.seed,
        "prng": PRNG_ALGORITHM,
        "config": cfg.echo(),
        "results": results,
        "checks": checks.items,
        "passed": not failed,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    return summary, tables, EX_CHECK if failed else 0


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = resolve(argv)
    except UsageError as exc:
        build_parser().print_usage(sys.stderr)
        print(f"nclab: error: {exc}", file=sys.stderr)
        return EX_USAGE
    except SystemExit as exc:       # --help
        return int(exc.code or 0)
    summary, tables, status = run(cfg)
    text = dumps(summary) + "\n"
    sys.stdout.write(text)
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(text)
        for fname, (header, rows) in tables.items():
            write_csv(out / fname, header, rows)
    if status:
        for c in summary["checks"]:
            if not c["passed"]:
                print(f"FAILED {c['name']}: value={c['value']} threshold={c['threshold']}",
                      file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
