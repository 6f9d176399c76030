"""Fairness probabilities, summary statistics and the dispersion sweep."""

from __future__ import annotations

import csv
import io
import logging
import math
import re
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np
from scipy import stats

from ._version import __version__
from .lossmodel import LossModel, format_severity, sample_claims
from .netgen import DegreeSpec, generate_graph
from .optimize import LpProblem, solve_engagement_lp, solve_min_variance_qp, solve_two_stage
from .sharing import (SettlementResult, personalized_kernel, settle_shares,
                      uniform_kernel)

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------- fairness

@dataclass(frozen=True)
class FairnessReport:
    p_zero: float
    p_full: float
    p_strict: float
    p_weak: float


def fairness_exact(dbar: int, p: float) -> FairnessReport:
    """Regular mesh with deterministic full losses, where ξ_i = N_i·γ.

    N_i ~ Bin(dbar, p) for the claimant; a claiming neighbour j sees
    1 + M_j claims with M_j ~ Bin(dbar - 1, p), taken independent of N_i.
    """
    if int(dbar) != dbar or dbar < 1:
        raise ValueError("dbar must be a positive integer")
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    dbar = int(dbar)
    k = np.arange(dbar + 1)
    pn = stats.binom.pmf(k, dbar, p)
    M = stats.binom(dbar - 1, p)
    # N < 1 + M  <=>  M >= N ;  N <= 1 + M  <=>  M >= N - 1
    p_strict = float(pn @ M.sf(k - 1))
    p_weak = float(pn @ M.sf(k - 2))
    return FairnessReport(p_zero=(1 - p) ** dbar, p_full=p ** dbar,
                          p_strict=min(p_strict, 1.0), p_weak=min(p_weak, 1.0))


# ---------------------------------------------------------------- statistics

@dataclass
class Summary:
    mean: float
    stdev: float
    share_self: float = 1.0
    share_friends: float = 0.0
    share_fof: float = 0.0


def layer_shares(self_total: float, friends: float, fof: float) -> tuple[float, float, float]:
    total = self_total + friends + fof
    if total <= 0:
        return 1.0, 0.0, 0.0
    sf, sfof = friends / total, fof / total
    return 1.0 - sf - sfof, sf, sfof


def summarize(xi_samples, layers: dict | None = None) -> Summary:
    """Pooled mean and population stdev over every entry, plus layer shares."""
    a = np.asarray(xi_samples, dtype=float)
    if a.size == 0:
        raise ValueError("nothing to summarize")
    mean = float(a.mean())
    sd = float(math.sqrt(max(np.mean((a - mean) ** 2), 0.0)))
    if not layers:
        return Summary(mean, sd)
    own = float(np.sum(layers["self_first"]) + np.sum(layers["residual_self"]))
    shares = layer_shares(own, float(np.sum(layers["from_friends_received"])),
                          float(np.sum(layers["from_fof_received"])))
    return Summary(mean, sd, *shares)


class Accumulator:
    """Streaming pooled moments and layer totals (Chan's merge)."""

    def __init__(self):
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0
        self.own = 0.0
        self.friends = 0.0
        self.fof = 0.0
        self.batch_sd: list[float] = []

    def add(self, res: SettlementResult) -> None:
        x = res.xi
        nb = x.size
        mb = float(x.mean())
        m2b = float(((x - mb) ** 2).sum())
        self.batch_sd.append(math.sqrt(m2b / nb))
        tot = self.count + nb
        delta = mb - self.mean
        self.m2 += m2b + delta * delta * self.count * nb / tot
        self.mean += delta * nb / tot
        self.count = tot
        L = res.layers
        self.own += float(L["self_first"].sum() + L["residual_self"].sum())
        self.friends += float(L["from_friends_received"].sum())
        self.fof += float(L["from_fof_received"].sum())

    @property
    def stdev(self) -> float:
        return math.sqrt(self.m2 / self.count) if self.count else 0.0

    def rel_se(self) -> float:
        """Relative standard error of the stdev estimate from batch means."""
        b = len(self.batch_sd)
        if b < 2:
            return math.inf
        sd = float(np.std(self.batch_sd, ddof=1))
        ref = self.stdev
        return sd / math.sqrt(b) / ref if ref > 0 else 0.0

    def summary(self) -> Summary:
        return Summary(self.mean, self.stdev, *layer_shares(self.own, self.friends, self.fof))


# ---------------------------------------------------------------- mechanisms

@dataclass(frozen=True, order=True)
class Mechanism:
    kind: str                      # none | uniform | uniform_self | lp | qp | fof
    z: float = 0.0
    gamma1: float | None = None
    gamma2: float | None = None

    @property
    def label(self) -> str:
        if self.kind == "fof":
            return f"fof({self.gamma1!r},{self.gamma2!r})"
        return self.kind


_MECH_RE = re.compile(r"^([a-z_]+)(?:\(([^()]*)\))?$")


def parse_mechanism(text: str, default_z: float = 0.0) -> Mechanism:
    m = _MECH_RE.match(text.strip().replace(" ", ""))
    if not m:
        raise ValueError(f"cannot parse mechanism {text!r}")
    kind, arg = m.group(1), m.group(2)
    try:
        args = [float(a) for a in arg.split(",")] if arg else []
    except ValueError as exc:
        raise ValueError(f"bad numbers in mechanism {text!r}") from exc
    if kind in ("none", "uniform", "qp") and not args:
        return Mechanism(kind)
    if kind in ("uniform_self", "lp") and len(args) <= 1:
        z = args[0] if args else (default_z if kind == "uniform_self" else 0.0)
        return Mechanism(kind, z)
    if kind == "fof" and len(args) in (2, 3):
        return Mechanism(kind, args[2] if len(args) == 3 else 0.0, args[0], args[1])
    raise ValueError(f"unknown mechanism or wrong arity: {text!r}")


def resolve_gamma(rule: str | float, s: float, dbar: float) -> float:
    if isinstance(rule, (int, float)):
        return float(rule)
    r = str(rule).strip().replace(" ", "")
    if r == "s/dbar":
        return s / dbar
    return float(r)


# ---------------------------------------------------------------- sweep

@dataclass(frozen=True)
class SweepConfig:
    n: int = 5000
    dbar: float = 20.0
    sigmas: tuple = (0.0,)
    seeds: int = 1
    master_seed: int = 0
    p: float = 0.1
    severity: object = None
    s: float = 1000.0
    gamma: str = "s/dbar"
    mechanisms: tuple = ("none", "uniform")
    z: float = 0.0
    reps: int | None = None            # None = adaptive
    max_reps: int = 500
    batch: int = 10
    target_rel_se: float = 0.01
    min_degree: int = 5

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.seeds < 1:
            raise ValueError("need at least one seed")
        if self.reps is not None and self.reps < 1:
            raise ValueError("reps must be positive")
        if self.max_reps < 1 or self.batch < 1:
            raise ValueError("max_reps and batch must be positive")
        if any(sg < 0 for sg in self.sigmas):
            raise ValueError("sigma must be nonnegative")
        LossModel(self.p, self.severity, self.s)
        for m in self.parsed_mechanisms():
            if not 0 <= m.z <= self.s:
                raise ValueError(f"self contribution of {m.label} outside [0, s]")

    def loss_model(self) -> LossModel:
        return LossModel(self.p, self.severity, self.s)

    def parsed_mechanisms(self) -> list[Mechanism]:
        return [parse_mechanism(t, self.z) for t in self.mechanisms]

    def echo(self) -> list[str]:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "severity":
                v = format_severity(v)
            elif isinstance(v, tuple):
                v = " ".join(repr(x) if isinstance(x, float) else str(x) for x in v)
            elif v is None:
                v = "auto"
            out.append(f"{f.name} = {v}")
        return out


@dataclass(frozen=True)
class SweepRow:
    sigma: float
    seed: int
    mechanism: str
    self_contribution: float
    mean_xi: float
    stdev_xi: float
    stdev_ratio: float
    share_self: float
    share_friends: float
    share_fof: float
    reps: int = field(default=0, compare=False)

    def sort_key(self):
        return (self.sigma, self.mechanism, self.self_contribution, self.seed)


CSV_COLUMNS = ("sigma", "seed", "mechanism", "self_contribution", "mean_xi", "stdev_xi",
               "stdev_ratio", "share_self", "share_friends", "share_fof")


def scenario_seed(master: int, seed_index: int, sigma: float) -> np.random.SeedSequence:
    hi, lo = struct.unpack("<II", struct.pack("<d", float(sigma)))
    return np.random.SeedSequence([int(master), int(seed_index), hi, lo])


def prepare_mechanism(mech: Mechanism, graph, cfg: SweepConfig, gamma: float):
    """Settlement function ``X -> SettlementResult`` for one mechanism on one graph."""
    return _Settler(mech, graph, cfg, gamma).fn


class _Settler:
    """Prepared mechanism bound to one graph."""

    def __init__(self, mech: Mechanism, graph, cfg: SweepConfig, gamma: float):
        self.mech = mech
        self.graph = graph
        s, z = cfg.s, mech.z
        k = mech.kind
        if k == "uniform":
            self.fn = lambda X: uniform_kernel(graph, X, gamma)
        elif k == "uniform_self":
            g = (s - z) / cfg.dbar
            self.fn = lambda X: uniform_kernel(graph, X, g, z)
        elif k == "lp":
            eng = solve_engagement_lp(LpProblem(graph, gamma, s - z))
            self.fn = lambda X: personalized_kernel(eng, X, z)
        elif k == "qp":
            q = solve_min_variance_qp(graph, s, gamma)
            self.fn = lambda X: settle_shares(graph, q.self_share, q.edge_share, X)
        elif k == "fof":
            eng1, fof, eng2 = solve_two_stage(graph, s, mech.gamma1, mech.gamma2, z)
            self.fn = lambda X: personalized_kernel(eng1, X, z, eng2)
        elif k == "none":
            self.fn = _no_sharing
        else:
            raise ValueError(f"unknown mechanism {k!r}")


def _no_sharing(X: np.ndarray) -> SettlementResult:
    zero = np.zeros_like(X)
    layers = {"self_first": zero, "from_friends_received": zero, "paid_to_friends": zero,
              "from_fof_received": zero, "paid_to_fof": zero, "residual_self": X}
    return SettlementResult(X.copy(), layers, float(X.sum()))


def simulate_graph(graph, cfg: SweepConfig, rng: np.random.Generator,
                   sigma: float = 0.0, seed_index: int = 0) -> list[SweepRow]:
    """Settle replicated claim draws on one graph under every configured mechanism.

    All mechanisms see the same claims. Without fixed ``reps`` the loop adds
    batches until each pooled stdev has relative standard error below target.
    """
    gamma = resolve_gamma(cfg.gamma, cfg.s, cfg.dbar)
    settlers = [_Settler(m, graph, cfg, gamma) for m in cfg.parsed_mechanisms()]
    accs = [Accumulator() for _ in settlers]
    model = cfg.loss_model()
    target = cfg.reps if cfg.reps is not None else cfg.max_reps
    done = 0
    while done < target:
        k = min(cfg.batch, target - done)
        X = sample_claims(model, graph.n, rng, reps=k).X
        for st, acc in zip(settlers, accs):
            acc.add(st.fn(X))
        done += k
        if cfg.reps is None and all(a.rel_se() < cfg.target_rel_se for a in accs):
            break
    rows = []
    for st, acc in zip(settlers, accs):
        sm = acc.summary()
        rows.append(SweepRow(float(sigma), seed_index, st.mech.label, float(st.mech.z),
                             sm.mean, sm.stdev, sm.stdev / cfg.s,
                             sm.share_self, sm.share_friends, sm.share_fof, done))
    return rows


def run_scenario(cfg: SweepConfig, sigma: float, seed_index: int) -> list[SweepRow]:
    ss = scenario_seed(cfg.master_seed, seed_index, sigma)
    g_rng, c_rng = (np.random.default_rng(s) for s in ss.spawn(2))
    graph = generate_graph(DegreeSpec(cfg.dbar, sigma, cfg.min_degree), cfg.n, g_rng)
    rows = simulate_graph(graph, cfg, c_rng, sigma, seed_index)
    logger.info("scenario sigma=%g seed=%d done after %d replications",
                sigma, seed_index, rows[0].reps if rows else 0)
    return rows


def _run_one(args):
    return run_scenario(*args)


def run_sweep(cfg: SweepConfig, workers: int = 1) -> list[SweepRow]:
    """All (sigma, seed) scenarios; output independent of ``workers``."""
    jobs = [(cfg, float(sg), k) for sg in cfg.sigmas for k in range(cfg.seeds)]
    if workers <= 1 or len(jobs) == 1:
        parts = [_run_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_run_one, jobs))
    rows = [r for part in parts for r in part]
    rows.sort(key=SweepRow.sort_key)
    return rows


def format_csv(rows: list[SweepRow], cfg: SweepConfig | None = None) -> str:
    buf = io.StringIO()
    buf.write(f"# p2pshare {__version__}\n")
    if cfg is not None:
        for line in cfg.echo():
            buf.write(f"# {line}\n")
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for r in rows:
        vals = []
        for c in CSV_COLUMNS:
            v = getattr(r, c)
            vals.append(repr(float(v)) if isinstance(v, float) else str(v))
        buf.write(",".join(vals) + "\n")
    return buf.getvalue()


def write_csv(path, rows: list[SweepRow], cfg: SweepConfig | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_csv(rows, cfg))


def read_csv(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))
