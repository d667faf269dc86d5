"""Randomized case-study scenarios, experiment harness, and metrics I/O.

Case tags combine a utility correlation with a demand class:
first letter C (utility correlated with demand, u = |s|^2) or
U (utility uncorrelated, uniform); second letter R (residential),
I (industrial) or M (mixed, at most 20% industrial).
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .alloc import (
    MixResult,
    allocation_utility,
    greedy_alloc,
    inelas_dem_alloc,
    mix_dem_alloc,
)
from .customers import Customer, total_utility
from .network import PathIndex, RadialNetwork, network_38
from .oracle import TooLarge, brute_force_maxopf, brute_force_smaxopf
from .powerflow import opf_feasible
from .simplified import loss_bounds, simplified_limits
from .theory import geometry, ratio_bounds

CASE_TAGS = ("CR", "CI", "CM", "UR", "UI", "UM")
ELASTIC_FRACTIONS = (0.0, 0.25, 0.5, 0.75)

# Demand magnitude ranges in p.u. at the 1 MVA base: residential 500 VA
# to 5 kVA, industrial 300 kVA to 1 MVA.
RESIDENTIAL_RANGE = (5e-4, 5e-3)
INDUSTRIAL_RANGE = (0.3, 1.0)
MIXED_INDUSTRIAL_SHARE = 0.2

# Power factor 0.8 to 1 restricted to phase angles within +-36 degrees.
PHASE_LIMIT = math.radians(36.0)

ALGORITHMS = ("greedy", "inelas", "mix")


@dataclass(frozen=True)
class ScenarioSpec:
    case_tag: str
    n: int
    elastic_fraction: float = 0.0
    seed: int = 0
    network: str = "net38"

    def __post_init__(self):
        if self.case_tag not in CASE_TAGS:
            raise ValueError(f"case_tag must be one of {CASE_TAGS}")
        if self.n < 0:
            raise ValueError("n must be >= 0")
        if self.elastic_fraction not in ELASTIC_FRACTIONS:
            raise ValueError(f"elastic_fraction must be one of {ELASTIC_FRACTIONS}")

    @property
    def correlated(self) -> bool:
        return self.case_tag[0] == "C"

    @property
    def demand_class(self) -> str:
        return self.case_tag[1]


@dataclass(frozen=True)
class MetricsRow:
    alg: str
    n: int
    tag: str
    seed: int
    utility: float
    oracle: float
    ratio: float
    alpha_bar: float
    delta: float
    beta_cap: float
    beta_volt: float
    ms: float


METRICS_HEADER = (
    "alg",
    "n",
    "tag",
    "seed",
    "utility",
    "oracle",
    "ratio",
    "alpha_bar",
    "delta",
    "beta_cap",
    "beta_volt",
    "ms",
)


def _class_magnitude(rng: np.random.Generator, demand_class: str) -> tuple[float, float]:
    """Sampled magnitude and the class ceiling used by uncorrelated utilities."""
    if demand_class == "I":
        lo, hi = INDUSTRIAL_RANGE
    else:
        lo, hi = RESIDENTIAL_RANGE
    return float(rng.uniform(lo, hi)), hi


def generate_scenario(
    spec: ScenarioSpec, net: RadialNetwork, rng: np.random.Generator | None = None
) -> list[Customer]:
    """Random customers for a case tag; deterministic per (spec, seed)."""
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    n = spec.n
    if n == 0:
        return []
    buses = np.array(net.non_root_buses)
    if spec.demand_class == "M":
        n_ind = int(rng.integers(0, int(MIXED_INDUSTRIAL_SHARE * n) + 1))
        classes = ["I"] * n_ind + ["R"] * (n - n_ind)
        rng.shuffle(classes)
    else:
        classes = [spec.demand_class] * n
    n_elastic = int(round(spec.elastic_fraction * n))
    elastic = np.zeros(n, dtype=bool)
    elastic[rng.choice(n, size=n_elastic, replace=False)] = True
    customers = []
    for k in range(n):
        mag, ceiling = _class_magnitude(rng, classes[k])
        phase = float(rng.uniform(-PHASE_LIMIT, PHASE_LIMIT))
        s = mag * complex(math.cos(phase), math.sin(phase))
        u = mag**2 if spec.correlated else float(rng.uniform(0.0, ceiling))
        bus = int(rng.choice(buses))
        customers.append(Customer(bus=bus, s=s, u=u, elastic=bool(elastic[k])))
    return customers


def customers_to_dict(customers: Sequence[Customer], spec: ScenarioSpec | None = None) -> dict:
    doc: dict = {
        "customers": [
            {
                "bus": c.bus,
                "s_re_pu": c.s.real,
                "s_im_pu": c.s.imag,
                "u": c.u,
                "kind": "elastic" if c.elastic else "inelastic",
            }
            for c in customers
        ]
    }
    if spec is not None:
        doc["spec"] = {
            "case_tag": spec.case_tag,
            "n": spec.n,
            "elastic_fraction": spec.elastic_fraction,
            "seed": spec.seed,
            "network": spec.network,
        }
    return doc


def customers_from_dict(doc: dict) -> list[Customer]:
    out = []
    for row in doc["customers"]:
        out.append(
            Customer(
                bus=int(row["bus"]),
                s=complex(float(row["s_re_pu"]), float(row["s_im_pu"])),
                u=float(row["u"]),
                elastic=row.get("kind", "inelastic") == "elastic",
            )
        )
    return out


def _exact_betas(
    net: RadialNetwork, customers: Sequence[Customer], allocation
) -> tuple[float, float, bool]:
    ok, report = opf_feasible(net, customers, allocation)
    return report.capacity_beta, report.voltage_beta, ok


def run_algorithm(
    alg: str,
    net: RadialNetwork,
    paths: PathIndex,
    customers: Sequence[Customer],
    epsilon: float = 0.005,
    loss_mode: str = "aggregate",
    include_lower_voltage: bool = False,
    with_oracle: bool = True,
) -> MetricsRow:
    """One algorithm on one customer set; oracle skipped beyond its guard.

    The simplified-system algorithms (greedy, inelas) treat elastic
    customers as declined and are measured against the simplified oracle;
    the mixed algorithm serves both kinds and is measured against the
    exact-power-flow oracle.
    """
    n = len(customers)
    if n == 0:
        return MetricsRow(alg, 0, "", 0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    inelastic = [c for c in customers if not c.elastic]
    delta = 0.0
    t0 = time.perf_counter()
    if alg == "mix":
        result: MixResult = mix_dem_alloc(
            net,
            paths,
            customers,
            epsilon=epsilon,
            loss_mode=loss_mode,
            include_lower_voltage=include_lower_voltage,
        )
        x = result.allocation
        delta = result.delta
        utility = allocation_utility(customers, x)
    elif alg in ("greedy", "inelas"):
        bounds = loss_bounds(net, paths, inelastic, mode=loss_mode)
        limits = simplified_limits(
            net, paths, bounds, include_lower_voltage=include_lower_voltage
        )
        if alg == "greedy":
            chosen = greedy_alloc(net, paths, limits, inelastic)
        else:
            chosen, _ = inelas_dem_alloc(net, paths, limits, inelastic)
        x_in = np.zeros(len(inelastic))
        x_in[list(chosen)] = 1.0
        utility = total_utility(inelastic, x_in)
        x = np.zeros(n)
        pos = 0
        for i, c in enumerate(customers):
            if not c.elastic:
                x[i] = x_in[pos]
                pos += 1
    else:
        raise ValueError(f"unknown algorithm {alg!r}")
    ms = (time.perf_counter() - t0) * 1e3
    beta_cap, beta_volt, _ = _exact_betas(net, customers, x)
    oracle_u = math.nan
    ratio = math.nan
    if with_oracle:
        try:
            if alg == "mix":
                oracle_u = brute_force_maxopf(net, paths, list(customers)).best_utility
            else:
                oracle_u = brute_force_smaxopf(
                    net, paths, limits, inelastic
                ).best_utility
            ratio = 1.0 if oracle_u == 0 else min(utility / oracle_u, 1.0)
        except TooLarge:
            pass
    g = geometry(net, customers, paths)
    alpha_bar = ratio_bounds(g, n).abar
    return MetricsRow(
        alg=alg,
        n=n,
        tag="",
        seed=0,
        utility=utility,
        oracle=oracle_u,
        ratio=ratio,
        alpha_bar=alpha_bar,
        delta=delta,
        beta_cap=beta_cap,
        beta_volt=beta_volt,
        ms=ms,
    )


def run_experiment(
    spec: ScenarioSpec,
    algorithms: Sequence[str] = ("mix",),
    repetitions: int = 40,
    net: RadialNetwork | None = None,
    epsilon: float = 0.005,
    loss_mode: str = "aggregate",
    with_oracle: bool = True,
) -> list[MetricsRow]:
    """Repeated runs with independent, reproducible RNG streams per rep."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    for alg in algorithms:
        if alg not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {alg!r}")
    if net is None:
        net = network_38()
    paths = PathIndex(net)
    streams = np.random.SeedSequence(spec.seed).spawn(repetitions)
    rows = []
    for rep, stream in enumerate(streams):
        rng = np.random.default_rng(stream)
        customers = generate_scenario(spec, net, rng=rng)
        for alg in algorithms:
            row = run_algorithm(
                alg,
                net,
                paths,
                customers,
                epsilon=epsilon,
                loss_mode=loss_mode,
                with_oracle=with_oracle,
            )
            rows.append(replace(row, tag=spec.case_tag, seed=spec.seed * 10_000 + rep))
    return rows


@dataclass(frozen=True)
class Summary:
    alg: str
    tag: str
    n: int
    mean_ratio: float
    ci95_ratio: float
    mean_utility: float
    mean_ms: float
    max_delta: float


def summarize(rows: Sequence[MetricsRow]) -> list[Summary]:
    """Mean and 95% normal-approximation half-widths per (alg, tag, n)."""
    groups: dict[tuple[str, str, int], list[MetricsRow]] = {}
    for r in rows:
        groups.setdefault((r.alg, r.tag, r.n), []).append(r)
    out = []
    for (alg, tag, n), grp in sorted(groups.items()):
        ratios = np.array([r.ratio for r in grp if not math.isnan(r.ratio)])
        if ratios.size:
            mean = float(ratios.mean())
            sd = float(ratios.std(ddof=1)) if ratios.size > 1 else 0.0
            ci = 1.96 * sd / math.sqrt(ratios.size)
        else:
            mean, ci = math.nan, math.nan
        out.append(
            Summary(
                alg=alg,
                tag=tag,
                n=n,
                mean_ratio=mean,
                ci95_ratio=ci,
                mean_utility=float(np.mean([r.utility for r in grp])),
                mean_ms=float(np.mean([r.ms for r in grp])),
                max_delta=float(max(r.delta for r in grp)),
            )
        )
    return out


def write_metrics_csv(rows: Iterable[MetricsRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METRICS_HEADER)
        for r in rows:
            w.writerow([getattr(r, f) for f in METRICS_HEADER])


def read_metrics_csv(path: str | Path) -> list[MetricsRow]:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(
                MetricsRow(
                    alg=rec["alg"],
                    n=int(rec["n"]),
                    tag=rec["tag"],
                    seed=int(rec["seed"]),
                    utility=float(rec["utility"]),
                    oracle=float(rec["oracle"]),
                    ratio=float(rec["ratio"]),
                    alpha_bar=float(rec["alpha_bar"]),
                    delta=float(rec["delta"]),
                    beta_cap=float(rec["beta_cap"]),
                    beta_volt=float(rec["beta_volt"]),
                    ms=float(rec["ms"]),
                )
            )
    return rows


def write_summary_csv(summaries: Sequence[Summary], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["alg", "tag", "n", "mean_ratio", "ci95_ratio", "mean_utility", "mean_ms", "max_delta"]
        )
        for s in summaries:
            w.writerow(
                [s.alg, s.tag, s.n, s.mean_ratio, s.ci95_ratio, s.mean_utility, s.mean_ms, s.max_delta]
            )


def gnuplot_table(summaries: Sequence[Summary]) -> str:
    """Whitespace-separated `n mean ci` blocks per (alg, tag), gnuplot-ready."""
    lines = []
    key = None
    for s in sorted(summaries, key=lambda s: (s.alg, s.tag, s.n)):
        if (s.alg, s.tag) != key:
            if key is not None:
                lines.append("")
                lines.append("")
            key = (s.alg, s.tag)
            lines.append(f"# {s.alg} {s.tag}")
        lines.append(f"{s.n} {s.mean_ratio:.6f} {s.ci95_ratio:.6f}")
    return "\n".join(lines) + "\n"


def scenario_to_json(customers: Sequence[Customer], spec: ScenarioSpec | None = None) -> str:
    return json.dumps(customers_to_dict(customers, spec), sort_keys=True, indent=2)
