"""Command-line interface.

Exit codes: 0 success, 2 input/validation failure, 3 solver guard refusal.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .alloc import (
    InfeasibleRelaxation,
    allocation_utility,
    greedy_alloc,
    inelas_dem_alloc,
    mix_dem_alloc,
)
from .customers import total_utility
from .hardness import (
    SubSumInstance,
    gadget_simplified_voltage,
    gadget_voltage,
    subset_sum_dp,
)
from .network import (
    ParseError,
    PathIndex,
    RadialNetwork,
    TopologyError,
    load_network,
    network_38,
    network_from_dict,
    network_to_dict,
)
from .oracle import TooLarge, brute_force_maxopf, brute_force_smaxopf
from .powerflow import OperatingLimits, opf_feasible
from .scenarios import (
    ScenarioSpec,
    customers_from_dict,
    customers_to_dict,
    generate_scenario,
    read_metrics_csv,
    summarize,
    gnuplot_table,
    write_summary_csv,
)
from .simplified import LOSS_MODES, SimplifiedLimits, loss_bounds, simplified_limits

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_GUARD = 3


def _write_json(doc: dict, out: str | None) -> None:
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _load_net(args) -> RadialNetwork:
    if getattr(args, "network", None):
        return load_network(args.network)
    return network_38()


def cmd_validate(args) -> int:
    net = load_network(args.network)
    print(f"ok: {len(net.edges)} edges, {len(net.buses)} buses")
    return EXIT_OK


def _parse_spec(text: str) -> ScenarioSpec:
    # TAG:n[:elastic_fraction[:seed]], e.g. CR:100:0.25:7
    parts = text.split(":")
    if len(parts) < 2:
        raise ValueError("spec format is TAG:n[:elastic_fraction[:seed]]")
    tag, n = parts[0].upper(), int(parts[1])
    frac = float(parts[2]) if len(parts) > 2 else 0.0
    seed = int(parts[3]) if len(parts) > 3 else 0
    return ScenarioSpec(case_tag=tag, n=n, elastic_fraction=frac, seed=seed)


def cmd_gen(args) -> int:
    spec = _parse_spec(args.spec)
    net = _load_net(args)
    customers = generate_scenario(spec, net)
    _write_json(customers_to_dict(customers, spec), args.output)
    return EXIT_OK


def _load_scenario(args) -> tuple[RadialNetwork, list, dict]:
    doc = json.loads(Path(args.scenario).read_text())
    customers = customers_from_dict(doc)
    if getattr(args, "network", None):
        net = load_network(args.network)
    elif "network" in doc:
        net = network_from_dict(doc["network"])
    else:
        net = network_38()
    return net, customers, doc


def _op_limits_from_doc(doc: dict, net: RadialNetwork) -> OperatingLimits:
    if "op_limits" not in doc:
        return OperatingLimits.for_network(net)
    ol = doc["op_limits"]
    return OperatingLimits(
        v0=float(ol.get("v0", 1.0)),
        vmin_sq=float(ol.get("vmin_sq", net.vmin_sq)),
        vmax_sq=float(ol.get("vmax_sq", net.vmax_sq)),
        use_capacity=bool(ol.get("use_capacity", True)),
        use_voltage=bool(ol.get("use_voltage", True)),
    )


def _s_limits_from_doc(doc: dict, net: RadialNetwork, paths: PathIndex) -> SimplifiedLimits | None:
    if "s_limits" not in doc:
        return None
    sl = doc["s_limits"]
    edges = net.non_root_buses

    def col(name, default):
        raw = sl.get(name, {})
        return {j: float(raw.get(str(j), default)) for j in edges}

    return SimplifiedLimits(
        chat=col("chat", math.inf),
        lhat=col("lhat", 0.0),
        vbar=col("vbar", math.inf),
        vlower=col("vlower", -math.inf),
        leaves=paths.leaves,
        include_lower_voltage=bool(sl.get("include_lower_voltage", True)),
    )


def cmd_solve(args) -> int:
    net, customers, doc = _load_scenario(args)
    paths = PathIndex(net)
    include_lower = not args.no_lower_voltage
    op_limits = _op_limits_from_doc(doc, net)
    inelastic = [c for c in customers if not c.elastic]
    result: dict = {"alg": args.alg, "n": len(customers), "delta": 0.0}
    if args.alg in ("greedy", "inelas", "oracle-s"):
        limits = _s_limits_from_doc(doc, net, paths)
        if limits is None:
            bounds = loss_bounds(net, paths, inelastic, mode=args.loss_mode)
            limits = simplified_limits(
                net, paths, bounds, include_lower_voltage=include_lower
            )
        if args.alg == "greedy":
            chosen = greedy_alloc(net, paths, limits, inelastic)
        elif args.alg == "inelas":
            chosen, _ = inelas_dem_alloc(net, paths, limits, inelastic)
        else:
            res = brute_force_smaxopf(net, paths, limits, inelastic)
            result["utility"] = res.best_utility
            result["allocation"] = [round(float(v), 12) for v in res.best_allocation]
            _write_json(result, args.output)
            return EXIT_OK
        x = np.zeros(len(inelastic))
        x[list(chosen)] = 1.0
        result["utility"] = total_utility(inelastic, x)
        result["allocation"] = [float(v) for v in x]
    elif args.alg == "mix":
        mres = mix_dem_alloc(
            net,
            paths,
            customers,
            epsilon=args.epsilon,
            loss_mode=args.loss_mode,
            op_limits=op_limits,
            include_lower_voltage=include_lower,
        )
        result["delta"] = mres.delta
        result["utility"] = allocation_utility(customers, mres.allocation)
        result["allocation"] = [round(float(v), 12) for v in mres.allocation]
        ok, report = opf_feasible(net, customers, mres.allocation, op_limits)
        result["feasible"] = bool(ok)
        result["beta_cap"] = report.capacity_beta
        result["beta_volt"] = report.voltage_beta
    elif args.alg == "oracle":
        res = brute_force_maxopf(net, paths, customers, op_limits, epsilon=args.epsilon)
        result["utility"] = res.best_utility
        result["allocation"] = [round(float(v), 12) for v in res.best_allocation]
    else:
        raise ValueError(f"unknown algorithm {args.alg!r}")
    _write_json(result, args.output)
    return EXIT_OK


def _parse_sizes(text: str) -> list[int]:
    sizes: list[int] = []
    for item in text.split(","):
        if ".." in item:
            a, b = (int(v) for v in item.split("..", 1))
            n = a
            while n < b:
                sizes.append(n)
                n *= 2
            sizes.append(b)
        else:
            sizes.append(int(item))
    return sizes


def cmd_bench(args) -> int:
    import csv as _csv
    import time

    net = network_38()
    paths = PathIndex(net)
    rows = [("n", "rep", "ms")]
    for n in _parse_sizes(args.sizes):
        spec = ScenarioSpec(case_tag="CR", n=n, seed=args.seed)
        for rep in range(args.reps):
            rng = np.random.default_rng(np.random.SeedSequence(args.seed).spawn(rep + 1)[-1])
            customers = generate_scenario(spec, net, rng=rng)
            bounds = loss_bounds(net, paths, customers)
            limits = simplified_limits(net, paths, bounds, include_lower_voltage=False)
            t0 = time.perf_counter()
            inelas_dem_alloc(net, paths, limits, customers)
            rows.append((n, rep, (time.perf_counter() - t0) * 1e3))
    if args.output and args.output != "-":
        with open(args.output, "w", newline="") as fh:
            _csv.writer(fh).writerows(rows)
    else:
        for row in rows:
            print(",".join(str(v) for v in row))
    return EXIT_OK


def _parse_subsum(text: str) -> SubSumInstance:
    # "1,2,3:3" -> values (1,2,3), target 3
    try:
        values_txt, target_txt = text.split(":", 1)
        values = tuple(int(v) for v in values_txt.split(","))
        return SubSumInstance(values=values, target=int(target_txt))
    except (ValueError, TypeError) as exc:
        raise ValueError(f"bad subset-sum spec {text!r}: {exc}") from exc


def cmd_gadget(args) -> int:
    ss = _parse_subsum(args.subsum)
    if args.variant == "voltage":
        g = gadget_voltage(ss)
    else:
        g = gadget_simplified_voltage(ss)
    doc = customers_to_dict(g.customers)
    doc["network"] = network_to_dict(g.network)
    doc["variant"] = g.variant
    doc["scale"] = g.scale
    doc["subsum"] = {"values": list(ss.values), "target": ss.target, "yes": subset_sum_dp(ss)}
    if g.op_limits is not None:
        doc["op_limits"] = {
            "v0": g.op_limits.v0,
            "vmin_sq": g.op_limits.vmin_sq,
            "vmax_sq": g.op_limits.vmax_sq,
            "use_capacity": g.op_limits.use_capacity,
            "use_voltage": g.op_limits.use_voltage,
        }
    if g.s_limits is not None:
        doc["s_limits"] = {
            "chat": {str(j): v for j, v in g.s_limits.chat.items()},
            "vbar": {str(j): v for j, v in g.s_limits.vbar.items()},
            "vlower": {str(j): v for j, v in g.s_limits.vlower.items()},
            "include_lower_voltage": g.s_limits.include_lower_voltage,
        }
    _write_json(doc, args.output)
    return EXIT_OK


def cmd_report(args) -> int:
    rows = read_metrics_csv(args.input)
    summaries = summarize(rows)
    if args.output and args.output != "-":
        write_summary_csv(summaries, args.output)
    else:
        for s in summaries:
            print(s)
    if args.gnuplot:
        Path(args.gnuplot).write_text(gnuplot_table(summaries))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="gridalloc",
        description="Utility-maximizing demand allocation on radial distribution networks.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("validate", help="check a network file")
    sp.add_argument("network")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("gen", help="generate a random scenario")
    sp.add_argument("spec", help="TAG:n[:elastic_fraction[:seed]], e.g. CR:100:0.25:7")
    sp.add_argument("--network", help="network file (default: bundled 38-node)")
    sp.add_argument("-o", "--output", help="output JSON (default stdout)")
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("solve", help="run an allocation algorithm on a scenario")
    sp.add_argument("--alg", required=True, choices=["greedy", "inelas", "mix", "oracle-s", "oracle"])
    sp.add_argument("--network", help="network file (default: scenario-embedded or bundled)")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--epsilon", type=float, default=0.005)
    sp.add_argument("--loss-mode", choices=list(LOSS_MODES), default="aggregate")
    sp.add_argument("--no-lower-voltage", action="store_true")
    sp.add_argument("-o", "--output", help="result JSON (default stdout)")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("bench", help="time the grouped greedy allocator")
    sp.add_argument("--sizes", default="250..2000", help="comma list; a..b doubles from a to b")
    sp.add_argument("--reps", type=int, default=3)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("-o", "--output", help="times CSV (default stdout)")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("gadget", help="emit a subset-sum reduction instance")
    sp.add_argument("--subsum", required=True, help='e.g. "1,2,3:3"')
    sp.add_argument("--variant", choices=["voltage", "simplified"], default="voltage")
    sp.add_argument("-o", "--output", help="gadget scenario JSON (default stdout)")
    sp.set_defaults(func=cmd_gadget)

    sp = sub.add_parser("report", help="summarize a metrics CSV")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("-o", "--output", help="summary CSV (default stdout)")
    sp.add_argument("--gnuplot", help="also write a gnuplot-ready table here")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (ParseError, TopologyError, InfeasibleRelaxation, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
