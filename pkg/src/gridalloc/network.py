"""Radial (tree) distribution network model, path indexing and file I/O.

A network is a rooted tree of buses connected by impedance/capacity edges.
Bus 0 is always the root (the feeder / generation bus) and, by convention,
has exactly one child.  Since every non-root bus has exactly one parent
edge, edges are keyed throughout by their downstream (child) bus id.
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

ROOT = 0

DEFAULT_VMIN_SQ = 0.81
DEFAULT_VMAX_SQ = 1.21


class ParseError(ValueError):
    """Malformed network file row."""


class TopologyError(ValueError):
    """Edge list is not a tree rooted at bus 0."""


@dataclass(frozen=True)
class PerUnitBase:
    """Per-unit normalization base: apparent power (VA) and line voltage (V)."""

    s_va: float = 1e6
    v_v: float = 12660.0

    def __post_init__(self):
        if self.s_va <= 0 or self.v_v <= 0:
            raise ValueError("per-unit base quantities must be strictly positive")

    def to_pu(self, s_va: complex) -> complex:
        return s_va / self.s_va

    def from_pu(self, s_pu: complex) -> complex:
        return s_pu * self.s_va


@dataclass(frozen=True)
class Edge:
    """Directed line from parent bus `src` to child bus `dst` (p.u. quantities)."""

    src: int
    dst: int
    r: float
    x: float
    capacity: float = math.inf

    def __post_init__(self):
        if self.r <= 0 or self.x <= 0:
            raise ValueError(
                f"edge ({self.src},{self.dst}): r and x must be strictly positive"
            )
        if self.capacity < 0:
            raise ValueError(f"edge ({self.src},{self.dst}): capacity must be >= 0")

    @property
    def z(self) -> complex:
        return complex(self.r, self.x)

    @property
    def z_abs(self) -> float:
        return math.hypot(self.r, self.x)


@dataclass(frozen=True)
class RadialNetwork:
    """Validated rooted tree of buses and edges.

    `edge_of[j]` is the unique edge whose downstream bus is j; `children[i]`
    lists the child buses of i in insertion order.  Instances are immutable
    and safe to share across workers.
    """

    edges: tuple[Edge, ...]
    base: PerUnitBase = PerUnitBase()
    vmin_sq: float = DEFAULT_VMIN_SQ
    vmax_sq: float = DEFAULT_VMAX_SQ
    edge_of: Mapping[int, Edge] = field(init=False, repr=False, compare=False)
    children: Mapping[int, tuple[int, ...]] = field(init=False, repr=False, compare=False)
    topo_order: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        edge_of: dict[int, Edge] = {}
        children: dict[int, list[int]] = {}
        for e in self.edges:
            if e.dst == ROOT:
                raise TopologyError("root bus 0 cannot have a parent edge")
            if e.dst in edge_of:
                raise TopologyError(f"bus {e.dst} has multiple parents")
            edge_of[e.dst] = e
            children.setdefault(e.src, []).append(e.dst)
        if not self.edges:
            raise TopologyError("network has no edges")
        if len(children.get(ROOT, [])) != 1:
            raise TopologyError("root bus 0 must have exactly one child")
        # BFS from root; anything unreached is disconnected (or on a cycle).
        order = [ROOT]
        seen = {ROOT}
        for bus in order:
            for c in children.get(bus, ()):
                if c in seen:
                    raise TopologyError(f"cycle through bus {c}")
                seen.add(c)
                order.append(c)
        if len(seen) != len(self.edges) + 1:
            unreached = sorted(set(edge_of) - seen)
            raise TopologyError(f"buses not reachable from root: {unreached}")
        object.__setattr__(self, "edge_of", edge_of)
        object.__setattr__(
            self, "children", {b: tuple(cs) for b, cs in children.items()}
        )
        object.__setattr__(self, "topo_order", tuple(order))

    @property
    def buses(self) -> tuple[int, ...]:
        return self.topo_order

    @property
    def non_root_buses(self) -> tuple[int, ...]:
        return self.topo_order[1:]

    def parent(self, bus: int) -> int:
        return self.edge_of[bus].src


@dataclass(frozen=True)
class PathIndex:
    """Root-paths and downstream sets for every edge of a network.

    `edge_path[j]` lists edge keys from edge (i,j) up to the root, the edge
    itself first.  `root_path[j]` is the same sequence reversed (root side
    first), which is what prefix-intersection computations want.
    """

    net: RadialNetwork
    edge_path: Mapping[int, tuple[int, ...]] = field(init=False, repr=False)
    root_path: Mapping[int, tuple[int, ...]] = field(init=False, repr=False)
    downstream: Mapping[int, frozenset[int]] = field(init=False, repr=False)
    eta: int = field(init=False)
    leaves: frozenset[int] = field(init=False)

    def __post_init__(self):
        net = self.net
        root_path: dict[int, tuple[int, ...]] = {}
        for bus in net.non_root_buses:
            src = net.edge_of[bus].src
            prefix = root_path[src] if src != ROOT else ()
            root_path[bus] = prefix + (bus,)
        edge_path = {b: p[::-1] for b, p in root_path.items()}
        downstream: dict[int, set[int]] = {b: {b} for b in net.non_root_buses}
        for bus in reversed(net.topo_order):
            if bus == ROOT:
                continue
            src = net.edge_of[bus].src
            if src != ROOT:
                downstream[src] |= downstream[bus]
        leaves = frozenset(
            b for b in net.non_root_buses if not net.children.get(b)
        )
        object.__setattr__(self, "edge_path", edge_path)
        object.__setattr__(self, "root_path", root_path)
        object.__setattr__(
            self, "downstream", {b: frozenset(s) for b, s in downstream.items()}
        )
        object.__setattr__(self, "eta", max(len(p) for p in edge_path.values()))
        object.__setattr__(self, "leaves", leaves)

    def customer_path(self, bus: int) -> tuple[int, ...]:
        """Path (edge keys, customer side first) from a customer's bus to the root."""
        return self.edge_path[bus]


def build_paths(net: RadialNetwork) -> PathIndex:
    return PathIndex(net)


_TUPLE_ROW = re.compile(r"^\s*\(\s*(\d+)\s*,\s*(\d+)\s*\)\s*$")


def _parse_edge_fields(fields: list[str], lineno: int) -> Edge:
    # Two accepted row shapes: "from,to,r,x,cap" and "(from,to),r,x,cap".
    m = _TUPLE_ROW.match(fields[0]) if fields else None
    if m is not None:
        if len(fields) != 4:
            raise ParseError(f"line {lineno}: expected '(i,j), r, x, cap'")
        src, dst = int(m.group(1)), int(m.group(2))
        rest = fields[1:]
    else:
        if len(fields) != 5:
            raise ParseError(f"line {lineno}: expected 'from,to,r,x,cap'")
        try:
            src, dst = int(fields[0]), int(fields[1])
        except ValueError as exc:
            raise ParseError(f"line {lineno}: bad bus id") from exc
        rest = fields[2:]
    if src < 0 or dst < 0:
        raise ParseError(f"line {lineno}: bus ids must be non-negative")
    try:
        r, x, cap = (float(v) for v in rest)
    except ValueError as exc:
        raise ParseError(f"line {lineno}: bad numeric field") from exc
    return Edge(src, dst, r, x, cap)


def _edges_from_csv(text: str) -> list[Edge]:
    edges = []
    reader = csv.reader(text.splitlines())
    for lineno, fields in enumerate(reader, start=1):
        fields = [f.strip() for f in fields if f.strip() != ""]
        if not fields or fields[0].startswith("#"):
            continue
        if lineno == 1 and fields[0].lower() in ("from", "(from"):
            continue
        edges.append(_parse_edge_fields(fields, lineno))
    return edges


def network_from_dict(doc: dict) -> RadialNetwork:
    base_doc = doc.get("base", {})
    base = PerUnitBase(
        s_va=float(base_doc.get("s_va", 1e6)), v_v=float(base_doc.get("v_v", 12660.0))
    )
    edges = []
    for i, row in enumerate(doc["edges"], start=1):
        try:
            edges.append(
                Edge(
                    int(row["from"]),
                    int(row["to"]),
                    float(row["r_pu"]),
                    float(row["x_pu"]),
                    float(row.get("cap_pu", math.inf)),
                )
            )
        except (KeyError, TypeError) as exc:
            raise ParseError(f"edge entry {i}: {exc}") from exc
    return RadialNetwork(
        edges=tuple(edges),
        base=base,
        vmin_sq=float(doc.get("vmin_sq", DEFAULT_VMIN_SQ)),
        vmax_sq=float(doc.get("vmax_sq", DEFAULT_VMAX_SQ)),
    )


def network_to_dict(net: RadialNetwork) -> dict:
    return {
        "base": {"s_va": net.base.s_va, "v_v": net.base.v_v},
        "vmin_sq": net.vmin_sq,
        "vmax_sq": net.vmax_sq,
        "edges": [
            {"from": e.src, "to": e.dst, "r_pu": e.r, "x_pu": e.x, "cap_pu": e.capacity}
            for e in net.edges
        ],
    }


def load_network(source: str | Path) -> RadialNetwork:
    """Load a network from a JSON document or a CSV edge list.

    CSV rows are `from,to,r_pu,x_pu,cap_pu` (a `(from,to)` tuple first field
    is also accepted).  A JSON sidecar named `<stem>.json` next to the CSV,
    if present, supplies base quantities and voltage limits.
    """
    path = Path(source)
    text = path.read_text()
    if path.suffix.lower() == ".json" or text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(str(exc)) from exc
        return network_from_dict(doc)
    edges = _edges_from_csv(text)
    base = PerUnitBase()
    vmin_sq, vmax_sq = DEFAULT_VMIN_SQ, DEFAULT_VMAX_SQ
    sidecar = path.with_suffix(".json")
    if sidecar.exists():
        doc = json.loads(sidecar.read_text())
        base_doc = doc.get("base", {})
        base = PerUnitBase(
            s_va=float(base_doc.get("s_va", base.s_va)),
            v_v=float(base_doc.get("v_v", base.v_v)),
        )
        vmin_sq = float(doc.get("vmin_sq", vmin_sq))
        vmax_sq = float(doc.get("vmax_sq", vmax_sq))
    return RadialNetwork(
        edges=tuple(edges), base=base, vmin_sq=vmin_sq, vmax_sq=vmax_sq
    )


def network_38() -> RadialNetwork:
    """The bundled 38-node benchmark network."""
    return load_network(Path(__file__).parent / "data" / "net38.csv")


def single_edge_network(
    r: float = 1.0,
    x: float = 1.0,
    capacity: float = math.inf,
    vmin_sq: float = DEFAULT_VMIN_SQ,
    vmax_sq: float = DEFAULT_VMAX_SQ,
) -> RadialNetwork:
    """A two-bus network 0-1, the smallest valid instance."""
    return RadialNetwork(
        edges=(Edge(0, 1, r, x, capacity),), vmin_sq=vmin_sq, vmax_sq=vmax_sq
    )
