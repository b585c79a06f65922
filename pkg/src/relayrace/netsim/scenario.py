"""Scenario configuration: nodes, links, chains, workloads.

Scenarios are TOML documents with sections ``[scenario]``, ``[ledger]``,
``[[nodes]]``, ``[[links]]``, ``[[chains]]`` and ``[[workloads]]``.
Durations in the file are seconds (floats); internally everything is
integer nanoseconds so microsecond radio hops and hour-long crack times
coexist without floating-point drift.

Validation is collecting, not fail-fast: ``validate`` returns every
violation it can find, each naming the offending section and field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

NS_PER_SECOND = 1_000_000_000
SPEED_OF_LIGHT_M_S = 299_792_458

ROLES = ("sender", "forwarder", "receiver", "cracker", "cache")
LINK_KINDS = ("edge_wireless", "isp_backhaul", "control_plane")
WORKLOAD_MODELS = (
    "double_incentive",
    "all_or_nothing",
    "contract",
    "competing",
    "cache_demo",
    "path_compare",
)
FAULT_ACTIONS = ("drop", "corrupt")


class ScenarioError(Exception):
    """Raised when a scenario file cannot be parsed or fails validation."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


def ns(seconds: float) -> int:
    """Convert a seconds value from config into integer nanoseconds."""
    return round(seconds * NS_PER_SECOND)


@dataclass(frozen=True)
class NodeSpec:
    node_id: str
    role: str
    position: Optional[tuple[float, float]] = None
    hash_rate: int = 0  # hash applications per simulated second (crackers)
    cache_capacity: int = 0  # bytes (caches)
    forwarding_cost: int = 0  # currency units per message forwarded
    price: int = 0  # asking price for cache/origin delivery bids


@dataclass(frozen=True)
class LinkSpec:
    endpoints: tuple[str, str]
    kind: str
    bandwidth: int  # bytes per second
    propagation_ns: int
    technology_tag: str = ""


@dataclass(frozen=True)
class ChainSpec:
    chain_id: str
    iterations: int
    values: tuple[int, ...]
    publish_time_ns: int = 0


@dataclass(frozen=True)
class FaultSpec:
    """Scripted loss or corruption of one chunk on one link."""

    action: str
    link: tuple[str, str]
    chunk: int
    probability: float = 1.0


@dataclass
class Workload:
    workload_id: str
    model: str
    chain: Optional[str] = None
    path: tuple[str, ...] = ()
    paths: tuple[tuple[str, ...], ...] = ()
    message_length: int = 0
    chunk_size: int = 0
    start_ns: int = 0
    withhold_ack: tuple[str, ...] = ()
    faults: tuple[FaultSpec, ...] = ()
    generation_size: int = 0
    recode: bool = False
    max_rounds: int = 0
    principal: str = ""
    contractors: tuple[str, ...] = ()
    price: int = 0
    margin: float = 0.1
    deadline_ns: int = 0
    delivery: dict = field(default_factory=dict)
    content_id: str = ""
    origin: str = ""
    requester: str = ""
    request_times_ns: tuple[int, ...] = ()
    src: str = ""
    dst: str = ""
    isp_path: tuple[str, ...] = ()
    edge_path: tuple[str, ...] = ()
    window_capacity: int = 16


@dataclass
class Scenario:
    name: str
    seed: int
    horizon_ns: int
    control_latency_ns: int
    hop_processing_ns: int
    ack_timeout_ns: int
    delivery_timeout_ns: int
    confirmation_delay_ns: int
    publication_delay_ns: int
    nodes: dict[str, NodeSpec]
    links: list[LinkSpec]
    chains: list[ChainSpec]
    workloads: list[Workload]

    def link_between(self, a: str, b: str, kind: Optional[str] = None) -> Optional[LinkSpec]:
        """Links are bidirectional; first declared match wins."""
        for link in self.links:
            if set(link.endpoints) == {a, b} and (kind is None or link.kind == kind):
                return link
        return None

    def control_latency_between(self, a: str, b: str) -> int:
        link = self.link_between(a, b, kind="control_plane")
        return link.propagation_ns if link is not None else self.control_latency_ns

    def nodes_with_role(self, role: str) -> list[NodeSpec]:
        return [n for n in self.nodes.values() if n.role == role]


def transfer_time(message_length: int, link: LinkSpec) -> int:
    """propagation + length/bandwidth, in nanoseconds."""
    return link.propagation_ns + (message_length * NS_PER_SECOND) // link.bandwidth


def link_cost(message_length: int, link: LinkSpec, hop_processing_ns: int) -> int:
    """Per-hop traversal cost. Edge links add per-hop processing;
    ISP/control link delays are configured end to end."""
    cost = transfer_time(message_length, link)
    if link.kind == "edge_wireless":
        cost += hop_processing_ns
    return cost


def path_latency(scenario: Scenario, path: tuple[str, ...], message_length: int) -> int:
    """Closed-form single-message latency along a path (one chunk)."""
    total = 0
    for a, b in zip(path, path[1:]):
        link = scenario.link_between(a, b)
        if link is None:
            raise ScenarioError([f"no link between {a!r} and {b!r}"])
        total += link_cost(message_length, link, scenario.hop_processing_ns)
    return total


def compare_paths(
    scenario: Scenario,
    src: str,
    dst: str,
    isp_path: tuple[str, ...],
    edge_path: tuple[str, ...],
    message_length: int,
) -> dict[str, int]:
    """End-to-end latency of the wired route vs the multihop edge route."""
    for name, p in (("isp_path", isp_path), ("edge_path", edge_path)):
        if not p or p[0] != src or p[-1] != dst:
            raise ScenarioError([f"{name} must run from {src!r} to {dst!r}"])
    return {
        "isp_latency": path_latency(scenario, isp_path, message_length),
        "edge_latency": path_latency(scenario, edge_path, message_length),
    }


# -- parsing -----------------------------------------------------------


def _distance(a: Optional[tuple[float, float]], b: Optional[tuple[float, float]]) -> Optional[float]:
    if a is None or b is None:
        return None
    return math.dist(a, b)


def parse_scenario(doc: dict) -> tuple[Optional[Scenario], list[str]]:
    """Build a Scenario from a parsed TOML document, collecting diagnostics.

    Returns (scenario, diagnostics); the scenario is None when the
    document is structurally unusable.
    """
    diags: list[str] = []

    def num(section: str, table: dict, key: str, default, minimum=None, integer=False):
        value = table.get(key, default)
        if value is None:
            diags.append(f"{section}: missing required field {key!r}")
            return default if default is not None else 0
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            diags.append(f"{section}: field {key!r} must be a number, got {value!r}")
            return default if default is not None else 0
        if minimum is not None and value < minimum:
            diags.append(f"{section}: field {key!r} must be >= {minimum}, got {value}")
        return int(value) if integer else value

    meta = doc.get("scenario", {})
    name = meta.get("name", "unnamed")
    seed = num("[scenario]", meta, "seed", 0, integer=True)
    horizon_ns = ns(num("[scenario]", meta, "horizon", 3600.0, minimum=0))
    control_latency_ns = ns(num("[scenario]", meta, "control_latency", 0.02, minimum=0))
    hop_processing_ns = ns(num("[scenario]", meta, "hop_processing", 0.0001, minimum=0))
    ack_timeout_ns = ns(num("[scenario]", meta, "ack_timeout", 30.0, minimum=0))
    delivery_timeout_ns = ns(num("[scenario]", meta, "delivery_timeout", 60.0, minimum=0))

    ledger_tbl = doc.get("ledger", {})
    confirmation_delay_ns = ns(num("[ledger]", ledger_tbl, "confirmation_delay", 0.0, minimum=0))
    publication_delay_ns = ns(num("[ledger]", ledger_tbl, "publication_delay", 0.0, minimum=0))

    nodes: dict[str, NodeSpec] = {}
    for i, tbl in enumerate(doc.get("nodes", [])):
        section = f"nodes[{i}]"
        node_id = tbl.get("id")
        if not isinstance(node_id, str) or not node_id:
            diags.append(f"{section}: missing node id")
            continue
        if node_id in nodes:
            diags.append(f"{section}: duplicate node id {node_id!r}")
            continue
        role = tbl.get("role", "")
        if role not in ROLES:
            diags.append(f"{section} ({node_id}): role must be one of {ROLES}, got {role!r}")
        position = None
        if "position" in tbl:
            pos = tbl["position"]
            if (not isinstance(pos, (list, tuple)) or len(pos) != 2
                    or not all(isinstance(v, (int, float)) for v in pos)):
                diags.append(f"{section} ({node_id}): position must be [x, y] in meters")
            else:
                position = (float(pos[0]), float(pos[1]))
        hash_rate = num(section, tbl, "hash_rate", 0, integer=True)
        if role == "cracker" and hash_rate <= 0:
            diags.append(f"{section} ({node_id}): cracker needs hash_rate > 0")
        cache_capacity = num(section, tbl, "cache_capacity", 0, minimum=0, integer=True)
        nodes[node_id] = NodeSpec(
            node_id=node_id,
            role=role,
            position=position,
            hash_rate=hash_rate,
            cache_capacity=cache_capacity,
            forwarding_cost=num(section, tbl, "forwarding_cost", 0, minimum=0, integer=True),
            price=num(section, tbl, "price", 0, minimum=0, integer=True),
        )

    links: list[LinkSpec] = []
    for i, tbl in enumerate(doc.get("links", [])):
        section = f"links[{i}]"
        a, b = tbl.get("a"), tbl.get("b")
        for end in (a, b):
            if end not in nodes:
                diags.append(f"{section}: endpoint {end!r} is not a declared node")
        kind = tbl.get("kind", "edge_wireless")
        if kind not in LINK_KINDS:
            diags.append(f"{section}: kind must be one of {LINK_KINDS}, got {kind!r}")
        bandwidth = num(section, tbl, "bandwidth", 1_000_000, integer=True)
        if bandwidth <= 0:
            diags.append(f"{section}: bandwidth must be > 0 bytes/second")
            bandwidth = 1
        if "propagation_delay" in tbl:
            prop_ns = ns(num(section, tbl, "propagation_delay", 0.0, minimum=0))
        elif kind == "edge_wireless" and a in nodes and b in nodes:
            dist = _distance(nodes[a].position, nodes[b].position)
            if dist is None:
                diags.append(
                    f"{section}: edge link {a!r}-{b!r} needs propagation_delay or node positions"
                )
                prop_ns = 0
            else:
                prop_ns = round(dist / SPEED_OF_LIGHT_M_S * NS_PER_SECOND)
        else:
            diags.append(f"{section}: {kind} link needs an explicit propagation_delay")
            prop_ns = 0
        links.append(
            LinkSpec(
                endpoints=(str(a), str(b)),
                kind=kind,
                bandwidth=bandwidth,
                propagation_ns=prop_ns,
                technology_tag=str(tbl.get("technology", "")),
            )
        )

    chains: list[ChainSpec] = []
    chain_ids: set[str] = set()
    for i, tbl in enumerate(doc.get("chains", [])):
        section = f"chains[{i}]"
        chain_id = tbl.get("id")
        if not isinstance(chain_id, str) or not chain_id:
            diags.append(f"{section}: missing chain id")
            continue
        if chain_id in chain_ids:
            diags.append(f"{section}: duplicate chain id {chain_id!r}")
            continue
        chain_ids.add(chain_id)
        iterations = num(section, tbl, "iterations", None, minimum=1, integer=True)
        values = tbl.get("values")
        if (not isinstance(values, list) or not values
                or not all(isinstance(v, int) and v >= 0 for v in values)):
            diags.append(f"{section} ({chain_id}): values must be a nonempty list of ints >= 0")
            values = [0]
        chains.append(
            ChainSpec(
                chain_id=chain_id,
                iterations=max(1, iterations),
                values=tuple(values),
                publish_time_ns=ns(num(section, tbl, "publish_time", 0.0, minimum=0)),
            )
        )

    workloads: list[Workload] = []
    for i, tbl in enumerate(doc.get("workloads", [])):
        section = f"workloads[{i}]"
        model = tbl.get("model", "")
        if model not in WORKLOAD_MODELS:
            diags.append(f"{section}: model must be one of {WORKLOAD_MODELS}, got {model!r}")
            continue
        faults = []
        for j, ftbl in enumerate(tbl.get("faults", [])):
            fsec = f"{section}.faults[{j}]"
            action = ftbl.get("action", "")
            if action not in FAULT_ACTIONS:
                diags.append(f"{fsec}: action must be one of {FAULT_ACTIONS}, got {action!r}")
                continue
            flink = ftbl.get("link", [])
            if not isinstance(flink, list) or len(flink) != 2:
                diags.append(f"{fsec}: link must be [a, b]")
                continue
            prob = ftbl.get("probability", 1.0)
            if not isinstance(prob, (int, float)) or not 0 <= prob <= 1:
                diags.append(f"{fsec}: probability must be in [0, 1]")
                prob = 1.0
            faults.append(
                FaultSpec(action, (str(flink[0]), str(flink[1])),
                          int(ftbl.get("chunk", 0)), float(prob))
            )
        workloads.append(
            Workload(
                workload_id=str(tbl.get("id", f"w{i}")),
                model=model,
                chain=tbl.get("chain"),
                path=tuple(tbl.get("path", [])),
                paths=tuple(tuple(p) for p in tbl.get("paths", [])),
                message_length=num(section, tbl, "message_length", 0, minimum=0, integer=True),
                chunk_size=num(section, tbl, "chunk_size", 0, minimum=0, integer=True),
                start_ns=ns(num(section, tbl, "start", 0.0, minimum=0)),
                withhold_ack=tuple(tbl.get("withhold_ack", [])),
                faults=tuple(faults),
                generation_size=num(section, tbl, "generation_size", 0, minimum=0, integer=True),
                recode=bool(tbl.get("recode", False)),
                max_rounds=num(section, tbl, "max_rounds", 0, minimum=0, integer=True),
                principal=str(tbl.get("principal", "")),
                contractors=tuple(tbl.get("contractors", [])),
                price=num(section, tbl, "price", 0, minimum=0, integer=True),
                margin=float(tbl.get("margin", 0.1)),
                deadline_ns=ns(num(section, tbl, "deadline", 60.0, minimum=0)),
                delivery=dict(tbl.get("delivery", {})),
                content_id=str(tbl.get("content_id", "")),
                origin=str(tbl.get("origin", "")),
                requester=str(tbl.get("requester", "")),
                request_times_ns=tuple(ns(t) for t in tbl.get("request_times", [])),
                src=str(tbl.get("src", "")),
                dst=str(tbl.get("dst", "")),
                isp_path=tuple(tbl.get("isp_path", [])),
                edge_path=tuple(tbl.get("edge_path", [])),
                window_capacity=num(section, tbl, "window_capacity", 16, minimum=1, integer=True),
            )
        )

    scenario = Scenario(
        name=str(name),
        seed=seed,
        horizon_ns=horizon_ns,
        control_latency_ns=control_latency_ns,
        hop_processing_ns=hop_processing_ns,
        ack_timeout_ns=ack_timeout_ns,
        delivery_timeout_ns=delivery_timeout_ns,
        confirmation_delay_ns=confirmation_delay_ns,
        publication_delay_ns=publication_delay_ns,
        nodes=nodes,
        links=links,
        chains=chains,
        workloads=workloads,
    )
    diags.extend(_validate_references(scenario))
    return scenario, diags


def _validate_references(sc: Scenario) -> list[str]:
    diags: list[str] = []
    chain_by_id = {c.chain_id: c for c in sc.chains}

    def check_path(section: str, label: str, path: tuple[str, ...], min_len: int, data=True):
        if len(path) < min_len:
            diags.append(f"{section}: {label} needs at least {min_len} nodes, got {len(path)}")
            return
        for nid in path:
            if nid not in sc.nodes:
                diags.append(f"{section}: {label} references unknown node {nid!r}")
        for a, b in zip(path, path[1:]):
            if a in sc.nodes and b in sc.nodes:
                link = sc.link_between(a, b)
                if data and (link is None or link.kind == "control_plane"):
                    diags.append(f"{section}: {label} has no data link between {a!r} and {b!r}")

    for i, w in enumerate(sc.workloads):
        section = f"workloads[{i}] ({w.workload_id})"
        # a direct sender->receiver broadcast has nobody to reward
        needs_chain = w.model in ("double_incentive", "competing") or (
            w.model == "all_or_nothing" and (len(w.path) > 2 or w.chain is not None)
        )
        chain = None
        if needs_chain:
            if w.chain not in chain_by_id:
                diags.append(f"{section}: unknown chain {w.chain!r}")
            else:
                chain = chain_by_id[w.chain]
        if w.model in ("double_incentive", "all_or_nothing"):
            check_path(section, "path", w.path, 2 if w.model == "all_or_nothing" else 3)
            if w.message_length < 1:
                diags.append(f"{section}: message_length must be >= 1")
            if not 1 <= w.chunk_size <= max(1, w.message_length):
                diags.append(f"{section}: chunk_size must be in 1..message_length")
            if chain is not None and w.path:
                n_forwarders = max(0, len(w.path) - 2)
                if len(chain.values) != n_forwarders:
                    diags.append(
                        f"{section}: chain {w.chain!r} has {len(chain.values)} reward blocks "
                        f"for {n_forwarders} forwarders (one reward block per forwarder)"
                    )
            for nid in w.withhold_ack:
                if nid not in w.path:
                    diags.append(f"{section}: withhold_ack node {nid!r} is not on the path")
        if w.model == "competing":
            if len(w.paths) < 2:
                diags.append(f"{section}: competing needs at least 2 paths")
            for p in w.paths:
                check_path(section, "paths entry", p, 3)
            if not 1 <= w.generation_size <= 255:
                diags.append(f"{section}: generation_size must be in 1..255")
            if w.message_length < 1:
                diags.append(f"{section}: message_length must be >= 1")
            if chain is not None and len(chain.values) != w.generation_size:
                diags.append(
                    f"{section}: chain {w.chain!r} needs one block per generation symbol "
                    f"({w.generation_size}), got {len(chain.values)}"
                )
            starts = {p[0] for p in w.paths if p}
            ends = {p[-1] for p in w.paths if p}
            if len(starts) > 1 or len(ends) > 1:
                diags.append(f"{section}: all competing paths must share sender and receiver")
        if w.model == "contract":
            if w.principal not in sc.nodes:
                diags.append(f"{section}: principal {w.principal!r} is not a declared node")
            if not w.contractors:
                diags.append(f"{section}: contract needs at least one contractor")
            for nid in w.contractors:
                if nid not in sc.nodes:
                    diags.append(f"{section}: contractor {nid!r} is not a declared node")
            if not 0 <= w.margin < 1:
                diags.append(f"{section}: margin must be in [0, 1)")
            dmodel = w.delivery.get("model", "direct")
            if dmodel not in ("direct", "double_incentive"):
                diags.append(f"{section}: delivery.model must be direct or double_incentive")
            elif dmodel == "double_incentive":
                check_path(section, "delivery.path", tuple(w.delivery.get("path", [])), 3)
                dchain = w.delivery.get("chain")
                if dchain not in chain_by_id:
                    diags.append(f"{section}: delivery chain {dchain!r} is unknown")
                elif len(chain_by_id[dchain].values) != max(0, len(w.delivery.get("path", [])) - 2):
                    diags.append(
                        f"{section}: delivery chain {dchain!r} must carry one reward block "
                        f"per forwarder on delivery.path"
                    )
            else:
                check_path(section, "delivery.path", tuple(w.delivery.get("path", [])), 2)
            if w.message_length < 1:
                diags.append(f"{section}: message_length must be >= 1")
        if w.model == "cache_demo":
            for label, nid in (("origin", w.origin), ("requester", w.requester)):
                if nid not in sc.nodes:
                    diags.append(f"{section}: {label} {nid!r} is not a declared node")
            check_path(section, "path", w.path, 2)
            if len(w.request_times_ns) < 1:
                diags.append(f"{section}: request_times must list at least one request")
            if w.message_length < 1:
                diags.append(f"{section}: message_length must be >= 1")
            if not 1 <= w.chunk_size <= max(1, w.message_length):
                diags.append(f"{section}: chunk_size must be in 1..message_length")
        if w.model == "path_compare":
            for nid in (w.src, w.dst):
                if nid not in sc.nodes:
                    diags.append(f"{section}: endpoint {nid!r} is not a declared node")
            check_path(section, "isp_path", w.isp_path, 2)
            check_path(section, "edge_path", w.edge_path, 2)
            for label, p in (("isp_path", w.isp_path), ("edge_path", w.edge_path)):
                if p and (p[0] != w.src or p[-1] != w.dst):
                    diags.append(f"{section}: {label} must run from {w.src!r} to {w.dst!r}")
        for j, f in enumerate(w.faults):
            for nid in f.link:
                if nid not in sc.nodes:
                    diags.append(f"{section}.faults[{j}]: link endpoint {nid!r} unknown")
    return diags


def load_scenario_text(text: str) -> tuple[Optional[Scenario], list[str]]:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        return None, [f"TOML parse error: {exc}"]
    return parse_scenario(doc)


def load_scenario(path) -> Scenario:
    """Load and validate; raises ScenarioError listing every violation."""
    with open(path, "rb") as fh:
        text = fh.read().decode("utf-8")
    scenario, diags = load_scenario_text(text)
    if diags or scenario is None:
        raise ScenarioError(diags or ["empty scenario document"])
    return scenario
