"""Deterministic discrete-event simulator.

One global event queue ordered by (time, sequence); handlers are
reducers invoked synchronously and may only schedule into the future.
Reports are a pure function of (scenario, seed): message bodies,
secrets, coding coefficients and fault draws all come from RNG streams
derived from the scenario seed, and every tie is broken by the
monotone event sequence number.

Data chunks ride the wireless links declared in the scenario
(store-and-forward, per-link cost = propagation + serialization +
per-hop processing for edge links, no queueing model). Control traffic
(setups, acknowledgement secrets, key releases, claims) rides the
higher-latency control plane. Puzzle crackers sit next to the ledger:
they observe publications and revealed keys instantly and their claims
arrive with zero latency, exactly ``iterations / hash_rate`` after they
start on a block.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Optional

from .. import coding, protocol
from ..economics import quote_sort_key, settle, surge_price, utilization, CapabilityQuote
from ..ledger import Ledger, LedgerParams
from ..timelock import PuzzleChain, generate_chain, solve_block
from .scenario import (
    NS_PER_SECOND,
    LinkSpec,
    Scenario,
    Workload,
    compare_paths,
    link_cost,
    transfer_time,
)

MAX_EVENTS = 2_000_000


def derived_seed(base_seed: int, label: str) -> int:
    """Stable per-stream RNG seed: chains, workloads, and faults must not
    share a stream or insertion order would leak between them."""
    digest = hashlib.sha256(f"{base_seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _digest8(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()[:8]


# -- event payloads ----------------------------------------------------


@dataclass(frozen=True)
class ChainVisible:
    chain_id: str


@dataclass(frozen=True)
class WorkloadStart:
    workload_id: str


@dataclass(frozen=True)
class RoundTick:
    workload_id: str
    round_index: int


@dataclass(frozen=True)
class DataChunk:
    workload_id: str
    label: str  # delivery label for latency rows / routing
    path: tuple[str, ...]
    position: int  # index of the receiving node within path
    seq: int
    data: bytes


@dataclass(frozen=True)
class DataPacket:
    workload_id: str
    path: tuple[str, ...]
    position: int
    packet: coding.CodedPacket


@dataclass(frozen=True)
class CtrlSetup:
    workload_id: str
    to: str
    hop_setup: protocol.HopSetup
    manifest: protocol.MessageManifest
    chain_id: str


@dataclass(frozen=True)
class CtrlAck:
    workload_id: str
    to: str
    secret: bytes
    sender_node: str


@dataclass(frozen=True)
class CtrlCompletion:
    """End-to-end acknowledgement back to the sender; carries the
    per-innovative-packet credit order in the competing model."""

    workload_id: str
    to: str
    credits: tuple[str, ...] = ()


@dataclass(frozen=True)
class CtrlKey:
    workload_id: str
    to: str
    chain_id: str
    block_index: int
    key: bytes


@dataclass(frozen=True)
class ClaimTx:
    chain_id: str
    block_index: int
    key: bytes
    claimant: str


@dataclass(frozen=True)
class CrackFinish:
    cracker: str
    chain_id: str
    block_index: int
    generation: int


@dataclass(frozen=True)
class AckTimeout:
    workload_id: str
    node: str


@dataclass(frozen=True)
class DeliveryTimeout:
    workload_id: str


@dataclass(frozen=True)
class ClaimConfirm:
    chain_id: str
    block_index: int


@dataclass(frozen=True)
class CacheRequest:
    workload_id: str
    request_index: int


@dataclass(order=True)
class SimEvent:
    time: int
    sequence: int
    payload: object = field(compare=False)


@dataclass(frozen=True)
class TraceRow:
    time: int
    node: str
    phase_from: str
    phase_to: str
    event: str
    actions: str


@dataclass(frozen=True)
class LatencyRow:
    workload: str
    label: str
    path: str
    message_length: int
    latency_ns: int


# -- node-side helpers --------------------------------------------------


class CacheStore:
    """Per-node content store with LRU eviction within a byte budget."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self._items: OrderedDict[str, int] = OrderedDict()

    def has(self, content_id: str) -> bool:
        return content_id in self._items

    def touch(self, content_id: str):
        if content_id in self._items:
            self._items.move_to_end(content_id)

    def store(self, content_id: str, size: int) -> bool:
        if size > self.capacity:
            return False
        if content_id in self._items:
            self._items.move_to_end(content_id)
            return True
        while self._items and sum(self._items.values()) + size > self.capacity:
            self._items.popitem(last=False)
        self._items[content_id] = size
        return True


class CrackerState:
    """Brute-forcer racing the forwarders: always works on the lowest
    unclaimed block whose predecessor key is public."""

    def __init__(self, node_id: str, hash_rate: int):
        self.node_id = node_id
        self.hash_rate = hash_rate
        self.generation = 0
        self.plans: dict[str, tuple[int, int]] = {}  # chain -> (target index, generation)


class Simulator:
    def __init__(self, scenario: Scenario):
        self.sc = scenario
        self.ledger = Ledger(
            LedgerParams(
                confirmation_delay=scenario.confirmation_delay_ns,
                publication_delay=scenario.publication_delay_ns,
            )
        )
        self.now = 0
        self._seq = 0
        self._heap: list[SimEvent] = []
        self.trace: list[TraceRow] = []
        self.latency_rows: list[LatencyRow] = []
        self.forward_counts: dict[str, int] = {}
        self._forwarded_once: set[tuple[str, str]] = set()
        self.link_busy: dict[tuple[str, str], list[tuple[int, int]]] = {}
        self.events_processed = 0
        self.quiescent = False
        self.final_time = 0

        self.chains: dict[str, PuzzleChain] = {}
        for spec in scenario.chains:
            self.chains[spec.chain_id] = generate_chain(
                n_blocks=len(spec.values),
                iterations=spec.iterations,
                values=spec.values,
                rng_seed=derived_seed(scenario.seed, f"chain:{spec.chain_id}"),
            )
            self.ledger.publish_chain(
                self.chains[spec.chain_id].published(),
                now=spec.publish_time_ns,
                chain_id=spec.chain_id,
            )
            self.schedule(self.ledger.visible_time(spec.chain_id), ChainVisible(spec.chain_id))

        self.crackers = {
            n.node_id: CrackerState(n.node_id, n.hash_rate)
            for n in scenario.nodes_with_role("cracker")
        }
        self.cache_stores = {
            n.node_id: CacheStore(n.cache_capacity) for n in scenario.nodes_with_role("cache")
        }

        self.runners: dict[str, object] = {}
        factories = {
            "double_incentive": DoubleIncentiveRunner,
            "all_or_nothing": AllOrNothingRunner,
            "competing": CompetingRunner,
            "contract": ContractRunner,
            "cache_demo": CacheDemoRunner,
            "path_compare": PathCompareRunner,
        }
        for w in scenario.workloads:
            runner = factories[w.model](self, w)
            self.runners[w.workload_id] = runner
            if w.model == "cache_demo":
                for idx, t in enumerate(w.request_times_ns):
                    self.schedule(t, CacheRequest(w.workload_id, idx))
            else:
                self.schedule(w.start_ns, WorkloadStart(w.workload_id))

    # -- scheduling ----------------------------------------------------

    def schedule(self, time: int, payload: object):
        if time < self.now:
            raise RuntimeError(f"causality violation: {payload!r} at {time} < now {self.now}")
        self._seq += 1
        heapq.heappush(self._heap, SimEvent(time, self._seq, payload))

    def ctrl_latency(self, frm: str, to: str) -> int:
        return self.sc.control_latency_between(frm, to)

    def send_ctrl(self, frm: str, payload: object, to: str):
        self.schedule(self.now + self.ctrl_latency(frm, to), payload)

    def submit_claim_via_ctrl(self, node: str, chain_id: str, block_index: int, key: bytes):
        self.schedule(
            self.now + self.sc.control_latency_ns, ClaimTx(chain_id, block_index, key, node)
        )

    def data_link(self, a: str, b: str) -> LinkSpec:
        link = self.sc.link_between(a, b)
        if link is None or link.kind == "control_plane":
            raise RuntimeError(f"no data link between {a!r} and {b!r}")
        return link

    def send_chunk(
        self,
        workload: Workload,
        label: str,
        path: tuple[str, ...],
        from_pos: int,
        seq: int,
        data: bytes,
        depart: int,
        fault_rng: Optional[random.Random] = None,
    ):
        frm, to = path[from_pos], path[from_pos + 1]
        link = self.data_link(frm, to)
        serialization = (len(data) * NS_PER_SECOND) // link.bandwidth
        self.link_busy.setdefault(link.endpoints, []).append((depart, depart + serialization))
        for f in workload.faults:
            if set(f.link) == {frm, to} and f.chunk == seq:
                if fault_rng is None or fault_rng.random() < f.probability:
                    if f.action == "drop":
                        return
                    data = bytes([data[0] ^ 0xFF]) + data[1:]
        arrival = depart + link_cost(len(data), link, self.sc.hop_processing_ns)
        self.schedule(arrival, DataChunk(workload.workload_id, label, path, from_pos + 1, seq, data))

    def count_forward(self, delivery: str, node: str):
        if (delivery, node) not in self._forwarded_once:
            self._forwarded_once.add((delivery, node))
            self.forward_counts[node] = self.forward_counts.get(node, 0) + 1

    def add_trace(self, node: str, phase_from: str, phase_to: str, event: str, actions: str = ""):
        self.trace.append(TraceRow(self.now, node, phase_from, phase_to, event, actions))

    # -- main loop -------------------------------------------------------

    def run(self) -> "SimulationReport":
        from .report import SimulationReport  # local import to avoid a cycle

        horizon_exceeded = False
        while self._heap:
            if self.events_processed >= MAX_EVENTS:
                raise RuntimeError(f"event budget of {MAX_EVENTS} exhausted")
            event = heapq.heappop(self._heap)
            if event.time > self.sc.horizon_ns:
                horizon_exceeded = True
                break
            self.now = event.time
            self.final_time = max(self.final_time, event.time)
            self.events_processed += 1
            self._dispatch(event.payload)
        self.quiescent = not horizon_exceeded

        balances = settle(
            confirmed_rewards={
                node: self.ledger.confirmed_balance(node, self.final_time)
                for node in self.sc.nodes
            },
            forward_counts=self.forward_counts,
            forwarding_costs={n.node_id: n.forwarding_cost for n in self.sc.nodes.values()},
            node_ids=sorted(self.sc.nodes),
        )
        return SimulationReport(
            scenario_name=self.sc.name,
            seed=self.sc.seed,
            horizon_ns=self.sc.horizon_ns,
            quiescent=self.quiescent,
            final_time_ns=self.final_time,
            events_processed=self.events_processed,
            claim_log=self.ledger.claim_log(),
            trace=list(self.trace),
            balances=balances,
            latency_rows=list(self.latency_rows),
            chains={
                cid: [b.to_record() for b in chain.published()]
                for cid, chain in self.chains.items()
            },
            workload_outcomes={
                wid: runner.outcome() for wid, runner in self.runners.items()
            },
        )

    def _dispatch(self, payload: object):
        if isinstance(payload, ChainVisible):
            self._notify_crackers()
        elif isinstance(payload, WorkloadStart):
            self.runners[payload.workload_id].start(self)
        elif isinstance(payload, RoundTick):
            self.runners[payload.workload_id].on_round(self, payload)
        elif isinstance(payload, (DataChunk, DataPacket)):
            self.runners[payload.workload_id].on_data(self, payload)
        elif isinstance(payload, CtrlSetup):
            self.runners[payload.workload_id].on_setup(self, payload)
        elif isinstance(payload, CtrlAck):
            self.runners[payload.workload_id].on_ack(self, payload)
        elif isinstance(payload, CtrlCompletion):
            self.runners[payload.workload_id].on_completion(self, payload)
        elif isinstance(payload, CtrlKey):
            self.runners[payload.workload_id].on_key(self, payload)
        elif isinstance(payload, AckTimeout):
            self.runners[payload.workload_id].on_ack_timeout(self, payload)
        elif isinstance(payload, DeliveryTimeout):
            self.runners[payload.workload_id].on_delivery_timeout(self, payload)
        elif isinstance(payload, CacheRequest):
            self.runners[payload.workload_id].on_request(self, payload)
        elif isinstance(payload, ClaimTx):
            self._handle_claim(payload)
        elif isinstance(payload, CrackFinish):
            self._handle_crack_finish(payload)
        elif isinstance(payload, ClaimConfirm):
            pass  # timeline marker so quiescence covers confirmations
        else:
            raise TypeError(f"unhandled payload {payload!r}")

    # -- ledger and crackers ----------------------------------------------

    def _handle_claim(self, tx: ClaimTx):
        result = self.ledger.submit_claim(
            tx.chain_id, tx.block_index, tx.key, tx.claimant, self.now
        )
        verdict = "accepted" if result.accepted else f"rejected({result.reason})"
        self.add_trace(
            "ledger", "-", "-",
            f"claim {tx.chain_id}[{tx.block_index}] by {tx.claimant}", verdict,
        )
        if result.accepted:
            claim = self.ledger.claim_of(tx.chain_id, tx.block_index)
            self.schedule(claim.confirm_time, ClaimConfirm(tx.chain_id, tx.block_index))
            self._notify_crackers()

    def _notify_crackers(self):
        for cracker in self.crackers.values():
            self._replan_cracker(cracker)

    def _replan_cracker(self, cracker: CrackerState):
        for chain_id in self.ledger.visible_chains(self.now):
            blocks = self.ledger.chain_blocks(chain_id)
            target = len(self.ledger.claimed_indices(chain_id, self.now))
            current = cracker.plans.get(chain_id)
            if target >= len(blocks):
                if current is not None:
                    cracker.plans.pop(chain_id)
                    cracker.generation += 1
                continue
            if current is not None and current[0] == target:
                continue
            cracker.generation += 1
            cracker.plans[chain_id] = (target, cracker.generation)
            crack_ns = blocks[target].iterations * NS_PER_SECOND // cracker.hash_rate
            self.schedule(
                self.now + crack_ns,
                CrackFinish(cracker.node_id, chain_id, target, cracker.generation),
            )
            self.add_trace(
                cracker.node_id, "solving", "solving",
                f"start {chain_id}[{target}]", f"finish_at={self.now + crack_ns}",
            )

    def _handle_crack_finish(self, ev: CrackFinish):
        cracker = self.crackers[ev.cracker]
        plan = cracker.plans.get(ev.chain_id)
        if plan is None or plan != (ev.block_index, ev.generation):
            return  # superseded: someone claimed meanwhile
        blocks = self.ledger.chain_blocks(ev.chain_id)
        prev_key = None
        if ev.block_index > 0:
            prev_key = self.ledger.claim_of(ev.chain_id, ev.block_index - 1).key
        key = solve_block(
            blocks[ev.block_index].iv_published, prev_key, blocks[ev.block_index].iterations
        )
        cracker.plans.pop(ev.chain_id)
        self.add_trace(
            ev.cracker, "solving", "claiming",
            f"cracked {ev.chain_id}[{ev.block_index}]", f"claim key={key.hex()[:8]}",
        )
        # the cracker lives in the ledger's network: zero claim latency
        self._handle_claim(ClaimTx(ev.chain_id, ev.block_index, key, ev.cracker))
        self._replan_cracker(cracker)


# -- workload runners ---------------------------------------------------


def _actions_text(actions) -> str:
    parts = []
    for a in actions:
        if isinstance(a, protocol.ForwardChunk):
            parts.append(f"forward_chunk#{a.seq}")
        elif isinstance(a, protocol.SendAck):
            parts.append(f"send_ack->{a.to}")
        elif isinstance(a, protocol.SubmitClaim):
            parts.append(f"submit_claim {a.chain_id}[{a.block_index}] key={a.key.hex()[:8]}")
        elif isinstance(a, protocol.Fail):
            parts.append(f"fail:{a.reason}")
    return ";".join(parts)


class DoubleIncentiveRunner:
    """Chunked relay with per-hop secrets, backward acks, ledger claims."""

    def __init__(self, sim: Simulator, w: Workload):
        self.w = w
        self.rng = random.Random(derived_seed(sim.sc.seed, f"workload:{w.workload_id}"))
        self.fault_rng = random.Random(derived_seed(sim.sc.seed, f"faults:{w.workload_id}"))
        self.body = self.rng.randbytes(w.message_length)
        self.manifest = protocol.MessageManifest.for_message(
            w.workload_id, self.body, w.chunk_size
        )
        self.chain = sim.chains[w.chain]
        self.setups, self.receiver_secret = protocol.setup_double_incentive(
            w.path, self.manifest, self.chain, self.rng
        )
        self.sender = w.path[0]
        self.receiver = w.path[-1]
        self.forwarders = list(w.path[1:-1])
        self.states: dict[str, protocol.ForwarderState] = {}
        self.receiver_state = protocol.ReceiverState(
            node_id=self.receiver,
            manifest=self.manifest,
            secret=self.receiver_secret,
            ack_to=self.forwarders[-1],
            verify_hash=False,
        )
        self.delivered_at: Optional[int] = None
        self.failures: dict[str, str] = {}

    def start(self, sim: Simulator):
        for i, node in enumerate(self.forwarders):
            sim.send_ctrl(
                self.sender,
                CtrlSetup(self.w.workload_id, node, self.setups[i], self.manifest, self.w.chain),
                node,
            )
            sim.schedule(sim.now + sim.sc.ack_timeout_ns, AckTimeout(self.w.workload_id, node))
        sim.add_trace(self.sender, "setup", "streaming", "distribute_secrets_and_nonces",
                      f"forwarders={len(self.forwarders)}")
        first_link = sim.data_link(self.w.path[0], self.w.path[1])
        depart = sim.now + sim.sc.control_latency_ns  # data follows the setups
        for seq, chunk in enumerate(self.manifest.chunks(self.body)):
            sim.send_chunk(self.w, "delivery", self.w.path, 0, seq, chunk, depart, self.fault_rng)
            depart += (len(chunk) * NS_PER_SECOND) // first_link.bandwidth

    def on_setup(self, sim: Simulator, ev: CtrlSetup):
        state = protocol.ForwarderState(ev.to, window_capacity=self.w.window_capacity)
        self.states[ev.to] = state
        before = state.phase.value
        actions = state.step(protocol.Setup(ev.hop_setup, ev.manifest, ev.chain_id))
        sim.add_trace(ev.to, before, state.phase.value, "setup", _actions_text(actions))
        self._apply(sim, ev.to, actions)

    def on_data(self, sim: Simulator, ev: DataChunk):
        node = ev.path[ev.position]
        if node == self.receiver:
            before = self.receiver_state.phase.value
            actions = self.receiver_state.on_chunk(ev.data)
            sim.add_trace(node, before, self.receiver_state.phase.value,
                          f"chunk[{_digest8(ev.data)}]#{ev.seq}", _actions_text(actions))
            if self.receiver_state.complete and self.delivered_at is None:
                self.delivered_at = sim.now
                sim.latency_rows.append(
                    LatencyRow(self.w.workload_id, ev.label, "->".join(ev.path),
                               self.manifest.total_length, sim.now - self.w.start_ns)
                )
            self._apply(sim, node, actions, ev)
            return
        state = self.states.get(node)
        if state is None:
            return  # chunk raced ahead of setup: cannot happen with control preceding data
        before = state.phase.value
        actions = state.step(protocol.Chunk(ev.data, ev.seq))
        sim.add_trace(node, before, state.phase.value,
                      f"chunk[{_digest8(ev.data)}]#{ev.seq}", _actions_text(actions))
        self._apply(sim, node, actions, ev)

    def on_ack(self, sim: Simulator, ev: CtrlAck):
        if ev.to == self.sender:
            sim.add_trace(self.sender, "streaming", "streaming", "ack", "noted")
            return
        state = self.states.get(ev.to)
        if state is None:
            return
        before = state.phase.value
        actions = state.step(protocol.Ack(ev.secret))
        sim.add_trace(ev.to, before, state.phase.value, "ack", _actions_text(actions))
        self._apply(sim, ev.to, actions)

    def on_ack_timeout(self, sim: Simulator, ev: AckTimeout):
        state = self.states.get(ev.node)
        if state is None or state.phase != protocol.Phase.AWAITING_ACK:
            return
        before = state.phase.value
        actions = state.step(protocol.Timeout())
        sim.add_trace(ev.node, before, state.phase.value, "timeout", _actions_text(actions))
        self._apply(sim, ev.node, actions)

    def _apply(self, sim: Simulator, node: str, actions, ev: Optional[DataChunk] = None):
        for action in actions:
            if isinstance(action, protocol.ForwardChunk):
                sim.count_forward(self.w.workload_id, node)
                sim.send_chunk(self.w, ev.label, ev.path, ev.position, action.seq,
                               action.data, sim.now, self.fault_rng)
            elif isinstance(action, protocol.SendAck):
                if node in self.w.withhold_ack:
                    sim.add_trace(node, "-", "-", "withholding_ack", f"kept secret from {action.to}")
                    continue
                sim.send_ctrl(node, CtrlAck(self.w.workload_id, action.to, action.secret, node),
                              action.to)
            elif isinstance(action, protocol.SubmitClaim):
                sim.submit_claim_via_ctrl(node, action.chain_id, action.block_index, action.key)
            elif isinstance(action, protocol.Fail):
                self.failures[node] = action.reason

    def outcome(self) -> dict:
        return {
            "model": "double_incentive",
            "delivered": self.delivered_at is not None,
            "delivery_time_ns": self.delivered_at,
            "failures": dict(sorted(self.failures.items())),
            "message_sha256": self.manifest.full_hash.hex(),
        }


class PlainRelayMixin:
    """Chunk relaying for models without per-hop secrets."""

    def relay_chunk(self, sim: Simulator, ev: DataChunk, w: Workload,
                    fault_rng: Optional[random.Random] = None):
        node = ev.path[ev.position]
        sim.count_forward(f"{w.workload_id}:{ev.label}", node)
        sim.add_trace(node, "forwarding", "forwarding",
                      f"chunk[{_digest8(ev.data)}]#{ev.seq}", "forward_chunk")
        sim.send_chunk(w, ev.label, ev.path, ev.position, ev.seq, ev.data, sim.now, fault_rng)


class AllOrNothingRunner(PlainRelayMixin):
    """No pairwise acks, no forwarder identities: the receiver confirms
    end-to-end and the sender releases every key, or none at all."""

    def __init__(self, sim: Simulator, w: Workload):
        self.w = w
        self.rng = random.Random(derived_seed(sim.sc.seed, f"workload:{w.workload_id}"))
        self.fault_rng = random.Random(derived_seed(sim.sc.seed, f"faults:{w.workload_id}"))
        self.body = self.rng.randbytes(w.message_length)
        self.manifest = protocol.MessageManifest.for_message(
            w.workload_id, self.body, w.chunk_size
        )
        self.chain = sim.chains[w.chain] if w.chain else None
        self.sender = w.path[0]
        self.receiver = w.path[-1]
        self.forwarders = list(w.path[1:-1])
        self.receiver_state = protocol.ReceiverState(
            node_id=self.receiver, manifest=self.manifest, verify_hash=True
        )
        self.delivered_at: Optional[int] = None
        self.keys_released = False
        self.timed_out = False

    def start(self, sim: Simulator):
        sim.add_trace(self.sender, "setup", "streaming", "start_broadcast",
                      f"chunks={len(self.manifest.chunks(self.body))}")
        first_link = sim.data_link(self.w.path[0], self.w.path[1])
        depart = sim.now + sim.sc.control_latency_ns  # manifest reaches the receiver first
        for seq, chunk in enumerate(self.manifest.chunks(self.body)):
            sim.send_chunk(self.w, "delivery", self.w.path, 0, seq, chunk, depart, self.fault_rng)
            depart += (len(chunk) * NS_PER_SECOND) // first_link.bandwidth
        sim.schedule(sim.now + sim.sc.delivery_timeout_ns, DeliveryTimeout(self.w.workload_id))

    def on_data(self, sim: Simulator, ev: DataChunk):
        node = ev.path[ev.position]
        if node != self.receiver:
            self.relay_chunk(sim, ev, self.w, self.fault_rng)
            return
        before = self.receiver_state.phase.value
        self.receiver_state.on_chunk(ev.data)
        sim.add_trace(node, before, self.receiver_state.phase.value,
                      f"chunk[{_digest8(ev.data)}]#{ev.seq}", "")
        if self.receiver_state.complete and self.receiver_state.hash_ok and self.delivered_at is None:
            self.delivered_at = sim.now
            sim.latency_rows.append(
                LatencyRow(self.w.workload_id, ev.label, "->".join(ev.path),
                           self.manifest.total_length, sim.now - self.w.start_ns)
            )
            sim.send_ctrl(node, CtrlCompletion(self.w.workload_id, self.sender), self.sender)

    def on_completion(self, sim: Simulator, ev: CtrlCompletion):
        if self.timed_out or self.keys_released:
            return
        self.keys_released = True
        sim.add_trace(self.sender, "awaiting_e2e_ack", "releasing_keys", "e2e_ack",
                      f"keys={len(self.forwarders)}")
        for i, node in enumerate(self.forwarders):
            sim.send_ctrl(
                self.sender,
                CtrlKey(self.w.workload_id, node, self.w.chain, i, self.chain.keys[i]),
                node,
            )

    def on_key(self, sim: Simulator, ev: CtrlKey):
        sim.add_trace(ev.to, "awaiting_key", "claiming",
                      f"key_release {ev.chain_id}[{ev.block_index}]",
                      f"submit_claim key={ev.key.hex()[:8]}")
        sim.submit_claim_via_ctrl(ev.to, ev.chain_id, ev.block_index, ev.key)

    def on_delivery_timeout(self, sim: Simulator, ev: DeliveryTimeout):
        if not self.keys_released:
            self.timed_out = True
            sim.add_trace(self.sender, "awaiting_e2e_ack", "failed", "delivery_timeout",
                          "keys withheld")

    def outcome(self) -> dict:
        return {
            "model": "all_or_nothing",
            "delivered": self.delivered_at is not None,
            "delivery_time_ns": self.delivered_at,
            "keys_released": self.keys_released,
        }


class CompetingRunner:
    """Coded packets race along several disjoint paths; innovative
    deliveries earn their last hop one reward block each."""

    def __init__(self, sim: Simulator, w: Workload):
        self.w = w
        self.rng = random.Random(derived_seed(sim.sc.seed, f"workload:{w.workload_id}"))
        self.body = self.rng.randbytes(w.message_length)
        self.generation = coding.Generation.from_message(
            w.workload_id, self.body, w.generation_size
        )
        self.chain = sim.chains[w.chain]
        self.sender = w.paths[0][0]
        self.receiver = w.paths[0][-1]
        self.decoder = coding.DecoderState(
            w.workload_id, self.generation.k, self.generation.symbol_size
        )
        self.recode_rngs = {
            node: random.Random(derived_seed(sim.sc.seed, f"recode:{w.workload_id}:{node}"))
            for path in w.paths for node in path[1:-1]
        }
        self.held: dict[str, list[coding.CodedPacket]] = {}
        self.credited: list[str] = []
        self.completed = False
        self.decoded_ok: Optional[bool] = None
        self.completed_at: Optional[int] = None
        self.max_rounds = w.max_rounds or 4 * self.generation.k
        self.rounds_sent = 0

    @property
    def packet_wire_length(self) -> int:
        return self.generation.symbol_size + self.generation.k

    def start(self, sim: Simulator):
        sim.add_trace(self.sender, "setup", "streaming", "start_coded_multicast",
                      f"k={self.generation.k} paths={len(self.w.paths)}")
        self._send_round(sim)

    def on_round(self, sim: Simulator, ev: RoundTick):
        self._send_round(sim)

    def _send_round(self, sim: Simulator):
        if self.completed or self.rounds_sent >= self.max_rounds:
            return
        self.rounds_sent += 1
        interval = 0
        for path in self.w.paths:
            link = sim.data_link(path[0], path[1])
            packet = coding.encode(self.generation, self.rng).with_last_hop(self.sender)
            arrival = sim.now + link_cost(self.packet_wire_length, link, sim.sc.hop_processing_ns)
            sim.schedule(arrival, DataPacket(self.w.workload_id, tuple(path), 1, packet))
            interval = max(
                interval, (self.packet_wire_length * NS_PER_SECOND) // link.bandwidth
            )
        sim.schedule(sim.now + max(interval, 1), RoundTick(self.w.workload_id, self.rounds_sent))

    def on_data(self, sim: Simulator, ev: DataPacket):
        node = ev.path[ev.position]
        if node == self.receiver:
            if self.completed:
                return
            innovative = self.decoder.accept(ev.packet)
            if innovative:
                self.credited.append(ev.packet.last_hop)
            sim.add_trace(node, "decoding", "decoding",
                          f"packet[{_digest8(ev.packet.payload)}] from {ev.packet.last_hop}",
                          f"innovative={innovative} rank={self.decoder.rank}")
            if self.decoder.complete:
                self.completed = True
                self.completed_at = sim.now
                decoded = self.decoder.decoded_message(len(self.body))
                self.decoded_ok = decoded == self.body
                sim.latency_rows.append(
                    LatencyRow(self.w.workload_id, "decode_complete", "->".join(ev.path),
                               len(self.body), sim.now - self.w.start_ns)
                )
                sim.send_ctrl(
                    node,
                    CtrlCompletion(self.w.workload_id, self.sender, tuple(self.credited)),
                    self.sender,
                )
            return
        # intermediate forwarder: hold, then recode or forward verbatim
        held = self.held.setdefault(node, [])
        held.append(ev.packet)
        sim.count_forward(self.w.workload_id, node)
        if self.w.recode:
            out = coding.recode(held, self.recode_rngs[node])
        else:
            out = ev.packet
        out = out.with_last_hop(node)
        link = sim.data_link(node, ev.path[ev.position + 1])
        arrival = sim.now + link_cost(self.packet_wire_length, link, sim.sc.hop_processing_ns)
        sim.add_trace(node, "forwarding", "forwarding",
                      f"packet[{_digest8(ev.packet.payload)}]",
                      "recode" if self.w.recode else "forward")
        sim.schedule(arrival, DataPacket(self.w.workload_id, ev.path, ev.position + 1, out))

    def on_completion(self, sim: Simulator, ev: CtrlCompletion):
        rewards = protocol.assign_competing_rewards(
            ev.credits, [b.value for b in self.chain.blocks]
        )
        sim.add_trace(self.sender, "streaming", "releasing_keys", "decode_complete",
                      ";".join(f"{hop}:{val}" for hop, val in sorted(rewards.items())))
        for i, hop in enumerate(ev.credits):
            sim.send_ctrl(
                self.sender,
                CtrlKey(self.w.workload_id, hop, self.w.chain, i, self.chain.keys[i]),
                hop,
            )

    def on_key(self, sim: Simulator, ev: CtrlKey):
        sim.add_trace(ev.to, "awaiting_key", "claiming",
                      f"key_release {ev.chain_id}[{ev.block_index}]",
                      f"submit_claim key={ev.key.hex()[:8]}")
        sim.submit_claim_via_ctrl(ev.to, ev.chain_id, ev.block_index, ev.key)

    def outcome(self) -> dict:
        credits: dict[str, int] = {}
        for hop in self.credited:
            credits[hop] = credits.get(hop, 0) + 1
        return {
            "model": "competing",
            "decoded_ok": self.decoded_ok,
            "completed_at_ns": self.completed_at,
            "generation_size": self.generation.k,
            "credits": dict(sorted(credits.items())),
            "rounds_sent": self.rounds_sent,
        }


class ContractRunner:
    """Principal hands delivery responsibility to a contractor chain;
    the final contractor runs its own incentivized segment."""

    def __init__(self, sim: Simulator, w: Workload):
        self.w = w
        self.tree: Optional[protocol.ContractState] = None
        self.declined: Optional[str] = "not negotiated"
        self.delivery_runner = None
        self.negotiation_ns = 2 * sim.sc.control_latency_ns * len(w.contractors)

    def start(self, sim: Simulator):
        try:
            self.tree = protocol.plan_contract(
                contract_id=self.w.workload_id,
                principal=self.w.principal,
                contractors=self.w.contractors,
                agreed_price=self.w.price,
                margin=self.w.margin,
                deadline=self.w.start_ns + self.w.deadline_ns,
            )
        except protocol.ContractDeclined as exc:
            self.declined = str(exc)
            sim.add_trace(self.w.principal, "negotiating", "declined", "contract", str(exc))
            return
        self.declined = None
        sim.add_trace(self.w.principal, "negotiating", "contracted", "contract",
                      f"contractor={self.tree.contractor} depth={self.tree.depth()}")
        dmodel = self.w.delivery.get("model", "direct")
        delivery_start = self.w.start_ns + self.negotiation_ns
        if dmodel == "double_incentive":
            sub = Workload(
                workload_id=f"{self.w.workload_id}.delivery",
                model="double_incentive",
                chain=self.w.delivery.get("chain"),
                path=tuple(self.w.delivery.get("path", [])),
                message_length=self.w.message_length,
                chunk_size=self.w.chunk_size or self.w.message_length,
                start_ns=delivery_start,
            )
            self.delivery_runner = DoubleIncentiveRunner(sim, sub)
            sim.runners[sub.workload_id] = self.delivery_runner
            sim.schedule(delivery_start, WorkloadStart(sub.workload_id))
        else:
            sub = Workload(
                workload_id=f"{self.w.workload_id}.delivery",
                model="path_compare",  # unused marker; direct transfers reuse the probe runner
                message_length=self.w.message_length,
            )
            path = tuple(self.w.delivery.get("path", []))
            self.delivery_runner = DirectTransferRunner(sim, self.w, path, delivery_start)
            sim.runners[f"{self.w.workload_id}.delivery"] = self.delivery_runner
            sim.schedule(delivery_start, WorkloadStart(f"{self.w.workload_id}.delivery"))

    def outcome(self) -> dict:
        delivered = False
        if self.delivery_runner is not None:
            delivered = self.delivery_runner.delivered_at is not None
        return {
            "model": "contract",
            "declined": self.declined,
            "contract_tree": self.tree.to_record() if self.tree else None,
            "negotiation_ns": self.negotiation_ns,
            "delivered": delivered,
        }


class DirectTransferRunner(PlainRelayMixin):
    """Unadorned chunked transfer along a fixed path (contract leaf
    deliveries and cache hits)."""

    def __init__(self, sim: Simulator, w: Workload, path: tuple[str, ...], start_ns: int,
                 body: Optional[bytes] = None, label: str = "delivery",
                 workload_id: Optional[str] = None):
        self.w = w
        self.path = path
        self.start_ns = start_ns
        self.label = label
        self.workload_id = workload_id or f"{w.workload_id}.delivery"
        rng = random.Random(derived_seed(sim.sc.seed, f"direct:{self.workload_id}"))
        self.body = body if body is not None else rng.randbytes(w.message_length)
        self.chunk_size = w.chunk_size or max(1, len(self.body))
        self.received = 0
        self.delivered_at: Optional[int] = None
        self._cache_bytes: dict[str, int] = {}

    def start(self, sim: Simulator):
        first_link = sim.data_link(self.path[0], self.path[1])
        depart = sim.now
        chunks = [self.body[i:i + self.chunk_size] for i in range(0, len(self.body), self.chunk_size)]
        shadow = Workload(workload_id=self.workload_id, model=self.w.model)
        self._shadow = shadow
        for seq, chunk in enumerate(chunks):
            sim.send_chunk(shadow, self.label, self.path, 0, seq, chunk, depart)
            depart += (len(chunk) * NS_PER_SECOND) // first_link.bandwidth

    def on_data(self, sim: Simulator, ev: DataChunk):
        node = ev.path[ev.position]
        if node != self.path[-1]:
            self.relay_chunk(sim, ev, self._shadow)
            # cache nodes along the path remember what streamed through them
            self._maybe_cache(sim, node, ev)
            return
        self.received += len(ev.data)
        sim.add_trace(node, "receiving", "receiving",
                      f"chunk[{_digest8(ev.data)}]#{ev.seq}", "")
        self._maybe_cache(sim, node, ev)
        if self.received >= len(self.body) and self.delivered_at is None:
            self.delivered_at = sim.now
            sim.latency_rows.append(
                LatencyRow(self.w.workload_id, self.label, "->".join(self.path),
                           len(self.body), sim.now - self.start_ns)
            )

    def _maybe_cache(self, sim: Simulator, node: str, ev: DataChunk):
        store = sim.cache_stores.get(node)
        if store is None or not self.w.content_id:
            return
        tracked = self._cache_bytes
        tracked[node] = tracked.get(node, 0) + len(ev.data)
        if tracked[node] >= len(self.body):
            stored = store.store(self.w.content_id, len(self.body))
            sim.add_trace(node, "caching", "caching", f"store {self.w.content_id}",
                          "stored" if stored else "too_large")

    def outcome(self) -> dict:
        return {
            "model": "direct_transfer",
            "delivered": self.delivered_at is not None,
            "delivery_time_ns": self.delivered_at,
        }


class CacheDemoRunner:
    """Repeated content requests: caches that hold the content outbid
    the origin and deliver over their own short link."""

    def __init__(self, sim: Simulator, w: Workload):
        self.w = w
        rng = random.Random(derived_seed(sim.sc.seed, f"workload:{w.workload_id}"))
        self.body = rng.randbytes(w.message_length)
        self.deliveries: list[tuple[dict, DirectTransferRunner]] = []

    def start(self, sim: Simulator):  # pragma: no cover - requests are scheduled directly
        pass

    def on_request(self, sim: Simulator, ev: CacheRequest):
        origin = sim.sc.nodes[self.w.origin]
        requester = self.w.requester
        bids = []
        first_link = sim.data_link(self.w.path[0], self.w.path[1])
        origin_price = surge_price(
            origin.price or self.w.price,
            utilization(sim.link_busy.get(first_link.endpoints, []), sim.now),
        )
        origin_latency = sum(
            link_cost(self.w.message_length, sim.data_link(a, b), sim.sc.hop_processing_ns)
            for a, b in zip(self.w.path, self.w.path[1:])
        )
        bids.append((CapabilityQuote(
            node_id=origin.node_id,
            technology_tag="origin",
            range_meters=0.0,
            expected_latency=origin_latency / NS_PER_SECOND,
            price=origin_price,
        ), tuple(self.w.path)))
        for cache_id, store in sim.cache_stores.items():
            if not store.has(self.w.content_id):
                continue
            link = sim.sc.link_between(cache_id, requester)
            if link is None or link.kind == "control_plane":
                continue
            cache_node = sim.sc.nodes[cache_id]
            price = surge_price(
                cache_node.price,
                utilization(sim.link_busy.get(link.endpoints, []), sim.now),
            )
            latency = link_cost(self.w.message_length, link, sim.sc.hop_processing_ns)
            bids.append((CapabilityQuote(
                node_id=cache_id,
                technology_tag="cache",
                range_meters=0.0,
                expected_latency=latency / NS_PER_SECOND,
                price=price,
            ), (cache_id, requester)))
            store.touch(self.w.content_id)
        winner, path = min(bids, key=lambda pair: quote_sort_key(pair[0]))
        sim.add_trace(requester, "negotiating", "selected",
                      f"request#{ev.request_index} {self.w.content_id}",
                      f"winner={winner.node_id} price={winner.price} bids={len(bids)}")
        # request broadcast out and bids back: one control round trip
        delivery_start = sim.now + 2 * sim.sc.control_latency_ns
        label = f"request_{ev.request_index}"
        runner_id = f"{self.w.workload_id}.{label}"
        runner = DirectTransferRunner(
            sim, self.w, path, sim.now, body=self.body, label=label, workload_id=runner_id
        )
        record = {
            "request_index": ev.request_index,
            "winner": winner.node_id,
            "price": winner.price,
            "path": "->".join(path),
        }
        self.deliveries.append((record, runner))
        sim.runners[runner_id] = runner
        sim.schedule(delivery_start, WorkloadStart(runner_id))

    def outcome(self) -> dict:
        rows = []
        for record, runner in self.deliveries:
            row = dict(record)
            if runner.delivered_at is not None:
                row["latency_ns"] = runner.delivered_at - runner.start_ns
            rows.append(row)
        return {"model": "cache_demo", "deliveries": rows}


class PathCompareRunner(PlainRelayMixin):
    """Sends one probe down the wired route and one down the edge route,
    recording closed-form and simulated latencies for both."""

    def __init__(self, sim: Simulator, w: Workload):
        self.w = w
        rng = random.Random(derived_seed(sim.sc.seed, f"workload:{w.workload_id}"))
        self.body = rng.randbytes(max(1, w.message_length))
        self.closed_form = compare_paths(
            sim.sc, w.src, w.dst, w.isp_path, w.edge_path, len(self.body)
        )
        self.measured: dict[str, int] = {}

    def start(self, sim: Simulator):
        for label, path in (("isp", self.w.isp_path), ("edge", self.w.edge_path)):
            sim.send_chunk(
                Workload(workload_id=self.w.workload_id, model=self.w.model),
                label, tuple(path), 0, 0, self.body, sim.now,
            )

    def on_data(self, sim: Simulator, ev: DataChunk):
        node = ev.path[ev.position]
        if node != self.w.dst:
            self.relay_chunk(sim, ev, self.w)
            return
        latency = sim.now - self.w.start_ns
        self.measured[ev.label] = latency
        sim.add_trace(node, "receiving", "done", f"probe[{ev.label}]", f"latency_ns={latency}")
        sim.latency_rows.append(
            LatencyRow(self.w.workload_id, ev.label, "->".join(ev.path),
                       len(self.body), latency)
        )

    def outcome(self) -> dict:
        return {
            "model": "path_compare",
            "closed_form_ns": dict(self.closed_form),
            "measured_ns": dict(sorted(self.measured.items())),
        }


def run(scenario: Scenario) -> "SimulationReport":
    """Execute a scenario to quiescence (or its horizon) and report."""
    return Simulator(scenario).run()
