"""Simulation outputs: four CSV files, a JSON summary, optional figures.

Column orders are fixed and documented in the README:

    claims.csv   chain_id,block_index,claimant,result,reason,claim_time,confirm_time
    events.csv   time,node,phase_from,phase_to,event,actions
    balances.csv node_id,rewards_confirmed,costs,net
    latency.csv  workload,label,path,message_length,latency_ns

Times are integer simulated nanoseconds; multi-valued cells use ``;`` or
``->`` separators so numeric fields never need quoting. CSV bytes are a
pure function of (scenario, seed). Figures are rendered headlessly next
to the CSVs when requested.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from ..economics import PayoffRecord
from ..ledger import ClaimLogRow
from .simulator import LatencyRow, TraceRow

CSV_FILES = ("claims.csv", "events.csv", "balances.csv", "latency.csv")


@dataclass
class SimulationReport:
    scenario_name: str
    seed: int
    horizon_ns: int
    quiescent: bool
    final_time_ns: int
    events_processed: int
    claim_log: list[ClaimLogRow]
    trace: list[TraceRow]
    balances: list[PayoffRecord]
    latency_rows: list[LatencyRow]
    chains: dict[str, list[dict]]
    workload_outcomes: dict[str, dict]

    def accepted_claims(self) -> list[ClaimLogRow]:
        return [row for row in self.claim_log if row.result == "accepted"]

    def claimants_by_chain(self) -> dict[str, dict[int, str]]:
        out: dict[str, dict[int, str]] = {}
        for row in self.accepted_claims():
            out.setdefault(row.chain_id, {})[row.block_index] = row.claimant
        return out

    def summary(self) -> dict:
        return {
            "scenario": self.scenario_name,
            "seed": self.seed,
            "horizon_ns": self.horizon_ns,
            "quiescent": self.quiescent,
            "final_time_ns": self.final_time_ns,
            "events_processed": self.events_processed,
            "claims_accepted": len(self.accepted_claims()),
            "claims_rejected": len(self.claim_log) - len(self.accepted_claims()),
            "chains": self.chains,
            "claimants": {
                cid: {str(i): who for i, who in sorted(blocks.items())}
                for cid, blocks in sorted(self.claimants_by_chain().items())
            },
            "balances": {
                rec.node_id: {
                    "rewards_confirmed": rec.rewards_confirmed,
                    "costs": rec.forwarding_costs_incurred,
                    "net": rec.net,
                }
                for rec in self.balances
            },
            "workloads": self.workload_outcomes,
        }

    def write_outputs(self, out_dir, figures: bool = True) -> list[str]:
        """Write CSVs + summary.json (+ figures/) into ``out_dir``."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []

        with open(out / "claims.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(
                ["chain_id", "block_index", "claimant", "result", "reason",
                 "claim_time", "confirm_time"]
            )
            for row in self.claim_log:
                w.writerow(
                    [row.chain_id, row.block_index, row.claimant, row.result, row.reason,
                     row.claim_time, "" if row.confirm_time is None else row.confirm_time]
                )
        written.append("claims.csv")

        with open(out / "events.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "node", "phase_from", "phase_to", "event", "actions"])
            for row in self.trace:
                w.writerow(
                    [row.time, row.node, row.phase_from, row.phase_to, row.event, row.actions]
                )
        written.append("events.csv")

        with open(out / "balances.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node_id", "rewards_confirmed", "costs", "net"])
            for rec in self.balances:
                w.writerow(
                    [rec.node_id, rec.rewards_confirmed, rec.forwarding_costs_incurred, rec.net]
                )
        written.append("balances.csv")

        with open(out / "latency.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["workload", "label", "path", "message_length", "latency_ns"])
            for row in self.latency_rows:
                w.writerow(
                    [row.workload, row.label, row.path, row.message_length, row.latency_ns]
                )
        written.append("latency.csv")

        with open(out / "summary.json", "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append("summary.json")

        if figures:
            written.extend(render_figures(self, out / "figures"))
        return written


def render_figures(report: SimulationReport, fig_dir) -> list[str]:
    """Render claim timeline, balances, and latency figures as PNGs."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig_dir = Path(fig_dir)
    fig_dir.mkdir(parents=True, exist_ok=True)
    written = []

    accepted = report.accepted_claims()
    if accepted:
        fig, ax = plt.subplots(figsize=(7, 4))
        claimants = sorted({row.claimant for row in accepted})
        for claimant in claimants:
            rows = [r for r in accepted if r.claimant == claimant]
            ax.scatter(
                [r.claim_time / 1e9 for r in rows],
                [f"{r.chain_id}[{r.block_index}]" for r in rows],
                label=claimant, s=45,
            )
        ax.set_xlabel("claim time (s)")
        ax.set_ylabel("reward block")
        ax.set_title(f"{report.scenario_name}: claims")
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(fig_dir / "claims.png", dpi=110)
        plt.close(fig)
        written.append("figures/claims.png")

    nonzero = [r for r in report.balances if r.net or r.rewards_confirmed
               or r.forwarding_costs_incurred]
    if nonzero:
        fig, ax = plt.subplots(figsize=(7, 4))
        names = [r.node_id for r in nonzero]
        ax.bar(names, [r.rewards_confirmed for r in nonzero], label="rewards")
        ax.bar(names, [-r.forwarding_costs_incurred for r in nonzero], label="costs")
        ax.plot(names, [r.net for r in nonzero], "k_", markersize=18, label="net")
        ax.axhline(0, color="gray", linewidth=0.8)
        ax.set_ylabel("currency units")
        ax.set_title(f"{report.scenario_name}: payoffs")
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(fig_dir / "balances.png", dpi=110)
        plt.close(fig)
        written.append("figures/balances.png")

    if report.latency_rows:
        fig, ax = plt.subplots(figsize=(7, 4))
        labels = [f"{r.workload}/{r.label}" for r in report.latency_rows]
        ax.bar(labels, [r.latency_ns / 1e6 for r in report.latency_rows])
        ax.set_ylabel("delivery latency (ms)")
        ax.set_title(f"{report.scenario_name}: latencies")
        ax.tick_params(axis="x", labelrotation=20, labelsize=8)
        fig.tight_layout()
        fig.savefig(fig_dir / "latency.png", dpi=110)
        plt.close(fig)
        written.append("figures/latency.png")

    return written
