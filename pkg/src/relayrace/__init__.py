"""relayrace: time-locked puzzle rewards for low-latency multihop forwarding.

A library plus deterministic simulator for studying forwarding
incentives built on chains of sequential-hash puzzles: forwarders race
brute-force crackers to claim publicly posted rewards, and only nodes
that relayed the message intact (and cooperated with their neighbors)
hold the shortcut to the solution.
"""

from . import coding, economics, ledger, netsim, protocol, timelock

__version__ = "0.1.0"

__all__ = ["coding", "economics", "ledger", "netsim", "protocol", "timelock", "__version__"]
