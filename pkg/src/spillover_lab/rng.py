"""Counter-based uniforms keyed by (seed, rep, cluster, slot).

Every draw is a pure function of its coordinates, so a replication gives the
same numbers whatever order clusters are visited in and however reps are
spread over workers. The mixing function is the SplitMix64 finalizer.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_LANE = np.uint64(0xD6E8FEB86659FD93)

UNIT_LANE = 0
CLUSTER_LANE = 1


def _mix(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = (x ^ (x >> np.uint64(30))) * _M1
        x = (x ^ (x >> np.uint64(27))) * _M2
    return x ^ (x >> np.uint64(31))


def _to_u64(value: int) -> np.ndarray:
    return np.array([int(value) & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)


class CounterStream:
    """Uniform(0, 1) draws for one (master_seed, rep) pair."""

    def __init__(self, master_seed: int, rep: int = 0):
        self.master_seed = int(master_seed)
        self.rep = int(rep)
        with np.errstate(over="ignore"):
            key = _mix(_to_u64(self.master_seed))
            key = _mix(key ^ (_to_u64(self.rep + 1) * _GOLDEN))
        self._key = key

    def uniforms(self, cluster: np.ndarray, slot: np.ndarray, lane: int = UNIT_LANE) -> np.ndarray:
        """One uniform per (cluster, slot) coordinate, in [0, 1)."""
        cluster = np.asarray(cluster, dtype=np.uint64)
        slot = np.asarray(slot, dtype=np.uint64)
        with np.errstate(over="ignore"):
            ck = _mix(self._key + _mix(cluster * _GOLDEN + np.uint64(lane) * _LANE))
            bits = _mix(ck + (slot + np.uint64(1)) * _GOLDEN)
        return (bits >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)

    def unit_uniforms(self, net) -> np.ndarray:
        """A flat array with one uniform per unit of ``net``."""
        within = np.arange(net.total_units, dtype=np.int64) - net.offsets[net.cluster_of_unit]
        return self.uniforms(net.cluster_of_unit, within, UNIT_LANE)

    def cluster_uniforms(self, net) -> np.ndarray:
        k = np.arange(len(net), dtype=np.int64)
        return self.uniforms(k, np.zeros_like(k), CLUSTER_LANE)
