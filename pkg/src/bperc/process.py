"""Random-permutation arrival process on the torus.

Sites arrive in the order of a uniformly random permutation; the running
infected set is maintained incrementally (monotonicity makes it equal to the
closure of the arrived set at every step).  tau is the first arrival count
whose closure is the full torus; closure_before is the infected count just
before that arrival.

PRNG contract (frozen under schema_version 1):

* stream generator: xoshiro256** — state s[0..3]; next() returns
  rotl64(s[1] * 5, 7) * 9, then updates
  t = s[1] << 17; s[2] ^= s[0]; s[3] ^= s[1]; s[1] ^= s[2]; s[0] ^= s[3];
  s[2] ^= t; s[3] = rotl64(s[3], 45).  All arithmetic mod 2^64.
* seeding: s[0..3] are four successive outputs of SplitMix64 started at the
  64-bit seed.  SplitMix64: z += 0x9E3779B97F4A7C15; r = z;
  r = (r ^ (r >> 30)) * 0xBF58476D1CE4E5B9;
  r = (r ^ (r >> 27)) * 0x94D049BB133111EB; return r ^ (r >> 31).
* bounded draw below n: rejection with limit = (2^64 // n) * n, result
  r % n for the first raw draw r < limit.
* permutation: Fisher-Yates over sites in row-major order (index x*n + y),
  swapping index i with a bounded draw below i+1, for i = n^2-1 down to 1.
* per-run seeds in sweeps: one SplitMix64 output of (master_seed XOR
  run_index), run_index enumerating the model/n/seed grid row-major.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .geometry import Neighbourhood

SCHEMA_VERSION = 1

_MASK = (1 << 64) - 1


# ---------------------------------------------------------------------------
# Pure-Python PRNG (the reference the numba kernel must match bit-for-bit)
# ---------------------------------------------------------------------------


def splitmix64(state: int):
    """One SplitMix64 step: returns (output, new_state)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    r = state
    r = ((r ^ (r >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    r = ((r ^ (r >> 27)) * 0x94D049BB133111EB) & _MASK
    return (r ^ (r >> 31)), state


def derive_run_seed(master_seed: int, run_index: int) -> int:
    out, _ = splitmix64((master_seed ^ run_index) & _MASK)
    return out


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK


class Xoshiro256StarStar:
    """Reference implementation; state seeded from SplitMix64."""

    def __init__(self, seed: int):
        s = []
        state = seed & _MASK
        for _ in range(4):
            out, state = splitmix64(state)
            s.append(out)
        self.s = s

    def next_raw(self) -> int:
        s = self.s
        result = (_rotl((s[1] * 5) & _MASK, 7) * 9) & _MASK
        t = (s[1] << 17) & _MASK
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def bounded(self, n: int) -> int:
        limit = ((1 << 64) // n) * n
        while True:
            r = self.next_raw()
            if r < limit:
                return r % n


def random_permutation(n_items: int, seed: int) -> np.ndarray:
    """Seeded Fisher-Yates permutation of 0..n_items-1 (reference engine)."""
    rng = Xoshiro256StarStar(seed)
    perm = list(range(n_items))
    for i in range(n_items - 1, 0, -1):
        j = rng.bounded(i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return np.asarray(perm, dtype=np.int64)


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def deco(f):
            return f

        return deco if not (args and callable(args[0])) else args[0]


@njit(cache=True, nogil=True)
def _sm64(state):
    state = state + np.uint64(0x9E3779B97F4A7C15)
    r = state
    r = (r ^ (r >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    r = (r ^ (r >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return r ^ (r >> np.uint64(31)), state


@njit(cache=True, nogil=True)
def _perm_kernel(n_items, seed):
    s = np.empty(4, dtype=np.uint64)
    state = np.uint64(seed)
    for i in range(4):
        s[i], state = _sm64(state)
    perm = np.arange(n_items, dtype=np.int64)
    for i in range(n_items - 1, 0, -1):
        bound = np.uint64(i + 1)
        limit = (np.uint64(0xFFFFFFFFFFFFFFFF) // bound) * bound
        while True:
            r = ((s[1] * np.uint64(5)) << np.uint64(7)) | (
                (s[1] * np.uint64(5)) >> np.uint64(57)
            )
            result = r * np.uint64(9)
            t = s[1] << np.uint64(17)
            s[2] ^= s[0]
            s[3] ^= s[1]
            s[1] ^= s[2]
            s[0] ^= s[3]
            s[2] ^= t
            s[3] = (s[3] << np.uint64(45)) | (s[3] >> np.uint64(19))
            if result < limit:
                break
        j = np.int64(result % bound)
        tmp = perm[i]
        perm[i] = perm[j]
        perm[j] = tmp
    return perm


@njit(cache=True, nogil=True)
def _run_kernel(n, r, offs, perm):
    """Arrival loop with incremental cascade; returns (tau, closure_before)."""
    n2 = n * n
    counts = np.zeros(n2, dtype=np.int32)
    infected = np.zeros(n2, dtype=np.uint8)
    stack = np.empty(n2 + 1, dtype=np.int64)
    n_off = offs.shape[0]
    num = 0
    for t in range(n2):
        s = perm[t]
        prev = num
        if infected[s] == 0:
            sp = 0
            stack[sp] = s
            sp += 1
            while sp > 0:
                sp -= 1
                y = stack[sp]
                if infected[y] == 1:
                    continue
                infected[y] = 1
                num += 1
                yx = y // n
                yy = y - yx * n
                for o in range(n_off):
                    xx = yx - offs[o, 0]
                    if xx < 0:
                        xx += n
                    elif xx >= n:
                        xx -= n
                    xy = yy - offs[o, 1]
                    if xy < 0:
                        xy += n
                    elif xy >= n:
                        xy -= n
                    x = xx * n + xy
                    counts[x] += 1
                    if counts[x] == r and infected[x] == 0:
                        stack[sp] = x
                        sp += 1
        if num == n2:
            return t + 1, prev
    return n2, num  # unreachable: the last arrival always completes


def _run_python(n, r, offs, perm):
    """Pure-Python twin of _run_kernel (bit-exact same semantics)."""
    n2 = n * n
    counts = [0] * n2
    infected = bytearray(n2)
    num = 0
    offsets = [(int(a), int(b)) for a, b in offs]
    for t in range(n2):
        s = int(perm[t])
        prev = num
        if not infected[s]:
            stack = [s]
            while stack:
                y = stack.pop()
                if infected[y]:
                    continue
                infected[y] = 1
                num += 1
                yx, yy = divmod(y, n)
                for (kx, ky) in offsets:
                    x = ((yx - kx) % n) * n + ((yy - ky) % n)
                    counts[x] += 1
                    if counts[x] == r and not infected[x]:
                        stack.append(x)
        if num == n2:
            return t + 1, prev
    return n2, num


# ---------------------------------------------------------------------------
# Records and the driver
# ---------------------------------------------------------------------------

CSV_COLUMNS = (
    "schema_version",
    "model",
    "n",
    "seed",
    "tau",
    "closure_before",
    "jump_ratio",
    "tau_scaled",
    "wall_ms",
)


@dataclass(frozen=True)
class ProcessRecord:
    model: str
    n: int
    seed: int
    tau: int
    closure_before: int
    wall_ms: float
    schema_version: int = SCHEMA_VERSION

    @property
    def jump_ratio(self) -> float:
        return self.closure_before / self.tau

    @property
    def tau_scaled(self) -> float:
        return self.tau * math.log(self.n) / (self.n * self.n)

    def csv_row(self) -> list:
        return [
            self.schema_version,
            self.model,
            self.n,
            self.seed,
            self.tau,
            self.closure_before,
            f"{self.jump_ratio:.9g}",
            f"{self.tau_scaled:.9g}",
            f"{self.wall_ms:.3f}",
        ]

    def to_json(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "model": self.model,
            "n": self.n,
            "seed": self.seed,
            "tau": self.tau,
            "closure_before": self.closure_before,
            "jump_ratio": self.jump_ratio,
            "tau_scaled": self.tau_scaled,
            "wall_ms": self.wall_ms,
        }


def _offsets_array(nbhd: Neighbourhood) -> np.ndarray:
    offs = sorted(o for o in nbhd.offsets if o != (0, 0))
    return np.asarray(offs, dtype=np.int64)


def run_once(
    nbhd: Neighbourhood,
    n: int,
    seed: int,
    model: Optional[str] = None,
    permutation: Optional[Sequence[int]] = None,
    engine: str = "numba",
) -> ProcessRecord:
    """One arrival-process run; injecting ``permutation`` bypasses the PRNG."""
    if n < 2 * nbhd.radius_ceil + 1:
        raise ValueError(
            f"torus side {n} too small for neighbourhood radius {nbhd.radius:.3f}"
        )
    if engine not in ("numba", "python"):
        raise ValueError(f"unknown engine {engine!r}")
    if engine == "numba" and not _HAVE_NUMBA:
        engine = "python"
    offs = _offsets_array(nbhd)
    seed = int(seed) & _MASK
    start = time.perf_counter()
    if permutation is not None:
        perm = np.asarray(permutation, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(n * n)):
            raise ValueError("injected permutation is not a bijection on the torus")
    elif engine == "numba":
        perm = _perm_kernel(n * n, np.uint64(seed))
    else:
        perm = random_permutation(n * n, seed)
    if engine == "numba":
        tau, closure_before = _run_kernel(n, nbhd.threshold, offs, perm)
    else:
        tau, closure_before = _run_python(n, nbhd.threshold, offs, perm)
    wall_ms = (time.perf_counter() - start) * 1000.0
    return ProcessRecord(model or nbhd.name, n, seed, int(tau), int(closure_before), wall_ms)


@dataclass(frozen=True)
class SweepSummary:
    groups: dict  # (model, n) -> statistics dict

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "groups": [dict(model=m, n=n, **st) for (m, n), st in sorted(self.groups.items())],
        }


def _quantile(sorted_vals, q):
    # linear interpolation between closest ranks (inclusive method)
    if not sorted_vals:
        raise ValueError("no values")
    if len(sorted_vals) == 1:
        return sorted_vals[0]
    pos = q * (len(sorted_vals) - 1)
    lo = int(math.floor(pos))
    hi = min(lo + 1, len(sorted_vals) - 1)
    frac = pos - lo
    return sorted_vals[lo] * (1 - frac) + sorted_vals[hi] * frac


def summarise(records: Sequence[ProcessRecord],
              jump_thresholds: Sequence[float] = (1.5, 2.0)) -> SweepSummary:
    if not records:
        raise ValueError("cannot summarise zero runs")
    groups = {}
    by_key = {}
    for rec in records:
        by_key.setdefault((rec.model, rec.n), []).append(rec)
    for key, recs in by_key.items():
        ts = sorted(r.tau_scaled for r in recs)
        js = sorted(r.jump_ratio for r in recs)
        stats = {
            "count": len(recs),
            "tau_scaled_median": _quantile(ts, 0.5),
            "tau_scaled_q1": _quantile(ts, 0.25),
            "tau_scaled_q3": _quantile(ts, 0.75),
            "tau_scaled_mean": statistics.fmean(ts),
            "tau_scaled_var": statistics.pvariance(ts) if len(ts) > 1 else 0.0,
            "jump_ratio_median": _quantile(js, 0.5),
            "jump_ratio_q1": _quantile(js, 0.25),
            "jump_ratio_q3": _quantile(js, 0.75),
            "jump_ratio_mean": statistics.fmean(js),
        }
        for thr in jump_thresholds:
            frac = sum(1 for r in recs if r.closure_before >= thr * r.tau) / len(recs)
            stats[f"frac_jump_ge_{thr:g}"] = frac
        groups[key] = stats
    return SweepSummary(groups)


def default_parallelism() -> int:
    env = os.environ.get("BPERC_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_sweep(
    models: Sequence[tuple[str, Neighbourhood]],
    ns: Sequence[int],
    n_seeds: int,
    master_seed: int = 0,
    parallelism: Optional[int] = None,
    engine: str = "numba",
) -> tuple[list, SweepSummary]:
    """Cartesian product of models x ns x seed indices; deterministic in the
    master seed regardless of the parallelism degree."""
    if n_seeds < 1:
        raise ValueError("cannot aggregate over zero runs")
    jobs = []
    idx = 0
    for name, nbhd in models:
        for n in ns:
            for _ in range(n_seeds):
                jobs.append((idx, name, nbhd, n, derive_run_seed(master_seed, idx)))
                idx += 1
    workers = parallelism if parallelism else default_parallelism()

    def work(job):
        i, name, nbhd, n, seed = job
        return i, run_once(nbhd, n, seed, model=name, engine=engine)

    results = [None] * len(jobs)
    if workers == 1:
        for job in jobs:
            i, rec = work(job)
            results[i] = rec
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for i, rec in pool.map(work, jobs):
                results[i] = rec
    return results, summarise(results)


def jump_event_rate(records: Sequence[ProcessRecord], c: float) -> float:
    """Fraction of records with closure_before >= tau * (1 + c/ln n)."""
    if not records:
        raise ValueError("no records")
    ns = {r.n for r in records}
    if len(ns) != 1:
        raise ValueError(f"records mix torus sizes {sorted(ns)}")
    n = ns.pop()
    bar = 1 + c / math.log(n)
    return sum(1 for r in records if r.closure_before >= r.tau * bar) / len(records)


# ---------------------------------------------------------------------------
# Serialisation
# ---------------------------------------------------------------------------


def records_to_csv(records: Iterable[ProcessRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rec in records:
        w.writerow(rec.csv_row())
    return buf.getvalue()


def records_to_jsonl(records: Iterable[ProcessRecord]) -> str:
    return "".join(json.dumps(r.to_json(), sort_keys=True) + "\n" for r in records)
