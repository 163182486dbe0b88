"""Synthetic genome collections for tests, demos and benchmarks.

Derived sequences start as a copy of the reference and accumulate the
mutation classes the compressor targets: point substitutions, short
insertions and deletions, N-runs, and novel segments.  Novel segments
drawn from a shared pool can appear in several sequences, which is what
exercises the extra-reference-phrase reservoir.
"""
from __future__ import annotations

import numpy as np

from .genome import Collection, N, Sequence


def random_reference(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniform ACGT sequence of length n."""
    return rng.integers(0, 4, n).astype(np.uint8)


def apply_snps(rng, data: np.ndarray, rate: float) -> np.ndarray:
    m = int(len(data) * rate)
    if m == 0:
        return data
    out = data.copy()
    at = rng.choice(len(out), m, replace=False)
    out[at] = (out[at] + rng.integers(1, 4, m)) % 4
    return out


def apply_indels(rng, data: np.ndarray, count: int, max_size: int = 100) -> np.ndarray:
    parts = [data]
    for _ in range(count):
        data = parts[-1] if len(parts) == 1 else np.concatenate(parts)
        if len(data) < 2 * max_size:
            break
        cut = int(rng.integers(max_size, len(data) - max_size))
        size = int(rng.integers(1, max_size + 1))
        if rng.random() < 0.5:
            ins = rng.integers(0, 4, size).astype(np.uint8)
            parts = [data[:cut], ins, data[cut:]]
        else:
            parts = [data[:cut], data[cut + size :]]
    return np.concatenate(parts) if len(parts) > 1 else parts[0]


def apply_n_runs(rng, data: np.ndarray, count: int, max_len: int) -> np.ndarray:
    out = data.copy()
    for _ in range(count):
        run = int(rng.integers(1, max(min(max_len, len(out) // 2), 2)))
        at = int(rng.integers(0, len(out) - run))
        out[at : at + run] = N
    return out


def insert_segments(rng, data: np.ndarray, segments: list[np.ndarray]) -> np.ndarray:
    parts = []
    rest = data
    for seg in segments:
        if len(rest) < 2:
            break
        cut = int(rng.integers(0, len(rest)))
        parts += [rest[:cut], seg]
        rest = rest[cut:]
    parts.append(rest)
    return np.concatenate(parts)


def make_collection(
    rng: np.random.Generator,
    ref_len: int = 100_000,
    n_derived: int = 4,
    snp_range: tuple[float, float] = (0.001, 0.02),
    max_indels: int = 4,
    max_n_run: int = 50_000,
    novel_pool: int = 3,
    novel_len: tuple[int, int] = (32, 2000),
) -> Collection:
    """A reference plus derived sequences with a mixed mutation load."""
    ref = random_reference(rng, ref_len)
    lo, hi = novel_len
    pool = [
        rng.integers(0, 4, int(rng.integers(lo, hi + 1))).astype(np.uint8)
        for _ in range(novel_pool)
    ]
    seqs = [Sequence("ref", ref)]
    for d in range(n_derived):
        rate = float(np.exp(rng.uniform(np.log(snp_range[0]), np.log(snp_range[1]))))
        data = apply_snps(rng, ref, rate)
        data = apply_indels(rng, data, int(rng.integers(0, max_indels + 1)))
        if pool and rng.random() < 0.8:
            picks = [pool[j] for j in rng.choice(len(pool), rng.integers(1, len(pool) + 1), replace=False)]
            data = insert_segments(rng, data, picks)
        if rng.random() < 0.5:
            n_cap = min(max_n_run, max(len(data) // 8, 2))
            data = apply_n_runs(rng, data, int(rng.integers(1, 3)), n_cap)
        seqs.append(Sequence(f"seq{d}", data))
    return Collection(seqs, reference_index=0)
