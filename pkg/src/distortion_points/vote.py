"""Voting over candidate runs and suppression of near-duplicate points."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .mesh import TriMesh, n_ring


@dataclass
class VoteTally:
    counts: dict[int, int]
    runs: int


@dataclass
class DistortionPointSet:
    """Selected distortion points as ``(vertex, votes)`` pairs plus detection metadata."""

    points: list[tuple[int, int]]
    meta: dict = field(default_factory=dict)

    @property
    def vertices(self) -> list[int]:
        return [v for v, _ in self.points]

    def __len__(self):
        return len(self.points)


def tally(runs, R: int | None = None) -> VoteTally:
    """Count in how many runs each vertex appears (at most one vote per run)."""
    runs = list(runs)
    if R is not None and len(runs) != R:
        raise ValueError(f"expected {R} runs, got {len(runs)}")
    counts: Counter = Counter()
    for run in runs:
        vs = run.as_set() if hasattr(run, "as_set") else set(run)
        counts.update(vs)
    return VoteTally(dict(sorted(counts.items())), len(runs) if R is None else R)


def select(votes: VoteTally, min_votes: int = 3) -> DistortionPointSet:
    if min_votes < 1:
        raise ValueError("min_votes must be at least 1")
    pts = [(v, c) for v, c in sorted(votes.counts.items()) if c >= min_votes]
    return DistortionPointSet(pts, {"R": votes.runs, "min_votes": min_votes})


def post_filter(points: DistortionPointSet, mesh: TriMesh, n: int = 5) -> DistortionPointSet:
    """Greedily keep points by descending votes, dropping any within the n-ring of a kept one.

    Ties in votes go to the smaller vertex index.
    """
    kept: list[tuple[int, int]] = []
    blocked: set[int] = set()
    for v, c in sorted(points.points, key=lambda p: (-p[1], p[0])):
        if v in blocked:
            continue
        kept.append((v, c))
        blocked |= n_ring(mesh, v, n)
        blocked.add(v)
    kept.sort()
    meta = dict(points.meta, n_ring=n)
    return DistortionPointSet(kept, meta)
