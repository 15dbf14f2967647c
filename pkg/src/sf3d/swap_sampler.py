"""Batch planning for swap training.

Every batch is homogeneous: either all items come from branch ``A`` (inputs
with the extra spatial cue, i.e. audio + video) or all from branch ``B``
(plain acoustic features). The branch of each batch is drawn with
probability ``alpha`` for ``A``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

BRANCH_A = "A"
BRANCH_B = "B"
ELIGIBILITY = {"A": {BRANCH_A}, "B": {BRANCH_B}, "both": {BRANCH_A, BRANCH_B}}
# long-form names accepted in dataset records
ALIASES = {"A_extra": "A", "B_plain": "B"}
DEFAULT_ALPHA = 0.7


class InsufficientItemsError(ValueError):
    pass


@dataclass(frozen=True)
class Item:
    id: str
    eligibility: str
    duration_s: float

    def __post_init__(self):
        object.__setattr__(self, "eligibility", ALIASES.get(self.eligibility, self.eligibility))
        if self.eligibility not in ELIGIBILITY:
            raise ValueError(f"eligibility must be one of {sorted(ELIGIBILITY)}, got {self.eligibility!r}")
        if not self.duration_s > 0:
            raise ValueError(f"item {self.id}: duration must be positive")

    def eligible_for(self, branch: str) -> bool:
        return branch in ELIGIBILITY[self.eligibility]


@dataclass(frozen=True)
class DatasetMeta:
    items: tuple[Item, ...]

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        if not self.items:
            raise ValueError("dataset is empty")
        ids = [it.id for it in self.items]
        if len(set(ids)) != len(ids):
            raise ValueError("item ids must be unique")

    def pool(self, branch: str) -> list[str]:
        return [it.id for it in self.items if it.eligible_for(branch)]

    def by_id(self) -> dict[str, Item]:
        return {it.id: it for it in self.items}


@dataclass(frozen=True)
class Batch:
    branch: str
    item_ids: tuple[str, ...]


@dataclass(frozen=True)
class BatchPlan:
    batches: tuple[Batch, ...]
    alpha: float
    seed: int
    n_items: int


@dataclass(frozen=True)
class BranchStats:
    proportion_a: float
    batch_count: int
    item_coverage: float


class _Pool:
    """Shuffled pool drawn without replacement, reshuffled when exhausted."""

    def __init__(self, ids: list[str], rng: np.random.Generator):
        self.ids = ids
        self.rng = rng
        self.order: list[str] = []

    def take(self, n: int) -> tuple[str, ...]:
        out: list[str] = []
        while len(out) < n:
            if not self.order:
                self.order = [self.ids[i] for i in self.rng.permutation(len(self.ids))]
            need = n - len(out)
            if out:
                # never repeat an item inside one batch across a reshuffle
                self.order = [i for i in self.order if i not in out]
            out.extend(self.order[:need])
            self.order = self.order[need:]
        return tuple(out)


def plan_epoch(
    meta: DatasetMeta,
    alpha: float = DEFAULT_ALPHA,
    batch_size: int = 8,
    seed: int = 0,
    n_batches: int | None = None,
    quota: bool = False,
) -> BatchPlan:
    """Plan one epoch of homogeneous batches.

    Parameters
    ----------
    alpha : float
        Probability that a batch comes from branch A.
    n_batches : int, optional
        Defaults to ``ceil(len(items) / batch_size)``.
    quota : bool
        Use exactly ``round(alpha * n_batches)`` A-batches in shuffled order
        instead of independent draws.

    Items are drawn without replacement within a branch until its pool is
    exhausted, after which the pool is reshuffled (so long plans reuse items).
    Items eligible for both branches can appear in either.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if n_batches is None:
        n_batches = math.ceil(len(meta.items) / batch_size)
    pools = {b: meta.pool(b) for b in (BRANCH_A, BRANCH_B)}
    needed = [b for b, p in ((BRANCH_A, alpha), (BRANCH_B, 1.0 - alpha)) if p > 0]
    for b in needed:
        if len(pools[b]) < batch_size:
            raise InsufficientItemsError(
                f"branch {b} has {len(pools[b])} eligible items, batch size is {batch_size}"
            )

    rng = np.random.default_rng(seed)
    if quota:
        n_a = int(round(alpha * n_batches))
        branches = np.array([BRANCH_A] * n_a + [BRANCH_B] * (n_batches - n_a))
        branches = branches[rng.permutation(n_batches)]
    else:
        branches = np.where(rng.random(n_batches) < alpha, BRANCH_A, BRANCH_B)
    draw = {b: _Pool(pools[b], rng) for b in needed}
    batches = tuple(Batch(str(b), draw[str(b)].take(batch_size)) for b in branches)
    return BatchPlan(batches, alpha, seed, len(meta.items))


def branch_stats(plan: BatchPlan) -> BranchStats:
    if not plan.batches:
        raise ValueError("plan has no batches")
    n_a = sum(b.branch == BRANCH_A for b in plan.batches)
    seen = {i for b in plan.batches for i in b.item_ids}
    return BranchStats(n_a / len(plan.batches), len(plan.batches), len(seen) / plan.n_items)


def homogeneity_violations(plan: BatchPlan, meta: DatasetMeta) -> int:
    """Number of batches holding an item not eligible for the batch's branch."""
    items = meta.by_id()
    return sum(
        any(not items[i].eligible_for(b.branch) for i in b.item_ids) for b in plan.batches
    )


# ---------------------------------------------------------------- text records


def write_meta(path, meta: DatasetMeta) -> None:
    lines = [f"{it.id}\t{it.eligibility}\t{it.duration_s!r}" for it in meta.items]
    Path(path).write_text("\n".join(lines) + "\n")


def read_meta(path) -> DatasetMeta:
    return DatasetMeta(tuple(_parse_meta_lines(Path(path).read_text().splitlines())))


def _parse_meta_lines(lines: Iterable[str]):
    for n, line in enumerate(lines, 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValueError(f"line {n}: expected id<TAB>branch<TAB>duration")
        yield Item(parts[0], parts[1], float(parts[2]))


def write_plan(path, plan: BatchPlan, meta: DatasetMeta) -> None:
    """One line per planned item: ``batch<TAB>id<TAB>branch<TAB>duration``."""
    items = meta.by_id()
    out = [f"# alpha={plan.alpha!r} seed={plan.seed} n_items={plan.n_items}"]
    for k, b in enumerate(plan.batches):
        out += [f"{k}\t{i}\t{b.branch}\t{items[i].duration_s!r}" for i in b.item_ids]
    Path(path).write_text("\n".join(out) + "\n")


def read_plan(path) -> BatchPlan:
    lines = Path(path).read_text().splitlines()
    header = dict(kv.split("=") for kv in lines[0].lstrip("# ").split())
    grouped: dict[int, list[tuple[str, str]]] = {}
    for line in lines[1:]:
        if not line.strip():
            continue
        k, item_id, branch, _ = line.split("\t")
        grouped.setdefault(int(k), []).append((item_id, branch))
    batches = []
    for k in sorted(grouped):
        branches = {b for _, b in grouped[k]}
        if len(branches) != 1:
            raise ValueError(f"batch {k} mixes branches {sorted(branches)}")
        batches.append(Batch(branches.pop(), tuple(i for i, _ in grouped[k])))
    return BatchPlan(tuple(batches), float(header["alpha"]), int(header["seed"]), int(header["n_items"]))
