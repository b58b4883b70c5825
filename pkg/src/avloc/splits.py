"""Train/val/test split generation under open-vocabulary constraints.

Unseen-class videos may never enter the train split; the val and test
splits each have to hit a target seen share (3:7 seen:unseen by default)
within a tolerance. The generator searches the integer-feasible
assignments exhaustively over the unseen val count, so it finds a valid
assignment whenever one exists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import SplitError

# Reference configuration at benchmark scale: 24,800 videos split into
# 13,182 / 5,798 / 5,820 with a roughly 3:7 seen share in val and test.
BENCHMARK_COUNTS = {"total": 24800, "train": 13182, "val": 5798, "test": 5820}


@dataclass(frozen=True)
class SplitRatios:
    """Target split fractions plus the seen-share band for val and test.

    ``seen_share`` is the target fraction of seen-class videos inside val
    (and inside test); 0.3 encodes the 3:7 seen:unseen target. The band is
    ``seen_share`` plus/minus ``tolerance``.
    """

    train: float = BENCHMARK_COUNTS["train"] / BENCHMARK_COUNTS["total"]
    val: float = BENCHMARK_COUNTS["val"] / BENCHMARK_COUNTS["total"]
    test: float = BENCHMARK_COUNTS["test"] / BENCHMARK_COUNTS["total"]
    seen_share: float = 0.3
    tolerance: float = 0.05

    def __post_init__(self) -> None:
        if not math.isclose(self.train + self.val + self.test, 1.0, abs_tol=1e-6):
            raise SplitError(
                f"split fractions must sum to 1, got {self.train + self.val + self.test}"
            )
        if min(self.train, self.val, self.test) < 0:
            raise SplitError("split fractions must be nonnegative")
        if not 0 < self.seen_share < 1:
            raise SplitError(f"seen_share must lie in (0, 1), got {self.seen_share}")
        if not 0 <= self.tolerance < 1:
            raise SplitError(f"tolerance must lie in [0, 1), got {self.tolerance}")

    @property
    def band(self) -> tuple[float, float]:
        return (self.seen_share - self.tolerance, self.seen_share + self.tolerance)


@dataclass(frozen=True)
class SplitPlan:
    """Per-class train/val/test counts plus the achieved seen shares."""

    counts: dict[str, dict[str, int]]
    seen_share_val: float | None
    seen_share_test: float | None
    ratio_applicable: bool

    def totals(self) -> dict[str, int]:
        out = {"train": 0, "val": 0, "test": 0}
        for per_split in self.counts.values():
            for split, n in per_split.items():
                out[split] += n
        return out


def _seen_bounds(unseen_count: int, band: tuple[float, float]) -> tuple[int, int]:
    """Integer range of seen counts keeping seen/(seen+unseen) inside the band."""
    lo, hi = band
    if unseen_count == 0:
        # Any positive seen count yields share 1.0, which sits outside every
        # band with hi < 1; only the empty split satisfies vacuously.
        return (0, 0) if hi < 1.0 else (0, 10**9)
    s_min = math.ceil(lo * unseen_count / (1.0 - lo) - 1e-9)
    s_max = math.floor(hi * unseen_count / (1.0 - hi) + 1e-9)
    return max(0, s_min), s_max


def _nearest_in(value: int, low: int, high: int) -> int:
    return min(max(value, low), high)


def _largest_remainder(
    weights: Sequence[float], total: int, caps: Sequence[int], order: Sequence[int]
) -> list[int]:
    """Apportion ``total`` across items proportionally to ``weights``.

    Floors the proportional quotas, then hands out the remainder by
    descending fractional part (ties broken by ``order``), respecting the
    per-item caps.
    """
    weight_sum = float(sum(weights))
    if total == 0 or weight_sum == 0:
        return [0] * len(weights)
    quotas = [w / weight_sum * total for w in weights]
    out = [min(int(math.floor(q)), cap) for q, cap in zip(quotas, caps)]
    remaining = total - sum(out)
    rank = sorted(
        range(len(weights)),
        key=lambda i: (-(quotas[i] - math.floor(quotas[i])), order[i]),
    )
    idx = 0
    while remaining > 0 and idx < 2 * len(weights):
        i = rank[idx % len(weights)]
        if out[i] < caps[i]:
            out[i] += 1
            remaining -= 1
        idx += 1
    if remaining > 0:
        # Caps were binding everywhere; push leftovers anywhere legal.
        for i in range(len(weights)):
            room = caps[i] - out[i]
            take = min(room, remaining)
            out[i] += take
            remaining -= take
            if remaining == 0:
                break
    return out


def generate_splits(
    class_video_counts: Mapping[str, int],
    seen_classes: Sequence[str],
    ratios: SplitRatios = SplitRatios(),
    seed: int = 0,
) -> SplitPlan:
    """Assign per-class train/val/test counts under the split constraints.

    Unseen-class videos are spread over val and test only. Seen-class
    videos fill val and test up to the seen-share band and the remainder
    trains. Raises ``SplitError`` with the nearest achievable share when
    the band cannot be met.
    """
    classes = list(class_video_counts)
    seen_set = set(seen_classes)
    unknown = sorted(seen_set - set(classes))
    if unknown:
        raise SplitError(f"seen classes absent from the count table: {unknown}")
    for name, count in class_video_counts.items():
        if count < 0:
            raise SplitError(f"negative video count for class {name!r}")

    seen_list = [c for c in classes if c in seen_set]
    unseen_list = [c for c in classes if c not in seen_set]
    s_total = sum(class_video_counts[c] for c in seen_list)
    u_total = sum(class_video_counts[c] for c in unseen_list)
    n_total = s_total + u_total
    if n_total == 0:
        raise SplitError("no videos to split")

    val_target = round(n_total * ratios.val)
    test_target = round(n_total * ratios.test)
    band = ratios.band

    if u_total == 0:
        u_val = u_test = 0
        s_val = min(val_target, s_total)
        s_test = min(test_target, s_total - s_val)
        applicable = False
    else:
        applicable = True
        best: tuple[float, int, int, int] | None = None
        for u_val in range(u_total + 1):
            u_test = u_total - u_val
            lo_v, hi_v = _seen_bounds(u_val, band)
            lo_t, hi_t = _seen_bounds(u_test, band)
            if lo_v > hi_v or lo_t > hi_t:
                continue
            # Cap the val pick so the test side can still reach its band floor.
            s_val_hi = min(hi_v, s_total - lo_t)
            if lo_v > s_val_hi:
                continue
            s_val = _nearest_in(val_target - u_val, lo_v, s_val_hi)
            s_test = _nearest_in(test_target - u_test, lo_t, min(hi_t, s_total - s_val))
            score = abs(u_val + s_val - val_target) + abs(u_test + s_test - test_target)
            key = (score, u_val, s_val, s_test)
            if best is None or key < best:
                best = key
        if best is None:
            nearest = _nearest_achievable_share(s_total, u_total, ratios)
            raise SplitError(
                f"no assignment reaches seen share {ratios.seen_share:.2f} "
                f"+/- {ratios.tolerance:.2f} in both val and test; nearest "
                f"achievable share is {nearest:.3f}"
            )
        _, u_val, s_val, s_test = best
        u_test = u_total - u_val

    rng = np.random.default_rng(seed)
    # Seeded orders break apportionment ties so distinct seeds can yield
    # distinct (equally valid) plans.
    seen_order = list(rng.permutation(len(seen_list)))
    unseen_order = list(rng.permutation(len(unseen_list)))

    counts: dict[str, dict[str, int]] = {}
    u_counts = [class_video_counts[c] for c in unseen_list]
    u_val_alloc = _largest_remainder(u_counts, u_val, u_counts, unseen_order)
    for c, n, nv in zip(unseen_list, u_counts, u_val_alloc):
        counts[c] = {"train": 0, "val": nv, "test": n - nv}

    s_counts = [class_video_counts[c] for c in seen_list]
    s_val_alloc = _largest_remainder(s_counts, s_val, s_counts, seen_order)
    s_room = [n - v for n, v in zip(s_counts, s_val_alloc)]
    s_test_alloc = _largest_remainder(s_counts, s_test, s_room, seen_order)
    for c, n, nv, nt in zip(seen_list, s_counts, s_val_alloc, s_test_alloc):
        counts[c] = {"train": n - nv - nt, "val": nv, "test": nt}

    def share(seen_n: int, unseen_n: int) -> float | None:
        return seen_n / (seen_n + unseen_n) if seen_n + unseen_n else None

    return SplitPlan(
        counts=counts,
        seen_share_val=share(s_val, u_val) if applicable else None,
        seen_share_test=share(s_test, u_test) if applicable else None,
        ratio_applicable=applicable,
    )


def _nearest_achievable_share(s_total: int, u_total: int, ratios: SplitRatios) -> float:
    """Closest reachable seen share to the target, over all assignments."""
    target = ratios.seen_share
    best = math.inf
    best_share = 1.0
    for u_val in range(u_total + 1):
        for u_side in {u_val, u_total - u_val}:
            if u_side == 0:
                share = 1.0 if s_total else 0.0
                candidates = [share]
            else:
                s_star = round(target * u_side / (1.0 - target))
                candidates = [
                    s / (s + u_side)
                    for s in {0, min(s_star, s_total), s_total}
                ]
            for share in candidates:
                if abs(share - target) < best:
                    best = abs(share - target)
                    best_share = share
    return best_share


def assign_split_labels(
    class_videos: Mapping[str, Sequence[str]],
    plan: SplitPlan,
    seed: int = 0,
) -> dict[str, str]:
    """Materialize a plan into video-level split labels, seeded shuffle per class."""
    rng = np.random.default_rng(seed)
    assignment: dict[str, str] = {}
    for class_name in class_videos:
        if class_name not in plan.counts:
            raise SplitError(f"class {class_name!r} missing from the split plan")
        ids = list(class_videos[class_name])
        per_split = plan.counts[class_name]
        expected = per_split["train"] + per_split["val"] + per_split["test"]
        if expected != len(ids):
            raise SplitError(
                f"class {class_name!r}: plan covers {expected} videos, got {len(ids)}"
            )
        order = rng.permutation(len(ids))
        shuffled = [ids[i] for i in order]
        cursor = 0
        for split in ("train", "val", "test"):
            for vid in shuffled[cursor : cursor + per_split[split]]:
                assignment[vid] = split
            cursor += per_split[split]
    return assignment
