"""Greedy target-sampling benchmark.

Repeatedly takes the candidate that sees the most still-uncovered MPs;
ties go to the candidate closest to the previous pick, then the lowest id.
This approximates a coverage-plus-path-length objective and ignores
uncertainty when fed gate-free visible sets.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from .errors import CoverageFailure
from .visibility import Viewpoint, VisibleSet


def greedy_target_sampling(candidates: Sequence[Viewpoint], visible: Mapping[int, VisibleSet],
                           mp_ids: Sequence[str], start=(0.0, 0.0, 0.0)) -> list[Viewpoint]:
    remaining = set(mp_ids)
    covered_by = {vp.id: set(visible[vp.id].mp_ids) & remaining for vp in candidates}
    union = set().union(*covered_by.values()) if covered_by else set()
    missing = sorted(remaining - union)
    if missing:
        raise CoverageFailure(
            f"baseline candidates never see MP(s): {', '.join(missing)}", uncovered=missing
        )
    last = np.asarray(start, dtype=float)
    picked: list[Viewpoint] = []
    used = set()
    while remaining:
        best, best_key = None, None
        for vp in candidates:
            if vp.id in used:
                continue
            gain = len(covered_by[vp.id] & remaining)
            if gain == 0:
                continue
            key = (-gain, float(np.linalg.norm(vp.p - last)), vp.id)
            if best_key is None or key < best_key:
                best, best_key = vp, key
        picked.append(best)
        used.add(best.id)
        remaining -= covered_by[best.id]
        last = best.p
    return picked
