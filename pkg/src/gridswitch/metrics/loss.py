"""Equal-weight combined loss used to rank grid-search configurations."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np

METRIC_KEYS = ("ms_ssim", "lpips", "temporal_consistency")


@dataclass(frozen=True)
class RankedConfig:
    config_id: str
    loss: float
    terms: dict[str, float]  # per-metric contribution to the loss
    row: Mapping[str, Any]


def _minmax(values: np.ndarray) -> np.ndarray:
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def combined_loss(rows: Sequence[Mapping[str, Any]], id_key: str = "config_id") -> list[RankedConfig]:
    """Rank rows by ``(1 - n(ms_ssim)) + n(lpips) + n(temporal_consistency)``.

    ``n`` is min-max normalization across rows. The MS-SSIM term is taken as
    the min-max normalization of ``-ms_ssim``, identical to ``1 - n(ms_ssim)``
    whenever the column has a spread and 0 when it has none, so a
    degenerate column contributes nothing to any row.
    """
    if not rows:
        raise ValueError("need at least one row")
    cols = {}
    for key in METRIC_KEYS:
        vals = []
        for i, row in enumerate(rows):
            v = row.get(key)
            if v is None or not np.isfinite(float(v)):
                raise ValueError(f"row {row.get(id_key, i)!r} is missing metric {key!r}")
            vals.append(float(v))
        cols[key] = np.asarray(vals)
    norm = {
        "ms_ssim": _minmax(-cols["ms_ssim"]),
        "lpips": _minmax(cols["lpips"]),
        "temporal_consistency": _minmax(cols["temporal_consistency"]),
    }
    loss = norm["ms_ssim"] + norm["lpips"] + norm["temporal_consistency"]
    ranked = [
        RankedConfig(
            str(row.get(id_key, i)),
            float(loss[i]),
            {k: float(norm[k][i]) for k in METRIC_KEYS},
            row,
        )
        for i, row in enumerate(rows)
    ]
    # stable sort keeps input order among ties
    return sorted(ranked, key=lambda r: r.loss)
