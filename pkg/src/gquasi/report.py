from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

WITNESS_CAP = 16


def to_jsonable(obj):
    """Recursively convert numpy containers and scalars to plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x) or math.isinf(x):
            return repr(x)
        return x
    return obj


@dataclass
class CheckReport:
    """Outcome of a sampled property check.

    ``verdict`` is "fail" iff ``violations > 0`` and "vacuous" iff the
    rank-one cone the check samples from is empty.
    """

    samples_run: int = 0
    violations: int = 0
    worst_margin: float = math.inf
    witnesses: list = field(default_factory=list)
    verdict: str = "pass"
    metadata: dict = field(default_factory=dict)
    # full witness stream, kept out of the JSON unless requested
    all_witnesses: list = field(default_factory=list, repr=False)

    def record(self, margin: float, threshold: float, witness: dict[str, Any]):
        self.samples_run += 1
        if not margin >= self.worst_margin:
            self.worst_margin = -math.inf if math.isnan(margin) else float(margin)
        if not margin >= -threshold:
            self.violations += 1
            self.all_witnesses.append(witness)
            if len(self.witnesses) < WITNESS_CAP:
                self.witnesses.append(witness)

    def record_many(self, margins, thresholds, witness):
        """Vectorised ``record``; ``witness(i)`` builds the i-th witness lazily."""
        margins = np.asarray(margins, dtype=float).ravel()
        thresholds = np.broadcast_to(np.asarray(thresholds, dtype=float), margins.shape)
        if margins.size == 0:
            return
        self.samples_run += margins.size
        # NaN margins count as violations
        worst = np.where(np.isnan(margins), -np.inf, margins)
        self.worst_margin = min(self.worst_margin, float(np.min(worst)))
        bad = np.flatnonzero(~(margins >= -thresholds))
        self.violations += bad.size
        for i in bad:
            wit = witness(int(i))
            self.all_witnesses.append(wit)
            if len(self.witnesses) < WITNESS_CAP:
                self.witnesses.append(wit)

    def finish(self) -> "CheckReport":
        if self.verdict != "vacuous":
            self.verdict = "fail" if self.violations > 0 else "pass"
        return self

    @classmethod
    def vacuous(cls, reason: str, **metadata) -> "CheckReport":
        return cls(verdict="vacuous", worst_margin=math.inf,
                   metadata={"reason": reason, **metadata})

    def merge(self, other: "CheckReport") -> "CheckReport":
        self.samples_run += other.samples_run
        self.violations += other.violations
        self.worst_margin = min(self.worst_margin, other.worst_margin)
        room = WITNESS_CAP - len(self.witnesses)
        self.witnesses.extend(other.witnesses[:max(room, 0)])
        self.all_witnesses.extend(other.all_witnesses)
        return self

    @property
    def passed(self) -> bool:
        return self.verdict in ("pass", "vacuous")

    def to_dict(self, dump_witnesses: bool = False) -> dict:
        d = asdict(self)
        d.pop("all_witnesses")
        if dump_witnesses:
            d["witness_stream"] = self.all_witnesses
        return to_jsonable(d)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(**kwargs), indent=2, sort_keys=True)
