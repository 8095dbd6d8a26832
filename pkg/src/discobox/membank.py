"""Per-category FIFO memory bank of RoI features and masks.

Each category owns a bounded queue (capacity 100). Objects with image
area below 32x32 px are never stored. Retrieval returns a uniform
random sample of at most 10 entries and nothing at all while a queue
holds fewer than 5 entries.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .tensors import RoiObject, TensorBundle

CAPACITY = 100
MAX_RETRIEVE = 10
MIN_BANK_SIZE = 5
MIN_AREA = 32 * 32


@dataclass(frozen=True)
class BankEntry:
    id: str
    category: int
    confidence: float
    feature: np.ndarray
    mask: np.ndarray


@dataclass
class MemoryBank:
    queues: dict[int, deque] = field(default_factory=dict)

    def size(self, category: int) -> int:
        return len(self.queues.get(category, ()))


def push(bank: MemoryBank, obj: RoiObject) -> bool:
    """Append an object to its category queue; False if its area is
    below the 32x32 threshold."""
    if obj.area < MIN_AREA:
        return False
    q = bank.queues.setdefault(obj.category, deque(maxlen=CAPACITY))
    q.append(
        BankEntry(
            id=obj.id,
            category=obj.category,
            confidence=obj.confidence,
            feature=np.array(obj.feature, copy=True),
            mask=np.array(obj.mask, copy=True),
        )
    )
    return True


def retrieve(bank: MemoryBank, category: int, rng_seed: int) -> list[BankEntry]:
    """Sample up to 10 entries without replacement; empty when the queue
    holds fewer than 5 entries or the category is unknown."""
    q = bank.queues.get(category)
    if q is None or len(q) < MIN_BANK_SIZE:
        return []
    entries = list(q)
    rng = np.random.default_rng(rng_seed)
    k = min(MAX_RETRIEVE, len(entries))
    picks = rng.choice(len(entries), size=k, replace=False)
    return [entries[i] for i in picks]


def snapshot(bank: MemoryBank) -> TensorBundle:
    """Serialize the bank into a tensor bundle (plus JSON metadata)."""
    import json

    bundle = TensorBundle()
    meta = []
    for cat in sorted(bank.queues):
        for i, e in enumerate(bank.queues[cat]):
            bundle.put(f"feat/{cat}/{i}", e.feature)
            bundle.put(f"mask/{cat}/{i}", e.mask)
            meta.append(
                {"category": cat, "index": i, "id": e.id, "confidence": e.confidence}
            )
    text = json.dumps(meta, sort_keys=True, separators=(",", ":"))
    bundle.put("bank.json", np.frombuffer(text.encode("utf-8"), dtype=np.uint8))
    return bundle


def restore(bundle: TensorBundle) -> MemoryBank:
    import json

    bank = MemoryBank()
    meta = json.loads(bytes(bundle.get("bank.json")).decode("utf-8"))
    meta.sort(key=lambda m: (m["category"], m["index"]))
    for m in meta:
        cat = int(m["category"])
        q = bank.queues.setdefault(cat, deque(maxlen=CAPACITY))
        q.append(
            BankEntry(
                id=m["id"],
                category=cat,
                confidence=float(m["confidence"]),
                feature=np.asarray(bundle.get(f"feat/{cat}/{m['index']}"), dtype=np.float64),
                mask=np.asarray(bundle.get(f"mask/{cat}/{m['index']}"), dtype=np.float64),
            )
        )
    return bank
