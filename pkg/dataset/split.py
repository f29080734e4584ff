"""Deterministic train/val partition of image ids."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Literal, Sequence

from utils.errors import DataError, UsageError
from utils.seeding import stream

SplitLabel = Literal["train", "val"]


class EmptyList(DataError):
    code = "EMPTY_LIST"


class BadFraction(UsageError):
    code = "BAD_FRACTION"


@dataclass(frozen=True)
class SplitAssignment:
    labels: dict[Hashable, SplitLabel]
    seed: int

    @property
    def train(self) -> list:
        return [key for key, label in self.labels.items() if label == "train"]

    @property
    def val(self) -> list:
        return [key for key, label in self.labels.items() if label == "val"]


def train_count(total: int, fraction: float) -> int:
    """``floor(fraction * total)``, robust to fractions like 16000/18000."""
    return min(total, math.floor(fraction * total + 1e-9))


def split_dataset(image_ids: Sequence[Hashable], train_fraction: float, seed: int) -> SplitAssignment:
    """Seeded permutation; the first ``floor(fraction * N)`` ids go to train."""
    if not 0.0 < train_fraction <= 1.0:
        raise BadFraction(f"train fraction must be in (0, 1], got {train_fraction!r}")
    if len(image_ids) == 0:
        raise EmptyList("cannot split an empty image list")
    order = stream(seed, "split").permutation(len(image_ids))
    n_train = train_count(len(image_ids), train_fraction)
    train = {int(i) for i in order[:n_train]}
    labels = {key: ("train" if i in train else "val") for i, key in enumerate(image_ids)}
    return SplitAssignment(labels, int(seed))
