"""Discard frames whose view is blocked by a close flying object."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from gtrender.render import FrameGroundTruth
from scenegen.assets import SEMANTIC_CLASS_IDS
from utils.errors import UsageError

logger = logging.getLogger(__name__)

DEFAULT_NEAR = 1.0
DEFAULT_COVERAGE = 0.25


class BadThreshold(UsageError):
    code = "BAD_THRESHOLD"


@dataclass(frozen=True)
class OcclusionDecision:
    keep: bool
    coverage: float
    reason: str = ""


def occlusion_filter(frame: FrameGroundTruth, near: float = DEFAULT_NEAR, fraction: float = DEFAULT_COVERAGE) -> OcclusionDecision:
    """Discard iff the share of pixels showing a flying object closer than ``near`` reaches ``fraction``."""
    if not near > 0:
        raise BadThreshold(f"occlusion near distance must be positive, got {near!r}")
    if not 0.0 <= fraction <= 1.0:
        raise BadThreshold(f"occlusion coverage fraction must be in [0, 1], got {fraction!r}")
    blocking = (frame.semantic_map == SEMANTIC_CLASS_IDS["flying_object"]) & (frame.depth < near)
    coverage = float(np.count_nonzero(blocking)) / blocking.size
    if coverage >= fraction:
        reason = f"flying object within {near} m covers {coverage:.1%} of the frame"
        logger.debug(f"Discarding frame {frame.frame}: {reason}")
        return OcclusionDecision(False, coverage, reason)
    return OcclusionDecision(True, coverage)
