import math
from dataclasses import dataclass
from typing import Tuple

from intelligibility.exceptions import AudiogramError

# Pure-tone audiometry frequencies, in the order thresholds are stored.
FREQUENCIES_HZ = (250, 500, 1000, 2000, 3000, 4000, 6000, 8000)

MIN_THRESHOLD_DB_HL = -10.0
MAX_THRESHOLD_DB_HL = 120.0


@dataclass(frozen=True)
class Audiogram:
    """
    Hearing thresholds (dB HL) of one ear at the fixed FREQUENCIES_HZ.
    Higher thresholds mean worse hearing.
    """
    thresholds_db_hl: Tuple[float, ...]

    def __post_init__(self):
        thresholds = tuple(float(t) for t in self.thresholds_db_hl)
        if len(thresholds) != len(FREQUENCIES_HZ):
            raise AudiogramError(
                f"expected {len(FREQUENCIES_HZ)} thresholds, got {len(thresholds)}"
            )
        for freq, value in zip(FREQUENCIES_HZ, thresholds):
            if not math.isfinite(value):
                raise AudiogramError(f"threshold at {freq} Hz is not a number")
            if value < MIN_THRESHOLD_DB_HL:
                raise AudiogramError(
                    f"threshold below {MIN_THRESHOLD_DB_HL:g} dB HL at {freq} Hz: {value:g}"
                )
            if value > MAX_THRESHOLD_DB_HL:
                raise AudiogramError(
                    f"threshold above {MAX_THRESHOLD_DB_HL:g} dB HL at {freq} Hz: {value:g}"
                )
        object.__setattr__(self, 'thresholds_db_hl', thresholds)

    @property
    def frequencies_hz(self):
        return FREQUENCIES_HZ

    def mean_threshold(self):
        """Mean threshold over the eight anchor frequencies"""
        return sum(self.thresholds_db_hl) / len(self.thresholds_db_hl)


@dataclass(frozen=True)
class ListenerProfile:
    """
    Bilateral audiograms of one listener.
    """
    listener_id: str
    left: Audiogram
    right: Audiogram

    def __post_init__(self):
        if not self.listener_id or not self.listener_id.strip():
            raise AudiogramError("listener_id must be non-empty")

    def __str__(self):
        return self.listener_id

    def ear(self, side):
        """Return the audiogram for 'left' or 'right'"""
        if side == 'left':
            return self.left
        if side == 'right':
            return self.right
        raise AudiogramError(f"unknown ear '{side}', expected 'left' or 'right'")
