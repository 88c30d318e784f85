import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from intelligibility.exceptions import ManifestError

SPLITS = ('train', 'dev', 'test')


@dataclass(frozen=True)
class UtteranceRecord:
    """
    One manifest row: a binaural recording heard by one listener.

    ``correctness`` is the listening-test score on the 0-100 scale; it may
    be missing only for test rows (prediction-only sets).
    """
    utterance_id: str
    wav_path: Path
    listener_id: str
    correctness: Optional[float]
    split: str

    def __post_init__(self):
        if not self.utterance_id or not self.utterance_id.strip():
            raise ManifestError("utterance_id must be non-empty")
        if not self.listener_id or not self.listener_id.strip():
            raise ManifestError(f"{self.utterance_id}: listener_id must be non-empty")
        if self.split not in SPLITS:
            raise ManifestError(
                f"{self.utterance_id}: unknown split '{self.split}', expected one of {', '.join(SPLITS)}"
            )
        object.__setattr__(self, 'wav_path', Path(self.wav_path))
        if self.correctness is None:
            if self.split != 'test':
                raise ManifestError(
                    f"{self.utterance_id}: correctness is required for {self.split} rows"
                )
            return
        score = float(self.correctness)
        if not math.isfinite(score) or score < 0.0 or score > 100.0:
            raise ManifestError(f"{self.utterance_id}: score out of range [0,100]: {self.correctness}")
        object.__setattr__(self, 'correctness', score)

    def __str__(self):
        return self.utterance_id

    @property
    def has_label(self):
        return self.correctness is not None
