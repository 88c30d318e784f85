import math
from dataclasses import dataclass
from typing import Optional

from intelligibility.exceptions import ValidationError


def _check_score(value, name, utterance_id):
    score = float(value)
    if not math.isfinite(score) or score < 0.0 or score > 100.0:
        raise ValidationError(f"{utterance_id}: {name} score out of range [0,100]: {value}")
    return score


@dataclass(frozen=True)
class PredictionRecord:
    """
    Predicted and true intelligibility of one utterance on the 0-100 scale.
    ``truth`` is None for prediction-only rows.
    """
    utterance_id: str
    predicted: float
    truth: Optional[float] = None

    def __post_init__(self):
        if not self.utterance_id or not self.utterance_id.strip():
            raise ValidationError("utterance_id must be non-empty")
        object.__setattr__(self, 'predicted', _check_score(self.predicted, 'predicted', self.utterance_id))
        if self.truth is not None:
            object.__setattr__(self, 'truth', _check_score(self.truth, 'truth', self.utterance_id))


@dataclass(frozen=True)
class MetricReport:
    """RMSE, STDERR and LCC of a prediction set; lcc is None when undefined."""
    rmse: float
    stderr: float
    lcc: Optional[float]
    n: int

    def to_dict(self):
        return {'rmse': self.rmse, 'stderr': self.stderr, 'lcc': self.lcc, 'n': self.n}
