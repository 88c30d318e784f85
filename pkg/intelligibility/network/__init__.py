"""
The trainable predictor: branch networks, fusion, pooling, objective and
checkpoint files.
"""
from .attention import MultiplicativeAttention, multiplicative_attention
from .branch import BranchInputs, BranchNetwork, branch_forward
from .fusion import FusionLayer, fuse_average, fuse_linear
from .loss import batch_objective, compute_loss, global_average_pool
from .predictor import BinauralPredictor, Prediction, SingleBranchPredictor, build_predictor, predict

__all__ = [
    'MultiplicativeAttention',
    'multiplicative_attention',
    'BranchInputs',
    'BranchNetwork',
    'branch_forward',
    'FusionLayer',
    'fuse_average',
    'fuse_linear',
    'batch_objective',
    'compute_loss',
    'global_average_pool',
    'BinauralPredictor',
    'Prediction',
    'SingleBranchPredictor',
    'build_predictor',
    'predict',
]
