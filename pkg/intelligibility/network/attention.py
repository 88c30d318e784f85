"""
Multiplicative (bilinear) self-attention over frame sequences.
"""
import math

import torch
from torch import nn


def multiplicative_attention(H, W_att, mask=None, return_weights=False):
    """
    Attend every frame to every valid frame.

    Scores S = H W_att H^T / sqrt(d); masked columns get -inf before the
    row softmax, so padded frames receive zero weight. The context is
    C = softmax(S) H.

    Args:
        H: (..., F, d) tensor
        W_att: (d, d) tensor
        mask: Optional (..., F) bool tensor of valid frames (at least one
            valid frame per sequence)
        return_weights: Also return the (..., F, F) attention matrix

    Returns:
        Context tensor shaped like H (and the weights when requested)
    """
    d = H.shape[-1]
    if W_att.shape != (d, d):
        raise ValueError(f"attention matrix must be {d}x{d}, got {tuple(W_att.shape)}")
    scores = torch.matmul(torch.matmul(H, W_att), H.transpose(-1, -2)) / math.sqrt(d)
    if mask is not None:
        scores = scores.masked_fill(~mask.unsqueeze(-2), float('-inf'))
    weights = torch.softmax(scores, dim=-1)
    context = torch.matmul(weights, H)
    if return_weights:
        return context, weights
    return context


class MultiplicativeAttention(nn.Module):
    def __init__(self, dim):
        super().__init__()
        self.weight = nn.Parameter(torch.empty(dim, dim))
        nn.init.xavier_uniform_(self.weight)

    def forward(self, H, mask=None):
        return multiplicative_attention(H, self.weight, mask)
