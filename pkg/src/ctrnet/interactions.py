"""Item-user and item-context attention: candidate-conditioned pooling over fine-grained fields.

Each field j gets its own score map: alpha_j = softmax_j(tanh(concat(e_i, e_j) . w_j + b_j)).
The pooled output concatenates the candidate vector with the weighted sum of
field embeddings; its first d coordinates therefore equal e_i exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nm
from .errors import ShapeMismatchError
from .numerics import Tensor


@dataclass
class LocalAttentionParams:
    """Per-field score maps, stacked: row j is field j's (2d,) weight; biases (J,)."""

    score_w: Tensor | np.ndarray  # (J, 2d)
    score_b: Tensor | np.ndarray  # (J,)


def field_attention_batch(e_i, e_fields, p: LocalAttentionParams):
    """Shared core of the user and context interactions.

    e_i (B, d) against e_fields (B, J, d) -> (pooled (B, 2d), weights (B, J)).
    """
    shape = e_fields.data.shape if isinstance(e_fields, Tensor) else np.asarray(e_fields).shape
    if len(shape) != 3:
        raise ShapeMismatchError(f"expected (B, J, d) field embeddings, got {shape}")
    b, j, d = shape
    if j < 1:
        raise ShapeMismatchError("schema must declare at least one field in this group")
    e_rep = nm.repeat_rows(e_i, j)  # (B*J, d)
    v_flat = nm.concat_cols([e_rep, nm.reshape(e_fields, (b * j, d))])  # (B*J, 2d)
    v = nm.reshape(v_flat, (b, j, 2 * d))
    scores = nm.tanh(nm.field_scores(v, p.score_w, p.score_b))  # (B, J)
    alpha = nm.masked_softmax_last(scores, None)
    pooled = nm.attn_pool(alpha, e_fields)
    return nm.concat_cols([e_i, pooled]), alpha


def iuim(e_i: np.ndarray, e_u: np.ndarray, p: LocalAttentionParams) -> tuple[np.ndarray, np.ndarray]:
    """Item-user interaction for one instance: (d,) x (J, d) -> (vector(2d), weights(J))."""
    pooled, alpha = field_attention_batch(
        Tensor(np.asarray(e_i)[None, :]), Tensor(np.asarray(e_u)[None, :, :]), p
    )
    return pooled.data[0], alpha.data[0]


def icim(e_i: np.ndarray, e_c: np.ndarray, p: LocalAttentionParams) -> tuple[np.ndarray, np.ndarray]:
    """Item-context interaction for one instance: mirror of iuim over context fields."""
    pooled, alpha = field_attention_batch(
        Tensor(np.asarray(e_i)[None, :]), Tensor(np.asarray(e_c)[None, :, :]), p
    )
    return pooled.data[0], alpha.data[0]
