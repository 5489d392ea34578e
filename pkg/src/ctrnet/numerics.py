"""Dense float64 kernels with reverse-mode gradients.

Every kernel the model needs is defined here as a function over `Tensor`
operands (or plain arrays, treated as constants). When any operand is a
`Tensor` attached to a `GradTape`, the kernel records a backward closure on
that tape; `GradTape.backward` replays the closures in exact reverse order
of the forward pass. There is no general broadcasting engine, only the
shapes these kernels are documented for.

All arithmetic is double precision: the finite-difference gradient checks
this package relies on are not trustworthy in float32.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NonFiniteError, ShapeMismatchError

Array = np.ndarray


class Tensor:
    """A float64 array plus an accumulated gradient of the same shape.

    `tape` is the GradTape the tensor participates in, or None for values
    outside any differentiation context. Gradients are allocated lazily on
    first accumulation.
    """

    __slots__ = ("data", "grad", "tape")

    def __init__(self, data, tape: "GradTape | None" = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Array | None = None
        self.tape = tape

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def ensure_grad(self) -> Array:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        return self.grad

    def accum(self, g: Array) -> None:
        self.ensure_grad()
        self.grad += g

    def __repr__(self) -> str:  # pragma: no cover
        return f"Tensor(shape={self.data.shape}, taped={self.tape is not None})"


class GradTape:
    """Ordered record of the primitive operations of one forward pass.

    Single-writer: one tape per training step. `backward` seeds the output
    gradient with 1 and visits the recorded operations in exact reverse
    order of the forward pass.
    """

    __slots__ = ("_records",)

    def __init__(self):
        self._records: list[Callable[[], None]] = []

    def __len__(self) -> int:
        return len(self._records)

    def tensor(self, data) -> Tensor:
        """Wrap `data` as a leaf tensor tracked by this tape."""
        return Tensor(data, tape=self)

    def record(self, backward_fn: Callable[[], None]) -> None:
        self._records.append(backward_fn)

    def backward(self, output: Tensor) -> None:
        if output.data.size != 1:
            raise ShapeMismatchError(
                f"backward requires a scalar output, got shape {output.data.shape}"
            )
        output.grad = np.ones_like(output.data)
        for fn in reversed(self._records):
            fn()


def _val(x) -> Array:
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def _tape_of(*xs) -> GradTape | None:
    for x in xs:
        if isinstance(x, Tensor) and x.tape is not None:
            return x.tape
    return None


def _grad(out: Tensor) -> Array | None:
    return out.grad


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------


def matmul(a, b) -> Tensor:
    """Matrix product of two rank-2 operands, (n, k) @ (k, m) -> (n, m)."""
    av, bv = _val(a), _val(b)
    if av.ndim != 2 or bv.ndim != 2 or av.shape[1] != bv.shape[0]:
        raise ShapeMismatchError(
            f"matmul: incompatible shapes {av.shape} x {bv.shape}"
        )
    tape = _tape_of(a, b)
    out = Tensor(av @ bv, tape)
    if tape is not None:

        def bwd():
            g = _grad(out)
            if g is None:
                return
            if isinstance(a, Tensor):
                a.accum(g @ bv.T)
            if isinstance(b, Tensor):
                b.accum(av.T @ g)

        tape.record(bwd)
    return out


def bmm(a, b) -> Tensor:
    """Batched product (B, n, k) @ (B, k, m) -> (B, n, m)."""
    av, bv = _val(a), _val(b)
    if av.ndim != 3 or bv.ndim != 3 or av.shape[0] != bv.shape[0] or av.shape[2] != bv.shape[1]:
        raise ShapeMismatchError(f"bmm: incompatible shapes {av.shape} x {bv.shape}")
    tape = _tape_of(a, b)
    out = Tensor(np.matmul(av, bv), tape)
    if tape is not None:

        def bwd():
            g = _grad(out)
            if g is None:
                return
            if isinstance(a, Tensor):
                a.accum(np.matmul(g, bv.swapaxes(1, 2)))
            if isinstance(b, Tensor):
                b.accum(np.matmul(av.swapaxes(1, 2), g))

        tape.record(bwd)
    return out


def bmm_nt(a, b) -> Tensor:
    """Batched product against transposed last two axes: (B, n, d) x (B, m, d) -> (B, n, m)."""
    av, bv = _val(a), _val(b)
    if av.ndim != 3 or bv.ndim != 3 or av.shape[0] != bv.shape[0] or av.shape[2] != bv.shape[2]:
        raise ShapeMismatchError(f"bmm_nt: incompatible shapes {av.shape} x {bv.shape}")
    tape = _tape_of(a, b)
    out = Tensor(np.matmul(av, bv.swapaxes(1, 2)), tape)
    if tape is not None:

        def bwd():
            g = _grad(out)
            if g is None:
                return
            if isinstance(a, Tensor):
                a.accum(np.matmul(g, bv))
            if isinstance(b, Tensor):
                b.accum(np.matmul(g.swapaxes(1, 2), av))

        tape.record(bwd)
    return out


# ---------------------------------------------------------------------------
# elementwise and shape ops
# ---------------------------------------------------------------------------


def add(a, b) -> Tensor:
    """Elementwise sum of two same-shape operands."""
    av, bv = _val(a), _val(b)
    if av.shape != bv.shape:
        raise ShapeMismatchError(f"add: shapes differ {av.shape} vs {bv.shape}")
    tape = _tape_of(a, b)
    out = Tensor(av + bv, tape)
    if tape is not None:

        def bwd():
            g = _grad(out)
            if g is None:
                return
            if isinstance(a, Tensor):
                a.accum(g)
            if isinstance(b, Tensor):
                b.accum(g)

        tape.record(bwd)
    return out


def sub(a, b) -> Tensor:
    av, bv = _val(a), _val(b)
    if av.shape != bv.shape:
        raise ShapeMismatchError(f"sub: shapes differ {av.shape} vs {bv.shape}")
    tape = _tape_of(a, b)
    out = Tensor(av - bv, tape)
    if tape is not None:

        def bwd():
            g = _grad(out)
            if g is None:
                return
            if isinstance(a, Tensor):
                a.accum(g)
            if isinstance(b, Tensor):
                b.accum(-g)

        tape.record(bwd)
    return out


def mul(a, b) -> Tensor:
    """Elementwise product; either operand may be a constant array (e.g. a mask)."""
    av, bv = _val(a), _val(b)
    if av.shape != bv.shape and bv.ndim != 0:
        # allow column/row broadcasting only when shapes are compatible by numpy rules
        try:
            np.broadcast_shapes(av.shape, bv.shape)
        except ValueError:
            raise ShapeMismatchError(f"mul: shapes differ {av.shape} vs {bv.shape}") from None
    tape = _tape_of(a, b)
    out = Tensor(av * bv, tape)
    if tape is not None:

        def bwd():
            g = _grad(out)
            if g is None:
                return
            if isinstance(a, Tensor):
                a.accum(_reduce_to_shape(g * bv, av.shape))
            if isinstance(b, Tensor):
                b.accum(_reduce_to_shape(g * av, bv.shape))

        tape.record(bwd)
    return out


def _reduce_to_shape(g: Array, shape: tuple[int, ...]) -> Array:
    """Sum a broadcasted gradient back down to the operand's shape."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def scale(x, c: float) -> Tensor:
    """Multiply by a python scalar constant."""
    xv = _val(x)
    tape = _tape_of(x)
    out = Tensor(xv * c, tape)
    if tape is not None:

        def bwd():
            g = _grad(out)
            if g is not None and isinstance(x, Tensor):
                x.accum(g * c)

        tape.record(bwd)
    return out


def add_bias(x, b) -> Tensor:
    """Add a length-m bias vector to every row of a (..., m) operand."""
    xv, bv = _val(x), _val(b)
    if bv.ndim != 1 or xv.shape[-1] != bv.shape[0]:
        raise ShapeMismatchError(f"add_bias: {xv.shape} + bias {bv.shape}")
    tape = _tape_of(x, b)
    out = Tensor(xv + bv, tape)
    if tape is not None:

        def bwd():
            g = _grad(out)
            if g is None:
                return
            if isinstance(x, Tensor):
                x.accum(g)
            if isinstance(b, Tensor):
                b.accum(g.reshape(-1, bv.shape[0]).sum(axis=0))

        tape.record(bwd)
    return out


def reshape(x, shape: tuple[int, ...]) -> Tensor:
    xv = _val(x)
    tape = _tape_of(x)
    out = Tensor(xv.reshape(shape), tape)
    if tape is not None:

        def bwd():
            g = _grad(out)
            if g is not None and isinstance(x, Tensor):
                x.accum(g.reshape(xv.shape))

        tape.record(bwd)
    return out


def transpose(x, axes: tuple[int, ...]) -> Tensor:
    xv = _val(x)
    tape = _tape_of(x)
    out = Tensor(xv.transpose(axes), tape)
    if tape is not None:
        inverse = tuple(np.argsort(axes))

        def bwd():
            g = _grad(out)
            if g is not None and isinstance(x, Tensor):
                x.accum(g.transpose(inverse))

        tape.record(bwd)
    return out


def concat_cols(parts: Sequence) -> Tensor:
    """Concatenate rank-2 operands along columns; all must share the row count."""
    vals = [_val(p) for p in parts]
    rows = vals[0].shape[0]
    for v in vals:
        if v.ndim != 2 or v.shape[0] != rows:
            raise ShapeMismatchError(
                f"concat_cols: row counts differ {[v.shape for v in vals]}"
            )
    tape = _tape_of(*parts)
    out = Tensor(np.concatenate(vals, axis=1), tape)
    if tape is not None:
        offsets = np.cumsum([0] + [v.shape[1] for v in vals])

        def bwd():
            g = _grad(out)
            if g is None:
                return
            for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
                if isinstance(p, Tensor):
                    p.accum(g[:, lo:hi])

        tape.record(bwd)
    return out


def slice_cols(x, lo: int, hi: int) -> Tensor:
    xv = _val(x)
    if xv.ndim != 2:
        raise ShapeMismatchError(f"slice_cols: rank-2 required, got {xv.shape}")
    tape = _tape_of(x)
    out = Tensor(xv[:, lo:hi].copy(), tape)
    if tape is not None:

        def bwd():
            g = _grad(out)
            if g is not None and isinstance(x, Tensor):
                x.ensure_grad()[:, lo:hi] += g

        tape.record(bwd)
    return out


def repeat_rows(x, times: int) -> Tensor:
    """Repeat each row `times` times: (B, d) -> (B*times, d), row-major."""
    xv = _val(x)
    if xv.ndim != 2:
        raise ShapeMismatchError(f"repeat_rows: rank-2 required, got {xv.shape}")
    tape = _tape_of(x)
    out = Tensor(np.repeat(xv, times, axis=0), tape)
    if tape is not None:
        b, d = xv.shape

        def bwd():
            g = _grad(out)
            if g is not None and isinstance(x, Tensor):
                x.accum(g.reshape(b, times, d).sum(axis=1))

        tape.record(bwd)
    return out


def gather_rows(table, indices: Array) -> Tensor:
    """Row lookup: table (V, d) indexed by an integer array of any shape."""
    tv = _val(table)
    idx = np.asarray(indices)
    tape = _tape_of(table)
    out = Tensor(tv[idx], tape)
    if tape is not None:

        def bwd():
            g = _grad(out)
            if g is not None and isinstance(table, Tensor):
                np.add.at(table.ensure_grad(), idx, g)

        tape.record(bwd)
    return out


# ---------------------------------------------------------------------------
# nonlinearities and reductions
# ---------------------------------------------------------------------------


def relu(x) -> Tensor:
    xv = _val(x)
    tape = _tape_of(x)
    out = Tensor(np.maximum(xv, 0.0), tape)
    if tape is not None:

        def bwd():
            g = _grad(out)
            if g is not None and isinstance(x, Tensor):
                x.accum(g * (xv > 0.0))

        tape.record(bwd)
    return out


def tanh(x) -> Tensor:
    xv = _val(x)
    tape = _tape_of(x)
    ov = np.tanh(xv)
    out = Tensor(ov, tape)
    if tape is not None:

        def bwd():
            g = _grad(out)
            if g is not None and isinstance(x, Tensor):
                x.accum(g * (1.0 - ov * ov))

        tape.record(bwd)
    return out


def activation(x, kind: str) -> Tensor:
    """Elementwise nonlinearity, kind in {"relu", "tanh"}."""
    if kind == "relu":
        return relu(x)
    if kind == "tanh":
        return tanh(x)
    raise ValueError(f"unknown activation kind {kind!r}")


def sum_all(x) -> Tensor:
    xv = _val(x)
    tape = _tape_of(x)
    out = Tensor(xv.sum(), tape)
    if tape is not None:

        def bwd():
            g = _grad(out)
            if g is not None and isinstance(x, Tensor):
                x.accum(np.full_like(xv, float(g)))

        tape.record(bwd)
    return out


def sumsq(x) -> Tensor:
    """Sum of squared entries, as a scalar tensor."""
    xv = _val(x)
    tape = _tape_of(x)
    out = Tensor((xv * xv).sum(), tape)
    if tape is not None:

        def bwd():
            g = _grad(out)
            if g is not None and isinstance(x, Tensor):
                x.accum(2.0 * float(g) * xv)

        tape.record(bwd)
    return out


def softmax(v) -> Tensor:
    """Normalized exponential of a nonempty finite vector, max-subtracted for stability.

    Output entries are positive and sum to 1 within 1e-12; a constant shift
    of the input leaves the output unchanged.
    """
    vv = _val(v)
    if vv.ndim != 1 or vv.size == 0:
        raise ShapeMismatchError(f"softmax: nonempty vector required, got shape {vv.shape}")
    if not np.isfinite(vv).all():
        raise NonFiniteError("softmax input")
    e = np.exp(vv - vv.max())
    p = e / e.sum()
    tape = _tape_of(v)
    out = Tensor(p, tape)
    if tape is not None:

        def bwd():
            g = _grad(out)
            if g is not None and isinstance(v, Tensor):
                v.accum(p * (g - float(np.dot(p, g))))

        tape.record(bwd)
    return out


def masked_softmax_last(x, valid: Array | None = None) -> Tensor:
    """Softmax over the last axis, restricted to `valid` positions.

    `valid` is a constant boolean array broadcastable to x's shape. Invalid
    positions get probability exactly 0; rows with no valid position come out
    all-zero rather than raising, so batches may mix empty sequences in.
    """
    xv = _val(x)
    if valid is None:
        m = xv.max(axis=-1, keepdims=True)
        e = np.exp(xv - m)
        s = e.sum(axis=-1, keepdims=True)
        p = e / s
    else:
        # additive -inf mask: exp maps masked scores to exactly 0
        shifted = xv + np.where(np.asarray(valid, dtype=bool), 0.0, -np.inf)
        m = shifted.max(axis=-1, keepdims=True)
        m = np.where(np.isfinite(m), m, 0.0)  # rows with no valid position
        e = np.exp(shifted - m)
        s = e.sum(axis=-1, keepdims=True)
        p = e / np.where(s > 0.0, s, 1.0)
    tape = _tape_of(x)
    out = Tensor(p, tape)
    if tape is not None:

        def bwd():
            g = _grad(out)
            if g is not None and isinstance(x, Tensor):
                # p is exactly 0 at masked positions, so they receive no gradient
                x.accum(p * (g - (p * g).sum(axis=-1, keepdims=True)))

        tape.record(bwd)
    return out


def layer_norm_rows(x, gamma, beta, eps: float) -> Tensor:
    """Normalize each row of a (n, d) operand to zero mean, unit variance, then scale and shift.

    output = gamma * (x - mean) / sqrt(var + eps) + beta, per row, with the
    biased variance. eps > 0 guards the constant-row case.
    """
    xv, gv, bv = _val(x), _val(gamma), _val(beta)
    if xv.ndim != 2 or gv.shape != (xv.shape[1],) or bv.shape != (xv.shape[1],):
        raise ShapeMismatchError(
            f"layer_norm: x {xv.shape}, gamma {gv.shape}, beta {bv.shape}"
        )
    if eps <= 0.0:
        raise ValueError("layer_norm: eps must be positive")
    mu = xv.mean(axis=1, keepdims=True)
    var = xv.var(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (xv - mu) * inv
    tape = _tape_of(x, gamma, beta)
    out = Tensor(xhat * gv + bv, tape)
    if tape is not None:

        def bwd():
            g = _grad(out)
            if g is None:
                return
            if isinstance(gamma, Tensor):
                gamma.accum((g * xhat).sum(axis=0))
            if isinstance(beta, Tensor):
                beta.accum(g.sum(axis=0))
            if isinstance(x, Tensor):
                gx_hat = g * gv
                mean_g = gx_hat.mean(axis=1, keepdims=True)
                mean_gx = (gx_hat * xhat).mean(axis=1, keepdims=True)
                x.accum(inv * (gx_hat - mean_g - xhat * mean_gx))

        tape.record(bwd)
    return out


def layer_norm(x, gamma, beta, eps: float = 1e-6) -> Tensor:
    """Vector form of layer_norm_rows for a single length-d input."""
    xv = _val(x)
    if xv.ndim != 1:
        raise ShapeMismatchError(f"layer_norm: vector required, got shape {xv.shape}")
    out2 = layer_norm_rows(
        reshape(x, (1, xv.shape[0])) if isinstance(x, Tensor) else xv.reshape(1, -1),
        gamma,
        beta,
        eps,
    )
    return reshape(out2, (xv.shape[0],))


def attn_pool(alpha, x) -> Tensor:
    """Weighted sum of per-slot vectors: (B, J) weights x (B, J, d) -> (B, d)."""
    av, xv = _val(alpha), _val(x)
    if av.ndim != 2 or xv.ndim != 3 or av.shape != xv.shape[:2]:
        raise ShapeMismatchError(f"attn_pool: weights {av.shape} vs slots {xv.shape}")
    tape = _tape_of(alpha, x)
    out = Tensor(np.einsum("bj,bjd->bd", av, xv), tape)
    if tape is not None:

        def bwd():
            g = _grad(out)
            if g is None:
                return
            if isinstance(alpha, Tensor):
                alpha.accum(np.einsum("bd,bjd->bj", g, xv))
            if isinstance(x, Tensor):
                x.accum(av[:, :, None] * g[:, None, :])

        tape.record(bwd)
    return out


def field_scores(v, w, b) -> Tensor:
    """Per-slot affine scores: (B, J, c) with per-slot maps (J, c) and biases (J,) -> (B, J)."""
    vv, wv, bv = _val(v), _val(w), _val(b)
    if vv.ndim != 3 or wv.shape != vv.shape[1:] or bv.shape != (vv.shape[1],):
        raise ShapeMismatchError(
            f"field_scores: v {vv.shape}, w {wv.shape}, b {bv.shape}"
        )
    tape = _tape_of(v, w, b)
    out = Tensor(np.einsum("bjc,jc->bj", vv, wv) + bv, tape)
    if tape is not None:

        def bwd():
            g = _grad(out)
            if g is None:
                return
            if isinstance(v, Tensor):
                v.accum(g[:, :, None] * wv[None, :, :])
            if isinstance(w, Tensor):
                w.accum(np.einsum("bj,bjc->jc", g, vv))
            if isinstance(b, Tensor):
                b.accum(g.sum(axis=0))

        tape.record(bwd)
    return out


def dropout(x, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: zero entries with probability `rate`, scale the rest by 1/(1-rate)."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    xv = _val(x)
    if rate == 0.0:
        return x if isinstance(x, Tensor) else Tensor(xv)
    keep = (rng.random(xv.shape) >= rate) / (1.0 - rate)
    tape = _tape_of(x)
    out = Tensor(xv * keep, tape)
    if tape is not None:

        def bwd():
            g = _grad(out)
            if g is not None and isinstance(x, Tensor):
                x.accum(g * keep)

        tape.record(bwd)
    return out


def cross_entropy_logits(logits, labels: Array) -> tuple[Tensor, Array]:
    """Mean cross-entropy of integer labels under softmax(logits), from logits.

    Computed via log-sum-exp, never through clamped probabilities. Returns
    (scalar loss tensor, softmax probabilities as a plain array).
    """
    zv = _val(logits)
    y = np.asarray(labels)
    if zv.ndim != 2 or y.shape != (zv.shape[0],):
        raise ShapeMismatchError(f"cross_entropy: logits {zv.shape}, labels {y.shape}")
    m = zv.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(zv - m).sum(axis=1))
    rows = np.arange(zv.shape[0])
    per_instance = lse - zv[rows, y]
    probs = np.exp(zv - lse[:, None])
    tape = _tape_of(logits)
    out = Tensor(per_instance.mean(), tape)
    if tape is not None:

        def bwd():
            g = _grad(out)
            if g is not None and isinstance(logits, Tensor):
                gl = probs.copy()
                gl[rows, y] -= 1.0
                logits.accum(gl * (float(g) / zv.shape[0]))

        tape.record(bwd)
    return out, probs


# ---------------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------------


@dataclass
class GradCheckReport:
    """Worst-case relative disagreement between reverse-mode and central differences."""

    max_rel_err: float
    worst_path: str
    per_tensor: dict[str, float] = field(default_factory=dict)
    n_evaluations: int = 0
    tolerance: float | None = None

    @property
    def passed(self) -> bool:
        if self.tolerance is None:
            return True
        return self.max_rel_err < self.tolerance


def grad_check(
    f: Callable[[dict[str, Array], bool], tuple[float, dict[str, Array] | None]],
    params: dict[str, Array],
    *,
    step: float = 1e-5,
    n_samples: int = 64,
    tolerance: float | None = None,
    seed: int = 0,
) -> GradCheckReport:
    """Compare reverse-mode gradients of a scalar function against central differences.

    `f(params, need_grad)` returns (value, grads-by-path) when need_grad is
    true and (value, None) otherwise; it must be deterministic. Each tensor is
    probed at up to `n_samples` coordinates: the coordinate of largest
    analytic gradient plus seeded uniform draws. The relative error uses
    denominator max(|g|, |g_fd|, 1e-8) per coordinate.
    """
    if not 1e-6 <= step <= 1e-3:
        raise ValueError(f"grad_check step must lie in [1e-6, 1e-3], got {step}")
    base_value, grads = f(params, True)
    if not math.isfinite(base_value):
        raise NonFiniteError("grad_check objective", f"value {base_value!r}")
    if grads is None:
        raise ValueError("grad_check: f must return gradients when need_grad is true")

    rng = np.random.default_rng(seed)
    work = {k: v.copy() for k, v in params.items()}
    report = GradCheckReport(max_rel_err=0.0, worst_path="", tolerance=tolerance)
    n_evals = 0
    for path in sorted(params):
        g = grads.get(path)
        if g is None:
            g = np.zeros_like(params[path])
        flat_g = g.reshape(-1)
        n = flat_g.size
        take = min(n_samples, n)
        coords = set(rng.choice(n, size=take, replace=False).tolist())
        coords.add(int(np.argmax(np.abs(flat_g))))
        tensor = work[path]
        flat = tensor.reshape(-1)
        worst = 0.0
        for c in sorted(coords):
            orig = flat[c]
            flat[c] = orig + step
            up, _ = f(work, False)
            flat[c] = orig - step
            down, _ = f(work, False)
            flat[c] = orig
            n_evals += 2
            if not (math.isfinite(up) and math.isfinite(down)):
                raise NonFiniteError("grad_check objective", f"perturbing {path}[{c}]")
            fd = (up - down) / (2.0 * step)
            denom = max(abs(flat_g[c]), abs(fd), 1e-8)
            worst = max(worst, abs(flat_g[c] - fd) / denom)
        report.per_tensor[path] = worst
        if worst >= report.max_rel_err:
            report.max_rel_err = worst
            report.worst_path = path
    report.n_evaluations = n_evals
    return report


def truncated_normal(rng: np.random.Generator, shape: tuple[int, ...], std: float) -> Array:
    """Normal(0, std) draws resampled until within two standard deviations."""
    out = rng.normal(0.0, std, size=shape)
    bound = 2.0 * std
    bad = np.abs(out) > bound
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > bound
    return out


def check_finite(value: Array | Tensor, where: str) -> None:
    """Raise NonFiniteError naming `where` if any entry is NaN or Inf."""
    v = value.data if isinstance(value, Tensor) else value
    if not np.isfinite(v).all():
        raise NonFiniteError(where)
