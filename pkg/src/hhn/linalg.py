"""Dense float64 matrix primitives for the network layers.

Everything here operates on 2-D ``numpy.ndarray`` of dtype float64.  Public
operations guarantee finite outputs; shape violations raise
:class:`DimensionError` naming both operand shapes.  These primitives carry
the forward side of the model; the matching hand-derived backward rules live
next to each layer in :mod:`hhn.model` and :mod:`hhn.training`, and
:func:`finite_diff_grad_check` is the harness that validates them against
central differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ConfigError, DimensionError, NumericError

ACTIVATION_KINDS = ("leaky_relu", "sigmoid", "elu", "identity")


def as_matrix(values) -> np.ndarray:
    """Coerce nested sequences (or an array) to a finite 2-D float64 matrix."""
    m = np.asarray(values, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got ndim={m.ndim}")
    check_finite(m, "matrix literal")
    return m


def check_finite(m: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(m)):
        raise NumericError(f"{what} contains non-finite entries")


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with explicit shape checking."""
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul needs 2-D operands, got ndim {a.ndim} and {b.ndim}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    out = a @ b
    check_finite(out, "matmul result")
    return out


def sigmoid(m: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function, elementwise."""
    m = np.asarray(m, dtype=np.float64)
    out = np.empty_like(m)
    pos = m >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-m[pos]))
    em = np.exp(m[~pos])
    out[~pos] = em / (1.0 + em)
    return out


def apply_activation(m: np.ndarray, kind: str, slope: float = 0.2) -> np.ndarray:
    """Apply an elementwise nonlinearity; ``identity`` returns the input unchanged."""
    if kind == "identity":
        return m
    if kind == "leaky_relu":
        if not 0.0 < slope < 1.0:
            raise ConfigError(f"leaky_relu slope must lie in (0, 1), got {slope}")
        return np.where(m > 0.0, m, slope * m)
    if kind == "elu":
        return np.where(m > 0.0, m, np.expm1(np.minimum(m, 0.0)))
    if kind == "sigmoid":
        return sigmoid(m)
    raise ConfigError(f"unknown activation kind {kind!r}; expected one of {ACTIVATION_KINDS}")


def activation_grad(pre: np.ndarray, kind: str, slope: float = 0.2) -> np.ndarray:
    """Derivative of :func:`apply_activation` evaluated at the preactivation."""
    if kind == "identity":
        return np.ones_like(pre)
    if kind == "leaky_relu":
        return np.where(pre > 0.0, 1.0, slope)
    if kind == "elu":
        return np.where(pre > 0.0, 1.0, np.exp(np.minimum(pre, 0.0)))
    if kind == "sigmoid":
        s = sigmoid(pre)
        return s * (1.0 - s)
    raise ConfigError(f"unknown activation kind {kind!r}; expected one of {ACTIVATION_KINDS}")


def rowwise_softmax(m: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Softmax along each row, shifted by the row max for stability.

    With ``mask`` given, masked entries are forced to zero and each row is
    normalized over its unmasked entries only.  A fully masked row is an
    error because it has no well-defined distribution.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionError(f"rowwise_softmax needs a 2-D matrix, got ndim={m.ndim}")
    if mask is None:
        shifted = m - m.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != m.shape:
        raise DimensionError(f"mask shape {mask.shape} does not match matrix shape {m.shape}")
    empty = ~mask.any(axis=1)
    if empty.any():
        row = int(np.flatnonzero(empty)[0])
        raise NumericError(f"rowwise_softmax: row {row} is fully masked")
    screened = np.where(mask, m, -np.inf)
    shifted = screened - screened.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def concat_cols(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Concatenate two matrices along the feature (column) axis, a first."""
    if a.shape[0] != b.shape[0]:
        raise DimensionError(f"concat_cols row mismatch: {a.shape} vs {b.shape}")
    return np.hstack([a, b])


@dataclass
class ParamTensor:
    """A trainable matrix together with its gradient and Adam moment buffers."""

    name: str
    value: np.ndarray
    grad: np.ndarray | None = None
    moment1: np.ndarray | None = None
    moment2: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.value = np.asarray(self.value, dtype=np.float64)
        if self.value.ndim != 2:
            raise DimensionError(f"parameter {self.name!r} must be 2-D, got ndim={self.value.ndim}")
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        if self.moment1 is None:
            self.moment1 = np.zeros_like(self.value)
        if self.moment2 is None:
            self.moment2 = np.zeros_like(self.value)
        for label, buf in (("grad", self.grad), ("moment1", self.moment1), ("moment2", self.moment2)):
            if buf.shape != self.value.shape:
                raise DimensionError(
                    f"parameter {self.name!r}: {label} shape {buf.shape} != value shape {self.value.shape}"
                )

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape  # type: ignore[return-value]

    def zero_grad(self) -> None:
        self.grad[...] = 0.0


@dataclass
class GradCheckReport:
    """Outcome of comparing analytic gradients against central differences."""

    max_rel_err: float
    worst_param: str
    worst_entry: tuple[int, int]
    worst_analytic: float
    worst_numeric: float
    n_entries: int
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= self.tol

    def __str__(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (
            f"grad check {status}: max rel err {self.max_rel_err:.3e} (tol {self.tol:.1e}) "
            f"at {self.worst_param}[{self.worst_entry[0]},{self.worst_entry[1]}] "
            f"analytic={self.worst_analytic:.6e} numeric={self.worst_numeric:.6e} "
            f"over {self.n_entries} entries"
        )


def finite_diff_grad_check(
    f: Callable[[], float],
    params: Iterable[ParamTensor] | Sequence[ParamTensor],
    eps: float = 1e-5,
    tol: float = 1e-4,
) -> GradCheckReport:
    """Compare analytic gradients stored in ``params`` against central differences.

    ``f`` must be a deterministic scalar objective that reads the current
    parameter values and does not mutate gradients.  The analytic gradients
    are expected to be populated in each parameter's ``grad`` buffer before
    calling.  Every entry of every parameter is perturbed by ``+/-eps`` and the
    central difference ``(f(x+eps) - f(x-eps)) / (2 eps)`` is compared against
    the stored analytic value.  Entries where both values are below 1e-8 in
    magnitude count as matching.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ConfigError(f"eps must lie in [1e-7, 1e-3], got {eps}")
    params = list(params)
    analytic = {p.name: p.grad.copy() for p in params}

    base = float(f())
    if not np.isfinite(base):
        raise NumericError(f"objective evaluated to a non-finite value: {base}")

    worst = GradCheckReport(0.0, "<none>", (0, 0), 0.0, 0.0, 0, tol)
    n_entries = 0
    for p in params:
        grad = analytic[p.name]
        for i, j in np.ndindex(p.value.shape):
            orig = p.value[i, j]
            p.value[i, j] = orig + eps
            f_plus = float(f())
            p.value[i, j] = orig - eps
            f_minus = float(f())
            p.value[i, j] = orig
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise NumericError(
                    f"objective non-finite while perturbing {p.name}[{i},{j}]"
                )
            numeric = (f_plus - f_minus) / (2.0 * eps)
            a = grad[i, j]
            scale = max(abs(a), abs(numeric))
            rel = 0.0 if scale < 1e-8 else abs(a - numeric) / max(scale, 1e-6)
            n_entries += 1
            if rel > worst.max_rel_err:
                worst = GradCheckReport(rel, p.name, (i, j), a, numeric, 0, tol)
    worst.n_entries = n_entries
    return worst
