"""
Complex Tensors
===============
Complex scalars and a planar complex tensor (separate real and imaginary
arrays sharing one shape). Every complex layer is written against these
planes: a complex linear op is four real ops, one subtraction, one addition.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ShapeMismatchError


# ==============================================================================
# SCALARS
# ==============================================================================

@dataclass(frozen=True)
class ComplexScalar:
    re: float
    im: float = 0.0

    def modulus(self) -> float:
        return float(np.hypot(self.re, self.im))


def cmul(z1: ComplexScalar, z2: ComplexScalar) -> ComplexScalar:
    """(a+ib)(c+id) = (ac - bd) + i(ad + bc)."""
    a, b = z1.re, z1.im
    c, d = z2.re, z2.im
    return ComplexScalar(a * c - b * d, a * d + b * c)


def cadd(z1: ComplexScalar, z2: ComplexScalar) -> ComplexScalar:
    return ComplexScalar(z1.re + z2.re, z1.im + z2.im)


def csub(z1: ComplexScalar, z2: ComplexScalar) -> ComplexScalar:
    return ComplexScalar(z1.re - z2.re, z1.im - z2.im)


# ==============================================================================
# TENSOR
# ==============================================================================

@dataclass(frozen=True)
class ComplexTensor:
    """
    Dense complex tensor stored as two real planes.

    Parameters
    ----------
    re, im : np.ndarray  real-valued arrays of identical shape

    Operations never write into ``re`` / ``im``; they return new tensors.
    """

    re: np.ndarray
    im: np.ndarray

    def __post_init__(self):
        re = np.asarray(self.re)
        im = np.asarray(self.im)
        if re.shape != im.shape:
            raise ShapeMismatchError(
                f"real plane {re.shape} and imaginary plane {im.shape} differ"
            )
        object.__setattr__(self, "re", re)
        object.__setattr__(self, "im", im)

    # --- Construction ---
    @classmethod
    def zeros(cls, shape, dtype=np.float64) -> "ComplexTensor":
        return cls(np.zeros(shape, dtype=dtype), np.zeros(shape, dtype=dtype))

    @classmethod
    def ones(cls, shape, dtype=np.float64) -> "ComplexTensor":
        """Tensor filled with 1+0i."""
        return cls(np.ones(shape, dtype=dtype), np.zeros(shape, dtype=dtype))

    @classmethod
    def from_complex(cls, z: np.ndarray, dtype=np.float64) -> "ComplexTensor":
        z = np.asarray(z)
        return cls(np.real(z).astype(dtype), np.imag(z).astype(dtype))

    def to_complex(self) -> np.ndarray:
        return self.re + 1j * self.im

    # --- Shape ---
    @property
    def shape(self) -> tuple:
        return self.re.shape

    @property
    def dtype(self):
        return self.re.dtype

    @property
    def ndim(self) -> int:
        return self.re.ndim

    def __len__(self) -> int:
        return self.shape[0]

    def reshape(self, *shape) -> "ComplexTensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        try:
            return ComplexTensor(self.re.reshape(shape), self.im.reshape(shape))
        except ValueError as e:
            raise ShapeMismatchError(
                f"cannot reshape {self.shape} ({self.re.size} elements) to {shape}"
            ) from e

    def astype(self, dtype) -> "ComplexTensor":
        return ComplexTensor(self.re.astype(dtype), self.im.astype(dtype))

    def __getitem__(self, idx) -> "ComplexTensor":
        return ComplexTensor(self.re[idx], self.im[idx])

    # --- Arithmetic ---
    def negate(self) -> "ComplexTensor":
        return ComplexTensor(-self.re, -self.im)

    def conj(self) -> "ComplexTensor":
        return ComplexTensor(self.re.copy(), -self.im)

    def __add__(self, other):
        return tensor_ewise("add", self, other)

    def __sub__(self, other):
        return tensor_ewise("sub", self, other)

    def __mul__(self, other):
        if isinstance(other, ComplexScalar):
            return scale(self, other)
        return tensor_ewise("mul", self, other)

    def __neg__(self):
        return self.negate()


# ==============================================================================
# ELEMENTWISE AND CONTRACTION OPS
# ==============================================================================

def _require_same_shape(a: ComplexTensor, b: ComplexTensor, what: str) -> None:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"{what}: shapes {a.shape} and {b.shape} differ")


def tensor_ewise(op: str, a: ComplexTensor, b: ComplexTensor) -> ComplexTensor:
    """
    Lift the scalar rules of cadd / csub / cmul elementwise.

    Parameters
    ----------
    op   : {'add', 'sub', 'mul'}
    a, b : ComplexTensor of identical shape
    """
    _require_same_shape(a, b, f"tensor_ewise({op})")
    if op == "add":
        return ComplexTensor(a.re + b.re, a.im + b.im)
    if op == "sub":
        return ComplexTensor(a.re - b.re, a.im - b.im)
    if op == "mul":
        return ComplexTensor(a.re * b.re - a.im * b.im,
                             a.re * b.im + a.im * b.re)
    raise ValueError(f"unknown elementwise op {op!r}; expected add, sub or mul")


def scale(x: ComplexTensor, z: ComplexScalar) -> ComplexTensor:
    """Multiply every element by one complex scalar."""
    return ComplexTensor(x.re * z.re - x.im * z.im, x.re * z.im + x.im * z.re)


def complex_matmul(a: ComplexTensor, b: ComplexTensor) -> ComplexTensor:
    """
    Rank-2 complex product through the four-real-ops mask:
    OUT_r = A_r B_r - A_i B_i,  OUT_i = A_r B_i + A_i B_r.
    """
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeMismatchError(
            f"complex_matmul expects rank-2 operands, got {a.shape} and {b.shape}"
        )
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatchError(
            f"complex_matmul inner dimensions disagree: {a.shape} @ {b.shape}"
        )
    return ComplexTensor(a.re @ b.re - a.im @ b.im, a.re @ b.im + a.im @ b.re)


def concat_real_imag(x: ComplexTensor) -> np.ndarray:
    """Real array whose last axis is [re | im]; a scalar-shaped input gives [re, im]."""
    if x.ndim == 0:
        return np.array([x.re, x.im])
    return np.concatenate([x.re, x.im], axis=-1)


def split_real_imag(y: np.ndarray) -> ComplexTensor:
    """Inverse of concat_real_imag."""
    if y.shape[-1] % 2:
        raise ShapeMismatchError(
            f"last axis of {y.shape} is odd; cannot split into re/im halves"
        )
    half = y.shape[-1] // 2
    return ComplexTensor(y[..., :half], y[..., half:])


def concatenate(tensors: Sequence[ComplexTensor], axis: int = 0) -> ComplexTensor:
    return ComplexTensor(np.concatenate([t.re for t in tensors], axis=axis),
                         np.concatenate([t.im for t in tensors], axis=axis))
