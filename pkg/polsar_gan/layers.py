"""
Complex-Valued Layers
=====================
Full connection (CFC), convolution (CConv), transposed convolution
(CDeConv), activation (CA) and whitening batch normalization (CBN).

Every linear layer follows the same operation mask: a complex op
f(x, W) is evaluated as four real ops on the planes,

    OUT_r = f(IN_r, W_r) - f(IN_i, W_i)
    OUT_i = f(IN_r, W_i) + f(IN_i, W_r)

and its backward pass treats the real and imaginary planes as independent
real variables.

Functional forms (``cfc_forward``, ``cconv2d_forward``, ...) are pure. Layer
objects wrap them, cache what backward needs and expose ``params`` /
``grads`` dicts of real arrays for the optimizer and the checkpoint.
"""

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .ctensor import ComplexTensor, concat_real_imag, split_real_imag
from .errors import (
    BatchTooSmallError,
    DegenerateOutputError,
    MissingCacheError,
    ShapeMismatchError,
)

CBN_EPSILON = 1e-5
CBN_MEMORY  = 8


# ==============================================================================
# PARAMETER TYPES
# ==============================================================================

@dataclass(frozen=True)
class ComplexLinearParams:
    W:    ComplexTensor    # [out, in]
    bias: ComplexTensor    # [out]

    def __post_init__(self):
        if self.W.ndim != 2 or self.bias.shape != (self.W.shape[0],):
            raise ShapeMismatchError(
                f"linear weight {self.W.shape} and bias {self.bias.shape} inconsistent"
            )


@dataclass(frozen=True)
class ComplexConvParams:
    kernels: ComplexTensor    # conv: [outC, inC, kH, kW]; deconv: [inC, outC, kH, kW]
    bias:    ComplexTensor
    stride:  int = 1
    padding: int = 0

    def __post_init__(self):
        if self.kernels.ndim != 4:
            raise ShapeMismatchError(f"kernels must be rank 4, got {self.kernels.shape}")
        if min(self.kernels.shape[2:]) < 1 or self.stride < 1 or self.padding < 0:
            raise ShapeMismatchError(
                f"invalid kernel {self.kernels.shape[2:]} / stride {self.stride} "
                f"/ padding {self.padding}"
            )


@dataclass
class LayerGradients:
    params: Dict[str, np.ndarray]
    input:  Union[ComplexTensor, np.ndarray]


def glorot_plane(rng: np.random.Generator, shape, fan_in: int, fan_out: int,
                 dtype=np.float64, complex_valued: bool = True) -> np.ndarray:
    """Uniform Glorot draw; scaled by 1/sqrt(2) per plane for complex weights."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    w = rng.uniform(-limit, limit, size=shape)
    if complex_valued:
        w = w / np.sqrt(2.0)
    return w.astype(dtype)


# ==============================================================================
# REAL-PLANE PRIMITIVES
# ==============================================================================

def conv_output_size(size: int, kernel: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - kernel) // stride + 1


def deconv_output_size(size: int, kernel: int, stride: int, pad: int) -> int:
    return (size - 1) * stride + kernel - 2 * pad


def _windows(x: np.ndarray, k_h: int, k_w: int, stride: int, pad: int) -> np.ndarray:
    """[B, C, H, W] -> strided view [B, C, Ho, Wo, kH, kW] over the zero-padded input."""
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = sliding_window_view(x, (k_h, k_w), axis=(2, 3))
    return win[:, :, ::stride, ::stride]


def _corr2d(x: np.ndarray, w: np.ndarray, stride: int, pad: int) -> np.ndarray:
    """Cross-correlation, no kernel flip. x [B, C, H, W], w [O, C, kH, kW]."""
    win = _windows(x, w.shape[2], w.shape[3], stride, pad)
    out = np.tensordot(win, w, axes=([1, 4, 5], [1, 2, 3]))    # [B, Ho, Wo, O]
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def _corr2d_grad_weight(x: np.ndarray, g: np.ndarray, k_h: int, k_w: int,
                        stride: int, pad: int) -> np.ndarray:
    """d<corr(x, w), g>/dw, shape [O, C, kH, kW]."""
    win = _windows(x, k_h, k_w, stride, pad)[:, :, :g.shape[2], :g.shape[3]]
    return np.tensordot(g, win, axes=([0, 2, 3], [0, 2, 3]))


def _corr2d_grad_input(g: np.ndarray, w: np.ndarray, in_shape: Tuple[int, ...],
                       stride: int, pad: int) -> np.ndarray:
    """Adjoint of _corr2d in x: scatter g through w back onto an input of in_shape."""
    B, C, H, W = in_shape
    k_h, k_w   = w.shape[2], w.shape[3]
    Ho, Wo     = g.shape[2], g.shape[3]
    cols = np.tensordot(g, w, axes=([1], [0]))                  # [B, Ho, Wo, C, kH, kW]
    xp   = np.zeros((B, C, H + 2 * pad, W + 2 * pad), dtype=g.dtype)
    for u in range(k_h):
        for v in range(k_w):
            xp[:, :, u:u + stride * Ho:stride, v:v + stride * Wo:stride] += \
                cols[:, :, :, :, u, v].transpose(0, 3, 1, 2)
    return xp[:, :, pad:pad + H, pad:pad + W]


def _mask_forward(f: Callable, xr, xi, wr, wi):
    return f(xr, wr) - f(xi, wi), f(xr, wi) + f(xi, wr)


def _mask_backward(grad_in: Callable, grad_w: Callable, xr, xi, wr, wi, gr, gi):
    """
    Backward of the operation mask for any op bilinear in (x, w).

    grad_in(g, w) is the adjoint of f in x, grad_w(x, g) the adjoint in w.
    """
    dxr =  grad_in(gr, wr) + grad_in(gi, wi)
    dxi = -grad_in(gr, wi) + grad_in(gi, wr)
    dwr =  grad_w(xr, gr) + grad_w(xi, gi)
    dwi = -grad_w(xi, gr) + grad_w(xr, gi)
    return dxr, dxi, dwr, dwi


def _per_channel(v: np.ndarray, ndim: int) -> np.ndarray:
    return v.reshape((1, -1) + (1,) * (ndim - 2))


# ==============================================================================
# FUNCTIONAL FORWARD OPS
# ==============================================================================

def cfc_forward(x: ComplexTensor, p: ComplexLinearParams) -> ComplexTensor:
    """Complex full connection, x [B, in] -> [B, out]."""
    if x.ndim != 2 or x.shape[1] != p.W.shape[1]:
        raise ShapeMismatchError(
            f"cfc input {x.shape} does not match weight {p.W.shape}"
        )
    out_r, out_i = _mask_forward(lambda a, w: a @ w.T, x.re, x.im, p.W.re, p.W.im)
    return ComplexTensor(out_r + p.bias.re, out_i + p.bias.im)


def _check_conv_geometry(x: ComplexTensor, p: ComplexConvParams, in_axis: int,
                         transposed: bool) -> Tuple[int, int]:
    if x.ndim != 4 or x.shape[1] != p.kernels.shape[in_axis]:
        raise ShapeMismatchError(
            f"input {x.shape} does not match kernels {p.kernels.shape}"
        )
    k_h, k_w = p.kernels.shape[2:]
    H, W     = x.shape[2:]
    size_fn  = deconv_output_size if transposed else conv_output_size
    Ho, Wo   = size_fn(H, k_h, p.stride, p.padding), size_fn(W, k_w, p.stride, p.padding)
    if Ho <= 0 or Wo <= 0:
        raise DegenerateOutputError(
            f"input {H}x{W} with kernel {k_h}x{k_w}, stride {p.stride}, "
            f"padding {p.padding} gives output {Ho}x{Wo}"
        )
    return Ho, Wo


def cconv2d_forward(x: ComplexTensor, p: ComplexConvParams) -> ComplexTensor:
    """
    Complex 2-D convolution (cross-correlation, zero padding).

    Parameters
    ----------
    x : ComplexTensor [B, inC, H, W]
    p : ComplexConvParams with kernels [outC, inC, kH, kW]

    Returns
    -------
    ComplexTensor [B, outC, floor((H + 2 pad - kH) / stride) + 1, ...]
    """
    _check_conv_geometry(x, p, in_axis=1, transposed=False)
    f = lambda a, w: _corr2d(a, w, p.stride, p.padding)
    out_r, out_i = _mask_forward(f, x.re, x.im, p.kernels.re, p.kernels.im)
    return ComplexTensor(out_r + _per_channel(p.bias.re, 4),
                         out_i + _per_channel(p.bias.im, 4))


def cdeconv2d_forward(x: ComplexTensor, p: ComplexConvParams) -> ComplexTensor:
    """
    Complex transposed convolution, the adjoint of cconv2d in its input.

    Kernels are [inC, outC, kH, kW]; output spatial size is
    (H - 1) * stride + kH - 2 * pad.
    """
    Ho, Wo = _check_conv_geometry(x, p, in_axis=0, transposed=True)
    out_shape = (x.shape[0], p.kernels.shape[1], Ho, Wo)
    f = lambda a, w: _corr2d_grad_input(a, w, out_shape, p.stride, p.padding)
    out_r, out_i = _mask_forward(f, x.re, x.im, p.kernels.re, p.kernels.im)
    return ComplexTensor(out_r + _per_channel(p.bias.re, 4),
                         out_i + _per_channel(p.bias.im, 4))


def ca_forward(x: ComplexTensor) -> ComplexTensor:
    """CReLU: ReLU on each plane independently."""
    return ComplexTensor(np.maximum(x.re, 0), np.maximum(x.im, 0))


# ==============================================================================
# WHITENING BATCH NORMALIZATION
# ==============================================================================

def inv_sqrt_2x2(V: np.ndarray, epsilon: float = CBN_EPSILON) -> np.ndarray:
    """
    Closed-form inverse square root of symmetric 2x2 matrices.

    Parameters
    ----------
    V       : np.ndarray [..., 2, 2]  symmetric, V_rr, V_ii >= 0
    epsilon : determinant floor, S = sqrt(max(det V, epsilon**2))

    Returns
    -------
    np.ndarray [..., 2, 2]
    """
    V   = np.asarray(V, dtype=np.float64)
    vrr = V[..., 0, 0]
    vii = V[..., 1, 1]
    vri = V[..., 0, 1]
    s   = np.sqrt(np.maximum(vrr * vii - vri * vri, epsilon ** 2))
    t   = np.sqrt(vrr + vii + 2.0 * s)
    st  = s * t
    out = np.empty(V.shape, dtype=np.float64)
    out[..., 0, 0] = (vii + s) / st
    out[..., 1, 1] = (vrr + s) / st
    out[..., 0, 1] = -vri / st
    out[..., 1, 0] = -vri / st
    return out


@dataclass
class CbnState:
    """
    Running state of one CBN layer.

    ``ring`` holds the last ``m`` per-batch statistics, each a [5, C] array of
    (mean_re, mean_im, V_rr, V_ri, V_ii). The averages used for whitening
    are the plain arithmetic mean of whatever the ring holds.
    """

    channels: int
    m:        int = CBN_MEMORY
    epsilon:  float = CBN_EPSILON
    dtype:    type = np.float64
    gamma:    np.ndarray = None
    beta_re:  np.ndarray = None
    beta_im:  np.ndarray = None
    ring:     deque = field(default=None, repr=False)

    def __post_init__(self):
        if self.channels < 1 or self.m < 1 or self.epsilon <= 0:
            raise ValueError(
                f"CbnState needs channels >= 1, m >= 1, epsilon > 0; got "
                f"{self.channels}, {self.m}, {self.epsilon}"
            )
        if self.gamma is None:
            self.gamma = np.ones(self.channels, dtype=self.dtype)
        if self.beta_re is None:
            self.beta_re = np.zeros(self.channels, dtype=self.dtype)
        if self.beta_im is None:
            self.beta_im = np.zeros(self.channels, dtype=self.dtype)
        if self.ring is None:
            self.ring = deque(maxlen=self.m)

    def push(self, stats: np.ndarray) -> None:
        self.ring.append(np.asarray(stats, dtype=np.float64).copy())

    def averages(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Returns
        -------
        mean : [C, 2]     averaged (re, im) expectation
        cov  : [C, 2, 2]  averaged covariance, before epsilon regularization

        An empty ring gives mean 0 and covariance I.
        """
        if not self.ring:
            mean = np.zeros((self.channels, 2))
            cov  = np.tile(np.eye(2), (self.channels, 1, 1))
            return mean, cov
        avg  = np.mean(np.stack(list(self.ring)), axis=0)
        mean = avg[0:2].T
        cov  = np.empty((self.channels, 2, 2))
        cov[:, 0, 0] = avg[2]
        cov[:, 0, 1] = avg[3]
        cov[:, 1, 0] = avg[3]
        cov[:, 1, 1] = avg[4]
        return mean, cov

    def whitening_matrix(self) -> Tuple[np.ndarray, np.ndarray]:
        mean, cov = self.averages()
        if self.ring:
            cov = cov.copy()
            cov[:, 0, 0] += self.epsilon
            cov[:, 1, 1] += self.epsilon
        return mean, inv_sqrt_2x2(cov, self.epsilon)

    def buffers(self) -> np.ndarray:
        if not self.ring:
            return np.zeros((0, 5, self.channels))
        return np.stack(list(self.ring))

    def load_buffers(self, ring: np.ndarray) -> None:
        ring = np.asarray(ring, dtype=np.float64)
        if ring.ndim != 3 or ring.shape[1:] != (5, self.channels) or len(ring) > self.m:
            raise ShapeMismatchError(
                f"ring buffer {ring.shape} does not fit m={self.m}, channels={self.channels}"
            )
        self.ring.clear()
        for row in ring:
            self.ring.append(row.copy())


def _batch_statistics(x: ComplexTensor) -> np.ndarray:
    axes = (0,) + tuple(range(2, x.ndim))
    mr   = x.re.mean(axis=axes, dtype=np.float64)
    mi   = x.im.mean(axis=axes, dtype=np.float64)
    cr   = x.re - _per_channel(mr, x.ndim)
    ci   = x.im - _per_channel(mi, x.ndim)
    vrr  = (cr * cr).mean(axis=axes, dtype=np.float64)
    vri  = (cr * ci).mean(axis=axes, dtype=np.float64)
    vii  = (ci * ci).mean(axis=axes, dtype=np.float64)
    return np.stack([mr, mi, vrr, vri, vii])


def _cbn_apply(x: ComplexTensor, state: CbnState, training: bool,
               stats_rows: Optional[int] = None):
    if x.ndim < 2 or x.shape[1] != state.channels:
        raise ShapeMismatchError(
            f"CBN with {state.channels} channels got input {x.shape}"
        )
    if training:
        sample = x if stats_rows is None else x[:stats_rows]
        if sample.shape[0] < 2:
            raise BatchTooSmallError(
                f"CBN training needs a batch of at least 2, got {sample.shape[0]}"
            )
        state.push(_batch_statistics(sample))

    mean, M = state.whitening_matrix()
    nd      = x.ndim
    dt      = x.dtype
    cr  = x.re - _per_channel(mean[:, 0], nd).astype(dt)
    ci  = x.im - _per_channel(mean[:, 1], nd).astype(dt)
    m00 = _per_channel(M[:, 0, 0], nd).astype(dt)
    m01 = _per_channel(M[:, 0, 1], nd).astype(dt)
    m11 = _per_channel(M[:, 1, 1], nd).astype(dt)
    xhat  = ComplexTensor(m00 * cr + m01 * ci, m01 * cr + m11 * ci)
    gamma = _per_channel(state.gamma, nd)
    out   = ComplexTensor(gamma * xhat.re + _per_channel(state.beta_re, nd),
                          gamma * xhat.im + _per_channel(state.beta_im, nd))
    return out, xhat, M


def cbn_forward(x: ComplexTensor, state: CbnState, training: bool,
                stats_rows: Optional[int] = None) -> ComplexTensor:
    """
    Complex whitening batch normalization.

    Training mode pushes this batch's per-channel mean and 2x2 (re, im)
    covariance into the ring, averages the ring, whitens
    x_hat = V^(-1/2) (x - mean) and returns gamma * x_hat + beta.
    Inference mode whitens with the stored averages and leaves the ring alone.

    With ``stats_rows`` set, only the first ``stats_rows`` samples feed the
    pushed statistics; every sample is whitened with the resulting averages.
    """
    return _cbn_apply(x, state, training, stats_rows)[0]


# ==============================================================================
# LAYER OBJECTS
# ==============================================================================

class Layer:
    """Base layer: ``params`` / ``grads`` dicts and a forward cache."""

    def __init__(self):
        self.params: Dict[str, np.ndarray] = {}
        self.grads:  Dict[str, np.ndarray] = {}
        self._cache = None

    def forward(self, x, training: bool = True):
        raise NotImplementedError

    def backward(self, grad) -> LayerGradients:
        raise NotImplementedError

    def _require_cache(self):
        if self._cache is None:
            raise MissingCacheError(
                f"{type(self).__name__}.backward called without a cached forward pass"
            )
        return self._cache

    def _finish(self, grads: Dict[str, np.ndarray], dx) -> LayerGradients:
        self.grads = grads
        return LayerGradients(params=grads, input=dx)

    def zero_grad(self) -> None:
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}


class ComplexLinear(Layer):
    """CFC."""

    def __init__(self, in_features: int, out_features: int,
                 rng: np.random.Generator, dtype=np.float64):
        super().__init__()
        shape = (out_features, in_features)
        self.params = {
            "W_re": glorot_plane(rng, shape, in_features, out_features, dtype),
            "W_im": glorot_plane(rng, shape, in_features, out_features, dtype),
            "b_re": np.zeros(out_features, dtype=dtype),
            "b_im": np.zeros(out_features, dtype=dtype),
        }

    def as_params(self) -> ComplexLinearParams:
        p = self.params
        return ComplexLinearParams(ComplexTensor(p["W_re"], p["W_im"]),
                                   ComplexTensor(p["b_re"], p["b_im"]))

    def forward(self, x: ComplexTensor, training: bool = True) -> ComplexTensor:
        out = cfc_forward(x, self.as_params())
        self._cache = x
        return out

    def backward(self, grad: ComplexTensor) -> LayerGradients:
        x = self._require_cache()
        p = self.params
        dxr, dxi, dwr, dwi = _mask_backward(
            lambda g, w: g @ w,
            lambda a, g: g.T @ a,
            x.re, x.im, p["W_re"], p["W_im"], grad.re, grad.im,
        )
        grads = {"W_re": dwr, "W_im": dwi,
                 "b_re": grad.re.sum(axis=0), "b_im": grad.im.sum(axis=0)}
        return self._finish(grads, ComplexTensor(dxr, dxi))


class _ComplexConvBase(Layer):
    transposed = False

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 stride: int, padding: int, rng: np.random.Generator,
                 dtype=np.float64):
        super().__init__()
        k       = kernel_size
        fan_in  = in_channels * k * k
        fan_out = out_channels * k * k
        shape   = ((in_channels, out_channels, k, k) if self.transposed
                   else (out_channels, in_channels, k, k))
        self.stride  = stride
        self.padding = padding
        self.params  = {
            "W_re": glorot_plane(rng, shape, fan_in, fan_out, dtype),
            "W_im": glorot_plane(rng, shape, fan_in, fan_out, dtype),
            "b_re": np.zeros(out_channels, dtype=dtype),
            "b_im": np.zeros(out_channels, dtype=dtype),
        }

    def as_params(self) -> ComplexConvParams:
        p = self.params
        return ComplexConvParams(ComplexTensor(p["W_re"], p["W_im"]),
                                 ComplexTensor(p["b_re"], p["b_im"]),
                                 stride=self.stride, padding=self.padding)

    def _bias_grads(self, grad: ComplexTensor) -> Dict[str, np.ndarray]:
        return {"b_re": grad.re.sum(axis=(0, 2, 3)),
                "b_im": grad.im.sum(axis=(0, 2, 3))}


class ComplexConv2d(_ComplexConvBase):
    """CConv; kernels [outC, inC, k, k]."""

    def forward(self, x: ComplexTensor, training: bool = True) -> ComplexTensor:
        out = cconv2d_forward(x, self.as_params())
        self._cache = x
        return out

    def backward(self, grad: ComplexTensor) -> LayerGradients:
        x = self._require_cache()
        p = self.params
        s, pad   = self.stride, self.padding
        k_h, k_w = p["W_re"].shape[2:]
        dxr, dxi, dwr, dwi = _mask_backward(
            lambda g, w: _corr2d_grad_input(g, w, x.shape, s, pad),
            lambda a, g: _corr2d_grad_weight(a, g, k_h, k_w, s, pad),
            x.re, x.im, p["W_re"], p["W_im"], grad.re, grad.im,
        )
        grads = {"W_re": dwr, "W_im": dwi, **self._bias_grads(grad)}
        return self._finish(grads, ComplexTensor(dxr, dxi))


class ComplexConvTranspose2d(_ComplexConvBase):
    """CDeConv; kernels [inC, outC, k, k]."""

    transposed = True

    def forward(self, x: ComplexTensor, training: bool = True) -> ComplexTensor:
        out = cdeconv2d_forward(x, self.as_params())
        self._cache = x
        return out

    def backward(self, grad: ComplexTensor) -> LayerGradients:
        x = self._require_cache()
        p = self.params
        s, pad   = self.stride, self.padding
        k_h, k_w = p["W_re"].shape[2:]
        # forward is corr2d's input-adjoint, so its adjoints are corr2d itself
        # and corr2d's weight gradient with the roles of input and output swapped
        dxr, dxi, dwr, dwi = _mask_backward(
            lambda g, w: _corr2d(g, w, s, pad),
            lambda a, g: _corr2d_grad_weight(g, a, k_h, k_w, s, pad),
            x.re, x.im, p["W_re"], p["W_im"], grad.re, grad.im,
        )
        grads = {"W_re": dwr, "W_im": dwi, **self._bias_grads(grad)}
        return self._finish(grads, ComplexTensor(dxr, dxi))


class ComplexReLU(Layer):
    """CA."""

    def forward(self, x: ComplexTensor, training: bool = True) -> ComplexTensor:
        self._cache = (x.re > 0, x.im > 0)
        return ca_forward(x)

    def backward(self, grad: ComplexTensor) -> LayerGradients:
        mask_r, mask_i = self._require_cache()
        return self._finish({}, ComplexTensor(grad.re * mask_r, grad.im * mask_i))


class ComplexBatchNorm(Layer):
    """
    CBN layer over [B, C] or [B, C, H, W] inputs.

    Backward holds the averaged statistics constant: the input gradient is
    gamma * V^(-1/2) applied to the upstream gradient.
    """

    def __init__(self, channels: int, m: int = CBN_MEMORY,
                 epsilon: float = CBN_EPSILON, dtype=np.float64):
        super().__init__()
        self.state  = CbnState(channels, m=m, epsilon=epsilon, dtype=dtype)
        self.params = {"gamma":   self.state.gamma,
                       "beta_re": self.state.beta_re,
                       "beta_im": self.state.beta_im}

    def forward(self, x: ComplexTensor, training: bool = True,
                stats_rows: Optional[int] = None) -> ComplexTensor:
        out, xhat, M = _cbn_apply(x, self.state, training, stats_rows)
        self._cache = (xhat, M)
        return out

    def backward(self, grad: ComplexTensor) -> LayerGradients:
        xhat, M = self._require_cache()
        nd    = grad.ndim
        axes  = (0,) + tuple(range(2, nd))
        gamma = _per_channel(self.state.gamma, nd)
        m00   = _per_channel(M[:, 0, 0], nd)
        m01   = _per_channel(M[:, 0, 1], nd)
        m11   = _per_channel(M[:, 1, 1], nd)
        grads = {
            "gamma":   (grad.re * xhat.re + grad.im * xhat.im).sum(axis=axes),
            "beta_re": grad.re.sum(axis=axes),
            "beta_im": grad.im.sum(axis=axes),
        }
        dxr = gamma * (m00 * grad.re + m01 * grad.im)
        dxi = gamma * (m01 * grad.re + m11 * grad.im)
        dt  = grad.dtype
        return self._finish({k: v.astype(dt) for k, v in grads.items()},
                            ComplexTensor(dxr.astype(dt), dxi.astype(dt)))


class Reshape(Layer):
    """Reshape every sample to ``shape`` (batch axis kept)."""

    def __init__(self, shape: Tuple[int, ...]):
        super().__init__()
        self.shape = tuple(shape)

    def forward(self, x: ComplexTensor, training: bool = True) -> ComplexTensor:
        self._cache = x.shape
        return x.reshape((x.shape[0],) + self.shape)

    def backward(self, grad: ComplexTensor) -> LayerGradients:
        in_shape = self._require_cache()
        return self._finish({}, grad.reshape(in_shape))


class ConcatRealImag(Layer):
    """Complex [B, F] -> real [B, 2F]; the boundary between complex and real layers."""

    def forward(self, x: ComplexTensor, training: bool = True) -> np.ndarray:
        self._cache = True
        return concat_real_imag(x)

    def backward(self, grad: np.ndarray) -> LayerGradients:
        self._require_cache()
        return self._finish({}, split_real_imag(grad))


class Linear(Layer):
    """Real full connection for the logit head."""

    def __init__(self, in_features: int, out_features: int,
                 rng: np.random.Generator, dtype=np.float64):
        super().__init__()
        self.params = {
            "W": glorot_plane(rng, (out_features, in_features), in_features,
                              out_features, dtype, complex_valued=False),
            "b": np.zeros(out_features, dtype=dtype),
        }

    def forward(self, x: np.ndarray, training: bool = True) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.params["W"].shape[1]:
            raise ShapeMismatchError(
                f"linear input {x.shape} does not match weight {self.params['W'].shape}"
            )
        self._cache = x
        return x @ self.params["W"].T + self.params["b"]

    def backward(self, grad: np.ndarray) -> LayerGradients:
        x = self._require_cache()
        grads = {"W": grad.T @ x, "b": grad.sum(axis=0)}
        return self._finish(grads, grad @ self.params["W"])


def build_conv_params(kernels: ComplexTensor, bias: Optional[ComplexTensor] = None,
                      stride: int = 1, padding: int = 0,
                      transposed: bool = False) -> ComplexConvParams:
    """Convenience constructor with a zero bias of the right width."""
    out_c = kernels.shape[1] if transposed else kernels.shape[0]
    if bias is None:
        bias = ComplexTensor.zeros((out_c,), dtype=kernels.dtype)
    return ComplexConvParams(kernels, bias, stride=stride, padding=padding)
