"""
Semi-Supervised Complex-Valued GAN
==================================
Generator and K+1-logit discriminator assembled from the complex layers,
the semi-supervised loss (labeled + unlabeled + generated terms), the
non-saturating generator loss, Adam, and the alternating training loop.

Logit convention: columns 0..K-1 are the real classes 1..K, column K is the
"fake" class. p_fake is the softmax mass on column K, computed as
sigmoid(l_K - logsumexp(l_0..l_{K-1})).
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy.special import expit, log_softmax, logsumexp, softmax

from .ctensor import ComplexTensor, concatenate
from .data import N_CHANNELS, NormalizationStats, PatchSet, Splits, denormalize, fit_normalization, normalize
from .errors import (
    ConfigError,
    EmptyLabeledSetError,
    LabelRangeError,
    ModelMismatchError,
    ShapeMismatchError,
)
from .layers import (
    ComplexBatchNorm,
    ComplexConv2d,
    ComplexConvTranspose2d,
    ComplexLinear,
    ComplexReLU,
    ConcatRealImag,
    Layer,
    Linear,
    Reshape,
)
from . import metrics

logger = logging.getLogger(__name__)

PROB_EPS = 1e-7
MODES    = ("semisup", "supervised")
DTYPES   = {"float32": np.float32, "float64": np.float64}


# ==============================================================================
# CONFIGURATION
# ==============================================================================

@dataclass(frozen=True)
class TrainingConfig:
    """
    Hyperparameters of one training run.

    Defaults: patch 32, lr 0.0005, Adam betas (0.5, 0.999), batch 64,
    100 epochs, CBN memory m = 8, latent width 100 per plane.
    mode='supervised' trains the discriminator on labeled data only and
    builds no generator.
    """

    num_classes:  int
    patch_size:   int = 32
    lr:           float = 5e-4
    beta1:        float = 0.5
    beta2:        float = 0.999
    batch_size:   int = 64
    epochs:       int = 100
    m:            int = 8
    latent_dim:   int = 100
    seed:         int = 0
    mode:         str = "semisup"
    g_channels:   Tuple[int, ...] = (64, 32, 16)
    d_channels:   Tuple[int, ...] = (16, 32, 64)
    kernel_size:  int = 4
    patch_stride: Optional[int] = None
    dtype:        str = "float64"
    cbn_epsilon:  float = 1e-5
    adam_epsilon: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "g_channels", tuple(int(c) for c in self.g_channels))
        object.__setattr__(self, "d_channels", tuple(int(c) for c in self.d_channels))

        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.dtype not in DTYPES:
            raise ConfigError(f"dtype must be one of {tuple(DTYPES)}, got {self.dtype!r}")
        if self.num_classes < 1:
            raise ConfigError(f"num_classes must be >= 1, got {self.num_classes}")
        for name in ("patch_size", "epochs", "m", "latent_dim", "kernel_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("lr", "cbn_epsilon", "adam_epsilon"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.batch_size < 2:
            raise ConfigError(f"batch_size must be >= 2 for CBN statistics, got {self.batch_size}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError(f"Adam betas must lie in [0, 1), got {self.beta1}, {self.beta2}")
        if self.patch_stride is not None and self.patch_stride < 1:
            raise ConfigError(f"patch_stride must be positive, got {self.patch_stride}")
        if self.kernel_size % 2 or self.kernel_size < 2:
            raise ConfigError(f"kernel_size must be even and >= 2, got {self.kernel_size}")
        if not self.d_channels or min(self.d_channels) < 1:
            raise ConfigError(f"d_channels must be non-empty and positive, got {self.d_channels}")
        if self.g_channels and min(self.g_channels) < 1:
            raise ConfigError(f"g_channels must be positive, got {self.g_channels}")
        for what, depth in (("generator", len(self.g_channels)),
                            ("discriminator", len(self.d_channels))):
            if self.patch_size % (2 ** depth):
                raise ConfigError(
                    f"patch_size {self.patch_size} is not divisible by 2**{depth} "
                    f"({what} has {depth} stride-2 stages)"
                )

    @property
    def semi_supervised(self) -> bool:
        return self.mode == "semisup"

    @property
    def np_dtype(self):
        return DTYPES[self.dtype]

    @property
    def stride(self) -> int:
        return self.patch_stride or self.patch_size

    @property
    def padding(self) -> int:
        return (self.kernel_size - 2) // 2

    def to_dict(self) -> dict:
        return asdict(self)


# ==============================================================================
# NETWORKS
# ==============================================================================

class Network:
    """Ordered stack of named layers with a joint forward / backward."""

    def __init__(self, layers: List[Tuple[str, Layer]]):
        self.layers = layers

    def forward(self, x, training: bool = True, stats_rows: Optional[int] = None):
        """
        ``stats_rows`` limits the CBN statistics pushed in training mode to
        the leading rows of the batch.
        """
        for _, layer in self.layers:
            if stats_rows is not None and isinstance(layer, ComplexBatchNorm):
                x = layer.forward(x, training=training, stats_rows=stats_rows)
            else:
                x = layer.forward(x, training=training)
        return x

    def backward(self, grad):
        for _, layer in reversed(self.layers):
            grad = layer.backward(grad).input
        return grad

    def named_parameters(self) -> Dict[str, np.ndarray]:
        return {f"{name}.{k}": v for name, layer in self.layers for k, v in layer.params.items()}

    def named_gradients(self) -> Dict[str, np.ndarray]:
        return {f"{name}.{k}": v for name, layer in self.layers for k, v in layer.grads.items()}

    def named_buffers(self) -> Dict[str, np.ndarray]:
        return {f"{name}.ring": layer.state.buffers()
                for name, layer in self.layers if isinstance(layer, ComplexBatchNorm)}

    def load_buffers(self, buffers: Dict[str, np.ndarray]) -> None:
        for name, layer in self.layers:
            if isinstance(layer, ComplexBatchNorm):
                layer.state.load_buffers(buffers[f"{name}.ring"])

    def zero_grad(self) -> None:
        for _, layer in self.layers:
            layer.zero_grad()


class Generator(Network):
    """
    CFC -> reshape -> {CBN -> CA -> CDeConv} per entry of g_channels.

    Each CDeConv doubles the spatial size; the last one maps to the six
    coherency channels with a linear output.
    """

    def __init__(self, config: TrainingConfig, rng: np.random.Generator):
        dt    = config.np_dtype
        chans = config.g_channels
        base  = config.patch_size // 2 ** len(chans)
        self.latent_dim = config.latent_dim

        if not chans:
            layers = [("fc", ComplexLinear(config.latent_dim, N_CHANNELS * base * base, rng, dt)),
                      ("reshape", Reshape((N_CHANNELS, base, base)))]
            super().__init__(layers)
            return

        layers = [("fc", ComplexLinear(config.latent_dim, chans[0] * base * base, rng, dt)),
                  ("reshape", Reshape((chans[0], base, base)))]
        outs = chans[1:] + (N_CHANNELS,)
        for i, (c_in, c_out) in enumerate(zip(chans, outs)):
            layers += [
                (f"bn{i}", ComplexBatchNorm(c_in, m=config.m, epsilon=config.cbn_epsilon, dtype=dt)),
                (f"act{i}", ComplexReLU()),
                (f"deconv{i}", ComplexConvTranspose2d(c_in, c_out, config.kernel_size, 2,
                                                      config.padding, rng, dt)),
            ]
        super().__init__(layers)


class Discriminator(Network):
    """
    CConv (CA) -> {CConv -> CBN -> CA} ... -> flatten -> [re | im] -> real FC to K+1.
    """

    def __init__(self, config: TrainingConfig, rng: np.random.Generator):
        dt    = config.np_dtype
        chans = config.d_channels
        side  = config.patch_size // 2 ** len(chans)
        self.num_classes = config.num_classes

        layers = []
        ins = (N_CHANNELS,) + chans[:-1]
        for i, (c_in, c_out) in enumerate(zip(ins, chans)):
            layers.append((f"conv{i}", ComplexConv2d(c_in, c_out, config.kernel_size, 2,
                                                     config.padding, rng, dt)))
            if i > 0:
                layers.append((f"bn{i}", ComplexBatchNorm(c_out, m=config.m,
                                                          epsilon=config.cbn_epsilon, dtype=dt)))
            layers.append((f"act{i}", ComplexReLU()))
        flat = chans[-1] * side * side
        layers += [
            ("flatten", Reshape((flat,))),
            ("concat", ConcatRealImag()),
            ("head", Linear(2 * flat, config.num_classes + 1, rng, dt)),
        ]
        super().__init__(layers)


def sample_latent(rng: np.random.Generator, n: int, latent_dim: int,
                  dtype=np.float64) -> ComplexTensor:
    """Independent standard normal real and imaginary planes."""
    re = rng.standard_normal((n, latent_dim)).astype(dtype)
    im = rng.standard_normal((n, latent_dim)).astype(dtype)
    return ComplexTensor(re, im)


def generator_forward(z_re: np.ndarray, z_im: np.ndarray, net: Generator,
                      training: bool = False) -> ComplexTensor:
    """
    Map latent planes [B, latent] (or a single [latent] vector) to patches
    [B, 6, P, P]. Inference mode leaves the CBN rings untouched, so repeated
    calls are bit-identical.
    """
    z_re, z_im = np.asarray(z_re), np.asarray(z_im)
    if z_re.ndim == 1:
        z_re, z_im = z_re[None, :], z_im[None, :]
    if z_re.shape != z_im.shape or z_re.shape[-1] != net.latent_dim:
        raise ShapeMismatchError(
            f"latent planes {z_re.shape} / {z_im.shape} do not match width {net.latent_dim}"
        )
    return net.forward(ComplexTensor(z_re, z_im), training=training)


# ==============================================================================
# LOSSES
# ==============================================================================

@dataclass
class LossBreakdown:
    l_labeled:   float = 0.0
    l_unlabeled: float = 0.0
    l_generated: float = 0.0
    l_generator: float = 0.0
    l_total:     float = field(init=False)

    def __post_init__(self):
        self.l_total = self.l_labeled + self.l_unlabeled + self.l_generated

    def as_row(self) -> dict:
        return {"l_labeled": self.l_labeled, "l_unlabeled": self.l_unlabeled,
                "l_generated": self.l_generated, "l_total": self.l_total,
                "l_generator": self.l_generator}


def real_logit_logsumexp(class_logits: np.ndarray) -> Union[float, np.ndarray]:
    """Stable log-sum-exp over the last axis: log sum exp(p - p_max) + p_max."""
    return logsumexp(np.asarray(class_logits, dtype=np.float64), axis=-1)


def p_fake(logits: np.ndarray) -> Union[float, np.ndarray]:
    """P(fake | x) = sigmoid(l_K - logsumexp(l_0..l_{K-1})), over the last axis."""
    logits = np.asarray(logits, dtype=np.float64)
    return expit(logits[..., -1] - real_logit_logsumexp(logits[..., :-1]))


def _as_logits(logits: Optional[np.ndarray], width: int) -> np.ndarray:
    if logits is None:
        return np.zeros((0, width))
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2 or logits.shape[1] != width:
        raise ShapeMismatchError(f"expected logits of width {width}, got {logits.shape}")
    return logits


def _fake_term(logits: np.ndarray, fake_target: bool) -> Tuple[float, np.ndarray]:
    """
    Mean of -log(p_fake) (fake_target) or -log(1 - p_fake), both clamped,
    with its gradient over the logits.
    """
    n = len(logits)
    if n == 0:
        return 0.0, np.zeros_like(logits)
    k   = logits.shape[1] - 1
    d   = logits[:, k] - logsumexp(logits[:, :k], axis=1)
    p   = expit(d)
    pc  = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    live = (p > PROB_EPS) & (p < 1.0 - PROB_EPS)
    if fake_target:
        loss = -np.log(pc)
        coef = -(1.0 - p) * live / n
    else:
        loss = -np.log1p(-pc)
        coef = p * live / n

    grad = np.empty_like(logits)
    grad[:, :k] = -coef[:, None] * softmax(logits[:, :k], axis=1)
    grad[:, k]  = coef
    return float(loss.mean()), grad


def discriminator_loss_and_grads(
    labeled_logits:   np.ndarray,
    labels:           np.ndarray,
    unlabeled_logits: Optional[np.ndarray],
    fake_logits:      Optional[np.ndarray],
) -> Tuple[LossBreakdown, Tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """discriminator_loss plus the gradient of l_total w.r.t. each logit batch."""
    labeled_logits = np.asarray(labeled_logits, dtype=np.float64)
    if labeled_logits.ndim != 2:
        raise ShapeMismatchError(f"labeled logits must be [n, K+1], got {labeled_logits.shape}")
    width = labeled_logits.shape[1]
    k     = width - 1
    unl   = _as_logits(unlabeled_logits, width)
    fake  = _as_logits(fake_logits, width)

    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if len(labels) != len(labeled_logits):
        raise ShapeMismatchError(f"{len(labels)} labels for {len(labeled_logits)} logit rows")
    if labels.size and (labels.min() < 1 or labels.max() > k):
        bad = labels[(labels < 1) | (labels > k)]
        raise LabelRangeError(f"labels must lie in 1..{k}, got {sorted(set(bad.tolist()))}")

    n_lab = len(labels)
    if n_lab:
        logp   = log_softmax(labeled_logits, axis=1)
        rows   = np.arange(n_lab)
        l_lab  = float(-logp[rows, labels - 1].mean())
        g_lab  = np.exp(logp)
        g_lab[rows, labels - 1] -= 1.0
        g_lab /= n_lab
    else:
        l_lab, g_lab = 0.0, np.zeros_like(labeled_logits)

    l_unl, g_unl   = _fake_term(unl, fake_target=False)
    l_fake, g_fake = _fake_term(fake, fake_target=True)
    return LossBreakdown(l_lab, l_unl, l_fake), (g_lab, g_unl, g_fake)


def discriminator_loss(
    labeled_logits:   np.ndarray,
    labels:           np.ndarray,
    unlabeled_logits: Optional[np.ndarray] = None,
    fake_logits:      Optional[np.ndarray] = None,
) -> LossBreakdown:
    """
    Semi-supervised discriminator loss.

    l_labeled   = mean -log softmax(logits)[label]          over the labeled batch
    l_unlabeled = mean -log(1 - p_fake)                     over the unlabeled batch
    l_generated = mean -log p_fake                          over the fake batch
    l_total     = l_labeled + l_unlabeled + l_generated

    Labels are 1..K. Empty (or None) batches contribute 0. Probabilities are
    clamped into [1e-7, 1 - 1e-7] before the logarithm.
    """
    return discriminator_loss_and_grads(labeled_logits, labels, unlabeled_logits, fake_logits)[0]


def generator_loss_and_grad(fake_logits: np.ndarray) -> Tuple[float, np.ndarray]:
    logits = np.asarray(fake_logits, dtype=np.float64)
    if logits.ndim != 2 or logits.shape[1] < 2:
        raise ShapeMismatchError(f"fake logits must be [n, K+1], got {logits.shape}")
    return _fake_term(logits, fake_target=False)


def generator_loss(fake_logits: np.ndarray) -> float:
    """Non-saturating generator loss: mean -log(1 - p_fake), p_fake clamped."""
    return generator_loss_and_grad(fake_logits)[0]


# ==============================================================================
# ADAM
# ==============================================================================

@dataclass
class AdamState:
    lr:      float = 5e-4
    beta1:   float = 0.5
    beta2:   float = 0.999
    epsilon: float = 1e-8
    m:       Dict[str, np.ndarray] = field(default_factory=dict)
    v:       Dict[str, np.ndarray] = field(default_factory=dict)
    step:    int = 0

    @classmethod
    def from_config(cls, config: TrainingConfig) -> "AdamState":
        return cls(lr=config.lr, beta1=config.beta1, beta2=config.beta2,
                   epsilon=config.adam_epsilon)


def adam_step(params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray],
              state: AdamState) -> None:
    """
    One bias-corrected Adam update, written into ``params`` in place.

    update = -lr * m_hat / (sqrt(v_hat) + eps)
    """
    for name, p in params.items():
        if name not in grads:
            raise ShapeMismatchError(f"no gradient for parameter {name!r}")
        if grads[name].shape != p.shape:
            raise ShapeMismatchError(
                f"gradient {grads[name].shape} does not match parameter {name!r} {p.shape}"
            )

    state.step += 1
    t   = state.step
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        m = state.m.setdefault(name, np.zeros(p.shape))
        v = state.v.setdefault(name, np.zeros(p.shape))
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        update = state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
        p -= update.astype(p.dtype)


# ==============================================================================
# MODEL
# ==============================================================================

@dataclass
class PolsarGan:
    """Trained networks, optimizer states and the normalization they were fit with."""

    config:        TrainingConfig
    discriminator: Discriminator
    norm:          NormalizationStats
    adam_d:        AdamState
    generator:     Optional[Generator] = None
    adam_g:        Optional[AdamState] = None

    @classmethod
    def build(cls, config: TrainingConfig, norm: NormalizationStats,
              rng: np.random.Generator) -> "PolsarGan":
        generator = Generator(config, rng) if config.semi_supervised else None
        return cls(
            config        = config,
            discriminator = Discriminator(config, rng),
            norm          = norm,
            adam_d        = AdamState.from_config(config),
            generator     = generator,
            adam_g        = AdamState.from_config(config) if generator else None,
        )

    def prepare(self, patches: Union[PatchSet, ComplexTensor]) -> ComplexTensor:
        data = patches.data if isinstance(patches, PatchSet) else patches
        if data.shape[1:] != (N_CHANNELS, self.config.patch_size, self.config.patch_size):
            raise ModelMismatchError(
                f"patches {data.shape[1:]} do not match the model's "
                f"{N_CHANNELS}x{self.config.patch_size}x{self.config.patch_size} input"
            )
        return normalize(data, self.norm).astype(self.config.np_dtype)

    def predict(self, patches: Union[PatchSet, ComplexTensor], batch_size: int = 256) -> np.ndarray:
        return predict(self.discriminator, self.prepare(patches), batch_size)

    def generate(self, n: int, rng: np.random.Generator) -> ComplexTensor:
        """n generated patches in the original (denormalized) coherency scale."""
        if self.generator is None:
            raise ModelMismatchError("model was trained in supervised mode and has no generator")
        z = sample_latent(rng, n, self.config.latent_dim, self.config.np_dtype)
        return denormalize(generator_forward(z.re, z.im, self.generator), self.norm)


def predict(discriminator: Discriminator, data: ComplexTensor,
            batch_size: int = 256) -> np.ndarray:
    """Argmax over the K class logits (fake logit excluded); labels 1..K."""
    out = []
    for start in range(0, len(data), batch_size):
        logits = discriminator.forward(data[start:start + batch_size], training=False)
        out.append(np.argmax(logits[:, :-1], axis=1) + 1)
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


@dataclass
class Evaluation:
    confusion: metrics.ConfusionMatrix
    oa:        float
    aa:        float
    kappa:     float
    per_class: pd.DataFrame


def evaluate_model(model: PolsarGan, patches: PatchSet, batch_size: int = 256) -> Evaluation:
    """Classify every labeled patch and score it (OA, AA, Kappa, per-class accuracy)."""
    keep = patches.labels > 0
    if keep.any() and patches.labels.max() > model.config.num_classes:
        raise ModelMismatchError(
            f"labels reach class {patches.labels.max()} but the model has "
            f"K = {model.config.num_classes}"
        )
    subset = patches.subset(np.flatnonzero(keep))
    preds  = model.predict(subset, batch_size) if len(subset) else np.zeros(0, dtype=np.int64)
    cm     = metrics.confusion(preds, subset.labels, model.config.num_classes)
    summary = metrics.classification_summary(cm)
    return Evaluation(cm, summary["oa"], summary["aa"], summary["kappa"],
                      metrics.per_class_accuracy(cm))


# ==============================================================================
# TRAINING
# ==============================================================================

def _check_labeled(labeled: PatchSet, num_classes: int) -> None:
    if len(labeled) == 0:
        raise EmptyLabeledSetError("the labeled training set is empty")
    labels = labeled.labels
    if labels.min() < 1 or labels.max() > num_classes:
        raise LabelRangeError(
            f"labeled patches carry classes {labels.min()}..{labels.max()}, "
            f"expected 1..{num_classes}"
        )
    missing = sorted(set(range(1, num_classes + 1)) - set(np.unique(labels).tolist()))
    if missing:
        raise EmptyLabeledSetError(f"classes {missing} have no labeled training patch")


def _draw(rng: np.random.Generator, n: int, size: int) -> np.ndarray:
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    return rng.choice(n, size=min(size, n), replace=False)


def _train_step(model: PolsarGan, lab: PatchSet, unl: PatchSet,
                rng: np.random.Generator) -> LossBreakdown:
    cfg = model.config
    D, G = model.discriminator, model.generator
    B   = cfg.batch_size

    idx_l = _draw(rng, len(lab), B)
    x_lab = lab.data[idx_l]
    y_lab = lab.labels[idx_l]

    # discriminator: one pass over labeled | unlabeled | fake, CBN statistics from the real rows
    if G is not None:
        idx_u = _draw(rng, len(unl), B)
        fake  = G.forward(sample_latent(rng, B, cfg.latent_dim, cfg.np_dtype), training=True)
        x     = concatenate([x_lab, unl.data[idx_u], fake])
        n_l, n_u = len(idx_l), len(idx_u)
    else:
        x, n_l, n_u = x_lab, len(idx_l), 0

    logits = D.forward(x, training=True, stats_rows=n_l + n_u)
    d_loss, (g_lab, g_unl, g_fake) = discriminator_loss_and_grads(
        logits[:n_l], y_lab, logits[n_l:n_l + n_u], logits[n_l + n_u:]
    )
    D.backward(np.concatenate([g_lab, g_unl, g_fake]).astype(cfg.np_dtype))
    adam_step(D.named_parameters(), D.named_gradients(), model.adam_d)

    if G is None:
        return d_loss

    # generator: discriminator in inference mode, only G is updated
    fake = G.forward(sample_latent(rng, B, cfg.latent_dim, cfg.np_dtype), training=True)
    g_loss, g_logits = generator_loss_and_grad(D.forward(fake, training=False))
    G.backward(D.backward(g_logits.astype(cfg.np_dtype)))
    adam_step(G.named_parameters(), G.named_gradients(), model.adam_g)

    d_loss.l_generator = g_loss
    return d_loss


def train(
    config:   TrainingConfig,
    splits:   Splits,
    rng:      Optional[np.random.Generator] = None,
    callback: Optional[Callable[[int, LossBreakdown], None]] = None,
) -> Tuple[PolsarGan, pd.DataFrame]:
    """
    Alternate discriminator and generator updates over the training pools.

    Parameters
    ----------
    config   : TrainingConfig
    splits   : labeled / unlabeled / test PatchSets (raw coherency scale)
    rng      : drives initialization, mini-batches and latents; defaults to
               default_rng(config.seed)
    callback : called as callback(epoch, LossBreakdown) after each epoch

    Returns
    -------
    (PolsarGan, pd.DataFrame)  model and per-epoch mean losses
    """
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    _check_labeled(splits.labeled, config.num_classes)
    if splits.labeled.patch_size != config.patch_size:
        raise ConfigError(
            f"patches are {splits.labeled.patch_size}x{splits.labeled.patch_size}, "
            f"config.patch_size is {config.patch_size}"
        )

    if config.semi_supervised:
        pools = [splits.labeled, splits.unlabeled]
    else:
        logger.warning("[train] supervised mode: generator disabled, unlabeled pool ignored")
        pools = [splits.labeled]
    norm  = fit_normalization(*pools)
    model = PolsarGan.build(config, norm, rng)

    lab = normalize(splits.labeled, norm).astype(config.np_dtype)
    unl = normalize(splits.unlabeled, norm).astype(config.np_dtype) if config.semi_supervised \
        else splits.unlabeled.subset([])
    n_pool = max(len(lab), len(unl))
    steps  = max(1, math.ceil(n_pool / config.batch_size))
    logger.info(
        f"[train] mode={config.mode} K={config.num_classes} labeled={len(lab)} "
        f"unlabeled={len(unl)} steps/epoch={steps}"
    )

    rows = []
    for epoch in range(1, config.epochs + 1):
        step_losses = [_train_step(model, lab, unl, rng) for _ in range(steps)]
        mean = LossBreakdown(
            l_labeled   = float(np.mean([s.l_labeled for s in step_losses])),
            l_unlabeled = float(np.mean([s.l_unlabeled for s in step_losses])),
            l_generated = float(np.mean([s.l_generated for s in step_losses])),
            l_generator = float(np.mean([s.l_generator for s in step_losses])),
        )
        rows.append({"epoch": epoch, **mean.as_row()})
        logger.info(
            f"[train] epoch {epoch}/{config.epochs} D={mean.l_total:.4f} "
            f"(lab {mean.l_labeled:.4f}, unl {mean.l_unlabeled:.4f}, "
            f"gen {mean.l_generated:.4f}) G={mean.l_generator:.4f}"
        )
        if callback is not None:
            callback(epoch, mean)

    history = pd.DataFrame(rows, columns=["epoch", "l_labeled", "l_unlabeled",
                                          "l_generated", "l_total", "l_generator"])
    return model, history
