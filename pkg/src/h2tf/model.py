"""Hierarchical nonlinear tensor factorization.

A tensor ``x`` of shape ``(h, w, b)`` is represented as the composition of
two stages:

* a hierarchical matrix factorization (HMF) of every frontal slice,
  written face-wise as ``z = W_l . act(W_{l-1} . ... W_3 . act(W_2 . W_1))``
  where ``.`` is the face-wise product and the factor tensors ``W_d`` have
  shape ``(r_d, r_{d-1}, b)`` with ``r_0 = w`` and ``r_l = h``;
* a hierarchical nonlinear transform (HNT) mixing bands,
  ``x = act(... act(z x3 H_1) x3 ... x3 H_{m-1}) x3 H_m`` with learnable
  ``b x b`` matrices ``H_p``.

Nesting convention (frozen by unit tests): the activation follows every
face-wise product except the outermost one, and every mode-3 product except
the last one.  In particular ``l = 2`` gives the activation-free
``z = W_2 . W_1`` and ``m = 0`` leaves ``z`` untransformed, so the number
of activations is ``(l - 2) + max(m - 1, 0)``.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .tensor import facewise_product, inverse_dft_matrix, mode3_product

_SUPPORTED_ACTIVATIONS = ("leaky_relu",)


def activation(x, slope=0.1):
    """Leaky rectifier, elementwise: ``x`` for ``x >= 0``, ``slope * x`` below."""
    x = np.asarray(x)
    return np.where(x >= 0, x, slope * x)


def activation_derivative(x, slope=0.1):
    """Derivative of the leaky rectifier; defined as 1 at ``x = 0``."""
    x = np.asarray(x)
    return np.where(x >= 0, 1.0, slope)


def default_ranks(shape, hmf_layers):
    """Geometric-doubling interior ranks ``(w, c, 2c, 4c, ..., h)``.

    The doubling base is ``max(1, min(h, w) // 12)``, which keeps the
    widest interior factor below the spatial extent of the data.
    """
    h, w, _ = shape
    base = max(1, min(h, w) // 12)
    interior = [base * 2 ** j for j in range(hmf_layers - 1)]
    return (w, *interior, h)


@dataclass
class ModelConfig:
    """Structural description of the factorization.

    ``ranks`` lists ``r_0 .. r_l`` and must start at ``w`` and end at ``h``;
    when omitted it defaults to :func:`default_ranks`.
    """

    shape: tuple
    hmf_layers: int = 5
    hnt_layers: int = 2
    ranks: tuple = None
    activation_kind: str = "leaky_relu"
    activation_slope: float = 0.1
    transform_init_std: float = 0.01
    seed: int = 0

    def __post_init__(self):
        h, w, b = self.shape
        if h < 1 or w < 1 or b < 1:
            raise ValueError(f"invalid data shape {self.shape}")
        if self.hmf_layers < 2:
            raise ValueError(f"hmf_layers must be >= 2, got {self.hmf_layers}")
        if self.hnt_layers < 0:
            raise ValueError(f"hnt_layers must be >= 0, got {self.hnt_layers}")
        if self.activation_kind not in _SUPPORTED_ACTIVATIONS:
            raise ValueError(f"unsupported activation {self.activation_kind!r}")
        if self.ranks is None:
            self.ranks = default_ranks(self.shape, self.hmf_layers)
        self.ranks = tuple(int(r) for r in self.ranks)
        if len(self.ranks) != self.hmf_layers + 1:
            raise ValueError(
                f"need {self.hmf_layers + 1} ranks for {self.hmf_layers} layers, "
                f"got {len(self.ranks)}")
        if any(r < 1 for r in self.ranks):
            raise ValueError(f"ranks must be positive, got {self.ranks}")
        if self.ranks[0] != w or self.ranks[-1] != h:
            raise ValueError(
                f"ranks must satisfy r_0 = w = {w} and r_l = h = {h}, got {self.ranks}")


@dataclass
class H2TFParams:
    """Learnable state: factor tensors, transform matrices and metadata.

    ``fixed_transforms`` marks the transform stack as non-learnable; the
    degenerate constructors use it to pin a fixed band transform.
    """

    factors: list
    transforms: list
    shape: tuple
    activation_kind: str = "leaky_relu"
    activation_slope: float = 0.1
    fixed_transforms: bool = False

    def __post_init__(self):
        h, w, b = self.shape
        if self.activation_kind not in _SUPPORTED_ACTIVATIONS:
            raise ValueError(f"unsupported activation {self.activation_kind!r}")
        if len(self.factors) < 2:
            raise ValueError("at least two factor tensors are required")
        for d, wd in enumerate(self.factors):
            if wd.ndim != 3 or wd.shape[2] != b:
                raise ValueError(f"factor {d} has shape {wd.shape}, expected (*, *, {b})")
            if d > 0 and wd.shape[1] != self.factors[d - 1].shape[0]:
                raise ValueError(
                    f"factor chain broken at {d}: {self.factors[d - 1].shape} -> {wd.shape}")
        if self.factors[0].shape[1] != w:
            raise ValueError(f"innermost factor must have {w} columns")
        if self.factors[-1].shape[0] != h:
            raise ValueError(f"outermost factor must have {h} rows")
        for p, hp in enumerate(self.transforms):
            if hp.shape != (b, b):
                raise ValueError(f"transform {p} has shape {hp.shape}, expected ({b}, {b})")

    @property
    def hmf_layers(self):
        return len(self.factors)

    @property
    def hnt_layers(self):
        return len(self.transforms)

    @property
    def ranks(self):
        return (self.factors[0].shape[1],) + tuple(w.shape[0] for w in self.factors)


def init_params(cfg):
    """Draw fresh parameters for ``cfg``; deterministic given ``cfg.seed``.

    Factor entries are zero-mean Gaussian with standard deviation
    ``sqrt(1 / r_{d-1})`` (keeps the forward output at unit scale);
    transforms start at identity plus a small Gaussian perturbation.
    """
    rng = np.random.default_rng(cfg.seed)
    _, _, b = cfg.shape
    factors = []
    for d in range(cfg.hmf_layers):
        r_prev, r_d = cfg.ranks[d], cfg.ranks[d + 1]
        factors.append(rng.normal(0.0, np.sqrt(1.0 / r_prev), size=(r_d, r_prev, b)))
    transforms = [np.eye(b) + rng.normal(0.0, cfg.transform_init_std, size=(b, b))
                  for _ in range(cfg.hnt_layers)]
    return H2TFParams(factors=factors, transforms=transforms, shape=cfg.shape,
                      activation_kind=cfg.activation_kind,
                      activation_slope=cfg.activation_slope)


def hmf_forward(params):
    """Evaluate the face-wise factorization stage, returning ``z`` (h, w, b)."""
    facs = params.factors
    l = len(facs)
    acc = facs[0]
    for d in range(1, l):
        acc = facewise_product(facs[d], acc)
        if d < l - 1:
            acc = activation(acc, params.activation_slope)
    return acc


def hnt_apply(z, params):
    """Apply the band-mixing transform stack to ``z``; ``m = 0`` is identity."""
    acc = np.asarray(z)
    m = len(params.transforms)
    for p in range(m):
        acc = mode3_product(acc, params.transforms[p])
        if p < m - 1:
            acc = activation(acc, params.activation_slope)
    return acc


def forward(params):
    """Full forward evaluation ``x = hnt_apply(hmf_forward(params))``.

    A fixed complex transform (inverse-DFT constructor) yields a nominally
    real result; the real part is returned and a warning is emitted if the
    discarded imaginary part is not negligible.
    """
    x = hnt_apply(hmf_forward(params), params)
    if np.iscomplexobj(x):
        scale = max(float(np.max(np.abs(x.real), initial=0.0)), 1.0)
        imag_max = float(np.max(np.abs(x.imag), initial=0.0))
        if imag_max > 1e-8 * scale:
            warnings.warn(
                f"discarding non-negligible imaginary part (max {imag_max:.3e}); "
                "the transform-domain factors are not conjugate-symmetric",
                RuntimeWarning, stacklevel=2)
        x = np.ascontiguousarray(x.real)
    return x


def make_degenerate(kind, cfg):
    """Construct parameters realizing a named special case.

    * ``"hlrtf"``: two-layer factorization under a learnable transform
      stack (requires ``hmf_layers == 2``).
    * ``"plain_hmf"``: per-slice factorization with no band transform
      (requires ``hnt_layers == 0``).
    * ``"tubal_mf"``: classical low-tubal-rank factorization (requires
      ``hmf_layers == 2`` and ``hnt_layers == 1``); the single transform is
      pinned to the inverse DFT and the factors are drawn in the Fourier
      domain of real tensors, so the forward output is real and its tubal
      rank is bounded by ``min(ranks)``.
    """
    if kind == "hlrtf":
        if cfg.hmf_layers != 2:
            raise ValueError(f"hlrtf requires hmf_layers == 2, got {cfg.hmf_layers}")
        return init_params(cfg)
    if kind == "plain_hmf":
        if cfg.hnt_layers != 0:
            raise ValueError(f"plain_hmf requires hnt_layers == 0, got {cfg.hnt_layers}")
        return init_params(cfg)
    if kind == "tubal_mf":
        if cfg.hmf_layers != 2 or cfg.hnt_layers != 1:
            raise ValueError(
                "tubal_mf requires hmf_layers == 2 and hnt_layers == 1, "
                f"got l={cfg.hmf_layers}, m={cfg.hnt_layers}")
        rng = np.random.default_rng(cfg.seed)
        _, _, b = cfg.shape
        factors = []
        for d in range(2):
            r_prev, r_d = cfg.ranks[d], cfg.ranks[d + 1]
            real = rng.normal(0.0, np.sqrt(1.0 / r_prev), size=(r_d, r_prev, b))
            factors.append(np.fft.fft(real, axis=2))
        return H2TFParams(factors=factors, transforms=[inverse_dft_matrix(b)],
                          shape=cfg.shape, activation_kind=cfg.activation_kind,
                          activation_slope=cfg.activation_slope,
                          fixed_transforms=True)
    raise ValueError(f"unknown degenerate kind {kind!r}")
