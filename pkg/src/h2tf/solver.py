"""ADMM loop for mixed-noise removal.

Per outer iteration, in this order: closed-form soft-threshold updates of
the four difference auxiliaries, closed-form update of the sparse
component, one (configurable) Adam step on the factorization parameters,
then the multiplier ascent.  The input cube is min-max scaled to [0, 1]
before solving (the trade-off defaults assume unit-scale data) and the
outputs are rescaled on return.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .autograd import objective_and_grad
from .metrics import psnr
from .model import H2TFParams, forward, init_params
from .tensor import diff_x, diff_y, diff_z, soft_threshold


class DivergenceError(RuntimeError):
    """Raised when the fit diverges; carries the diagnostics so far."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


def _op_xz(x):
    return diff_x(diff_z(x))


def _op_yz(x):
    return diff_y(diff_z(x))


#: the four difference operators paired with the auxiliaries V_1..V_4
OPERATORS = (diff_x, diff_y, _op_xz, _op_yz)


@dataclass
class SolverConfig:
    """Trade-offs, penalty, Adam hyperparameters and stopping controls.

    Defaults are calibrated for data min-max scaled to [0, 1].
    """

    alpha1: float = 0.1
    alpha2: float = 0.01
    alpha3: float = 0.01
    mu: float = 0.1
    adam_lr: float = 5e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    max_iters: int = 1500
    tol: float = 1e-6
    inner_adam_steps: int = 1
    seed: int = 0

    def __post_init__(self):
        if min(self.alpha1, self.alpha2, self.alpha3) < 0:
            raise ValueError("trade-off weights must be nonnegative")
        if self.mu <= 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.adam_lr <= 0:
            raise ValueError(f"adam_lr must be positive, got {self.adam_lr}")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ValueError("adam betas must lie in [0, 1)")
        if self.max_iters < 1 or self.inner_adam_steps < 1:
            raise ValueError("max_iters and inner_adam_steps must be >= 1")

    def weights(self):
        """Soft-threshold weights paired with OPERATORS."""
        return (self.alpha2, self.alpha2, self.alpha3, self.alpha3)


@dataclass
class AdamState:
    """First/second moments per parameter entry; the step counter is shared
    across outer iterations (moments persist for the whole run)."""

    m_factors: list
    v_factors: list
    m_transforms: list
    v_transforms: list
    t: int = 0

    @classmethod
    def for_params(cls, params):
        return cls(m_factors=[np.zeros_like(w) for w in params.factors],
                   v_factors=[np.zeros_like(w) for w in params.factors],
                   m_transforms=[np.zeros_like(h) for h in params.transforms],
                   v_transforms=[np.zeros_like(h) for h in params.transforms])


def adam_step(params, grads, state, cfg):
    """One Adam update with bias correction; returns new parameters.

    The input parameter arrays are left untouched (fresh arrays are
    allocated), which also invalidates any tape recorded against them.
    Fixed transforms are carried over unchanged.
    """
    state.t += 1
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t

    def update(theta, g, m, v, label):
        if not np.all(np.isfinite(g)):
            raise DivergenceError(f"non-finite gradient for {label}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        return theta - cfg.adam_lr * (m / c1) / (np.sqrt(v / c2) + cfg.adam_eps)

    factors = [update(w, grads.factors[i], state.m_factors[i], state.v_factors[i],
                      f"factor {i}")
               for i, w in enumerate(params.factors)]
    if params.fixed_transforms:
        transforms = list(params.transforms)
    else:
        transforms = [update(h, grads.transforms[p], state.m_transforms[p],
                             state.v_transforms[p], f"transform {p}")
                      for p, h in enumerate(params.transforms)]
    return H2TFParams(factors=factors, transforms=transforms, shape=params.shape,
                      activation_kind=params.activation_kind,
                      activation_slope=params.activation_slope,
                      fixed_transforms=params.fixed_transforms)


def update_v(x, lam, mu, weight, op):
    """Closed-form auxiliary update ``soft(op(x) + lam / mu, weight / mu)``."""
    return soft_threshold(op(x) + lam / mu, weight / mu)


def update_s(y, x, alpha1):
    """Closed-form sparse-component update ``soft(y - x, alpha1 / 2)``."""
    if alpha1 < 0:
        raise ValueError(f"alpha1 must be nonnegative, got {alpha1}")
    return soft_threshold(y - x, alpha1 / 2.0)


def update_multipliers(lams, x, vs, mu):
    """Multiplier ascent ``lam_i + mu * (op_i(x) - v_i)`` for the four pairings."""
    return [lam + mu * (op(x) - v) for lam, v, op in zip(lams, vs, OPERATORS)]


@dataclass
class IterationStats:
    iteration: int
    loss: float
    fidelity: float
    s_l1: float
    r1: float
    r2: float
    r3: float
    r4: float
    psnr: float
    seconds: float

    FIELDS = ("iteration", "loss", "fidelity", "s_l1",
              "r1", "r2", "r3", "r4", "psnr", "seconds")

    def row(self):
        return [getattr(self, f) for f in self.FIELDS]


@dataclass
class SolverState:
    """Mutable state of one run, exposed for tracing and tests."""

    t: int
    params: object
    adam: AdamState
    s: np.ndarray
    v: list
    lam: list
    diagnostics: list = field(default_factory=list)


@dataclass
class DenoiseResult:
    x: np.ndarray
    s: np.ndarray
    diagnostics: list
    model_config: object
    solver_config: SolverConfig
    scale_min: float
    scale_range: float
    stopped_early: bool

    @property
    def iterations(self):
        return len(self.diagnostics)


def run(y, model_cfg, solver_cfg, truth=None, trace=None):
    """Denoise ``y``; returns the clean estimate, sparse component and diagnostics.

    ``truth``, when given, adds a per-iteration PSNR column to the
    diagnostics.  ``trace``, when given, is called as
    ``trace(stage, state)`` after every sub-update (stages ``"v"``, ``"s"``,
    ``"x"``, ``"lam"``); used by the order-of-updates test.

    Stops at ``max_iters`` or once the relative change of the estimate
    stays below ``tol`` for 10 consecutive iterations.  Deterministic for
    fixed configs and seeds.  Raises :class:`DivergenceError` if the loss
    becomes non-finite or exceeds 1000x its initial value.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 3:
        raise ValueError(f"y must be an order-3 array, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise ValueError("y contains non-finite entries")
    if tuple(model_cfg.shape) != y.shape:
        raise ValueError(f"model shape {model_cfg.shape} does not match data {y.shape}")

    ymin = float(y.min())
    yrange = float(y.max()) - ymin
    if yrange <= 0.0:
        yrange = 1.0
    ys = (y - ymin) / yrange

    params = init_params(model_cfg)
    adam = AdamState.for_params(params)
    zeros = np.zeros_like(ys)
    state = SolverState(t=0, params=params, adam=adam, s=zeros.copy(),
                        v=[zeros.copy() for _ in range(4)],
                        lam=[zeros.copy() for _ in range(4)])
    weights = solver_cfg.weights()
    mu = solver_cfg.mu
    x = forward(params)
    initial_loss = None
    stall = 0
    stopped_early = False

    def unscale(arr):
        return arr * yrange + ymin

    for t in range(1, solver_cfg.max_iters + 1):
        tic = time.perf_counter()
        state.t = t
        state.v = [update_v(x, state.lam[i], mu, weights[i], OPERATORS[i])
                   for i in range(4)]
        if trace:
            trace("v", state)
        state.s = update_s(ys, x, solver_cfg.alpha1)
        if trace:
            trace("s", state)
        ds = [state.v[i] - state.lam[i] / mu for i in range(4)]
        loss = np.nan
        for _ in range(solver_cfg.inner_adam_steps):
            try:
                loss, grads = objective_and_grad(state.params, ys, state.s, *ds, mu)
                state.params = adam_step(state.params, grads, state.adam, solver_cfg)
            except DivergenceError as err:
                raise DivergenceError(f"iteration {t}: {err}",
                                      diagnostics=state.diagnostics) from err
        x_new = forward(state.params)
        if trace:
            trace("x", state)
        state.lam = update_multipliers(state.lam, x_new, state.v, mu)
        if trace:
            trace("lam", state)

        residuals = [float(np.linalg.norm((op(x_new) - v).ravel()))
                     for op, v in zip(OPERATORS, state.v)]
        fit = ys - x_new - state.s
        stats = IterationStats(
            iteration=t, loss=loss,
            fidelity=float(np.sum(fit * fit)),
            s_l1=float(np.sum(np.abs(state.s))),
            r1=residuals[0], r2=residuals[1], r3=residuals[2], r4=residuals[3],
            psnr=psnr(unscale(x_new), truth) if truth is not None else np.nan,
            seconds=time.perf_counter() - tic)
        state.diagnostics.append(stats)

        if not np.isfinite(loss):
            raise DivergenceError(f"non-finite loss at iteration {t}",
                                  diagnostics=state.diagnostics)
        if initial_loss is None:
            initial_loss = max(loss, np.finfo(float).tiny)
        elif loss > 1e3 * initial_loss:
            raise DivergenceError(
                f"loss exceeded 1000x its initial value at iteration {t}",
                diagnostics=state.diagnostics)

        rel = float(np.linalg.norm((x_new - x).ravel())
                    / max(np.linalg.norm(x.ravel()), np.finfo(float).tiny))
        stall = stall + 1 if rel < solver_cfg.tol else 0
        x = x_new
        if stall >= 10:
            stopped_early = True
            break

    return DenoiseResult(x=unscale(x), s=state.s * yrange,
                         diagnostics=state.diagnostics,
                         model_config=model_cfg, solver_config=solver_cfg,
                         scale_min=ymin, scale_range=yrange,
                         stopped_early=stopped_early)
