"""Exact reverse-mode gradients of the factorization.

The forward computation is a fixed chain, so a flat tape of per-layer
intermediates suffices: the right operand of every face-wise product, the
input of every mode-3 product, and the pre-activation values wherever the
activation fires (its derivative mask depends on the pre-activation sign).

The gradient path is real-valued only; constructions with complex factors
(the pinned inverse-DFT transform) are not differentiable here.
"""

from dataclasses import dataclass

import numpy as np

from .model import activation, activation_derivative
from .tensor import (diff_x, diff_x_adjoint, diff_y, diff_y_adjoint, diff_z,
                     diff_z_adjoint, facewise_product, mode3_product)


@dataclass
class ParamGrads:
    """Gradients, shape-congruent with the parameter object they differentiate."""

    factors: list
    transforms: list


@dataclass
class Tape:
    """Intermediates of one forward evaluation, sufficient for one backward pass.

    Backward does not mutate the tape, so it may be replayed.  The tape
    holds references to the exact parameter arrays it was recorded with;
    a backward call against different arrays is rejected as stale.
    """

    x: np.ndarray
    hmf_inputs: list
    hmf_preacts: list
    hnt_inputs: list
    hnt_preacts: list
    param_refs: tuple

    @property
    def activation_count(self):
        return len(self.hmf_preacts) + len(self.hnt_preacts)


def forward_with_tape(params):
    """Evaluate the model, recording intermediates; returns ``(x, tape)``.

    The returned ``x`` is bitwise identical to :func:`h2tf.model.forward`.
    """
    for arr in params.factors + params.transforms:
        if np.iscomplexobj(arr):
            raise TypeError("gradient path supports real parameters only")
    slope = params.activation_slope
    facs = params.factors
    l = len(facs)
    acc = facs[0]
    hmf_inputs = [acc]
    hmf_preacts = []
    for d in range(1, l):
        pre = facewise_product(facs[d], acc)
        if d < l - 1:
            hmf_preacts.append(pre)
            acc = activation(pre, slope)
            hmf_inputs.append(acc)
        else:
            acc = pre
    t = acc
    m = len(params.transforms)
    hnt_inputs = []
    hnt_preacts = []
    for p in range(m):
        hnt_inputs.append(t)
        pre = mode3_product(t, params.transforms[p])
        if p < m - 1:
            hnt_preacts.append(pre)
            t = activation(pre, slope)
        else:
            t = pre
    tape = Tape(x=t, hmf_inputs=hmf_inputs, hmf_preacts=hmf_preacts,
                hnt_inputs=hnt_inputs, hnt_preacts=hnt_preacts,
                param_refs=tuple(params.factors) + tuple(params.transforms))
    return t, tape


def _check_tape(tape, params):
    refs = tuple(params.factors) + tuple(params.transforms)
    if len(refs) != len(tape.param_refs) or any(
            a is not b for a, b in zip(refs, tape.param_refs)):
        raise RuntimeError("stale tape: parameters changed since the recorded forward")


def backward(tape, params, gx):
    """Pull the output cotangent ``gx`` back onto every parameter.

    Returns the gradients of ``<gx, x>`` linearized at the taped point:
    mode-3 products contribute ``H_p^T`` on the tensor side and a
    contraction against the taped input on the matrix side; face-wise
    products contribute the per-slice matrix-calculus adjoints; activation
    masks come from the taped pre-activations.
    """
    _check_tape(tape, params)
    gx = np.asarray(gx)
    if gx.shape != params.shape:
        raise ValueError(f"gx has shape {gx.shape}, expected {params.shape}")
    slope = params.activation_slope
    m = len(params.transforms)
    l = len(params.factors)

    g = gx
    g_transforms = [None] * m
    for p in reversed(range(m)):
        if p < m - 1:
            g = g * activation_derivative(tape.hnt_preacts[p], slope)
        g_transforms[p] = np.einsum("ijp,ijq->pq", g, tape.hnt_inputs[p])
        g = mode3_product(g, params.transforms[p].T)

    g_factors = [None] * l
    for d in reversed(range(1, l)):
        if d < l - 1:
            g = g * activation_derivative(tape.hmf_preacts[d - 1], slope)
        a_prev = tape.hmf_inputs[d - 1]
        g_factors[d] = np.einsum("ajk,cjk->ack", g, a_prev)
        g = np.einsum("ack,ajk->cjk", params.factors[d], g)
    g_factors[0] = g
    return ParamGrads(factors=g_factors, transforms=g_transforms)


def objective_and_grad(params, y, s, d1, d2, d3, d4, mu):
    """Value and parameter gradients of the fitting objective.

    ``loss = ||y - x - s||_F^2 + (mu/2) * (||Dx x - d1||^2 + ||Dy x - d2||^2
    + ||Dx Dz x - d3||^2 + ||Dy Dz x - d4||^2)`` with ``x = forward(params)``.
    """
    if mu < 0:
        raise ValueError(f"mu must be nonnegative, got {mu}")
    x, tape = forward_with_tape(params)
    for name, arr in (("y", y), ("s", s), ("d1", d1), ("d2", d2), ("d3", d3), ("d4", d4)):
        if np.shape(arr) != x.shape:
            raise ValueError(f"{name} has shape {np.shape(arr)}, expected {x.shape}")
    r = y - x - s
    rx = diff_x(x) - d1
    ry = diff_y(x) - d2
    rxz = diff_x(diff_z(x)) - d3
    ryz = diff_y(diff_z(x)) - d4
    loss = float(np.sum(r * r) + 0.5 * mu * (np.sum(rx * rx) + np.sum(ry * ry)
                                             + np.sum(rxz * rxz) + np.sum(ryz * ryz)))
    gx = -2.0 * r + mu * (diff_x_adjoint(rx) + diff_y_adjoint(ry)
                          + diff_z_adjoint(diff_x_adjoint(rxz))
                          + diff_z_adjoint(diff_y_adjoint(ryz)))
    return loss, backward(tape, params, gx)


def finite_diff_grads(params, scalar_loss_fn, step):
    """Central-difference gradient oracle; intended for small models only.

    Perturbs every parameter entry in place and restores it, so the
    parameter object is unchanged on return.
    """
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")

    def fd_array(arr):
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]
            arr[idx] = orig + step
            lp = scalar_loss_fn(params)
            arr[idx] = orig - step
            lm = scalar_loss_fn(params)
            arr[idx] = orig
            g[idx] = (lp - lm) / (2.0 * step)
        return g

    return ParamGrads(factors=[fd_array(w) for w in params.factors],
                      transforms=[fd_array(h) for h in params.transforms])
