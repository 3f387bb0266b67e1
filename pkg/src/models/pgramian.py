"""
Parameter gramians: sensitivity, identifiability and cross-identifiability.

Parameters enter either as additional constant inputs (sensitivity) or as
additional constant states (identifiability, joint); the parameter gramian
is then read off a sub-gramian or extracted with a Schur complement.
"""
import logging
import time
from dataclasses import dataclass

import numpy as np

from src.models.core import (
    AugmentedBlocks,
    CenteringKind,
    Gramian,
    GramianKind,
    SystemDims,
    SystemModel,
    _ParsableEnum,
    gram_schur_complement,
    schur_complement,
)
from src.models.gramian import controllability_parts, cross_matrix, observability_factor
from src.models.sim import IntegratorKind, InputSignal
from src.utils.errors import NoParametersError, SimulationDivergenceError, SquareSystemRequiredError

logger = logging.getLogger(__name__)


class AugmentationKind(_ParsableEnum):
    OBSERVABILITY = 'observability'
    JOINT = 'joint'


@dataclass(frozen=True)
class AugmentedModel:
    """A base system whose parameters have been absorbed into the state."""
    base: SystemModel
    model: SystemModel
    kind: AugmentationKind

    @property
    def aug_dims(self):
        return self.model.dims

    def split_state(self, z):
        n = self.base.dims.n
        return z[:n], z[n:]


def _require_parameters(model):
    if model.dims.P == 0:
        raise NoParametersError()


def augment_for_observability(model):
    """
    Augments the state with constant parameter states: z = (x; x_p),
    z' = (f(x, u, x_p); 0), y = g(x, u, x_p).
    """
    _require_parameters(model)
    n, P = model.dims.n, model.dims.P
    f, g = model.f, model.g
    zeros = np.zeros(P)

    def f_aug(z, u, _):
        return np.concatenate([f(z[:n], u, z[n:]), zeros])

    def g_aug(z, u, _):
        return np.asarray(g(z[:n], u, z[n:]), dtype=float)

    dims = SystemDims(m=model.dims.m, n=n + P, o=model.dims.o, P=0)
    return AugmentedModel(model, SystemModel(dims, f_aug, g_aug), AugmentationKind.OBSERVABILITY)


def augment_for_joint(model):
    """
    Augments states, inputs and outputs for the joint gramian:
    z' = (f(x, u, x_p); v), y = (g(x, u, x_p); x_p) with v the trailing P inputs.
    """
    _require_parameters(model)
    if not model.dims.is_square:
        raise SquareSystemRequiredError(model.dims.m, model.dims.o)
    m, n, P = model.dims.m, model.dims.n, model.dims.P
    f, g = model.f, model.g

    def f_aug(z, w, _):
        return np.concatenate([f(z[:n], w[:m], z[n:]), w[m:]])

    def g_aug(z, w, _):
        return np.concatenate([g(z[:n], w[:m], z[n:]), z[n:]])

    dims = SystemDims(m=m + P, n=n + P, o=model.dims.o + P, P=0)
    return AugmentedModel(model, SystemModel(dims, f_aug, g_aug), AugmentationKind.JOINT)


def _parameter_input_model(model):
    """The base model with its parameters moved to trailing constant input channels."""
    m = model.dims.m
    f, g = model.f, model.g

    def f_w(x, w, _):
        return f(x, w[:m], w[m:])

    def g_w(x, w, _):
        return g(x, w[:m], w[m:])

    dims = SystemDims(m=m + model.dims.P, n=model.dims.n, o=model.dims.o, P=0)
    return SystemModel(dims, f_w, g_w)


def sensitivity_gramian(model, grid, spec, u, integrator=IntegratorKind.EULER,
                        centering=CenteringKind.STEADY, data=None, jobs=1, pod_rank=1):
    """
    Controllability gramian W_C and diagonal sensitivity gramian W_S.

    Parameter k is treated as a step input at its nominal value p_k whose
    perturbations are relative (p_k·(1 ± c)); parameters with nominal value
    zero fall back to absolute perturbations ± c, listed in
    ``W_S.meta['absolute_scale_params']``.

    Returns:
        tuple: (W_C, W_S) with W_C = W_{C,0} + Σ_k W_{C,k}.
    """
    _require_parameters(model)
    started = time.perf_counter()
    m, P = model.dims.m, model.dims.P
    p = model.p
    absolute = [k for k in range(P) if p[k] == 0.0]
    amplitudes = np.where(p == 0.0, 1.0, p)

    base = u.sample(grid) if m else np.zeros((0, grid.steps))
    signal = InputSignal.sampled(np.vstack([base, amplitudes[:, None] * np.ones((1, grid.steps))]))
    combined = _parameter_input_model(model)
    combined_spec = spec.replace(
        input_scales=np.concatenate([spec.input_scales, spec.param_scales]),
        param_scales=np.zeros(0),
        steady_input=np.concatenate([spec.steady_input, p]),
    )
    try:
        parts = controllability_parts(combined, grid, combined_spec, signal, integrator,
                                      centering, data, jobs, pod_rank)
    except SimulationDivergenceError as err:
        channel = next((c for c in err.context if str(c).startswith('j=')), None)
        if channel is not None and int(channel[2:]) >= m:
            raise err.with_context(f"param={int(channel[2:]) - m}") from err
        raise

    n = model.dims.n
    W_C = np.zeros((n, n))
    for j in range(m):
        W_C += parts[j]
    W_S = np.zeros((P, P))
    for k in range(P):
        W_S[k, k] = max(np.trace(parts[m + k]), 0.0)
        W_C += parts[m + k]
    W_C = (W_C + W_C.T) / 2.0

    if absolute:
        logger.warning("Parameters %s have nominal value 0; using absolute perturbation scales", absolute)
    logger.info("Sensitivity gramian (n=%d, P=%d) assembled in %.3f s", n, P, time.perf_counter() - started)
    meta = {'centering': CenteringKind.parse(centering).value}
    return (Gramian(W_C, GramianKind.CONTROLLABILITY, dict(meta)),
            Gramian(W_S, GramianKind.SENSITIVITY, dict(meta, absolute_scale_params=absolute)))


def _parameter_gramian(W, n, tol, approximate):
    blocks = AugmentedBlocks.from_matrix(W, n)
    if approximate:
        return blocks.W11, blocks.W22.copy()
    return blocks.W11, schur_complement(blocks, tol)


def identifiability_gramian(model, grid, spec, integrator=IntegratorKind.EULER,
                            centering=CenteringKind.STEADY, data=None, jobs=1, pod_rank=1,
                            tol=1e-12, approximate=False):
    """
    Observability gramian W_O and identifiability gramian W_I.

    The observability gramian of the parameter-augmented system is split
    into blocks; W_I is the Schur complement W22 - W12ᵀ·W11⁺·W12, or W22
    alone with ``approximate=True``. The complement is formed from the
    snapshot factor of the augmented gramian, so W_I stays positive
    semidefinite when W11 is numerically singular.
    """
    _require_parameters(model)
    started = time.perf_counter()
    n = model.dims.n
    augmented = augment_for_observability(model)
    aug_spec = spec.replace(
        state_scales=np.concatenate([spec.state_scales, spec.param_scales]),
        param_scales=np.zeros(0),
        steady_state=np.concatenate([spec.steady_state, model.p]),
    )
    Z = observability_factor(augmented.model, grid, aug_spec, integrator, centering, data, jobs, pod_rank)
    W = Z.T @ Z
    W_O = (W[:n, :n] + W[:n, :n].T) / 2.0
    W_I = W[n:, n:].copy() if approximate else gram_schur_complement(Z, n, tol)
    W_I = (W_I + W_I.T) / 2.0
    logger.info("Identifiability gramian (n=%d, P=%d) assembled in %.3f s",
                n, model.dims.P, time.perf_counter() - started)
    meta = {'centering': CenteringKind.parse(centering).value, 'approximate': bool(approximate)}
    return (Gramian(W_O, GramianKind.OBSERVABILITY, dict(meta)),
            Gramian(W_I, GramianKind.IDENTIFIABILITY, dict(meta)))


def joint_gramian(model, grid, spec, u, integrator=IntegratorKind.EULER,
                  centering=CenteringKind.STEADY, data=None, jobs=1, pod_rank=1,
                  tol=1e-12, input_average=False, approximate=False):
    """
    Cross gramian W_X and cross-identifiability gramian W_Ï from the
    cross gramian of the joint augmentation.

    The parameter-input channels v are excited like the training input:
    unit impulses for impulse or sampled inputs, unit steps for step inputs
    and nothing for a zero input.
    """
    _require_parameters(model)
    if not model.dims.is_square:
        raise SquareSystemRequiredError(model.dims.m, model.dims.o)
    started = time.perf_counter()
    n, P = model.dims.n, model.dims.P
    augmented = augment_for_joint(model)
    aug_spec = spec.replace(
        input_scales=np.concatenate([spec.input_scales, spec.param_scales]),
        state_scales=np.concatenate([spec.state_scales, spec.param_scales]),
        param_scales=np.zeros(0),
        steady_input=np.concatenate([spec.steady_input, np.zeros(P)]),
        steady_state=np.concatenate([spec.steady_state, model.p]),
    )
    W = cross_matrix(augmented.model, grid, aug_spec, u.extended(P, grid), integrator,
                     centering, data, jobs, pod_rank, input_average)
    W_X, W_JI = _parameter_gramian(W, n, tol, approximate)
    logger.info("Joint gramian (n=%d, P=%d) assembled in %.3f s", n, P, time.perf_counter() - started)
    meta = {'centering': CenteringKind.parse(centering).value, 'input_average': bool(input_average)}
    return (Gramian(W_X, GramianKind.CROSS, dict(meta)),
            Gramian(W_JI, GramianKind.CROSS_IDENTIFIABILITY, dict(meta)))
