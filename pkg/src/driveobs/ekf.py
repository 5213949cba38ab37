"""Discrete-time extended Kalman filter, generic over the machine models.

Values in, values out: every step returns a new instance, so filters can be
advanced independently on any thread. Prediction uses an explicit first-order
discretization of the dynamics and of the state Jacobian; the covariance
update uses the symmetry-preserving (Joseph) form.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np

from .machines import InductionMachine, wrap_angle


class EkfDivergenceError(RuntimeError):
    """Estimate or covariance exceeded the overflow bound (filter blow-up)."""


class SingularInnovationError(np.linalg.LinAlgError):
    """Innovation covariance is not positive definite (corrupt tuning)."""


def _check_spd(M, name: str) -> np.ndarray:
    M = np.asarray(M, float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square")
    if not np.allclose(M, M.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(M).max())):
        raise ValueError(f"{name} must be symmetric")
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise ValueError(f"{name} must be positive definite") from None
    return M


@dataclass(frozen=True)
class EkfConfig:
    """
    EKF tuning: process/measurement noise, initial state and covariance.

    ``Q``, ``R`` and ``P0`` must be symmetric positive definite; larger ``Q``
    relative to ``R`` gives a faster, noisier observer. ``Ts`` is the filter
    sample period (s). ``overflow`` bounds any estimate/covariance entry
    before a divergence error is raised.
    """

    Q: np.ndarray
    R: np.ndarray
    P0: np.ndarray
    x0: np.ndarray
    Ts: float
    overflow: float = 1e12

    def __post_init__(self):
        object.__setattr__(self, "Q", _check_spd(self.Q, "Q"))
        object.__setattr__(self, "R", _check_spd(self.R, "R"))
        object.__setattr__(self, "P0", _check_spd(self.P0, "P0"))
        object.__setattr__(self, "x0", np.asarray(self.x0, float))
        if self.Ts <= 0:
            raise ValueError("Ts must be positive")
        if self.Q.shape[0] != self.x0.size or self.P0.shape[0] != self.x0.size:
            raise ValueError("Q/P0 dimensions must match x0")


@dataclass(frozen=True)
class EkfModel:
    """Machine model plus measurement selection for the filter."""

    machine: object
    speed_measured: bool = False
    angle_outputs: Tuple[int, ...] = ()

    def f(self, x, u):
        return self.machine.f(x, u)

    def h(self, x):
        if isinstance(self.machine, InductionMachine):
            return self.machine.h(x, self.speed_measured)
        return self.machine.h(x)

    def output_matrix(self):
        if isinstance(self.machine, InductionMachine):
            return self.machine.output_matrix(self.speed_measured)
        return self.machine.output_matrix()


@dataclass(frozen=True)
class EkfInstance:
    """Filter state: current estimate, covariance, tuning and model."""

    x: np.ndarray
    P: np.ndarray
    config: EkfConfig
    model: EkfModel

    @property
    def Ts(self) -> float:
        return self.config.Ts


def make_ekf(machine, config: EkfConfig, speed_measured: bool = False,
             angle_outputs: Tuple[int, ...] = ()) -> EkfInstance:
    """Fresh filter instance at the configured initial state/covariance."""
    model = EkfModel(machine=machine, speed_measured=speed_measured,
                     angle_outputs=angle_outputs)
    n_y = model.output_matrix().shape[0]
    if config.R.shape[0] != n_y:
        raise ValueError(f"R is {config.R.shape[0]}x{config.R.shape[0]}, "
                         f"model has {n_y} outputs")
    return EkfInstance(x=config.x0.copy(), P=config.P0.copy(),
                       config=config, model=model)


def _check_overflow(inst: EkfInstance):
    bound = inst.config.overflow
    if not np.all(np.isfinite(inst.x)) or np.abs(inst.x).max() > bound \
            or np.abs(inst.P).max() > bound:
        raise EkfDivergenceError(
            "estimate or covariance exceeded the overflow bound "
            f"({bound:g}); filter diverged")


def ekf_predict(inst: EkfInstance, u) -> EkfInstance:
    """Propagate estimate and covariance one sample ahead."""
    u = np.asarray(u, float)
    Ts = inst.Ts
    f = inst.model.f
    x = inst.x
    n = x.size
    # one batched dynamics call: center column plus the 2n FD perturbations
    h = 1e-6 * np.maximum(1.0, np.abs(x))
    X = np.repeat(x[:, None], 2 * n + 1, axis=1)
    idx = np.arange(n)
    X[idx, 1 + idx] += h
    X[idx, 1 + n + idx] -= h
    F_all = np.asarray(f(X, u), float)
    x_next = x + Ts * F_all[:, 0]
    A = (F_all[:, 1:n + 1] - F_all[:, n + 1:]) / (2.0 * h[None, :])
    F = np.eye(n) + Ts * A
    P_next = F @ inst.P @ F.T + inst.config.Q
    P_next = 0.5 * (P_next + P_next.T)
    out = replace(inst, x=x_next, P=P_next)
    _check_overflow(out)
    return out


def ekf_update(inst: EkfInstance, y) -> Tuple[EkfInstance, np.ndarray]:
    """Correct the estimate with a measurement; returns (instance, innovation)."""
    y = np.asarray(y, float)
    C = inst.model.output_matrix()
    R = inst.config.R
    innovation = y - np.asarray(inst.model.h(inst.x), float)
    for i in inst.model.angle_outputs:
        innovation[i] = float(wrap_angle(innovation[i]))
    S = C @ inst.P @ C.T + R
    S = 0.5 * (S + S.T)
    try:
        np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise SingularInnovationError(
            "innovation covariance not positive definite") from None
    K = np.linalg.solve(S, (inst.P @ C.T).T).T
    x_next = inst.x + K @ innovation
    IKC = np.eye(inst.x.size) - K @ C
    P_next = IKC @ inst.P @ IKC.T + K @ R @ K.T
    P_next = 0.5 * (P_next + P_next.T)
    out = replace(inst, x=x_next, P=P_next)
    _check_overflow(out)
    return out, innovation


def ekf_step(inst: EkfInstance, u, y) -> Tuple[EkfInstance, np.ndarray]:
    """One predict-then-correct cycle."""
    return ekf_update(ekf_predict(inst, u), y)
