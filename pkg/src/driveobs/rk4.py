"""Classical fixed-step fourth-order Runge-Kutta integration."""

from __future__ import annotations

import numpy as np


def rk4_step(f, x, u_of_t, t: float, dt: float):
    """
    Advance ``x`` by one step of the classical four-stage scheme.

    ``u_of_t`` is sampled at the stage times t, t + dt/2 and t + dt, so
    time-varying inputs integrate at full order as long as they are smooth
    across the step.
    """
    u1 = u_of_t(t)
    um = u_of_t(t + 0.5 * dt)
    u2 = u_of_t(t + dt)
    k1 = np.asarray(f(x, u1), float)
    k2 = np.asarray(f(x + 0.5 * dt * k1, um), float)
    k3 = np.asarray(f(x + 0.5 * dt * k2, um), float)
    k4 = np.asarray(f(x + dt * k3, u2), float)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_integrate(f, x0, u_of_t, t0: float, t1: float, dt: float):
    """Integrate from t0 to t1 on a uniform grid; returns (times, states)."""
    n = int(round((t1 - t0) / dt))
    x = np.asarray(x0, float).copy()
    times = t0 + dt * np.arange(n + 1)
    out = np.empty((n + 1, x.size))
    out[0] = x
    for k in range(n):
        x = rk4_step(f, x, u_of_t, float(times[k]), dt)
        out[k + 1] = x
    return times, out
