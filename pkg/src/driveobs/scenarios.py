"""Reference drive scenarios producing ground truth, filter estimates and
observability channels.

Two scenarios are bundled: a speed-driven wound-rotor machine with PI current
control and high-frequency field-current injection at standstill, and an
open-loop induction-machine voltage drive whose stator frequency dwells at
exactly zero. Both log the closed-form observability channels alongside one
or two open-loop filters.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .ekf import EkfConfig, ekf_predict, ekf_update, make_ekf
from .machines import InductionMachine, SynchronousMachine, park, wrap_angle
from .observability import (OBS_THRESHOLD_DEFAULT, im_condition,
                            im_determinant, sm_condition_ratio,
                            sm_determinant, slip_frequency)
from .params import ImParams, WrsmParams, IM_DEFAULT, WRSM_DEFAULT
from .profiles import PiController, Segment, SignalProfile
from .trace import SimTrace, rolling_abs_max

TWO_PI = 2.0 * math.pi


def _check_grid(dt_sim: float, trace_dt: float):
    if trace_dt < dt_sim:
        raise ValueError("integration step must not exceed the filter Ts")
    n_sub = round(trace_dt / dt_sim)
    if abs(n_sub * dt_sim - trace_dt) > 1e-12:
        raise ValueError("trace_dt must be an integer multiple of dt_sim")


# ---------------------------------------------------------------------------
# scenario descriptions


@dataclass
class WrsmScenario:
    """Speed-driven WRSM with PI current loops and HF field injection."""

    params: WrsmParams = WRSM_DEFAULT
    t_end: float = 6.0
    dt_sim: float = 1e-5
    trace_dt: float = 1e-4            # filter sample time and trace grid
    speed_profile: Optional[SignalProfile] = None
    i_d_ref: float = 2.0
    i_q_ref: float = 15.0
    i_f_profile: Optional[SignalProfile] = None
    injection_windows: Tuple[Tuple[float, float], ...] = ((1.0, 1.5), (4.5, 5.0))
    bw_dq: float = 500.0              # current-loop bandwidth (rad/s)
    bw_f: float = 50.0                # field-loop bandwidth (rad/s)
    field_feedforward: bool = True    # R_f*i_ref + L_f*di_ref/dt on v_f
    v_limit: float = 3000.0
    theta0_error: float = 0.5         # initial position estimate offset (rad)
    ekf_q_diag: Tuple[float, ...] = (1.0, 1.0, 1.0, 200.0, 5.0)
    ekf_r_diag: Tuple[float, ...] = (1.0, 1.0, 1.0)
    ekf_p0_diag: Tuple[float, ...] = (0.1, 0.1, 0.1, 10.0, 1.0)
    run_ekf: bool = True
    noise_std: float = 0.0
    seed: Optional[int] = None
    obs_threshold: float = OBS_THRESHOLD_DEFAULT
    omega_o_filter_tau: float = 1e-3
    flag_window: float = 1e-2         # sliding max window for the flag (s)

    def __post_init__(self):
        if self.speed_profile is None:
            self.speed_profile = default_wrsm_speed_profile(self.t_end)
        if self.i_f_profile is None:
            self.i_f_profile = default_field_setpoint_profile(
                self.t_end, windows=self.injection_windows)
        if self.dt_sim <= 0 or self.t_end <= 0:
            raise ValueError("dt_sim and t_end must be positive")
        _check_grid(self.dt_sim, self.trace_dt)
        for name, prof in (("speed_profile", self.speed_profile),
                           ("i_f_profile", self.i_f_profile)):
            if prof.start > 0.0 or prof.end < self.t_end - 1e-9:
                raise ValueError(f"{name} must cover [0, t_end]")


def default_wrsm_speed_profile(t_end: float = 6.0) -> SignalProfile:
    """Standstill through both injection windows, one ramp-hold-ramp bump."""
    return SignalProfile((
        Segment.constant(0.0, 1.5, 0.0),
        Segment.ramp(1.5, 2.5, 0.0, 100.0),
        Segment.constant(2.5, 4.0, 100.0),
        Segment.ramp(4.0, 4.5, 100.0, 0.0),
        Segment.constant(4.5, t_end, 0.0),
    ))


def default_field_setpoint_profile(t_end: float = 6.0, i_f0: float = 4.0,
                                   i_f_hf: float = 0.5,
                                   omega_hf: float = TWO_PI * 1e3,
                                   windows=((1.0, 1.5), (4.5, 5.0))
                                   ) -> SignalProfile:
    """Constant field setpoint with HF sinusoid added inside the windows."""
    segs = []
    t = 0.0
    for (w0, w1) in windows:
        if w0 > t:
            segs.append(Segment.constant(t, w0, i_f0))
        segs.append(Segment.sine(w0, w1, i_f0, ((i_f_hf, omega_hf, 0.0),)))
        t = w1
    if t < t_end:
        segs.append(Segment.constant(t, t_end, i_f0))
    return SignalProfile(tuple(segs))


@dataclass
class ImScenario:
    """Open-loop volts-per-hertz IM drive crossing zero stator frequency."""

    params: ImParams = IM_DEFAULT
    t_end: float = 8.5
    dt_sim: float = 5e-6
    trace_dt: float = 5e-5
    freq_profile: Optional[SignalProfile] = None   # stator frequency (rad/s)
    load_profile: Optional[SignalProfile] = None   # resistant torque (N·m)
    v_rated: float = 2.0
    v_floor: float = 0.8
    omega_rated: float = TWO_PI * 10.0
    dwell: Tuple[float, float] = (3.0, 5.0)
    # continuous-time process/measurement intensities, physical units
    ekf_q_diag_phys: Tuple[float, ...] = (10.0, 10.0, 1e-6, 1e-6, 4e3, 250.0)
    ekf_r_current_phys: float = 1.0
    ekf_r_speed: float = 0.25
    ekf_p0_phys: float = 0.1
    x0_est_phys: Tuple[float, ...] = (0.0, 0.0, -0.02, -0.02, 50.0, 5.0)
    run_ekf: bool = True
    noise_std: float = 1.0
    seed: Optional[int] = 1234
    obs_threshold: float = OBS_THRESHOLD_DEFAULT
    omega_s_filter_tau: float = 1e-3
    flag_window: float = 1e-2

    def __post_init__(self):
        if self.freq_profile is None:
            self.freq_profile = default_im_frequency_profile(
                self.t_end, self.omega_rated, self.dwell)
        if self.load_profile is None:
            self.load_profile = default_im_load_profile(self.t_end)
        if self.dt_sim <= 0 or self.t_end <= 0:
            raise ValueError("dt_sim and t_end must be positive")
        _check_grid(self.dt_sim, self.trace_dt)
        for name, prof in (("freq_profile", self.freq_profile),
                           ("load_profile", self.load_profile)):
            if prof.start > 0.0 or prof.end < self.t_end - 1e-9:
                raise ValueError(f"{name} must cover [0, t_end]")

    def voltage_amplitude(self, omega_s_cmd: float) -> float:
        frac = min(abs(omega_s_cmd) / self.omega_rated, 1.0)
        return self.v_floor + (self.v_rated - self.v_floor) * frac


def default_im_frequency_profile(t_end: float = 8.5,
                                 omega_rated: float = TWO_PI * 10.0,
                                 dwell: Tuple[float, float] = (3.0, 5.0)
                                 ) -> SignalProfile:
    """Rated frequency, ramp to a dwell at exactly zero, ramp back up."""
    d0, d1 = dwell
    return SignalProfile((
        Segment.constant(0.0, 1.0, omega_rated),
        Segment.ramp(1.0, d0, omega_rated, 0.0),
        Segment.constant(d0, d1, 0.0),
        Segment.ramp(d1, d1 + 1.0, 0.0, omega_rated),
        Segment.constant(d1 + 1.0, t_end, omega_rated),
    ))


def default_im_load_profile(t_end: float = 8.5) -> SignalProfile:
    """Resistant torque: idle, motor-load step, generator step near the end."""
    return SignalProfile((
        Segment.constant(0.0, 0.5, 0.0),
        Segment.constant(0.5, 7.5, 5.0),
        Segment.constant(7.5, t_end, -5.0),
    ))


# ---------------------------------------------------------------------------
# fast scalar kernels (tested against the machine models)


def wrsm_current_rates(p: WrsmParams):
    """Scalar-math current derivatives of the wound-rotor machine."""
    Rs, Rf = p.R_s, p.R_f
    L0, L2, Mf, Lf = p.L_0, p.L_2, p.M_f, p.L_f
    floor = 1e-18

    def rates(ia, ib, i_f, w, th, va, vb, vf):
        c1 = math.cos(th)
        s1 = math.sin(th)
        c2 = 2.0 * c1 * c1 - 1.0
        s2 = 2.0 * s1 * c1
        l11 = L0 + L2 * c2
        l12 = L2 * s2
        l13 = Mf * c1
        l22 = L0 - L2 * c2
        l23 = Mf * s1
        l33 = Lf
        lp11 = -2.0 * L2 * s2
        lp12 = 2.0 * L2 * c2
        lp13 = -Mf * s1
        lp22 = 2.0 * L2 * s2
        lp23 = Mf * c1
        r1 = va - Rs * ia - w * (lp11 * ia + lp12 * ib + lp13 * i_f)
        r2 = vb - Rs * ib - w * (lp12 * ia + lp22 * ib + lp23 * i_f)
        r3 = vf - Rf * i_f - w * (lp13 * ia + lp23 * ib)
        a11 = l22 * l33 - l23 * l23
        a12 = l13 * l23 - l12 * l33
        a13 = l12 * l23 - l13 * l22
        det = l11 * a11 + l12 * a12 + l13 * a13
        if abs(det) < floor:
            from .machines import SingularInductanceError
            raise SingularInductanceError("inductance matrix is singular")
        a22 = l11 * l33 - l13 * l13
        a23 = l12 * l13 - l11 * l23
        a33 = l11 * l22 - l12 * l12
        inv = 1.0 / det
        return ((a11 * r1 + a12 * r2 + a13 * r3) * inv,
                (a12 * r1 + a22 * r2 + a23 * r3) * inv,
                (a13 * r1 + a23 * r2 + a33 * r3) * inv)

    return rates


def im_rates(p: ImParams):
    """Scalar-math derivatives of the scaled induction-machine model."""
    a, b = p.a, p.b
    itr = 1.0 / p.tau_r
    ab = a - b
    c_J = p.c / p.J
    p_J = p.p / p.J

    def rates(ia, ib, pa, pb, we, Tr, va, vb):
        return (va + a * ia + itr * pa + we * pb,
                vb + a * ib + itr * pb - we * pa,
                -(itr * pa + we * pb) - ab * ia,
                -(itr * pb - we * pa) - ab * ib,
                c_J * (ib * pa - ia * pb) - p_J * Tr)

    return rates


def im_rates_unscaled(p: ImParams):
    """Scalar-math derivatives of the physical-coordinate IM model."""
    rl = p.R_sigma / p.L_sigma
    kl = p.k_r / p.L_sigma
    il = 1.0 / p.L_sigma
    itr = 1.0 / p.tau_r
    mtr = p.M / p.tau_r
    pk_J = p.p**2 * p.k_r / p.J
    p_J = p.p / p.J

    def rates(ia, ib, pa, pb, we, Tr, va, vb):
        ga = itr * pa + we * pb
        gb = itr * pb - we * pa
        return (-rl * ia + kl * ga + il * va,
                -rl * ib + kl * gb + il * vb,
                -ga + mtr * ia,
                -gb + mtr * ib,
                pk_J * (ib * pa - ia * pb) - p_J * Tr)

    return rates


def run_im_truth(sc: ImScenario, scaled: bool = True) -> SimTrace:
    """
    Integrate only the IM ground truth (no filters, no channels).

    With ``scaled=False`` the physical-coordinate model is integrated from
    the equivalent initial state; the returned columns are always physical
    (currents in A, fluxes in Wb), so the two runs are directly comparable.
    """
    p = sc.params
    dt = sc.dt_sim
    n_steps = int(round(sc.t_end / dt))
    n_sub = int(round(sc.trace_dt / dt))
    n_trace = n_steps // n_sub + 1
    freq, load = sc.freq_profile, sc.load_profile
    rates = im_rates(p) if scaled else im_rates_unscaled(p)
    kr, L_sig = p.k_r, p.L_sigma
    s_i = L_sig if scaled else 1.0
    s_p = kr if scaled else 1.0

    def voltage(t):
        w_cmd = freq.value(t)
        phase = freq.integral(t)
        amp = sc.voltage_amplitude(w_cmd)
        return amp * math.cos(phase), amp * math.sin(phase)

    ia = ib = pa = pb = we = 0.0
    cols = {name: np.zeros(n_trace) for name in
            ("t", "i_sa", "i_sb", "psi_ra", "psi_rb", "omega_e", "T_r")}
    for s in range(n_steps + 1):
        t = s * dt
        Tr = load.value(t)
        if s % n_sub == 0:
            k = s // n_sub
            cols["t"][k] = t
            cols["i_sa"][k] = ia / s_i
            cols["i_sb"][k] = ib / s_i
            cols["psi_ra"][k] = pa / s_p
            cols["psi_rb"][k] = pb / s_p
            cols["omega_e"][k] = we
            cols["T_r"][k] = Tr
        if s < n_steps:
            h = dt
            va, vb = voltage(t)
            vam, vbm = voltage(t + 0.5 * h)
            va2, vb2 = voltage(t + h)
            k1 = rates(ia, ib, pa, pb, we, Tr, va, vb)
            k2 = rates(ia + 0.5 * h * k1[0], ib + 0.5 * h * k1[1],
                       pa + 0.5 * h * k1[2], pb + 0.5 * h * k1[3],
                       we + 0.5 * h * k1[4], Tr, vam, vbm)
            k3 = rates(ia + 0.5 * h * k2[0], ib + 0.5 * h * k2[1],
                       pa + 0.5 * h * k2[2], pb + 0.5 * h * k2[3],
                       we + 0.5 * h * k2[4], Tr, vam, vbm)
            k4 = rates(ia + h * k3[0], ib + h * k3[1], pa + h * k3[2],
                       pb + h * k3[3], we + h * k3[4], Tr, va2, vb2)
            ia += (h / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            ib += (h / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            pa += (h / 6.0) * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
            pb += (h / 6.0) * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3])
            we += (h / 6.0) * (k1[4] + 2 * k2[4] + 2 * k3[4] + k4[4])
    meta = {"machine": "im", "scaled": scaled, "dt_sim": dt,
            "trace_dt": sc.trace_dt, "t_end": sc.t_end}
    return SimTrace(columns=cols, meta=meta)


# ---------------------------------------------------------------------------
# WRSM scenario


def run_wrsm_scenario(sc: WrsmScenario) -> SimTrace:
    """Simulate the WRSM scenario; returns the trace on the filter grid."""
    started = time.perf_counter()
    p = sc.params
    machine = SynchronousMachine(p)
    dt = sc.dt_sim
    n_steps = int(round(sc.t_end / dt))
    n_sub = int(round(sc.trace_dt / dt))
    if abs(n_sub * dt - sc.trace_dt) > 1e-12:
        raise ValueError("trace_dt must be an integer multiple of dt_sim")
    n_trace = n_steps // n_sub + 1

    speed = sc.speed_profile
    i_f_ref_profile = sc.i_f_profile
    rates = wrsm_current_rates(p)

    # PI gains from pole placement on the decoupled loops
    pi_d = PiController(sc.bw_dq * p.L_d, sc.bw_dq * p.R_s,
                        -sc.v_limit, sc.v_limit, integral=p.R_s * sc.i_d_ref)
    pi_q = PiController(sc.bw_dq * p.L_q, sc.bw_dq * p.R_s,
                        -sc.v_limit, sc.v_limit, integral=p.R_s * sc.i_q_ref)
    i_f0 = i_f_ref_profile.value(0.0)
    pi_f = PiController(sc.bw_f * p.L_f, sc.bw_f * p.R_f,
                        -sc.v_limit, sc.v_limit,
                        integral=0.0 if sc.field_feedforward else p.R_f * i_f0)

    # plant starts settled at the setpoints
    theta0 = speed.integral(0.0)
    iab0 = park([sc.i_d_ref, sc.i_q_ref], theta0, "to_ab")
    ia, ib, i_f = float(iab0[0]), float(iab0[1]), i_f0

    ekf = None
    if sc.run_ekf:
        x0_est = np.array([ia, ib, i_f, 0.0, theta0 + sc.theta0_error])
        cfg = EkfConfig(Q=np.diag(sc.ekf_q_diag), R=np.diag(sc.ekf_r_diag),
                        P0=np.diag(sc.ekf_p0_diag), x0=x0_est, Ts=sc.trace_dt)
        ekf = make_ekf(machine, cfg)

    rng = np.random.default_rng(sc.seed) if sc.noise_std > 0 else None

    cols = {name: np.zeros(n_trace) for name in (
        "t", "omega", "theta", "i_sa", "i_sb", "i_f", "i_sd", "i_sq",
        "v_sa", "v_sb", "v_f", "i_d_ref", "i_q_ref", "i_f_ref", "pi_saturated",
        "psi_od", "psi_oq", "theta_o", "omega_o", "margin", "det_sm", "ratio",
        "ekf_theta", "ekf_omega", "ekf_i_sa", "ekf_i_sb", "ekf_i_f",
        "theta_err", "omega_err", "innov_a", "innov_b", "innov_f")}

    # filtered vector-angle velocity state
    theta_o_prev = None
    theta_o_unwrapped = 0.0
    omega_o_filt = 0.0
    alpha = dt / (sc.omega_o_filter_tau + dt)

    u_prev_trace = None
    p_asym_max = 0.0
    p_eig_ratio_min = math.inf
    ekf_steps = 0

    sD_LD = p.sigma_delta * p.L_delta
    LD, Mf = p.L_delta, p.M_f

    for s in range(n_steps + 1):
        t = s * dt
        w = speed.value(t)
        th = speed.integral(t)
        c1, s1 = math.cos(th), math.sin(th)
        i_d = c1 * ia + s1 * ib
        i_q = -s1 * ia + c1 * ib

        # controller (runs every integration step)
        i_f_ref = i_f_ref_profile.value(t)
        v_d = pi_d.update(sc.i_d_ref - i_d, dt)
        v_q = pi_q.update(sc.i_q_ref - i_q, dt)
        v_f = pi_f.update(i_f_ref - i_f, dt)
        if sc.field_feedforward:
            v_f += p.R_f * i_f_ref + p.L_f * i_f_ref_profile.derivative(t)
        va = c1 * v_d - s1 * v_q
        vb = s1 * v_d + c1 * v_q
        saturated = pi_d.saturated or pi_q.saturated or pi_f.saturated

        # observability-vector angle tracking at the integration rate
        psi_od = LD * i_d + Mf * i_f
        psi_oq = sD_LD * i_q
        if psi_od != 0.0 or psi_oq != 0.0:
            th_o = math.atan2(psi_oq, psi_od)
            if theta_o_prev is not None:
                delta = th_o - theta_o_prev
                delta = (delta + math.pi) % (2.0 * math.pi) - math.pi
                theta_o_unwrapped += delta
                omega_o_filt += alpha * (delta / dt - omega_o_filt)
            theta_o_prev = th_o

        if s % n_sub == 0:
            k = s // n_sub
            y = np.array([ia, ib, i_f])
            if rng is not None:
                y = y + rng.normal(0.0, sc.noise_std, 3)
            innov = np.full(3, math.nan)
            if ekf is not None:
                if s > 0:
                    ekf = ekf_predict(ekf, u_prev_trace)
                    ekf, innov = ekf_update(ekf, y)
                    ekf_steps += 1
                    asym = np.abs(ekf.P - ekf.P.T).max()
                    p_asym_max = max(p_asym_max, asym)
                    if ekf_steps % 100 == 0:
                        eig = np.linalg.eigvalsh(ekf.P)
                        p_eig_ratio_min = min(p_eig_ratio_min,
                                              eig[0] / max(eig[-1], 1e-300))
            # operating-point derivatives for the closed forms
            dia, dib, dif = rates(ia, ib, i_f, w, th, va, vb, v_f)
            did = (c1 * dia + s1 * dib) + w * i_q
            diq = (-s1 * dia + c1 * dib) - w * i_d
            det = sm_determinant(p, w, i_d, i_q, i_f, did, diq, dif)
            ratio = sm_condition_ratio(p, i_d, i_q, i_f)

            row = {
                "t": t, "omega": w, "theta": float(wrap_angle(th)),
                "i_sa": ia, "i_sb": ib, "i_f": i_f, "i_sd": i_d, "i_sq": i_q,
                "v_sa": va, "v_sb": vb, "v_f": v_f,
                "i_d_ref": sc.i_d_ref, "i_q_ref": sc.i_q_ref,
                "i_f_ref": i_f_ref, "pi_saturated": float(saturated),
                "psi_od": psi_od, "psi_oq": psi_oq,
                "theta_o": math.atan2(psi_oq, psi_od)
                    if (psi_od, psi_oq) != (0.0, 0.0) else math.nan,
                "omega_o": omega_o_filt,
                "margin": w - omega_o_filt,
                "det_sm": det, "ratio": ratio,
                "ekf_theta": float(wrap_angle(ekf.x[4])) if ekf else math.nan,
                "ekf_omega": ekf.x[3] if ekf else math.nan,
                "ekf_i_sa": ekf.x[0] if ekf else math.nan,
                "ekf_i_sb": ekf.x[1] if ekf else math.nan,
                "ekf_i_f": ekf.x[2] if ekf else math.nan,
                "theta_err": float(wrap_angle(ekf.x[4] - th)) if ekf else math.nan,
                "omega_err": (ekf.x[3] - w) if ekf else math.nan,
                "innov_a": innov[0], "innov_b": innov[1], "innov_f": innov[2],
            }
            for name, val in row.items():
                cols[name][k] = val
            u_prev_trace = np.array([va, vb, v_f])

        if s < n_steps:
            # RK4 on the currents; speed and position follow the profile
            h = dt
            tm = t + 0.5 * h
            t2 = t + h
            wm, thm = speed.value(tm), speed.integral(tm)
            w2, th2 = speed.value(t2), speed.integral(t2)
            k1 = rates(ia, ib, i_f, w, th, va, vb, v_f)
            k2 = rates(ia + 0.5 * h * k1[0], ib + 0.5 * h * k1[1],
                       i_f + 0.5 * h * k1[2], wm, thm, va, vb, v_f)
            k3 = rates(ia + 0.5 * h * k2[0], ib + 0.5 * h * k2[1],
                       i_f + 0.5 * h * k2[2], wm, thm, va, vb, v_f)
            k4 = rates(ia + h * k3[0], ib + h * k3[1], i_f + h * k3[2],
                       w2, th2, va, vb, v_f)
            ia += (h / 6.0) * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
            ib += (h / 6.0) * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
            i_f += (h / 6.0) * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])

    # windowed flag: violated where the recent |margin| never reached threshold
    width = max(int(round(sc.flag_window / sc.trace_dt)), 1)
    margin_max = rolling_abs_max(cols["margin"], width)
    violated = margin_max < sc.obs_threshold
    cols["obs_violated"] = violated.astype(float)

    meta = {
        "machine": "wrsm",
        "dt_sim": dt,
        "trace_dt": sc.trace_dt,
        "t_end": sc.t_end,
        "injection_windows": [list(wdw) for wdw in sc.injection_windows],
        "obs_threshold": sc.obs_threshold,
        "flag_window": sc.flag_window,
        "theta0_error": sc.theta0_error,
        "ekf_steps": ekf_steps,
        "ekf_p_max_asym": p_asym_max,
        "ekf_p_min_eig_ratio": p_eig_ratio_min if ekf_steps else math.nan,
        "pi_saturated_samples": int(np.sum(cols["pi_saturated"] > 0)),
        "wall_time_s": time.perf_counter() - started,
    }
    return SimTrace(columns=cols, meta=meta)


# ---------------------------------------------------------------------------
# IM scenario


def _im_ekf_config(sc: ImScenario, machine: InductionMachine,
                   speed_measured: bool) -> EkfConfig:
    """Physical-unit tuning mapped into scaled coordinates.

    The Q diagonal is a continuous-time noise intensity; the discrete
    per-step covariance is Q*Ts. Covariances pick up the square of the
    state scaling.
    """
    S = machine.scale_vector
    Q = np.diag(np.asarray(sc.ekf_q_diag_phys) * sc.trace_dt * S**2)
    if speed_measured:
        R = np.diag([sc.ekf_r_current_phys * S[0]**2,
                     sc.ekf_r_current_phys * S[1]**2, sc.ekf_r_speed])
    else:
        R = np.diag([sc.ekf_r_current_phys * S[0]**2,
                     sc.ekf_r_current_phys * S[1]**2])
    P0 = np.diag(sc.ekf_p0_phys * S**2)
    x0 = np.asarray(sc.x0_est_phys, float) * S
    return EkfConfig(Q=Q, R=R, P0=P0, x0=x0, Ts=sc.trace_dt)


def run_im_scenario(sc: ImScenario) -> SimTrace:
    """Simulate the IM scenario with both filters; trace on the filter grid."""
    started = time.perf_counter()
    p = sc.params
    machine = InductionMachine(p)
    dt = sc.dt_sim
    n_steps = int(round(sc.t_end / dt))
    n_sub = int(round(sc.trace_dt / dt))
    if abs(n_sub * dt - sc.trace_dt) > 1e-12:
        raise ValueError("trace_dt must be an integer multiple of dt_sim")
    n_trace = n_steps // n_sub + 1

    freq = sc.freq_profile
    load = sc.load_profile
    rates = im_rates(p)
    kr = p.k_r
    L_sig = p.L_sigma
    torque_gain = p.p / L_sig   # T_m from scaled cross product

    def voltage(t: float):
        w_cmd = freq.value(t)
        phase = freq.integral(t)
        amp = sc.voltage_amplitude(w_cmd)
        return amp * math.cos(phase), amp * math.sin(phase)

    ia = ib = pa = pb = we = 0.0
    Tr = load.value(0.0)

    filters = {}
    if sc.run_ekf:
        filters["spd"] = make_ekf(machine, _im_ekf_config(sc, machine, True),
                                  speed_measured=True)
        filters["sl"] = make_ekf(machine, _im_ekf_config(sc, machine, False),
                                 speed_measured=False)

    rng = np.random.default_rng(sc.seed) if sc.noise_std > 0 else None

    base_cols = ["t", "omega_s_cmd", "v_sa", "v_sb", "T_load",
                 "i_sa", "i_sb", "psi_ra", "psi_rb", "omega_e", "T_r",
                 "T_m", "psi_rd", "omega_s", "im_cond",
                 "det_with_speed", "det_sensorless", "line_distance"]
    est_cols = []
    for tag in ("spd", "sl"):
        est_cols += [f"{tag}_i_sa", f"{tag}_i_sb", f"{tag}_psi_ra",
                     f"{tag}_psi_rb", f"{tag}_omega_e", f"{tag}_T_r",
                     f"{tag}_flux_err", f"{tag}_innov_a", f"{tag}_innov_b"]
    est_cols.append("spd_innov_w")
    cols = {name: np.zeros(n_trace) for name in base_cols + est_cols}

    # stator-flux-frequency estimate from the rotor flux angle
    ang_prev = None
    omega_s_filt = 0.0
    alpha = dt / (sc.omega_s_filter_tau + dt)

    u_prev_trace = None
    p_asym_max = 0.0
    p_eig_ratio_min = math.inf
    ekf_steps = 0

    for s in range(n_steps + 1):
        t = s * dt
        Tr = load.value(t)
        va, vb = voltage(t)

        if ang_prev is not None or (pa, pb) != (0.0, 0.0):
            ang = math.atan2(pb, pa)
            if ang_prev is not None:
                delta = ang - ang_prev
                delta = (delta + math.pi) % (2.0 * math.pi) - math.pi
                omega_s_filt += alpha * (delta / dt - omega_s_filt)
            ang_prev = ang

        if s % n_sub == 0:
            k = s // n_sub
            y_currents = np.array([ia, ib])
            if rng is not None:
                y_currents = y_currents + rng.normal(
                    0.0, sc.noise_std * L_sig, 2)
            x_true = np.array([ia, ib, pa, pb, we, Tr])
            xdot = np.array(rates(ia, ib, pa, pb, we, Tr, va, vb) + (0.0,))
            T_m = torque_gain * (ib * pa - ia * pb)
            psi_rd = math.hypot(pa, pb) / kr
            det_spd = im_determinant(p, "with_speed", x_true, xdot)
            det_sl = im_determinant(p, "sensorless", x_true, xdot)
            cond = im_condition(p, we, xdot[4], omega_s_filt)
            if psi_rd > 1e-9:
                line_dist = we + slip_frequency(p, T_m, psi_rd)
            else:
                line_dist = math.nan

            row = {
                "t": t, "omega_s_cmd": freq.value(t), "v_sa": va, "v_sb": vb,
                "T_load": Tr, "i_sa": ia / L_sig, "i_sb": ib / L_sig,
                "psi_ra": pa / kr, "psi_rb": pb / kr, "omega_e": we, "T_r": Tr,
                "T_m": T_m, "psi_rd": psi_rd, "omega_s": omega_s_filt,
                "im_cond": cond, "det_with_speed": det_spd,
                "det_sensorless": det_sl, "line_distance": line_dist,
            }

            flux_mag = max(math.hypot(pa, pb), 1e-12)
            for tag, speed_measured in (("spd", True), ("sl", False)):
                if tag not in filters:
                    for name in est_cols:
                        row.setdefault(name, math.nan)
                    continue
                inst = filters[tag]
                if s > 0:
                    inst = ekf_predict(inst, u_prev_trace)
                    y = np.array([y_currents[0], y_currents[1], we]) \
                        if speed_measured else y_currents
                    inst, innov = ekf_update(inst, y)
                    filters[tag] = inst
                    ekf_steps += 1
                    p_asym_max = max(p_asym_max,
                                     np.abs(inst.P - inst.P.T).max())
                    if ekf_steps % 100 == 0:
                        eig = np.linalg.eigvalsh(inst.P)
                        p_eig_ratio_min = min(p_eig_ratio_min,
                                              eig[0] / max(eig[-1], 1e-300))
                else:
                    innov = np.full(3 if speed_measured else 2, math.nan)
                xe = inst.x
                flux_err = math.hypot(xe[2] - pa, xe[3] - pb) / flux_mag
                row[f"{tag}_i_sa"] = xe[0] / L_sig
                row[f"{tag}_i_sb"] = xe[1] / L_sig
                row[f"{tag}_psi_ra"] = xe[2] / kr
                row[f"{tag}_psi_rb"] = xe[3] / kr
                row[f"{tag}_omega_e"] = xe[4]
                row[f"{tag}_T_r"] = xe[5]
                row[f"{tag}_flux_err"] = flux_err
                row[f"{tag}_innov_a"] = innov[0]
                row[f"{tag}_innov_b"] = innov[1]
                if speed_measured:
                    row["spd_innov_w"] = innov[2] if innov.size > 2 else math.nan

            for name, val in row.items():
                cols[name][k] = val
            u_prev_trace = np.array([va, vb])

        if s < n_steps:
            h = dt
            tm, t2 = t + 0.5 * h, t + h
            vam, vbm = voltage(tm)
            va2, vb2 = voltage(t2)
            k1 = rates(ia, ib, pa, pb, we, Tr, va, vb)
            k2 = rates(ia + 0.5 * h * k1[0], ib + 0.5 * h * k1[1],
                       pa + 0.5 * h * k1[2], pb + 0.5 * h * k1[3],
                       we + 0.5 * h * k1[4], Tr, vam, vbm)
            k3 = rates(ia + 0.5 * h * k2[0], ib + 0.5 * h * k2[1],
                       pa + 0.5 * h * k2[2], pb + 0.5 * h * k2[3],
                       we + 0.5 * h * k2[4], Tr, vam, vbm)
            k4 = rates(ia + h * k3[0], ib + h * k3[1], pa + h * k3[2],
                       pb + h * k3[3], we + h * k3[4], Tr, va2, vb2)
            ia += (h / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            ib += (h / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            pa += (h / 6.0) * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
            pb += (h / 6.0) * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3])
            we += (h / 6.0) * (k1[4] + 2 * k2[4] + 2 * k3[4] + k4[4])

    width = max(int(round(sc.flag_window / sc.trace_dt)), 1)
    cond_max = rolling_abs_max(cols["im_cond"], width)
    cols["obs_violated"] = (cond_max < sc.obs_threshold).astype(float)

    meta = {
        "machine": "im",
        "dt_sim": dt,
        "trace_dt": sc.trace_dt,
        "t_end": sc.t_end,
        "dwell": list(sc.dwell),
        "obs_threshold": sc.obs_threshold,
        "flag_window": sc.flag_window,
        "ekf_steps": ekf_steps,
        "ekf_p_max_asym": p_asym_max,
        "ekf_p_min_eig_ratio": p_eig_ratio_min if ekf_steps else math.nan,
        "wall_time_s": time.perf_counter() - started,
    }
    return SimTrace(columns=cols, meta=meta)
