"""
Constant-PQ load currents and their exact derivatives.

For a wye load drawing S = P + jQ at V = V_R + jV_I the current leaving the
node is I = conj(S / V), i.e.

    I_R = (P V_R + Q V_I) / (V_R^2 + V_I^2)
    I_I = (P V_I - Q V_R) / (V_R^2 + V_I^2)

I is holomorphic in W = conj(V) = V_R - jV_I, so with f' = -conj(S)/W^2 and
f'' = 2 conj(S)/W^3 every first and second partial is a signed real or
imaginary part of f' or f''.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

# (V_R^2 + V_I^2) below this is treated as voltage collapse (per-unit^2)
COLLAPSE_FLOOR = 1e-8


class VoltageCollapseError(Exception):
    """Exception raised when a loaded node-phase voltage falls below the collapse floor."""

    def __init__(self, message: str, node: str, code: str = "voltage_collapse"):
        """
        Initialize collapse error.

        Args:
            message: Human-readable error message
            node: Label of the offending node-phase
            code: Machine-readable error code
        """
        super().__init__(message)
        self.message = message
        self.node = node
        self.code = code


@dataclass
class LoadCurrent:
    """Per node-phase load currents (per-unit) and their partials w.r.t. V_R, V_I."""
    i_r: np.ndarray
    i_i: np.ndarray
    di_r_dvr: np.ndarray
    di_r_dvi: np.ndarray
    di_i_dvr: np.ndarray
    di_i_dvi: np.ndarray


def _as_arrays(*values):
    return [np.atleast_1d(np.asarray(v, dtype=float)) for v in values]


def check_collapse(
    v_r: np.ndarray,
    v_i: np.ndarray,
    loaded: np.ndarray,
    labels: Optional[Sequence[str]] = None,
    floor: float = COLLAPSE_FLOOR,
) -> None:
    """
    Raise VoltageCollapseError if any loaded entry is below the floor.

    Args:
        v_r, v_i: Voltages (per-unit)
        loaded: Boolean mask of entries carrying load
        labels: Optional node-phase labels for the diagnostic
        floor: Collapse floor on V_R^2 + V_I^2
    """
    magnitude_sq = v_r ** 2 + v_i ** 2
    bad = np.flatnonzero(loaded & ~(magnitude_sq >= floor))
    if bad.size:
        k = int(bad[0])
        label = labels[k] if labels is not None else str(k)
        raise VoltageCollapseError(
            f"Voltage collapse at {label}: |V|^2 = {magnitude_sq[k]:.3e} below floor {floor:.1e}",
            node=label,
        )


def load_current(
    v_r,
    v_i,
    p,
    q,
    labels: Optional[Sequence[str]] = None,
    floor: float = COLLAPSE_FLOOR,
) -> LoadCurrent:
    """
    Evaluate load currents and exact first partials.

    Entries with P = Q = 0 return exact zeros and are exempt from the
    collapse check.

    Args:
        v_r, v_i: Node-phase voltages (per-unit), scalars or arrays
        p, q: Node-phase load power (per-unit), same shape
        labels: Optional labels used in the collapse diagnostic
        floor: Collapse floor on V_R^2 + V_I^2

    Returns:
        LoadCurrent: Currents and partials

    Raises:
        VoltageCollapseError: If a loaded entry violates the floor
    """
    v_r, v_i, p, q = _as_arrays(v_r, v_i, p, q)
    loaded = (p != 0) | (q != 0)
    check_collapse(v_r, v_i, loaded, labels, floor)

    zeros = np.zeros_like(v_r)
    i_r, i_i = zeros.copy(), zeros.copy()
    a, b = zeros.copy(), zeros.copy()

    if np.any(loaded):
        w = v_r[loaded] - 1j * v_i[loaded]
        s_conj = p[loaded] - 1j * q[loaded]
        current = s_conj / w
        first = -s_conj / w ** 2
        i_r[loaded] = current.real
        i_i[loaded] = current.imag
        a[loaded] = first.real
        b[loaded] = first.imag

    # dI/dV_R = f', dI/dV_I = -j f'
    return LoadCurrent(
        i_r=i_r,
        i_i=i_i,
        di_r_dvr=a,
        di_r_dvi=b,
        di_i_dvr=b.copy(),
        di_i_dvi=-a,
    )


def load_hessian(v_r, v_i, p, q, lam_r, lam_i):
    """
    Dual-weighted second derivatives of the load currents.

    Returns the entries of H = lam_r * hess(I_R) + lam_i * hess(I_I) for each
    node-phase; the 2x2 block is [[h_rr, h_ri], [h_ri, -h_rr]].

    Args:
        v_r, v_i: Voltages (per-unit)
        p, q: Load power (per-unit)
        lam_r, lam_i: Equality duals of the real/imaginary KCL rows

    Returns:
        Tuple[np.ndarray, np.ndarray]: (h_rr, h_ri)
    """
    v_r, v_i, p, q, lam_r, lam_i = _as_arrays(v_r, v_i, p, q, lam_r, lam_i)
    h_rr = np.zeros_like(v_r)
    h_ri = np.zeros_like(v_r)
    loaded = (p != 0) | (q != 0)
    if np.any(loaded):
        w = v_r[loaded] - 1j * v_i[loaded]
        second = 2.0 * (p[loaded] - 1j * q[loaded]) / w ** 3
        c, e = second.real, second.imag
        h_rr[loaded] = lam_r[loaded] * c + lam_i[loaded] * e
        h_ri[loaded] = lam_r[loaded] * e - lam_i[loaded] * c
    return h_rr, h_ri


def load_jacobian_check(v_r: float, v_i: float, p: float, q: float, h: float = 1e-6) -> float:
    """
    Compare analytic load-current partials with central differences.

    Args:
        v_r, v_i: Operating point (per-unit); must clear the collapse floor by more than h
        p, q: Load power (per-unit)
        h: Finite-difference step

    Returns:
        float: max over the four partials of |analytic - fd| / max(1, |analytic|)
    """
    def currents(vr, vi):
        lc = load_current(vr, vi, p, q)
        return lc.i_r[0], lc.i_i[0]

    analytic = load_current(v_r, v_i, p, q)
    ir_p, ii_p = currents(v_r + h, v_i)
    ir_m, ii_m = currents(v_r - h, v_i)
    ir_pi, ii_pi = currents(v_r, v_i + h)
    ir_mi, ii_mi = currents(v_r, v_i - h)

    pairs = [
        (analytic.di_r_dvr[0], (ir_p - ir_m) / (2 * h)),
        (analytic.di_i_dvr[0], (ii_p - ii_m) / (2 * h)),
        (analytic.di_r_dvi[0], (ir_pi - ir_mi) / (2 * h)),
        (analytic.di_i_dvi[0], (ii_pi - ii_mi) / (2 * h)),
    ]
    return max(abs(exact - approx) / max(1.0, abs(exact)) for exact, approx in pairs)
