"""
KKT system assembly for TPF, TPIA-L2 and TPIA-L1.

Constraint rows c(x) (2n + 6 of them):

    KCL_R = G V_R - B V_I + I_R(V) - S I_s,R
    KCL_I = B V_R + G V_I + I_I(V) - S I_s,I
    Vset  = S^T V - V_slack

S maps the three slack sources onto their node-phase rows. TPIA adds the
infeasibility currents as injections on the subset rows (c(x) - E i_f = 0)
and wraps the constraints with the optimality conditions of its objective.
"""

from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse

from src.model import NetworkModel
from src.stamp import COLLAPSE_FLOOR, AdmittanceMatrices, LoadCurrent, load_current, load_hessian, stamp_linear

from .errors import NonInteriorIterateError
from .variables import (
    SLACK_SOURCES,
    DualVars,
    InfeasibilityVars,
    SolveMode,
    StateVector,
    VariableIndex,
    build_index,
)

NetworkLike = Union[NetworkModel, AdmittanceMatrices]


@dataclass
class KktSystem:
    """One Newton iteration: sparse coefficient matrix, residual and variable map."""
    matrix: sparse.csr_matrix
    residual: np.ndarray
    index: Optional[VariableIndex] = None
    mode: Optional[SolveMode] = None

    def __post_init__(self):
        self.matrix = sparse.csr_matrix(self.matrix)
        self.residual = np.asarray(self.residual, dtype=float)
        if self.index is None:
            self.index = VariableIndex()
            self.index.add("x", [f"x[{k}]" for k in range(self.matrix.shape[1])])

    @property
    def residual_norm(self) -> float:
        return float(np.max(np.abs(self.residual))) if self.residual.size else 0.0

    def block(self, name: str) -> np.ndarray:
        """Residual rows belonging to a named block of equations."""
        return self.residual[self.index.slice(name)]


@dataclass
class KktAudit:
    """
    Max violation of each unperturbed KKT condition at an iterate.

    Conditions that do not apply to the formulation stay at 0.
    """
    primal_feasibility: float = 0.0
    stationarity_voltage: float = 0.0
    stationarity_if: float = 0.0
    primal_inequality: float = 0.0
    dual_inequality: float = 0.0
    complementarity: float = 0.0
    violated_nodes: List[str] = field(default_factory=list)

    def max_violation(self) -> float:
        return max(
            self.primal_feasibility,
            self.stationarity_voltage,
            self.stationarity_if,
            self.primal_inequality,
            self.dual_inequality,
            self.complementarity,
        )

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict) -> "KktAudit":
        return cls(**data)


def _as_admittance(network: NetworkLike) -> AdmittanceMatrices:
    if isinstance(network, AdmittanceMatrices):
        return network
    return stamp_linear(network)


class KktAssembler:
    """
    Assembles residuals and Jacobians for one stamped network and subset.

    Args:
        network: Network model or already-stamped matrices
        subset_rows: Node-phase rows carrying infeasibility sources
            (default: every row outside the slack bus)
        collapse_floor: Minimum |V|^2 at loaded node-phases
    """

    def __init__(
        self,
        network: NetworkLike,
        subset_rows: Optional[Sequence[int]] = None,
        collapse_floor: float = COLLAPSE_FLOOR,
    ):
        self.admittance = _as_admittance(network)
        adm = self.admittance
        self.n = adm.n
        self.collapse_floor = collapse_floor

        if subset_rows is None:
            slack = set(adm.slack_rows.tolist())
            subset_rows = [k for k in range(self.n) if k not in slack]
        self.subset_rows = np.array(sorted(set(int(k) for k in subset_rows)), dtype=int)
        s = self.subset_rows.size

        self._slack_map = sparse.csr_matrix(
            (np.ones(SLACK_SOURCES), (adm.slack_rows, np.arange(SLACK_SOURCES))),
            shape=(self.n, SLACK_SOURCES),
        )
        selector = sparse.csr_matrix(
            (np.ones(s), (self.subset_rows, np.arange(s))), shape=(self.n, s)
        )
        empty = sparse.csr_matrix((SLACK_SOURCES, s))
        # Injection map of [i_f,R; i_f,I] onto the constraint rows
        self.injection = sparse.bmat([
            [selector, None],
            [None, selector],
            [empty, None],
            [None, empty],
        ]).tocsr()
        identity = sparse.identity(s, format="csr")
        split = sparse.bmat([[identity, -identity, None, None], [None, None, identity, -identity]])
        # Injection map of the L1 split sources [R+; R-; I+; I-]
        self.split_injection = (self.injection @ split).tocsr()

        self._indices: Dict[SolveMode, VariableIndex] = {}

    @property
    def rows(self) -> int:
        """Number of constraint rows (= primal state size)."""
        return 2 * self.n + 2 * SLACK_SOURCES

    @property
    def subset_size(self) -> int:
        return int(self.subset_rows.size)

    def index(self, mode: SolveMode) -> VariableIndex:
        mode = SolveMode(mode)
        if mode not in self._indices:
            self._indices[mode] = build_index(mode, self.admittance.labels, self.subset_rows)
        return self._indices[mode]

    # Constraint evaluation

    def load_currents(self, state: StateVector) -> LoadCurrent:
        adm = self.admittance
        return load_current(state.v_r, state.v_i, adm.load_p, adm.load_q, adm.labels, self.collapse_floor)

    def constraints(self, state: StateVector, currents: Optional[LoadCurrent] = None) -> np.ndarray:
        """KCL and slack set-point residuals c(x)."""
        adm = self.admittance
        lc = currents or self.load_currents(state)
        kcl_r = adm.G @ state.v_r - adm.B @ state.v_i + lc.i_r - self._slack_map @ state.is_r
        kcl_i = adm.B @ state.v_r + adm.G @ state.v_i + lc.i_i - self._slack_map @ state.is_i
        set_r = state.v_r[adm.slack_rows] - adm.slack_voltage.real
        set_i = state.v_i[adm.slack_rows] - adm.slack_voltage.imag
        return np.concatenate([kcl_r, kcl_i, set_r, set_i])

    def jacobian(self, state: StateVector, currents: Optional[LoadCurrent] = None) -> sparse.csr_matrix:
        """Exact Jacobian of c(x) w.r.t. [V_R, V_I, I_s,R, I_s,I]."""
        adm = self.admittance
        lc = currents or self.load_currents(state)
        s_map = self._slack_map
        return sparse.bmat([
            [adm.G + sparse.diags(lc.di_r_dvr), -adm.B + sparse.diags(lc.di_r_dvi), -s_map, None],
            [adm.B + sparse.diags(lc.di_i_dvr), adm.G + sparse.diags(lc.di_i_dvi), None, -s_map],
            [s_map.T, None, None, None],
            [None, s_map.T, None, None],
        ]).tocsr()

    def hessian(self, state: StateVector, duals: DualVars) -> sparse.csr_matrix:
        """Second-order term sum_k lambda_k * hess(c_k); only loads contribute."""
        adm = self.admittance
        h_rr, h_ri = load_hessian(
            state.v_r, state.v_i, adm.load_p, adm.load_q, duals.lam_r, duals.lam_i
        )
        voltage_block = sparse.bmat([
            [sparse.diags(h_rr), sparse.diags(h_ri)],
            [sparse.diags(h_ri), sparse.diags(-h_rr)],
        ])
        return sparse.block_diag(
            (voltage_block, sparse.csr_matrix((2 * SLACK_SOURCES, 2 * SLACK_SOURCES)))
        ).tocsr()

    def voltage_shift(self, mode: SolveMode) -> sparse.csr_matrix:
        """Identity on the V_R, V_I rows of the full unknown vector, zero elsewhere."""
        diagonal = np.zeros(self.index(mode).size)
        diagonal[:2 * self.n] = 1.0
        return sparse.diags(diagonal).tocsr()

    # Initial point

    def balance_slack(self, state: StateVector) -> StateVector:
        """Copy of state with slack currents set to close KCL at the slack rows."""
        balanced = state.copy()
        balanced.is_r = np.zeros(SLACK_SOURCES)
        balanced.is_i = np.zeros(SLACK_SOURCES)
        c = self.constraints(balanced)
        rows = self.admittance.slack_rows
        balanced.is_r = c[rows]
        balanced.is_i = c[self.n + rows]
        return balanced

    def initial_point(
        self,
        mode: SolveMode,
        state: StateVector,
        initial_current: float = 1e-3,
        initial_dual: float = 1.0,
    ) -> Tuple[InfeasibilityVars, DualVars]:
        """
        Starting infeasibility currents and duals.

        Sources start at the KCL mismatch of the initial state. L2 sets
        lambda equal to it; L1 uses a scaled copy inside (-1, 1) with the
        split sources offset by initial_current and mu = initial_dual * (1 -+ lambda).

        Args:
            mode: Formulation
            state: Initial state (slack currents already balanced)
            initial_current: L1 offset keeping every split source positive
            initial_dual: L1 inequality dual scale

        Returns:
            Tuple[InfeasibilityVars, DualVars]: Starting point
        """
        mode = SolveMode(mode)
        s = self.subset_size
        if mode == SolveMode.TPF:
            return InfeasibilityVars.zeros(mode, 0), DualVars(np.zeros(0))

        c = self.constraints(state)
        mismatch_r = c[self.subset_rows]
        mismatch_i = c[self.n + self.subset_rows]
        lam = np.zeros(self.rows)

        if mode == SolveMode.L2:
            lam[self.subset_rows] = mismatch_r
            lam[self.n + self.subset_rows] = mismatch_i
            return InfeasibilityVars(mode, np.concatenate([mismatch_r, mismatch_i])), DualVars(lam)

        scale = max(np.max(np.abs(mismatch_r), initial=0.0), np.max(np.abs(mismatch_i), initial=0.0))
        lam_r = 0.9 * mismatch_r / scale if scale > 0 else np.zeros(s)
        lam_i = 0.9 * mismatch_i / scale if scale > 0 else np.zeros(s)
        lam[self.subset_rows] = lam_r
        lam[self.n + self.subset_rows] = lam_i

        components = np.concatenate([
            np.maximum(mismatch_r, 0.0),
            np.maximum(-mismatch_r, 0.0),
            np.maximum(mismatch_i, 0.0),
            np.maximum(-mismatch_i, 0.0),
        ]) + initial_current
        mu = initial_dual * np.concatenate([1.0 - lam_r, 1.0 + lam_r, 1.0 - lam_i, 1.0 + lam_i])
        return InfeasibilityVars(mode, components), DualVars(lam, mu)

    # Assembly

    def assemble_tpf(self, state: StateVector) -> KktSystem:
        lc = self.load_currents(state)
        return KktSystem(self.jacobian(state, lc), self.constraints(state, lc), self.index(SolveMode.TPF), SolveMode.TPF)

    def assemble_l2(self, state: StateVector, infeas: InfeasibilityVars, duals: DualVars) -> KktSystem:
        """
        Least-squares KKT system in unknowns (x, i_f, lambda).

        Rows: J^T lambda = 0; i_f - E^T lambda = 0; c(x) - E i_f = 0.
        """
        lc = self.load_currents(state)
        jac = self.jacobian(state, lc)
        c = self.constraints(state, lc)
        lam = duals.lam
        i_f = infeas.components
        e = self.injection

        residual = np.concatenate([jac.T @ lam, i_f - e.T @ lam, c - e @ i_f])
        matrix = sparse.bmat([
            [self.hessian(state, duals), None, jac.T],
            [None, sparse.identity(e.shape[1]), -e.T],
            [jac, -e, None],
        ])
        return KktSystem(matrix, residual, self.index(SolveMode.L2), SolveMode.L2)

    def assemble_l1(self, state: StateVector, infeas: InfeasibilityVars, duals: DualVars, eps: float) -> KktSystem:
        """
        Split-source L1 system in unknowns (x, z, lambda, mu) with z = [R+; R-; I+; I-].

        Rows: J^T lambda = 0; 1 - E_z^T lambda - mu = 0; c(x) - E_z z = 0;
        mu * z = eps per pair.

        Raises:
            NonInteriorIterateError: If any z or mu is not strictly positive
        """
        z = infeas.components
        mu = duals.mu
        index = self.index(SolveMode.L1)
        for name, values in (("infeas", z), ("mu", mu)):
            bad = np.flatnonzero(~(values > 0))
            if bad.size:
                label = index.label(index.slice(name).start + int(bad[0]))
                raise NonInteriorIterateError(f"Iterate is not interior: {label} = {values[bad[0]]:.3e}", label)

        lc = self.load_currents(state)
        jac = self.jacobian(state, lc)
        c = self.constraints(state, lc)
        lam = duals.lam
        e_z = self.split_injection

        residual = np.concatenate([
            jac.T @ lam,
            1.0 - e_z.T @ lam - mu,
            c - e_z @ z,
            mu * z - eps,
        ])
        matrix = sparse.bmat([
            [self.hessian(state, duals), None, jac.T, None],
            [None, None, -e_z.T, -sparse.identity(z.size)],
            [jac, -e_z, None, None],
            [None, sparse.diags(mu), None, sparse.diags(z)],
        ])
        return KktSystem(matrix, residual, index, SolveMode.L1)

    def assemble(
        self,
        mode: SolveMode,
        state: StateVector,
        infeas: InfeasibilityVars,
        duals: DualVars,
        eps: float = 0.0,
    ) -> KktSystem:
        mode = SolveMode(mode)
        if mode == SolveMode.TPF:
            return self.assemble_tpf(state)
        if mode == SolveMode.L2:
            return self.assemble_l2(state, infeas, duals)
        return self.assemble_l1(state, infeas, duals, eps)

    # Audit

    def audit(
        self,
        mode: SolveMode,
        state: StateVector,
        infeas: InfeasibilityVars,
        duals: DualVars,
        tolerance: float = 1e-6,
    ) -> KktAudit:
        """
        Evaluate the unperturbed KKT conditions at an iterate.

        A bus is listed in violated_nodes when one of its KCL or voltage
        stationarity rows exceeds 10x tolerance.
        """
        mode = SolveMode(mode)
        adm = self.admittance
        n = self.n
        lc = self.load_currents(state)
        c = self.constraints(state, lc)
        audit = KktAudit()
        limit = 10.0 * tolerance

        if mode == SolveMode.TPF:
            primal = c
            stationarity = np.zeros_like(c)
        else:
            injection = self.injection if mode == SolveMode.L2 else self.split_injection
            primal = c - injection @ infeas.components
            stationarity = self.jacobian(state, lc).T @ duals.lam
            audit.stationarity_voltage = float(np.max(np.abs(stationarity)))
            if mode == SolveMode.L2:
                gap = infeas.components - self.injection.T @ duals.lam
            else:
                z, mu = infeas.components, duals.mu
                gap = 1.0 - self.split_injection.T @ duals.lam - mu
                audit.primal_inequality = float(max(0.0, -np.min(z, initial=0.0)))
                audit.dual_inequality = float(max(0.0, -np.min(mu, initial=0.0)))
                audit.complementarity = float(np.max(np.abs(mu * z), initial=0.0))
            audit.stationarity_if = float(np.max(np.abs(gap), initial=0.0))

        audit.primal_feasibility = float(np.max(np.abs(primal)))

        worst = np.maximum(np.abs(primal[:n]), np.abs(primal[n:2 * n]))
        worst = np.maximum(worst, np.maximum(np.abs(stationarity[:n]), np.abs(stationarity[n:2 * n])))
        audit.violated_nodes = sorted({adm.bus_of_row(k) for k in np.flatnonzero(worst > limit)})
        return audit


def assemble_tpf(network: NetworkLike, state: StateVector) -> KktSystem:
    """Power-flow residual and Jacobian at state."""
    return KktAssembler(network).assemble_tpf(state)


def assemble_kkt_l2(
    network: NetworkLike,
    state: StateVector,
    infeas: InfeasibilityVars,
    duals: DualVars,
    subset_rows: Optional[Sequence[int]] = None,
) -> KktSystem:
    """Least-squares TPIA KKT system at an iterate."""
    return KktAssembler(network, subset_rows).assemble_l2(state, infeas, duals)


def assemble_kkt_l1(
    network: NetworkLike,
    state: StateVector,
    infeas: InfeasibilityVars,
    duals: DualVars,
    eps: float,
    subset_rows: Optional[Sequence[int]] = None,
) -> KktSystem:
    """L1 TPIA perturbed KKT system at an interior iterate."""
    return KktAssembler(network, subset_rows).assemble_l1(state, infeas, duals, eps)
