"""State-dependent interactions and the self-consistency fixed point.

The classical flow is tracked through the finitely many scalars
g_j(t) = (evolved state)(e_{Psi_j, ell}) plus the evolved reduced state on
the self-consistency box; the full state-space automorphism is never
materialized (the approximating interaction consumes the flow only
through these scalars).

The fixed point is solved by plain Picard iteration on the whole node
grid: build the state-dependent interaction from the current scalar
trajectory (linear interpolation between nodes), propagate the initial
state under it, read off the new scalars, repeat.  On oscillation the
update is damped by 0.5.  Long intervals are handled by window chaining,
which is exactly the flow property inherited from the reverse cocycle.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dynamics import propagate, propagate_vector, heisenberg
from .errors import NonConvergenceError
from .fock import LocalOp
from .hamiltonians import TimeDependentHamiltonian, local_energy

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 30
DEFAULT_WINDOW = 0.1
DEFAULT_NODE_DT = 0.001


def sandwich(scalars, n):
    """Slot coefficients of |rho; Psi_1..Psi_n|: slot m gets prod_{j!=m} g_j.

    For n = 1 the single coefficient is 1 (the sandwich is Psi itself).
    """
    scalars = list(scalars)
    if len(scalars) != n:
        raise ValueError("need one scalar per tuple entry")
    if n == 1:
        return [1.0 + 0.0j]
    out = []
    for m in range(n):
        prod = 1.0 + 0.0j
        for j, g in enumerate(scalars):
            if j != m:
                prod *= g
        out.append(prod)
    return out


def approximating_interaction(model, slot_scalars, t=0.0, phi_scale=None,
                              atom_scales=None):
    """Phi^(m, xi)(t): the state-dependent short-range interaction.

    `model` is a LongRangeModel; `slot_scalars[(atom_idx, j)]` supplies
    xi(e_{Psi_j, ell}) for every tuple entry.  Optional scale overrides
    apply time-dependent coefficients (used by TimeDependentModel.at
    callers the scales default to 1).
    """
    total = model.phi if phi_scale is None else model.phi * phi_scale
    for ai, atom in enumerate(model.atoms):
        g = [slot_scalars[(ai, j)] for j in range(atom.order)]
        coeffs = sandwich(g, atom.order)
        w = atom.weight if atom_scales is None else atom.weight * atom_scales[ai]
        for m, c in enumerate(coeffs):
            total = total + (w * c) * atom.factors[m]
    return total


def effective_hamiltonian(td_model, times, scalars, slots, space):
    """Assembled U^(Phi^(m,g(.))) on `space` with linear scalar interpolation.

    times: node array; scalars: [n_nodes, n_slots] complex; slots: tuple of
    (atom_idx, slot_idx) naming the scalar columns.
    """
    times = np.asarray(times, float)
    scalars = np.asarray(scalars, complex)
    base = td_model.base
    col = {key: k for k, key in enumerate(slots)}
    # np.interp needs increasing abscissae; backward flows run t < s
    order = np.argsort(times)
    times_sorted = times[order]

    def interp_column(k):
        re = scalars[order, k].real.copy()
        im = scalars[order, k].imag.copy()

        def fn(t):
            return complex(
                np.interp(t, times_sorted, re), np.interp(t, times_sorted, im)
            )

        return fn

    col_fns = {key: interp_column(k) for key, k in col.items()}

    pieces = []
    u_phi = local_energy(base.phi, space).mat
    if u_phi.nnz:
        pieces.append((u_phi, td_model.phi_schedule))
    factor_cache = {}
    for ai, (atom, sched) in enumerate(zip(base.atoms, td_model.atom_schedules)):
        for m in range(atom.order):
            key = atom.factors[m].content_key()
            if key not in factor_cache:
                factor_cache[key] = local_energy(atom.factors[m], space).mat
            others = [col_fns[(ai, j)] for j in range(atom.order) if j != m]
            w = atom.weight

            def coeff(t, _w=w, _sched=sched, _others=tuple(others)):
                c = _w * _sched(t)
                for fn in _others:
                    c *= fn(t)
                return c

            pieces.append((factor_cache[key], coeff))
    return TimeDependentHamiltonian(space, pieces)


@dataclass
class FlowTrajectory:
    """Time-gridded record of the self-consistent flow."""

    times: np.ndarray
    scalars: np.ndarray            # [n_nodes, n_slots]
    slots: tuple                   # (atom_idx, slot_idx) per column
    states: list                   # evolved reduced states per node
    iterations: int
    defect: float
    converged: bool
    ell: tuple
    box_radius: int
    defect_history: list = field(default_factory=list)
    iteration_counts: list = field(default_factory=list)  # per window
    scalar_bound: float | None = None

    def scalar_at(self, t):
        """Linear interpolation of the scalar vector at time t."""
        order = np.argsort(self.times)
        ts = self.times[order]
        re = np.array(
            [np.interp(t, ts, self.scalars[order, k].real)
             for k in range(self.scalars.shape[1])]
        )
        im = np.array(
            [np.interp(t, ts, self.scalars[order, k].imag)
             for k in range(self.scalars.shape[1])]
        )
        return re + 1j * im

    def node_index(self, t):
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 + 1e-9 * abs(t):
            raise ValueError(f"time {t} is not a flow node")
        return k

    def max_scalar_magnitude(self):
        return float(np.abs(self.scalars).max()) if self.scalars.size else 0.0

    def csv_header(self):
        cols = ["t"]
        for ai, j in self.slots:
            cols.extend([f"re_g_a{ai}_f{j}", f"im_g_a{ai}_f{j}"])
        cols.append("iterations")
        return cols

    def csv_rows(self):
        rows = []
        for k, t in enumerate(self.times):
            row = [t]
            for c in range(self.scalars.shape[1]):
                row.extend([self.scalars[k, c].real, self.scalars[k, c].imag])
            row.append(self.iterations)
            rows.append(row)
        return rows

    def to_json_dict(self):
        return {
            "times": list(map(float, self.times)),
            "slots": [list(s) for s in self.slots],
            "scalars_re": self.scalars.real.tolist(),
            "scalars_im": self.scalars.imag.tolist(),
            "iterations": self.iterations,
            "iteration_counts": self.iteration_counts,
            "defect": self.defect,
            "defect_history": self.defect_history,
            "converged": self.converged,
            "ell": list(self.ell),
            "box_radius": self.box_radius,
            "scalar_bound_normF1": self.scalar_bound,
            "note": "scalars are flow expectations of unit-norm factor "
                    "energy densities; norms are box-restricted",
        }


def _slot_energy_ops(model, ell, space):
    """Embedded energy-density observables per (atom, slot), deduplicated."""
    slots = []
    ops = []
    cache = {}
    for ai, atom in enumerate(model.atoms):
        for j, f in enumerate(atom.factors):
            key = f.content_key()
            if key not in cache:
                e = f.energy_density(ell)
                cache[key] = space.embed(e.operator)
            slots.append((ai, j))
            ops.append(cache[key])
    return tuple(slots), ops


def _evolve_nodes(ham, space, s, times, state0):
    """Evolved copies of state0 at each node (pure or density path)."""
    if state0.is_pure:
        psis = propagate_vector(ham, space, s, times, state0.vector)
        return [("vector", psis[k]) for k in range(len(times))]
    space.require_dense()
    rho = state0.density.toarray()
    out = []
    w_prev = np.eye(space.dim, dtype=np.complex128)
    t_prev = s
    for t in times:
        if t != t_prev:
            step = propagate(ham, space, t_prev, t)
            w_prev = step.w @ w_prev
            t_prev = t
        out.append(("density", w_prev @ rho @ w_prev.conj().T))
    return out


def _node_expectations(node_states, ops):
    n_nodes = len(node_states)
    out = np.zeros((n_nodes, len(ops)), dtype=np.complex128)
    for k, (kind, st) in enumerate(node_states):
        for c, op in enumerate(ops):
            if kind == "vector":
                out[k, c] = np.vdot(st, op.mat @ st)
            else:
                out[k, c] = np.trace(op.mat @ st)
    return out


def solve_self_consistency(td_model, state0, s, t, n_nodes=None, tol=DEFAULT_TOL,
                           max_iter=DEFAULT_MAX_ITER, damping=1.0,
                           node_dt=DEFAULT_NODE_DT, decay=None):
    """Picard iteration for the flow on a single interval [s, t].

    Initializes g^0_k = rho0(e_j) for all nodes; each pass propagates the
    initial state under U^(Phi^(m, g^i)) and reads the new scalars.  Raises
    NonConvergenceError when max_iter passes leave the sup-defect above
    tol (subdivide the interval via `solve_self_consistency_windowed`).
    """
    space = state0.space
    ell = state0.ell
    if n_nodes is None:
        n_nodes = max(2, int(np.ceil(abs(t - s) / node_dt)) + 1)
    times = np.linspace(s, t, n_nodes) if t != s else np.array([s])
    slots, ops = _slot_energy_ops(td_model.base, ell, space)
    g0 = np.array([state0.expectation(op) for op in ops]) if ops else np.zeros(0)
    scalars = np.tile(g0, (len(times), 1)) if ops else np.zeros((len(times), 0))

    if t == s or not ops:
        ham = effective_hamiltonian(td_model, times, scalars, slots, space)
        node_states = _evolve_nodes(ham, space, s, times, state0)
        if ops:
            scalars = _node_expectations(node_states, ops)
        return FlowTrajectory(
            times, scalars, slots, node_states, 0 if t == s else 1, 0.0, True,
            ell.ell, space.box.radius,
            scalar_bound=decay.constants(space.box)[0] if decay else None,
        )

    defects = []
    beta = damping
    node_states = None
    for it in range(1, max_iter + 1):
        ham = effective_hamiltonian(td_model, times, scalars, slots, space)
        node_states = _evolve_nodes(ham, space, s, times, state0)
        new_scalars = _node_expectations(node_states, ops)
        defect = float(np.abs(new_scalars - scalars).max())
        defects.append(defect)
        if len(defects) >= 3 and defects[-1] > defects[-2] > defects[-3]:
            beta = min(beta, 0.5)
            log.debug("picard oscillation detected, damping to %.2f", beta)
        scalars = (1.0 - beta) * scalars + beta * new_scalars
        if defect <= tol:
            ham = effective_hamiltonian(td_model, times, scalars, slots, space)
            node_states = _evolve_nodes(ham, space, s, times, state0)
            scalars = _node_expectations(node_states, ops)
            return FlowTrajectory(
                times, scalars, slots, node_states, it, defect, True,
                ell.ell, space.box.radius, defect_history=defects,
                iteration_counts=[it],
                scalar_bound=decay.constants(space.box)[0] if decay else None,
            )
    raise NonConvergenceError(
        f"Picard did not reach tol={tol} in {max_iter} iterations "
        f"(last defect {defects[-1]:.3e}); the interval is too long for the "
        "contraction, subdivide via the flow property",
        defect=defects[-1],
        iterations=max_iter,
    )


def _clone_with_vector(state0, kind, payload):
    from .states import LatticeState

    if kind == "vector":
        return LatticeState(state0.space, state0.ell, vector=payload,
                           tag=state0.tag, verify=False)
    return LatticeState(state0.space, state0.ell, density=payload,
                        tag=state0.tag, verify=False)


def solve_self_consistency_windowed(td_model, state0, s, t, window=DEFAULT_WINDOW,
                                    tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER,
                                    damping=1.0, node_dt=DEFAULT_NODE_DT,
                                    decay=None):
    """Flow on [s, t] chained over windows of length <= `window`.

    Window chaining is the flow-composition property; each window restarts
    Picard from the previous window's final state.
    """
    if t == s:
        return solve_self_consistency(td_model, state0, s, t, tol=tol,
                                      max_iter=max_iter, node_dt=node_dt,
                                      decay=decay)
    n_win = max(1, int(np.ceil(abs(t - s) / window - 1e-12)))
    edges = np.linspace(s, t, n_win + 1)
    pieces = []
    cur = state0
    for k in range(n_win):
        traj = solve_self_consistency(
            td_model, cur, edges[k], edges[k + 1], tol=tol, max_iter=max_iter,
            damping=damping, node_dt=node_dt, decay=decay,
        )
        pieces.append(traj)
        kind, payload = traj.states[-1]
        cur = _clone_with_vector(cur, kind, payload)
    return _concat_trajectories(pieces)


def _concat_trajectories(pieces):
    first = pieces[0]
    times = [first.times]
    scalars = [first.scalars]
    states = list(first.states)
    iteration_counts = list(first.iteration_counts) or [first.iterations]
    defect = first.defect
    history = list(first.defect_history)
    for traj in pieces[1:]:
        times.append(traj.times[1:])
        scalars.append(traj.scalars[1:])
        states.extend(traj.states[1:])
        iteration_counts.extend(traj.iteration_counts or [traj.iterations])
        defect = max(defect, traj.defect)
        history.extend(traj.defect_history)
    return FlowTrajectory(
        np.concatenate(times),
        np.vstack(scalars),
        first.slots,
        states,
        max(iteration_counts),
        defect,
        all(p.converged for p in pieces),
        first.ell,
        first.box_radius,
        defect_history=history,
        iteration_counts=iteration_counts,
        scalar_bound=first.scalar_bound,
    )


def flow_hamiltonian(td_model, flow, space):
    """Effective Hamiltonian on `space` driven by a solved flow."""
    return effective_hamiltonian(td_model, flow.times, flow.scalars, flow.slots, space)


def effective_dynamics(td_model, flow, space, a, s, t):
    """tau^(Phi^(m, g(.)))_{t,s}(A) on `space` (dense propagator path)."""
    _check_flow_covers(flow, s, t)
    ham = flow_hamiltonian(td_model, flow, space)
    prop = propagate(ham, space, s, t)
    return heisenberg(prop, a)


def effective_expectation(td_model, flow, space, state, a_local, b_local, s, t):
    """rho(B† tau_eff(A) B) through the Schrödinger vector picture."""
    _check_flow_covers(flow, s, t)
    ham = flow_hamiltonian(td_model, flow, space)
    a_emb = space.embed(a_local) if isinstance(a_local, LocalOp) else a_local
    b_emb = space.embed(b_local) if isinstance(b_local, LocalOp) else b_local
    if state.is_pure:
        phi = b_emb.mat @ state.vector
        out = propagate_vector(ham, space, s, np.array([t]), phi)
        phi_t = out[0]
        return complex(np.vdot(phi_t, a_emb.mat @ phi_t))
    space.require_dense()
    prop = propagate(ham, space, s, t)
    sigma = prop.w @ (b_emb.mat @ state.density @ b_emb.mat.conj().T).toarray() @ prop.w.conj().T
    return complex(np.trace(a_emb.mat @ sigma))


def _check_flow_covers(flow, s, t):
    lo, hi = min(flow.times[0], flow.times[-1]), max(flow.times[0], flow.times[-1])
    eps = 1e-9 * max(1.0, abs(hi))
    if not (lo - eps <= s <= hi + eps and lo - eps <= t <= hi + eps):
        raise ValueError(
            f"flow solved on [{lo}, {hi}] does not cover [{s}, {t}]"
        )


@dataclass(frozen=True)
class CylinderObservable:
    """Polynomial in finitely many expectations: sum_i c_i prod_j rho(A_ij)."""

    terms: tuple  # ((coeff, (LocalOp, ...)), ...)

    def evaluate(self, state):
        total = 0.0 + 0.0j
        for coeff, ops in self.terms:
            prod = complex(coeff)
            for op in ops:
                prod *= state.expectation(op)
            total += prod
        return total

    @staticmethod
    def affine(op, coeff=1.0):
        """The function rho -> coeff * rho(A)."""
        return CylinderObservable(((coeff, (op,)),))

    @staticmethod
    def constant(c):
        return CylinderObservable(((c, ()),))


def classical_flow_eval(flow, observable, state0):
    """V^m_{t,s}(f) along the trajectory: f evaluated on the evolved state."""
    vals = []
    for kind, payload in flow.states:
        st = _clone_with_vector(state0, kind, payload)
        vals.append(observable.evaluate(st))
    return np.array(vals)
