"""Quadratic binary objectives for the two-step mobility-ban problem.

The decision bits are "keep open" flags ``z = 1 - u``: minimizing the
quadratic form over z picks which locations to isolate.  Two builders
compile the same objective:

* a numeric builder that reconstructs the exact multilinear quadratic from
  ``1 + M + M(M-1)/2`` two-step simulations (ground truth by construction),
* closed-form builders for SIS and SIR that expand the two-step dynamics
  analytically and must agree with the numeric one to float precision.

Both keep the additive constant, so objective values equal simulated costs
exactly, not just up to a shared offset.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .epinet import (
    EpidemicParams,
    EpidemicState,
    LocationNetwork,
    ModelKind,
    batch_infection_cost,
    cost,
    simulate,
)

__all__ = [
    "QuboProblem",
    "QuboParseError",
    "as_bits",
    "evaluate",
    "to_control",
    "from_control",
    "build_qubo_numeric",
    "build_qubo_sis_analytic",
    "build_qubo_sir_analytic",
    "solve_bruteforce_problem1",
    "export_qubo",
    "import_qubo",
]

HORIZON = 2  # the compilation below is exact only for a two-step lookahead

BRUTEFORCE_MAX_BITS = 25
_ENUM_CHUNK_BITS = 16


class QuboParseError(ValueError):
    """Malformed QUBO text; the message carries the offending line number."""


def as_bits(z, m: int) -> np.ndarray:
    """Coerce to a validated length-``m`` binary int8 vector."""
    arr = np.asarray(z)
    if arr.shape != (m,):
        raise ValueError(f"bit vector must have length {m}, got shape {arr.shape}")
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError("bit entries must be 0 or 1")
    return arr.astype(np.int8)


@dataclass(frozen=True)
class QuboProblem:
    """Minimize ``offset + sum_i linear[i] z_i + sum_{i<j} quadratic[i,j] z_i z_j``.

    Quadratic keys are canonicalized to strictly upper-triangular pairs;
    (j, i) contributions are folded into (i, j) on construction and exact
    zeros are dropped.
    """

    linear: np.ndarray
    quadratic: dict[tuple[int, int], float] = field(default_factory=dict)
    offset: float = 0.0

    def __post_init__(self) -> None:
        lin = np.asarray(self.linear, dtype=np.float64)
        if lin.ndim != 1:
            raise ValueError("linear coefficients must be a 1-D vector")
        if not np.all(np.isfinite(lin)) or not np.isfinite(self.offset):
            raise ValueError("QUBO coefficients must be finite")
        m = lin.shape[0]
        folded: dict[tuple[int, int], float] = {}
        for (i, j), value in self.quadratic.items():
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-pair ({i}, {j}) is not a quadratic term")
            if not (0 <= i < m and 0 <= j < m):
                raise ValueError(f"pair ({i}, {j}) out of range for {m} variables")
            if not np.isfinite(value):
                raise ValueError(f"non-finite coefficient at ({i}, {j})")
            key = (i, j) if i < j else (j, i)
            folded[key] = folded.get(key, 0.0) + float(value)
        folded = {k: v for k, v in folded.items() if v != 0.0}
        object.__setattr__(self, "linear", lin)
        object.__setattr__(self, "quadratic", folded)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def m(self) -> int:
        return self.linear.shape[0]

    @cached_property
    def coupling(self) -> np.ndarray:
        """Dense symmetric coupling matrix with zero diagonal."""
        s = np.zeros((self.m, self.m))
        for (i, j), value in self.quadratic.items():
            s[i, j] = value
            s[j, i] = value
        return s


def evaluate(q: QuboProblem, z) -> float:
    """Objective value at a binary assignment, offset included."""
    zz = as_bits(z, q.m).astype(np.float64)
    return float(q.offset + q.linear @ zz + 0.5 * zz @ q.coupling @ zz)


def batch_evaluate(q: QuboProblem, bits: np.ndarray) -> np.ndarray:
    """Objective values for a (B, M) batch of assignments (unvalidated)."""
    zf = bits.astype(np.float64)
    return q.offset + zf @ q.linear + 0.5 * np.einsum("bi,ij,bj->b", zf, q.coupling, zf)


def to_control(z) -> np.ndarray:
    """Map keep-open bits to isolation flags: ``u = 1 - z``."""
    arr = np.asarray(z)
    return as_bits(1 - arr, arr.shape[0])


def from_control(u) -> np.ndarray:
    """Map isolation flags to keep-open bits: ``z = 1 - u``."""
    arr = np.asarray(u)
    return as_bits(1 - arr, arr.shape[0])


# -- builders ----------------------------------------------------------------


def build_qubo_numeric(
    net: LocationNetwork,
    params: EpidemicParams,
    state0: EpidemicState,
    gamma: float,
) -> QuboProblem:
    """Reconstruct the two-step cost as a quadratic in z by interpolation.

    Over binary vectors the cost is multilinear of degree two, so it is
    pinned exactly by its values at z = 0, the unit vectors, and the pair
    vectors: ``offset = g(0)``, ``P_i = g(e_i) - g(0)``,
    ``Q_ij = g(e_i + e_j) - g(e_i) - g(e_j) + g(0)``.  The isolation-cost
    term is linear and added in closed form, which keeps the degenerate
    cases (no infected, no edges) exact rather than merely close.

    Works for both SIS and SIR; the model kind is taken from ``params``.
    """
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    m = net.m
    n_pairs = m * (m - 1) // 2
    bits = np.zeros((1 + m + n_pairs, m), dtype=np.int8)
    for i in range(m):
        bits[1 + i, i] = 1
    pair_row: dict[tuple[int, int], int] = {}
    row = 1 + m
    for i in range(m):
        for j in range(i + 1, m):
            bits[row, i] = 1
            bits[row, j] = 1
            pair_row[(i, j)] = row
            row += 1
    controls = (1 - bits).astype(np.float64)
    g_inf = batch_infection_cost(net, params, state0, controls, HORIZON)

    base = g_inf[0]
    linear = g_inf[1 : 1 + m] - base - gamma * net.populations
    quadratic: dict[tuple[int, int], float] = {}
    for (i, j), r in pair_row.items():
        value = g_inf[r] - g_inf[1 + i] - g_inf[1 + j] + base
        if value != 0.0:
            quadratic[(i, j)] = float(value)
    offset = float(base + gamma * net.populations.sum())
    return QuboProblem(linear, quadratic, offset)


def _analytic_coefficients(
    net: LocationNetwork,
    params: EpidemicParams,
    state0: EpidemicState,
    gamma: float,
) -> QuboProblem:
    """Closed-form expansion of the two-step cost in the keep-open bits.

    Writing ``x(1) = a + c z`` per location (a: control-free part, c: the
    inflow term gated by z) and substituting into the second step, the
    binary identity z^2 = z collapses everything to a quadratic whose
    coefficients are assembled below.  ``h`` and ``sigma_next`` are the
    one-step-ahead susceptible fractions with and without the local inflow.
    """
    n = net.populations
    a_mat = net.weights
    lam, mu = params.lam, params.mu
    x0 = state0.infected
    y0 = state0.removed

    if y0 is None:
        frac0 = 1.0 - x0 / n
        carried = np.zeros_like(x0)
    else:
        frac0 = 1.0 - (x0 + y0) / n
        carried = y0 + mu * x0  # removed pool after one step
    inflow = a_mat @ x0
    a = x0 * (1.0 - mu + lam * frac0)
    c = lam * frac0 * inflow
    sigma_next = 1.0 - (a + carried) / n
    h = sigma_next - c / n

    linear = (
        (2.0 - mu) * c
        + lam * c * (sigma_next - (a + c) / n)
        + lam * h * (a_mat @ a)
        - gamma * n
    )
    q_mat = lam * h[:, None] * a_mat * c[None, :]
    quadratic: dict[tuple[int, int], float] = {}
    for i in range(net.m):
        for j in range(i + 1, net.m):
            value = q_mat[i, j] + q_mat[j, i]
            if value != 0.0:
                quadratic[(i, j)] = float(value)

    # Offset from one simulation at z = 0 (every location isolated), so the
    # objective reproduces simulated costs exactly, not just their argmin.
    all_isolated = np.ones(net.m, dtype=np.int8)
    traj = simulate(net, params, state0, all_isolated, HORIZON)
    offset = cost(traj, all_isolated, gamma, net)
    return QuboProblem(linear, quadratic, offset)


def build_qubo_sis_analytic(
    net: LocationNetwork,
    params: EpidemicParams,
    state0: EpidemicState,
    gamma: float,
) -> QuboProblem:
    """Closed-form SIS compilation of the two-step cost."""
    if params.kind is not ModelKind.SIS:
        raise ValueError("SIS builder requires SIS parameters")
    if state0.removed is not None:
        raise ValueError("SIS state must not carry a removed compartment")
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    return _analytic_coefficients(net, params, state0, gamma)


def build_qubo_sir_analytic(
    net: LocationNetwork,
    params: EpidemicParams,
    state0: EpidemicState,
    gamma: float,
) -> QuboProblem:
    """Closed-form SIR compilation of the two-step cost."""
    if params.kind is not ModelKind.SIR:
        raise ValueError("SIR builder requires SIR parameters")
    if state0.removed is None:
        raise ValueError("SIR state requires a removed compartment")
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    return _analytic_coefficients(net, params, state0, gamma)


def build_qubo(
    net: LocationNetwork,
    params: EpidemicParams,
    state0: EpidemicState,
    gamma: float,
    method: str = "analytic",
) -> QuboProblem:
    """Dispatch between the analytic and numeric builders."""
    if method == "numeric":
        return build_qubo_numeric(net, params, state0, gamma)
    if method == "analytic":
        if params.kind is ModelKind.SIS:
            return build_qubo_sis_analytic(net, params, state0, gamma)
        return build_qubo_sir_analytic(net, params, state0, gamma)
    raise ValueError(f"unknown builder {method!r}; expected 'analytic' or 'numeric'")


# -- exhaustive reference over controls --------------------------------------


def _bit_rows(count: int, width: int, offset_bits: int = 0) -> np.ndarray:
    """Rows k = 0..count-1 as big-endian bit vectors of the given width."""
    ks = np.arange(count, dtype=np.int64) + offset_bits
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    return ((ks[:, None] >> shifts) & 1).astype(np.int8)


def solve_bruteforce_problem1(
    net: LocationNetwork,
    params: EpidemicParams,
    state0: EpidemicState,
    gamma: float,
    steps: int = HORIZON,
) -> np.ndarray:
    """Enumerate every control vector and return the cost minimizer.

    Ties break toward the lexicographically smallest control.  Reference
    oracle for end-to-end checks of the compiled objectives; refuses more
    than 25 locations.
    """
    m = net.m
    if m > BRUTEFORCE_MAX_BITS:
        raise ValueError(f"{m} locations exceed the enumeration limit of {BRUTEFORCE_MAX_BITS}")
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    total = 1 << m
    chunk = 1 << min(m, _ENUM_CHUNK_BITS)
    best_cost = np.inf
    best_u: np.ndarray | None = None
    for start in range(0, total, chunk):
        u_rows = _bit_rows(min(chunk, total - start), m, start)
        costs = batch_infection_cost(
            net, params, state0, u_rows.astype(np.float64), steps
        )
        costs += gamma * (u_rows @ net.populations)
        k = int(np.argmin(costs))
        if costs[k] < best_cost:
            best_cost = float(costs[k])
            best_u = u_rows[k].copy()
    assert best_u is not None
    return best_u


# -- text format ---------------------------------------------------------------


def export_qubo(q: QuboProblem) -> str:
    """Serialize to the plain-text exchange format.

    Header line ``# QUBO M=<int> offset=<decimal>``, then one line per
    nonzero entry ``<i> <j> <decimal>`` with 0-based indices: i = j holds a
    linear coefficient, i < j a pairwise one.  Diagonal entries come first
    in ascending order, then pairs lexicographically; decimals use the
    shortest round-trip representation.
    """
    lines = [f"# QUBO M={q.m} offset={q.offset!r}"]
    for i in range(q.m):
        value = float(q.linear[i])
        if value != 0.0:
            lines.append(f"{i} {i} {value!r}")
    for i, j in sorted(q.quadratic):
        lines.append(f"{i} {j} {q.quadratic[(i, j)]!r}")
    return "\n".join(lines) + "\n"


def import_qubo(text: str) -> QuboProblem:
    """Parse the text format back into a problem; inverse of export_qubo."""
    lines = text.splitlines()
    if not lines:
        raise QuboParseError("line 1: empty document, expected QUBO header")
    header = lines[0].strip()
    parts = header.split()
    if (
        len(parts) != 4
        or parts[0] != "#"
        or parts[1] != "QUBO"
        or not parts[2].startswith("M=")
        or not parts[3].startswith("offset=")
    ):
        raise QuboParseError("line 1: expected header '# QUBO M=<int> offset=<decimal>'")
    try:
        m = int(parts[2][2:])
        offset = float(parts[3][7:])
    except ValueError as exc:
        raise QuboParseError(f"line 1: bad header value ({exc})") from exc
    if m < 0:
        raise QuboParseError("line 1: variable count must be nonnegative")

    linear = np.zeros(m)
    quadratic: dict[tuple[int, int], float] = {}
    seen: set[tuple[int, int]] = set()
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != 3:
            raise QuboParseError(f"line {lineno}: expected '<i> <j> <value>', got {raw!r}")
        try:
            i, j = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise QuboParseError(f"line {lineno}: indices must be integers, got {raw!r}")
        try:
            value = float(tokens[2])
        except ValueError:
            raise QuboParseError(f"line {lineno}: bad coefficient, got {raw!r}")
        if not (0 <= i < m and 0 <= j < m):
            raise QuboParseError(f"line {lineno}: index out of range for M={m}")
        if i > j:
            raise QuboParseError(f"line {lineno}: indices must satisfy i <= j")
        if (i, j) in seen:
            raise QuboParseError(f"line {lineno}: duplicate entry ({i}, {j})")
        seen.add((i, j))
        if i == j:
            linear[i] = value
        else:
            quadratic[(i, j)] = value
    return QuboProblem(linear, quadratic, offset)
