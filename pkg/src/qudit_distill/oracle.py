"""Dense-matrix ground truth for the index rules used by the protocols.

Everything here builds explicit state vectors and unitaries on small
Hilbert spaces and checks the symbolic index maps against them.  A
register of ``n`` pairs is a tensor with axes ``(A_1, B_1, ..., A_n, B_n)``;
a pair's axis dimensions may differ between pairs (cross-dimension shifts).

Comparisons are made up to a global phase: two unit vectors agree when
``1 - |<a|b>|^2 <= TOL``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize

from .states import BellDiagonalState
from .zmod import is_prime, make_rng

TOL = 1e-10
#: Largest local dimension accepted by check_basis / the CLI.
MAX_ORACLE_D = 8
#: Largest total Hilbert-space dimension of any oracle register.
MAX_TOTAL_DIM = 4096


class OracleMismatch(AssertionError):
    """A dense computation disagrees with the predicted index map."""

    def __init__(self, equation: str, indices, fidelity: float, detail: str = ""):
        self.equation = equation
        self.indices = indices
        self.fidelity = fidelity
        msg = f"{equation}: mismatch at {indices} (fidelity with prediction {fidelity:.12g})"
        if detail:
            msg += f"; {detail}"
        super().__init__(msg)


def _check_index(d: int, *idx: int) -> None:
    for i in idx:
        if not 0 <= i < d:
            raise ValueError(f"index {i} out of range for d={d}")


def eta(d: int) -> complex:
    return np.exp(2j * np.pi / d)


def weyl_unitary(d: int, k: int, l: int) -> np.ndarray:
    """``U_kl = sum_r eta^(r l) |r + k><r|`` with addition mod d."""
    _check_index(d, k, l)
    U = np.zeros((d, d), dtype=complex)
    r = np.arange(d)
    U[(r + k) % d, r] = eta(d) ** ((r * l) % d)
    return U


def fourier(d: int) -> np.ndarray:
    """``V = d^(-1/2) sum_kl eta^(kl) |k><l|``."""
    r = np.arange(d)
    return eta(d) ** (np.outer(r, r) % d) / np.sqrt(d)


def phase_gate(d: int, g: int) -> np.ndarray:
    """Quadratic phase gate ``u(g)``.

    For even d this is ``diag(exp(i pi g k^2 / d))``.  For odd d the phase is
    ``eta^(g k^2 (d+1)/2)``, i.e. division by two is done in Z_d; the two
    agree for even g, and only this form maps Bell states to Bell states when
    both d and g are odd.
    """
    k = np.arange(d)
    if d % 2 == 0:
        return np.diag(np.exp(1j * np.pi * g * k**2 / d))
    half = (d + 1) // 2
    return np.diag(eta(d) ** ((g * k**2 * half) % d))


def phase_gate_literal(d: int, g: int) -> np.ndarray:
    """``diag(exp(i pi g k^2 / d))`` for every d, without the odd-d correction."""
    k = np.arange(d)
    return np.diag(np.exp(1j * np.pi * g * k**2 / d))


def shift_phase_gate(d: int, g: int) -> np.ndarray:
    """``v(g) = V^dagger u(g) V``."""
    V = fourier(d)
    return V.conj().T @ phase_gate(d, g) @ V


def max_entangled(d: int, k: int = 0, l: int = 0) -> np.ndarray:
    """``|Psi_kl> = (1 x U_kl)|Omega>`` as a length-d^2 vector (Alice index major)."""
    _check_index(d, k, l)
    omega = np.eye(d, dtype=complex).reshape(-1) / np.sqrt(d)
    return np.kron(np.eye(d), weyl_unitary(d, k, l)) @ omega


def bell_basis(d: int) -> np.ndarray:
    """Matrix whose column ``k*d + l`` is ``|Psi_kl>``."""
    return np.column_stack([max_entangled(d, k, l) for k in range(d) for l in range(d)])


def bell_diagonal_matrix(state: BellDiagonalState) -> np.ndarray:
    B = bell_basis(state.d)
    return (B * state.lam.reshape(-1)) @ B.conj().T


def isotropic_matrix(d: int, f: float) -> np.ndarray:
    omega = max_entangled(d)
    P = np.outer(omega, omega.conj())
    return f * P + (1 - f) / (d * d - 1) * (np.eye(d * d) - P)


@dataclass
class BasisReport:
    d: int
    max_orthonormality_deviation: float
    max_weyl_deviation: float

    @property
    def max_deviation(self) -> float:
        return max(self.max_orthonormality_deviation, self.max_weyl_deviation)


def check_basis(d: int, tol: float = TOL) -> BasisReport:
    """Check Hilbert-Schmidt orthonormality and the Weyl product rule.

    Raises OracleMismatch naming the first violating index tuple.
    """
    if d > MAX_ORACLE_D:
        raise ValueError(f"d={d} exceeds the oracle bound {MAX_ORACLE_D}")
    Us = np.array([[weyl_unitary(d, k, l) for l in range(d)] for k in range(d)])
    flat = Us.reshape(d * d, d, d)
    gram = np.einsum("aji,bjk->abik", flat.conj(), flat).trace(axis1=2, axis2=3)
    dev_gram = np.abs(gram - d * np.eye(d * d))
    worst = float(dev_gram.max())
    if worst > tol:
        a, b = np.unravel_index(np.argmax(dev_gram), dev_gram.shape)
        raise OracleMismatch("HS orthonormality", (divmod(int(a), d), divmod(int(b), d)), 1.0 - worst)
    w = eta(d)
    worst_weyl = 0.0
    for i in range(d):
        for j in range(d):
            for k in range(d):
                for l in range(d):
                    lhs = Us[i, j] @ Us[k, l]
                    rhs = w ** ((j * k) % d) * Us[(i + k) % d, (j + l) % d]
                    dev = float(np.abs(lhs - rhs).max())
                    if dev > tol:
                        raise OracleMismatch("Weyl relation", (i, j, k, l), 1.0 - dev)
                    worst_weyl = max(worst_weyl, dev)
    return BasisReport(d, worst, worst_weyl)


# -- pair registers ---------------------------------------------------------


def _product(pairs: Sequence[tuple[int, int, int]]) -> np.ndarray:
    """Register tensor for ``|Psi_{k l}>`` pairs given as ``(d, k, l)``."""
    total = int(np.prod([d * d for d, _, _ in pairs]))
    if total > MAX_TOTAL_DIM:
        raise ValueError(f"register dimension {total} exceeds oracle cap {MAX_TOTAL_DIM}")
    psi = np.ones((), dtype=complex)
    for d, k, l in pairs:
        psi = np.multiply.outer(psi, max_entangled(d, k, l).reshape(d, d))
    return psi


def _apply_local(psi: np.ndarray, U: np.ndarray, axis: int) -> np.ndarray:
    out = np.tensordot(U, psi, axes=([1], [axis]))
    return np.moveaxis(out, 0, axis)


def _apply_cshift(psi: np.ndarray, ctrl: int, tgt: int) -> np.ndarray:
    """``|c>|t> -> |c>|t + c>``, target addition modulo the target axis size."""
    out = np.empty_like(psi)
    for c in range(psi.shape[ctrl]):
        idx = [slice(None)] * psi.ndim
        idx[ctrl] = c
        sl = psi[tuple(idx)]
        t_axis = tgt if tgt < ctrl else tgt - 1
        out[tuple(idx)] = np.roll(sl, c, axis=t_axis)
    return out


def _bilateral(psi: np.ndarray, pair: int, U: np.ndarray) -> np.ndarray:
    """Alice applies ``U``, Bob applies ``conj(U)`` on ``pair``."""
    psi = _apply_local(psi, U, 2 * pair)
    return _apply_local(psi, U.conj(), 2 * pair + 1)


def _bcs(psi: np.ndarray, src: int, tgt: int) -> np.ndarray:
    psi = _apply_cshift(psi, 2 * src, 2 * tgt)
    return _apply_cshift(psi, 2 * src + 1, 2 * tgt + 1)


def _mbcs(psi: np.ndarray, src: int, tgt: int) -> np.ndarray:
    d = psi.shape[2 * src]
    V = fourier(d)
    psi = _bilateral(psi, src, V)
    psi = _bcs(psi, src, tgt)
    return _bilateral(psi, src, V.conj().T)


def _fidelity(psi: np.ndarray, phi: np.ndarray) -> float:
    return float(abs(np.vdot(phi.reshape(-1), psi.reshape(-1))) ** 2)


def _expect(equation: str, out: np.ndarray, predicted: Sequence[tuple[int, int, int]], indices, tol: float):
    fid = _fidelity(out, _product(predicted))
    if 1.0 - fid > tol:
        raise OracleMismatch(equation, indices, fid)
    return fid


def verify_bcs(d: int, source: tuple[int, int], target: tuple[int, int], tol: float = TOL):
    """Bilateral controlled shift: ``(i,j),(k,l) -> (i, j-l),(k+i, l)``."""
    (i, j), (k, l) = source, target
    _check_index(d, i, j, k, l)
    out = _bcs(_product([(d, i, j), (d, k, l)]), 0, 1)
    pred = ((i, (j - l) % d), ((k + i) % d, l))
    _expect("BCS", out, [(d, *pred[0]), (d, *pred[1])], (d, source, target), tol)
    return pred


def verify_mbcs(d: int, source: tuple[int, int], target: tuple[int, int], tol: float = TOL):
    """Modified BCS: ``(i,j),(k,l) -> (i+l, j),(k+j, l)``."""
    (i, j), (k, l) = source, target
    _check_index(d, i, j, k, l)
    out = _mbcs(_product([(d, i, j), (d, k, l)]), 0, 1)
    pred = (((i + l) % d, j), ((k + j) % d, l))
    _expect("mBCS", out, [(d, *pred[0]), (d, *pred[1])], (d, source, target), tol)
    return pred


def verify_v_swap(d: int, pair: tuple[int, int], tol: float = TOL):
    """``V x conj(V)``: ``(i,j) -> (j, -i)``."""
    i, j = pair
    _check_index(d, i, j)
    out = _bilateral(_product([(d, i, j)]), 0, fourier(d))
    pred = (j, (-i) % d)
    _expect("V swap", out, [(d, *pred)], (d, pair), tol)
    return pred


def verify_phase_rotations(d: int, g: int, pair: tuple[int, int], tol: float = TOL):
    """``u(g)``: ``(k,l) -> (k, l - g k)``; ``v(g)``: ``(k,l) -> (k + g l, l)``."""
    k, l = pair
    _check_index(d, k, l, g)
    psi = _product([(d, k, l)])
    u_pred = (k, (l - g * k) % d)
    v_pred = ((k + g * l) % d, l)
    _expect("u(g) rotation", _bilateral(psi, 0, phase_gate(d, g)), [(d, *u_pred)], (d, g, pair), tol)
    _expect("v(g) rotation", _bilateral(psi, 0, shift_phase_gate(d, g)), [(d, *v_pred)], (d, g, pair), tol)
    return u_pred, v_pred


def verify_crossdim_bcs(d: int, dprime: int, source: tuple[int, int], target_shift: int, tol: float = TOL):
    """Controlled shift from a C^d pair into a C^d' pair with zero phase index.

    Predicted: source unchanged, target shift ``k + i mod d'``.
    """
    i, j = source
    k = target_shift
    _check_index(d, i, j)
    _check_index(dprime, k)
    if dprime < d or not is_prime(dprime):
        raise ValueError(f"d'={dprime} must be a prime >= d={d}")
    out = _bcs(_product([(d, i, j), (dprime, k, 0)]), 0, 1)
    pred = ((i, j), ((k + i) % dprime, 0))
    _expect("cross-dim BCS", out, [(d, i, j), (dprime, *pred[1])], (d, dprime, source, k), tol)
    return pred


# -- twirl ------------------------------------------------------------------


def _validate_density(rho: np.ndarray, dim: int, tol: float = TOL) -> None:
    if rho.shape != (dim, dim):
        raise ValueError(f"expected a {dim}x{dim} density matrix, got shape {rho.shape}")
    if np.abs(rho - rho.conj().T).max() > tol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > 1e-9:
        raise ValueError("density matrix does not have unit trace")
    if np.linalg.eigvalsh(rho).min() < -tol:
        raise ValueError("density matrix is not positive semidefinite")


def symmetry_group(d: int) -> list[np.ndarray]:
    """The local unitaries ``U_ij x U_{i,-j}``."""
    return [np.kron(weyl_unitary(d, i, j), weyl_unitary(d, i, (-j) % d)) for i in range(d) for j in range(d)]


def twirl_matrix(rho: np.ndarray, d: int) -> np.ndarray:
    """Group average ``d^-2 sum_g g^dagger rho g``."""
    _validate_density(rho, d * d)
    out = np.zeros_like(rho, dtype=complex)
    for g in symmetry_group(d):
        out += g.conj().T @ rho @ g
    return out / (d * d)


def twirl(rho: np.ndarray, d: int, tol: float = TOL) -> BellDiagonalState:
    """Twirl ``rho`` and return its Bell-diagonal weights."""
    t = twirl_matrix(rho, d)
    B = bell_basis(d)
    in_basis = B.conj().T @ t @ B
    off = in_basis - np.diag(np.diag(in_basis))
    if np.abs(off).max() > tol:
        raise OracleMismatch("twirl diagonality", (d,), 1.0 - float(np.abs(off).max()))
    lam = np.clip(np.diag(in_basis).real, 0.0, None).reshape(d, d)
    return BellDiagonalState(d, lam)


# -- hashing round ----------------------------------------------------------


def identify_bell_pairs(psi: np.ndarray, tol: float = TOL) -> list[tuple[int, int]]:
    """Read off ``(k, l)`` for every pair of a product of Bell states.

    Raises OracleMismatch if some pair is not (within ``tol``) a basis state.
    """
    n = psi.ndim // 2
    labels = []
    for p in range(n):
        d = psi.shape[2 * p]
        keep = (2 * p, 2 * p + 1)
        mat = np.moveaxis(psi, keep, (0, 1)).reshape(d * d, -1)
        rho = mat @ mat.conj().T
        B = bell_basis(d)
        probs = np.einsum("ia,ij,ja->a", B.conj(), rho, B).real
        best = int(np.argmax(probs))
        if 1.0 - probs[best] > tol:
            raise OracleMismatch("Bell identification", (p,), float(probs[best]))
        labels.append(divmod(best, d))
    return labels


def hashing_round_dense(d: int, S: Sequence[int], M: Sequence[int], g: int, tol: float = TOL):
    """Run one hashing round on ``|Psi_S>`` with dense matrices.

    Uses the last pair as target: bilateral ``v(g)`` on the target, then all
    BCS operations, then all mBCS operations, then a computational-basis
    measurement of the target.  Returns ``(outcome, remaining_S)`` with
    ``remaining_S`` in ``(k..., l...)`` layout, read off the post-measurement
    state independently of any symbolic rule.
    """
    S = [int(x) for x in S]
    M = [int(x) for x in M]
    n = len(S) // 2
    if len(S) != 2 * n or n < 1 or len(M) != 2 * (n - 1):
        raise ValueError("need |S| = 2n and |M| = 2n - 2")
    ks, ls = S[:n], S[n:]
    psi = _product([(d, ks[a], ls[a]) for a in range(n)])
    t = n - 1
    psi = _bilateral(psi, t, shift_phase_gate(d, g))
    s, p = M[: n - 1], M[n - 1 :]
    for a in range(n - 1):
        for _ in range(s[a]):
            psi = _bcs(psi, a, t)
    for a in range(n - 1):
        for _ in range(p[a]):
            psi = _mbcs(psi, a, t)
    # outcome distribution of Bob - Alice on the target pair
    tgt = np.moveaxis(psi, (2 * t, 2 * t + 1), (0, 1))
    weights = (np.abs(tgt) ** 2).reshape(d, d, -1).sum(axis=2)
    diff = np.zeros(d)
    for a in range(d):
        for b in range(d):
            diff[(b - a) % d] += weights[a, b]
    outcome = int(np.argmax(diff))
    if 1.0 - diff[outcome] > tol:
        raise OracleMismatch("hashing outcome", (tuple(S), tuple(M), g), float(diff[outcome]))
    if n == 1:
        return outcome, []
    a_val = int(np.argmax(weights.sum(axis=1)))
    post = tgt[a_val, (a_val + outcome) % d]
    post = post / np.linalg.norm(post)
    labels = identify_bell_pairs(post, tol)
    return outcome, [k for k, _ in labels] + [l for _, l in labels]


# -- reduced states and fidelities -----------------------------------------


def reduced_pair_fidelity(m: int, f: float) -> float:
    """Fidelity of one qubit pair of a global isotropic state on d = 2^m."""
    if not 1 <= m <= 3:
        raise ValueError("reduced_pair_fidelity supports 1 <= m <= 3")
    d = 2**m
    rho = isotropic_matrix(d, f)
    # axes: Alice bits (m), Bob bits (m), then the same for the bra
    t = rho.reshape((2,) * (4 * m))
    keep = [0, m]
    letters = "abcdefghijklmnopqrstuvwx"
    ket = list(letters[: 2 * m])
    bra = list(letters[2 * m : 4 * m])
    for ax in range(2 * m):
        if ax not in keep:
            bra[ax] = ket[ax]
    out = "".join(ket[a] for a in keep) + "".join(bra[a] for a in keep)
    red = np.einsum("".join(ket) + "".join(bra) + "->" + out, t).reshape(4, 4)
    omega = max_entangled(2)
    return float(np.real(omega.conj() @ red @ omega))


def fully_entangled_fraction(rho: np.ndarray, d: int, restarts: int = 4, seed=0) -> float:
    """Numerical ``max_U <Omega|(1 x U)^dagger rho (1 x U)|Omega>``."""
    rng = make_rng(seed)
    omega = max_entangled(d)

    def unitary(x):
        H = np.zeros((d, d), dtype=complex)
        iu = np.triu_indices(d, 1)
        n_off = len(iu[0])
        H[iu] = x[:n_off] + 1j * x[n_off : 2 * n_off]
        H = H + H.conj().T
        H[np.diag_indices(d)] = x[2 * n_off :]
        return expm(1j * H)

    def neg_overlap(x):
        v = np.kron(np.eye(d), unitary(x)) @ omega
        return -float(np.real(v.conj() @ rho @ v))

    best = -neg_overlap(np.zeros(d * d))
    for _ in range(restarts):
        res = minimize(neg_overlap, rng.normal(scale=1.5, size=d * d), method="BFGS")
        best = max(best, -res.fun)
    return best


# -- recurrence and projection referees -------------------------------------


@dataclass
class RecurrenceOracle:
    d: int
    f: float
    p_keep: float
    f_prime: float


def recurrence_dense(d: int, f: float) -> RecurrenceOracle:
    """Two isotropic copies, BCS, keep the source when target outcomes agree."""
    if d**4 > MAX_TOTAL_DIM:
        raise ValueError(f"d={d} too large for the recurrence oracle")
    rho = isotropic_matrix(d, f)
    # axes (A1, B1, A2, B2) for ket and bra
    big = np.kron(rho, rho).reshape((d,) * 8)
    a = np.arange(d)
    perm = np.zeros((d,) * 4 + (d,) * 4)
    for a1 in a:
        for b1 in a:
            for a2 in a:
                for b2 in a:
                    perm[a1, b1, (a2 + a1) % d, (b2 + b1) % d, a1, b1, a2, b2] = 1.0
    P = perm.reshape(d**4, d**4)
    out = (P @ big.reshape(d**4, d**4) @ P.T).reshape((d,) * 8)
    src = np.zeros((d * d, d * d), dtype=complex)
    for x in range(d):
        src += out[:, :, x, x, :, :, x, x].reshape(d * d, d * d)
    p_keep = float(np.trace(src).real)
    omega = max_entangled(d)
    f_prime = float(np.real(omega.conj() @ src @ omega)) / p_keep
    return RecurrenceOracle(d, f, p_keep, f_prime)


def project_isotropic_dense(d: int, f: float, partition: Sequence[int]) -> list[tuple[float, float]]:
    """Local block projection of an isotropic state; returns ``(p_i, f_i)`` per block."""
    rho = isotropic_matrix(d, f).reshape(d, d, d, d)
    out = []
    start = 0
    for q in partition:
        idx = np.arange(start, start + q)
        start += q
        block = rho[np.ix_(idx, idx, idx, idx)].reshape(q * q, q * q)
        p = float(np.trace(block).real)
        om = np.eye(q).reshape(-1) / np.sqrt(q)
        out.append((p, float(np.real(om @ block @ om)) / p if p > 0 else 0.0))
    return out


@dataclass
class VerificationRow:
    equation: str
    d: int
    cases: int
    max_infidelity: float
    passed: bool
    detail: str = ""
    failures: list = field(default_factory=list)


def _run_cases(equation: str, d: int, cases, fn) -> VerificationRow:
    worst = 0.0
    failures = []
    count = 0
    for case in cases:
        count += 1
        try:
            fn(*case)
        except OracleMismatch as exc:
            worst = max(worst, 1.0 - exc.fidelity)
            failures.append(exc.indices)
    detail = f"first failure {failures[0]}" if failures else ""
    return VerificationRow(equation, d, count, worst, not failures, detail, failures)


def verification_table(d_max: int, dprime_max: Optional[int] = None) -> list[VerificationRow]:
    """Run every oracle check for ``2 <= d <= d_max`` with full index coverage."""
    if d_max > MAX_ORACLE_D:
        raise ValueError(f"d_max={d_max} exceeds the oracle bound {MAX_ORACLE_D}")
    rows = []
    for d in range(2, d_max + 1):
        r = range(d)
        try:
            rep = check_basis(d)
            rows.append(VerificationRow("Weyl basis", d, d**4, rep.max_deviation, True))
        except OracleMismatch as exc:
            rows.append(VerificationRow("Weyl basis", d, d**4, 1.0, False, str(exc), [exc.indices]))
        rows.append(_twirl_row(d))
        quads = [((i, j), (k, l)) for i in r for j in r for k in r for l in r]
        rows.append(_run_cases("BCS", d, [(d, *c) for c in quads], verify_bcs))
        rows.append(_run_cases("V swap", d, [(d, (i, j)) for i in r for j in r], verify_v_swap))
        rows.append(_run_cases("mBCS", d, [(d, *c) for c in quads], verify_mbcs))
        rows.append(
            _run_cases(
                "u/v rotations",
                d,
                [(d, g, (k, l)) for g in r for k in r for l in r],
                verify_phase_rotations,
            )
        )
        for dp in _primes_from(d, dprime_max or d_max):
            cases = [(d, dp, (i, j), k) for i in r for j in r for k in range(dp)]
            if (d * dp) ** 2 > MAX_TOTAL_DIM:
                continue
            rows.append(_run_cases(f"cross-dim BCS d'={dp}", d, cases, verify_crossdim_bcs))
    return rows


def _primes_from(d: int, upper: int) -> list[int]:
    return [p for p in range(d, max(upper, _next_prime(d)) + 1) if is_prime(p)]


def _next_prime(n: int) -> int:
    while not is_prime(n):
        n += 1
    return n


def _twirl_row(d: int) -> VerificationRow:
    rng = make_rng(1234 + d)
    worst = 0.0
    failures = []
    cases = 3
    for c in range(cases):
        X = rng.normal(size=(d * d, d * d)) + 1j * rng.normal(size=(d * d, d * d))
        rho = X @ X.conj().T
        rho /= np.trace(rho).real
        try:
            t1 = twirl_matrix(rho, d)
            t2 = twirl_matrix(t1, d)
            state = twirl(rho, d)
        except OracleMismatch as exc:
            failures.append(exc.indices)
            continue
        dev = float(np.abs(t1 - t2).max())
        for g in symmetry_group(d):
            dev = max(dev, float(np.abs(t1 @ g - g @ t1).max()))
        dev = max(dev, float(np.abs(bell_diagonal_matrix(state) - t1).max()))
        worst = max(worst, dev)
        if dev > TOL:
            failures.append((d, c))
    return VerificationRow("twirl", d, cases, worst, not failures, "", failures)
