"""Graph states on a stabilizer tableau.

A Pauli operator is stored as ``i^k X^x Z^z`` with bit vectors ``x``, ``z``
and a phase exponent ``k`` mod 4 (per qubit the X factor stands left of the
Z factor, so Y = i X Z). Qubit 0 is the most significant bit of state-vector
indices.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np

from . import montecarlo as mc
from .qstate import ImpossibleOutcomeError

MAX_LC_QUBITS = 8
MAX_DENSE_QUBITS = 12

I2 = np.eye(2, dtype=complex)
PX = np.array([[0, 1], [1, 0]], dtype=complex)
PY = np.array([[0, -1j], [1j, 0]], dtype=complex)
PZ = np.diag([1.0 + 0j, -1.0])
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
S = np.diag([1.0 + 0j, 1j])
SDG = S.conj().T


class GraphError(ValueError):
    pass


def sqrt_pauli(P: np.ndarray, sign: int) -> np.ndarray:
    """√(±iP) = exp(±iπ/4 P) for a Pauli matrix P."""
    return (I2 + sign * 1j * P) / np.sqrt(2)


# ---------------------------------------------------------------------------
# graphs

@dataclass(frozen=True)
class GraphRef:
    vertices: tuple
    edges: frozenset = frozenset()

    def __post_init__(self):
        if len(set(self.vertices)) != len(self.vertices):
            raise GraphError("duplicate vertex label")
        vs = set(self.vertices)
        es = set()
        for e in self.edges:
            e = frozenset(e)
            if len(e) != 2:
                raise GraphError(f"edge {tuple(e)} is a loop or malformed")
            if not e <= vs:
                raise GraphError(f"edge {tuple(e)} uses an unknown vertex")
            es.add(e)
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "edges", frozenset(es))

    @classmethod
    def of(cls, vertices: Iterable[Hashable], edges: Iterable[tuple] = ()) -> "GraphRef":
        edges = list(edges)
        for e in edges:
            if len(e) != 2 or e[0] == e[1]:
                raise GraphError(f"edge {e!r} is a loop or malformed")
        if len({frozenset(e) for e in edges}) != len(edges):
            raise GraphError("multi-edge in graph")
        return cls(tuple(vertices), frozenset(frozenset(e) for e in edges))

    @classmethod
    def chain(cls, n: int, start: int = 0) -> "GraphRef":
        vs = list(range(start, start + n))
        return cls.of(vs, zip(vs, vs[1:]))

    @classmethod
    def star(cls, n: int, start: int = 0) -> "GraphRef":
        vs = list(range(start, start + n))
        return cls.of(vs, [(vs[0], v) for v in vs[1:]])

    @classmethod
    def complete(cls, n: int) -> "GraphRef":
        return cls.of(range(n), itertools.combinations(range(n), 2))

    @classmethod
    def random(cls, n: int, p: float, rng: np.random.Generator) -> "GraphRef":
        pairs = [e for e in itertools.combinations(range(n), 2) if rng.random() < p]
        return cls.of(range(n), pairs)

    @classmethod
    def from_adjacency(cls, adj: dict) -> "GraphRef":
        """Adjacency lists ``{v: [neighbours]}``; asymmetric lists are symmetrized."""
        edges = {frozenset((v, w)) for v, ws in adj.items() for w in ws}
        return cls(tuple(adj), frozenset(edges))

    def __len__(self):
        return len(self.vertices)

    def neighbours(self, v) -> set:
        return {w for e in self.edges if v in e for w in e if w != v}

    def adjacency(self) -> np.ndarray:
        idx = {v: i for i, v in enumerate(self.vertices)}
        A = np.zeros((len(self), len(self)), dtype=np.uint8)
        for e in self.edges:
            a, b = tuple(e)
            A[idx[a], idx[b]] = A[idx[b], idx[a]] = 1
        return A

    def adjacency_lists(self) -> dict:
        return {v: sorted(self.neighbours(v), key=self.vertices.index) for v in self.vertices}

    def with_edge(self, a, b) -> "GraphRef":
        if frozenset((a, b)) in self.edges:
            raise GraphError(f"edge {(a, b)} already present")
        return GraphRef(self.vertices, self.edges | {frozenset((a, b))})

    def toggle_edge(self, a, b) -> "GraphRef":
        return GraphRef(self.vertices, self.edges ^ {frozenset((a, b))})

    def without(self, v) -> "GraphRef":
        return GraphRef(tuple(w for w in self.vertices if w != v),
                        frozenset(e for e in self.edges if v not in e))

    def local_complement(self, v) -> "GraphRef":
        nb = sorted(self.neighbours(v), key=self.vertices.index)
        toggles = {frozenset(p) for p in itertools.combinations(nb, 2)}
        return GraphRef(self.vertices, self.edges ^ toggles)

    def union(self, other: "GraphRef") -> "GraphRef":
        if set(self.vertices) & set(other.vertices):
            raise GraphError("graphs share vertex labels")
        return GraphRef(self.vertices + other.vertices, self.edges | other.edges)

    def relabel(self, mapping: dict) -> "GraphRef":
        return GraphRef(tuple(mapping.get(v, v) for v in self.vertices),
                        frozenset(frozenset(mapping.get(v, v) for v in e) for e in self.edges))

    def same_as(self, other: "GraphRef") -> bool:
        return set(self.vertices) == set(other.vertices) and self.edges == other.edges


# ---------------------------------------------------------------------------
# GF(2) helpers

def gf2_rank(M: np.ndarray) -> int:
    return len(_rref(M)[1])


def _rref(M: np.ndarray):
    A = (np.array(M, dtype=np.uint8) & 1).copy()
    rows, cols = A.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.flatnonzero(A[r:, c])
        if nz.size == 0:
            continue
        p = r + nz[0]
        if p != r:
            A[[r, p]] = A[[p, r]]
        others = np.flatnonzero(A[:, c])
        others = others[others != r]
        A[others] ^= A[r]
        pivots.append(c)
        r += 1
    return A, pivots


def gf2_nullspace(M: np.ndarray) -> np.ndarray:
    """Basis of {v : M v = 0} as rows."""
    A, piv = _rref(M)
    n = A.shape[1]
    free = [c for c in range(n) if c not in piv]
    basis = []
    for f in free:
        v = np.zeros(n, dtype=np.uint8)
        v[f] = 1
        for i, p in enumerate(piv):
            v[p] = A[i, f]
        basis.append(v)
    return np.array(basis, dtype=np.uint8).reshape(len(basis), n)


def gf2_solve(M: np.ndarray, b: np.ndarray) -> np.ndarray | None:
    """One solution of M v = b, or None."""
    aug = np.concatenate([np.asarray(M, dtype=np.uint8), np.asarray(b, dtype=np.uint8)[:, None]], axis=1)
    A, piv = _rref(aug)
    n = M.shape[1]
    if n in piv:
        return None
    v = np.zeros(n, dtype=np.uint8)
    for i, p in enumerate(piv):
        v[p] = A[i, n]
    return v


# ---------------------------------------------------------------------------
# Pauli algebra

def pauli_mul(x1, z1, k1, x2, z2, k2):
    """(i^k1 X^x1 Z^z1)(i^k2 X^x2 Z^z2) in the same representation."""
    k = (k1 + k2 + 2 * int(np.dot(z1.astype(int), x2.astype(int)))) % 4
    return x1 ^ x2, z1 ^ z2, k


def _hermitian_sign(x, z, k) -> int:
    ny = int(np.sum(x & z))
    d = (k - ny) % 4
    if d == 0:
        return 1
    if d == 2:
        return -1
    raise GraphError("operator is not Hermitian")


def _from_sign(x, z, sign: int) -> int:
    return (int(np.sum(x & z)) + (0 if sign > 0 else 2)) % 4


def pauli_string(x, z, k) -> str:
    chars = "".join("IXZY"[int(a) + 2 * int(b)] for a, b in zip(x, z))
    return ("+" if _hermitian_sign(x, z, k) > 0 else "-") + chars


def parse_pauli(s: str):
    sign = -1 if s.startswith("-") else 1
    body = s.lstrip("+-")
    x = np.array([c in "XY" for c in body], dtype=np.uint8)
    z = np.array([c in "ZY" for c in body], dtype=np.uint8)
    return x, z, _from_sign(x, z, sign)


def pauli_matrix(x, z, k) -> np.ndarray:
    """Dense matrix; only for small n."""
    m = np.array([[1.0 + 0j]])
    for a, b in zip(x, z):
        m = np.kron(m, np.linalg.matrix_power(PX, int(a)) @ np.linalg.matrix_power(PZ, int(b)))
    return (1j ** k) * m


def apply_pauli_vec(vec: np.ndarray, x, z, k) -> np.ndarray:
    n = len(x)
    idx = np.arange(2**n)
    weights = 1 << np.arange(n - 1, -1, -1)
    xm = int(np.dot(x.astype(np.int64), weights))
    zm = int(np.dot(z.astype(np.int64), weights))
    par = np.array([bin(i & zm).count("1") & 1 for i in idx]) if zm else np.zeros(len(idx), int)
    out = np.empty_like(vec, dtype=complex)
    out[idx ^ xm] = (1j ** k) * np.where(par, -1.0, 1.0) * vec
    return out


def _single_image(U: np.ndarray, P: np.ndarray):
    """U P U† as (x, z, k) on one qubit."""
    M = U @ P @ U.conj().T
    for (a, b) in ((1, 0), (0, 1), (1, 1), (0, 0)):
        base = np.linalg.matrix_power(PX, a) @ np.linalg.matrix_power(PZ, b)
        for k in range(4):
            if np.allclose(M, (1j ** k) * base, atol=1e-9):
                return np.uint8(a), np.uint8(b), k
    raise GraphError("operator is not a Clifford")


# ---------------------------------------------------------------------------
# tableau

@dataclass
class MeasurementResult:
    outcome: int
    probability: float
    tableau: "StabilizerTableau"


@dataclass
class StabilizerTableau:
    labels: tuple
    x: np.ndarray
    z: np.ndarray
    k: np.ndarray

    def __post_init__(self):
        self.labels = tuple(self.labels)
        self.x = np.asarray(self.x, dtype=np.uint8).reshape(len(self.labels), len(self.labels))
        self.z = np.asarray(self.z, dtype=np.uint8).reshape(self.x.shape)
        self.k = np.asarray(self.k, dtype=np.int64) % 4

    # construction ---------------------------------------------------------
    @classmethod
    def from_graph(cls, g: GraphRef) -> "StabilizerTableau":
        n = len(g)
        return cls(g.vertices, np.eye(n, dtype=np.uint8), g.adjacency(), np.zeros(n, int))

    @classmethod
    def from_strings(cls, rows: Sequence[str], labels: Sequence | None = None) -> "StabilizerTableau":
        parsed = [parse_pauli(r) for r in rows]
        n = len(parsed)
        labels = tuple(labels) if labels is not None else tuple(range(n))
        return cls(labels, np.array([p[0] for p in parsed]), np.array([p[1] for p in parsed]),
                   np.array([p[2] for p in parsed]))

    @classmethod
    def from_state_vector(cls, psi: np.ndarray, labels: Sequence | None = None,
                          tol: float = 1e-9) -> "StabilizerTableau":
        """Brute-force stabilizer search over all Pauli strings (n <= 6)."""
        psi = np.asarray(psi, dtype=complex)
        n = int(round(np.log2(len(psi))))
        if 2**n != len(psi) or n > 6:
            raise GraphError("state vector must be a qubit state with at most 6 qubits")
        psi = psi / np.linalg.norm(psi)
        rows = []
        mat = np.zeros((0, 2 * n), dtype=np.uint8)
        for code in itertools.product(range(4), repeat=n):
            if not any(code):
                continue
            x = np.array([c in (1, 3) for c in code], dtype=np.uint8)
            z = np.array([c in (2, 3) for c in code], dtype=np.uint8)
            k = _from_sign(x, z, 1)
            ev = np.vdot(psi, apply_pauli_vec(psi, x, z, k))
            if abs(abs(ev) - 1) > tol:
                continue
            cand = np.vstack([mat, np.concatenate([x, z])[None]])
            if gf2_rank(cand) > len(rows):
                mat = cand
                rows.append((x, z, k if ev.real > 0 else (k + 2) % 4))
            if len(rows) == n:
                break
        if len(rows) != n:
            raise GraphError("state is not a stabilizer state")
        labels = tuple(labels) if labels is not None else tuple(range(n))
        return cls(labels, np.array([r[0] for r in rows]), np.array([r[1] for r in rows]),
                   np.array([r[2] for r in rows]))

    def copy(self) -> "StabilizerTableau":
        return StabilizerTableau(self.labels, self.x.copy(), self.z.copy(), self.k.copy())

    # views ----------------------------------------------------------------
    @property
    def n(self) -> int:
        return len(self.labels)

    def index(self, label) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise GraphError(f"unknown qubit {label!r}") from None

    def row(self, i):
        return self.x[i], self.z[i], int(self.k[i])

    def strings(self) -> list[str]:
        return [pauli_string(*self.row(i)) for i in range(self.n)]

    def is_valid(self) -> bool:
        """Generators independent, Hermitian and pairwise commuting."""
        if gf2_rank(np.concatenate([self.x, self.z], axis=1)) != self.n:
            return False
        sym = (self.x.astype(int) @ self.z.T.astype(int) + self.z.astype(int) @ self.x.T.astype(int)) % 2
        if sym.any():
            return False
        try:
            for i in range(self.n):
                _hermitian_sign(*self.row(i))
        except GraphError:
            return False
        return True

    def to_state_vector(self) -> np.ndarray:
        if self.n > MAX_DENSE_QUBITS:
            raise GraphError("too many qubits for a dense state vector")
        dim = 2**self.n
        for start in range(dim):
            v = np.zeros(dim, dtype=complex)
            v[start] = 1.0
            for i in range(self.n):
                v = 0.5 * (v + apply_pauli_vec(v, *self.row(i)))
            nrm = np.linalg.norm(v)
            if nrm > 1e-6:
                return v / nrm
        raise GraphError("empty stabilizer code")  # pragma: no cover

    def contains(self, x, z, k) -> bool | None:
        """True/False if ±P is in the group with the given sign, None if neither sign is."""
        M = np.concatenate([self.x, self.z], axis=1).T
        c = gf2_solve(M, np.concatenate([x, z]))
        if c is None:
            return None
        ax, az, ak = np.zeros(self.n, np.uint8), np.zeros(self.n, np.uint8), 0
        for i in np.flatnonzero(c):
            ax, az, ak = pauli_mul(ax, az, ak, *self.row(i))
        return ak % 4 == k % 4

    def same_state(self, other: "StabilizerTableau") -> bool:
        if self.labels != other.labels:
            other = other.reorder(self.labels)
        return all(self.contains(*other.row(i)) is True for i in range(other.n))

    def reorder(self, labels: Sequence) -> "StabilizerTableau":
        perm = [self.index(l) for l in labels]
        return StabilizerTableau(tuple(labels), self.x[:, perm], self.z[:, perm], self.k)

    # operations -----------------------------------------------------------
    def apply_clifford(self, qubit, U: np.ndarray) -> "StabilizerTableau":
        q = self.index(qubit)
        ix, iz = _single_image(U, PX), _single_image(U, PZ)
        t = self.copy()
        one = lambda a, b, c: (np.array([a], np.uint8), np.array([b], np.uint8), c)
        for r in range(self.n):
            fx, fz, fk = one(0, 0, 0)
            if self.x[r, q]:
                fx, fz, fk = pauli_mul(fx, fz, fk, *one(*ix))
            if self.z[r, q]:
                fx, fz, fk = pauli_mul(fx, fz, fk, *one(*iz))
            t.x[r, q], t.z[r, q] = fx[0], fz[0]
            t.k[r] = (self.k[r] + fk) % 4
        return t

    def apply_cz(self, a, b) -> "StabilizerTableau":
        """Conjugate by CZ: X_a -> X_a Z_b, X_b -> Z_a X_b."""
        qa, qb = self.index(a), self.index(b)
        t = self.copy()
        for r in range(self.n):
            xa, xb = int(self.x[r, qa]), int(self.x[r, qb])
            t.z[r, qb] ^= xa
            t.z[r, qa] ^= xb
            # the new Z_b^xa has to pass X_b^xb
            t.k[r] = (t.k[r] + 2 * (xa & xb)) % 4
        return t

    def _multiply_into(self, target: int, source: int):
        self.x[target], self.z[target], self.k[target] = pauli_mul(
            self.x[target], self.z[target], int(self.k[target]), *self.row(source))

    def measure_z(self, qubit, rng=None, outcome: int | None = None) -> MeasurementResult:
        q = self.index(qubit)
        t = self.copy()
        anti = np.flatnonzero(t.x[:, q])
        if anti.size:
            if outcome is None:
                if rng is None:
                    raise GraphError("random outcome needs an rng or a forced outcome")
                outcome = 1 if rng.random() < 0.5 else -1
            p = anti[0]
            for r in anti[1:]:
                t._multiply_into(r, p)
            t.x[p] = 0
            t.z[p] = 0
            t.z[p, q] = 1
            t.k[p] = 0 if outcome == 1 else 2
            return MeasurementResult(int(outcome), 0.5, t)
        e = np.zeros(self.n, np.uint8)
        e[q] = 1
        plus = t.contains(np.zeros(self.n, np.uint8), e, 0)
        value = 1 if plus else -1
        if outcome is not None and outcome != value:
            raise ImpossibleOutcomeError(f"Z outcome on {qubit!r} is fixed to {value}")
        return MeasurementResult(value, 1.0, t)

    def remove_qubit(self, qubit) -> "StabilizerTableau":
        """Drop a qubit that is in a product state with the rest."""
        q = self.index(qubit)
        t = self.copy()
        solo = [r for r in range(t.n)
                if (t.x[r, q] or t.z[r, q])
                and not np.delete(t.x[r], q).any() and not np.delete(t.z[r], q).any()]
        if not solo:
            raise GraphError(f"qubit {qubit!r} is entangled with the rest")
        p = solo[0]
        for r in range(t.n):
            if r != p and (t.x[r, q] or t.z[r, q]):
                t._multiply_into(r, p)
                if t.x[r, q] or t.z[r, q]:
                    raise GraphError(f"qubit {qubit!r} is entangled with the rest")
        keep_r = [r for r in range(t.n) if r != p]
        keep_c = [c for c in range(t.n) if c != q]
        k = t.k[keep_r].copy()
        return StabilizerTableau(tuple(l for l in t.labels if l != qubit),
                                 t.x[np.ix_(keep_r, keep_c)], t.z[np.ix_(keep_r, keep_c)], k)

    def as_graph(self) -> tuple[GraphRef, bool] | None:
        """Graph whose state this is, if the X block is invertible and all signs +.

        Returns ``(graph, exact)`` where ``exact`` is False when a Z-type sign
        pattern remains (the state is then the graph state up to Z flips).
        """
        Xi = gf2_inverse(self.x)
        if Xi is None:
            return None
        t = StabilizerTableau(self.labels, np.eye(self.n, dtype=np.uint8),
                              np.zeros_like(self.z), np.zeros(self.n, int))
        for r in range(self.n):
            ax, az, ak = np.zeros(self.n, np.uint8), np.zeros(self.n, np.uint8), 0
            for i in np.flatnonzero(Xi[r]):
                ax, az, ak = pauli_mul(ax, az, ak, *self.row(i))
            t.x[r], t.z[r], t.k[r] = ax, az, ak
        if np.any(np.diag(t.z)) or np.any(t.z != t.z.T):
            return None
        edges = [(self.labels[i], self.labels[j]) for i in range(self.n)
                 for j in range(i + 1, self.n) if t.z[i, j]]
        signs = [_hermitian_sign(*t.row(i)) for i in range(self.n)]
        return GraphRef.of(self.labels, edges), all(s > 0 for s in signs)


def gf2_inverse(M: np.ndarray) -> np.ndarray | None:
    n = M.shape[0]
    A, piv = _rref(np.concatenate([M, np.eye(n, dtype=np.uint8)], axis=1))
    if piv[:n] != list(range(n)):
        return None
    return A[:, n:]


def build_graph_state(g: GraphRef) -> StabilizerTableau:
    return StabilizerTableau.from_graph(g)


_ROTATE = {"X": H, "Y": H @ SDG, "Z": I2}


def measure_pauli(t: StabilizerTableau, qubit, basis: str, rng=None, outcome: int | None = None,
                  remove: bool = False) -> MeasurementResult:
    """Measure a single-qubit Pauli; the ±1 outcome is random unless fixed.

    With ``remove`` the measured qubit (now in a product state) is dropped.
    """
    if basis not in _ROTATE:
        raise GraphError(f"basis must be X, Y or Z, not {basis!r}")
    U = _ROTATE[basis]
    res = t.apply_clifford(qubit, U).measure_z(qubit, rng, outcome)
    tab = res.tableau
    tab = tab.remove_qubit(qubit) if remove else tab.apply_clifford(qubit, U.conj().T)
    return MeasurementResult(res.outcome, res.probability, tab)


# ---------------------------------------------------------------------------
# graph rewrite rules

def graph_measurement(g: GraphRef, v, basis: str, outcome: int, b0=None) -> tuple[GraphRef, dict]:
    """Graph and local byproducts left after a Pauli measurement of vertex ``v``.

    The remaining qubits are in ``U |G'>`` where ``U`` is the product of the
    returned ``{vertex: 2x2 unitary}`` byproducts.
    Z: G - v, with Z on the neighbours for outcome -1.
    Y: τ_v(G) - v, with √(-iZ) (outcome +1) or √(+iZ) (outcome -1) on the neighbours.
    X: τ_b0(τ_v(τ_b0(G)) - v) for a neighbour b0, with a √(±iY) on b0 and
    Z on part of the neighbourhood.
    """
    nv = g.neighbours(v)
    byp: dict = {}

    def put(w, U):
        byp[w] = U @ byp.get(w, I2)

    if basis == "Z":
        if outcome == -1:
            for w in nv:
                put(w, PZ)
        return g.without(v), byp
    if basis == "Y":
        for w in nv:
            put(w, sqrt_pauli(PZ, -outcome))
        return g.local_complement(v).without(v), byp
    if basis == "X":
        if not nv:
            if outcome != 1:
                raise ImpossibleOutcomeError("isolated vertex always gives X = +1")
            return g.without(v), byp
        b0 = b0 if b0 is not None else sorted(nv, key=g.vertices.index)[0]
        if b0 not in nv:
            raise GraphError("b0 must neighbour the measured vertex")
        nb0 = g.neighbours(b0)
        g2 = g.local_complement(b0).local_complement(v).local_complement(b0).without(v)
        # √(±iY) acts after the Z byproducts
        if outcome == 1:
            zs = nv - nb0 - {b0}
        else:
            zs = nb0 - nv - {v}
        for w in zs:
            put(w, PZ)
        put(b0, sqrt_pauli(PY, outcome))
        return g2, byp
    raise GraphError(f"basis must be X, Y or Z, not {basis!r}")


def z_measure_graph(g: GraphRef, v, rng) -> tuple[GraphRef, dict]:
    """Z-measure and remove ``v``; byproducts keyed by vertex name."""
    outcome = 1 if rng.random() < 0.5 else -1
    g2, byp = graph_measurement(g, v, "Z", outcome)
    return g2, {w: "Z" for w in byp}


def apply_local(t: StabilizerTableau, ops: dict) -> StabilizerTableau:
    for q, U in ops.items():
        t = t.apply_clifford(q, U)
    return t


# ---------------------------------------------------------------------------
# local-Clifford equivalence

# single-qubit Cliffords modulo Paulis, as binary maps of (x, z)
CLIFFORD_NAMES = ("I", "H", "S", "HS", "SH", "HSH")
_CLIFF_U = {"I": I2, "H": H, "S": S, "HS": H @ S, "SH": S @ H, "HSH": H @ S @ H}


def _binary(U) -> tuple[int, int, int, int]:
    """(a, b, c, d) with (x, z) -> (a x + b z, c x + d z) under conjugation by U."""
    xa, xc, _ = _single_image(U, PX)
    zb, zd, _ = _single_image(U, PZ)
    return int(xa), int(zb), int(xc), int(zd)


_CLIFF_BIN = {name: _binary(U) for name, U in _CLIFF_U.items()}


@dataclass
class LCWitness:
    """Per-qubit unitaries (Clifford then Pauli) mapping state ``a`` to ``b``."""

    cliffords: dict
    paulis: dict
    unitaries: dict = field(repr=False, default_factory=dict)

    def non_identity(self) -> dict:
        out = {}
        for q in self.cliffords:
            c, p = self.cliffords[q], self.paulis[q]
            if c != "I" or p != "I":
                out[q] = c if p == "I" else f"{p}{c}" if c != "I" else p
        return out


def is_local_clifford_equivalent(a: StabilizerTableau, b: StabilizerTableau
                                 ) -> tuple[bool, LCWitness | None]:
    """Decide whether ⊗U_i maps state ``a`` to state ``b`` for single-qubit Cliffords U_i.

    Solves the binary condition S_bᵀ P Q S_a = 0 for block-diagonal Q over
    GF(2) and searches its solution space qubit by qubit, trying the identity
    first. A Pauli layer then fixes the signs.
    """
    if set(a.labels) != set(b.labels):
        raise GraphError("tableaux act on different qubits")
    b = b.reorder(a.labels)
    n = a.n
    if n > MAX_LC_QUBITS:
        raise GraphError(f"local-Clifford search limited to {MAX_LC_QUBITS} qubits")
    Xa, Za, Xb, Zb = (m.T.astype(np.uint8) for m in (a.x, a.z, b.x, b.z))  # qubit x generator
    # unknowns (a_i, b_i, c_i, d_i) per qubit
    rows = []
    for j in range(n):
        for kk in range(n):
            r = np.zeros(4 * n, dtype=np.uint8)
            for i in range(n):
                r[4 * i + 0] ^= Zb[i, j] & Xa[i, kk]
                r[4 * i + 1] ^= Zb[i, j] & Za[i, kk]
                r[4 * i + 2] ^= Xb[i, j] & Xa[i, kk]
                r[4 * i + 3] ^= Xb[i, j] & Za[i, kk]
            rows.append(r)
    N = gf2_nullspace(np.array(rows))
    if N.shape[0] == 0:
        return False, None
    choice = _search(N, n)
    if choice is None:
        return False, None
    cliffs = {a.labels[i]: choice[i] for i in range(n)}
    t = a
    for q, name in cliffs.items():
        t = t.apply_clifford(q, _CLIFF_U[name])
    paulis = _sign_fix(t, b)
    if paulis is None:  # pragma: no cover - same group always admits a Pauli fix
        return False, None
    unitaries = {}
    for q in a.labels:
        P = {"I": I2, "X": PX, "Y": PY, "Z": PZ}[paulis[q]]
        unitaries[q] = P @ _CLIFF_U[cliffs[q]]
    return True, LCWitness(cliffs, paulis, unitaries)


def _search(N: np.ndarray, n: int):
    """Depth-first choice of a Clifford per qubit consistent with x = Nᵀ y."""

    def consistent(eqs):
        if not eqs:
            return True
        A = np.array([e[0] for e in eqs], dtype=np.uint8)
        rhs = np.array([e[1] for e in eqs], dtype=np.uint8)
        return gf2_solve(A, rhs) is not None

    def rec(i, eqs, acc):
        if i == n:
            return acc
        for name in CLIFFORD_NAMES:
            vals = _CLIFF_BIN[name]
            new = eqs + [(N[:, 4 * i + j], vals[j]) for j in range(4)]
            if consistent(new):
                out = rec(i + 1, new, acc + [name])
                if out is not None:
                    return out
        return None

    return rec(0, [], [])


def _sign_fix(t: StabilizerTableau, b: StabilizerTableau):
    """Pauli string P with P t P† = b, as {label: 'I'|'X'|'Y'|'Z'}."""
    n = t.n
    flips = []
    for i in range(n):
        c = t.contains(*b.row(i))
        if c is None:
            return None
        flips.append(0 if c else 1)
    # P = X^u Z^w anticommutes with row (x, z) iff u·z + w·x = 1
    M = np.concatenate([b.z, b.x], axis=1)
    sol = gf2_solve(M, np.array(flips, dtype=np.uint8))
    if sol is None:
        return None
    u, w = sol[:n], sol[n:]
    names = {(0, 0): "I", (1, 0): "X", (0, 1): "Z", (1, 1): "Y"}
    return {t.labels[i]: names[(int(u[i]), int(w[i]))] for i in range(n)}


# ---------------------------------------------------------------------------
# 4-chain rotation

def rz(theta):
    return np.cos(theta / 2) * I2 + 1j * np.sin(theta / 2) * PZ


def rx(theta):
    return np.cos(theta / 2) * I2 + 1j * np.sin(theta / 2) * PX


def basis_vector(alpha: float, m: int) -> np.ndarray:
    """(|0> ± e^{iα}|1>)/√2 for outcome m = 0 (+) or 1 (-)."""
    return np.array([1.0, (-1) ** m * np.exp(1j * alpha)]) / np.sqrt(2)


@dataclass
class RotationCheck:
    U_rot: np.ndarray
    byproduct: np.ndarray
    output: np.ndarray
    fidelity: float
    probability: float


def chain_rotation_check(alpha: float, beta: float, gamma: float, m1: int, m2: int, m3: int,
                         adaptive: bool = False) -> RotationCheck:
    """Measure qubits 1-3 of the 4-chain and compare qubit 4 with U_rot|+>.

    Non-adaptive bases B(α), B(β), B(γ) leave qubit 4 in
    H Z^m3 X^m2 Z^m1 · R_z((-1)^m2 γ) R_x((-1)^m1 β) R_z(α)|+> with
    R(θ) = exp(iθσ/2). With adaptive bases B((-1)^m1 β), B((-1)^m2 γ) the
    signs disappear from U_rot.
    """
    psi = StabilizerTableau.from_graph(GraphRef.chain(4)).to_state_vector().reshape(2, 2, 2, 2)
    b = (-1) ** m1 * beta if adaptive else beta
    g = (-1) ** m2 * gamma if adaptive else gamma
    for ang, m in ((alpha, m1), (b, m2), (g, m3)):
        psi = np.tensordot(basis_vector(ang, m).conj(), psi, axes=(0, 0))
    prob = float(np.vdot(psi, psi).real)
    out = psi / np.sqrt(prob)
    if adaptive:
        U = rz(gamma) @ rx(beta) @ rz(alpha)
    else:
        U = rz((-1) ** m2 * gamma) @ rx((-1) ** m1 * beta) @ rz(alpha)
    byp = H @ np.linalg.matrix_power(PZ, m3) @ np.linalg.matrix_power(PX, m2) @ np.linalg.matrix_power(PZ, m1)
    pred = byp @ U @ (np.array([1, 1]) / np.sqrt(2))
    f = float(abs(np.vdot(pred, out)) ** 2)
    return RotationCheck(U, byp, out, min(f, 1.0), prob)


# ---------------------------------------------------------------------------
# resource accounting

def expected_attempts(p: float) -> float:
    if not 0 < p <= 1:
        raise GraphError("success probability must lie in (0, 1]")
    return 1.0 / p


def geometric_attempts(p: float, trials: int, seed: int, threads: int = 1) -> np.ndarray:
    """Attempts-until-success samples, drawn block-wise from seeded streams."""
    expected_attempts(p)
    sizes = mc._block_sizes(int(trials), mc.BLOCK)
    parts = [mc.stream(seed, b).geometric(p, size=s) for b, s in enumerate(sizes)]
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)


@dataclass
class OverheadStats:
    strategy: str
    p_link: float
    target_size: int
    trials: int
    mean_attempts: float
    stderr_attempts: float
    mean_qubits: float
    stderr_qubits: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def resource_overhead(strategy: str, p_link: float, target_size: int, trials: int = 10_000,
                      seed: int = 0, block_size: int = 4, max_attempts: int = 10**6) -> OverheadStats:
    """Grow a linear cluster to ``target_size`` by fusing ``block_size`` clusters onto its end.

    A fusion succeeds with ``p_link``. On failure both link qubits are lost:
    ``recycle`` keeps the shortened cluster and reuses the block remnant as
    the next block; ``discard`` throws both away and starts over. Reports
    fusion attempts and fresh qubits consumed per finished cluster.
    """
    if strategy not in ("recycle", "discard"):
        raise GraphError("strategy must be 'recycle' or 'discard'")
    expected_attempts(p_link)
    if target_size < block_size:
        raise GraphError("target size must be at least one block")
    att = np.zeros(trials)
    used = np.zeros(trials)
    for i in range(trials):
        rng = mc.stream(seed, i)
        size, consumed, attempts, block = block_size, block_size, 0, 0
        while size < target_size:
            if block == 0:
                block, consumed = block_size, consumed + block_size
            attempts += 1
            if attempts > max_attempts:
                raise GraphError("attempt budget exhausted")
            if rng.random() < p_link:
                size, block = size + block, 0
            elif strategy == "recycle":
                size, block = size - 1, block - 1
                if size < 1:
                    size, consumed = block_size, consumed + block_size
                if block < 2:
                    block = 0
            else:
                size, consumed, block = block_size, consumed + block_size, 0
        att[i], used[i] = attempts, consumed
    sd = lambda v: float(v.std(ddof=1) / np.sqrt(len(v))) if len(v) > 1 else 0.0
    return OverheadStats(strategy, p_link, target_size, trials, float(att.mean()), sd(att),
                         float(used.mean()), sd(used))
