"""Ising problem instances, the Max-Cut reduction, and a brute-force oracle.

Energy convention: H(s) = -sum_{i != j} J_ij s_i s_j - sum_i h_i s_i, i.e. the
coupling sum runs over all *ordered* pairs, so every edge contributes twice.
The Max-Cut identity H = C + 2 sum_cut J_ij assumes exactly this convention.
"""

import numpy as np
import scipy.sparse as sp

# Couplings are stored dense up to this size and as CSR above it; at
# N=1000, p=0.1 the coupling matrix has ~1e5 nonzeros and the feedback
# drift is the dominant cost.
DENSE_LIMIT = 64

BRUTE_FORCE_LIMIT = 24


class CapacityError(Exception):
    """Raised when an exact method is asked for a problem beyond its bound."""


class IsingProblem:
    """Immutable spin-coupling problem: symmetric J with zero diagonal, field h.

    Spin configurations are plain integer arrays with entries +-1.
    """

    def __init__(self, J, h=None, label=""):
        if sp.issparse(J):
            J = J.tocsr()
            n = J.shape[0]
            if J.shape != (n, n):
                raise ValueError("J must be square")
            if J.diagonal().any():
                raise ValueError("J must have zero diagonal")
            if (J != J.T).nnz != 0:
                raise ValueError("J must be symmetric")
        else:
            J = np.asarray(J, dtype=float)
            if J.ndim != 2 or J.shape[0] != J.shape[1]:
                raise ValueError("J must be square")
            n = J.shape[0]
            if np.diag(J).any():
                raise ValueError("J must have zero diagonal")
            if not np.array_equal(J, J.T):
                raise ValueError("J must be symmetric")
            J = J.copy()
            J.flags.writeable = False
        if n < 1:
            raise ValueError("need at least one spin")
        if h is None:
            h = np.zeros(n)
        h = np.asarray(h, dtype=float).copy()
        if h.shape != (n,):
            raise ValueError(f"h must have shape ({n},)")
        h.flags.writeable = False
        self.n = n
        self.J = J
        self.h = h
        self.label = label

    @property
    def is_sparse(self):
        return sp.issparse(self.J)

    def dense_J(self):
        return self.J.toarray() if self.is_sparse else self.J

    def couple(self, x):
        """Return (x @ J) for x of shape (..., n); works for dense and CSR J."""
        x = np.asarray(x)
        if x.shape[-1] != self.n:
            raise ValueError(f"last axis must have length {self.n}")
        if self.is_sparse:
            flat = x.reshape(-1, self.n)
            # CSR @ dense is the fast path; J is symmetric so x @ J = (J @ x.T).T
            return np.ascontiguousarray((self.J @ flat.T).T).reshape(x.shape)
        return x @ self.J

    def __repr__(self):
        kind = "sparse" if self.is_sparse else "dense"
        return f"IsingProblem(n={self.n}, {kind}, label={self.label!r})"


def _check_spins(spins, n):
    spins = np.asarray(spins)
    if spins.shape[-1] != n:
        raise ValueError(f"spin configuration must have length {n}, got {spins.shape[-1]}")
    if not np.all(np.abs(spins) == 1):
        raise ValueError("spin entries must be exactly +1 or -1")
    return spins.astype(float)


def ising_energy(problem, spins):
    """Energy of one configuration or a batch (shape (..., n))."""
    s = _check_spins(spins, problem.n)
    quad = -np.sum(s * problem.couple(s), axis=-1)
    return quad - s @ problem.h


class WeightedGraph:
    """Undirected graph with strictly positive edge weights, no self-loops."""

    def __init__(self, n_vertices, edges):
        if n_vertices < 1:
            raise ValueError("need at least one vertex")
        seen = set()
        clean = []
        for u, v, w in edges:
            u, v, w = int(u), int(v), float(w)
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            if not (0 <= u < n_vertices and 0 <= v < n_vertices):
                raise ValueError(f"edge ({u},{v}) out of range")
            if w <= 0:
                raise ValueError(f"edge ({u},{v}) has non-positive weight {w}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
            clean.append((u, v, w))
        self.n_vertices = n_vertices
        self.edges = tuple(clean)


def cut_weight(graph, spins):
    """Total weight of edges whose endpoints carry opposite spins."""
    s = _check_spins(spins, graph.n_vertices)
    return sum(w for u, v, w in graph.edges if s[u] != s[v])


def maxcut_to_ising(graph):
    """Map Max-Cut to Ising: J_ij = -w(e_ij), h = 0.

    Minimizing H maximizes the cut; H(s) = C + 2*sum_cut J with
    C = -sum_{i,j} J_ij over ordered pairs.
    """
    J = np.zeros((graph.n_vertices, graph.n_vertices))
    for u, v, w in graph.edges:
        J[u, v] = -w
        J[v, u] = -w
    return IsingProblem(J, label="maxcut")


def ring_afm(n):
    """Circular antiferromagnet: J_ij = -1 for |i-j| = 1 or n-1, else 0."""
    if n < 3:
        raise ValueError("ring needs n >= 3")
    i = np.arange(n)
    J = np.zeros((n, n))
    J[i, (i + 1) % n] = -1.0
    J[i, (i - 1) % n] = -1.0
    if n > DENSE_LIMIT:
        J = sp.csr_array(J)
    return IsingProblem(J, label=f"ring_afm_{n}")


def random_graph_problem(n, p, seed):
    """Random +-1 couplings: each unordered pair nonzero with probability p.

    Fully determined by (n, p, seed).
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    iu, ju = np.triu_indices(n, k=1)
    present = rng.random(iu.size) < p
    signs = np.where(rng.random(iu.size) < 0.5, 1.0, -1.0)
    vals = np.where(present, signs, 0.0)
    if n > DENSE_LIMIT:
        keep = present.nonzero()[0]
        rows = np.concatenate([iu[keep], ju[keep]])
        cols = np.concatenate([ju[keep], iu[keep]])
        data = np.concatenate([vals[keep], vals[keep]])
        J = sp.csr_array(sp.coo_array((data, (rows, cols)), shape=(n, n)))
    else:
        J = np.zeros((n, n))
        J[iu, ju] = vals
        J[ju, iu] = vals
    return IsingProblem(J, label=f"random_{n}_p{p}_seed{seed}")


def _spins_from_index(idx, n):
    """Map integers to +-1 configurations; bit b of idx is spin b."""
    idx = np.asarray(idx, dtype=np.int64)
    bits = (idx[:, None] >> np.arange(n)) & 1
    return (2 * bits - 1).astype(np.int8)


def brute_force_ground_state(problem, chunk=1 << 16):
    """All minimizing configurations and the minimum energy, by enumeration.

    Exact for n <= 24; degenerate minima are matched within 1e-12 relative.
    Returns (list of +-1 int arrays, energy).
    """
    n = problem.n
    if n > BRUTE_FORCE_LIMIT:
        raise CapacityError(f"brute force bounded at n <= {BRUTE_FORCE_LIMIT}, got {n}")
    total = 1 << n
    best = np.inf
    best_idx = []
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        energies = ising_energy(problem, _spins_from_index(idx, n))
        lo = energies.min()
        tol = 1e-12 * max(1.0, abs(lo), abs(best) if np.isfinite(best) else 0.0)
        if lo < best - tol:
            best = lo
            best_idx = []
        keep = energies <= best + tol
        best_idx.extend(idx[keep].tolist())
    configs = [np.asarray(c, dtype=np.int8) for c in _spins_from_index(np.array(best_idx), n)]
    return configs, float(best)


def write_problem(problem, path):
    """Serialize to the text format: `ising <n>`, one h line, upper-triangle triples."""
    lines = [f"ising {problem.n}"]
    lines.append("h " + " ".join(repr(float(v)) for v in problem.h))
    if problem.is_sparse:
        coo = sp.coo_array(problem.J)
        entries = sorted(
            (int(i), int(j), float(v)) for i, j, v in zip(coo.row, coo.col, coo.data) if i < j
        )
    else:
        iu, ju = np.nonzero(np.triu(problem.J, k=1))
        entries = [(int(i), int(j), float(problem.J[i, j])) for i, j in zip(iu, ju)]
    for i, j, v in entries:
        lines.append(f"{i} {j} {v!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_problem(path):
    """Parse the text format written by write_problem; exact round-trip."""
    with open(path) as fh:
        raw = [ln.strip() for ln in fh if ln.strip()]
    if not raw or not raw[0].startswith("ising "):
        raise ValueError(f"{path}: expected header 'ising <n>'")
    n = int(raw[0].split()[1])
    if len(raw) < 2 or not raw[1].startswith("h "):
        raise ValueError(f"{path}: expected field line 'h ...' after header")
    h = np.array([float(tok) for tok in raw[1].split()[1:]])
    if h.size != n:
        raise ValueError(f"{path}: h has {h.size} entries, expected {n}")
    rows, cols, vals = [], [], []
    for ln in raw[2:]:
        tok = ln.split()
        if len(tok) != 3:
            raise ValueError(f"{path}: malformed coupling line {ln!r}")
        i, j, v = int(tok[0]), int(tok[1]), float(tok[2])
        if not (0 <= i < j < n):
            raise ValueError(f"{path}: coupling indices ({i},{j}) not upper-triangle")
        rows += [i, j]
        cols += [j, i]
        vals += [v, v]
    if n > DENSE_LIMIT:
        J = sp.csr_array(sp.coo_array((vals, (rows, cols)), shape=(n, n)))
    else:
        J = np.zeros((n, n))
        J[rows, cols] = vals
    return IsingProblem(J, h=h, label=f"file:{path}")
