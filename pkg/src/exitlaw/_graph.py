import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components


def jump_graph(q: np.ndarray) -> csr_matrix:
    """Directed graph with an edge i -> j wherever q[i, j] > 0, i != j."""
    adj = q > 0
    np.fill_diagonal(adj, False)
    return csr_matrix(adj)


def reachable(adj: csr_matrix, sources) -> np.ndarray:
    """Boolean mask of nodes reachable from any of ``sources`` (inclusive)."""
    seen = np.zeros(adj.shape[0], dtype=bool)
    frontier = np.unique(np.asarray(sources, dtype=np.int64))
    seen[frontier] = True
    while frontier.size:
        nxt = np.concatenate(
            [adj.indices[adj.indptr[i]:adj.indptr[i + 1]] for i in frontier]
        )
        nxt = np.unique(nxt[~seen[nxt]])
        seen[nxt] = True
        frontier = nxt
    return seen


def strong_components(adj: csr_matrix) -> list:
    n_comp, lab = connected_components(adj, directed=True, connection="strong")
    return [np.flatnonzero(lab == c) for c in range(n_comp)]


def unkillable_states(q: np.ndarray, kappa: np.ndarray) -> np.ndarray:
    """Mask of states from which no state with positive killing rate is reachable."""
    adj = jump_graph(q)
    can_die = reachable(adj.T.tocsr(), np.flatnonzero(kappa > 0))
    return ~can_die
