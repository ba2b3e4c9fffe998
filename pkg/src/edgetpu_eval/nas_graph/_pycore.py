"""Pure-Python cell canonicalization kernel.

Mirrors ``_core.pyx`` operation for operation; both must return identical
codes for every input. Cells are passed in a packed form:

* ``n``: vertex count (2..7)
* ``bits``: upper-triangular adjacency, bit ``k`` set for the ``k``-th pair
  ``(i, j)``, ``i < j``, in row-major order
* ``labels``: per-vertex op codes (0 input, 1 conv3x3, 2 conv1x1,
  3 maxpool3x3, 4 output)

A canonical code packs ``n`` (bits 42..45), the relabeled op codes (3 bits
per position, bits 21..41) and the relabeled adjacency (bits 0..20). It is
the minimum such packing over every topological ordering reachable by the
colour-guided search, so two cells share a code iff they are isomorphic.
"""

MASK64 = 0xFFFFFFFFFFFFFFFF
_IN_SALT = 0x51AF2D3C8E4B6A17
_OUT_SALT = 0x2C6F0E9D4B7A3185


def mix64(x):
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def pair_index(i, j, n):
    return i * n - i * (i + 1) // 2 + (j - i - 1)


def _edges(n, bits):
    edges = []
    k = 0
    for i in range(n):
        for j in range(i + 1, n):
            if (bits >> k) & 1:
                edges.append((i, j))
            k += 1
    return edges


def is_full_dag(n, bits):
    """Every non-output vertex has a successor and every non-input a predecessor."""
    outdeg = [0] * n
    indeg = [0] * n
    for i, j in _edges(n, bits):
        outdeg[i] += 1
        indeg[j] += 1
    for v in range(n - 1):
        if outdeg[v] == 0:
            return False
    for v in range(1, n):
        if indeg[v] == 0:
            return False
    return True


def valid_matrices(n, max_edges):
    npairs = n * (n - 1) // 2
    out = []
    for bits in range(1 << npairs):
        if bin(bits).count("1") > max_edges:
            continue
        if is_full_dag(n, bits):
            out.append(bits)
    return out


def _colors(n, edges, labels):
    indeg = [0] * n
    outdeg = [0] * n
    for i, j in edges:
        outdeg[i] += 1
        indeg[j] += 1
    col = [mix64(labels[v] * 64 + indeg[v] * 8 + outdeg[v]) for v in range(n)]
    for _ in range(n):
        s_in = [0] * n
        s_out = [0] * n
        for i, j in edges:
            s_in[j] = (s_in[j] + col[i]) & MASK64
            s_out[i] = (s_out[i] + col[j]) & MASK64
        new = [0] * n
        for v in range(n):
            h = mix64(col[v] ^ mix64((s_in[v] + _IN_SALT) & MASK64))
            new[v] = mix64(h ^ mix64((s_out[v] + _OUT_SALT) & MASK64))
        col = new
    return col


def canonical_code(n, bits, labels):
    edges = _edges(n, bits)
    col = _colors(n, edges, labels)
    pred = [0] * n
    for i, j in edges:
        pred[j] |= 1 << i
    best = [-1]
    pos = [0] * n

    def leaf():
        adj = 0
        for i, j in edges:
            adj |= 1 << pair_index(pos[i], pos[j], n)
        lab = 0
        for v in range(n):
            lab |= labels[v] << (3 * pos[v])
        code = (n << 42) | (lab << 21) | adj
        if best[0] < 0 or code < best[0]:
            best[0] = code

    def search(placed, depth):
        if depth == n:
            leaf()
            return
        cmin = None
        for v in range(n):
            if not (placed >> v) & 1 and (pred[v] & ~placed) == 0:
                if cmin is None or col[v] < cmin:
                    cmin = col[v]
        for v in range(n):
            if not (placed >> v) & 1 and (pred[v] & ~placed) == 0 and col[v] == cmin:
                pos[v] = depth
                search(placed | (1 << v), depth + 1)

    search(0, 0)
    return best[0]


def labeling(n, index):
    """Op codes for labeling ``index`` (interior vertex 1 is the most significant digit)."""
    labels = [0] * n
    labels[n - 1] = 4
    for v in range(n - 2, 0, -1):
        labels[v] = 1 + index % 3
        index //= 3
    return labels


def matrix_codes(n, matrices):
    """Canonical codes for every (matrix, labeling) pair, matrix-major."""
    nlab = 3 ** (n - 2)
    out = []
    for bits in matrices:
        for li in range(nlab):
            out.append(canonical_code(n, bits, labeling(n, li)))
    return out
