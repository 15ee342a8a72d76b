"""Independent reference implementations used only by the tests.

Plain Python loops, no shared code with the library paths they check.
"""

import math


def dot_measure(rows, values):
    out = []
    for row in rows:
        acc = 0.0
        for a, b in zip(row, values):
            acc += float(a) * float(b)
        out.append(acc)
    return out


def two_pass_mse(truth, pred):
    total = 0
    count = 0
    for t_row, p_row in zip(truth, pred):
        for t, p in zip(t_row, p_row):
            total += (float(t) - float(p)) ** 2
            count += 1
    return total / count


def pointwise_product(a, b):
    return [float(x) * float(y) for x, y in zip(a, b)]


def matvec(matrix, vec):
    return [sum(float(m) * float(v) for m, v in zip(row, vec)) for row in matrix]


def gauss_solve(a, b):
    """Solve ``a @ x = b`` for a matrix right-hand side by Gaussian elimination with partial pivoting."""
    n = len(a)
    m = [list(map(float, a[i])) + list(map(float, b[i])) for i in range(n)]
    width = len(m[0])
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(m[r][col]))
        m[col], m[piv] = m[piv], m[col]
        for r in range(n):
            if r != col:
                f = m[r][col] / m[col][col]
                for c in range(col, width):
                    m[r][c] -= f * m[col][c]
    return [[m[i][j] / m[i][i] for j in range(n, width)] for i in range(n)]


def normal_equations_wiener(spectra, measurements, ridge):
    """W solving W (C^T C / N + ridge tr/p I) = Lambda^T C / N, assembled pair by pair."""
    n = len(spectra[0])
    p = len(measurements[0])
    N = len(spectra)
    a_cc = [[0.0] * p for _ in range(p)]
    a_lc = [[0.0] * p for _ in range(n)]
    for lam, c in zip(spectra, measurements):
        for i in range(p):
            for j in range(p):
                a_cc[i][j] += c[i] * c[j]
            for k in range(n):
                a_lc[k][i] += lam[k] * c[i]
    a_cc = [[v / N for v in row] for row in a_cc]
    a_lc = [[v / N for v in row] for row in a_lc]
    tr = sum(a_cc[i][i] for i in range(p))
    for i in range(p):
        a_cc[i][i] += ridge * tr / p
    # W^T = a_cc^{-1} a_lc^T
    wt = gauss_solve(a_cc, [[a_lc[k][i] for k in range(n)] for i in range(p)])
    return [[wt[i][k] for i in range(p)] for k in range(n)]


def _sse(values):
    if not values:
        return 0.0
    mean = sum(values) / len(values)
    return sum((v - mean) ** 2 for v in values)


def exhaustive_splits(X, y, min_leaf=1):
    """Every admissible ``(weighted child variance, channel, threshold)``, brute force."""
    m = len(y)
    p = len(X[0])
    out = []
    for f in range(p):
        vals = sorted(set(float(row[f]) for row in X))
        for a, b in zip(vals, vals[1:]):
            t = 0.5 * (a + b)
            if t >= b:
                t = a
            left = [float(y[i]) for i in range(m) if X[i][f] <= t]
            right = [float(y[i]) for i in range(m) if X[i][f] > t]
            if len(left) < min_leaf or len(right) < min_leaf:
                continue
            out.append(((_sse(left) + _sse(right)) / m, f, t))
    return out


def best_exhaustive_split(X, y, min_leaf=1):
    cands = exhaustive_splits(X, y, min_leaf)
    if not cands:
        return None
    return min(cands, key=lambda c: (c[0], c[1], c[2]))


def psnr_db(mse, peak=1.0):
    return math.inf if mse == 0 else 10 * math.log10(peak * peak / mse)
