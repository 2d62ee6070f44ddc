"""Exact rational W, v and r for the 3-node fixture (e1=(1,0), e2=(3/5,4/5), e3=(0,1)).

Frozen into tests/test_graph_rank.cpp.
"""
from fractions import Fraction as F

E = [(F(1), F(0)), (F(3, 5), F(4, 5)), (F(0), F(1))]
S = [F(9, 10), F(1, 2), F(1, 10)]


def cos(a, b):
    # all fixture vectors are unit length
    return a[0] * b[0] + a[1] * b[1]


def weights(include_diagonal=True):
    n = len(E)
    w = []
    for i in range(n):
        row = [max(cos(E[i], E[j]), F(0)) if (include_diagonal or i != j) else F(0) for j in range(n)]
        total = sum(row)
        w.append([x / total for x in row])
    return w


def solve(w, v, alpha):
    # (I - alpha W^T) r = (1 - alpha) v, Gauss-Jordan over rationals
    n = len(v)
    a = [[(F(1) if i == j else F(0)) - alpha * w[j][i] for j in range(n)] + [(1 - alpha) * v[i]] for i in range(n)]
    for c in range(n):
        p = next(r for r in range(c, n) if a[r][c] != 0)
        a[c], a[p] = a[p], a[c]
        a[c] = [x / a[c][c] for x in a[c]]
        for r in range(n):
            if r != c and a[r][c] != 0:
                a[r] = [x - a[r][c] * y for x, y in zip(a[r], a[c])]
    return [a[i][n] for i in range(n)]


def main():
    w = weights()
    v = [s / sum(S) for s in S]
    print("W =", [[str(x) for x in row] for row in w])
    print("v =", [str(x) for x in v])
    r = solve(w, v, F(9, 10))
    print("r(alpha=0.9) =", [str(x) for x in r], [float(x) for x in r])
    w_nd = weights(include_diagonal=False)
    print("W (no diagonal) =", [[str(x) for x in row] for row in w_nd])
    print("2x2 swap, alpha=1/2, v=(1,0):", [str(x) for x in solve([[F(0), F(1)], [F(1), F(0)]], [F(1), F(0)], F(1, 2))])


if __name__ == "__main__":
    main()
