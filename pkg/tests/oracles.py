"""Reference computations that share no code with the package."""
from fractions import Fraction
from itertools import product


def privileged_oracle(xs):
    n = len(xs)
    out = set()
    for i in range(1, n + 1):
        own, left = xs[i - 1], xs[(i - 2) % n]
        if (i == 1 and own == left) or (i != 1 and own != left):
            out.add(i)
    return out


def gray_oracle(x, m):
    b = format(x, f"0{m}b")
    return tuple(int(b[0]) if i == 0 else int(b[i - 1] != b[i]) for i in range(m))


def legal_oracle(model, writes, read, domain, initial):
    """writes: list of (start, end or None, value) in order; read: (start, end)."""
    s, e = read
    old = initial
    overlapping = []
    for ws, we, v in writes:
        if we is not None and we < s:
            old = v
        elif ws <= e:
            overlapping.append(v)
    if model == "atomic":
        last = old
        for ws, we, v in writes:
            if we is not None and s <= we <= e:
                last = v
        return {last}
    if model == "regular":
        return {old, *overlapping}
    return set(domain) if overlapping else {old}


def chain_oracle(p, n=3):
    """Binary ring chain built by enumerating every (processor, read) outcome."""
    states = list(product((0, 1), repeat=n))
    P = {s: {t: Fraction(0) for t in states} for s in states}
    for s in states:
        for i in range(n):
            for seen, w in ((s[i - 1], p), (1 - s[i - 1], 1 - p)):
                t = list(s)
                if i == 0 and seen == s[0]:
                    t[0] = 1 - s[0]
                elif i != 0 and seen != s[i]:
                    t[i] = seen
                P[s][tuple(t)] += Fraction(1, n) * w
    return states, P


def stationary_oracle(states, P):
    """Solve pi (P - I) = 0 with sum(pi) = 1 by exact Gaussian elimination."""
    S = len(states)
    A = [[P[states[i]][states[j]] - (1 if i == j else 0) for i in range(S)] for j in range(S)]
    A[-1] = [Fraction(1)] * S
    b = [Fraction(0)] * (S - 1) + [Fraction(1)]
    M = [row[:] + [bv] for row, bv in zip(A, b)]
    for c in range(S):
        piv = next(r for r in range(c, S) if M[r][c] != 0)
        M[c], M[piv] = M[piv], M[c]
        f = M[c][c]
        M[c] = [v / f for v in M[c]]
        for r in range(S):
            if r != c and M[r][c] != 0:
                g = M[r][c]
                M[r] = [a - g * bb for a, bb in zip(M[r], M[c])]
    return [M[i][S] for i in range(S)]
