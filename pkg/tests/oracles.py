"""Independent reference computations used by the tests.

Nothing here calls into the package's solvers; values marked FROZEN were
computed once with the high-precision routines below and pinned.
"""

import itertools
import math

import mpmath as mp

mp.mp.dps = 50

# FROZEN: mpmath, 50 digits
X_EPS_B1_E005 = 1.0839585138826546          # root of the cubic at beta = 1, eps = 0.05
KAPPA_STAR_B1 = 0.8535533905932738
C_BETA_B1 = 3.536610783330463
LAMBDA_STAR_B1 = 1.553773974030037
H_ORIGIN_B1 = 1.4571067811865475            # h(0, 0) at beta = 1


def x_eps(beta, eps):
    """Root ``X > 1 + beta^2 eps`` of ``X (X - 1 - beta^2 eps)^2 = beta^2 eps^2 / 2`` by mp bisection."""
    b, e = mp.mpf(beta), mp.mpf(eps)
    lo = 1 + b * b * e
    hi = lo + 2 * b * e + 1
    f = lambda x: x * (x - 1 - b * b * e) ** 2 - b * b * e * e / 2
    for _ in range(400):
        mid = (lo + hi) / 2
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
    return (lo + hi) / 2


def kappa_eps(beta, eps):
    """Minus the minimum of the unnormalised potential, minimised in mp over (|Q|, |M|).

    In the aligned configuration the potential reduces to
    ``(s^2-1)^2/4 + eps (l^2-1)^2/4 - beta eps s l^2 / sqrt2``.
    """
    b, e = mp.mpf(beta), mp.mpf(eps)
    f = lambda s, l: (s * s - 1) ** 2 / 4 + e * (l * l - 1) ** 2 / 4 - b * e * s * l * l / mp.sqrt(2)
    s0 = mp.sqrt(x_eps(beta, eps))
    l0 = mp.sqrt(1 + mp.sqrt(2) * b * s0)
    s, l = mp.findroot([lambda s, l: mp.diff(lambda t: f(t, l), s),
                        lambda s, l: mp.diff(lambda t: f(s, t), l)], (s0, l0))
    return -f(s, l)


def all_pairings(idx):
    """All perfect matchings of ``idx``, pairing the last element first."""
    if not idx:
        yield ()
        return
    last, rest = idx[-1], idx[:-1]
    for j in range(len(rest)):
        others = rest[:j] + rest[j + 1:]
        for sub in all_pairings(others):
            yield ((rest[j], last),) + sub


def brute_force_matching(points):
    """Minimal total length and the lexicographically smallest optimal pairing."""
    n = len(points)
    best = None
    for p in all_pairings(tuple(range(n))):
        canon = tuple(sorted(tuple(sorted(pr)) for pr in p))
        L = math.fsum(math.dist(points[i], points[j]) for i, j in canon)
        if best is None or L < best[0] - 1e-11 or (abs(L - best[0]) <= 1e-11 and canon < best[1]):
            best = (L, canon)
    return best


def count_pairings(n):
    return math.prod(range(n - 1, 0, -2))


def permutation_matching_length(points):
    """Minimal matching length by scanning permutations (small inputs only)."""
    n = len(points)
    return min(math.fsum(math.dist(points[p[2 * i]], points[p[2 * i + 1]]) for i in range(n // 2))
               for p in itertools.permutations(range(n)))
