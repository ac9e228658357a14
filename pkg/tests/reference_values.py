"""Reference (1,5/7)_8 matrices and irregular profiles, written out as coefficient tuples.

Coefficients are (c1, cp, cq, cpq) for c1 + cp*p + cq*q + cpq*p*q.
"""
Z = (0, 0, 0, 0)
ONE = (1, 0, 0, 0)
PQ = (0, 0, 0, 1)
ONE_M_PQ = (1, 0, 0, -1)
BOTH_KNOWN = (1, -1, -1, 1)  # 1 + pq - p - q
P_ONLY = (0, 1, 0, -1)  # p - pq
Q_ONLY = (0, 0, 1, -1)  # q - pq
EITHER = (0, 1, 1, -1)  # p + q - pq

M_F = [
    [ONE_M_PQ, Z, PQ, Z, Z],
    [Z, Z, ONE, Z, Z],
    [BOTH_KNOWN, P_ONLY, Z, Q_ONLY, PQ],
    [BOTH_KNOWN, Q_ONLY, Z, P_ONLY, PQ],
    [Z, Z, BOTH_KNOWN, Z, EITHER],
]

M_B = [
    [ONE_M_PQ, PQ, Z, Z, Z],
    [BOTH_KNOWN, Z, P_ONLY, Q_ONLY, PQ],
    [Z, ONE, Z, Z, Z],
    [BOTH_KNOWN, Z, Q_ONLY, P_ONLY, PQ],
    [Z, BOTH_KNOWN, Z, Z, EITHER],
]

# T(q) entries: "0", "1" or "q"
T_REFERENCE = [
    ["0", "0", "q", "0", "0"],
    ["q", "q", "q", "q", "q"],
    ["0", "1", "q", "0", "1"],
    ["0", "0", "q", "1", "1"],
    ["q", "1", "q", "1", "1"],
]

# state distributions of the 4-state code, as supports
ALPHABET_57 = [{0}, {0, 1}, {0, 2}, {0, 3}, {0, 1, 2, 3}]

REGULAR_THRESHOLD_UNPUNCTURED = 0.6428
REGULAR_THRESHOLD_HALF = 0.4729

# rate, profile, dbar, phi_p, p_th
TABLE_ROWS = [
    (1 / 2, "f2=0.801,f4=0.101,f8=0.046,f12=0.052", 2.998, 0.666, 0.490),
    (1 / 3, "f2=0.838,f5=0.034,f7=0.041,f8=0.042,f9=0.045", 2.873, 0.304, 0.665),
    (1 / 4, "f2=0.837,f5=0.055,f8=0.054,f12=0.054", 3.033, 0.011, 0.743),
]
