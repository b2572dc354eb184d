"""Independent high-precision evaluation of the fixture values frozen into the
C++ unit tests. Uses mpmath/sympy only; shares no code with the library.

    python3 tests/oracles/frozen_values.py
"""
import mpmath as mp
import sympy as sp

mp.mp.dps = 40


def q(x):
    return mp.erfc(x / mp.sqrt(2)) / 2


def q_inverse_bisect(p):
    lo, hi = mp.mpf(-40), mp.mpf(40)
    for _ in range(400):
        mid = (lo + hi) / 2
        if q(mid) > p:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def dispersion(snr):
    return 1 - 1 / (1 + mp.mpf(snr)) ** 2


def rate(W, snr, L, e, normalized=True):
    pen = mp.sqrt(dispersion(snr) / L) * q_inverse_bisect(mp.mpf(e))
    if normalized:
        return W * (mp.log(1 + snr, 2) - pen / mp.log(2))
    return W * mp.log(1 + snr, 2) - pen


def main():
    print("q_inverse(0.001)        =", mp.nstr(q_inverse_bisect(mp.mpf("0.001")), 20))
    print("q_inverse(0.002)        =", mp.nstr(q_inverse_bisect(mp.mpf("0.002")), 20))
    print("q_inverse(1e-6)         =", mp.nstr(q_inverse_bisect(mp.mpf("1e-6")), 20))
    print("dispersion(20)          =", mp.nstr(dispersion(20), 20))
    ru = rate(mp.mpf(10) ** 6, 20, 200, mp.mpf("0.001"))
    print("rate_u normalized W=1e6 =", mp.nstr(ru, 20))
    print("rate_u literal W=1e6    =", mp.nstr(rate(mp.mpf(10) ** 6, 20, 200, mp.mpf("0.001"), False), 20))
    rd = rate(mp.mpf(10) ** 6, 30, 200, mp.mpf("0.002"))
    print("rate_d normalized W=1e6 =", mp.nstr(rd, 20))
    print("max_delay(0.01,1e-3,4.0774e6) =", mp.nstr(-mp.log(mp.mpf("0.01")) / (mp.mpf("0.001") * mp.mpf("4.0774e6")), 20))
    # uplink departure, second branch, deterministic link: C_u(theta_u - theta_d) = R_u
    tu, td, lam = mp.mpf("0.001"), mp.mpf("0.002"), mp.mpf(200000)
    lu = ((td - tu) * ru + lam * tu) / td
    print("L_u(W_u=1e6)            =", mp.nstr(lu, 20))
    print("lambda_d(W_u=1e6,k_s=10)=", mp.nstr(mp.mpf(10 * 20) / (1000 * 10) * lu, 20))
    # k_s = 17 capacity residual at the full 1.5 MHz on the uplink
    print("C_u(1.5e6) - lambda_u(17) =", mp.nstr(rate(mp.mpf("1.5e6"), 20, 200, mp.mpf("0.001")) - 17 * 1000 / mp.mpf("0.05"), 20))

    # plant fixtures, exact rationals
    vs, Td = sp.Rational(1, 8), sp.Rational(1, 20)
    A = sp.Matrix([[0, 1, 0], [0, 0, 1], [0, 0, -1 / vs]])
    B = sp.Matrix([0, 0, -1 / vs])
    At = Td * A + sp.eye(3)
    Bt = Td * B
    X = sp.Matrix([100, 0, 0])
    K = sp.Matrix([[sp.Rational(-1, 10), sp.Rational(-1, 2), sp.Rational(-1, 5)]])
    P = sp.eye(3)
    c = sp.Rational(9, 4) / 10
    m = At * X + Bt * K * X
    ax = At * X
    BK = Bt * K
    F1 = (m.T * P * m)[0] + (BK.T * P * BK).trace() * c - (ax.T * P * ax)[0]
    F2 = (X.T * P * X)[0] - (ax.T * P * ax)[0]
    print("F1 =", F1, "=", sp.N(F1, 20), " F2 =", F2)

    # brute-force rollout and cost under a fixed time-invariant gain, eps_c = 0
    Kf = sp.Matrix([[sp.Rational(1, 10), sp.Rational(1, 2), sp.Rational(1, 5)]])
    R = sp.Rational(1, 100)
    S = sp.eye(3)
    N = 10
    xs, us = [X], []
    for _ in range(N - 1):
        u = (Kf * xs[-1])[0]
        us.append(u)
        xs.append(At * xs[-1] + Bt * u)
    J = sum(((x.T * P * x)[0] + R * u * u) for x, u in zip(xs[:-1], us)) + (xs[-1].T * S * xs[-1])[0]
    print("rollout X_N =", [sp.N(v, 20) for v in xs[-1]])
    print("rollout J   =", sp.N(J, 25))


if __name__ == "__main__":
    main()
