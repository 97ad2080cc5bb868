"""Reference values for the unit and acceptance tests.

Run with `python3 tests/oracles/oracles.py`; the printed numbers are frozen
into the C++ tests. Everything is evaluated with mpmath at 40 digits,
independently of the library's own formulas.
"""

import itertools

import mpmath as mp
import numpy as np

mp.mp.dps = 40


def show(name, value):
    print(f"{name} = {mp.nstr(value, 20)}")


def comparison_angle(H, a, b, c):
    """Angle opposite c in the model triangle with sides a, b, c."""
    if H == 0:
        return mp.acos((a * a + b * b - c * c) / (2 * a * b))
    k = mp.sqrt(abs(H))
    if H > 0:
        return mp.acos((mp.cos(k * c) - mp.cos(k * a) * mp.cos(k * b)) / (mp.sin(k * a) * mp.sin(k * b)))
    return mp.acos((mp.cosh(k * a) * mp.cosh(k * b) - mp.cosh(k * c)) / (mp.sinh(k * a) * mp.sinh(k * b)))


def cpe(nu):
    s = mp.sin(mp.pi / 36)
    return mp.mpf(18) / 19 * mp.acos(s + (1 + s) / nu)


def packing_count(n, theta):
    full = mp.quad(lambda t: mp.sin(t) ** (n - 2), [0, mp.pi])
    cap = mp.quad(lambda t: mp.sin(t) ** (n - 2), [0, theta / 2])
    return full / cap


def sphere_area(n):
    return 2 * mp.pi ** (mp.mpf(n) / 2) / mp.gamma(mp.mpf(n) / 2)


def model_volume(n, H, r):
    if H == 0:
        sn = lambda t: t
    elif H > 0:
        k = mp.sqrt(H)
        r = min(r, mp.pi / k)
        sn = lambda t: mp.sin(k * t) / k
    else:
        k = mp.sqrt(-H)
        sn = lambda t: mp.sinh(k * t) / k
    return sphere_area(n) * mp.quad(lambda t: sn(t) ** (n - 1), [0, r])


def covering(n, H, r, eps):
    small = model_volume(n, H, eps / 2)
    return mp.ceil(model_volume(n, H, r + eps / 2) / small), mp.ceil(model_volume(n, H, 5 * eps / 2) / small)


def regularity_angle_bound(t, e):
    return mp.mpf(18) / 19 * mp.acos(-1 - (e * e - 4 * e * t) / (2 * t * t))


def main():
    print("# comparison angles")
    show("euclid(3,4,5)", comparison_angle(0, 3, 4, 5))
    show("euclid(4,5,3)", comparison_angle(0, 4, 5, 3))
    show("sphere1(1,1.2,0.9)", comparison_angle(1, 1, mp.mpf("1.2"), mp.mpf("0.9")))
    show("sphere4(0.5,0.6,0.45)", comparison_angle(4, mp.mpf("0.5"), mp.mpf("0.6"), mp.mpf("0.45")))
    show("hyp1(1,1.2,0.9)", comparison_angle(-1, 1, mp.mpf("1.2"), mp.mpf("0.9")))
    show("hyp1(5,5,9.99)", comparison_angle(-1, 5, 5, mp.mpf("9.99")))

    print("# critical-point angle bound")
    s = mp.sin(mp.pi / 36)
    show("threshold", (1 + s) / (1 - s))
    show("cpe(5/4)", cpe(mp.mpf(5) / 4))
    show("cpe(2)", cpe(2))
    show("cpe(10)", cpe(10))
    show("17pi/38", 17 * mp.pi / 38)

    print("# packing")
    theta = 6 * mp.pi / 19
    for n in range(2, 7):
        show(f"packing({n}, 6pi/19)", packing_count(n, theta))
        show(f"(19/3)^{n - 1}", (mp.mpf(19) / 3) ** (n - 1))
    show("packing(3, 1)", packing_count(3, 1))
    show("packing(4, 0.7)", packing_count(4, mp.mpf("0.7")))
    for n in (2, 3, 4):
        show(f"rank_bound({n})", mp.floor(packing_count(n, cpe(mp.mpf(5) / 4))))

    print("# sin power integrals at r = 1.3")
    for k in range(6):
        show(f"int_0^1.3 sin^{k}", mp.quad(lambda t: mp.sin(t) ** k, [0, mp.mpf("1.3")]))

    print("# model volumes")
    show("V(2,-1,1)", model_volume(2, -1, 1))
    show("V(3,1,1)", model_volume(3, 1, 1))
    show("V(3,-1,0.5)", model_volume(3, -1, mp.mpf("0.5")))
    show("V(4,1,pi)", model_volume(4, 1, mp.pi))
    show("V(2,4,0.5)", model_volume(2, 4, mp.mpf("0.5")))
    show("V(2,0,2)", model_volume(2, 0, 2))
    print("covering(2,0,1,0.1) =", covering(2, 0, 1, mp.mpf("0.1")))
    print("covering(3,-1,1,0.2) =", covering(3, -1, 1, mp.mpf("0.2")))
    print("covering(2,-0.5,2,0.3) =", covering(2, mp.mpf("-0.5"), 2, mp.mpf("0.3")))

    print("# betti bound, n=2 H=0 r0=1 D=1 rac=0.4 (hand unroll)")
    # r_k = 2D/10^k, eps_k = r_k/1000; N1 = ceil((r + eps/2)^2/(eps/2)^2) = 2001^2
    N1 = (2 * 1000 + 1) ** 2
    factor = mp.log(3, 2) + N1
    levels = []
    prefix = mp.mpf(0)
    for k in range(4):
        r = mp.mpf(2) / 10 ** k
        if r <= mp.mpf("0.4") / 20:
            levels.append((k, prefix + 22 * factor))
        prefix += factor
    print("N1 =", N1, "N2 =", 25)
    for k, v in levels:
        show(f"log2 bound at level {k}", v)

    print("# pi1 generator bound, n=2 H=0 r0=1 D=1 rac=0.4")
    r1 = mp.mpf("0.4") / 6
    n1, _ = covering(2, 0, 1, r1)
    print("N1 =", n1, "per_ball =", mp.floor(mp.mpf(19) / 3), "value =", n1 * 6)

    print("# regularity angle bound")
    show("rab(0.1,0.01)", regularity_angle_bound(mp.mpf("0.1"), mp.mpf("0.01")))
    show("rab(1,0.5)", regularity_angle_bound(1, mp.mpf("0.5")))
    show("rab(t,0)", mp.mpf(18) / 19 * mp.pi)

    print("# hyperbolic distance in the Poincare disk, K=-1")
    x = mp.matrix([mp.mpf("0.1"), mp.mpf("0.2")])
    y = mp.matrix([mp.mpf("-0.3"), mp.mpf("0.25")])
    nx, ny = mp.norm(x) ** 2, mp.norm(y) ** 2
    show("d_hyp", mp.acosh(1 + 2 * mp.norm(x - y) ** 2 / ((1 - nx) * (1 - ny))))

    print("# sphere distance between chart points (theta, phi)")
    def embed(th, ph):
        return mp.matrix([mp.sin(th) * mp.cos(ph), mp.sin(th) * mp.sin(ph), mp.cos(th)])
    a = embed(mp.mpf("0.7"), mp.mpf("0.3"))
    b = embed(mp.mpf("2.1"), mp.mpf("-1.2"))
    show("d_sphere", mp.acos((a.T * b)[0]))

    print("# ellipsoid (1,1,0.8) Gaussian curvature")
    show("K at (1,0,0)", mp.mpf(1) / (mp.mpf("0.8") ** 2))
    show("K at (0,0,0.8)", mp.mpf("0.8") ** 2)

    print("# torus Z^2 excess for p0=(0,0), p1=(0.5,0): 401x401 grid maximum")
    def tdist(p, q):
        d = np.abs(np.asarray(p) - np.asarray(q))
        d = np.minimum(d % 1.0, 1.0 - d % 1.0)
        return np.hypot(d[0], d[1])
    g = np.linspace(0.0, 1.0, 401)
    best = (-1.0, None)
    for u, v in itertools.product(g, g):
        e = tdist((0, 0), (u, v)) + tdist((0.5, 0), (u, v)) - 0.5
        if e > best[0]:
            best = (e, (u, v))
    print("max excess =", repr(best[0]), "at", best[1], " sqrt(2)/2 =", repr(float(mp.sqrt(2) / 2)))

    print("# short basis of the lattice with rows (2,1),(1,3) by enumeration")
    B = np.array([[2.0, 1.0], [1.0, 3.0]]).T
    vecs = []
    for c in itertools.product(range(-6, 7), repeat=2):
        if c != (0, 0):
            v = B @ np.array(c, dtype=float)
            vecs.append((float(np.linalg.norm(v)), c))
    vecs.sort()
    print("shortest lengths:", [round(l, 12) for l, _ in vecs[:6]])


if __name__ == "__main__":
    main()
