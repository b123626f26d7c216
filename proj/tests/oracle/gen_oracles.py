"""Reference values for the unit tests, computed with mpmath quadrature.

Run with `python3 gen_oracles.py`; the printed numbers are pasted into
tests/oracle_values.hpp. Nothing here shares code with the C++ library.
"""
import mpmath as mp

mp.mp.dps = 40


def gauss_pdf(x):
    return mp.exp(-x * x / 2) / mp.sqrt(2 * mp.pi)


def laplace_pdf(x):
    return mp.exp(-abs(x)) / 2


PDF = {"gaussian": gauss_pdf, "laplace": laplace_pdf}


def moments(pdf, a, b):
    pts = [a, b] if not (a < 0 < b) else [a, 0, b]
    m0 = mp.quad(pdf, pts)
    m1 = mp.quad(lambda x: x * pdf(x), pts)
    m2 = mp.quad(lambda x: x * x * pdf(x), pts)
    return m0, m1, m2


def lloyd_symmetric(kind, bits, guess):
    """Positive half of the symmetric Lloyd-Max fixed point, via findroot."""
    pdf = PDF[kind]
    n = 2 ** (bits - 1)

    def edges(y):
        return [mp.mpf(0)] + [(y[i] + y[i + 1]) / 2 for i in range(n - 1)] + [mp.inf]

    def system(*y):
        e = edges(y)
        out = []
        for i in range(n):
            m0, m1, _ = moments(pdf, e[i], e[i + 1])
            out.append(y[i] - m1 / m0)
        return out

    y = mp.findroot(system, guess) if n > 1 else [None]
    if n == 1:
        m0, m1, _ = moments(pdf, 0, mp.inf)
        y = [m1 / m0]
    y = [y[i] for i in range(n)]
    e = edges(y)
    d = 0
    for i in range(n):
        d += 2 * mp.quad(lambda x: (x - y[i]) ** 2 * pdf(x), [e[i], e[i + 1]])
    return y, e[1:-1], d


def main():
    print("// erf")
    for x in ["-3", "-2", "-1.5", "-1", "-0.5", "-0.25", "-0.1", "-1e-3", "0", "1e-8", "1e-3", "0.1",
              "0.25", "0.5", "1", "1.5", "2", "3", "4", "5.5"]:
        print(f"{{{x}, {mp.nstr(mp.erf(mp.mpf(x)), 20)}}},")

    print("// interval moments: kind, a, b, mass, mean, second moment about 0")
    cases = [("gaussian", "-inf", "0"), ("gaussian", "0.3", "1.7"), ("gaussian", "-0.4", "2.5"),
             ("gaussian", "3", "inf"), ("gaussian", "5", "5.01"), ("gaussian", "-1e-3", "1e-3"),
             ("laplace", "-inf", "0"), ("laplace", "0.3", "1.7"), ("laplace", "-0.4", "2.5"),
             ("laplace", "3", "inf"), ("laplace", "20", "20.5"), ("laplace", "-1e-3", "1e-3")]
    for kind, a, b in cases:
        m0, m1, m2 = moments(PDF[kind], mp.mpf(a), mp.mpf(b))
        print(f"{{{kind}, {a}, {b}, {mp.nstr(m0, 20)}, {mp.nstr(m1 / m0, 20)}, {mp.nstr(m2 / m0, 20)}}},")

    print("// symmetric Lloyd-Max fixed points: positive levels, positive interior boundaries, D")
    guesses = {1: [], 2: [0.45, 1.5], 3: [0.25, 0.75, 1.25, 2.1]}
    lguesses = {1: [], 2: [0.4, 2.5], 3: [0.2, 0.8, 1.6, 3.3]}
    for kind, g in (("gaussian", guesses), ("laplace", lguesses)):
        for bits in (1, 2, 3):
            y, e, d = lloyd_symmetric(kind, bits, g[bits])
            print(kind, bits, [mp.nstr(v, 17) for v in y], [mp.nstr(v, 17) for v in e], mp.nstr(d, 17))


if __name__ == "__main__":
    main()


def uniform_distortion(kind, bits, c):
    pdf = PDF[kind]
    k = 2 ** bits
    w = 2 * c / k
    total = 0
    for i in range(k):
        lo = -c + i * w
        hi = lo + w
        y = lo + w / 2
        a = -mp.inf if i == 0 else lo
        b = mp.inf if i == k - 1 else hi
        total += mp.quad(lambda x: (x - y) ** 2 * pdf(x), [a, lo, hi, b] if i in (0, k - 1) else [lo, hi])
    return total


def uniform_optimum(kind, bits, guess):
    mp.mp.dps = 20
    f = lambda c: uniform_distortion(kind, bits, c)
    c = mp.findroot(lambda c: mp.diff(f, c), guess)
    return c, f(c)


if __name__ == "__main__":
    print("// uniform baseline optimum: clip, D (tails saturate onto outer levels)")
    for kind, bits, guess in (("gaussian", 2, 2.0), ("gaussian", 4, 2.7), ("laplace", 2, 2.4), ("laplace", 4, 5.0)):
        c, d = uniform_optimum(kind, bits, guess)
        print(kind, bits, mp.nstr(c, 12), mp.nstr(d, 12))
