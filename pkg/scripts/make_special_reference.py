"""Regenerate tests/data/special_reference.json with mpmath at 50 digits.

The Marcum Q values come from direct numerical integration of the Rician
tail density, which is independent of the Neumann series used in the
package.
"""

import json
from pathlib import Path

import mpmath as mp

mp.mp.dps = 50
OUT = Path(__file__).resolve().parents[1] / "tests" / "data" / "special_reference.json"


def q_ref(x):
    return mp.erfc(x / mp.sqrt(2)) / 2


def marcum_ref(a, b):
    a, b = mp.mpf(a), mp.mpf(b)
    f = lambda x: x * mp.exp(-(x - a) ** 2 / 2) * mp.besseli(0, a * x) * mp.exp(-a * x)
    if b == 0:
        return mp.mpf(1)
    # integrate the head [0, b] or the tail [b, inf), whichever is shorter
    if b < a:
        return 1 - mp.quad(f, [0, b])
    return mp.quad(f, [b, b + 10, b + 40, mp.inf])


def main():
    gq = [-6, -3, -1.5, -0.5, 0, 0.1, 0.5, 1, 1.5, 2, 2.5, 3, 4, 5, 6, 7, 8, 10, 12, 20,
          0.25, 0.75, 1.25, 1.75, 3.5, 4.5, 5.5, 9, 15, 37]
    bi = [0, 1e-8, 1e-3, 0.1, 0.5, 1, 2, 3, 5, 7.5, 10, 15, 20, 24.9, 25.1, 30, 50, 100,
          300, 1000, 3000, 1e4, 1e5]
    mq = [(0, 0), (0, 1), (1, 0), (1, 1), (1, 2), (2, 1), (0.5, 3), (3, 0.5), (2, 2),
          (3, 4), (4, 3), (5, 5), (5, 7), (7, 5), (10, 10), (10, 12), (12, 10),
          (0.1, 0.2), (0.2, 0.1), (1e-3, 1), (20, 21), (21, 20), (30, 30), (40, 45),
          (45, 40), (6, 9), (9, 6), (0.7, 4.5), (2.5, 0.3), (15, 16)]
    data = {
        "gaussian_q": [[x, float(q_ref(mp.mpf(x)))] for x in gq],
        # unscaled values only where they are below ~1e4 so an absolute
        # tolerance is meaningful; scaled exp(-x) I_n(x) everywhere
        "bessel_i": [[n, x, float(mp.besseli(n, x))] for n in (0, 1) for x in bi if x <= 10],
        "bessel_i_scaled": [[n, x, float(mp.besseli(n, x) * mp.exp(-mp.mpf(x)))] for n in (0, 1) for x in bi],
        "marcum_q1": [[a, b, float(marcum_ref(a, b))] for a, b in mq],
    }
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(data, indent=1) + "\n")
    print(OUT, sum(len(v) for v in data.values()), "points")


if __name__ == "__main__":
    main()
