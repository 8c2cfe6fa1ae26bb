"""Regenerate the Faddeeva reference grid with mpmath at 40 digits.

w(z) = exp(-z^2) erfc(-i z).  Points close to zeros of w (lower half-plane)
are skipped because relative accuracy is meaningless there.

    python3 tools/make_faddeeva_grid.py src/qarrival/data/faddeeva_grid.txt
"""
import argparse
import itertools

import mpmath as mp

mp.mp.dps = 40

RE = [0.0, 1e-8, 1e-3, 0.1, 0.5, 1.0, 2.0, 3.5, 5.0, 6.5, 10.0, 25.0, 100.0, 1e4]
IM = [0.0, 1e-8, 1e-3, 0.1, 0.5, 1.0, 2.0, 5.0, 8.0, 15.0, 60.0, 1e3, -1e-3, -0.1, -0.5,
      -1.0, -2.0, -4.0, -8.0]


def w(z):
    return mp.exp(-z * z) * mp.erfc(-1j * z)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out")
    args = ap.parse_args()
    rows = []
    for x, y in itertools.product(RE, IM):
        for sx in (1, -1):
            if sx < 0 and x == 0:
                continue
            z = mp.mpc(sx * x, y)
            if y < 0 and abs(mp.exp(-z * z)) > mp.mpf(10) ** 250:
                continue
            val = w(z)
            # skip near-cancellation: |w| much smaller than its two terms
            if y < 0 and abs(val) < 1e-6 * abs(mp.exp(-z * z)):
                continue
            rows.append((sx * x, y, val))
    with open(args.out, "w") as fh:
        fh.write("# Re(z) Im(z) Re(w) Im(w); w(z) = exp(-z^2) erfc(-iz), 40-digit reference\n")
        for x, y, val in rows:
            fh.write(f"{x!r} {y!r} {mp.nstr(val.real, 20, min_fixed=0, max_fixed=0)} "
                     f"{mp.nstr(val.imag, 20, min_fixed=0, max_fixed=0)}\n")
    print(f"wrote {len(rows)} points")


if __name__ == "__main__":
    main()
