#!/usr/bin/env python3
# Independent exact-arithmetic evaluation of the RPI and RRI hand fixtures.
# Uses fractions only, so the expected values carry no rounding error.
from fractions import Fraction as F
import sys


def mean(xs):
    return sum(xs, F(0)) / len(xs)


def mean_abs_dev(xs):
    m = mean(xs)
    return mean([abs(x - m) for x in xs])


def rpi(errors, rel):
    e_bar, l_bar = mean(errors), mean(rel)
    s_e, s_l = mean_abs_dev(errors), mean_abs_dev(rel)
    total = sum((e * (e - e_bar) * (l_bar - l) for e, l in zip(errors, rel)), F(0))
    return total / (s_e * s_l * len(errors)) / e_bar


def rri(full_rel, relevant_rel):
    l_bar, s_l = mean(full_rel), mean_abs_dev(full_rel)
    return sum((l - l_bar for l in relevant_rel), F(0)) / s_l / len(relevant_rel)


def main():
    got_rpi = rpi([F(0), F(1), F(2), F(3)], [F(1), F(8, 10), F(2, 10), F(0)])
    got_rri = rri([F(2, 10), F(4, 10), F(6, 10), F(8, 10)], [F(8, 10), F(6, 10)])
    print(f"rpi {got_rpi} = {float(got_rpi)!r}")
    print(f"rri {got_rri} = {float(got_rri)!r}")
    ok = got_rpi == F(9, 8) and got_rri == F(1)
    print("oracle fixtures:", "ok" if ok else "MISMATCH")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
