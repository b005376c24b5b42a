"""Independent recomputation of the threshold reports at 50 digits.

Written directly from the closed-form bounds with mpmath and no import of
``asl.theory``; regenerates ``golden/threshold_reports.json`` when run as a
script.  Conventions shared with the library: an undefined sufficient bound is
null, a necessary bound with a negative radicand is 0.
"""
import json
import pathlib

import mpmath as mp

mp.mp.dps = 50
GOLDEN = pathlib.Path(__file__).with_name("golden") / "threshold_reports.json"

CASES = [
    ({"class": "sset", "n": 1024, "s": 4}, 1024, 0.1, None),
    ({"class": "sset", "n": 512, "s": 2}, 512, 0.1, 2.0),
    ({"class": "sset", "n": 4096, "s": 16}, 2048, 0.05, None),
    ({"class": "sset", "n": 100, "s": 5}, 300, 0.2, 1.3),
    ({"class": "sset", "n": 64, "s": 30}, 64, 0.1, None),
    ({"class": "intervals", "n": 8192, "s": 8, "k": 1}, 8192, 0.1, None),
    ({"class": "intervals", "n": 4096, "s": 4, "k": 3}, 1000, 0.05, 0.7),
    ({"class": "intervals", "n": 1024, "s": 16, "k": 2}, 4096, 0.2, None),
    ({"class": "intervals", "n": 131072, "s": 8, "k": 1}, 131072, 0.1, 1.1),
    ({"class": "intervals", "n": 64, "s": 8, "k": 4}, 64, 0.1, None),
    ({"class": "stars", "p": 64, "s": 4, "k": 1}, 2016, 0.1, None),
    ({"class": "stars", "p": 128, "s": 4, "k": 1}, 500, 0.05, 3.0),
    ({"class": "stars", "p": 10, "s": 2, "k": 1}, 45, 0.1, None),
    ({"class": "stars", "p": 100, "s": 5, "k": 3}, 4950, 0.2, 0.9),
    ({"class": "stars", "p": 30, "s": 1, "k": 1}, 435, 0.1, None),
    ({"class": "submatrix", "n_r": 64, "n_c": 64, "s_r": 4, "s_c": 4}, 4096, 0.1, None),
    ({"class": "submatrix", "n_r": 32, "n_c": 128, "s_r": 2, "s_c": 8}, 1000, 0.1, 1.5),
    ({"class": "submatrix", "n_r": 128, "n_c": 32, "s_r": 8, "s_c": 2}, 8000, 0.05, None),
    ({"class": "submatrix", "n_r": 100, "n_c": 50, "s_r": 5, "s_c": 5}, 5000, 0.2, 0.5),
    ({"class": "submatrix", "n_r": 16, "n_c": 16, "s_r": 8, "s_c": 8}, 256, 0.1, None),
]

ln, sqrt, mpf = mp.log, mp.sqrt, mp.mpf


def nonneg_root(x):
    return sqrt(x) if x > 0 else mpf(0)


def sset(n, s, m, e):
    f = 1 - 2 * e
    suff = {
        "Prop1": sqrt(2 * n / m * ln(2 * s / e) + 2 * s / m * ln(2 * n / e)),
        "CASS_sset": sqrt(32 * n / m * ln(2 * s / e)),
    }
    nec_na = {"Prop7": nonneg_root(f * n / (4 * m) * ln(n - s))}
    nec_ad = {"Prop11": nonneg_root(2 * (n - s + 1) / m * (ln(s / (2 * e)) + ln(mpf(n - s + 1) / (n + 1))))}
    caps = {"CASS_sset": 2 * s * mp.log(mpf(n) / (2 * s), 2)}
    return n, s, suff, nec_na, nec_ad, caps


def intervals(n, s, k, m, e):
    f = 1 - 2 * e
    suff = {
        "Prop2": sqrt(30 * n / (s ** 2 * m) * ln(2 * sqrt(2) * k * s / e)),
        "Prop19": sqrt(768 * n / (s ** 2 * m) * ln(3 * sqrt(2) * k * s / e)),
        "Prop19_text": sqrt(max(384 * n / (s ** 2 * m) * ln(9 * k / e), 72 * k * s / m * ln(9 * k * s / (2 * e)))),
    }
    nec_na = {"Prop8": nonneg_root(f * (n - (k - 1) * s) / (4 * s ** 2 * m) * ln(mpf(n) / s - k))}
    big = n - s * (k - 1)
    nec_ad = {}
    if k == 1:
        nec_ad["Prop12"] = (1 - e) * sqrt(n / (2 * s ** 2 * m))
    nec_ad["Prop13"] = nonneg_root(2 * big / (s ** 2 * m) * (ln(k * s / (8 * e)) + ln(mpf(big) / (n + s))))
    caps = {"Prop19": 3 * k * (mp.log(mpf(n) / (2 * k * s), 2) + mpf(3) / 2 * s)}
    return n, k * s, suff, nec_na, nec_ad, caps


def stars(p, s, k, m, e):
    n = p * (p - 1) // 2
    f = 1 - 2 * e
    N = mpf(p * (p - 1 - s)) / (2 * s)
    suff, nec_na, nec_ad, caps = {}, {}, {}, {}
    if k == 1:
        suff["Prop3"] = sqrt(16 * n / ((s - 1) ** 2 * m) * ln(4 * s / e)) if s > 1 else None
        suff["StarCASS"] = sqrt(392 * n / (s ** 2 * m) * ln(9 * s / e))
        nec_na["Prop9"] = nonneg_root(f * n / (2 * m) * ln(sqrt(2 * n) - s - 1))
        nec_ad["Prop14"] = (1 - e) * sqrt(N / (2 * s * m))
        nec_ad["Prop16"] = nonneg_root(2 * (p - s) / m * (ln(s / (2 * e)) + ln(mpf(p - s) / p)))
        caps["StarCASS"] = 4 * mp.log(mpf(p) / 4, 2) + 2 * s * mp.log(mpf(p - 1) / s, 2)
    suff["Prop4"] = sqrt(16 * n / ((s - k) ** 2 * m) * ln(4 * s * k / e)) if k < s else None
    top = N - k + 1
    nec_ad["Prop15"] = (nonneg_root(2 * top / (mpf(m) / s) * (ln(k * s / (8 * e)) + ln(top / (N + 1)))) / s
                        if top > 0 else mpf(0))
    return n, k * s, suff, nec_na, nec_ad, caps


def submatrix(n_r, n_c, s_r, s_c, m, e):
    n, s = n_r * n_c, s_r * s_c
    f = 1 - 2 * e
    nec_na = {"Prop10": nonneg_root(f * n / (4 * m) * max(mpf(n_c - s_c) / (s_r * n_c), mpf(n_r - s_r) / (s_c * n_r))
                                    * ln(max(n_r - s_r, n_c - s_c)))}
    if s_r < s_c:  # the sufficient and adaptive bounds assume the row side is the larger one
        n_r, n_c, s_r, s_c = n_c, n_r, s_c, s_r
    suff = {
        "Prop5": sqrt(8 * n / (s_r ** 2 * m) * ln(4 * s / e)),
        "Prop6": sqrt(10 * n / (s_c * s_r ** 2 * m) * ln(8 * s / e)),
        "Prop20": sqrt(128 * n / (s_r ** 2 * m) * ln(2 * s / e)),
    }
    top = n_c - s_c + 1
    nec_ad = {
        "Prop17": (1 - e) * sqrt(n / (2 * s ** 2 * m)),
        "Prop18": nonneg_root(2 * mpf(top) / (s_r * m) * (ln(s / (8 * e)) + ln(mpf(top) / (n_c + 1)))),
    }
    caps = {"Prop20": 2 * s_c * mp.log(mpf(n_c) / (2 * s_c), 2) + 2 * s_r * mp.log(mpf(n_r) / (2 * s_r), 2)}
    return n, s, suff, nec_na, nec_ad, caps


def report(cls, m, eps, mu):
    m, e = mpf(m), mpf(eps)
    kind = cls["class"]
    if kind == "sset":
        n, s, *parts = sset(cls["n"], cls["s"], m, e)
    elif kind == "intervals":
        n, s, *parts = intervals(cls["n"], cls["s"], cls["k"], m, e)
    elif kind == "stars":
        n, s, *parts = stars(cls["p"], cls["s"], cls["k"], m, e)
    else:
        n, s, *parts = submatrix(cls["n_r"], cls["n_c"], cls["s_r"], cls["s_c"], m, e)
    lemma10 = None
    if mu is not None:
        lemma10 = s * ln(mpf(n) / s) / ln(mpf(mu) ** 2 * m / n + 1)

    def conv(d):
        return {k: (None if v is None else mp.nstr(v, 20)) for k, v in d.items()}

    suff, nec_na, nec_ad, caps = parts
    return {
        "class": cls, "m": float(m), "epsilon": eps, "mu": mu,
        "sufficient_mu": conv(suff), "necessary_mu_nonadaptive": conv(nec_na),
        "necessary_mu_adaptive": conv(nec_ad), "sample_caps": conv(caps),
        "Lemma10": None if lemma10 is None else mp.nstr(lemma10, 20),
    }


def main():
    reports = [report(*case) for case in CASES]
    GOLDEN.parent.mkdir(exist_ok=True)
    GOLDEN.write_text(json.dumps({"digits": 20, "reports": reports}, indent=1) + "\n")
    print(f"wrote {len(reports)} reports to {GOLDEN}")


if __name__ == "__main__":
    main()
