"""Reference values frozen into the stats test-suite.

Run with: python3 reference_values.py
Requires numpy, scipy, statsmodels.
"""
import numpy as np
import pandas as pd
from scipy import stats
from statsmodels.multivariate.manova import MANOVA
import statsmodels.api as sm

np.set_printoptions(precision=17)

# Two-group, two-variable MANOVA toy set.
g1 = np.array([[2.0, 3.0], [3.0, 3.5], [4.0, 5.0], [3.5, 4.0], [2.5, 2.0]])
g2 = np.array([[4.0, 4.5], [5.0, 6.0], [6.5, 5.5], [5.5, 7.0], [6.0, 6.5], [4.5, 5.0]])
df = pd.DataFrame(np.vstack([g1, g2]), columns=["y1", "y2"])
df["g"] = ["a"] * len(g1) + ["b"] * len(g2)
res = MANOVA.from_formula("y1 + y2 ~ g", data=df).mv_test()
print("manova2 pillai", repr(res.results["g"]["stat"].loc["Pillai's trace"].values))

# Three-group, three-variable MANOVA.
rng = np.random.default_rng(7)
g = [rng.normal(loc=m, size=(8, 3)) for m in (0.0, 0.4, 1.0)]
df = pd.DataFrame(np.vstack(g), columns=["y1", "y2", "y3"])
df["g"] = ["a"] * 8 + ["b"] * 8 + ["c"] * 8
print("manova3 data", repr(np.vstack(g).tolist()))
res = MANOVA.from_formula("y1 + y2 + y3 ~ g", data=df).mv_test()
print("manova3 pillai", repr(res.results["g"]["stat"].loc["Pillai's trace"].values))

# Games-Howell on three toy groups.
groups = [
    [4.1, 5.3, 6.0, 5.5, 4.8, 5.1],
    [6.2, 7.9, 7.1, 8.4, 6.6],
    [5.0, 9.5, 3.2, 7.7, 6.1, 8.8, 4.4],
]
k = len(groups)
for i in range(k):
    for j in range(i + 1, k):
        a, b = np.array(groups[i]), np.array(groups[j])
        va, vb = a.var(ddof=1) / len(a), b.var(ddof=1) / len(b)
        diff = a.mean() - b.mean()
        q = abs(diff) / np.sqrt((va + vb) / 2)
        dfw = (va + vb) ** 2 / (va**2 / (len(a) - 1) + vb**2 / (len(b) - 1))
        p = stats.studentized_range.sf(q, k, dfw)
        print("gh", i, j, repr(diff), repr(dfw), repr(q), repr(p))
print("anova", stats.f_oneway(*groups))

# OLS five-point set.
x = np.array([[1, 1.0, 2.0], [1, 2.0, 1.0], [1, 3.0, 4.0], [1, 4.0, 3.0], [1, 5.0, 6.0]])
y = np.array([3.1, 3.9, 7.2, 7.8, 11.1])
fit = sm.OLS(y, x).fit()
print("ols params", repr(fit.params), "bse", repr(fit.bse))
print("ols ci", repr(fit.conf_int(0.05)), "r2", repr(fit.rsquared), repr(fit.rsquared_adj), "p", repr(fit.f_pvalue))

# Somers' D (Y|X) with asymptotic p.
x = [0, 0, 0, 1, 1, 2, 2, 2, 1, 0, 2, 1]
y = [0, 1, 0, 1, 2, 2, 1, 2, 0, 0, 2, 1]
r = stats.somersd(x, y)
print("somers", repr(r.statistic), repr(r.pvalue))

# Studentized range CDF.
for (q, k, dfv) in [(1.0, 3, 5), (2.5, 3, 10), (3.5, 4, 12), (5.0, 6, 3), (0.5, 2, 2), (2.0, 10, 40), (4.0, 3, 100)]:
    print("ptukey", q, k, dfv, repr(stats.studentized_range.cdf(q, k, dfv)))

# Incomplete beta / t / F.
from scipy.special import betainc
for (x_, a, b) in [(0.3, 2.0, 5.0), (0.9, 0.5, 0.5), (0.05, 10.0, 3.5), (0.5, 30.0, 40.0)]:
    print("ibeta", x_, a, b, repr(betainc(a, b, x_)))
print("t", repr(stats.t.cdf(1.7, 4.5)), repr(stats.t.cdf(-2.3, 12)), repr(stats.t.ppf(0.975, 7)))
print("F", repr(stats.f.cdf(2.5, 3, 17)), repr(stats.f.cdf(4.965, 1, 10)))
