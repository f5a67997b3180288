"""Smoke test for the Python bindings.

    cd crates/python && pip install --no-build-isolation -e .
    python python/smoke_test.py
"""

import json
import math
from pathlib import Path

import numpy as np

import selinf

ROOT = Path(__file__).resolve().parent.parent


def check(name, ok, detail=""):
    print(f"{'ok  ' if ok else 'FAIL'} {name} {detail}")
    if not ok:
        raise SystemExit(1)


def main():
    # truncated Gaussian on [1, 2]: F(1.5) = 0.676
    s = selinf.TruncationSet([(1.0, 2.0)])
    d = selinf.TruncatedGaussian(0.0, 1.0, s)
    check("cdf", abs(d.cdf(1.5) - 0.676) < 5e-4, f"{d.cdf(1.5):.4f}")

    rays = selinf.TruncationSet([(-math.inf, -1.0), (1.0, math.inf)])
    lo, hi = selinf.tg_interval(2.0, 1.0, rays, 0.1)
    check("interval round trip", abs(selinf.tg_pivot(2.0, lo, 1.0, rays) - 0.95) < 1e-4
          and abs(selinf.tg_pivot(2.0, hi, 1.0, rays) - 0.05) < 1e-4, f"({lo:.3f}, {hi:.3f})")

    rng = np.random.default_rng(1)
    x = rng.standard_normal((60, 8))
    beta = np.array([2.0, -1.5, 0, 0, 0, 0, 0, 1.0])
    y = x @ beta + rng.standard_normal(60)
    fit = selinf.fit_lasso(x, y, 15.0)
    check("lasso", fit["active_set"][:2] == [0, 1], str(fit["active_set"]))

    a = selinf.analyze(x, y, 15.0, methods=["naive", "tz-v", "tz-ms"], sigma="known:1")
    rows = a["results"]
    check("analyze", len(rows) == 3 * len(fit["active_set"]), f"{len(rows)} rows")
    naive = {r["variable"]: r for r in rows if r["method"] == "naive"}
    tzms = {r["variable"]: r for r in rows if r["method"] == "tz-ms"}
    width = lambda r: r["interval"]["upper"] - r["interval"]["lower"]
    # far from the truncation the two agree up to root-finding tolerance
    check("tz-ms at least as wide as naive", all(width(tzms[j]) >= width(naive[j]) - 1e-6 for j in naive))
    inside = lambda r: any(float(iv["lo"]) <= r["z_obs"] <= float(iv["hi"]) for iv in r["truncation"]["intervals"])
    check("observed z inside its truncation set", all(inside(r) for r in tzms.values()))

    check("universal lambda", abs(selinf.universal_lambda(100, 250) - 0.3323) < 1e-4)

    cfg = json.loads((ROOT / "configs" / "p50_low_cv.json").read_text())
    cfg.update(replications=20, lambda_rule={"explicit": 0.14})
    rep = selinf.run_study(cfg)
    cov = {m["method"]: m["coverage"] for m in rep["methods"]}
    check("study", rep["replications_run"] == 20 and all(0 <= c <= 1 for c in cov.values()), str(cov))

    try:
        import jsonschema
    except ImportError:
        print("skip schema check (jsonschema not installed)")
    else:
        schema = json.loads((ROOT / "docs" / "study_config.schema.json").read_text())
        jsonschema.validate(json.loads((ROOT / "configs" / "p250_low_cv.json").read_text()), schema)
        check("config schema", True)

    try:
        selinf.analyze(x, y, 15.0, methods=["nope"])
    except ValueError as e:
        check("bad method raises ValueError", "nope" in str(e))


if __name__ == "__main__":
    main()
