"""Smoke test for the Python extension.

    pip install --no-build-isolation ./crates/python
    python python/smoke_test.py
"""

import json
import math
import tempfile
from pathlib import Path

import ehr_priority as ep

DATA = Path(__file__).resolve().parents[1] / "crates" / "core" / "data"


def main():
    ids, criteria, rows = ep.rating_matrix((DATA / "ratings.csv").read_text())
    assert len(ids) == 20 and criteria == ["AS", "PS", "TS", "OR", "PPR"]

    sol = ep.lloyd(rows, 5, seed=42)
    assert sol.converged and sol.k == 5
    assert all(b <= a for a, b in zip(sol.wcss_trajectory, sol.wcss_trajectory[1:]))
    assert sorted(i for m in sol.members() for i in m) == list(range(20))

    one = [ep.RankProfile(1, 1, {"Cost": 1}, {"Cost": ["A", "B", "C"]})]
    w = ep.solve_opa(one)
    assert math.isclose(w.z, 1 / 3, abs_tol=1e-9)
    assert math.isclose(w.factor_weights["A"], 11 / 18, abs_tol=1e-9)
    assert [r[0] for r in w.ranking()] == ["A", "B", "C"]

    try:
        ep.RankProfile(1, 1, {"Cost": 1}, {"Cost": ["A", "A"]})
    except ValueError:
        pass
    else:
        raise AssertionError("duplicate items accepted")

    profiles = ep.parse_ranks((DATA / "ranks.csv").read_text())
    panel = ep.solve_opa(profiles)
    assert math.isclose(sum(panel.factor_weights.values()), 1.0, abs_tol=1e-9)
    assert panel.ranking()[0][0] == "F2"

    assert ep.kendalls_w([[1, 2, 3], [3, 2, 1]]) == 0.0
    assert 0.0 < ep.f_significance(3.06, 4, 15) < 0.1
    pca = ep.pca_project(rows, 2)
    assert len(pca["scores"]) == 20 and len(pca["scores"][0]) == 2

    rows_u = ep.uncertainty_table(profiles)
    assert len(rows_u) == 8 and all(r["verdict"] == "pass" for r in rows_u)
    sens = ep.sensitivity_analysis(profiles, "leave-one-out")
    assert len(sens["scenarios"]) == 7

    bundle = ep.run_pipeline(str(DATA / "ratings.csv"), str(DATA / "ranks.csv"))
    md = ep.render_markdown(bundle)
    assert md.startswith("# Prioritization report")
    assert json.loads(bundle)["provenance"]["seed"] == 42
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "report"
        ep.write_report(bundle, str(out))
        assert (out / "report.md").read_text() == md

    print(f"ehr_priority {ep.__version__}: smoke test passed")


if __name__ == "__main__":
    main()
