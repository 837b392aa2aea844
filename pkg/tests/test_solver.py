from itertools import product

import highspy
import pytest

from heatuc.errors import ModelError, SolverError
from heatuc.solver import ModelHandle, dual_objective, get_backend, solve_lp, solve_milp


@pytest.fixture
def small_lp():
    # min x + 2y  s.t.  x + y >= 3,  x <= 2
    m = ModelHandle("small")
    m.add_var("x")
    m.add_var("y")
    m.add_row("cover", {"x": 1.0, "y": 1.0}, ">=", 3.0)
    m.add_row("cap", {"x": -1.0}, ">=", -2.0)
    m.set_objective({"x": 1.0, "y": 2.0})
    return m


def test_lp_primal_and_duals(small_lp):
    report = solve_lp(small_lp)
    assert report.optimal
    assert report.primal["x"] == pytest.approx(2.0)
    assert report.primal["y"] == pytest.approx(1.0)
    assert report.objective == pytest.approx(4.0)
    assert report.duals["cover"] == pytest.approx(2.0)
    assert report.duals["cap"] == pytest.approx(1.0)
    assert dual_objective(small_lp, report) == pytest.approx(4.0)


def test_infeasible_lp(small_lp):
    small_lp.add_row("tight", {"x": 1.0, "y": 1.0}, "<=", 1.0)
    report = solve_lp(small_lp)
    assert report.status == "infeasible"
    assert not report.has_primal


def test_violated_empty_row_is_infeasible(small_lp):
    small_lp.add_row("nothing", {}, ">=", 1.0)
    assert small_lp.trivially_infeasible() == ["nothing"]
    report = solve_lp(small_lp)
    assert report.status == "infeasible"
    assert "nothing" in report.message


def test_handle_rejects_bad_input():
    m = ModelHandle("bad")
    m.add_var("x")
    with pytest.raises(ModelError):
        m.add_var("x")
    with pytest.raises(ModelError):
        m.add_row("r", {"y": 1.0}, ">=", 0.0)
    with pytest.raises(ModelError):
        m.add_row("r", {"x": 1.0}, "=>", 0.0)
    with pytest.raises(ModelError):
        m.add_row("r", {"x": 1.0}, ">=", float("inf"))
    with pytest.raises(ModelError):
        m.set_objective({"z": 1.0})


def test_milp_and_fixed_resolve():
    m = ModelHandle("pick")
    m.add_var("a", binary=True)
    m.add_var("b", binary=True)
    m.add_var("s")
    m.add_row("one", {"a": -1.0, "b": -1.0}, ">=", -1.0)
    m.add_row("serve", {"s": -1.0, "a": 5.0, "b": 3.0}, ">=", 0.0)
    m.set_objective({"s": -1.0, "a": 1.0})
    with pytest.raises(ModelError):
        solve_lp(m)

    report = solve_milp(m, gap=1e-9)
    assert report.optimal
    assert report.primal["a"] == pytest.approx(1.0)
    assert report.objective == pytest.approx(-4.0)

    with_duals = solve_milp(m, gap=1e-9, duals=True)
    assert with_duals.primal["a"] == pytest.approx(1.0)
    assert with_duals.objective == pytest.approx(-4.0)
    assert set(with_duals.duals) == {"one", "serve"}


def test_fix_copies_and_relaxes_binaries():
    m = ModelHandle("f")
    m.add_var("u", binary=True)
    m.add_var("x")
    m.add_row("link", {"u": 4.0, "x": -1.0}, ">=", 0.0)
    fixed = m.fix({"u": 0.9999999})
    assert fixed.columns["u"].lb == fixed.columns["u"].ub == 1.0
    assert not fixed.is_mip
    assert m.is_mip
    assert m.binaries == ["u"]


def test_export_lp(small_lp, tmp_path):
    path = small_lp.export_lp(tmp_path / "out" / "small.lp")
    text = path.read_text()
    assert "cover" in text
    assert "obj" in text


def test_unknown_backend():
    with pytest.raises(SolverError):
        get_backend("glpk_cli")


@pytest.mark.parametrize("binary", [False, True])
def test_unbounded(binary):
    m = ModelHandle("open")
    m.add_var("x")
    m.add_var("b", binary=binary, ub=1.0)
    m.add_row("floor", {"x": 1.0, "b": 1.0}, ">=", 1.0)
    m.set_objective({"x": -1.0, "b": 1.0})
    report = solve_milp(m, gap=1e-9) if binary else solve_lp(m)
    assert report.status == "unbounded"
    assert not report.has_primal


def test_knapsack_matches_enumeration():
    values, weights, capacity = [6.0, 10.0, 12.0], [1.0, 2.0, 3.0], 5.0
    m = ModelHandle("knapsack")
    for i in range(3):
        m.add_var(f"i{i}", binary=True)
    m.add_row("weight", {f"i{i}": -w for i, w in enumerate(weights)}, ">=", -capacity)
    m.set_objective({f"i{i}": -v for i, v in enumerate(values)})

    best = max(
        sum(v * p for v, p in zip(values, pick))
        for pick in product([0, 1], repeat=3)
        if sum(w * p for w, p in zip(weights, pick)) <= capacity
    )
    report = solve_milp(m, gap=1e-9)
    assert report.optimal
    assert -report.objective == pytest.approx(best)
    assert best == 22.0
    assert [round(report.primal[f"i{i}"]) for i in range(3)] == [0, 1, 1]


def test_pure_lp_through_milp_path(small_lp):
    lp = solve_lp(small_lp)
    milp = solve_milp(small_lp, duals=True)
    assert milp.optimal
    assert milp.objective == pytest.approx(lp.objective)
    assert milp.primal == pytest.approx(lp.primal)
    assert milp.duals == pytest.approx(lp.duals)


def test_exported_model_reads_back(small_lp, tmp_path):
    path = small_lp.export_lp(tmp_path / "small.lp")
    highs = highspy.Highs()
    highs.silent()
    assert highs.readModel(str(path)) != highspy.HighsStatus.kError
    highs.run()
    assert highs.getModelStatus() == highspy.HighsModelStatus.kOptimal
    assert highs.getInfo().objective_function_value == pytest.approx(solve_lp(small_lp).objective, abs=1e-8)
