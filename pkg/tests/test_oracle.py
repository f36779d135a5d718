import math

import pytest

from tndp.assignment import AssignmentSettings, solve_ue
from tndp.errors import NonFiniteValue, ValidationError
from tndp.network import Arc, DecisionVector, Network, ODPair, Project, ProjectKind, ProjectSet
from tndp.oracle import EnumerationTable, enumerate_decisions, optimum_for_budgets
from tndp.pso import FitnessEvaluator, index_to_decision


def _flaky_solver(net, settings):
    if net.n_arcs == 2:
        raise NonFiniteValue("synthetic failure")
    return solve_ue(net, settings)


class TestEnumerate:
    def test_no_projects(self, six_net):
        table = enumerate_decisions(six_net, ProjectSet([], 0.0))
        assert len(table.rows) == 1
        assert table.optimum.index == 0
        assert table.optimum.ofv == solve_ue(six_net).total_time

    def test_six_node_table(self, six_table, six_ps):
        assert len(six_table.rows) == 16
        assert [r.index for r in six_table.rows] == list(range(16))
        feasible = [r for r in six_table.rows if r.feasible]
        assert all(r.cost <= six_ps.budget for r in feasible)
        assert all(r.ofv is None for r in six_table.rows if not r.feasible)
        best = six_table.optimum
        assert best.feasible
        assert all(best.ofv <= r.ofv for r in feasible)

    def test_matches_fitness_bit_for_bit(self, six_net, six_ps, six_table):
        ev = FitnessEvaluator(six_net, six_ps)
        for row in six_table.rows:
            if row.feasible:
                assert ev(row.index) == row.ofv

    def test_generous_budget_all_feasible(self, six_net, six_ps):
        table = enumerate_decisions(six_net, six_ps, budget=six_ps.total_cost)
        assert all(r.feasible for r in table.rows)

    def test_guard(self, six_net):
        projects = [Project(k, ProjectKind.NEW_ARC, [Arc(100 + k, 1, 2, 1, 0)], 1.0) for k in range(1, 26)]
        with pytest.raises(ValidationError, match="refusing"):
            enumerate_decisions(six_net, ProjectSet(projects, 1.0))

    def test_error_rows_recorded(self):
        net = Network.from_arcs([Arc(1, 1, 2, 5.0, 0.1)], [ODPair(1, 2, 2.0)])
        ps = ProjectSet([Project(1, ProjectKind.NEW_ARC, [Arc(2, 1, 2, 1.0, 0.1)], 1.0)], 1.0)
        table = enumerate_decisions(net, ps, solver=_flaky_solver)
        assert table.rows[1].error is not None and table.rows[1].ofv is None
        assert table.optimum.index == 0

    def test_threads_identical(self, six_net, six_ps, six_table):
        parallel = enumerate_decisions(six_net, six_ps, threads=2)
        assert parallel.rows == six_table.rows

    def test_progress_callback(self, six_net, six_ps):
        seen = []
        enumerate_decisions(six_net, six_ps, progress=lambda d, t: seen.append((d, t)))
        assert seen[-1][0] == seen[-1][1] == 10


class TestCsv:
    def test_round_trip(self, tmp_path, six_table):
        path = tmp_path / "enum.csv"
        six_table.to_csv(path)
        back = EnumerationTable.from_csv(path, six_table.budget)
        assert [(r.index, r.bits, r.cost, r.feasible, r.ofv) for r in back.rows] == \
               [(r.index, r.bits, r.cost, r.feasible, r.ofv) for r in six_table.rows]
        assert back.optimum.index == six_table.optimum.index

    def test_budget_mismatch(self, tmp_path, six_table):
        path = tmp_path / "enum.csv"
        six_table.to_csv(path)
        with pytest.raises(ValidationError, match="feasibility"):
            EnumerationTable.from_csv(path, 100.0)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValidationError):
            EnumerationTable.from_csv(path, 1.0)


class TestBudgets:
    def test_zero_budget(self, six_net, six_ps):
        [(b, k, v)] = optimum_for_budgets(six_net, six_ps, AssignmentSettings(), [0.0])
        assert (b, k) == (0.0, 0)

    def test_nonincreasing(self, six_net, six_ps):
        budgets = [0, 2, 3, 4, 5, 6, 8, 11]
        out = optimum_for_budgets(six_net, six_ps, AssignmentSettings(), budgets)
        values = [v for _, _, v in out]
        assert all(b <= a for a, b in zip(values, values[1:]))
        inf = optimum_for_budgets(six_net, six_ps, AssignmentSettings(), [math.inf])[0][2]
        assert inf <= values[0]

    def test_agrees_with_filtered_tables(self, six_net, six_ps):
        budgets = [3.0, 6.0, 9.0]
        out = optimum_for_budgets(six_net, six_ps, AssignmentSettings(), budgets)
        for budget, k, v in out:
            table = enumerate_decisions(six_net, six_ps, budget=budget)
            assert (table.optimum.index, table.optimum.ofv) == (k, v)

    def test_empty(self, six_net, six_ps):
        with pytest.raises(ValidationError):
            optimum_for_budgets(six_net, six_ps, AssignmentSettings(), [])


class TestSiouxFalls:
    def test_total_cost_feasibility(self, sf_ps):
        assert sf_ps.total_cost == 13325
        assert str(index_to_decision(1023, 10)) == "1111111111"

    def test_fixture_optimum(self, sf_table):
        assert len(sf_table.rows) == 1024
        assert sum(r.feasible for r in sf_table.rows) == 246
        best = sf_table.optimum
        assert best.index == 976
        assert best.bits == "1111010000"
        assert best.cost == 4625.0
        assert best.ofv == pytest.approx(5240332.035489843, rel=1e-12)
        assert str(DecisionVector.from_string(best.bits)) == best.bits
