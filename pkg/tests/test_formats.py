import numpy as np
import pytest

from conftest import sf_paths
from tndp.errors import ParseError, ValidationError
from tndp.formats import (
    bpr_to_quartic,
    bundled_path,
    load_network,
    load_projects,
    read_arcs,
    read_trips,
    write_network,
    write_projects,
    write_trips,
)
from tndp.network import ProjectKind


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestLoadNetwork:
    def test_minimal_instance(self, tmp_path):
        net_path = _write(tmp_path, "net.txt", "<NUMBER OF NODES> 2\n<NUMBER OF LINKS> 1\n1 2 1 0\n")
        trips = _write(tmp_path, "trips.txt", "1 2 10\n")
        net = load_network(net_path, trips)
        assert net.n_arcs == 1
        assert [(od.origin, od.destination, od.demand) for od in net.od_pairs] == [(1, 2, 10.0)]

    def test_unreachable_pair(self, tmp_path):
        net_path = _write(tmp_path, "net.txt", "1 2 1 0\n2 3 1 0\n")
        trips = _write(tmp_path, "trips.txt", "3 1 5\n")
        with pytest.raises(ValidationError, match="unreachable"):
            load_network(net_path, trips)

    def test_negative_coefficient(self, tmp_path):
        net_path = _write(tmp_path, "net.txt", "1 2 -1 0\n")
        with pytest.raises(ValidationError, match=r"net.txt:1"):
            load_network(net_path)

    def test_malformed_row_names_file_and_line(self, tmp_path):
        net_path = _write(tmp_path, "net.txt", "~ header\n1 2 1 0\n1 2 x 0\n")
        with pytest.raises(ParseError) as info:
            load_network(net_path)
        assert info.value.line == 3
        assert "net.txt:3" in str(info.value)

    def test_wrong_field_count(self, tmp_path):
        net_path = _write(tmp_path, "net.txt", "1 2 1\n")
        with pytest.raises(ParseError):
            load_network(net_path)

    def test_header_count_checked(self, tmp_path):
        net_path = _write(tmp_path, "net.txt", "<NUMBER OF LINKS> 3\n1 2 1 0\n")
        with pytest.raises(ValidationError, match="declares 3 links"):
            load_network(net_path)

    def test_comments_and_semicolons(self, tmp_path):
        net_path = _write(tmp_path, "net.txt", "# c\n~ c\n1 2 1 0 ;\n2 1 1 0;\n")
        assert load_network(net_path).n_arcs == 2

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError):
            load_network(str(tmp_path / "nope.txt"))

    def test_sioux_falls(self, sf_net):
        assert len(sf_net.nodes) == 24
        assert sf_net.n_arcs == 76
        assert len(sf_net.od_pairs) == 528
        assert sf_net.total_demand == 360600.0


class TestTrips:
    def test_tntp_blocks(self, tmp_path):
        path = _write(tmp_path, "t.tntp", "<NUMBER OF ZONES> 2\nOrigin 1\n 1 : 0.0; 2 : 7.5;\nOrigin 2\n 1 : 3;\n")
        pairs = sorted((p.origin, p.destination, p.demand) for p in read_trips(path))
        assert pairs == [(1, 2, 7.5), (2, 1, 3.0)]

    def test_zero_demand_skipped(self, tmp_path):
        path = _write(tmp_path, "t.txt", "1 2 0\n2 1 4\n")
        assert [(p.origin, p.destination) for p in read_trips(path)] == [(2, 1)]

    def test_negative_demand(self, tmp_path):
        path = _write(tmp_path, "t.txt", "1 2 -4\n")
        with pytest.raises(ValidationError):
            read_trips(path)

    def test_intrazonal_nonzero_rejected(self, tmp_path):
        path = _write(tmp_path, "t.txt", "1 1 4\n")
        with pytest.raises(ValidationError):
            read_trips(path)


class TestBpr:
    def test_conversion(self):
        alpha, beta = bpr_to_quartic(6.0, 25900.2, 0.15)
        assert alpha == 6.0
        assert beta == pytest.approx(6.0 * 0.15 / 25900.2**4, rel=1e-15)

    def test_time_matches_bpr(self):
        t0, cap, b = 4.0, 5000.0, 0.15
        alpha, beta = bpr_to_quartic(t0, cap, b)
        for x in (0.0, 1000.0, 5000.0, 12000.0):
            assert alpha + beta * x**4 == pytest.approx(t0 * (1 + b * (x / cap) ** 4), rel=1e-12)

    def test_only_quartic(self):
        with pytest.raises(ValidationError):
            bpr_to_quartic(1.0, 10.0, 0.15, power=2)

    def test_tntp_reproduces_native_fixture(self):
        tntp, _ = read_arcs(bundled_path("SiouxFalls_net.tntp"))
        native, _ = read_arcs(bundled_path("network.txt"))
        assert [(a.tail, a.head) for a in tntp] == [(a.tail, a.head) for a in native]
        assert np.array_equal([a.alpha for a in tntp], [a.alpha for a in native])
        assert np.allclose([a.beta for a in tntp], [a.beta for a in native], rtol=1e-15, atol=0)

    def test_tntp_trips_match_native(self):
        a = {(p.origin, p.destination): p.demand for p in read_trips(bundled_path("SiouxFalls_trips.tntp"))}
        b = {(p.origin, p.destination): p.demand for p in read_trips(bundled_path("trips.txt"))}
        assert a == b


class TestProjects:
    def test_sioux_falls(self, sf_net, sf_ps):
        assert len(sf_ps.projects) == 10
        assert [p.cost for p in sf_ps.projects] == [625, 650, 850, 1000, 1200, 1500, 1650, 1800, 1950, 2100]
        assert [p.kind for p in sf_ps.projects[:5]] == [ProjectKind.IMPROVEMENT] * 5
        assert [p.kind for p in sf_ps.projects[5:]] == [ProjectKind.NEW_ARC] * 5
        ids = [a.id for p in sf_ps.projects for a in p.arcs]
        assert ids == list(range(77, 97))
        assert sf_ps.budget == 5000.0

    def test_empty_file(self, tmp_path, sf_net):
        path = _write(tmp_path, "p.txt", "~ nothing here\n")
        ps = load_projects(path, 100, sf_net)
        assert len(ps.projects) == 0

    def test_negative_cost(self, tmp_path, sf_net):
        path = _write(tmp_path, "p.txt", "1 new -5 1\n1 2 1 0\n")
        with pytest.raises(ValidationError, match="cost"):
            load_projects(path, 100, sf_net)

    def test_duplicate_base_id(self, tmp_path, sf_net):
        path = _write(tmp_path, "p.txt", "1 new 5 1\n3 1 2 1 0\n")
        with pytest.raises(ValidationError, match="duplicates a base arc"):
            load_projects(path, 100, sf_net)

    def test_unknown_node(self, tmp_path, sf_net):
        path = _write(tmp_path, "p.txt", "1 new 5 1\n1 99 1 0\n")
        with pytest.raises(ValidationError, match="unknown node"):
            load_projects(path, 100, sf_net)

    def test_truncated(self, tmp_path, sf_net):
        path = _write(tmp_path, "p.txt", "1 new 5 2\n1 2 1 0\n")
        with pytest.raises(ParseError):
            load_projects(path, 100, sf_net)

    def test_bad_kind(self, tmp_path, sf_net):
        path = _write(tmp_path, "p.txt", "1 removal 5 1\n1 2 1 0\n")
        with pytest.raises(ParseError):
            load_projects(path, 100, sf_net)


class TestWriters:
    def test_round_trip(self, tmp_path, sf_net, sf_ps):
        write_network(sf_net, tmp_path / "n.txt", comment="copy")
        write_trips(sf_net, tmp_path / "t.txt")
        write_projects(sf_ps, tmp_path / "p.txt")
        net = load_network(tmp_path / "n.txt", tmp_path / "t.txt")
        ps = load_projects(tmp_path / "p.txt", sf_ps.budget, net)
        assert [(a.id, a.tail, a.head, a.alpha, a.beta) for a in net.arcs] == \
               [(a.id, a.tail, a.head, a.alpha, a.beta) for a in sf_net.arcs]
        assert sorted((o.origin, o.destination, o.demand) for o in net.od_pairs) == \
               sorted((o.origin, o.destination, o.demand) for o in sf_net.od_pairs)
        assert ps.projects == sf_ps.projects

    def test_bundled_paths_exist(self):
        import os
        assert all(os.path.exists(p) for p in sf_paths())
