import csv
import io
import json

import pytest
from conftest import flow, make_scenario

from cosim.metrics import MetricsRow, batch_delays, fmt, grid_bin, rows_csv
from cosim.netsim import PacketRecord
from cosim.report import render_report, write_run
from cosim.scenario import ParseError, ValidationError, load_preset, load_scenario, parse_scenario, preset_names
from cosim.sweep import SUMMARY_HEADER, place, summary_csv, sweep
from cosim.synchro import Strategy, run_simulation
from cosim.world import WorldState, line_of_sight

SWEEP = (20, 40, 60, 80, 100)


class TestScenario:
    def test_round_trip(self, small_scenario):
        again = parse_scenario(small_scenario.to_json())
        assert again == small_scenario

    def test_unknown_key_rejected(self, small_scenario):
        doc = json.loads(small_scenario.to_json())
        doc["policy"]["windw"] = 5
        with pytest.raises(ValidationError, match="windw"):
            parse_scenario(json.dumps(doc))

    def test_malformed_json(self):
        with pytest.raises(ParseError, match="malformed"):
            parse_scenario("{not json", "x.json")

    def test_flow_names_missing_agent(self, small_scenario):
        doc = json.loads(small_scenario.to_json())
        doc["flows"][0]["subscriber"] = "ghost"
        with pytest.raises(ValidationError, match=r"flows\[0\].*'ghost'"):
            parse_scenario(json.dumps(doc))

    def test_exactly_one_master(self, small_scenario):
        doc = json.loads(small_scenario.to_json())
        doc["world"]["agents"][1]["role"] = "idle"
        with pytest.raises(ValidationError, match="master"):
            parse_scenario(json.dumps(doc))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError, match="cannot read"):
            load_scenario(tmp_path / "nope.json")


class TestPresets:
    def test_four_presets(self):
        assert preset_names() == ["ugv-uav-los", "ugv-uav-nlos", "ugv-ugv-los", "ugv-ugv-nlos"]

    @pytest.mark.parametrize("name", ["ugv-uav-los", "ugv-uav-nlos", "ugv-ugv-los", "ugv-ugv-nlos"])
    def test_preset_shape(self, name):
        s = load_preset(name)
        assert s.world.extent == (100.0, 100.0)
        assert s.policy.w_init_us == 1000
        assert s.flows[0].payload_bytes == 1024
        kinds = sorted(a.kind.value for a in s.world.agents)
        assert kinds == ["UAV", "UGV", "UGV"]
        assert s.pair_kind == ("UGV-UAV" if "uav" in name else "UGV-UGV")
        assert s.los_label == name.rsplit("-", 1)[1].upper()

    @pytest.mark.parametrize("name", ["ugv-uav-los", "ugv-uav-nlos", "ugv-ugv-los", "ugv-ugv-nlos"])
    def test_label_holds_at_every_sweep_distance(self, name):
        base = load_preset(name)
        f = base.flows[0]
        for d in SWEEP:
            s = place(base, d)
            world = WorldState(s.world)
            for t in range(0, s.horizon_us, 250_000):
                world.advance(t)
                verdict = line_of_sight(world.agent(f.publisher), world.agent(f.subscriber), s.world.obstacles)
                assert verdict.value == base.los_label

    def test_unknown_preset(self):
        with pytest.raises(ValidationError, match="unknown preset"):
            load_preset("mars")


class TestMetrics:
    @pytest.mark.parametrize("d, cell, expected", [(0.0, 10, 0.0), (14.9, 10, 10.0), (15.0, 10, 20.0), (40.2, 10, 40.0), (7.4, 5, 5.0)])
    def test_grid_bin(self, d, cell, expected):
        assert grid_bin(d, cell) == expected

    def test_fmt(self):
        assert fmt(0.1) == "0.100000"
        assert fmt(1 / 3) == "0.333333"
        assert fmt(True) == "1" and fmt(None) == "" and fmt(12) == "12"

    def test_batches_in_delivery_order_with_partial_tail(self):
        recs = []
        for i in range(23):
            r = PacketRecord(i, 0, i, 0, 256, created_at=0)
            r.delivered_at = (23 - i) * 1_000  # delivered in reverse id order
            recs.append(r)
        recs.append(PacketRecord(99, 0, 99, 0, 256, created_at=0))  # never delivered
        batches = batch_delays(recs)
        assert [b.count for b in batches] == [10, 10, 3]
        assert [b.partial for b in batches] == [False, False, True]
        assert batches[0].mean_s == pytest.approx(5.5e-3)
        assert batches[2].mean_s == pytest.approx(22e-3)

    def test_batch_size_guard(self):
        with pytest.raises(ValueError):
            batch_delays([], batch=0)

    def test_metrics_csv_header_and_format(self, small_scenario):
        text = rows_csv(run_simulation(small_scenario).rows)
        header, first = text.splitlines()[:2]
        assert header.split(",") == list(MetricsRow.__dataclass_fields__)
        assert first.split(",")[10] == "0.000000"

    def test_row_lp_matches_event_log_scan(self, tmp_path):
        s = make_scenario(flows=[flow("pub", "sub", "hub", packet_budget=30)], horizon_us=400_000,
                          channel={"per_floor": 0.3})
        result = run_simulation(s)
        write_run(result, tmp_path)
        first_window, delivered = {}, set()
        with open(tmp_path / "events.csv") as fh:
            for e in csv.DictReader(fh):
                if e["kind"] == "attempt" and e["hop"] == "0" and e["attempt"] == "1":
                    first_window[e["packet_id"]] = int(e["window"])
                elif e["kind"] == "deliver":
                    delivered.add(e["packet_id"])
        with open(tmp_path / "metrics.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert any(float(r["lp"]) > 0 for r in rows)
        for r in rows:
            k = int(r["window_id"])
            sent = [p for p, w in first_window.items() if w == k]
            n_sb = sum(p in delivered for p in sent)
            lp = 1 - n_sb / len(sent) if sent else 0.0
            assert (int(r["n_pb"]), int(r["n_sb"])) == (len(sent), n_sb)
            assert r["lp"] == f"{lp:.6f}"


class TestSweep:
    def test_place_symmetric_about_center(self):
        base = load_preset("ugv-uav-nlos")
        s = place(base, 60)
        f = s.flows[0]
        pub, sub = s.world.agent(f.publisher), s.world.agent(f.subscriber)
        assert (pub.position[0], sub.position[0]) == (20.0, 80.0)
        assert pub.position[1] == sub.position[1] == 50.0
        master = s.world.agent(f.master)
        old = base.world
        assert master.position[0] - pub.position[0] == pytest.approx(
            old.agent(f.master).position[0] - old.agent(f.publisher).position[0])

    def test_bad_distance(self):
        with pytest.raises(ValidationError):
            sweep(load_preset("ugv-ugv-los"), [150], ["fixed"])

    def test_rows_sorted_and_seed_shared(self, small_scenario):
        rows = sweep(small_scenario, [40, 20], ["fixed", "adjustable"], seeds=[1, 2])
        assert [(r.distance_m, r.strategy) for r in rows] == [
            (20.0, "adjustable"), (20.0, "fixed"), (40.0, "adjustable"), (40.0, "fixed")]
        assert all(r.seeds == 2 for r in rows)
        text = summary_csv(rows)
        assert text.splitlines()[0].split(",") == SUMMARY_HEADER


class TestReport:
    def test_write_run_files(self, small_scenario, tmp_path):
        paths = write_run(run_simulation(small_scenario), tmp_path, trace=True)
        assert sorted(p.name for p in paths) == ["events.csv", "metrics.csv", "packets.csv", "trace.txt"]
        first = (tmp_path / "trace.txt").read_text().splitlines()[:2]
        assert first[0] == "0 WindowRequest 0 -"
        assert first[1].startswith("0 WindowGrant 0 begin=0 end=1000")

    def test_svg_is_deterministic(self, small_scenario, tmp_path):
        rows = sweep(small_scenario, [20, 40], ["fixed", "adjustable"])
        a = render_report(rows, tmp_path / "a", svg=True)
        b = render_report(rows, tmp_path / "b", svg=True)
        assert [p.name for p in a] == ["summary.csv", "chart_ugv-ugv_los.svg"]
        for pa, pb in zip(a, b):
            assert pa.read_bytes() == pb.read_bytes()
        assert b"<svg" in a[1].read_bytes()

    def test_empty_rows(self, tmp_path):
        with pytest.raises(ValueError):
            render_report([], tmp_path)
