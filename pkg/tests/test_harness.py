import csv

import pytest

from agentic_thermal.bus import LatencyModel
from agentic_thermal.config import (ConfigInvalid, ExperimentConfig, config_from_dict,
                                    load_config)
from agentic_thermal.harness import (REPORT_NAME, HorizonMetrics, MetricsReport, MissingLog,
                                     Stat, compare, emit_plot_data, format_report, read_report,
                                     run_experiment, run_repeats, window_breakdown)
from agentic_thermal.telemetry import EpisodeSummary

SHORT = dict(sim_duration=1800.0, window_duration=600.0)


def short(mode="baseline", **kw):
    return ExperimentConfig(mode=mode, **{**SHORT, **kw})


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def agentic_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("agentic")
    return run_experiment(short("agentic", latency=LatencyModel.fixed(0.0)), out)


def test_baseline_has_no_supervision(tmp_path):
    r = run_experiment(short(), tmp_path)
    assert r.recommendations == [] and r.overrides == [] and r.bus_events == []
    assert rows(tmp_path / "recommendations.csv") == []
    assert r.report.full.n_episodes == len(r.summaries) > 0


def test_run_writes_all_logs(agentic_run):
    names = {p.name for p in agentic_run.output_dir.iterdir()}
    assert names == {"telemetry.csv", "episodes.csv", "recommendations.csv", "bus_events.csv",
                     "losses.csv", REPORT_NAME, "plot_episode_mean.csv",
                     "plot_alpha_markers.csv", "plot_latency.csv"}


def test_identical_runs_give_identical_logs(tmp_path):
    cfg = short("agentic", latency=LatencyModel.empirical(), seed=3)
    run_experiment(cfg, tmp_path / "a")
    run_experiment(cfg, tmp_path / "b")
    for name in ("telemetry.csv", "episodes.csv", "recommendations.csv", "bus_events.csv",
                 "losses.csv", REPORT_NAME):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_first_override_lands_at_first_window_boundary(agentic_run):
    it, t, alpha = agentic_run.overrides[0]
    assert 600.0 <= t < 600.0 + 10.0 + 1.0  # an episode or cool-down may straddle it
    for it, _, alpha in agentic_run.overrides:
        assert agentic_run.alpha_trace[it] == alpha
    windows = [int(r["window_id"]) for r in rows(agentic_run.output_dir / "recommendations.csv")]
    assert windows == sorted(set(windows))


def test_supervision_never_delivered_matches_baseline(tmp_path):
    base = run_experiment(short(seed=5), write_files=False)
    late = run_experiment(short("agentic", seed=5, latency=LatencyModel.fixed(1e9)),
                          write_files=False)
    assert late.overrides == []
    assert late.telemetry == base.telemetry
    assert late.summaries == base.summaries


def test_plot_series(agentic_run):
    out = agentic_run.output_dir
    means = rows(out / "plot_episode_mean.csv")
    lengths = [s.n_steps for s in agentic_run.summaries]
    for k, row in enumerate(means, start=1):
        assert float(row["running_mean_length"]) == pytest.approx(sum(lengths[:k]) / k)
        assert int(row["iteration"]) == sum(lengths[:k])
    markers = rows(out / "plot_alpha_markers.csv")
    assert [int(m["iteration"]) for m in markers] == [o[0] for o in agentic_run.overrides]
    assert len(rows(out / "plot_latency.csv")) == len(agentic_run.recommendations)


def test_plot_data_needs_logs(tmp_path):
    with pytest.raises(MissingLog):
        emit_plot_data(tmp_path)


def test_window_breakdown_boundaries():
    s = [EpisodeSummary(1, 5, 0, 0.0, 0.0, True, 600.0),
         EpisodeSummary(2, 5, 0, 0.0, 0.0, False, 601.0),
         EpisodeSummary(3, 7, 0, 0.0, 0.0, True, 1800.0)]
    w = window_breakdown(s, 600.0, 1800.0)
    assert [(x.n_episodes, x.violations) for x in w] == [(1, 1), (1, 0), (1, 1)]


def report(dur, viol, cpu, mode="baseline"):
    h = HorizonMetrics(Stat(viol, 1.0), Stat(dur, 2.0), Stat(cpu, 0.5), 10)
    return MetricsReport(mode, "ground", [0, 1], h, h, 7200.0, 14400.0)


def test_compare_is_antisymmetric_in_sign():
    a, b = report(40.0, 20.0, 30.0), report(60.0, 10.0, 25.0, "agentic")
    fwd, back = compare(a, b), compare(b, a)
    for f, r in zip(fwd, back):
        assert f.percent_change * r.percent_change < 0
        assert (1 + f.percent_change / 100) * (1 + r.percent_change / 100) == pytest.approx(1.0)


def test_report_round_trip(tmp_path):
    r = report(47.17, 39.33, 25.81)
    (tmp_path / REPORT_NAME).write_text(format_report(r))
    assert read_report(tmp_path) == r
    with pytest.raises(MissingLog):
        read_report(tmp_path / "absent")


def test_repeats_combine(tmp_path):
    combined, results = run_repeats(short(sim_duration=600.0, window_duration=300.0),
                                    tmp_path, repeats=2)
    assert combined.seeds == [0, 1]
    means = [r.report.full.avg_episode_duration.mean for r in results]
    assert combined.full.avg_episode_duration.mean == pytest.approx(sum(means) / 2)
    assert (tmp_path / "seed_1" / REPORT_NAME).exists()
    assert read_report(tmp_path).seeds == [0, 1]


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigInvalid) as exc:
        config_from_dict({"plant": {"capacitance_typo": 1.0}, "extra": {}})
    assert any("capacitance_typo" in e for e in exc.value.errors)
    assert any("extra" in e for e in exc.value.errors)
    with pytest.raises(ConfigInvalid):
        config_from_dict({"experiment": {"mode": "auto"}})
    with pytest.raises(ConfigInvalid):
        ExperimentConfig(early_slice=0.0).resolved()


def test_config_defaults_by_environment():
    g = ExperimentConfig().resolved()
    o = ExperimentConfig(environment="orbit").resolved()
    assert (g.sim_duration, g.window_duration, g.early_slice) == (14400.0, 3600.0, 7200.0)
    assert (o.sim_duration, o.window_duration) == (16200.0, 900.0)
    assert o.supervisor.window_duration == 900.0


def test_load_toml(tmp_path):
    path = tmp_path / "exp.toml"
    path.write_text('[experiment]\nmode = "agentic"\nseed = 7\n\n'
                    '[controller]\nbatch_size = 32\ncooldown = 5.0\n\n'
                    '[latency]\nkind = "fixed"\nvalue = 2.5\n')
    cfg = load_config(path)
    assert (cfg.mode.value, cfg.seed) == ("agentic", 7)
    assert cfg.controller.sac.batch_size == 32 and cfg.controller.cooldown == 5.0
    assert cfg.latency == LatencyModel.fixed(2.5)
    path.write_text("[experiment\n")
    with pytest.raises(ConfigInvalid):
        load_config(path)
