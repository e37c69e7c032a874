import pytest

import optospike


def test_presets():
    assert "fhn-classic" in optospike.neuron_presets()
    assert "chr2-4-foutz" in optospike.channel_presets()
    with pytest.raises(optospike.ConfigError):
        optospike.System("squid")


def test_fhn_single_switch():
    sys = optospike.System("fhn", "chr2-3", u_max=0.5)
    assert sys.dim == 4
    assert sys.state_names == ["v", "w", "o", "d"]
    res = optospike.solve_bangbang(sys, 1.5)
    assert res.k == 1
    assert res.start_on
    assert res.t_f < res.t_constant
    report = optospike.verify_extremal(sys, res.switches, 1.5)
    assert report["sign_consistency"] >= 0.99


def test_direct_matches_bang():
    sys = optospike.System("fhn", "chr2-3", u_max=0.5)
    bang = optospike.solve_bangbang(sys, 1.5)
    sol = optospike.solve_direct(sys, 1.5, nodes=200)
    assert sol.converged
    assert abs(sol.t_f - bang.t_f) / bang.t_f < 0.01
    assert len(sol.x) == sol.N + 1


def test_overrides_and_rest():
    sys = optospike.System("hh", "chr2-4", overrides={"g_ChR2": 0.7})
    rest = sys.dark_rest()
    assert abs(rest[0]) < 1e-9
    assert max(abs(v) for v in sys.eval(rest, 0.0)) < 1e-10


def test_physiological_umax():
    assert abs(optospike.physiological_umax(0.5, 1e-8, 6.2e9, 1.1) - 0.028) < 1e-3


def test_cli_usage_error():
    code, _, err = optospike.run_cli(["solve", "--model", "fhn"])
    assert code == 2
    assert "--vs" in err
