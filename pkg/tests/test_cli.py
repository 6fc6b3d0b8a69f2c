from pathlib import Path

import numpy as np
import pytest

from mdp_approx.cli import ConfigError, load_config, main, run
from mdp_approx.tables import read_csv

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMALL = """
[output]
emit_plots = {plots}

[inventory]
experiments = {experiments}
family_ells = [0.0, 0.01, 0.02]
stability_ells = [0.0, 0.001]

[inventory.true_model]
s_max = 40
demand_n = 4

[inventory.approx_model]
s_max = 40
demand_n = 4
"""


def small_config(tmp_path, experiments='["fig_im_bound", "fig_alpha"]', plots="false"):
    path = tmp_path / "small.toml"
    path.write_text(SMALL.format(experiments=experiments, plots=plots))
    return path


def parse_report(text):
    return {line.split()[0]: line.split()[1] for line in text.strip().splitlines()}


def test_fig_im_bound_default_models(tmp_path, capsys):
    assert main(["inventory", "--experiment", "fig_im_bound", "--out", str(tmp_path)]) == 0
    meta, header, data = read_csv(tmp_path / "fig_im_bound.csv")
    assert header == ["s", "V_hat_pi", "lower_weighted", "lower_sup", "V_star"]
    assert data.shape == (1001, 5)
    np.testing.assert_array_equal(data[:, 0], np.arange(-500, 501))
    assert np.all(data[:, 2] <= data[:, 4] + 1e-8)
    assert meta["weighted_status"] == "certified"


def test_no_oracle_drops_v_star(tmp_path):
    assert main(["run", str(small_config(tmp_path)), "--out", str(tmp_path), "--no-oracle"]) == 0
    _, header, _ = read_csv(tmp_path / "fig_im_bound.csv")
    assert header == ["s", "V_hat_pi", "lower_weighted", "lower_sup"]


def test_output_is_deterministic(tmp_path):
    config = small_config(tmp_path)
    assert run(config, tmp_path / "a") == 0
    assert run(config, tmp_path / "b") == 0
    for name in ("fig_im_bound.csv", "fig_alpha.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_weight_family_outputs(tmp_path):
    config = small_config(tmp_path, '["fig_weight_family"]', plots="true")
    assert main(["inventory", "--config", str(config), "--out", str(tmp_path)]) == 0
    names = sorted(p.name for p in tmp_path.glob("fig_weight_family*.csv"))
    assert names == ["fig_weight_family_ell_0.01.csv", "fig_weight_family_ell_0.02.csv",
                     "fig_weight_family_ell_0.csv", "fig_weight_family_min.csv"]
    assert (tmp_path / "fig_weight_family_min_zoom.svg").exists()


def test_uncertified_exit_code(tmp_path, capsys):
    code = main(["run", str(CONFIGS / "inventory_uncertified.toml"), "--out", str(tmp_path)])
    assert code == 2
    assert "UNCERTIFIED" in capsys.readouterr().out
    meta, _, _ = read_csv(tmp_path / "fig_im_bound.csv")
    assert meta["weighted_status"] == "uncertified"


def test_lqr_twin_prints_zero_bound(capsys):
    assert main(["lqr", "--config", str(CONFIGS / "lqr_certainty_equivalence.toml")]) == 0
    fields = parse_report(capsys.readouterr().out)
    assert float(fields["bound"]) <= 1e-9
    assert fields["status"] == "certified"


def test_lqr_inline_matrices(capsys):
    argv = ["lqr", "--a", "1", "--b", "1", "--q", "1", "--r", "1", "--sigma-w", "1", "--a-hat", "1.1",
            "--gamma", "0.9", "--ell", "0.05"]
    assert main(argv) == 0
    fields = parse_report(capsys.readouterr().out)
    assert float(fields["realized"]) <= float(fields["bound"])


def test_lqr_uncertified(capsys):
    assert main(["lqr", "--a", "1", "--sigma-w", "5", "--ell", "0.05"]) == 2


def test_ce_subcommand(capsys):
    assert main(["ce", "--config", str(CONFIGS / "ce_scalar.toml")]) == 0
    fields = parse_report(capsys.readouterr().out)
    assert float(fields["realized"]) <= float(fields["bound"])


def test_random_suite_subcommand(capsys):
    assert main(["random-suite", "--instances", "5", "--seed", "7", "--lqr-pairs", "4"]) == 0
    assert capsys.readouterr().out.strip().endswith("PASS")


def test_malformed_config(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[inventory]\nell = = 3\n")
    assert main(["run", str(bad)]) == 1
    assert "line 2" in capsys.readouterr().err


@pytest.mark.parametrize("text,match", [
    ("[inventory]\nbogus = 1\n", "bogus"),
    ("[nonsense]\n", "nonsense"),
    ('[inventory]\nexperiments = ["fig_9"]\n', "fig_9"),
    ("[lqr]\nell = 0.1\n", "'a'"),
])
def test_schema_errors(tmp_path, text, match):
    path = tmp_path / "c.toml"
    path.write_text(text)
    with pytest.raises(ConfigError, match=match):
        load_config(path)


def test_usage_errors_exit_one():
    with pytest.raises(SystemExit) as info:
        main(["inventory", "--experiment", "fig_9"])
    assert info.value.code == 1


def test_missing_config_file(tmp_path):
    assert main(["run", str(tmp_path / "missing.toml")]) == 1
