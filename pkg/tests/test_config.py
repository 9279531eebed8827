import pytest

from dualtrack.config import Config, ConfigError, format_config, load_config, parse_config


def test_defaults():
    c = Config()
    assert (c.segment_length, c.beta1, c.beta2, c.n_sp, c.delta, c.agreement_overlap) == (10, 1.0, 5.0, 2000, 15.0, 0.8)
    assert (c.gmm_fg_k, c.gmm_bg_k, c.max_iters, c.phi0) == (10, 50, 50, 0.05)


def test_parse_and_round_trip(tmp_path):
    c = parse_config("# comment\nn_sp = 200\ncand_radius = 12  # px\nseed=4\n")
    assert c.n_sp == 200 and c.cand_radius == 12.0 and c.seed == 4
    p = tmp_path / "run.cfg"
    p.write_text(format_config(c))
    assert load_config(p) == c
    assert parse_config("cand_radius = auto").cand_radius is None


@pytest.mark.parametrize("text", ["bogus = 1", "n_sp = many", "n_sp 3", "n_sp = 0",
                                  "agreement_overlap = 1.5", "segment_length = 1", "couple_weight = -1"])
def test_bad_config(text):
    with pytest.raises(ConfigError):
        parse_config(text)
