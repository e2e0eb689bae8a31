import pytest
from hypothesis import given, strategies as st

from incocsim.config import ConfigError, RunConfig, parse_config, render_config
from incocsim.protocol import RemoteLoadPolicy


def test_defaults_validate():
    cfg = RunConfig()
    cfg.validate()
    assert cfg.n_cores == 4
    assert cfg.l1.n_sets == 128
    assert cfg.l2.n_sets == 2048


def test_parse_overrides_and_comments():
    cfg = parse_config(
        "# experiment A\n"
        "n_cores = 8\n"
        "l1.size_bytes = 16384   # halved\n"
        "latency.dram_access = 400\n"
        "remote_load_policy = invalidate\n"
    )
    assert cfg.n_cores == 8
    assert cfg.l1.size == 16384
    assert cfg.latencies.dram_access == 400
    assert cfg.remote_load_policy is RemoteLoadPolicy.INVALIDATE


@pytest.mark.parametrize("text,needle", [
    ("bogus_key = 3", "unknown config key"),
    ("n_cores eight", "expected 'key = value'"),
    ("n_cores = eight", "expected an integer"),
    ("remote_load_policy = sometimes", "expected one of"),
    ("n_cores = 0", "n_cores"),
    ("page_size = 3000", "power of two"),
    ("l1.size_bytes = 1000", "l1"),
    ("l2.line_size = 128", "line sizes must match"),
    ("latency.l2_proc = 0", "l2_proc"),
])
def test_field_precise_errors(text, needle):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert needle in str(exc.value)


def test_error_names_the_line():
    with pytest.raises(ConfigError) as exc:
        parse_config("n_cores = 2\nn_cores = zzz\n")
    assert "line 2" in str(exc.value)


@given(n_cores=st.integers(1, 16), dram=st.integers(1, 1000),
       seed=st.integers(0, 2**31))
def test_render_parse_round_trip(n_cores, dram, seed):
    cfg = RunConfig(n_cores=n_cores, seed=seed)
    cfg.latencies.dram_access = dram
    again = parse_config(render_config(cfg))
    assert again == cfg
