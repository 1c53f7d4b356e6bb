import numpy as np
import pytest
from hypothesis import given, strategies as st

from vpmap.errors import DatasetError, ParseError
from vpmap.inference import McmcConfig, VpRow, VpTable, run_mcmc
from vpmap.io import (
    read_csv,
    read_dataset,
    read_draws,
    read_latent,
    read_vp_table,
    write_csv,
    write_dataset,
    write_draws,
    write_latent,
    write_vp_table,
)
from vpmap.graph import lattice_graph
from vpmap.model import Dataset, ModelSpec, draw_latent
from vpmap.priors import default_priors


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=20))
def test_float_round_trip(tmp_path_factory, values):
    p = tmp_path_factory.mktemp("rt") / "v.csv"
    write_csv(p, [{"v": v} for v in values], ["v"])
    back = [r["v"] for r in read_csv(p)]
    assert [float(b) for b in back] == values


def test_dataset_round_trip(tmp_path):
    obs = np.ones(6, bool)
    obs[4] = False
    d = Dataset(np.arange(6.0), np.full(6, 10.0), 3, 2, obs)
    write_dataset(tmp_path / "d.csv", d)
    back = read_dataset(tmp_path / "d.csv", n2=2)
    assert back.y.tolist() == d.y.tolist() and back.observed.tolist() == obs.tolist()


def test_dataset_any_row_order(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("area,time,y,exposure\n2,1,4,10\n1,2,3,10\n1,1,1,10\n2,2,5,10\n")
    d = read_dataset(p, n2=2)
    assert d.y.tolist() == [1, 3, 4, 5]


def test_dataset_absent_rows_are_missing(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("time,area,y,exposure\n1,1,1,10\n2,2,5,10\n")
    d = read_dataset(p, n2=2)
    assert d.observed.tolist() == [True, False, False, True]


@pytest.mark.parametrize(
    "body, exc",
    [
        ("time,area,y\n1,1,1\n", ParseError),
        ("time,area,y,exposure\nx,1,1,10\n", ParseError),
        ("time,area,y,exposure\n1,1,a,10\n", ParseError),
        ("time,area,y,exposure\n1,3,1,10\n", DatasetError),
        ("time,area,y,exposure\n1,1,1,10\n1,1,2,10\n", DatasetError),
        ("time,area,y,exposure\n1,1,11,10\n", DatasetError),
        ("time,area,y,exposure\n1,1,1,\n", DatasetError),
        ("time,area,y,exposure\n", DatasetError),
    ],
)
def test_dataset_errors(tmp_path, body, exc):
    p = tmp_path / "d.csv"
    p.write_text(body)
    with pytest.raises(exc):
        read_dataset(p, n2=2)


def test_latent_round_trip(tmp_path, rng):
    spec = ModelSpec("binomial", 1, "IV", True, 3, lattice_graph(2, 2))
    x = draw_latent(spec, rng, -2.0)
    write_latent(tmp_path / "x.csv", x)
    back = read_latent(tmp_path / "x.csv")
    for name in ("alpha", "beta1", "beta2", "delta", "eps1", "eps2"):
        assert back.block(name).tobytes() == x.block(name).tobytes()


def test_latent_gaps_rejected(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("block,index,value\nbeta1,1,0.5\nbeta1,3,-0.5\n")
    with pytest.raises(DatasetError):
        read_latent(p)


def test_vp_table_round_trip(tmp_path):
    t = VpTable([VpRow("main+int", "int", "gamma", 0.1 + 0.2, 1 / 3, 2 / 3)])
    write_vp_table(tmp_path / "t.csv", tmp_path / "t.json", t)
    assert read_vp_table(tmp_path / "t.csv").rows == t.rows


def test_draws_round_trip(tmp_path):
    spec = ModelSpec("binomial", 1, "I", False, 3, lattice_graph(1, 3))
    d = run_mcmc(Dataset.empty(3, 3), spec, default_priors(), McmcConfig(n_iterations=50, burn_in=10, thin=1, seed=4))
    write_draws(tmp_path / "d.csv", d)
    back = read_draws(tmp_path / "d.csv")
    assert back["gamma"].tobytes() == d.hyper["gamma"].ravel().tobytes()
    assert back["iteration"].tolist() == d.iterations.tolist()
