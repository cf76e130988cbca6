import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hscompress import spaces
from hscompress.errors import CapacityError, ConfigError, InputError, OutOfRangeError

import oracles

letters = st.text(alphabet="aAbB", max_size=12)


@pytest.mark.parametrize(
    "word, expected",
    [("aA", ""), ("abBA", ""), ("abA", "abA"), ("", ""), ("aaAbB", "a")],
)
def test_reduce_word(word, expected):
    assert spaces.reduce_word(word) == expected


def test_reduce_word_rejects_bad_letters():
    with pytest.raises(InputError):
        spaces.reduce_word("a1")
    with pytest.raises(InputError):
        spaces.reduce_word("ac", rank=2)


@given(letters)
def test_reduce_matches_oracle(w):
    assert spaces.reduce_word(w) == oracles.free_reduce(w)


@given(letters, letters)
def test_free_distance_matches_oracle(x, y):
    F = spaces.FreeGroup(2)
    x, y = spaces.reduce_word(x), spaces.reduce_word(y)
    assert F.distance(x, y) == oracles.free_distance(x, y)


def test_distance_examples():
    assert spaces.FreeGroup(2).distance("ab", "aB") == 2
    assert spaces.LatticeZn(3).distance((1, 0, -2), (0, 0, 0)) == 3
    assert spaces.FreeGroup(2).distance("abA", "abA") == 0


@pytest.mark.parametrize("R, size, spheres", [(1, 5, (1, 4)), (2, 17, (1, 4, 12))])
def test_free_ball_small(R, size, spheres):
    ball = spaces.FreeGroup(2).ball(R)
    assert len(ball) == size
    assert tuple(ball.sphere_sizes) == spheres


@pytest.mark.parametrize("R", [3, 4, 5, 6])
def test_free_ball_matches_bfs(R):
    ball = spaces.FreeGroup(2).ball(R)
    assert set(ball.points) == set(oracles.free_ball(R))
    assert sum(ball.sphere_sizes) == len(ball)


def test_ball_sizes_frozen():
    # values from the BFS oracle
    F = spaces.FreeGroup(2)
    assert [len(F.ball(R)) for R in (5, 6, 8)] == [485, 1457, 13121]


@pytest.mark.parametrize("n, R", [(1, 4), (2, 3), (3, 3)])
def test_lattice_ball(n, R):
    ball = spaces.LatticeZn(n).ball(R)
    assert set(map(tuple, ball.points)) == set(oracles.lattice_ball(n, R))
    for k, s in enumerate(ball.sphere_sizes):
        assert s == spaces.lattice_sphere_size(n, k)


def test_lattice_r1():
    assert len(spaces.LatticeZn(2).ball(1)) == 5


@pytest.mark.parametrize(
    "space, R",
    [
        (spaces.FreeGroup(2), 4),
        (spaces.LatticeZn(2), 4),
        (spaces.HeisenbergZ(), 3),
        (spaces.Product([spaces.LatticeZn(1), spaces.FreeGroup(2)]), 3),
    ],
)
def test_sphere_growth_bound(space, R):
    ball = space.ball(R)
    for n, s in enumerate(ball.sphere_sizes):
        assert s <= space.card_S**n
    for p, length in zip(ball.points, ball.lengths):
        assert length <= R
        assert space.length(p) == length


@pytest.mark.parametrize(
    "space, R",
    [
        (spaces.FreeGroup(2), 3),
        (spaces.LatticeZn(2), 3),
        (spaces.HeisenbergZ(), 2),
        (spaces.Product([spaces.LatticeZn(1), spaces.FreeGroup(2)]), 2),
    ],
)
def test_metric_axioms(space, R):
    pts = list(space.ball(R).points)
    D = np.asarray(space.distance_matrix(pts))
    assert np.array_equal(D, D.T)
    off = ~np.eye(len(pts), dtype=bool)
    assert np.all(D[off] > 0) and np.all(np.diag(D) == 0)
    # triangle inequality over all triples
    assert np.all(D[:, None, :] <= D[:, :, None] + D[None, :, :])


def test_product_metric_is_sum():
    Z, F = spaces.LatticeZn(1), spaces.FreeGroup(2)
    P = spaces.Product([Z, F])
    x, y = ((3,), "ab"), ((-1,), "aB")
    assert P.distance(x, y) == Z.distance((3,), (-1,)) + F.distance("ab", "aB")


def test_heisenberg_center_lengths():
    # BFS over 3x3 unipotent matrices
    H = spaces.HeisenbergZ()
    lengths = [H.length(spaces.central_power(m)) for m in range(13)]
    assert lengths == oracles.heis_center_lengths(12, 14)
    assert lengths[0] == 0 and lengths[1] == 4
    assert lengths == [0, 4, 6, 8, 8, 10, 10, 12, 12, 12, 14, 14, 14]


def test_heisenberg_sublinear():
    H = spaces.HeisenbergZ()
    lengths = [H.length(spaces.central_power(m)) for m in range(1, 10)]
    assert all(a <= b for a, b in zip(lengths, lengths[1:]))
    ratios = [n / m for m, n in enumerate(lengths, start=1)]
    assert ratios[-1] < ratios[0] / 2


def test_heisenberg_out_of_range():
    H = spaces.HeisenbergZ(cap=4)
    with pytest.raises(OutOfRangeError) as e:
        H.length(spaces.central_power(40))
    assert e.value.required_radius > 4


def test_capacity_error(monkeypatch):
    monkeypatch.setenv("HSCOMPRESS_MAX_POINTS", "100")
    with pytest.raises(CapacityError) as e:
        spaces.FreeGroup(2).ball(6)
    assert e.value.predicted == 1457


def test_genset_metric():
    F = spaces.FreeGroup(2, extra_generators=("ab",))
    assert not F.standard
    assert F.distance("", "ab") == 1
    assert F.distance("", "a") == 1
    assert F.distance("", "abab") == 2


@pytest.mark.parametrize("text", ["f2", "f2:gens=ab", "z", "z3", "zn:n=2", "heis", "prod(z,f2)"])
def test_parse_group(text):
    assert isinstance(spaces.parse_group(text), spaces.GroupSpec)


def test_parse_group_rejects():
    with pytest.raises((ConfigError, InputError)):
        spaces.parse_group("nonsense")


def test_point_cloud_roundtrip(tmp_path):
    coords = np.array([[0.0, 0.0], [3.0, 4.0], [1.0, 0.0]])
    cloud = spaces.PointCloud.from_coords("c", coords)
    assert cloud.distance(0, 1) == 5.0
    for writer in (spaces.write_coords_csv, spaces.write_distance_csv):
        path = tmp_path / f"{writer.__name__}.csv"
        path.write_text(writer(cloud))
        back = spaces.read_point_cloud(str(path))
        np.testing.assert_allclose(back.dist, cloud.dist)


def test_lcp_matrix():
    A = ["", "a", "ab", "aB", "b"]
    la, lb, lcp = spaces.lcp_matrix(A, A)
    for (i, x), (j, y) in itertools.product(enumerate(A), repeat=2):
        assert lcp[i, j] == spaces.lcp_length(x, y)


@settings(max_examples=50)
@given(st.integers(0, 10))
def test_sphere_formula(n):
    assert spaces.free_sphere_size(2, n) == oracles.f2_sphere(n)
