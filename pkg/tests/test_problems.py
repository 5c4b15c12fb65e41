import numpy as np
import pytest
import scipy.sparse as sp

from conftest import enumerate_min, slow_ising_energy
from mfbcim.problems import (
    CapacityError,
    IsingProblem,
    WeightedGraph,
    brute_force_ground_state,
    cut_weight,
    ising_energy,
    maxcut_to_ising,
    random_graph_problem,
    read_problem,
    ring_afm,
    write_problem,
)


def triangle(w=1.0):
    return WeightedGraph(3, [(0, 1, w), (0, 2, w), (1, 2, w)])


class TestIsingEnergy:
    def test_ring4_alternating(self):
        problem = ring_afm(4)
        assert ising_energy(problem, [1, -1, 1, -1]) == -8.0
        # brute force confirms -8 is the minimum
        _, emin = enumerate_min(problem.dense_J().tolist(), problem.h.tolist())
        assert emin == -8.0

    def test_single_spin_no_field(self):
        problem = IsingProblem(np.zeros((1, 1)))
        assert ising_energy(problem, [1]) == 0.0
        assert ising_energy(problem, [-1]) == 0.0

    def test_triangle_afm(self):
        J = -np.ones((3, 3)) + np.eye(3)
        problem = IsingProblem(J)
        # hand sum over the 6 ordered pairs
        assert ising_energy(problem, [1, -1, -1]) == -2.0
        assert ising_energy(problem, [1, -1, -1]) == slow_ising_energy(J, [0, 0, 0], [1, -1, -1])

    def test_batch_matches_loop(self, rng):
        J = rng.normal(size=(5, 5))
        J = J + J.T
        np.fill_diagonal(J, 0.0)
        h = rng.normal(size=5)
        problem = IsingProblem(J, h=h)
        spins = rng.choice([-1, 1], size=(20, 5))
        batch = ising_energy(problem, spins)
        for k in range(20):
            assert batch[k] == pytest.approx(slow_ising_energy(J, h, spins[k]), rel=1e-12)

    def test_global_flip_invariance(self, rng):
        problem = ring_afm(8)
        s = rng.choice([-1, 1], size=8)
        assert ising_energy(problem, s) == pytest.approx(ising_energy(problem, -s))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            ising_energy(ring_afm(4), [1, -1, 1])

    def test_bad_spin_values(self):
        with pytest.raises(ValueError):
            ising_energy(ring_afm(4), [1, -1, 0, 1])


class TestMaxCut:
    def test_triangle_mapping(self):
        problem = maxcut_to_ising(triangle())
        expected = -np.ones((3, 3)) + np.eye(3)
        assert np.array_equal(problem.dense_J(), expected)
        # C = -sum over ordered pairs
        assert -problem.dense_J().sum() == 6.0

    def test_no_edges(self):
        problem = maxcut_to_ising(WeightedGraph(4, []))
        assert not problem.dense_J().any()
        for idx in range(16):
            s = [1 if (idx >> b) & 1 else -1 for b in range(4)]
            assert ising_energy(problem, s) == 0.0

    def test_cut_identity_triangle(self):
        g = triangle()
        problem = maxcut_to_ising(g)
        s = [1, -1, -1]
        assert cut_weight(g, s) == 2.0
        assert ising_energy(problem, s) == 6.0 + 2.0 * (-4.0)
        # brute force over all 8 bipartitions: max cut is 2
        cuts = []
        for idx in range(8):
            cfg = [1 if (idx >> b) & 1 else -1 for b in range(3)]
            cuts.append(cut_weight(g, cfg))
        assert max(cuts) == 2.0

    def test_cut_identity_random_graphs(self, rng):
        # H(s) == C + 2 * (sum of ordered cross-cut J entries) for every config,
        # and that ordered cross sum is -2 * cut_weight
        for trial in range(5):
            n = int(rng.integers(3, 7))
            edges = []
            for i in range(n):
                for j in range(i + 1, n):
                    if rng.random() < 0.6:
                        edges.append((i, j, float(rng.uniform(0.1, 2.0))))
            g = WeightedGraph(n, edges)
            problem = maxcut_to_ising(g)
            J = problem.dense_J()
            C = -J.sum()
            for idx in range(1 << n):
                s = np.array([1 if (idx >> b) & 1 else -1 for b in range(n)])
                cross = sum(
                    J[i, j] for i in range(n) for j in range(n) if i != j and s[i] != s[j]
                )
                assert ising_energy(problem, s) == pytest.approx(C + 2 * cross, abs=1e-9)
                assert cross == pytest.approx(-2.0 * cut_weight(g, s), abs=1e-12)

    def test_minimizing_h_maximizes_cut(self, rng):
        g = triangle()
        problem = maxcut_to_ising(g)
        best_cut, best_h = None, np.inf
        for idx in range(8):
            s = [1 if (idx >> b) & 1 else -1 for b in range(3)]
            e = ising_energy(problem, s)
            if e < best_h:
                best_h, best_cut = e, cut_weight(g, s)
        assert best_cut == 2.0


class TestCutWeight:
    def test_triangle(self):
        assert cut_weight(triangle(), [1, -1, -1]) == 2.0

    def test_empty_cut(self):
        assert cut_weight(triangle(), [1, 1, 1]) == 0.0

    def test_single_edge(self):
        g = WeightedGraph(2, [(0, 1, 3.5)])
        assert cut_weight(g, [1, -1]) == 3.5

    def test_graph_validation(self):
        with pytest.raises(ValueError):
            WeightedGraph(3, [(0, 0, 1.0)])
        with pytest.raises(ValueError):
            WeightedGraph(3, [(0, 1, -1.0)])
        with pytest.raises(ValueError):
            WeightedGraph(3, [(0, 1, 1.0), (1, 0, 2.0)])


class TestRingAfm:
    def test_entry_count(self):
        J = ring_afm(4).dense_J()
        assert (J == -1).sum() == 8
        assert J.sum() == -8.0

    def test_diagonal_of_ring_uncoupled(self):
        assert ring_afm(4).dense_J()[0, 2] == 0.0

    def test_ring16_ground_states(self):
        configs, energy = brute_force_ground_state(ring_afm(16))
        alt = np.array([1, -1] * 8)
        got = {tuple(c) for c in configs}
        assert got == {tuple(alt), tuple(-alt)}
        assert energy == -32.0

    def test_too_small(self):
        with pytest.raises(ValueError):
            ring_afm(2)


class TestRandomGraph:
    def test_p_zero(self):
        assert not random_graph_problem(8, 0.0, 1).dense_J().any()

    def test_p_one(self):
        J = random_graph_problem(3, 1.0, 1).dense_J()
        off = J[~np.eye(3, dtype=bool)]
        assert np.all(np.abs(off) == 1.0)

    def test_seed_determinism(self):
        a = random_graph_problem(50, 0.3, 9).dense_J()
        b = random_graph_problem(50, 0.3, 9).dense_J()
        assert np.array_equal(a, b)
        c = random_graph_problem(50, 0.3, 10).dense_J()
        assert not np.array_equal(a, c)

    def test_edge_fraction_n1000(self):
        problem = random_graph_problem(1000, 0.1, 4)
        nnz_pairs = sp.triu(problem.J, k=1).nnz
        pairs = 1000 * 999 // 2
        sigma = np.sqrt(pairs * 0.1 * 0.9)
        assert abs(nnz_pairs - 0.1 * pairs) < 3 * sigma

    def test_symmetric_zero_diag_sparse(self):
        problem = random_graph_problem(100, 0.2, 3)
        assert problem.is_sparse
        J = problem.dense_J()
        assert np.array_equal(J, J.T)
        assert not np.diag(J).any()

    def test_invalid_p(self):
        with pytest.raises(ValueError):
            random_graph_problem(5, 1.5, 0)


class TestBruteForce:
    def test_ring4(self):
        configs, energy = brute_force_ground_state(ring_afm(4))
        assert energy == -8.0
        assert {tuple(c) for c in configs} == {(1, -1, 1, -1), (-1, 1, -1, 1)}

    def test_single_spin(self):
        configs, energy = brute_force_ground_state(IsingProblem(np.zeros((1, 1))))
        assert energy == 0.0
        assert len(configs) == 2

    def test_triangle_frustration(self):
        J = -np.ones((3, 3)) + np.eye(3)
        configs, energy = brute_force_ground_state(IsingProblem(J))
        assert energy == -2.0
        assert len(configs) == 6

    def test_capacity(self):
        with pytest.raises(CapacityError):
            brute_force_ground_state(random_graph_problem(25, 0.5, 1))

    def test_lower_bound_random_configs(self, rng):
        problem = random_graph_problem(10, 0.4, 2)
        _, energy = brute_force_ground_state(problem)
        spins = rng.choice([-1, 1], size=(1000, 10))
        assert np.all(energy <= ising_energy(problem, spins) + 1e-9)

    def test_matches_enumeration_oracle(self, rng):
        J = rng.normal(size=(6, 6))
        J = J + J.T
        np.fill_diagonal(J, 0.0)
        h = rng.normal(size=6)
        problem = IsingProblem(J, h=h)
        configs, energy = brute_force_ground_state(problem)
        ref_cfg, ref_e = enumerate_min(J.tolist(), h.tolist())
        assert energy == pytest.approx(ref_e, rel=1e-12)
        assert {tuple(c) for c in configs} == {tuple(c) for c in ref_cfg}


class TestSerialization:
    def test_round_trip_dense(self, tmp_path, rng):
        J = rng.normal(size=(7, 7))
        J = J + J.T
        np.fill_diagonal(J, 0.0)
        problem = IsingProblem(J, h=rng.normal(size=7))
        path = tmp_path / "p.txt"
        write_problem(problem, path)
        back = read_problem(path)
        assert np.array_equal(back.dense_J(), problem.dense_J())
        assert np.array_equal(back.h, problem.h)

    def test_round_trip_sparse(self, tmp_path):
        problem = random_graph_problem(80, 0.1, 5)
        path = tmp_path / "p.txt"
        write_problem(problem, path)
        back = read_problem(path)
        assert back.is_sparse
        assert np.array_equal(back.dense_J(), problem.dense_J())

    def test_malformed(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("ising 3\nh 0.0 0.0 0.0\n2 1 -1.0\n")
        with pytest.raises(ValueError):
            read_problem(path)


class TestValidation:
    def test_asymmetric_rejected(self):
        J = np.zeros((3, 3))
        J[0, 1] = 1.0
        with pytest.raises(ValueError):
            IsingProblem(J)

    def test_nonzero_diagonal_rejected(self):
        with pytest.raises(ValueError):
            IsingProblem(np.eye(3))

    def test_couple_matches_dense(self, rng):
        problem = random_graph_problem(100, 0.2, 8)
        x = rng.normal(size=(4, 100))
        assert np.allclose(problem.couple(x), x @ problem.dense_J(), rtol=1e-12)
