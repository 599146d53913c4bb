import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qswaptrace.cswap import (
    METHODS,
    OutcomeDistribution,
    ShotCounts,
    bitstring,
    build_circuit,
    exact_distribution,
    exact_distribution_dense,
    exact_distribution_moments,
    exact_distribution_statevector,
    kraus_operator,
    prefix_parity_mask,
    sample,
    tensor_power,
)
from qswaptrace.errors import InvalidArgument, ResourceLimit
from qswaptrace.permtrace import PermutationWord, eval_trace_cycles
from qswaptrace.qstate import (
    MomentVector,
    make_ghz,
    make_w,
    maximally_mixed,
    moments,
    random_mixed,
    random_pure,
)

GHZ3_N4 = {
    "000": 0.421875, "001": 0.140625, "010": 0.140625, "011": 0.046875,
    "100": 0.140625, "101": 0.046875, "110": 0.046875, "111": 0.015625,
}


def word_oracle(dm, n, forward_first):
    """Brute-force ``4^{1-n} sum_{x,y} (-1)^{z.(x+y)} tr(P_x^{-1} P_y rho^n)``.

    ``forward_first`` picks ``P_x = S_1^{x_1} ... S_{n-1}^{x_{n-1}}`` (written
    order) instead of the circuit order ``S_{n-1}^{x_{n-1}} ... S_1^{x_1}``.
    """
    nc = n - 1
    xs = list(itertools.product([0, 1], repeat=nc))

    def word(x):
        w = [k + 1 for k in range(nc) if x[k]]
        return w if forward_first else w[::-1]

    out = []
    for z in xs:
        total = []
        for x in xs:
            for y in xs:
                sign = (-1) ** (sum(a * b for a, b in zip(z, x)) + sum(a * b for a, b in zip(z, y)))
                w = PermutationWord(tuple(word(x)[::-1] + word(y)), n)
                total.append(sign * eval_trace_cycles(w, dm))
        out.append(math.fsum(total) / 4**nc)
    return np.array(out)


class TestFixedValues:
    def test_ghz3_three_copies(self):
        d = exact_distribution(make_ghz(3), 3)
        np.testing.assert_allclose(d.probabilities, [0.5625, 0.1875, 0.1875, 0.0625], atol=1e-12)

    def test_ghz3_four_copies(self):
        d = exact_distribution(make_ghz(3), 4)
        for z, p in GHZ3_N4.items():
            assert d[z] == pytest.approx(p, abs=1e-12)

    def test_w3_three_copies(self):
        d = exact_distribution(make_w(3), 3, method="statevector")
        m2, m3 = 5 / 9, 1 / 3
        expected = [(1 + 2 * m2 + m3) / 4, (1 - m3) / 4, (1 - m3) / 4, (1 - 2 * m2 + m3) / 4]
        np.testing.assert_allclose(d.probabilities, expected, atol=1e-12)

    def test_maximally_mixed_two_copies(self):
        d = exact_distribution_dense(maximally_mixed(2), 2)
        np.testing.assert_allclose(d.probabilities, [0.75, 0.25], atol=1e-14)

    def test_pure_reduced_state_is_point_mass(self):
        d = exact_distribution_moments(MomentVector([1.0, 1.0, 1.0], 2), 3)
        np.testing.assert_allclose(d.probabilities, [1, 0, 0, 0], atol=1e-15)

    def test_whole_pure_state_two_copies(self):
        d = exact_distribution(random_pure([2, 3], seed=3), 2, target="all", method="statevector")
        assert d["0"] == pytest.approx(1.0, abs=1e-12)


class TestAgreement:
    @pytest.mark.parametrize("seed", range(6))
    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_three_paths_pure(self, seed, n):
        psi = random_pure([2, 3], seed=seed)
        ps = [exact_distribution(psi, n, (2,), m).probabilities for m in METHODS]
        np.testing.assert_allclose(ps[0], ps[1], atol=1e-10)
        np.testing.assert_allclose(ps[0], ps[2], atol=1e-10)

    def test_multi_subsystem_target(self):
        psi = random_pure([2, 2, 2], seed=21)
        a = exact_distribution(psi, 3, "1,3", "moments")
        b = exact_distribution(psi, 3, "1,3", "statevector")
        np.testing.assert_allclose(a.probabilities, b.probabilities, atol=1e-10)

    @given(st.integers(1, 3), st.integers(2, 5), st.integers(0, 2**31 - 1))
    @settings(max_examples=40, deadline=None)
    def test_dense_matches_moments_mixed(self, d, n, seed):
        if d**n > 2**12:
            return
        dm = random_mixed(d, d, seed)
        a = exact_distribution_dense(dm, n).probabilities
        b = exact_distribution_moments(moments(dm, n), n).probabilities
        np.testing.assert_allclose(a, b, atol=1e-10)

    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_expansion_order_does_not_matter(self, n):
        dm = random_mixed(3, 3, seed=n)
        circuit = word_oracle(dm, n, forward_first=False)
        written = word_oracle(dm, n, forward_first=True)
        fast = exact_distribution_moments(moments(dm, n), n).probabilities
        np.testing.assert_allclose(circuit, written, atol=1e-12)
        np.testing.assert_allclose(fast, circuit, atol=1e-12)


class TestStructure:
    @given(st.integers(2, 7), st.integers(0, 2**31 - 1))
    @settings(max_examples=30, deadline=None)
    def test_parity_inversion(self, n, seed):
        dm = random_mixed(3, 2, seed)
        mv = moments(dm, n)
        p = exact_distribution_moments(mv, n)
        assert p.probabilities.sum() == pytest.approx(1.0, abs=1e-9)
        for k in range(2, n + 1):
            even = p.probabilities[prefix_parity_mask(n - 1, k)].sum()
            assert 2 * even - 1 == pytest.approx(mv.m(k), abs=1e-10)

    def test_symmetries(self):
        mv = moments(random_mixed(3, 3, seed=5), 4)
        d3 = exact_distribution_moments(mv, 3)
        assert d3["01"] == pytest.approx(d3["10"], abs=1e-14)
        d4 = exact_distribution_moments(mv, 4)
        assert d4["001"] == pytest.approx(d4["100"], abs=1e-14)
        assert d4["011"] == pytest.approx(d4["110"], abs=1e-14)

    def test_kraus_is_not_a_projector(self):
        for i in range(4):
            K = kraus_operator(bitstring(i, 2), 2)
            if np.abs(K.T @ K - K).max() > 0.1:
                break
        else:
            pytest.fail("every K_z was idempotent")

    def test_trace_of_kraus_differs_from_probability(self):
        # distinct copies at n = 3; identical copies need n = 4
        rhos = [random_mixed(2, 2, seed=s).entries for s in (1, 2, 3)]
        X = np.kron(np.kron(rhos[0], rhos[1]), rhos[2])
        gaps = []
        for i in range(4):
            K = kraus_operator(bitstring(i, 2), 2)
            gaps.append(abs(np.trace(K @ X) - np.trace(K.T @ K @ X)))
        assert max(gaps) > 1e-3
        dm = random_mixed(2, 2, seed=1)
        X4 = tensor_power(dm.entries, 4)
        p = exact_distribution_dense(dm, 4)
        gaps4 = [abs(np.trace(kraus_operator(bitstring(i, 3), 2) @ X4).real - p.probabilities[i]) for i in range(8)]
        assert max(gaps4) > 1e-3

    def test_identical_copies_hide_the_gap_at_three(self):
        dm = random_mixed(2, 2, seed=1)
        X = tensor_power(dm.entries, 3)
        p = exact_distribution_dense(dm, 3)
        for i in range(4):
            K = kraus_operator(bitstring(i, 2), 2)
            assert np.trace(K @ X).real == pytest.approx(p.probabilities[i], abs=1e-12)

    def test_circuit_metadata(self):
        c = build_circuit(4, (1,), (2, 2, 2))
        assert c.gate_count == 9
        assert c.qubit_count_formula["control_qubits"] == 3
        assert c.qubit_count_formula["data_qubits"] == 12

    def test_parity_mask(self):
        assert prefix_parity_mask(2, 2).tolist() == [True, True, False, False]
        assert prefix_parity_mask(2, 3).tolist() == [True, False, False, True]


class TestLimits:
    def test_too_few_copies(self):
        with pytest.raises(InvalidArgument):
            exact_distribution(make_ghz(3), 1)

    def test_moment_cap(self):
        with pytest.raises(ResourceLimit):
            exact_distribution_moments(MomentVector(np.ones(11), 2), 11)

    def test_dense_cap(self):
        with pytest.raises(ResourceLimit):
            exact_distribution_dense(maximally_mixed(3), 8)

    def test_statevector_needs_pure(self):
        with pytest.raises(InvalidArgument):
            exact_distribution_statevector(maximally_mixed(2), 2)

    def test_unknown_method(self):
        with pytest.raises(InvalidArgument):
            exact_distribution(make_ghz(3), 3, method="magic")

    def test_missing_moments(self):
        with pytest.raises(InvalidArgument):
            exact_distribution_moments(MomentVector([1.0, 0.5], 2), 3)


class TestSampling:
    def test_deterministic(self):
        d = exact_distribution(make_ghz(3), 4)
        a, b = sample(d, 2**15, seed=3), sample(d, 2**15, seed=3)
        assert a.as_dict() == b.as_dict()
        assert a.total == 2**15

    def test_point_mass(self):
        d = OutcomeDistribution([0, 0, 1, 0], 2)
        assert sample(d, 100, seed=0).as_dict() == {"00": 0, "01": 0, "10": 100, "11": 0}

    def test_rejects_zero_shots(self):
        with pytest.raises(InvalidArgument):
            sample(OutcomeDistribution([1.0, 0.0], 1), 0)


class TestSerialization:
    def test_distribution_round_trip(self):
        d = exact_distribution(make_w(3), 4)
        back = OutcomeDistribution.from_json(d.to_json())
        np.testing.assert_array_equal(back.probabilities, d.probabilities)

    def test_counts_round_trip(self):
        c = sample(exact_distribution(make_w(3), 3), 500, seed=1)
        back = ShotCounts.from_json(c.to_json())
        np.testing.assert_array_equal(back.counts, c.counts)

    def test_counts_total_mismatch(self):
        with pytest.raises(InvalidArgument):
            ShotCounts.from_json({"n_controls": 1, "counts": {"0": 3, "1": 1}, "total": 5})

    def test_bad_outcome_label(self):
        with pytest.raises(InvalidArgument):
            OutcomeDistribution.from_json({"n_controls": 2, "probabilities": {"0": 1.0}})

    def test_invalid_distribution(self):
        with pytest.raises(InvalidArgument):
            OutcomeDistribution([0.5, 0.6], 1)
