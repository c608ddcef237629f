import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from qubof.core import MatrixGenSpec, generate_matrix
from qubof.errors import ContractViolation, DegenerateInputError
from qubof.obfuscation import (
    ObfuscationParams,
    ObfuscationSecret,
    TransmitSet,
    digit_matrices,
    digit_split,
    load_secret,
    make_decoy,
    normalize,
    obfuscate,
    permute_matrix,
    reconstruct_matrix,
    save_secret,
    unpermute_matrix,
)


def oracle_digits(v: float, r: int, k: int) -> list[int]:
    """Signed digits straight from the definition, in exact rational arithmetic."""
    a = abs(Fraction(v))
    sign = (v > 0) - (v < 0)
    return [sign * (int(a * r**m) % r) for m in range(1, k + 1)]


def split_scalar(v, r, k):
    return [int(d.entries[0, 0]) for d in digit_split([[v]], r, k)]


class TestNormalize:
    def test_worked_example(self, example_q):
        qstar, scale = normalize(example_q, 1e-6)
        assert scale == pytest.approx(18 * (1 + 1e-6))
        assert qstar.entries[2, 2] == pytest.approx(-0.999999, abs=1e-9)
        assert qstar.entries[0, 0] == pytest.approx(1 / 3 / (1 + 1e-6), abs=1e-12)
        assert qstar.entries[0, 0] == pytest.approx(0.333333, abs=1e-6)

    def test_strictly_inside_unit_interval(self, rng):
        qstar, _ = normalize(rng.normal(size=(9, 9)), 1e-9)
        assert np.all(np.abs(qstar.entries) < 1)
        assert np.max(np.abs(qstar.entries)) == pytest.approx(1 / (1 + 1e-9))

    def test_zero_matrix(self):
        with pytest.raises(DegenerateInputError):
            normalize(np.zeros((3, 3)))

    def test_epsilon_must_be_positive(self):
        with pytest.raises(ContractViolation):
            normalize([[-1.0]], 0.0)

    @pytest.mark.parametrize("c", [0.5, 2.0, 3.0, 7.0, 1024.0])
    def test_scale_invariant(self, example_q, c):
        assert normalize(c * example_q)[0] == normalize(example_q)[0]


class TestDigitSplit:
    def test_binary(self):
        assert split_scalar(0.6875, 2, 4) == [1, 0, 1, 1]

    def test_binary_negative(self):
        assert split_scalar(-0.6875, 2, 4) == [-1, 0, -1, -1]

    def test_decimal(self):
        assert split_scalar(0.5, 10, 3) == [5, 0, 0]

    def test_zero(self):
        assert split_scalar(0.0, 7, 4) == [0, 0, 0, 0]

    def test_rejects_unnormalized(self):
        with pytest.raises(ContractViolation):
            digit_split([[1.0]], 2, 3)

    def test_positions_and_radix(self):
        ds = digit_split([[0.1, -0.2], [0.3, 0.9]], 4, 3)
        assert [d.position for d in ds] == [1, 2, 3]
        assert all(d.radix == 4 for d in ds)

    @given(
        st.floats(-1, 1, exclude_min=True, exclude_max=True, allow_nan=False),
        st.sampled_from([2, 3, 4, 8, 10, 16]),
        st.integers(1, 12),
    )
    def test_matches_exact_oracle(self, v, r, k):
        assert split_scalar(v, r, k) == oracle_digits(v, r, k)

    def test_truncation_error_and_bounds(self, rng):
        v = rng.uniform(-1, 1, size=(100, 100))
        for r in (2, 4, 10):
            for k in (1, 4, 8):
                ds = digit_split(v, r, k)
                approx = sum(Fraction(1, r**d.position) * d.entries.astype(object) for d in ds)
                err = np.abs(v.astype(object) - approx)
                assert all(e < Fraction(1, r**k) for e in err.ravel())
                for d in ds:
                    assert np.abs(d.entries).max() <= r - 1
                    # signs agree with the source or are zero
                    assert np.all((d.entries == 0) | (np.sign(d.entries) == np.sign(v)))

    def test_large_rk_uses_exact_integers(self):
        v = 0.123456789
        assert split_scalar(v, 10, 25) == oracle_digits(v, 10, 25)


class TestPermute:
    def test_identity(self, rng):
        m = rng.integers(-3, 4, size=(5, 5))
        assert np.array_equal(permute_matrix(m, np.arange(5)), m)

    def test_swap(self):
        a, b, c, d = 1, 2, 3, 4
        assert permute_matrix([[a, b], [c, d]], [1, 0]).tolist() == [[d, c], [b, a]]

    def test_definition(self, rng):
        m = rng.integers(-9, 10, size=(6, 6))
        s = rng.permutation(6)
        out = permute_matrix(m, s)
        for i in range(6):
            for j in range(6):
                assert out[i, j] == m[s[i], s[j]]

    def test_inverse_round_trip(self, rng):
        for _ in range(20):
            n = int(rng.integers(1, 10))
            m = rng.integers(-9, 10, size=(n, n))
            s = rng.permutation(n)
            assert np.array_equal(permute_matrix(permute_matrix(m, s), np.argsort(s)), m)
            assert np.array_equal(unpermute_matrix(permute_matrix(m, s), s), m)

    def test_rejects_non_bijection(self):
        with pytest.raises(ContractViolation):
            permute_matrix(np.eye(3), [0, 0, 1])


class TestDecoy:
    def test_bounds_binary(self):
        d = make_decoy(20, 2, seed=1)
        assert set(np.unique(d)) <= {-1, 0, 1}

    def test_deterministic(self):
        assert np.array_equal(make_decoy(8, 5, 3), make_decoy(8, 5, 3))

    def test_uniform_histogram(self):
        r = 4
        d = make_decoy(64, r, seed=11)
        counts = np.bincount((d + r - 1).ravel(), minlength=2 * r - 1)
        assert stats.chisquare(counts).pvalue > 0.001

    def test_sign_pattern(self, rng):
        signs = rng.integers(-1, 2, size=(10, 10))
        d = make_decoy(10, 6, seed=2, signs=signs)
        assert np.all((d == 0) | (np.sign(d) == signs))
        assert np.abs(d).max() <= 5


class TestObfuscate:
    def test_pipeline_collapse(self, example_q):
        params = ObfuscationParams(r=10, k=1, seed=5)
        transmit, _ = obfuscate(example_q, params, permute=False, shuffle=False)
        expected = digit_split(normalize(example_q, params.epsilon)[0], 10, 1)[0].entries
        assert np.array_equal(transmit.matrices[0], expected)

    @pytest.mark.parametrize("k,decoys", [(1, 0), (3, 0), (3, 2), (5, 4)])
    def test_cardinality(self, example_q, k, decoys):
        transmit, secret = obfuscate(example_q, ObfuscationParams(r=4, k=k, decoys=decoys, seed=1))
        assert len(transmit) == k + decoys
        assert len(secret.decoy_slots) == decoys

    def test_round_trip_worked_example(self, example_q):
        params = ObfuscationParams(r=10, k=6, seed=3)
        transmit, secret = obfuscate(example_q, params)
        qstar, _ = normalize(example_q, params.epsilon)
        assert np.abs(reconstruct_matrix(transmit, secret).entries - qstar.entries).max() < 1e-6

    @pytest.mark.parametrize("seed", range(10))
    def test_round_trip_random(self, seed):
        rng = np.random.default_rng(seed)
        n, r, k = int(rng.integers(1, 12)), int(rng.integers(2, 11)), int(rng.integers(1, 7))
        q = generate_matrix(MatrixGenSpec(n, seed=seed))
        params = ObfuscationParams(r=r, k=k, decoys=int(rng.integers(0, 3)), seed=seed)
        transmit, secret = obfuscate(q, params)
        qstar, _ = normalize(q, params.epsilon)
        assert np.abs(reconstruct_matrix(transmit, secret).entries - qstar.entries).max() < r**-k
        for m in transmit.matrices:
            assert np.abs(m).max() <= r - 1

    def test_digit_matrices_share_q_signs(self, rng):
        q = rng.normal(size=(8, 8))
        q[rng.random((8, 8)) < 0.3] = 0
        transmit, secret = obfuscate(q, ObfuscationParams(r=3, k=4, decoys=2, seed=9))
        for d in digit_matrices(transmit, secret):
            assert np.all((d == 0) | (np.sign(d) == np.sign(q)))

    def test_zero_leading_digits(self):
        # tiny entries have all-zero first digits; the max element keeps the set non-degenerate
        q = np.array([[1.0, 1e-9], [1e-9, 1e-9]])
        transmit, secret = obfuscate(q, ObfuscationParams(r=10, k=3, seed=0))
        rec = reconstruct_matrix(transmit, secret).entries
        assert rec[0, 1] == rec[1, 0] == rec[1, 1] == 0

    def test_decoys_ignored_by_reconstruction(self, example_q):
        base = ObfuscationParams(r=10, k=4, decoys=3, seed=4)
        transmit, secret = obfuscate(example_q, base)
        scrambled = [
            m if slot not in secret.decoy_slots else np.full_like(m, 9)
            for slot, m in enumerate(transmit.matrices)
        ]
        assert reconstruct_matrix(TransmitSet(scrambled, 10), secret) == reconstruct_matrix(transmit, secret)

    @pytest.mark.parametrize("c", [0.25, 2.0, 3.0, 5.0])
    def test_scale_invariance_integer_matrix(self, example_q, c):
        params = ObfuscationParams(r=4, k=5, decoys=2, seed=8)
        a, _ = obfuscate(example_q, params)
        b, _ = obfuscate(c * example_q, params)
        assert a.to_json() == b.to_json()

    def test_scale_invariance_real_matrix(self, rng):
        q = rng.normal(size=(7, 7))
        params = ObfuscationParams(r=10, k=6, seed=8)
        for c in (0.125, 4.0, 2.0**20):
            assert obfuscate(q, params)[0].to_json() == obfuscate(c * q, params)[0].to_json()

    def test_deterministic(self, example_q):
        params = ObfuscationParams(r=4, k=3, decoys=1, seed=123)
        a, sa = obfuscate(example_q, params)
        b, sb = obfuscate(example_q, params)
        assert a.to_json() == b.to_json()
        assert sa.to_json() == sb.to_json()

    def test_degenerate(self):
        with pytest.raises(DegenerateInputError):
            obfuscate(np.zeros((3, 3)), ObfuscationParams())

    def test_mismatched_pair(self, example_q):
        t1, _ = obfuscate(example_q, ObfuscationParams(r=4, k=3, seed=1))
        _, s2 = obfuscate(example_q, ObfuscationParams(r=4, k=2, seed=1))
        with pytest.raises(ContractViolation):
            reconstruct_matrix(t1, s2)

    @pytest.mark.parametrize(
        "kwargs", [dict(r=1), dict(k=0), dict(decoys=-1), dict(epsilon=0.0), dict(epsilon=1.0), dict(decoy_mode="x")]
    )
    def test_bad_params(self, kwargs):
        with pytest.raises(ContractViolation):
            ObfuscationParams(**kwargs)


class TestSerialization:
    def test_transmit_set_carries_only_public_fields(self, example_q):
        transmit, secret = obfuscate(example_q, ObfuscationParams(r=4, k=3, decoys=2, seed=6))
        obj = transmit.to_json()
        assert set(obj) == {"radix", "matrices"}
        for m in obj["matrices"]:
            assert set(m) == {"n", "entries"}
            assert all(isinstance(e, int) for row in m["entries"] for e in row)
        text = json.dumps(obj)
        assert repr(secret.scale) not in text
        assert TransmitSet.from_json(obj).to_json() == obj

    def test_secret_round_trip(self, example_q, tmp_path):
        _, secret = obfuscate(example_q, ObfuscationParams(r=4, k=3, decoys=2, seed=6))
        path = tmp_path / "secret.json"
        save_secret(secret, path)
        assert (path.stat().st_mode & 0o777) == 0o600
        obj = json.loads(path.read_text())
        assert set(obj) == {"n", "scale", "sigmas", "send_order", "decoy_slots", "params", "seed"}
        # indices are stored 1-based
        assert all(sorted(s) == [1, 2, 3, 4] for s in obj["sigmas"])
        assert sorted(obj["send_order"]) == [1, 2, 3, 4, 5]
        assert obj["decoy_slots"] == [i + 1 for i, item in enumerate(obj["send_order"]) if item > 3]
        loaded = load_secret(path)
        assert loaded.to_json() == secret.to_json()

    def test_secret_rejects_inconsistent_decoys(self, example_q):
        _, secret = obfuscate(example_q, ObfuscationParams(r=4, k=2, decoys=1, seed=6))
        obj = secret.to_json()
        obj["decoy_slots"] = [slot for slot in (1, 2, 3) if slot not in obj["decoy_slots"]][:1]
        with pytest.raises(ContractViolation):
            ObfuscationSecret.from_json(obj)

    def test_secret_rejects_bad_permutation(self, example_q):
        _, secret = obfuscate(example_q, ObfuscationParams(r=4, k=2, seed=6))
        obj = secret.to_json()
        obj["sigmas"][0] = [1, 1, 2, 3]
        with pytest.raises(ContractViolation):
            ObfuscationSecret.from_json(obj)
