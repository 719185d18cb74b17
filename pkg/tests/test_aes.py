import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import chi2

from oracles import reference_sbox
from zleak.aes import (IntermediateSelector, SharedSecret, hamming_weight, intermediate_value,
                       sbox, share_recombine, share_split)

byte = st.integers(0, 255)


class TestSbox:
    def test_known_values_against_field_oracle(self):
        assert sbox(0x00) == reference_sbox(0x00) == 0x63
        assert sbox(0x53) == reference_sbox(0x53) == 0xED

    def test_full_table_matches_oracle(self):
        assert all(sbox(x) == reference_sbox(x) for x in range(256))

    def test_bijective(self):
        assert sorted(sbox(x) for x in range(256)) == list(range(256))


class TestIntermediateValue:
    def test_bit0_of_zero_inputs(self):
        assert intermediate_value(0x00, 0x00, IntermediateSelector(0)) == 1  # bit 0 of 0x63

    def test_equal_key_plaintext(self):
        for v in (0x00, 0x5A, 0xFF):
            assert intermediate_value(v, v, IntermediateSelector(None)) == 0x63

    def test_exhaustive_table(self):
        sel = IntermediateSelector(None)
        for k in range(0, 256, 17):
            for p in range(256):
                assert intermediate_value(k, p, sel) == reference_sbox(k ^ p)

    @given(byte, byte)
    def test_key_plaintext_xor_symmetry(self, k, p):
        sel = IntermediateSelector(None)
        assert intermediate_value(k, p, sel) == intermediate_value(0, k ^ p, sel)

    def test_selector_validation(self):
        with pytest.raises(ValueError):
            IntermediateSelector(8)


class TestHammingWeight:
    def test_anchors(self):
        assert hamming_weight(0x00) == 0
        assert hamming_weight(0xFF) == 8
        assert hamming_weight(0x93) == 4

    @given(byte)
    def test_complement_sums_to_eight(self, x):
        assert hamming_weight(x) + hamming_weight(x ^ 0xFF) == 8


class TestSharing:
    def test_split_recombine_identity(self):
        assert share_recombine(share_split(0x93, 2, 123)) == 0x93

    def test_first_order_zero_secret(self):
        shared = share_split(0x00, 1, 5)
        assert shared.shares[0] == shared.shares[1]

    def test_two_equal_shares_cancel(self):
        assert share_recombine(SharedSecret((0x42, 0x42))) == 0x00

    def test_paper_worked_example(self):
        assert share_recombine(SharedSecret((0xC6, 0x30, 0x65))) == 0x93

    @given(byte, st.integers(1, 3), st.integers(0, 2**32))
    def test_identity_property(self, secret, order, seed):
        shared = share_split(secret, order, seed)
        assert len(shared.shares) == order + 1
        assert share_recombine(shared) == secret

    def test_determinism(self):
        assert share_split(0x7E, 2, 99).shares == share_split(0x7E, 2, 99).shares

    def test_marginal_uniformity_chi_square(self):
        # smaller companion to the acceptance-scale check
        counts = np.zeros((3, 256))
        n = 4000
        for seed in range(n):
            for si, s in enumerate(share_split(0xA5, 2, seed).shares):
                counts[si, s] += 1
        bound = chi2.ppf(0.99, 255)
        expected = n / 256
        for si in range(3):
            stat = ((counts[si] - expected) ** 2 / expected).sum()
            assert stat < bound

    def test_validation(self):
        with pytest.raises(ValueError):
            share_split(0x10, 0, 1)
        with pytest.raises(ValueError):
            SharedSecret((0x10,))
