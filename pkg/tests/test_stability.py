import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from perinet.core import ExpPolyKernel, GeneralKernel, JumpRate
from perinet.errors import ConfigurationError, PreconditionError
from perinet.stability import (DominationSequence, check_global, check_periodic,
                               classify_decay, companion_matrices, convolution_bound,
                               domination_sequence, spectral_radius)

nonneg = arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)).map(lambda s: (s[0], s[0])),
                elements=st.floats(0, 5))


class TestSpectralRadius:
    @settings(max_examples=60, deadline=None)
    @given(nonneg)
    def test_matches_eigvals(self, a):
        want = np.max(np.abs(np.linalg.eigvals(a)))
        assert spectral_radius(a) == pytest.approx(want, abs=1e-7 * max(1.0, want))

    def test_zero_matrix(self):
        assert spectral_radius(np.zeros((3, 3))) == 0.0

    def test_nilpotent(self):
        assert spectral_radius(np.array([[0.0, 1.0], [0.0, 0.0]])) == pytest.approx(0.0, abs=1e-8)

    def test_permutation(self):
        assert spectral_radius(np.array([[0.0, 1.0], [1.0, 0.0]])) == pytest.approx(1.0)

    def test_signed_matrix_uses_dense_path(self):
        assert spectral_radius(np.array([[0.0, -2.0], [2.0, 0.0]])) == pytest.approx(2.0)

    def test_rejects_non_square(self):
        with pytest.raises(ConfigurationError):
            spectral_radius(np.ones((2, 3)))

    @settings(max_examples=30, deadline=None)
    @given(nonneg, st.floats(0.1, 10))
    def test_homogeneous(self, a, c):
        assert spectral_radius(c * a) == pytest.approx(c * spectral_radius(a), rel=1e-6, abs=1e-7)


class TestChecks:
    def test_scalar_global_condition(self):
        assert check_global(GeneralKernel.scalar([0.5, 0.3])).stable
        assert not check_global(GeneralKernel.scalar([0.7, 0.3])).stable

    def test_lipschitz_scales_radius(self):
        kern = GeneralKernel.scalar([0.4])
        assert check_global(kern, L=2.0).spectral_radius == pytest.approx(0.8)

    def test_margin(self):
        kern = GeneralKernel.scalar([0.95])
        assert check_global(kern).stable
        assert not check_global(kern, margin=0.1).stable

    def test_periodic_product(self):
        kern = GeneralKernel.scalar(np.array([[2.0], [0.3]]))
        verdict = check_periodic(kern)
        assert verdict.spectral_radius == pytest.approx(0.6, abs=1e-9)
        assert verdict.details["ignored_tail_l1"] == 0.0

    def test_companion_shift_structure(self):
        kern = GeneralKernel.scalar(np.array([[0.1, 0.2, 0.3, 0.4], [0.5, 0.6, 0.7, 0.8]]))
        gam = companion_matrices(kern, m=2)
        assert gam.shape == (2, 4, 4)
        np.testing.assert_array_equal(gam[0, 0], [0.1, 0.2, 0.3, 0.4])
        np.testing.assert_array_equal(gam[0, 1:, :3], np.eye(3))

    def test_companion_type_two_uses_event_season(self):
        kern = GeneralKernel.scalar(np.array([[0.1, 0.2], [0.5, 0.6]]))
        gam = companion_matrices(kern, m=1, periodicity="II")
        # season 1 at lag 1 looks at season 2 (slot 1), lag 2 at season 1
        np.testing.assert_array_equal(gam[0, 0], [0.5, 0.2])

    def test_periodic_reports_ignored_tail(self):
        kern = GeneralKernel.scalar([0.1, 0.1, 0.1])
        assert check_periodic(kern, m=1).details["ignored_tail_l1"] == pytest.approx(0.2)

    def test_exp_kernel_domination_closed_form(self):
        g = np.full((1, 1, 1, 1), 0.5)
        kern = ExpPolyKernel(g, 1.0)
        dom = domination_sequence(kern)
        r = math.exp(-3.0)
        assert dom.total[0, 0] == pytest.approx(0.5 * r / (1 - r), rel=1e-12)

    def test_softplus_lipschitz_is_one(self):
        assert JumpRate.softplus().lipschitz == 1.0


class TestDecay:
    def test_exponential_closed_form(self):
        dom = DominationSequence.exponential([0.5], [1.0])
        assert classify_decay(dom).delta == pytest.approx(1 - math.log(1.5), abs=1e-3)

    def test_sampled_exponential(self):
        k = np.arange(1, 200)
        dom = DominationSequence(0.5 * np.exp(-k * 1.0))
        dec = classify_decay(dom)
        assert dec.kind == "exponential"
        assert dec.delta == pytest.approx(1 - math.log(1.5), abs=1e-3)

    def test_polynomial(self):
        k = np.arange(1, 4000, dtype=float)
        dom = DominationSequence(0.1 * k**-3.0)
        dec = classify_decay(dom)
        assert dec.kind == "polynomial"
        assert dec.beta == pytest.approx(0.5, abs=1e-6)

    def test_finite_support(self):
        dec = classify_decay(DominationSequence(np.array([0.5])))
        assert dec.kind == "exponential" and dec.delta == pytest.approx(math.log(2), abs=1e-3)

    def test_unstable_rejected(self):
        with pytest.raises(PreconditionError):
            classify_decay(DominationSequence.exponential([5.0], [1.0]))

    def test_negative_entries_rejected(self):
        with pytest.raises(ConfigurationError):
            DominationSequence(np.array([-0.1]))


class TestConvolutionBound:
    def test_constant_driver(self):
        dom = DominationSequence(np.array([0.5]))
        assert convolution_bound(dom, 1.0)[0] == pytest.approx(2.0)

    def test_sequence_driver_matches_resolvent(self):
        dom = DominationSequence(np.array([0.5]))
        k = np.zeros((30, 1))
        k[0] = 1.0
        bound = convolution_bound(dom, k)[:, 0]
        np.testing.assert_allclose(bound, 0.5 ** np.arange(30), rtol=1e-12)

    def test_requires_stability(self):
        with pytest.raises(PreconditionError):
            convolution_bound(DominationSequence(np.array([1.5])), 1.0)
