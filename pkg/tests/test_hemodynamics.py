import numpy as np
import pytest

from alignspace.errors import ConfigurationError, ValidationError
from alignspace.hemodynamics import (
    FeatureSeries,
    HrfParams,
    align_to_volumes,
    canonical_hrf,
    convolve_hrf,
    resample_kernel_to_tr,
)

from oracles import brute_convolve


def test_kernel_starts_at_zero():
    kernel = canonical_hrf(HrfParams())
    assert kernel[0] == 0.0


def test_kernel_peak_location_default_params():
    p = HrfParams()
    kernel = canonical_hrf(p)
    peak_time = np.argmax(kernel) * p.dt
    assert 4.5 <= peak_time <= 6.0


def test_kernel_peak_normalized():
    kernel = canonical_hrf(HrfParams())
    assert kernel.max() == 1.0


def test_kernel_nonnegative_without_undershoot():
    kernel = canonical_hrf(HrfParams(undershoot_ratio=0.0))
    assert np.all(kernel >= 0.0)


def test_kernel_has_undershoot_by_default():
    assert canonical_hrf(HrfParams()).min() < 0.0


def test_hrf_params_validation():
    with pytest.raises(ValidationError):
        HrfParams(peak_delay=-1.0)
    with pytest.raises(ValidationError):
        HrfParams(duration=10.0)  # shorter than undershoot delay
    with pytest.raises(ValidationError):
        HrfParams(undershoot_ratio=-0.1)


def test_impulse_response_equals_resampled_kernel():
    p = HrfParams()
    tr = 2.0
    T = 10
    Z = np.zeros((T, 2))
    Z[0, 0] = 1.0
    out = convolve_hrf(FeatureSeries(tr=tr, Z=Z), p)
    kernel = resample_kernel_to_tr(canonical_hrf(p), p.dt, tr)
    expected = np.zeros(T)
    expected[: min(T, len(kernel))] = kernel[:T]
    assert out.Z[:, 0].tolist() == expected.tolist()  # exact
    assert not out.Z[:, 1].any()
    assert out.convolved


def test_zero_series_stays_zero():
    out = convolve_hrf(FeatureSeries(tr=1.0, Z=np.zeros((20, 3))))
    assert not out.Z.any()


def test_convolution_matches_brute_force():
    rng = np.random.default_rng(21)
    p = HrfParams()
    tr = 1.5
    Z = rng.standard_normal((50, 3))
    out = convolve_hrf(FeatureSeries(tr=tr, Z=Z), p)
    kernel = resample_kernel_to_tr(canonical_hrf(p), p.dt, tr)
    for d in range(3):
        ref = brute_convolve(Z[:, d], kernel)
        assert np.max(np.abs(out.Z[:, d] - ref)) <= 1e-12


def test_convolution_linearity():
    rng = np.random.default_rng(22)
    tr = 1.0
    A = rng.standard_normal((30, 2))
    B = rng.standard_normal((30, 2))
    a, b = 2.5, -1.25
    combined = convolve_hrf(FeatureSeries(tr=tr, Z=a * A + b * B))
    separate = a * convolve_hrf(FeatureSeries(tr=tr, Z=A)).Z + b * convolve_hrf(
        FeatureSeries(tr=tr, Z=B)
    ).Z
    assert np.max(np.abs(combined.Z - separate)) <= 1e-12


def test_convolution_causality():
    rng = np.random.default_rng(23)
    tr = 1.0
    Z = rng.standard_normal((40, 1))
    out1 = convolve_hrf(FeatureSeries(tr=tr, Z=Z))
    Z2 = Z.copy()
    Z2[25:] += 10.0  # perturb only late samples
    out2 = convolve_hrf(FeatureSeries(tr=tr, Z=Z2))
    assert np.array_equal(out1.Z[:25], out2.Z[:25])
    assert not np.array_equal(out1.Z[25:], out2.Z[25:])


def test_convolution_deterministic():
    rng = np.random.default_rng(24)
    Z = rng.standard_normal((25, 4))
    a = convolve_hrf(FeatureSeries(tr=2.0, Z=Z))
    b = convolve_hrf(FeatureSeries(tr=2.0, Z=Z))
    assert a.Z.tobytes() == b.Z.tobytes()


def test_tr_longer_than_kernel_is_configuration_error():
    with pytest.raises(ConfigurationError):
        convolve_hrf(FeatureSeries(tr=40.0, Z=np.zeros((5, 1))))


def test_double_convolution_rejected():
    out = convolve_hrf(FeatureSeries(tr=1.0, Z=np.zeros((5, 1))))
    with pytest.raises(ValidationError):
        convolve_hrf(out)


def test_hold_single_onset():
    z = np.array([1.0, -2.0])
    series = align_to_volumes([0.0], [z], tr=2.0, n_volumes=5)
    assert np.array_equal(series.Z, np.tile(z, (5, 1)))
    assert not series.convolved


def test_hold_two_onsets():
    za = np.array([1.0])
    zb = np.array([2.0])
    series = align_to_volumes([0.0, 2 * 1.5], [za, zb], tr=1.5, n_volumes=4)
    assert series.Z.ravel().tolist() == [1.0, 1.0, 2.0, 2.0]


def test_hold_zero_rows_before_first_onset():
    series = align_to_volumes([2.0], [np.array([5.0])], tr=1.0, n_volumes=4)
    assert series.Z.ravel().tolist() == [0.0, 0.0, 5.0, 5.0]


def test_no_onsets_rejected():
    with pytest.raises(ValidationError):
        align_to_volumes([], [], tr=1.0, n_volumes=4)


def test_onset_beyond_scan_named():
    with pytest.raises(ValidationError, match="9.9"):
        align_to_volumes(
            [0.0, 9.9], [np.zeros(1), np.zeros(1)], tr=1.0, n_volumes=5
        )


def test_decreasing_onsets_rejected():
    with pytest.raises(ValidationError, match="nondecreasing"):
        align_to_volumes(
            [2.0, 1.0], [np.zeros(1), np.zeros(1)], tr=1.0, n_volumes=5
        )
