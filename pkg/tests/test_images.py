import numpy as np
import pytest

from nightadapt import (
    ChannelStats,
    ImagePlanes,
    NightPrior,
    ValidationError,
    compute_stats,
    night_prior_from_images,
)


class TestImagePlanes:
    def test_accepts_1_and_3_channels(self):
        ImagePlanes(np.zeros((1, 4, 4)))
        ImagePlanes(np.ones((3, 4, 4)))

    @pytest.mark.parametrize("channels", [0, 2, 4])
    def test_rejects_other_channel_counts(self, channels):
        with pytest.raises(ValidationError):
            ImagePlanes(np.zeros((channels, 4, 4)))

    def test_rejects_out_of_range_samples(self):
        with pytest.raises(ValidationError):
            ImagePlanes(np.full((1, 2, 2), 1.5))
        with pytest.raises(ValidationError):
            ImagePlanes(np.full((1, 2, 2), -0.1))

    def test_rejects_nan(self):
        arr = np.zeros((1, 2, 2))
        arr[0, 0, 0] = np.nan
        with pytest.raises(ValidationError):
            ImagePlanes(arr)

    def test_from_clamped_clips(self):
        img = ImagePlanes.from_clamped(np.array([[[-1.0, 2.0]]]))
        assert img.planes.min() == 0.0
        assert img.planes.max() == 1.0


class TestComputeStats:
    def test_constant_image(self):
        img = ImagePlanes(np.full((3, 5, 5), 0.5))
        st = compute_stats(img)
        assert np.array_equal(st.mean, [0.5, 0.5, 0.5])
        assert np.array_equal(st.std, [0.0, 0.0, 0.0])

    def test_two_pixel_gray(self):
        img = ImagePlanes(np.array([[[0.0, 1.0]]]))
        st = compute_stats(img)
        assert st.mean[0] == 0.5
        assert st.std[0] == 0.5

    def test_matches_two_pass_oracle(self):
        rng = np.random.default_rng(42)
        img = ImagePlanes(rng.random((3, 8, 8)))
        st = compute_stats(img)
        for c in range(3):
            samples = img.planes[c].ravel()
            mean = sum(samples) / samples.size
            var = sum((x - mean) ** 2 for x in samples) / samples.size
            assert abs(st.mean[c] - mean) <= 1e-12
            assert abs(st.std[c] - np.sqrt(var)) <= 1e-12


class TestNightPrior:
    def test_requires_at_least_one_image(self):
        with pytest.raises(ValidationError):
            night_prior_from_images([])
        with pytest.raises(ValidationError):
            NightPrior(ChannelStats(np.array([0.5]), np.array([0.1])), 0)

    def test_uniform_average_of_per_image_stats(self):
        a = ImagePlanes(np.full((1, 2, 2), 0.2))
        b = ImagePlanes(np.array([[[0.0, 1.0], [0.0, 1.0]]]))
        prior = night_prior_from_images([a, b])
        assert prior.sample_count == 2
        assert prior.stats.mean[0] == pytest.approx((0.2 + 0.5) / 2)
        assert prior.stats.std[0] == pytest.approx((0.0 + 0.5) / 2)

    def test_mixed_channel_counts_rejected(self):
        a = ImagePlanes(np.full((1, 2, 2), 0.2))
        b = ImagePlanes(np.full((3, 2, 2), 0.2))
        with pytest.raises(ValidationError):
            night_prior_from_images([a, b])
