import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from foleyforge.audio import (
    AudioBuffer,
    SegmentSpec,
    load_wav,
    peak_normalize,
    resample,
    save_wav,
    segment,
)


def test_buffer_rejects_nonfinite():
    with pytest.raises(ValueError):
        AudioBuffer(np.array([0.0, np.nan]), 44100)
    with pytest.raises(ValueError):
        AudioBuffer(np.zeros(4), 0)


class TestWavIO:
    def test_zeros_roundtrip(self, tmp_path):
        buf = AudioBuffer(np.zeros(1000), 44100)
        save_wav(buf, tmp_path / "z.wav", 16)
        back = load_wav(tmp_path / "z.wav")
        assert back.sample_rate == 44100
        assert np.all(back.samples == 0.0)

    def test_pcm16_scaling(self, tmp_path):
        # sample value 16384 must decode as 16384/32768 = 0.5
        from scipy.io import wavfile

        wavfile.write(str(tmp_path / "half.wav"), 44100, np.full(64, 16384, dtype=np.int16))
        buf = load_wav(tmp_path / "half.wav")
        assert np.all(buf.samples == 0.5)

    def test_stereo_downmix(self, tmp_path):
        from scipy.io import wavfile

        data = np.stack(
            [np.full(128, 0.2, dtype=np.float32), np.full(128, 0.6, dtype=np.float32)], axis=1
        )
        wavfile.write(str(tmp_path / "st.wav"), 48000, data)
        buf = load_wav(tmp_path / "st.wav")
        assert buf.samples == pytest.approx(np.full(128, 0.4), abs=1e-7)

    def test_f32_exact(self, tmp_path):
        buf = AudioBuffer(np.full(50, 0.5), 22050)
        save_wav(buf, tmp_path / "c.wav", "f32")
        back = load_wav(tmp_path / "c.wav")
        assert np.all(back.samples == 0.5)

    def test_pcm16_roundtrip_within_quantum(self, tmp_path):
        rng = np.random.default_rng(0)
        buf = AudioBuffer(rng.uniform(-1, 1, 4096), 44100)
        save_wav(buf, tmp_path / "r.wav", 16)
        back = load_wav(tmp_path / "r.wav")
        assert np.max(np.abs(back.samples - buf.samples)) <= 2.0**-15

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_wav(tmp_path / "nope.wav")

    def test_unsupported_encoding(self, tmp_path):
        from scipy.io import wavfile

        wavfile.write(str(tmp_path / "i32.wav"), 44100, np.zeros(16, dtype=np.int32))
        with pytest.raises(ValueError, match="unsupported"):
            load_wav(tmp_path / "i32.wav")

    def test_zero_length(self, tmp_path):
        from scipy.io import wavfile

        wavfile.write(str(tmp_path / "empty.wav"), 44100, np.zeros(0, dtype=np.int16))
        with pytest.raises(ValueError, match="zero-length"):
            load_wav(tmp_path / "empty.wav")


class TestResample:
    def test_identity(self):
        buf = AudioBuffer(np.random.default_rng(1).normal(size=1000), 44100)
        assert resample(buf, 44100) is buf

    def test_sine_oracle(self):
        # 1 kHz sine upsampled 22050 -> 44100 must track the analytic sine.
        fs_in, fs_out, f0 = 22050, 44100, 1000.0
        t_in = np.arange(fs_in) / fs_in
        buf = AudioBuffer(np.sin(2 * np.pi * f0 * t_in), fs_in)
        out = resample(buf, fs_out)
        assert out.sample_rate == fs_out
        assert abs(len(out) - fs_out) <= 1
        t_out = np.arange(len(out)) / fs_out
        ref = np.sin(2 * np.pi * f0 * t_out)
        interior = slice(256, len(out) - 256)
        assert np.max(np.abs(out.samples[interior] - ref[interior])) < 1e-3

    def test_downsample_sine(self):
        fs_in, fs_out, f0 = 44100, 22050, 1000.0
        t_in = np.arange(2 * fs_in) / fs_in
        buf = AudioBuffer(np.sin(2 * np.pi * f0 * t_in), fs_in)
        out = resample(buf, fs_out)
        t_out = np.arange(len(out)) / fs_out
        ref = np.sin(2 * np.pi * f0 * t_out)
        interior = slice(256, len(out) - 256)
        assert np.max(np.abs(out.samples[interior] - ref[interior])) < 1e-3

    def test_silence(self):
        buf = AudioBuffer(np.zeros(5000), 48000)
        out = resample(buf, 44100)
        assert np.all(out.samples == 0.0)

    def test_duration_preserved(self):
        buf = AudioBuffer(np.ones(48000), 48000)
        out = resample(buf, 44100)
        assert abs(len(out) - 44100) <= 1

    def test_linearity(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=3000)
        a = 3.7
        buf = AudioBuffer(x, 48000)
        scaled = AudioBuffer(a * x, 48000)
        lhs = resample(scaled, 44100).samples
        rhs = a * resample(buf, 44100).samples
        denom = np.maximum(np.abs(rhs), 1e-12)
        assert np.max(np.abs(lhs - rhs) / denom) < 1e-9


class TestSegment:
    def test_12s_zero_pad(self):
        fs = 44100
        buf = AudioBuffer(np.ones(12 * fs), fs)
        segs = segment(buf, SegmentSpec())
        assert len(segs) == 3
        assert all(len(s) == 5 * fs for s in segs)
        assert np.all(segs[2].samples[: 2 * fs] == 1.0)
        assert np.all(segs[2].samples[2 * fs :] == 0.0)

    def test_exact_length(self):
        fs = 8000
        x = np.random.default_rng(3).normal(size=5 * fs)
        segs = segment(AudioBuffer(x, fs), SegmentSpec())
        assert len(segs) == 1
        assert np.array_equal(segs[0].samples, x)

    def test_drop_short_remainder(self):
        fs = 8000
        buf = AudioBuffer(np.ones(int(5.5 * fs)), fs)
        segs = segment(buf, SegmentSpec(pad_policy="drop"))
        assert len(segs) == 1

    def test_reassembly_prefix(self):
        fs = 4000
        x = np.random.default_rng(9).normal(size=int(13.2 * fs))
        segs = segment(AudioBuffer(x, fs), SegmentSpec(segment_seconds=5.0))
        glued = np.concatenate([s.samples for s in segs])
        n = min(len(glued), len(x))
        assert np.array_equal(glued[: 13 * 4000], x[: 13 * 4000])
        assert n >= 13 * 4000


class TestPeakNormalize:
    def test_zeros_unchanged(self):
        buf = AudioBuffer(np.zeros(10), 44100)
        assert np.all(peak_normalize(buf).samples == 0.0)

    def test_constant(self):
        buf = AudioBuffer(np.full(10, 0.25), 44100)
        assert np.all(peak_normalize(buf).samples == 1.0)

    def test_shape_preserved(self):
        buf = AudioBuffer(np.array([-0.5, 0.1]), 44100)
        out = peak_normalize(buf)
        assert out.samples == pytest.approx([-1.0, 0.2])

    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=64))
    @settings(max_examples=200, deadline=None)
    def test_idempotent(self, values):
        buf = AudioBuffer(np.array(values, dtype=np.float64), 44100)
        once = peak_normalize(buf)
        twice = peak_normalize(once)
        assert np.array_equal(once.samples, twice.samples)
        if buf.peak() > 0:
            assert once.peak() == 1.0
